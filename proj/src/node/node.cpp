#include <algorithm>
#include <sstream>

#include "meshfl/error.hpp"
#include "meshfl/node.hpp"

namespace meshfl {

namespace {

Duration seconds(double s) {
  return std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s));
}

std::string join_ids(const std::set<NodeId>& ids) {
  std::ostringstream out;
  out << '{';
  bool first = true;
  for (auto id : ids) {
    out << (first ? "" : ",") << id;
    first = false;
  }
  out << '}';
  return out.str();
}

std::vector<Vector> ordered_inputs(const std::map<NodeId, Vector>& inputs) {
  std::vector<Vector> out;
  out.reserve(inputs.size());
  for (const auto& [id, v] : inputs) out.push_back(v);
  return out;
}

}  // namespace

Node::Node(NodeConfig cfg, std::unique_ptr<Transport> transport, TimePoint epoch)
    : cfg_(std::move(cfg)), epoch_(epoch), metrics_(epoch) {
  MessengerConfig mc;
  mc.self = cfg_.id;
  mc.heartbeat = cfg_.heartbeat();
  mc.seed = cfg_.train_seed ^ 0x5DEECE66Dull;
  messenger_ = std::make_unique<Messenger>(std::move(transport), mc);
  logger_ = cfg_.log_dir.empty() ? std::make_unique<NodeLogger>(cfg_.id)
                                 : std::make_unique<NodeLogger>(cfg_.id, cfg_.log_dir);
  state_.id = cfg_.id;
  state_.role = cfg_.role;
  state_.architecture = cfg_.architecture;
  state_.rounds = static_cast<std::uint32_t>(cfg_.training.rounds);
  if (cfg_.architecture == Architecture::SDFL && !cfg_.schedule.empty())
    state_.current_leader = cfg_.schedule.front();
}

Node::~Node() {
  {
    std::lock_guard lock(inbox_mu_);
    halt_ = true;
  }
  inbox_cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  if (sampler_) sampler_->stop();
  messenger_->kill();
}

std::string Node::start() {
  trainer_ = make_trainer(cfg_.trainer);
  if (cfg_.role != Role::Proxy) data_ = load_node_data(cfg_);
  state_.params = init_params(cfg_.trainer, cfg_.init_seed);
  const auto address = messenger_->start(
      [this](const Message& msg, NodeId from) {
        Event ev;
        ev.kind = Event::Kind::Delivered;
        ev.msg = msg;
        ev.peer = from;
        push(std::move(ev));
      },
      [this](NodeId peer, LinkState state) {
        Event ev;
        ev.kind = Event::Kind::Link;
        ev.peer = peer;
        ev.state = state;
        push(std::move(ev));
      });
  logger_->info("node " + std::to_string(cfg_.id) + " listening at " + address + " as " +
                to_string(cfg_.role) + " (" + to_string(cfg_.architecture) + ")");
  const auto period = std::chrono::duration_cast<std::chrono::milliseconds>(seconds(cfg_.monitor_period_s));
  sampler_ = std::make_unique<PeriodicTask>(std::max(period, std::chrono::milliseconds(1)),
                                            [this] { sample_metrics(); });
  thread_ = std::thread([this] { run(); });
  return address;
}

void Node::connect(NodeId peer, const std::string& address, bool topology) {
  messenger_->connect(peer, address, topology);
  logger_->debug("dialed " + std::to_string(peer) + " at " + address);
}

void Node::start_federation() {
  StartPayload start{static_cast<std::uint32_t>(cfg_.training.rounds),
                     static_cast<std::uint32_t>(cfg_.training.epochs)};
  auto msg = messenger_->make(MsgType::StartLearning, 0, cfg_.flood_ttl, encode_start(start));
  messenger_->flood(msg);
  logger_->info("START_LEARNING flooded: rounds=" + std::to_string(start.rounds) +
                " epochs=" + std::to_string(start.epochs));
  Event ev;
  ev.kind = Event::Kind::Delivered;
  ev.msg = msg;
  ev.peer = cfg_.id;
  push(std::move(ev));
}

void Node::broadcast(MsgType type) {
  auto msg = messenger_->make(type, round(), cfg_.flood_ttl);
  messenger_->flood(msg);
  Event ev;
  ev.kind = Event::Kind::Delivered;
  ev.msg = msg;
  ev.peer = cfg_.id;
  push(std::move(ev));
}

void Node::push(Event ev) {
  {
    std::lock_guard lock(inbox_mu_);
    inbox_.push_back(std::move(ev));
  }
  inbox_cv_.notify_one();
}

bool Node::wait_until(const std::function<bool()>& done, TimePoint deadline, bool stop_on_interrupt) {
  while (true) {
    if (done()) return true;
    if (stop_on_interrupt && interrupted()) return false;
    Event ev;
    {
      std::unique_lock lock(inbox_mu_);
      if (!inbox_cv_.wait_until(lock, deadline, [this] { return !inbox_.empty() || halt_; }))
        return done();
      if (halt_) return done();
      ev = std::move(inbox_.front());
      inbox_.pop_front();
    }
    apply(ev);
  }
}

bool Node::interrupted() const {
  {
    std::lock_guard lock(inbox_mu_);
    if (halt_) return true;
  }
  std::lock_guard lock(state_mu_);
  return killed_ || state_.shutdown || !state_.started;
}

void Node::apply(const Event& ev) {
  if (ev.kind == Event::Kind::Link) {
    const auto level = ev.state == LinkState::Alive ? LogLevel::Info : LogLevel::Warn;
    logger_->log(level, "link " + std::to_string(ev.peer) + " -> " + to_string(ev.state));
    return;
  }
  if (ev.kind != Event::Kind::Delivered) return;
  const Message& msg = ev.msg;
  logger_->debug("recv " + to_string(msg.type) + " from " + std::to_string(msg.sender) + " via " +
                 std::to_string(ev.peer) + " round " + std::to_string(msg.round));
  if (cfg_.role == Role::Proxy && msg.type == MsgType::Params) {
    proxy_params(msg, ev.peer);
    return;
  }
  HandleResult result;
  {
    std::lock_guard lock(state_mu_);
    result = handle_message(state_, msg);
  }
  switch (result) {
    case HandleResult::DroppedStale:
      logger_->warn("dropped stale PARAMS from " + std::to_string(msg.sender) + " for round " +
                    std::to_string(msg.round) + " (now " + std::to_string(state_.round) + ")");
      break;
    case HandleResult::DroppedShape:
      logger_->warn("ShapeMismatch: PARAMS from " + std::to_string(msg.sender) + " dropped, sender flagged");
      break;
    case HandleResult::StartRejected:
      logger_->warn("START_LEARNING from " + std::to_string(msg.sender) + " rejected: already running");
      break;
    case HandleResult::Started:
      logger_->info("federation started by " + std::to_string(msg.sender));
      break;
    case HandleResult::Leadership:
      logger_->info("LEADERSHIP for round " + std::to_string(msg.round) + " received");
      break;
    case HandleResult::Aborted:
      logger_->warn("STOP_LEARNING: round aborted, back to Idle");
      break;
    case HandleResult::Shutdown:
      logger_->info("STOP received");
      break;
    default:
      break;
  }
}

void Node::set_phase(Phase to) {
  Phase from;
  {
    std::lock_guard lock(state_mu_);
    from = state_.phase;
    state_.transition(to);
  }
  logger_->info("phase " + to_string(from) + " -> " + to_string(to) + " (round " +
                std::to_string(state_.round) + ")");
}

bool Node::is_dead(NodeId peer) const {
  const auto state = messenger_->link_state(peer);
  return state && *state == LinkState::Dead;
}

void Node::send_direct(NodeId peer, const Message& msg) {
  if (messenger_->send(peer, msg))
    logger_->debug("send " + to_string(msg.type) + " to " + std::to_string(peer) + " round " +
                   std::to_string(msg.round));
  else
    logger_->warn("no usable link to " + std::to_string(peer) + " for " + to_string(msg.type));
}

std::vector<std::uint8_t> Node::contributor_payload(const std::set<NodeId>& ids) const {
  std::vector<NodeId> list(ids.begin(), ids.end());
  return encode_node_list(list);
}

void Node::run() {
  try {
    while (true) {
      wait_until([this] { return state_.started || state_.shutdown; }, Clock::now() + std::chrono::hours(24),
                 false);
      {
        std::lock_guard lock(inbox_mu_);
        if (halt_) break;
      }
      if (state_.shutdown || killed_) break;
      if (state_.start) {
        std::lock_guard lock(state_mu_);
        state_.rounds = state_.start->rounds;
        cfg_.training.epochs = state_.start->epochs;
      }
      if (cfg_.role == Role::Proxy)
        run_proxy();
      else
        run_rounds();
      if (completed_ || killed_ || state_.shutdown) break;
      std::lock_guard lock(inbox_mu_);
      if (halt_) break;
    }
  } catch (const Error& e) {
    logger_->error(std::string("node failed: ") + e.what());
    std::lock_guard lock(state_mu_);
    failure_ = e.what();
  }
  {
    std::lock_guard lock(state_mu_);
    finished_ = true;
  }
  finished_cv_.notify_all();
  logger_->flush();
}

void Node::run_rounds() {
  if (state_.phase == Phase::Idle) set_phase(Phase::Training);
  while (state_.round < state_.rounds) {
    RoundOutcome outcome;
    const auto t0 = Clock::now();
    switch (cfg_.architecture) {
      case Architecture::DFL: outcome = dfl_round(); break;
      case Architecture::SDFL: outcome = sdfl_round(); break;
      case Architecture::CFL:
        outcome = cfg_.role == Role::Server ? cfl_server_round() : cfl_trainer_round();
        break;
    }
    if (interrupted()) return;
    outcome.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0);
    finish_round(std::move(outcome));
  }
  std::lock_guard lock(state_mu_);
  completed_ = true;
}

ParamVector Node::train_step() {
  return train_local(*trainer_, state_.params, data_.train, cfg_.training, round_seed(cfg_, state_.round));
}

void Node::die() {
  // Frames queued in earlier rounds would have left during local training.
  messenger_->flush();
  logger_->error("crash injected in round " + std::to_string(state_.round));
  logger_->flush();
  messenger_->kill();
  std::lock_guard lock(state_mu_);
  killed_ = true;
  killed_at_ = Clock::now();
}

RoundOutcome Node::dfl_round() {
  const std::uint32_t r = state_.round;
  RoundOutcome outcome;
  outcome.round = r;
  const ParamVector local = train_step();
  if (cfg_.fail_at_round == r) {
    die();
    return outcome;
  }
  messenger_->flood(messenger_->make(MsgType::ModelsReady, r, cfg_.flood_ttl));

  const std::set<NodeId> expected = messenger_->live_topology_peers();
  const auto params_msg = messenger_->make(MsgType::Params, r, 0, encode_params(local.values));
  for (NodeId peer : expected) send_direct(peer, params_msg);

  set_phase(Phase::WaitingParams);
  const auto deadline = Clock::now() + seconds(cfg_.round_timeout_s);
  wait_until(
      [&] {
        return std::all_of(expected.begin(), expected.end(),
                           [&](NodeId p) { return state_.pending.contains(p) || is_dead(p); });
      },
      deadline);
  if (interrupted()) return outcome;

  set_phase(Phase::Aggregating);
  std::map<NodeId, Vector> inputs;
  inputs[cfg_.id] = to_wire_precision(local.values);
  for (NodeId peer : expected) {
    auto it = state_.pending.find(peer);
    if (it != state_.pending.end()) inputs[peer] = it->second;
  }
  for (const auto& [id, v] : inputs) outcome.contributors.insert(id);
  outcome.timed_out = outcome.contributors.size() != expected.size() + 1;
  if (expected.empty())
    logger_->warn("SoloRound: no live neighbors in round " + std::to_string(r) + ", aggregating self only");

  AggregatorSpec spec = cfg_.aggregator;
  if (inputs.size() < spec.min_inputs()) {
    logger_->warn(to_string(spec.kind) + " needs " + std::to_string(spec.min_inputs()) + " inputs, got " +
                  std::to_string(inputs.size()) + "; using fedavg this round");
    spec = AggregatorSpec{};
  }
  outcome.aggregated = aggregate(spec, ordered_inputs(inputs));
  outcome.aggregator = cfg_.id;
  {
    std::lock_guard lock(state_mu_);
    state_.params.values = outcome.aggregated;
  }
  messenger_->flood(
      messenger_->make(MsgType::ModelsAggregated, r, cfg_.flood_ttl, contributor_payload(outcome.contributors)));
  return outcome;
}

RoundOutcome Node::sdfl_round() {
  const std::uint32_t r = state_.round;
  RoundOutcome outcome;
  outcome.round = r;
  const ParamVector local = train_step();
  if (cfg_.fail_at_round == r) {
    die();
    return outcome;
  }
  messenger_->flood(messenger_->make(MsgType::ModelsReady, r, cfg_.flood_ttl));
  const auto deadline = Clock::now() + seconds(cfg_.round_timeout_s);

  if (state_.role != Role::Aggregator) {
    messenger_->flood(messenger_->make(MsgType::Params, r, cfg_.flood_ttl, encode_params(local.values)));
    set_phase(Phase::WaitingParams);
    auto have_aggregate = [&] {
      auto it = state_.aggregated.find(r);
      return it != state_.aggregated.end() && state_.pending.contains(it->second);
    };
    wait_until([&] { return have_aggregate() || state_.role == Role::Aggregator; }, deadline);
    if (interrupted()) return outcome;
    if (state_.role != Role::Aggregator) {
      set_phase(Phase::Aggregating);
      if (have_aggregate()) {
        const NodeId leader = state_.aggregated.at(r);
        outcome.aggregated = state_.pending.at(leader);
        outcome.contributors = {leader};
        outcome.aggregator = leader;
      } else {
        outcome.timed_out = true;
        outcome.aggregated = local.values;
        const NodeId expected_leader = state_.current_leader.value_or(cfg_.schedule.front());
        const NodeId next = sdfl_rotate(cfg_.schedule, expected_leader, [&](NodeId p) { return is_dead(p); });
        logger_->warn("no aggregate from leader " + std::to_string(expected_leader) + " in round " +
                      std::to_string(r) + "; keeping local model, next leader " + std::to_string(next));
        std::lock_guard lock(state_mu_);
        state_.current_leader = next;
        if (next == cfg_.id) state_.leadership[r + 1] = cfg_.id;
      }
      std::lock_guard lock(state_mu_);
      state_.params.values = outcome.aggregated;
      if (state_.role != Role::Aggregator) state_.role = Role::Trainer;
      return outcome;
    }
    logger_->info("took over aggregation for round " + std::to_string(r));
  } else {
    set_phase(Phase::WaitingParams);
  }

  // Leader path: collect the roster's PARAMS, aggregate, hand leadership on.
  std::vector<NodeId> roster;
  for (NodeId p : cfg_.schedule)
    if (p != cfg_.id) roster.push_back(p);
  wait_until(
      [&] {
        return std::all_of(roster.begin(), roster.end(),
                           [&](NodeId p) { return state_.pending.contains(p) || is_dead(p); });
      },
      deadline);
  if (interrupted()) return outcome;
  set_phase(Phase::Aggregating);

  std::map<NodeId, Vector> inputs;
  inputs[cfg_.id] = to_wire_precision(local.values);
  for (NodeId p : roster) {
    auto it = state_.pending.find(p);
    if (it != state_.pending.end()) inputs[p] = it->second;
  }
  for (const auto& [id, v] : inputs) outcome.contributors.insert(id);
  outcome.timed_out = outcome.contributors.size() != roster.size() + 1;
  AggregatorSpec spec = cfg_.aggregator;
  if (inputs.size() < spec.min_inputs()) {
    logger_->warn(to_string(spec.kind) + " needs " + std::to_string(spec.min_inputs()) + " inputs, got " +
                  std::to_string(inputs.size()) + "; using fedavg this round");
    spec = AggregatorSpec{};
  }
  outcome.aggregated = to_wire_precision(aggregate(spec, ordered_inputs(inputs)));
  outcome.aggregator = cfg_.id;

  std::set<NodeId> unreachable;
  auto dead_or_unreachable = [&](NodeId p) { return unreachable.contains(p) || is_dead(p); };
  NodeId next = sdfl_rotate(cfg_.schedule, cfg_.id, dead_or_unreachable);
  while (next != cfg_.id) {
    const auto link = messenger_->link_state(next);
    if (!link || *link == LinkState::Connecting) {
      try {
        messenger_->connect(next, cfg_.addresses.at(next), false);
        logger_->info("control link to " + std::to_string(next) + " opened");
      } catch (const std::exception& e) {
        logger_->warn("cannot reach " + std::to_string(next) + " for LEADERSHIP: " + e.what());
        unreachable.insert(next);
        next = sdfl_rotate(cfg_.schedule, cfg_.id, dead_or_unreachable);
        continue;
      }
    }
    break;
  }
  if (next != cfg_.id) {
    send_direct(next, messenger_->make(MsgType::Leadership, r + 1, 0, encode_node_id(next)));
  } else {
    std::lock_guard lock(state_mu_);
    state_.leadership[r + 1] = cfg_.id;
  }
  logger_->info("round " + std::to_string(r) + " aggregated by " + std::to_string(cfg_.id) +
                "; leadership passes to " + std::to_string(next));
  messenger_->flood(messenger_->make(MsgType::Params, r, cfg_.flood_ttl, encode_params(outcome.aggregated)));
  messenger_->flood(
      messenger_->make(MsgType::ModelsAggregated, r, cfg_.flood_ttl, contributor_payload(outcome.contributors)));
  std::lock_guard lock(state_mu_);
  state_.params.values = outcome.aggregated;
  state_.aggregated[r] = cfg_.id;
  state_.current_leader = next;
  if (next != cfg_.id) state_.role = Role::Trainer;
  return outcome;
}

RoundOutcome Node::cfl_server_round() {
  const std::uint32_t r = state_.round;
  RoundOutcome outcome;
  outcome.round = r;
  outcome.aggregator = cfg_.id;
  set_phase(Phase::WaitingParams);
  const std::set<NodeId> expected(cfg_.expected.begin(), cfg_.expected.end());
  const auto deadline = Clock::now() + seconds(cfg_.round_timeout_s);
  wait_until(
      [&] {
        return std::all_of(expected.begin(), expected.end(),
                           [&](NodeId p) { return state_.pending.contains(p) || is_dead(p); });
      },
      deadline);
  if (interrupted()) return outcome;
  set_phase(Phase::Aggregating);

  std::map<NodeId, Vector> inputs;
  for (NodeId p : expected) {
    auto it = state_.pending.find(p);
    if (it != state_.pending.end()) inputs[p] = it->second;
  }
  for (const auto& [id, v] : inputs) outcome.contributors.insert(id);
  outcome.timed_out = inputs.size() != expected.size();
  if (inputs.empty()) {
    logger_->error("RoundAborted: no trainer reported in round " + std::to_string(r));
    outcome.aborted = true;
    outcome.aggregated = state_.params.values;
    return outcome;
  }
  AggregatorSpec spec = cfg_.aggregator;
  if (inputs.size() < spec.min_inputs()) {
    logger_->warn(to_string(spec.kind) + " needs " + std::to_string(spec.min_inputs()) + " inputs, got " +
                  std::to_string(inputs.size()) + "; using fedavg this round");
    spec = AggregatorSpec{};
  }
  outcome.aggregated = to_wire_precision(aggregate(spec, ordered_inputs(inputs)));
  {
    std::lock_guard lock(state_mu_);
    state_.params.values = outcome.aggregated;
  }
  const auto params_msg = messenger_->make(MsgType::Params, r, 0, encode_params(outcome.aggregated));
  for (NodeId peer : messenger_->live_topology_peers()) send_direct(peer, params_msg);
  messenger_->flood(
      messenger_->make(MsgType::ModelsAggregated, r, cfg_.flood_ttl, contributor_payload(outcome.contributors)));
  return outcome;
}

RoundOutcome Node::cfl_trainer_round() {
  const std::uint32_t r = state_.round;
  RoundOutcome outcome;
  outcome.round = r;
  const ParamVector local = train_step();
  if (cfg_.fail_at_round == r) {
    die();
    return outcome;
  }
  messenger_->flood(messenger_->make(MsgType::ModelsReady, r, cfg_.flood_ttl));
  const auto params_msg = messenger_->make(MsgType::Params, r, 0, encode_params(local.values));
  for (NodeId peer : messenger_->live_topology_peers()) send_direct(peer, params_msg);

  set_phase(Phase::WaitingParams);
  const NodeId server = cfg_.server.value_or(0);
  const auto deadline = Clock::now() + seconds(cfg_.round_timeout_s);
  wait_until([&] { return state_.pending.contains(server); }, deadline);
  if (interrupted()) return outcome;
  set_phase(Phase::Aggregating);
  auto it = state_.pending.find(server);
  if (it != state_.pending.end()) {
    outcome.aggregated = it->second;
    outcome.contributors = {server};
    outcome.aggregator = server;
  } else {
    logger_->warn("no aggregate from server in round " + std::to_string(r) + "; keeping local model");
    outcome.timed_out = true;
    outcome.aggregated = local.values;
  }
  std::lock_guard lock(state_mu_);
  state_.params.values = outcome.aggregated;
  return outcome;
}

void Node::forward_upstream(const std::vector<Message>& batch) {
  if (!cfg_.upstream) return;
  for (const auto& m : batch) {
    send_direct(*cfg_.upstream, m);
    relayed_.insert(m.sender);
  }
}

void Node::proxy_params(const Message& msg, NodeId from) {
  const bool from_upstream = (cfg_.upstream && from == *cfg_.upstream) || (cfg_.server && msg.sender == *cfg_.server);
  if (from_upstream) {
    for (NodeId peer : messenger_->live_topology_peers())
      if (!cfg_.upstream || peer != *cfg_.upstream) send_direct(peer, msg);
    if (msg.round == state_.round) relay_got_server_ = true;
    return;
  }
  if (relay_ && msg.round == state_.round)
    forward_upstream(relay_->on_params(msg, Clock::now()));
  else
    forward_upstream({msg});
}

void Node::run_proxy() {
  if (state_.phase == Phase::Idle) set_phase(Phase::Training);
  while (state_.round < state_.rounds) {
    const auto t0 = Clock::now();
    const auto round_deadline = t0 + seconds(cfg_.round_timeout_s);
    relay_.emplace(std::set<NodeId>(cfg_.expected.begin(), cfg_.expected.end()),
                   seconds(cfg_.round_timeout_s / 2), t0);
    relay_got_server_ = false;
    relayed_.clear();
    set_phase(Phase::WaitingParams);
    while (!relay_got_server_ && Clock::now() < round_deadline && !interrupted()) {
      const auto until = relay_->flushed() ? round_deadline : std::min(relay_->deadline(), round_deadline);
      wait_until([&] { return relay_got_server_; }, until);
      if (!relay_->flushed()) forward_upstream(relay_->on_tick(Clock::now()));
    }
    if (interrupted()) return;
    set_phase(Phase::Aggregating);
    RoundOutcome outcome;
    outcome.round = state_.round;
    outcome.contributors = relayed_;
    outcome.timed_out = !relay_got_server_;
    outcome.aggregator = cfg_.server;
    outcome.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0);
    finish_round(std::move(outcome));
  }
  std::lock_guard lock(state_mu_);
  completed_ = true;
}

void Node::evaluate_into(RoundOutcome& outcome) {
  if (cfg_.role == Role::Proxy) return;
  if (cfg_.trainer.kind == TrainerKind::Autoencoder) {
    const auto errors = reconstruction_errors(*trainer_, state_.params, data_.train);
    if (errors.size() < 20) {
      logger_->warn("cannot fit anomaly threshold: " + std::to_string(errors.size()) + " normal rows");
      return;
    }
    anomaly_.params = state_.params;
    anomaly_ = fit_anomaly_threshold(anomaly_, errors);
    outcome.eval = evaluate_anomaly(*trainer_, anomaly_, data_.test);
  } else {
    outcome.eval = evaluate(*trainer_, state_.params, data_.test);
  }
}

void Node::finish_round(RoundOutcome outcome) {
  evaluate_into(outcome);
  const auto r = outcome.round;
  std::ostringstream line;
  line << "round " << r << " done: contributors=" << join_ids(outcome.contributors)
       << " timed_out=" << (outcome.timed_out ? "true" : "false");
  if (outcome.eval) line << " f1=" << outcome.eval->f1 << " loss=" << outcome.eval->loss;
  logger_->info(line.str());
  if (outcome.eval) metrics_.append_now(round_records(cfg_.id, r, *outcome.eval, 0));
  {
    std::lock_guard lock(state_mu_);
    if (outcome.eval) last_eval_ = outcome.eval;
    if (!outcome.aborted) ++sync_count_;
    outcomes_.push_back(std::move(outcome));
    state_.advance_round();
  }
  set_phase(state_.round < state_.rounds ? Phase::Training : Phase::Done);
}

void Node::sample_metrics() {
  NodeSnapshot snap;
  snap.node = cfg_.id;
  {
    std::lock_guard lock(state_mu_);
    snap.round = state_.round;
    snap.eval = last_eval_;
    snap.model_size_bytes = 4 + 4 * state_.params.size();
    snap.sync_count = sync_count_;
    if (killed_) return;
  }
  snap.comms = messenger_->stats();
  snap.resources = probe_.read();
  if (!resources_warned_ && !snap.resources.ram_pct) {
    resources_warned_ = true;
    logger_->warn("resource probe unavailable; cpu/ram metrics omitted");
  }
  metrics_.append_now(sample(snap, 0));
}

bool Node::wait_finished(TimePoint deadline) {
  std::unique_lock lock(state_mu_);
  return finished_cv_.wait_until(lock, deadline, [this] { return finished_; });
}

void Node::stop() {
  {
    std::lock_guard lock(inbox_mu_);
    halt_ = true;
  }
  inbox_cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  if (sampler_) {
    sampler_->stop();
    sample_metrics();
  }
  messenger_->stop();
  logger_->flush();
}

void Node::kill() {
  messenger_->kill();
  {
    std::lock_guard lock(state_mu_);
    if (!killed_) {
      killed_ = true;
      killed_at_ = Clock::now();
    }
  }
  {
    std::lock_guard lock(inbox_mu_);
    halt_ = true;
  }
  inbox_cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  if (sampler_) sampler_->stop();
  logger_->error("node killed");
  logger_->flush();
}

Phase Node::phase() const {
  std::lock_guard lock(state_mu_);
  return state_.phase;
}

Role Node::role() const {
  std::lock_guard lock(state_mu_);
  return state_.role;
}

std::uint32_t Node::round() const {
  std::lock_guard lock(state_mu_);
  return state_.round;
}

ParamVector Node::params() const {
  std::lock_guard lock(state_mu_);
  return state_.params;
}

std::vector<RoundOutcome> Node::outcomes() const {
  std::lock_guard lock(state_mu_);
  return outcomes_;
}

std::optional<EvalMetrics> Node::last_eval() const {
  std::lock_guard lock(state_mu_);
  return last_eval_;
}

bool Node::completed() const {
  std::lock_guard lock(state_mu_);
  return completed_;
}

bool Node::killed() const {
  std::lock_guard lock(state_mu_);
  return killed_;
}

std::optional<TimePoint> Node::killed_at() const {
  std::lock_guard lock(state_mu_);
  return killed_at_;
}

std::optional<std::string> Node::failure() const {
  std::lock_guard lock(state_mu_);
  return failure_;
}

}  // namespace meshfl
