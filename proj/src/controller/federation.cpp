#include <algorithm>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "meshfl/controller.hpp"
#include "meshfl/error.hpp"

namespace meshfl {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9E3779B97F4A7C15ull);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::vector<NodeId> participants_of(const ScenarioConfig& cfg) {
  std::vector<NodeId> out;
  for (NodeId id = 0; id < cfg.n(); ++id)
    if (cfg.architecture != Architecture::CFL || id != cfg.topology.center) out.push_back(id);
  return out;
}

}  // namespace

DeploymentPlan plan_deployment(const ScenarioConfig& cfg, const std::filesystem::path& log_dir) {
  validate_scenario(cfg);
  DeploymentPlan plan;
  plan.topology = build_topology(cfg);
  const std::size_t n = cfg.n();

  DatasetSpec dataset = cfg.dataset;
  dataset.seed = mix(cfg.seed, 1);
  const std::uint64_t split_seed = mix(cfg.seed, 2);
  const Dataset all = build_dataset(dataset);
  const auto [train_idx, test_idx] = split_indices(all.rows(), cfg.test_fraction, split_seed);
  std::vector<std::size_t> train_labels;
  train_labels.reserve(train_idx.size());
  for (auto i : train_idx) train_labels.push_back(all.labels[i]);

  const auto participants = participants_of(cfg);
  const Partition partition =
      cfg.partition.noniid
          ? partition_noniid(train_labels, participants.size(), cfg.partition.shards_per_client, mix(cfg.seed, 3))
          : partition_iid(train_idx.size(), participants.size(), mix(cfg.seed, 3));

  std::vector<NodeId> schedule = cfg.schedule;
  if (cfg.architecture == Architecture::SDFL && schedule.empty())
    for (NodeId id = 0; id < n; ++id) schedule.push_back(id);

  std::map<NodeId, std::string> addresses;
  for (NodeId id = 0; id < n; ++id)
    addresses[id] = cfg.transport.kind == TransportKind::Tcp
                        ? cfg.transport.host + ":" + std::to_string(cfg.transport.base_port + id)
                        : "inproc://" + std::to_string(id);

  for (NodeId id = 0; id < n; ++id) {
    NodeConfig nc;
    nc.id = id;
    nc.architecture = cfg.architecture;
    nc.federation_size = n;
    nc.neighbors = plan.topology.neighbors(id);
    nc.addresses = addresses;
    switch (cfg.architecture) {
      case Architecture::DFL: nc.role = Role::Aggregator; break;
      case Architecture::SDFL:
        nc.role = id == schedule.front() ? Role::Aggregator : Role::Trainer;
        nc.schedule = schedule;
        break;
      case Architecture::CFL:
        if (id == cfg.topology.center) {
          nc.role = Role::Server;
          nc.expected = participants;
        } else {
          nc.role = Role::Trainer;
          nc.server = cfg.topology.center;
        }
        break;
    }
    nc.trainer = cfg.trainer;
    nc.training = cfg.training;
    nc.aggregator = cfg.aggregator;
    nc.dataset = dataset;
    nc.test_fraction = cfg.test_fraction;
    nc.split_seed = split_seed;
    auto slot = std::find(participants.begin(), participants.end(), id);
    if (slot != participants.end()) nc.shard = partition.shards[static_cast<std::size_t>(slot - participants.begin())];
    nc.init_seed = mix(cfg.seed, 4);
    nc.train_seed = mix(cfg.seed, 100 + id);
    nc.round_timeout_s = cfg.round_timeout_s;
    nc.heartbeat_period_s = cfg.heartbeat_period_s;
    nc.monitor_period_s = cfg.monitor_period_s;
    nc.flood_ttl = static_cast<std::uint8_t>(std::min<std::size_t>(n, 255));
    nc.log_dir = log_dir.string();
    for (const auto& f : cfg.faults)
      if (f.node == id) nc.fail_at_round = f.round;
    nc.transport = cfg.transport.kind;
    nc.host = cfg.transport.host;
    nc.port = cfg.transport.kind == TransportKind::Tcp ? static_cast<std::uint16_t>(cfg.transport.base_port + id) : 0;
    plan.nodes.push_back(std::move(nc));
  }
  return plan;
}

Federation::Federation(ScenarioConfig cfg, DeploymentPlan plan)
    : cfg_(std::move(cfg)), plan_(std::move(plan)), epoch_(Clock::now()),
      network_(std::make_shared<InprocNetwork>()) {}

Federation::~Federation() { teardown(); }

void Federation::teardown() {
  if (stopped_) return;
  stopped_ = true;
  for (auto& node : nodes_) node->kill();
}

std::unique_ptr<Federation> Federation::deploy(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  std::unique_ptr<Federation> fed(new Federation(cfg, plan_deployment(cfg, out_dir)));
  const std::size_t n = cfg.n();

  for (const auto& planned : fed->plan_.nodes) {
    // Each node gets its configuration as a text document, as a remote node would.
    NodeConfig nc = node_config_from_json(to_json(planned));
    std::unique_ptr<Transport> transport;
    if (nc.transport == TransportKind::Tcp)
      transport = std::make_unique<TcpTransport>(nc.id, nc.host, nc.port);
    else
      transport = std::make_unique<InprocTransport>(fed->network_, nc.id);
    auto node = std::make_unique<Node>(std::move(nc), std::move(transport), fed->epoch_);
    try {
      node->start();
    } catch (const Error& e) {
      fed->teardown();
      throw Error(Errc::DeployFailed, "node " + std::to_string(planned.id) + ": " + e.what());
    }
    fed->nodes_.push_back(std::move(node));
  }

  std::set<NodeId> missing;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j : fed->plan_.topology.neighbors(i)) {
      if (j < i) continue;
      try {
        fed->nodes_[i]->connect(j, fed->plan_.nodes[j].addresses.at(j));
      } catch (const Error&) {
        missing.insert(j);
      }
    }
  // The accepting side turns Alive one BEAT after the dialer does.
  const auto deadline = Clock::now() + std::chrono::seconds(5);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j : fed->plan_.topology.neighbors(i)) {
      while (fed->nodes_[i]->messenger().link_state(j) != LinkState::Alive && Clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      if (fed->nodes_[i]->messenger().link_state(j) != LinkState::Alive) missing.insert(j);
    }
  if (!missing.empty()) {
    fed->teardown();
    std::string ids;
    for (auto id : missing) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    throw Error(Errc::StartFailed, "unreachable nodes {" + ids + "}");
  }
  fed->nodes_.front()->start_federation();
  return fed;
}

void Federation::kill(NodeId id) { nodes_.at(id)->kill(); }

ScenarioReport Federation::await_completion() {
  const auto budget = std::chrono::duration<double>(3.0 * static_cast<double>(cfg_.training.rounds) * cfg_.round_timeout_s);
  const auto deadline = epoch_ + std::chrono::duration_cast<Duration>(budget);
  for (auto& node : nodes_) node->wait_finished(deadline);
  const auto end = Clock::now();
  for (auto& node : nodes_) node->stop();
  stopped_ = true;

  ScenarioReport report;
  report.name = cfg_.name;
  report.architecture = cfg_.architecture;
  report.f1_target = cfg_.f1_target;
  report.duration_s = std::chrono::duration<double>(end - epoch_).count();
  std::vector<NodeId> survivors;
  for (auto& node : nodes_) {
    NodeReport nr;
    nr.id = node->id();
    nr.role = node->config().role;
    nr.final_eval = node->last_eval();
    nr.outcomes = node->outcomes();
    nr.bytes_sent = node->messenger().bytes_sent();
    nr.bytes_received = node->messenger().bytes_received();
    nr.complete = node->completed();
    nr.killed = node->killed();
    nr.failure = node->failure();
    nr.final_params = node->params().values;
    if (!nr.killed && nr.role != Role::Proxy) survivors.push_back(nr.id);
    auto records = node->records();
    report.records.insert(report.records.end(), records.begin(), records.end());
    report.nodes.push_back(std::move(nr));
  }
  std::stable_sort(report.records.begin(), report.records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp_ms, a.node) < std::tie(b.timestamp_ms, b.node);
  });
  report.complete = report.incomplete_count() == 0;

  for (std::uint32_t r = 0; r < cfg_.training.rounds; ++r) {
    std::vector<NodeId> aggs;
    for (const auto& nr : report.nodes)
      if (r < nr.outcomes.size() && nr.outcomes[r].aggregator == nr.id && !nr.outcomes[r].aborted)
        aggs.push_back(nr.id);
    report.aggregators.push_back(aggs);
  }

  if (const auto t = time_to_threshold_ms(report.records, survivors, cfg_.f1_target))
    report.time_to_threshold_s = static_cast<double>(*t) / 1000.0;
  for (std::uint32_t r = 0; r < cfg_.training.rounds && !survivors.empty(); ++r) {
    bool all = true;
    for (const auto& nr : report.nodes) {
      if (std::find(survivors.begin(), survivors.end(), nr.id) == survivors.end()) continue;
      if (r >= nr.outcomes.size() || !nr.outcomes[r].eval || nr.outcomes[r].eval->f1 < cfg_.f1_target) {
        all = false;
        break;
      }
    }
    if (all) {
      report.rounds_to_threshold = r + 1;
      break;
    }
  }
  return report;
}

std::uint64_t ScenarioReport::total_bytes_sent() const {
  std::uint64_t total = 0;
  for (const auto& n : nodes) total += n.bytes_sent;
  return total;
}

std::uint64_t ScenarioReport::total_bytes_received() const {
  std::uint64_t total = 0;
  for (const auto& n : nodes) total += n.bytes_received;
  return total;
}

std::size_t ScenarioReport::incomplete_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return !n.complete; }));
}

ScenarioReport run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  auto fed = Federation::deploy(cfg, out_dir);
  auto report = fed->await_completion();
  if (!out_dir.empty()) write_artifacts(report, out_dir);
  return report;
}

std::optional<std::int64_t> time_to_threshold_ms(const std::vector<MetricRecord>& records,
                                                 const std::vector<NodeId>& nodes, double target) {
  if (nodes.empty()) return std::nullopt;
  std::vector<const MetricRecord*> f1;
  for (const auto& r : records)
    if (r.name == "f1" && std::find(nodes.begin(), nodes.end(), r.node) != nodes.end()) f1.push_back(&r);
  std::stable_sort(f1.begin(), f1.end(), [](auto* a, auto* b) { return a->timestamp_ms < b->timestamp_ms; });
  std::map<NodeId, double> latest;
  for (std::size_t i = 0; i < f1.size(); ++i) {
    latest[f1[i]->node] = f1[i]->value;
    if (i + 1 < f1.size() && f1[i + 1]->timestamp_ms == f1[i]->timestamp_ms) continue;
    if (latest.size() == nodes.size() &&
        std::all_of(latest.begin(), latest.end(), [&](const auto& kv) { return kv.second >= target; }))
      return f1[i]->timestamp_ms;
  }
  return std::nullopt;
}

std::string report_to_json(const ScenarioReport& report) {
  using nlohmann::json;
  auto eval_json = [](const std::optional<EvalMetrics>& e) -> json {
    if (!e) return nullptr;
    return {{"loss", e->loss},     {"accuracy", e->accuracy}, {"precision", e->precision},
            {"recall", e->recall}, {"f1", e->f1},             {"samples", e->sample_count}};
  };
  json nodes = json::array();
  for (const auto& n : report.nodes) {
    json rounds = json::array();
    for (const auto& o : n.outcomes) {
      rounds.push_back({{"round", o.round},
                        {"contributors", std::vector<NodeId>(o.contributors.begin(), o.contributors.end())},
                        {"elapsed_ms", o.elapsed.count()},
                        {"timed_out", o.timed_out},
                        {"aborted", o.aborted},
                        {"aggregator", o.aggregator ? json(*o.aggregator) : json(nullptr)},
                        {"eval", eval_json(o.eval)}});
    }
    nodes.push_back({{"id", n.id},
                     {"role", to_string(n.role)},
                     {"complete", n.complete},
                     {"killed", n.killed},
                     {"failure", n.failure ? json(*n.failure) : json(nullptr)},
                     {"bytes_sent", n.bytes_sent},
                     {"bytes_received", n.bytes_received},
                     {"final", eval_json(n.final_eval)},
                     {"rounds", rounds}});
  }
  json doc = {{"name", report.name},
              {"architecture", to_string(report.architecture)},
              {"complete", report.complete},
              {"incomplete_nodes", report.incomplete_count()},
              {"duration_s", report.duration_s},
              {"f1_target", report.f1_target},
              {"time_to_threshold_s", report.time_to_threshold_s ? json(*report.time_to_threshold_s) : json(nullptr)},
              {"rounds_to_threshold", report.rounds_to_threshold ? json(*report.rounds_to_threshold) : json(nullptr)},
              {"total_bytes_sent", report.total_bytes_sent()},
              {"total_bytes_received", report.total_bytes_received()},
              {"aggregators", report.aggregators},
              {"nodes", nodes}};
  return doc.dump(2);
}

std::string summary_text(const ScenarioReport& report) {
  std::ostringstream out;
  out << "scenario " << report.name << " (" << to_string(report.architecture) << ")\n";
  out << "status: " << (report.complete ? "complete" : "incomplete") << ", " << report.nodes.size() << " nodes, "
      << std::fixed << std::setprecision(2) << report.duration_s << " s\n";
  out << "time to f1 >= " << report.f1_target << ": ";
  if (report.time_to_threshold_s)
    out << *report.time_to_threshold_s << " s (round " << report.rounds_to_threshold.value_or(0) << ")\n";
  else
    out << "not reached\n";
  out << "total bytes sent " << report.total_bytes_sent() << ", received " << report.total_bytes_received() << "\n";
  out << "node  role        rounds  f1      loss     bytes_sent  status\n";
  for (const auto& n : report.nodes) {
    out << std::left << std::setw(6) << n.id << std::setw(12) << to_string(n.role) << std::setw(8)
        << n.outcomes.size();
    if (n.final_eval)
      out << std::setprecision(4) << std::setw(8) << n.final_eval->f1 << std::setw(9) << n.final_eval->loss;
    else
      out << std::setw(8) << "-" << std::setw(9) << "-";
    out << std::setw(12) << n.bytes_sent
        << (n.killed ? "killed" : n.complete ? "complete" : n.failure ? "failed: " + *n.failure : "incomplete")
        << std::right << "\n";
  }
  return out.str();
}

void write_artifacts(const ScenarioReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::ofstream json_out(out_dir / "report.json");
  if (!json_out) throw Error(Errc::IoError, "cannot write " + (out_dir / "report.json").string());
  json_out << report_to_json(report) << '\n';
  export_records(report.records, ExportFormat::Csv, out_dir / "metrics.csv");
  export_records(report.records, ExportFormat::Json, out_dir / "metrics.json");
  std::ofstream summary(out_dir / "summary.txt");
  if (!summary) throw Error(Errc::IoError, "cannot write " + (out_dir / "summary.txt").string());
  summary << summary_text(report);
}

RecordSummary summarize_records(const std::vector<MetricRecord>& records, double f1_target) {
  RecordSummary s;
  std::set<NodeId> nodes;
  std::map<NodeId, std::int64_t> f1_time;
  for (const auto& r : records) {
    nodes.insert(r.node);
    if (r.name == "f1" && (!f1_time.contains(r.node) || r.timestamp_ms >= f1_time[r.node])) {
      f1_time[r.node] = r.timestamp_ms;
      s.final_f1[r.node] = r.value;
    } else if (r.name == "bytes_sent") {
      s.bytes_sent[r.node] = std::max(s.bytes_sent[r.node], r.value);
    } else if (r.name == "bytes_received") {
      s.bytes_received[r.node] = std::max(s.bytes_received[r.node], r.value);
    } else if (r.name == "round") {
      s.rounds[r.node] = std::max(s.rounds[r.node], r.value);
    }
  }
  s.nodes.assign(nodes.begin(), nodes.end());
  std::vector<NodeId> evaluated;
  for (const auto& [id, f1] : s.final_f1) evaluated.push_back(id);
  s.time_to_threshold_ms = time_to_threshold_ms(records, evaluated, f1_target);
  return s;
}

std::string summary_text(const RecordSummary& s, double f1_target) {
  std::ostringstream out;
  out << s.nodes.size() << " nodes\n";
  out << "time to f1 >= " << f1_target << ": ";
  if (s.time_to_threshold_ms)
    out << static_cast<double>(*s.time_to_threshold_ms) / 1000.0 << " s\n";
  else
    out << "not reached\n";
  out << "node  final_f1  bytes_sent  bytes_received\n";
  for (auto id : s.nodes) {
    out << std::left << std::setw(6) << id << std::setw(10);
    if (s.final_f1.contains(id))
      out << std::setprecision(4) << s.final_f1.at(id);
    else
      out << "-";
    out << std::setw(12) << (s.bytes_sent.contains(id) ? s.bytes_sent.at(id) : 0.0)
        << (s.bytes_received.contains(id) ? s.bytes_received.at(id) : 0.0) << std::right << "\n";
  }
  return out.str();
}

}  // namespace meshfl
