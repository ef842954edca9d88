#include <algorithm>

#include "meshfl/error.hpp"
#include "meshfl/node.hpp"

namespace meshfl {

std::string to_string(Role role) {
  switch (role) {
    case Role::Trainer: return "trainer";
    case Role::Aggregator: return "aggregator";
    case Role::Proxy: return "proxy";
    case Role::Server: return "server";
    case Role::Idle: return "idle";
  }
  return "idle";
}

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::DFL: return "DFL";
    case Architecture::SDFL: return "SDFL";
    case Architecture::CFL: return "CFL";
  }
  return "DFL";
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "Idle";
    case Phase::Training: return "Training";
    case Phase::WaitingParams: return "WaitingParams";
    case Phase::Aggregating: return "Aggregating";
    case Phase::Done: return "Done";
  }
  return "Idle";
}

Role parse_role(std::string_view text) {
  for (auto r : {Role::Trainer, Role::Aggregator, Role::Proxy, Role::Server, Role::Idle})
    if (to_string(r) == text) return r;
  throw Error(Errc::InvalidScenario, "unknown role '" + std::string(text) + "'");
}

Architecture parse_architecture(std::string_view text) {
  for (auto a : {Architecture::DFL, Architecture::SDFL, Architecture::CFL})
    if (to_string(a) == text) return a;
  throw Error(Errc::InvalidScenario, "unknown architecture '" + std::string(text) + "'");
}

bool is_legal_phase_transition(Phase from, Phase to) {
  if (to == Phase::Idle) return from != Phase::Idle;
  switch (from) {
    case Phase::Idle: return to == Phase::Training;
    case Phase::Training: return to == Phase::WaitingParams;
    case Phase::WaitingParams: return to == Phase::Aggregating;
    case Phase::Aggregating: return to == Phase::Training || to == Phase::Done;
    case Phase::Done: return false;
  }
  return false;
}

void NodeState::transition(Phase to) {
  if (!is_legal_phase_transition(phase, to))
    throw Error(Errc::InvalidScenario, "illegal phase change " + to_string(phase) + " -> " + to_string(to));
  phase = to;
}

void NodeState::advance_round() {
  pending.clear();
  ready.clear();
  ++round;
  auto it = future.find(round);
  if (it != future.end()) pending = std::move(it->second);
  future.erase(future.begin(), future.upper_bound(round));
  if (leadership.contains(round)) {
    role = Role::Aggregator;
    current_leader = id;
  }
}

std::string to_string(HandleResult result) {
  switch (result) {
    case HandleResult::Stored: return "Stored";
    case HandleResult::Buffered: return "Buffered";
    case HandleResult::DroppedStale: return "DroppedStale";
    case HandleResult::DroppedShape: return "DroppedShape";
    case HandleResult::Started: return "Started";
    case HandleResult::StartRejected: return "StartRejected";
    case HandleResult::Ready: return "Ready";
    case HandleResult::Aggregated: return "Aggregated";
    case HandleResult::Leadership: return "Leadership";
    case HandleResult::RoleChanged: return "RoleChanged";
    case HandleResult::Aborted: return "Aborted";
    case HandleResult::Shutdown: return "Shutdown";
    case HandleResult::Ignored: return "Ignored";
  }
  return "Ignored";
}

HandleResult handle_message(NodeState& state, const Message& msg) {
  switch (msg.type) {
    case MsgType::Params: {
      if (msg.round < state.round) return HandleResult::DroppedStale;
      Vector values;
      try {
        values = decode_params(msg.payload);
      } catch (const Error&) {
        state.flagged.insert(msg.sender);
        return HandleResult::DroppedShape;
      }
      if (values.size() != state.params.size()) {
        state.flagged.insert(msg.sender);
        return HandleResult::DroppedShape;
      }
      if (msg.round == state.round) {
        state.pending[msg.sender] = std::move(values);
        return HandleResult::Stored;
      }
      state.future[msg.round][msg.sender] = std::move(values);
      return HandleResult::Buffered;
    }
    case MsgType::StartLearning: {
      if (state.started) return HandleResult::StartRejected;
      try {
        state.start = decode_start(msg.payload);
      } catch (const Error&) {
        return HandleResult::Ignored;
      }
      state.started = true;
      state.rounds = state.start->rounds;
      return HandleResult::Started;
    }
    case MsgType::StopLearning:
      state.started = false;
      if (state.phase != Phase::Idle) state.phase = Phase::Idle;
      return HandleResult::Aborted;
    case MsgType::Stop:
      state.shutdown = true;
      return HandleResult::Shutdown;
    case MsgType::ModelsReady:
      if (msg.round != state.round) return HandleResult::Ignored;
      state.ready.insert(msg.sender);
      return HandleResult::Ready;
    case MsgType::ModelsAggregated:
      state.aggregated[msg.round] = msg.sender;
      if (state.architecture == Architecture::SDFL && msg.round >= state.round)
        state.current_leader = msg.sender;
      return HandleResult::Aggregated;
    case MsgType::Leadership: {
      NodeId named = 0;
      try {
        named = decode_node_id(msg.payload);
      } catch (const Error&) {
        return HandleResult::Ignored;
      }
      if (msg.round < state.round) return HandleResult::Ignored;
      if (named == state.id) {
        state.leadership[msg.round] = named;
        if (msg.round == state.round) {
          state.role = Role::Aggregator;
          state.current_leader = named;
        }
      } else if (msg.round == state.round) {
        state.current_leader = named;
      }
      return HandleResult::Leadership;
    }
    case MsgType::Role:
      try {
        state.role = parse_role(decode_text(msg.payload));
      } catch (const Error&) {
        return HandleResult::Ignored;
      }
      return HandleResult::RoleChanged;
    default:
      return HandleResult::Ignored;
  }
}

NodeId sdfl_rotate(const std::vector<NodeId>& schedule, NodeId current,
                   const std::function<bool(NodeId)>& is_dead) {
  if (schedule.empty()) return current;
  auto it = std::find(schedule.begin(), schedule.end(), current);
  std::size_t start = it == schedule.end() ? schedule.size() - 1
                                           : static_cast<std::size_t>(it - schedule.begin());
  for (std::size_t step = 1; step <= schedule.size(); ++step) {
    const NodeId candidate = schedule[(start + step) % schedule.size()];
    if (candidate == current) return current;
    if (!is_dead(candidate)) return candidate;
  }
  return current;
}

ProxyRelay::ProxyRelay(std::set<NodeId> expected, Duration relay_timeout, TimePoint start)
    : expected_(std::move(expected)), deadline_(start + relay_timeout) {}

std::vector<Message> ProxyRelay::release() {
  flushed_ = true;
  std::vector<Message> out;
  for (auto& [sender, msg] : buffered_) out.push_back(std::move(msg));
  buffered_.clear();
  return out;
}

std::vector<Message> ProxyRelay::on_params(const Message& msg, TimePoint now) {
  if (flushed_) return {msg};
  buffered_.emplace(msg.sender, msg);
  const bool all = std::all_of(expected_.begin(), expected_.end(),
                               [&](NodeId id) { return buffered_.contains(id); });
  if (all || now >= deadline_) return release();
  return {};
}

std::vector<Message> ProxyRelay::on_tick(TimePoint now) {
  if (flushed_ || now < deadline_) return {};
  return release();
}

}  // namespace meshfl
