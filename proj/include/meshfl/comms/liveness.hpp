#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "meshfl/topology.hpp"

namespace meshfl {

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;
using Duration = Clock::duration;

enum class LinkState { Connecting, Alive, Suspect, Dead };

std::string to_string(LinkState state);

/// Only Connecting->Alive->Suspect->Dead and Suspect->Alive are legal.
bool is_legal_transition(LinkState from, LinkState to);

struct PeerLink {
  NodeId peer = 0;
  std::string address;
  LinkState state = LinkState::Connecting;
  TimePoint last_beat{};
  bool topology = true;  // false for on-demand control links
};

struct HeartbeatPolicy {
  Duration period = std::chrono::seconds(2);
  std::size_t suspect_after = 3;
  std::size_t dead_after = 5;

  void validate() const;
};

struct StateChange {
  NodeId peer = 0;
  LinkState from = LinkState::Alive;
  LinkState to = LinkState::Alive;
};

struct HeartbeatActions {
  std::vector<NodeId> beats_to_send;
  std::vector<StateChange> state_changes;
};

/// Evaluates every link at `now`: Alive/Suspect links get a BEAT; a link
/// silent for suspect_after periods becomes Suspect, for dead_after periods
/// Dead. The states in `links` are updated in place.
HeartbeatActions heartbeat_tick(std::map<NodeId, PeerLink>& links, TimePoint now,
                                const HeartbeatPolicy& policy);

/// Earliest instant at which some link would change state, if any.
TimePoint next_liveness_deadline(const std::map<NodeId, PeerLink>& links,
                                 const HeartbeatPolicy& policy);

}  // namespace meshfl
