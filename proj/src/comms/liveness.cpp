#include "meshfl/comms/liveness.hpp"

#include "meshfl/error.hpp"

namespace meshfl {

std::string to_string(LinkState state) {
  switch (state) {
    case LinkState::Connecting: return "Connecting";
    case LinkState::Alive: return "Alive";
    case LinkState::Suspect: return "Suspect";
    case LinkState::Dead: return "Dead";
  }
  return "Dead";
}

bool is_legal_transition(LinkState from, LinkState to) {
  switch (from) {
    case LinkState::Connecting: return to == LinkState::Alive;
    case LinkState::Alive: return to == LinkState::Suspect;
    case LinkState::Suspect: return to == LinkState::Dead || to == LinkState::Alive;
    case LinkState::Dead: return false;
  }
  return false;
}

void HeartbeatPolicy::validate() const {
  if (period <= Duration::zero()) throw Error(Errc::InvalidScenario, "heartbeat period must be positive");
  if (suspect_after < 1 || dead_after <= suspect_after)
    throw Error(Errc::InvalidScenario, "need dead_after > suspect_after >= 1");
}

HeartbeatActions heartbeat_tick(std::map<NodeId, PeerLink>& links, TimePoint now,
                                const HeartbeatPolicy& policy) {
  HeartbeatActions actions;
  for (auto& [peer, link] : links) {
    if (link.state == LinkState::Connecting || link.state == LinkState::Dead) continue;
    const auto silent = now - link.last_beat;
    if (silent >= policy.period * static_cast<long>(policy.dead_after)) {
      // Alive->Dead passes through Suspect so every step is a legal transition.
      if (link.state == LinkState::Alive)
        actions.state_changes.push_back({peer, LinkState::Alive, LinkState::Suspect});
      actions.state_changes.push_back({peer, LinkState::Suspect, LinkState::Dead});
      link.state = LinkState::Dead;
      continue;
    }
    if (link.state == LinkState::Alive &&
        silent >= policy.period * static_cast<long>(policy.suspect_after)) {
      actions.state_changes.push_back({peer, LinkState::Alive, LinkState::Suspect});
      link.state = LinkState::Suspect;
    }
    actions.beats_to_send.push_back(peer);
  }
  return actions;
}

TimePoint next_liveness_deadline(const std::map<NodeId, PeerLink>& links,
                                 const HeartbeatPolicy& policy) {
  auto best = TimePoint::max();
  for (const auto& [peer, link] : links) {
    TimePoint due;
    if (link.state == LinkState::Alive)
      due = link.last_beat + policy.period * static_cast<long>(policy.suspect_after);
    else if (link.state == LinkState::Suspect)
      due = link.last_beat + policy.period * static_cast<long>(policy.dead_after);
    else
      continue;
    best = std::min(best, due);
  }
  return best;
}

}  // namespace meshfl
