#include "meshfl/comms/messenger.hpp"

#include "meshfl/error.hpp"

namespace meshfl {

Messenger::Messenger(std::unique_ptr<Transport> transport, MessengerConfig cfg)
    : transport_(std::move(transport)), cfg_(cfg), seen_(cfg.seen_capacity), ids_(cfg.self, cfg.seed) {
  cfg_.heartbeat.validate();
}

Messenger::~Messenger() { shutdown(false); }

std::string Messenger::start(DeliverFn on_deliver, LinkFn on_link) {
  on_deliver_ = std::move(on_deliver);
  on_link_ = std::move(on_link);
  address_ = transport_->listen([this](NodeId from, std::vector<std::uint8_t> frame) {
    intake(from, std::move(frame));
  });
  started_ = true;
  sender_ = std::thread([this] { sender_loop(); });
  timer_ = std::thread([this] { timer_loop(); });
  return address_;
}

Message Messenger::make(MsgType type, std::uint32_t round, std::uint8_t ttl,
                        std::vector<std::uint8_t> payload) {
  Message msg;
  msg.type = type;
  msg.ttl = ttl;
  msg.sender = cfg_.self;
  msg.round = round;
  msg.payload = std::move(payload);
  std::lock_guard lock(mu_);
  msg.id = ids_.next();
  seen_.insert(msg.id);
  return msg;
}

void Messenger::enqueue_locked(NodeId peer, const Message& msg) {
  Outgoing item{peer, msg.type, encode(msg), Clock::now()};
  {
    std::lock_guard lock(out_mu_);
    if (stopping_) return;
    queue_.push_back(std::move(item));
  }
  out_cv_.notify_one();
}

void Messenger::connect(NodeId peer, const std::string& address, bool topology) {
  {
    std::lock_guard lock(mu_);
    auto it = links_.find(peer);
    if (it != links_.end() && it->second.state != LinkState::Dead)
      throw Error(Errc::AlreadyConnected, "link to " + std::to_string(peer) + " exists");
    links_[peer] = PeerLink{peer, address, LinkState::Connecting, Clock::now(), topology};
    dead_since_.erase(peer);
  }
  try {
    transport_->dial(peer, address);
  } catch (...) {
    std::lock_guard lock(mu_);
    links_.erase(peer);
    throw;
  }
  const auto hello = make(MsgType::ConnectTo, 0, 0, {static_cast<std::uint8_t>(topology ? 1 : 0)});
  std::unique_lock lock(mu_);
  enqueue_locked(peer, hello);
  const bool alive = link_cv_.wait_for(lock, cfg_.connect_timeout, [&] {
    auto it = links_.find(peer);
    return it != links_.end() && it->second.state == LinkState::Alive;
  });
  if (!alive) {
    links_.erase(peer);
    lock.unlock();
    transport_->drop(peer);
    throw Error(Errc::ConnectFailed, "handshake with " + std::to_string(peer) + " timed out");
  }
}

bool Messenger::send(NodeId peer, const Message& msg) {
  std::lock_guard lock(mu_);
  auto it = links_.find(peer);
  if (it == links_.end() || it->second.state == LinkState::Dead ||
      it->second.state == LinkState::Connecting)
    return false;
  enqueue_locked(peer, msg);
  return true;
}

void Messenger::flood(const Message& msg, std::optional<NodeId> except) {
  std::lock_guard lock(mu_);
  for (NodeId peer : live_topology_peers_locked())
    if (peer != except) enqueue_locked(peer, msg);
}

std::set<NodeId> Messenger::live_topology_peers_locked() const {
  std::set<NodeId> out;
  for (const auto& [peer, link] : links_)
    if (link.topology && (link.state == LinkState::Alive || link.state == LinkState::Suspect))
      out.insert(peer);
  return out;
}

std::set<NodeId> Messenger::live_topology_peers() const {
  std::lock_guard lock(mu_);
  return live_topology_peers_locked();
}

std::optional<LinkState> Messenger::link_state(NodeId peer) const {
  std::lock_guard lock(mu_);
  auto it = links_.find(peer);
  if (it == links_.end()) return std::nullopt;
  return it->second.state;
}

std::map<NodeId, PeerLink> Messenger::links() const {
  std::lock_guard lock(mu_);
  return links_;
}

std::optional<TimePoint> Messenger::dead_since(NodeId peer) const {
  std::lock_guard lock(mu_);
  auto it = dead_since_.find(peer);
  if (it == dead_since_.end()) return std::nullopt;
  return it->second;
}

void Messenger::intake(NodeId from, std::vector<std::uint8_t> frame) {
  std::lock_guard serial(intake_mu_);
  bytes_received_ += frame.size();
  ++msgs_received_;
  Message msg;
  try {
    msg = decode(frame);
  } catch (const Error&) {
    return;  // malformed frames never reach the node
  }

  std::vector<std::pair<NodeId, LinkState>> changes;
  RouteDecision decision;
  {
    std::lock_guard lock(mu_);
    const auto now = Clock::now();
    auto it = links_.find(from);
    if (msg.type == MsgType::ConnectTo) {
      const bool topology = !msg.payload.empty() && msg.payload[0] == 1;
      if (it == links_.end() || it->second.state == LinkState::Dead) {
        links_[from] = PeerLink{from, {}, LinkState::Connecting, now, topology};
        dead_since_.erase(from);
      }
      enqueue_locked(from, make_beat_locked(0));
      return;
    }
    if (it == links_.end() || it->second.state == LinkState::Dead) return;
    auto& link = it->second;
    // Liveness counts BEATs only; data traffic does not reset the clock.
    if (msg.type == MsgType::Beat) {
      link.last_beat = now;
      if (link.state == LinkState::Connecting) {
        link.state = LinkState::Alive;
        changes.emplace_back(from, LinkState::Alive);
        enqueue_locked(from, make_beat_locked(0));
        link_cv_.notify_all();
      } else if (link.state == LinkState::Suspect) {
        link.state = LinkState::Alive;
        changes.emplace_back(from, LinkState::Alive);
      }
    }
    if (msg.type != MsgType::Beat) {
      decision = on_receive(msg, from, seen_, live_topology_peers_locked());
      if (!decision.forward_to.empty()) {
        const auto copy = forwarded_copy(msg);
        for (NodeId peer : decision.forward_to) enqueue_locked(peer, copy);
      }
    }
  }
  if (on_link_)
    for (const auto& [peer, state] : changes) on_link_(peer, state);
  if (decision.deliver && on_deliver_) on_deliver_(msg, from);
}

Message Messenger::make_beat_locked(std::uint32_t round) {
  Message beat;
  beat.type = MsgType::Beat;
  beat.sender = cfg_.self;
  beat.round = round;
  beat.id = ids_.next();
  return beat;
}

void Messenger::sender_loop() {
  std::unique_lock lock(out_mu_);
  while (true) {
    out_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
    if (stopping_) break;
    Outgoing item = std::move(queue_.front());
    queue_.pop_front();
    in_flight_ = true;
    lock.unlock();
    const bool delivered = transport_->send(item.peer, item.frame);
    const auto done = Clock::now();
    lock.lock();
    in_flight_ = false;
    if (delivered) {
      bytes_sent_ += item.frame.size();
      ++msgs_sent_;
      bytes_by_type_[item.type] += item.frame.size();
      latency_sum_ms_ += std::chrono::duration<double, std::milli>(done - item.queued).count();
      ++latency_count_;
    }
    if (queue_.empty()) drained_cv_.notify_all();
  }
  drained_cv_.notify_all();
}

void Messenger::timer_loop() {
  const auto period = cfg_.heartbeat.period;
  auto next_beat = Clock::now() + period;
  std::unique_lock timer_lock(timer_mu_);
  while (!timer_stop_) {
    TimePoint wake;
    {
      std::lock_guard lock(mu_);
      wake = std::min(next_beat, next_liveness_deadline(links_, cfg_.heartbeat));
    }
    // Links created while asleep are picked up at the next beat at the latest.
    if (timer_cv_.wait_until(timer_lock, wake, [this] { return timer_stop_; })) break;
    timer_lock.unlock();

    const auto now = Clock::now();
    const bool beat_due = now >= next_beat;
    if (beat_due) {
      next_beat += period;
      if (next_beat <= now) next_beat = now + period;
    }
    std::vector<std::pair<NodeId, LinkState>> changes;
    std::vector<NodeId> dead;
    {
      std::lock_guard lock(mu_);
      auto actions = heartbeat_tick(links_, now, cfg_.heartbeat);
      for (const auto& change : actions.state_changes) {
        changes.emplace_back(change.peer, change.to);
        if (change.to == LinkState::Dead) {
          dead_since_[change.peer] = now;
          dead.push_back(change.peer);
        }
      }
      if (beat_due)
        for (NodeId peer : actions.beats_to_send) enqueue_locked(peer, make_beat_locked(0));
    }
    for (NodeId peer : dead) transport_->drop(peer);
    if (on_link_)
      for (const auto& [peer, state] : changes) on_link_(peer, state);
    timer_lock.lock();
  }
}

CommsStats Messenger::stats() {
  CommsStats s;
  s.bytes_sent = bytes_sent_;
  s.bytes_received = bytes_received_;
  s.msgs_sent = msgs_sent_;
  s.msgs_received = msgs_received_;
  {
    std::lock_guard lock(mu_);
    for (const auto& [peer, link] : links_)
      if (link.state == LinkState::Alive || link.state == LinkState::Suspect) ++s.active_connections;
  }
  std::lock_guard lock(out_mu_);
  if (latency_count_ > 0) s.send_latency_ms = latency_sum_ms_ / static_cast<double>(latency_count_);
  latency_sum_ms_ = 0.0;
  latency_count_ = 0;
  return s;
}

std::map<MsgType, std::uint64_t> Messenger::bytes_sent_by_type() const {
  std::lock_guard lock(out_mu_);
  return bytes_by_type_;
}

bool Messenger::flush(std::chrono::milliseconds timeout) {
  std::unique_lock lock(out_mu_);
  return drained_cv_.wait_for(lock, timeout,
                              [this] { return stopping_ || (queue_.empty() && !in_flight_); });
}

void Messenger::stop() { shutdown(true); }

void Messenger::kill() { shutdown(false); }

void Messenger::shutdown(bool graceful) {
  if (closed_.exchange(true)) return;
  if (started_ && graceful) flush();
  {
    std::lock_guard lock(timer_mu_);
    timer_stop_ = true;
  }
  timer_cv_.notify_all();
  {
    std::lock_guard lock(out_mu_);
    stopping_ = true;
    queue_.clear();
  }
  out_cv_.notify_all();
  if (timer_.joinable()) timer_.join();
  if (sender_.joinable()) sender_.join();
  transport_->close();
}

}  // namespace meshfl
