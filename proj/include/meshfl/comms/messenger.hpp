#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "meshfl/comms/liveness.hpp"
#include "meshfl/comms/message.hpp"
#include "meshfl/comms/routing.hpp"
#include "meshfl/comms/transport.hpp"
#include "meshfl/monitoring.hpp"

namespace meshfl {

struct MessengerConfig {
  NodeId self = 0;
  HeartbeatPolicy heartbeat;
  std::uint64_t seed = 0;
  std::size_t seen_capacity = 4096;
  std::chrono::milliseconds connect_timeout{5000};
};

/// A node's communication engine: link table, handshake, heartbeats, flood
/// routing and the outgoing queue. Delivered messages are handed to the
/// owner through the deliver callback, one at a time.
class Messenger {
 public:
  using DeliverFn = std::function<void(const Message& msg, NodeId from)>;
  using LinkFn = std::function<void(NodeId peer, LinkState state)>;

  Messenger(std::unique_ptr<Transport> transport, MessengerConfig cfg);
  ~Messenger();
  Messenger(const Messenger&) = delete;
  Messenger& operator=(const Messenger&) = delete;

  /// Binds the transport and starts the sender and timer threads.
  std::string start(DeliverFn on_deliver, LinkFn on_link = {});
  const std::string& address() const { return address_; }
  NodeId self() const { return cfg_.self; }

  /// CONNECT_TO handshake; returns once the link is Alive on this side.
  /// Control links (topology = false) carry direct messages but never floods.
  void connect(NodeId peer, const std::string& address, bool topology = true);

  /// New message from this node with a fresh id (already marked as seen).
  Message make(MsgType type, std::uint32_t round, std::uint8_t ttl,
               std::vector<std::uint8_t> payload = {});
  /// Queues `msg` for one peer. Returns false if there is no usable link.
  bool send(NodeId peer, const Message& msg);
  /// Queues `msg` for every live topology link except `except`.
  void flood(const Message& msg, std::optional<NodeId> except = std::nullopt);

  std::set<NodeId> live_topology_peers() const;
  std::optional<LinkState> link_state(NodeId peer) const;
  std::map<NodeId, PeerLink> links() const;
  /// When the link to `peer` was declared Dead.
  std::optional<TimePoint> dead_since(NodeId peer) const;

  /// Counter snapshot; the latency mean covers sends since the previous call.
  CommsStats stats();
  std::uint64_t bytes_sent() const { return bytes_sent_; }
  std::uint64_t bytes_received() const { return bytes_received_; }
  std::map<MsgType, std::uint64_t> bytes_sent_by_type() const;

  /// Waits (bounded) until the outgoing queue is empty.
  bool flush(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));
  /// Flushes, then shuts everything down.
  void stop();
  /// Stops at once; queued frames are lost and peers stop hearing beats.
  void kill();

 private:
  struct Outgoing {
    NodeId peer;
    MsgType type;
    std::vector<std::uint8_t> frame;
    TimePoint queued;
  };

  void intake(NodeId from, std::vector<std::uint8_t> frame);
  void enqueue_locked(NodeId peer, const Message& msg);
  Message make_beat_locked(std::uint32_t round);
  void sender_loop();
  void timer_loop();
  std::set<NodeId> live_topology_peers_locked() const;
  void shutdown(bool graceful);

  std::unique_ptr<Transport> transport_;
  MessengerConfig cfg_;
  std::string address_;
  DeliverFn on_deliver_;
  LinkFn on_link_;

  std::mutex intake_mu_;  // serializes deliveries across transport threads

  mutable std::mutex mu_;  // links, seen set, id source, dead times
  std::condition_variable link_cv_;
  std::map<NodeId, PeerLink> links_;
  std::map<NodeId, TimePoint> dead_since_;
  SeenSet seen_;
  MsgIdSource ids_;

  mutable std::mutex out_mu_;
  std::condition_variable out_cv_;
  std::condition_variable drained_cv_;
  std::deque<Outgoing> queue_;
  bool in_flight_ = false;
  bool stopping_ = false;
  double latency_sum_ms_ = 0.0;
  std::uint64_t latency_count_ = 0;
  std::map<MsgType, std::uint64_t> bytes_by_type_;

  std::mutex timer_mu_;
  std::condition_variable timer_cv_;
  bool timer_stop_ = false;

  std::atomic<std::uint64_t> bytes_sent_{0};
  std::atomic<std::uint64_t> bytes_received_{0};
  std::atomic<std::uint64_t> msgs_sent_{0};
  std::atomic<std::uint64_t> msgs_received_{0};

  std::thread sender_;
  std::thread timer_;
  bool started_ = false;
  std::atomic<bool> closed_{false};
};

}  // namespace meshfl
