#pragma once

#include <cstddef>
#include <deque>
#include <set>
#include <unordered_set>

#include "meshfl/comms/message.hpp"

namespace meshfl {

/// Bounded set of recently seen message ids; evicts in insertion order.
class SeenSet {
 public:
  explicit SeenSet(std::size_t capacity = 4096) : capacity_(capacity) {}

  bool contains(const MsgId& id) const { return ids_.contains(id); }
  /// Returns false if `id` was already present.
  bool insert(const MsgId& id);
  std::size_t size() const { return ids_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::deque<MsgId> order_;
  std::unordered_set<MsgId, MsgIdHash> ids_;
};

struct RouteDecision {
  bool deliver = false;
  std::set<NodeId> forward_to;
};

/// Flood step for a message that arrived from neighbor `from`. A fresh
/// forwarding-class message with ttl > 0 goes to every neighbor except
/// `from`; the forwarded copy must carry ttl - 1. Duplicates are neither
/// delivered nor forwarded. The id is recorded in `seen`.
RouteDecision on_receive(const Message& msg, NodeId from, SeenSet& seen,
                         const std::set<NodeId>& neighbors);

/// Copy of `msg` for forwarding (same id and sender, ttl decremented).
Message forwarded_copy(const Message& msg);

}  // namespace meshfl
