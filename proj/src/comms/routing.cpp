#include "meshfl/comms/routing.hpp"

namespace meshfl {

bool SeenSet::insert(const MsgId& id) {
  if (!ids_.insert(id).second) return false;
  order_.push_back(id);
  while (order_.size() > capacity_) {
    ids_.erase(order_.front());
    order_.pop_front();
  }
  return true;
}

RouteDecision on_receive(const Message& msg, NodeId from, SeenSet& seen,
                         const std::set<NodeId>& neighbors) {
  RouteDecision d;
  if (!seen.insert(msg.id)) return d;
  d.deliver = true;
  if (is_forwarding(msg.type) && msg.ttl > 0) {
    d.forward_to = neighbors;
    d.forward_to.erase(from);
  }
  return d;
}

Message forwarded_copy(const Message& msg) {
  Message copy = msg;
  copy.ttl = static_cast<std::uint8_t>(msg.ttl - 1);
  return copy;
}

}  // namespace meshfl
