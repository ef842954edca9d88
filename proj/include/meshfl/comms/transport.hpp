#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "meshfl/topology.hpp"

namespace meshfl {

/// Called with the link peer a frame arrived on (not necessarily its original sender).
using FrameHandler = std::function<void(NodeId from, std::vector<std::uint8_t> frame)>;

/// Point-to-point frame carrier. Frames are complete encoded messages; a
/// transport never inspects them beyond what it needs to identify the peer.
class Transport {
 public:
  virtual ~Transport() = default;

  /// Starts accepting links; returns the address other nodes dial.
  virtual std::string listen(FrameHandler handler) = 0;
  /// Opens a link to `peer`. Throws ConnectFailed when nothing answers.
  virtual void dial(NodeId peer, const std::string& address) = 0;
  /// True if the frame was handed to the peer.
  virtual bool send(NodeId peer, std::span<const std::uint8_t> frame) = 0;
  virtual void drop(NodeId peer) = 0;
  virtual void close() = 0;
};

class InprocNetwork;

namespace detail {
struct InprocEndpoint;
}

/// Synchronous in-process transport: `send` runs the receiver's handler
/// directly, one frame at a time per receiver.
class InprocTransport : public Transport {
 public:
  InprocTransport(std::shared_ptr<InprocNetwork> network, NodeId self);
  ~InprocTransport() override;

  std::string listen(FrameHandler handler) override;
  void dial(NodeId peer, const std::string& address) override;
  bool send(NodeId peer, std::span<const std::uint8_t> frame) override;
  void drop(NodeId peer) override;
  void close() override;

 private:
  std::shared_ptr<InprocNetwork> network_;
  NodeId self_;
  std::shared_ptr<detail::InprocEndpoint> endpoint_;
};

/// Address registry shared by the in-process transports of one federation.
class InprocNetwork {
 public:
  std::string bind(NodeId self, std::shared_ptr<detail::InprocEndpoint> endpoint);
  void unbind(const std::string& address);
  std::shared_ptr<detail::InprocEndpoint> lookup(const std::string& address) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<detail::InprocEndpoint>> endpoints_;
};

/// TCP transport on IPv4. One long-lived connection per peer; the accepting
/// side learns the peer id from the first frame's sender field.
class TcpTransport : public Transport {
 public:
  TcpTransport(NodeId self, std::string host, std::uint16_t port);
  ~TcpTransport() override;

  std::string listen(FrameHandler handler) override;
  void dial(NodeId peer, const std::string& address) override;
  bool send(NodeId peer, std::span<const std::uint8_t> frame) override;
  void drop(NodeId peer) override;
  void close() override;

 private:
  struct Conn {
    int fd = -1;
    std::mutex write_mu;
    std::atomic<bool> open{true};
  };

  void accept_loop();
  void read_loop(std::shared_ptr<Conn> conn, std::optional<NodeId> peer);
  void start_reader(std::shared_ptr<Conn> conn, std::optional<NodeId> peer);

  NodeId self_;
  std::string host_;
  std::uint16_t port_;
  int listen_fd_ = -1;
  FrameHandler handler_;
  std::atomic<bool> closing_{false};
  std::mutex mu_;
  std::map<NodeId, std::shared_ptr<Conn>> conns_;
  std::vector<std::shared_ptr<Conn>> all_conns_;
  std::vector<std::thread> threads_;
  std::thread acceptor_;
};

}  // namespace meshfl
