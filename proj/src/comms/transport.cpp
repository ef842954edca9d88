#include "meshfl/comms/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "meshfl/comms/message.hpp"
#include "meshfl/error.hpp"

namespace meshfl {

namespace detail {

struct InprocEndpoint {
  explicit InprocEndpoint(NodeId id) : self(id) {}

  NodeId self;
  std::mutex handler_mu;  // one delivery at a time
  FrameHandler handler;
  bool closed = false;

  std::mutex peers_mu;
  std::map<NodeId, std::weak_ptr<InprocEndpoint>> peers;

  bool deliver(NodeId from, std::span<const std::uint8_t> frame) {
    std::lock_guard lock(handler_mu);
    if (closed || !handler) return false;
    handler(from, std::vector<std::uint8_t>(frame.begin(), frame.end()));
    return true;
  }
};

}  // namespace detail

std::string InprocNetwork::bind(NodeId self, std::shared_ptr<detail::InprocEndpoint> endpoint) {
  const std::string address = "inproc://" + std::to_string(self);
  std::lock_guard lock(mu_);
  auto [it, fresh] = endpoints_.try_emplace(address, endpoint);
  if (!fresh) {
    std::lock_guard other(it->second->handler_mu);
    if (!it->second->closed) throw Error(Errc::DeployFailed, address + " already bound");
    it->second = endpoint;
  }
  return address;
}

void InprocNetwork::unbind(const std::string& address) {
  std::lock_guard lock(mu_);
  endpoints_.erase(address);
}

std::shared_ptr<detail::InprocEndpoint> InprocNetwork::lookup(const std::string& address) const {
  std::lock_guard lock(mu_);
  auto it = endpoints_.find(address);
  return it == endpoints_.end() ? nullptr : it->second;
}

InprocTransport::InprocTransport(std::shared_ptr<InprocNetwork> network, NodeId self)
    : network_(std::move(network)), self_(self),
      endpoint_(std::make_shared<detail::InprocEndpoint>(self)) {}

InprocTransport::~InprocTransport() { close(); }

std::string InprocTransport::listen(FrameHandler handler) {
  {
    std::lock_guard lock(endpoint_->handler_mu);
    endpoint_->handler = std::move(handler);
  }
  return network_->bind(self_, endpoint_);
}

void InprocTransport::dial(NodeId peer, const std::string& address) {
  auto remote = network_->lookup(address);
  if (!remote) throw Error(Errc::ConnectFailed, "nothing bound at " + address);
  {
    std::lock_guard lock(remote->handler_mu);
    if (remote->closed) throw Error(Errc::ConnectFailed, address + " is closed");
  }
  {
    std::lock_guard lock(endpoint_->peers_mu);
    endpoint_->peers[peer] = remote;
  }
  std::lock_guard lock(remote->peers_mu);
  remote->peers[self_] = endpoint_;
}

bool InprocTransport::send(NodeId peer, std::span<const std::uint8_t> frame) {
  std::shared_ptr<detail::InprocEndpoint> remote;
  {
    std::lock_guard lock(endpoint_->peers_mu);
    auto it = endpoint_->peers.find(peer);
    if (it == endpoint_->peers.end()) return false;
    remote = it->second.lock();
  }
  return remote && remote->deliver(self_, frame);
}

void InprocTransport::drop(NodeId peer) {
  std::lock_guard lock(endpoint_->peers_mu);
  endpoint_->peers.erase(peer);
}

void InprocTransport::close() {
  {
    std::lock_guard lock(endpoint_->handler_mu);
    if (endpoint_->closed) return;
    endpoint_->closed = true;
  }
  network_->unbind("inproc://" + std::to_string(self_));
  std::lock_guard lock(endpoint_->peers_mu);
  endpoint_->peers.clear();
}

namespace {

bool write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const auto n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const auto n = ::recv(fd, data, len, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

std::pair<std::string, std::uint16_t> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::ConnectFailed, "bad address " + address);
  return {address.substr(0, colon), static_cast<std::uint16_t>(std::stoi(address.substr(colon + 1)))};
}

sockaddr_in make_sockaddr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw Error(Errc::ConnectFailed, "bad host " + host);
  return addr;
}

constexpr int kDialAttempts = 20;
constexpr auto kDialBackoff = std::chrono::milliseconds(50);

}  // namespace

TcpTransport::TcpTransport(NodeId self, std::string host, std::uint16_t port)
    : self_(self), host_(std::move(host)), port_(port) {}

TcpTransport::~TcpTransport() { close(); }

std::string TcpTransport::listen(FrameHandler handler) {
  handler_ = std::move(handler);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Errc::DeployFailed, std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  auto addr = make_sockaddr(host_, port_);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    const std::string reason = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(Errc::DeployFailed, host_ + ":" + std::to_string(port_) + ": " + reason);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
  return host_ + ":" + std::to_string(port_);
}

void TcpTransport::accept_loop() {
  while (!closing_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 50);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto conn = std::make_shared<Conn>();
    conn->fd = fd;
    start_reader(conn, std::nullopt);
  }
}

void TcpTransport::start_reader(std::shared_ptr<Conn> conn, std::optional<NodeId> peer) {
  std::lock_guard lock(mu_);
  if (closing_) {
    ::close(conn->fd);
    return;
  }
  all_conns_.push_back(conn);
  threads_.emplace_back([this, conn, peer] { read_loop(conn, peer); });
}

void TcpTransport::read_loop(std::shared_ptr<Conn> conn, std::optional<NodeId> peer) {
  std::vector<std::uint8_t> frame;
  while (conn->open && !closing_) {
    frame.assign(kLengthPrefix, 0);
    if (!read_all(conn->fd, frame.data(), kLengthPrefix)) break;
    std::size_t total = 0;
    try {
      total = frame_length(frame);
    } catch (const Error&) {
      break;
    }
    frame.resize(total);
    if (!read_all(conn->fd, frame.data() + kLengthPrefix, total - kLengthPrefix)) break;
    if (!peer) {
      // Sender field of the first frame (CONNECT_TO) names the dialing node.
      NodeId sender = 0;
      std::memcpy(&sender, frame.data() + kLengthPrefix + 4, sizeof(sender));
      peer = sender;
      std::lock_guard lock(mu_);
      conns_[*peer] = conn;
    }
    if (handler_) handler_(*peer, frame);
  }
  conn->open = false;
}

void TcpTransport::dial(NodeId peer, const std::string& address) {
  const auto [host, port] = split_address(address);
  const auto addr = make_sockaddr(host, port);
  for (int attempt = 0; attempt < kDialAttempts; ++attempt) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) break;
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      auto conn = std::make_shared<Conn>();
      conn->fd = fd;
      {
        std::lock_guard lock(mu_);
        conns_[peer] = conn;
      }
      start_reader(conn, peer);
      return;
    }
    ::close(fd);
    std::this_thread::sleep_for(kDialBackoff);
  }
  throw Error(Errc::ConnectFailed, "no answer from " + address);
}

bool TcpTransport::send(NodeId peer, std::span<const std::uint8_t> frame) {
  std::shared_ptr<Conn> conn;
  {
    std::lock_guard lock(mu_);
    auto it = conns_.find(peer);
    if (it == conns_.end()) return false;
    conn = it->second;
  }
  if (!conn->open) return false;
  std::lock_guard lock(conn->write_mu);
  if (!write_all(conn->fd, frame.data(), frame.size())) {
    conn->open = false;
    return false;
  }
  return true;
}

void TcpTransport::drop(NodeId peer) {
  std::lock_guard lock(mu_);
  auto it = conns_.find(peer);
  if (it == conns_.end()) return;
  it->second->open = false;
  ::shutdown(it->second->fd, SHUT_RDWR);
  conns_.erase(it);
}

void TcpTransport::close() {
  if (closing_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  std::vector<std::thread> threads;
  std::vector<std::shared_ptr<Conn>> conns;
  {
    std::lock_guard lock(mu_);
    threads.swap(threads_);
    conns.swap(all_conns_);
    conns_.clear();
  }
  for (auto& c : conns) {
    c->open = false;
    ::shutdown(c->fd, SHUT_RDWR);
  }
  for (auto& t : threads) t.join();
  for (auto& c : conns) ::close(c->fd);
}

}  // namespace meshfl
