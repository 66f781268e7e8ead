#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>
#include <vector>

#include "forkstore/cluster/client.hpp"

namespace forkstore::cluster {

namespace detail {

inline Error sock_error(const std::string& what) {
  return Error(ErrorCode::Transport, what + ": " + std::strerror(errno));
}

inline void write_all(int fd, const Bytes& b) {
  std::size_t off = 0;
  while (off < b.size()) {
    const ssize_t n = ::send(fd, b.data() + off, b.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw sock_error("send");
    }
    off += static_cast<std::size_t>(n);
  }
}

/// False on a clean close before any byte arrived.
inline bool read_exact(int fd, std::uint8_t* p, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, p + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw Error(ErrorCode::Transport, "connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      throw sock_error("recv");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

/// Reads one whole frame, length prefix included. Empty on clean EOF.
inline Bytes read_frame(int fd) {
  std::uint8_t len_le[4];
  if (!read_exact(fd, len_le, 4)) return {};
  const std::uint32_t len = len_le[0] | (len_le[1] << 8) | (len_le[2] << 16) | (static_cast<std::uint32_t>(len_le[3]) << 24);
  if (len < 9 || len > kMaxFrame) throw Error(ErrorCode::Transport, "bad frame length " + std::to_string(len));
  Bytes out(4 + len);
  std::memcpy(out.data(), len_le, 4);
  if (!read_exact(fd, out.data() + 4, len)) throw Error(ErrorCode::Transport, "connection closed mid-frame");
  return out;
}

inline int connect_to(const NodeAddress& a) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(a.port);
  if (int rc = ::getaddrinfo(a.host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw Error(ErrorCode::Transport, "resolve " + a.host + ": " + gai_strerror(rc));
  int fd = -1;
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw sock_error("connect " + a.host + ":" + port);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

}  // namespace detail

/// One persistent connection per node, reopened after a failure. A failed
/// call surfaces as a retryable Transport error.
class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(std::vector<NodeAddress> nodes) : addrs_(std::move(nodes)), conns_(addrs_.size()) {}

  ~TcpTransport() override {
    for (auto& c : conns_)
      if (c.fd >= 0) ::close(c.fd);
  }

  std::uint32_t nodes() const override { return static_cast<std::uint32_t>(addrs_.size()); }

  Bytes call(std::uint32_t node, const Bytes& frame) override {
    if (node >= conns_.size()) throw Error(ErrorCode::Transport, "no node " + std::to_string(node));
    Conn& c = conns_[node];
    std::lock_guard g(c.mu);
    try {
      if (c.fd < 0) c.fd = detail::connect_to(addrs_[node]);
      detail::write_all(c.fd, frame);
      Bytes resp = detail::read_frame(c.fd);
      if (resp.empty()) throw Error(ErrorCode::Transport, "node " + std::to_string(node) + " closed the connection");
      return resp;
    } catch (const Error&) {
      if (c.fd >= 0) ::close(c.fd);
      c.fd = -1;
      throw;
    }
  }

 private:
  struct Conn {
    std::mutex mu;
    int fd = -1;
  };
  std::vector<NodeAddress> addrs_;
  std::vector<Conn> conns_;
};

/// Accepts connections and answers frames with `handler`, one thread per
/// connection.
class TcpServer {
 public:
  TcpServer(const NodeAddress& bind_to, FrameHandler handler) : handler_(std::move(handler)) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw detail::sock_error("socket");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(bind_to.port);
    if (::inet_pton(AF_INET, bind_to.host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd_);
      throw Error(ErrorCode::InvalidArgument, "bind address must be an IPv4 literal: " + bind_to.host);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0) {
      Error e = detail::sock_error("bind " + bind_to.host + ":" + std::to_string(bind_to.port));
      ::close(fd_);
      throw e;
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  ~TcpServer() { stop(); }

  /// Port actually bound (useful when asked for port 0).
  std::uint16_t port() const { return port_; }

  void start() {
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  /// Blocks serving until stopped.
  void run() { accept_loop(); }

  void stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    if (acceptor_.joinable()) acceptor_.join();
    std::lock_guard g(mu_);
    for (int c : clients_) ::shutdown(c, SHUT_RDWR);
    for (auto& t : workers_)
      if (t.joinable()) t.join();
  }

 private:
  void accept_loop() {
    while (!stopping_) {
      int c = ::accept(fd_, nullptr, nullptr);
      if (c < 0) {
        if (errno == EINTR) continue;
        return;
      }
      int one = 1;
      ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      std::lock_guard g(mu_);
      clients_.push_back(c);
      workers_.emplace_back([this, c] { serve(c); });
    }
  }

  void serve(int c) {
    try {
      while (true) {
        Bytes req = detail::read_frame(c);
        if (req.empty()) break;
        detail::write_all(c, handler_(req));
      }
    } catch (const Error&) {
      // The peer went away or sent garbage; drop the connection.
    }
    ::close(c);
  }

  FrameHandler handler_;
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<int> clients_;
  std::vector<std::thread> workers_;
};

/// Client for the cluster named by a config file.
inline std::unique_ptr<ClusterClient> connect_cluster(const ClusterConfig& cfg) {
  auto t = std::make_shared<TcpTransport>(cfg.nodes);
  return ClusterClient::connect(t, cfg.engine, cfg.cache_chunks);
}

/// Runs node `id` of `cfg` over the store directory `dir`. Other nodes'
/// stores are reached over TCP.
class TcpNode {
 public:
  TcpNode(const ClusterConfig& cfg, std::uint32_t id, const std::filesystem::path& dir) {
    if (id >= cfg.nodes.size()) throw Error(ErrorCode::InvalidArgument, "node id out of range");
    EngineConfig ec = open_manifest(dir, cfg.engine);
    LogChunkStore::Options lo;
    lo.digest = ec.digest;
    lo.sync_every_put = ec.sync_every_put;
    auto local = std::make_shared<LogChunkStore>(dir, lo);
    peers_ = std::make_shared<TcpTransport>(cfg.nodes);
    std::vector<ChunkStorePtr> stores;
    for (std::uint32_t i = 0; i < cfg.nodes.size(); ++i)
      stores.push_back(i == id ? ChunkStorePtr(local) : std::make_shared<RemoteChunkStore>(peers_, i, ec.digest));
    servlet_ = std::make_unique<Servlet>(id, std::move(stores), std::make_unique<BranchManager>(dir / "branches.log"),
                                         ec, cfg.one_layer, cfg.cache_chunks);
    server_ = std::make_unique<TcpServer>(cfg.nodes[id], [this](const Bytes& f) { return servlet_->handle_frame(f); });
  }

  Servlet& servlet() { return *servlet_; }
  std::uint16_t port() const { return server_->port(); }
  void start() { server_->start(); }
  void run() { server_->run(); }
  void stop() { server_->stop(); }

 private:
  std::shared_ptr<TcpTransport> peers_;
  std::unique_ptr<Servlet> servlet_;
  std::unique_ptr<TcpServer> server_;
};

}  // namespace forkstore::cluster
