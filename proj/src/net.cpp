// Copyright 2026 The SDNator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sdnator/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "sdnator/util.hpp"

namespace sdnator::net {

namespace {

sockaddr_in to_sockaddr(const Addr& addr) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1)
    throw Error(Errc::transport, "bad address: " + addr.host);
  return sa;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Addr Addr::parse(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos)
    throw Error(Errc::bad_config, "address must be host:port, got \"" + text + "\"");
  Addr a;
  a.host = text.substr(0, colon);
  long port = std::strtol(text.c_str() + colon + 1, nullptr, 10);
  if (port < 0 || port > 65535)
    throw Error(Errc::bad_config, "bad port in address \"" + text + "\"");
  a.port = static_cast<std::uint16_t>(port);
  return a;
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_.store(o.fd_.exchange(-1));
  }
  return *this;
}

Socket Socket::connect(const Addr& addr) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(Errc::transport, std::string("socket: ") + std::strerror(errno));
  sockaddr_in sa = to_sockaddr(addr);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    int err = errno;
    ::close(fd);
    throw Error(Errc::transport, "connect " + addr.to_string() + ": " + std::strerror(err));
  }
  set_nodelay(fd);
  return Socket(fd);
}

void Socket::write_all(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (n > 0) {
    int fd = fd_.load();
    if (fd < 0) throw Error(Errc::transport, "write on closed socket");
    ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::transport, std::string("send: ") + std::strerror(errno));
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

bool Socket::read_exact(void* out, std::size_t n) {
  auto* p = static_cast<std::uint8_t*>(out);
  std::size_t got = 0;
  while (got < n) {
    int fd = fd_.load();
    if (fd < 0) {
      if (got == 0) return false;
      throw Error(Errc::transport, "socket closed mid-read");
    }
    ssize_t r = ::recv(fd, p + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw Error(Errc::transport, "peer closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      if (got == 0) return false;  // reset while idle counts as EOF
      throw Error(Errc::transport, std::string("recv: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void Socket::shutdown() {
  int fd = fd_.load();
  if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
}

void Socket::close() {
  int fd = fd_.exchange(-1);
  if (fd >= 0) ::close(fd);
}

Listener Listener::bind(const Addr& addr) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(Errc::transport, std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa = to_sockaddr(addr);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    int err = errno;
    ::close(fd);
    if (err == EADDRINUSE)
      throw Error(Errc::port_in_use, "address already in use: " + addr.to_string());
    throw Error(Errc::transport, "bind " + addr.to_string() + ": " + std::strerror(err));
  }
  if (::listen(fd, 128) != 0) {
    int err = errno;
    ::close(fd);
    throw Error(Errc::transport, std::string("listen: ") + std::strerror(err));
  }
  socklen_t len = sizeof sa;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  Listener l;
  l.fd_.store(fd);
  l.addr_ = addr;
  l.addr_.port = ntohs(sa.sin_port);
  return l;
}

Socket Listener::accept() {
  int fd = fd_.load();
  if (fd < 0) return Socket();
  int c = ::accept(fd, nullptr, nullptr);
  if (c < 0) return Socket();
  set_nodelay(c);
  return Socket(c);
}

void Listener::close() {
  int fd = fd_.exchange(-1);
  if (fd >= 0) {
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }
}

bool read_frame(Socket& s, wire::Frame& out, std::uint64_t max_frame) {
  std::uint8_t head[4];
  if (!s.read_exact(head, 4)) return false;
  std::uint32_t len = static_cast<std::uint32_t>(head[0]) | (head[1] << 8) | (head[2] << 16) |
                      (static_cast<std::uint32_t>(head[3]) << 24);
  if (len < 1) throw Error(Errc::malformed_frame, "zero-length frame");
  if (len > max_frame) throw Error(Errc::frame_too_large, "frame of " + std::to_string(len) + " bytes");
  std::uint8_t type;
  if (!s.read_exact(&type, 1)) throw Error(Errc::transport, "peer closed mid-frame");
  out.type = static_cast<wire::FrameType>(type);
  out.payload.resize(len - 1);
  if (len > 1 && !s.read_exact(out.payload.data(), len - 1))
    throw Error(Errc::transport, "peer closed mid-frame");
  return true;
}

bool FrameReader::fill_at_least(std::size_t need) {
  // Compact or grow so [begin_, begin_+need) can exist contiguously.
  if (begin_ + need > buf_.size()) {
    std::memmove(buf_.data(), buf_.data() + begin_, end_ - begin_);
    end_ -= begin_;
    begin_ = 0;
    if (need > buf_.size()) buf_.resize(need);
  }
  while (end_ - begin_ < need) {
    int fd = sock_.fd();
    if (fd < 0) return end_ - begin_ == 0 ? false
                                          : throw Error(Errc::transport, "socket closed mid-frame");
    ssize_t r = ::recv(fd, buf_.data() + end_, buf_.size() - end_, 0);
    if (r == 0) {
      if (end_ - begin_ == 0) return false;
      throw Error(Errc::transport, "peer closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      if (end_ - begin_ == 0) return false;
      throw Error(Errc::transport, std::string("recv: ") + std::strerror(errno));
    }
    end_ += static_cast<std::size_t>(r);
  }
  return true;
}

bool FrameReader::next(wire::Frame& out) {
  if (!fill_at_least(4)) return false;
  std::uint32_t len = 0;
  std::memcpy(&len, buf_.data() + begin_, 4);
  if (len < 1) throw Error(Errc::malformed_frame, "zero-length frame");
  if (len > max_frame_)
    throw Error(Errc::frame_too_large, "frame of " + std::to_string(len) + " bytes");
  if (!fill_at_least(4 + static_cast<std::size_t>(len)))
    throw Error(Errc::transport, "peer closed mid-frame");
  out.type = static_cast<wire::FrameType>(buf_[begin_ + 4]);
  out.payload.assign(buf_.begin() + static_cast<long>(begin_) + 5,
                     buf_.begin() + static_cast<long>(begin_) + 4 + len);
  begin_ += 4 + len;
  if (begin_ == end_) begin_ = end_ = 0;
  return true;
}

void write_frame(Socket& s, wire::FrameType type, std::span<const std::uint8_t> payload) {
  std::uint32_t len = static_cast<std::uint32_t>(payload.size() + 1);
  std::uint8_t head[5] = {static_cast<std::uint8_t>(len), static_cast<std::uint8_t>(len >> 8),
                          static_cast<std::uint8_t>(len >> 16), static_cast<std::uint8_t>(len >> 24),
                          static_cast<std::uint8_t>(type)};
  // Coalesce header + payload into one send for small frames.
  if (payload.size() <= 4096) {
    std::uint8_t buf[4101];
    std::memcpy(buf, head, 5);
    std::memcpy(buf + 5, payload.data(), payload.size());
    s.write_all(buf, 5 + payload.size());
  } else {
    s.write_all(head, 5);
    s.write_all(payload.data(), payload.size());
  }
}

FrameServer::~FrameServer() { stop(); }

Addr FrameServer::start(const ServerOptions& opts) {
  opts_ = opts;
  listener_ = Listener::bind(opts.listen);
  running_.store(true);
  spawn(nullptr, nullptr);  // accept loop
  return listener_.bound_addr();
}

void FrameServer::spawn(void (FrameServer::*fn)(ConnPtr), ConnPtr c) {
  {
    std::lock_guard lk(threads_mu_);
    ++active_threads_;
  }
  std::thread([this, fn, c = std::move(c)]() mutable {
    try {
      if (fn)
        (this->*fn)(std::move(c));
      else
        accept_loop();
    } catch (const std::exception& e) {
      SDN_ERROR("server thread died: %s", e.what());
    }
    std::lock_guard lk(threads_mu_);
    if (--active_threads_ == 0) threads_cv_.notify_all();
  }).detach();
}

void FrameServer::stop() {
  if (!running_.exchange(false)) {
    // Still wait for stragglers from a previous stop.
    std::unique_lock lk(threads_mu_);
    threads_cv_.wait(lk, [&] { return active_threads_ == 0; });
    return;
  }
  listener_.close();
  {
    std::lock_guard lk(conns_mu_);
    for (auto& [id, c] : conns_) {
      std::lock_guard olk(c->out_mu);
      c->closing = true;
      c->sock.shutdown();
      c->out_cv.notify_all();
    }
  }
  std::unique_lock lk(threads_mu_);
  threads_cv_.wait(lk, [&] { return active_threads_ == 0; });
  conns_.clear();
}

void FrameServer::accept_loop() {
  while (running_.load()) {
    Socket s = listener_.accept();
    if (!s.valid()) break;
    auto c = std::make_shared<Conn>();
    c->id = next_conn_id_.fetch_add(1);
    c->sock = std::move(s);
    {
      std::lock_guard lk(conns_mu_);
      if (!running_.load()) break;
      conns_[c->id] = c;
    }
    spawn(&FrameServer::reader_loop, c);
    spawn(&FrameServer::writer_loop, c);
  }
}

void FrameServer::reader_loop(ConnPtr c) {
  try {
    FrameReader reader(c->sock, opts_.max_frame);
    wire::Frame f;
    while (running_.load() && !c->closing) {
      if (!reader.next(f)) break;
      if (!c->hello_done) {
        if (f.type != wire::FrameType::hello) {
          send_err_and_close(c, Errc::bad_hello, "expected HELLO");
          break;
        }
        c->hello = wire::decode_hello(f.payload);
        if (c->hello.version != wire::kProtocolVersion) {
          send_err_and_close(c, Errc::bad_hello, "unsupported protocol version");
          break;
        }
        c->hello_done = true;
        on_hello(c);
        continue;
      }
      if (f.type == wire::FrameType::ping) {
        send_control(c, wire::FrameType::pong, std::move(f.payload));
        continue;
      }
      on_frame(c, std::move(f));
    }
  } catch (const Error& e) {
    if (e.code() == Errc::frame_too_large || e.code() == Errc::malformed_frame) {
      send_err_and_close(c, e.code(), e.what());
    } else if (running_.load() && !c->closing) {
      SDN_DEBUG("conn %llu read error: %s", static_cast<unsigned long long>(c->id), e.what());
    }
  } catch (const std::exception& e) {
    SDN_WARN("conn %llu: %s", static_cast<unsigned long long>(c->id), e.what());
  }
  close_conn(c);
  on_disconnect(c);
  std::lock_guard lk(conns_mu_);
  conns_.erase(c->id);
}

void FrameServer::writer_loop(ConnPtr c) {
  // Batch queued frames into one writev per wake; headers live in a parallel
  // array so each frame costs no extra copy.
  constexpr std::size_t kMaxBatch = 64;
  std::vector<std::pair<wire::FrameType, std::vector<std::uint8_t>>> items;
  std::array<std::array<std::uint8_t, 5>, kMaxBatch> heads;
  try {
    while (true) {
      items.clear();
      {
        std::unique_lock lk(c->out_mu);
        c->out_cv.wait(lk, [&] { return c->closing || !c->outq.empty(); });
        if (c->outq.empty()) break;  // closing with nothing left to flush
        std::size_t bytes = 0;
        while (!c->outq.empty() && items.size() < kMaxBatch && bytes < (1u << 20)) {
          if (c->outq.front().first == wire::FrameType::deliver) --c->queued_delivers;
          bytes += c->outq.front().second.size();
          items.push_back(std::move(c->outq.front()));
          c->outq.pop_front();
        }
      }
      std::array<iovec, kMaxBatch * 2> iov;
      std::size_t n = 0;
      std::size_t total = 0;
      for (std::size_t i = 0; i < items.size(); ++i) {
        std::uint32_t len = static_cast<std::uint32_t>(items[i].second.size() + 1);
        heads[i] = {static_cast<std::uint8_t>(len), static_cast<std::uint8_t>(len >> 8),
                    static_cast<std::uint8_t>(len >> 16), static_cast<std::uint8_t>(len >> 24),
                    static_cast<std::uint8_t>(items[i].first)};
        iov[n].iov_base = heads[i].data();
        iov[n].iov_len = 5;
        ++n;
        if (!items[i].second.empty()) {
          iov[n].iov_base = items[i].second.data();
          iov[n].iov_len = items[i].second.size();
          ++n;
        }
        total += 5 + items[i].second.size();
      }
      std::size_t written = 0;
      std::size_t first = 0;
      while (written < total) {
        int fd = c->sock.fd();
        if (fd < 0) throw Error(Errc::transport, "socket closed");
        ssize_t w = ::writev(fd, iov.data() + first, static_cast<int>(n - first));
        if (w < 0) {
          if (errno == EINTR) continue;
          throw Error(Errc::transport, std::string("writev: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(w);
        std::size_t skip = static_cast<std::size_t>(w);
        while (first < n && skip >= iov[first].iov_len) {
          skip -= iov[first].iov_len;
          ++first;
        }
        if (first < n && skip > 0) {
          iov[first].iov_base = static_cast<std::uint8_t*>(iov[first].iov_base) + skip;
          iov[first].iov_len -= skip;
        }
      }
    }
  } catch (const std::exception&) {
    // Peer went away; reader will observe the shutdown.
  }
  c->sock.shutdown();
}

void FrameServer::send_control(const ConnPtr& c, wire::FrameType t, std::vector<std::uint8_t> payload) {
  std::lock_guard lk(c->out_mu);
  if (c->closing) return;
  c->outq.emplace_back(t, std::move(payload));
  c->out_cv.notify_one();
}

bool FrameServer::send_deliver(const ConnPtr& c, std::vector<std::uint8_t> payload) {
  std::unique_lock lk(c->out_mu);
  if (c->closing) return false;
  if (c->queued_delivers >= opts_.subscriber_queue_depth) {
    if (opts_.overflow == OverflowPolicy::disconnect) {
      c->dropped_delivers++;
      dropped_total_.fetch_add(1);
      c->closing = true;
      c->sock.shutdown();
      c->out_cv.notify_all();
      lk.unlock();
      SDN_WARN("disconnecting slow subscriber %s/%llu (queue full)", c->hello.app_id.c_str(),
               static_cast<unsigned long long>(c->id));
      return false;
    }
    // drop-oldest: evict the oldest queued DELIVER, keep control frames.
    for (auto it = c->outq.begin(); it != c->outq.end(); ++it) {
      if (it->first == wire::FrameType::deliver) {
        c->outq.erase(it);
        --c->queued_delivers;
        c->dropped_delivers++;
        dropped_total_.fetch_add(1);
        break;
      }
    }
  }
  c->outq.emplace_back(wire::FrameType::deliver, std::move(payload));
  ++c->queued_delivers;
  c->out_cv.notify_one();
  return true;
}

void FrameServer::send_err_and_close(const ConnPtr& c, Errc code, const std::string& message) {
  {
    std::lock_guard lk(c->out_mu);
    if (!c->closing)
      c->outq.emplace_back(wire::FrameType::err,
                           wire::encode_err({static_cast<std::uint16_t>(code), message}));
    c->closing = true;
    c->out_cv.notify_all();
  }
  // Give the writer a moment to flush the error before tearing down.
  sleep_us(1000);
  c->sock.shutdown();
}

void FrameServer::close_conn(const ConnPtr& c) {
  std::lock_guard lk(c->out_mu);
  c->closing = true;
  c->sock.shutdown();
  c->out_cv.notify_all();
}

}  // namespace sdnator::net
