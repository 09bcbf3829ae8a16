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

#ifndef SDNATOR_NET_HPP
#define SDNATOR_NET_HPP

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "sdnator/wire.hpp"

namespace sdnator::net {

struct Addr {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Addr parse(const std::string& text);  // "host:port"
  std::string to_string() const { return host + ":" + std::to_string(port); }
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(o.fd_.exchange(-1)) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  static Socket connect(const Addr& addr);  // throws Error(transport)

  void write_all(const void* data, std::size_t n);
  // False on clean EOF at a message boundary; throws on mid-read EOF or error.
  bool read_exact(void* out, std::size_t n);

  // Wakes any blocked reader/writer; safe to call from another thread.
  void shutdown();
  void close();
  bool valid() const { return fd_.load() >= 0; }
  int fd() const { return fd_.load(); }

 private:
  std::atomic<int> fd_{-1};
};

class Listener {
 public:
  Listener() = default;
  ~Listener() { close(); }
  Listener(Listener&& o) noexcept : fd_(o.fd_.exchange(-1)), addr_(o.addr_) {}
  Listener& operator=(Listener&& o) noexcept {
    if (this != &o) {
      close();
      fd_.store(o.fd_.exchange(-1));
      addr_ = o.addr_;
    }
    return *this;
  }

  // Throws Error(port_in_use) when the port is taken. Port 0 binds an
  // ephemeral port; bound_addr() reports the actual one.
  static Listener bind(const Addr& addr);

  // Returns an invalid socket once close() has been called.
  Socket accept();
  void close();
  Addr bound_addr() const { return addr_; }

 private:
  std::atomic<int> fd_{-1};
  Addr addr_;
};

// False on clean EOF before any byte of a frame.
bool read_frame(Socket& s, wire::Frame& out, std::uint64_t max_frame);
void write_frame(Socket& s, wire::FrameType type, std::span<const std::uint8_t> payload);

// Buffered frame reader: drains the socket in large chunks instead of two
// recv() calls per frame.
class FrameReader {
 public:
  explicit FrameReader(Socket& s, std::uint64_t max_frame)
      : sock_(s), max_frame_(max_frame) {
    buf_.resize(256 * 1024);
  }

  // False on clean EOF at a frame boundary.
  bool next(wire::Frame& out);

 private:
  bool fill_at_least(std::size_t need);

  Socket& sock_;
  std::uint64_t max_frame_;
  std::vector<std::uint8_t> buf_;
  std::size_t begin_ = 0, end_ = 0;
};

enum class OverflowPolicy { disconnect, drop_oldest };

struct ServerOptions {
  Addr listen;
  std::uint64_t max_frame = wire::kDefaultMaxFrame;
  std::size_t subscriber_queue_depth = 8192;  // DELIVER frames per connection
  OverflowPolicy overflow = OverflowPolicy::disconnect;
  std::string kind = "bus";
};

// Threaded frame server: one reader and one writer thread per connection.
// Inbound frames for a connection are processed serially on its reader
// thread; outbound frames flow through a per-connection queue drained by the
// writer thread, so delivery to one connection is serialized while distinct
// connections proceed in parallel.
class FrameServer {
 public:
  struct Conn {
    std::uint64_t id = 0;
    Socket sock;
    wire::Hello hello;
    bool hello_done = false;
    std::uint64_t last_seq = 0;

    std::mutex out_mu;
    std::condition_variable out_cv;
    std::deque<std::pair<wire::FrameType, std::vector<std::uint8_t>>> outq;
    std::size_t queued_delivers = 0;
    bool closing = false;
    std::uint64_t dropped_delivers = 0;

    void* user = nullptr;  // owned by the derived server
  };
  using ConnPtr = std::shared_ptr<Conn>;

  virtual ~FrameServer();

  // Binds and starts accepting; returns the bound address.
  Addr start(const ServerOptions& opts);
  void stop();
  Addr bound_addr() const { return listener_.bound_addr(); }

  std::uint64_t total_dropped_delivers() const { return dropped_total_.load(); }

 protected:
  virtual void on_hello(const ConnPtr& c) = 0;
  virtual void on_frame(const ConnPtr& c, wire::Frame&& f) = 0;
  virtual void on_disconnect(const ConnPtr& c) = 0;

  // Control frames (acks, errors, sub acks) are never dropped and do not
  // count against the subscriber queue depth.
  void send_control(const ConnPtr& c, wire::FrameType t, std::vector<std::uint8_t> payload);
  // Returns false when the frame was dropped or the connection was closed
  // by the overflow policy.
  bool send_deliver(const ConnPtr& c, std::vector<std::uint8_t> payload);
  void send_err_and_close(const ConnPtr& c, Errc code, const std::string& message);
  void close_conn(const ConnPtr& c);

  const ServerOptions& options() const { return opts_; }

 private:
  void accept_loop();
  void reader_loop(ConnPtr c);
  void writer_loop(ConnPtr c);
  void spawn(void (FrameServer::*fn)(ConnPtr), ConnPtr c);

  Listener listener_;
  ServerOptions opts_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> next_conn_id_{1};
  std::atomic<std::uint64_t> dropped_total_{0};

  std::mutex conns_mu_;
  std::unordered_map<std::uint64_t, ConnPtr> conns_;

  std::mutex threads_mu_;
  std::condition_variable threads_cv_;
  std::size_t active_threads_ = 0;
};

}  // namespace sdnator::net

#endif  // SDNATOR_NET_HPP
