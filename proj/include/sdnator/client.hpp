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

#ifndef SDNATOR_CLIENT_HPP
#define SDNATOR_CLIENT_HPP

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "sdnator/net.hpp"
#include "sdnator/wire.hpp"

namespace sdnator::net {

struct ClientOptions {
  std::uint64_t max_frame = wire::kDefaultMaxFrame;
  // Symmetric one-way latency injected at the transport: outbound frames are
  // held this long before hitting the socket, inbound frames this long after
  // leaving it. Pipelining is preserved (a delayed frame does not stall the
  // frames behind it longer than the injected delay).
  std::uint64_t inject_latency_us = 0;
  std::uint64_t request_timeout_us = 30'000'000;
  std::function<void(wire::Deliver&&)> on_deliver;
  std::function<void()> on_connection_lost;
};

// Client side of the framed protocol. One request/response exchange is in
// flight at a time (requests serialize on an internal mutex); DELIVER frames
// arrive asynchronously and are handed to on_deliver on the reader thread.
class FramedClient {
 public:
  FramedClient(const Addr& addr, const wire::Hello& hello, ClientOptions opts);
  ~FramedClient();
  FramedClient(const FramedClient&) = delete;
  FramedClient& operator=(const FramedClient&) = delete;

  // Assigns contiguous per-connection sequence numbers in send order and
  // blocks until the server acknowledges the batch.
  wire::Ack publish(std::vector<wire::Envelope> batch);
  std::uint64_t subscribe(const std::string& pattern);
  void unsubscribe(std::uint64_t sub_id);

  wire::Ack archive_append(std::vector<wire::ArchiveEntry> batch);
  std::vector<wire::StoredRecord> query(const wire::Query& q);
  void set_index(const wire::SetIndex& s);

  void ping();
  void close();
  bool alive() const { return alive_.load(); }
  const wire::HelloAck& server_info() const { return server_info_; }
  std::uint64_t last_seq() const { return seq_; }

 private:
  void reader_loop();
  void send(wire::FrameType t, std::span<const std::uint8_t> payload);
  // Pops the next response frame (anything that is not a DELIVER); throws the
  // decoded error when it is an ERR frame or the connection died.
  wire::Frame next_response(wire::FrameType expect);
  void clear_responses();

  Socket sock_;
  ClientOptions opts_;
  wire::HelloAck server_info_;
  std::atomic<bool> alive_{false};
  std::atomic<bool> closed_{false};

  std::mutex req_mu_;   // serializes request/response exchanges
  std::mutex send_mu_;  // serializes raw frame writes + latency pacing
  std::uint64_t send_ready_us_ = 0;
  std::uint64_t recv_ready_us_ = 0;
  std::uint64_t seq_ = 0;

  std::mutex resp_mu_;
  std::condition_variable resp_cv_;
  std::deque<wire::Frame> responses_;
  bool down_ = false;

  std::thread reader_;
};

}  // namespace sdnator::net

#endif  // SDNATOR_CLIENT_HPP
