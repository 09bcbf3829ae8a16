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

#include "sdnator/client.hpp"

#include <algorithm>

#include "sdnator/util.hpp"

namespace sdnator::net {

FramedClient::FramedClient(const Addr& addr, const wire::Hello& hello, ClientOptions opts)
    : opts_(std::move(opts)) {
  sock_ = Socket::connect(addr);
  alive_.store(true);
  reader_ = std::thread([this] { reader_loop(); });
  try {
    std::lock_guard lk(req_mu_);
    clear_responses();
    send(wire::FrameType::hello, wire::encode_hello(hello));
    wire::Frame f = next_response(wire::FrameType::hello_ack);
    server_info_ = wire::decode_hello_ack(f.payload);
  } catch (...) {
    close();
    throw;
  }
}

FramedClient::~FramedClient() { close(); }

void FramedClient::close() {
  if (closed_.exchange(true)) {
    if (reader_.joinable()) reader_.join();
    return;
  }
  alive_.store(false);
  sock_.shutdown();
  if (reader_.joinable()) reader_.join();
  sock_.close();
}

void FramedClient::send(wire::FrameType t, std::span<const std::uint8_t> payload) {
  std::lock_guard lk(send_mu_);
  if (opts_.inject_latency_us > 0) {
    std::uint64_t now = now_steady_us();
    std::uint64_t target = std::max(now + opts_.inject_latency_us, send_ready_us_);
    // The wire behaves like a latency pipe: each frame departs inject_latency
    // after it was handed over, never earlier than the frame before it.
    send_ready_us_ = target;
    if (target > now) sleep_us(target - now);
  }
  write_frame(sock_, t, payload);
}

void FramedClient::clear_responses() {
  std::lock_guard lk(resp_mu_);
  responses_.clear();
}

wire::Frame FramedClient::next_response(wire::FrameType expect) {
  std::unique_lock lk(resp_mu_);
  if (!resp_cv_.wait_for(lk, std::chrono::microseconds(opts_.request_timeout_us),
                         [&] { return down_ || !responses_.empty(); })) {
    throw Error(Errc::transport, "request timed out");
  }
  if (responses_.empty()) throw Error(Errc::transport, "connection lost");
  wire::Frame f = std::move(responses_.front());
  responses_.pop_front();
  if (f.type == wire::FrameType::err) {
    auto e = wire::decode_err(f.payload);
    throw Error(static_cast<Errc>(e.code), e.message);
  }
  if (f.type != expect) throw Error(Errc::transport, "unexpected response frame");
  return f;
}

void FramedClient::reader_loop() {
  try {
    FrameReader reader(sock_, opts_.max_frame);
    wire::Frame f;
    while (true) {
      if (!reader.next(f)) break;
      if (opts_.inject_latency_us > 0) {
        std::uint64_t now = now_steady_us();
        std::uint64_t target = std::max(now + opts_.inject_latency_us, recv_ready_us_);
        recv_ready_us_ = target;
        if (target > now) sleep_us(target - now);
      }
      if (f.type == wire::FrameType::deliver) {
        if (opts_.on_deliver) opts_.on_deliver(wire::decode_deliver(f.payload));
        continue;
      }
      std::lock_guard lk(resp_mu_);
      responses_.push_back(std::move(f));
      resp_cv_.notify_all();
    }
  } catch (const std::exception& e) {
    if (!closed_.load()) SDN_DEBUG("client reader: %s", e.what());
  }
  bool was_alive = alive_.exchange(false);
  {
    std::lock_guard lk(resp_mu_);
    down_ = true;
    resp_cv_.notify_all();
  }
  if (was_alive && !closed_.load() && opts_.on_connection_lost) opts_.on_connection_lost();
}

wire::Ack FramedClient::publish(std::vector<wire::Envelope> batch) {
  std::lock_guard lk(req_mu_);
  if (!alive_.load()) throw Error(Errc::transport, "connection is down");
  for (auto& e : batch) e.seq = ++seq_;
  clear_responses();
  send(wire::FrameType::pub_batch, wire::encode_pub_batch(batch));
  wire::Frame f = next_response(wire::FrameType::ack);
  return wire::decode_ack(f.payload);
}

std::uint64_t FramedClient::subscribe(const std::string& pattern) {
  std::lock_guard lk(req_mu_);
  if (!alive_.load()) throw Error(Errc::transport, "connection is down");
  clear_responses();
  send(wire::FrameType::sub, wire::encode_sub(pattern));
  wire::Frame f = next_response(wire::FrameType::sub_ack);
  return wire::decode_u64(f.payload);
}

void FramedClient::unsubscribe(std::uint64_t sub_id) {
  std::lock_guard lk(req_mu_);
  if (!alive_.load()) throw Error(Errc::transport, "connection is down");
  clear_responses();
  send(wire::FrameType::unsub, wire::encode_unsub(sub_id));
  next_response(wire::FrameType::ack);
}

wire::Ack FramedClient::archive_append(std::vector<wire::ArchiveEntry> batch) {
  std::lock_guard lk(req_mu_);
  if (!alive_.load()) throw Error(Errc::transport, "connection is down");
  for (auto& e : batch) e.seq = ++seq_;
  clear_responses();
  send(wire::FrameType::archive_batch, wire::encode_archive_batch(batch));
  wire::Frame f = next_response(wire::FrameType::ack);
  return wire::decode_ack(f.payload);
}

std::vector<wire::StoredRecord> FramedClient::query(const wire::Query& q) {
  std::lock_guard lk(req_mu_);
  if (!alive_.load()) throw Error(Errc::transport, "connection is down");
  clear_responses();
  send(wire::FrameType::query, wire::encode_query(q));
  std::vector<wire::StoredRecord> out;
  while (true) {
    wire::Frame f = next_response(wire::FrameType::query_result);
    auto chunk = wire::decode_query_result(f.payload);
    for (auto& r : chunk.records) out.push_back(std::move(r));
    if (chunk.final_chunk) break;
  }
  return out;
}

void FramedClient::set_index(const wire::SetIndex& s) {
  std::lock_guard lk(req_mu_);
  if (!alive_.load()) throw Error(Errc::transport, "connection is down");
  clear_responses();
  send(wire::FrameType::set_index, wire::encode_set_index(s));
  next_response(wire::FrameType::ack);
}

void FramedClient::ping() {
  std::lock_guard lk(req_mu_);
  if (!alive_.load()) throw Error(Errc::transport, "connection is down");
  clear_responses();
  send(wire::FrameType::ping, wire::encode_u64(now_steady_us()));
  next_response(wire::FrameType::pong);
}

}  // namespace sdnator::net
