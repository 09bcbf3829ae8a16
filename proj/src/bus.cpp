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

#include "sdnator/bus.hpp"

#include <cstring>

#include "sdnator/util.hpp"

namespace sdnator::bus {

BusOptions BusOptions::from_config(const Config& cfg) {
  BusOptions o;
  o.net.listen = net::Addr::parse(cfg.get_str("bus.listen", "127.0.0.1:7070"));
  o.net.max_frame = static_cast<std::uint64_t>(cfg.get_int("bus.max_frame_mb", 16)) * 1024 * 1024;
  o.net.subscriber_queue_depth = static_cast<std::size_t>(cfg.get_int("bus.queue_depth", 8192));
  std::string policy = cfg.get_str("bus.overflow", "disconnect");
  if (policy == "disconnect")
    o.net.overflow = net::OverflowPolicy::disconnect;
  else if (policy == "drop-oldest")
    o.net.overflow = net::OverflowPolicy::drop_oldest;
  else
    throw Error(Errc::bad_config, "bus.overflow must be disconnect or drop-oldest");
  o.max_subscriptions_per_conn =
      static_cast<std::size_t>(cfg.get_int("bus.max_subscriptions", 1024));
  o.net.kind = "bus";
  return o;
}

net::Addr BusServer::start(const BusOptions& opts) {
  opts_ = opts;
  return net::FrameServer::start(opts.net);
}

void BusServer::on_hello(const ConnPtr& c) {
  c->user = new ConnState();
  send_control(c, wire::FrameType::hello_ack,
               wire::encode_hello_ack({wire::kProtocolVersion, "bus"}));
}

void BusServer::on_disconnect(const ConnPtr& c) {
  auto* st = state(c);
  if (!st) return;
  {
    std::unique_lock lk(index_mu_);
    for (const auto& [id, pattern] : st->subs) remove_sub_locked(id, pattern);
  }
  delete st;
  c->user = nullptr;
}

void BusServer::on_frame(const ConnPtr& c, wire::Frame&& f) {
  switch (f.type) {
    case wire::FrameType::pub_batch:
      handle_publish(c, f.payload);
      break;
    case wire::FrameType::sub:
      handle_subscribe(c, f.payload);
      break;
    case wire::FrameType::unsub:
      handle_unsubscribe(c, f.payload);
      break;
    default:
      send_err_and_close(c, Errc::malformed_frame, "unexpected frame type on bus connection");
  }
}

void BusServer::handle_publish(const ConnPtr& c, std::span<const std::uint8_t> payload) {
  auto batch = wire::decode_pub_batch(payload);
  if (batch.empty()) {
    send_err_and_close(c, Errc::malformed_frame, "empty PUB_BATCH");
    return;
  }
  std::uint64_t expected = c->last_seq;
  for (const auto& e : batch) {
    if (e.seq != ++expected) {
      send_err_and_close(c, Errc::sequence_gap,
                         "expected seq " + std::to_string(expected) + ", got " +
                             std::to_string(e.seq) + "; connection reset required");
      return;
    }
  }

  std::uint32_t accepted = 0;
  {
    std::shared_lock lk(index_mu_);
    for (const auto& e : batch) {
      DataKey key;
      try {
        key = DataKey::parse(e.key);
      } catch (const Error&) {
        lk.unlock();
        send_err_and_close(c, Errc::malformed_key, "unparsable key in PUB_BATCH: " + e.key);
        return;
      }
      ++accepted;

      // Encode the envelope body once; only the leading sub id differs per
      // subscription.
      std::vector<std::uint8_t> body;
      auto deliver_to = [&](const SubEntry& s) {
        if (body.empty()) {
          wire::Deliver d;
          d.sub_id = 0;
          d.key = e.key;
          d.producer_app = c->hello.app_id;
          d.producer_instance = c->hello.instance;
          d.value = e.value;
          d.seq = e.seq;
          body = wire::encode_deliver(d);
        }
        std::vector<std::uint8_t> frame = body;
        for (int i = 0; i < 8; ++i) frame[i] = static_cast<std::uint8_t>(s.sub_id >> (8 * i));
        if (send_deliver(s.conn, std::move(frame))) stats_.delivered.fetch_add(1);
      };

      if (auto it = exact_.find(key.segment_path()); it != exact_.end())
        for (const auto& s : it->second) deliver_to(s);
      for (const auto& w : wild_)
        if (w.pattern.matches(key)) deliver_to(w.sub);
    }
  }
  c->last_seq = expected;
  stats_.published.fetch_add(accepted);
  stats_.batches.fetch_add(1);
  send_control(c, wire::FrameType::ack, wire::encode_ack({c->last_seq, accepted}));
}

void BusServer::handle_subscribe(const ConnPtr& c, std::span<const std::uint8_t> payload) {
  auto text = wire::decode_sub(payload);
  KeyPattern pattern;
  try {
    pattern = KeyPattern::parse(text);
  } catch (const Error& e) {
    send_control(c, wire::FrameType::err,
                 wire::encode_err({static_cast<std::uint16_t>(Errc::malformed_key), e.what()}));
    return;
  }
  auto* st = state(c);
  if (st->subs.size() >= opts_.max_subscriptions_per_conn) {
    send_control(c, wire::FrameType::err,
                 wire::encode_err({static_cast<std::uint16_t>(Errc::too_many_subscriptions),
                                   "subscription cap reached"}));
    return;
  }
  std::uint64_t id = next_sub_id_.fetch_add(1);
  {
    std::unique_lock lk(index_mu_);
    if (pattern.literal())
      exact_[pattern.render()].push_back({id, c});
    else
      wild_.push_back({pattern, {id, c}});
    st->subs.emplace(id, pattern);
  }
  // Acked only once the subscription is visible to concurrent publishers.
  send_control(c, wire::FrameType::sub_ack, wire::encode_sub_ack(id));
}

void BusServer::handle_unsubscribe(const ConnPtr& c, std::span<const std::uint8_t> payload) {
  std::uint64_t id = wire::decode_u64(payload);
  auto* st = state(c);
  auto it = st->subs.find(id);
  if (it == st->subs.end()) {
    send_control(c, wire::FrameType::err,
                 wire::encode_err({static_cast<std::uint16_t>(Errc::unknown_subscription),
                                   "unknown subscription " + std::to_string(id)}));
    return;
  }
  {
    std::unique_lock lk(index_mu_);
    remove_sub_locked(id, it->second);
    st->subs.erase(it);
  }
  send_control(c, wire::FrameType::ack, wire::encode_ack({id, 1}));
}

void BusServer::remove_sub_locked(std::uint64_t sub_id, const KeyPattern& pattern) {
  if (pattern.literal()) {
    auto it = exact_.find(pattern.render());
    if (it == exact_.end()) return;
    auto& vec = it->second;
    std::erase_if(vec, [&](const SubEntry& s) { return s.sub_id == sub_id; });
    if (vec.empty()) exact_.erase(it);
  } else {
    std::erase_if(wild_, [&](const WildEntry& w) { return w.sub.sub_id == sub_id; });
  }
}

}  // namespace sdnator::bus
