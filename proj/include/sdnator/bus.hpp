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

#ifndef SDNATOR_BUS_HPP
#define SDNATOR_BUS_HPP

#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "sdnator/config.hpp"
#include "sdnator/keys.hpp"
#include "sdnator/net.hpp"

namespace sdnator::bus {

struct BusOptions {
  net::ServerOptions net;
  std::size_t max_subscriptions_per_conn = 1024;

  static BusOptions from_config(const Config& cfg);
};

// Data Updates: real-time, in-order, non-persistent publish/subscribe.
// Envelopes are fanned out to every matching subscription at publish time and
// stored nowhere; a subscriber connected after a publish never sees it.
// Matching uses an exact-path hash map plus a scan list for wildcard
// patterns, since exact subscriptions dominate.
class BusServer : public net::FrameServer {
 public:
  struct Stats {
    std::atomic<std::uint64_t> published{0};
    std::atomic<std::uint64_t> delivered{0};
    std::atomic<std::uint64_t> batches{0};
  };

  net::Addr start(const BusOptions& opts);
  using net::FrameServer::stop;

  const Stats& stats() const { return stats_; }
  std::uint64_t dropped() const { return total_dropped_delivers(); }

 protected:
  void on_hello(const ConnPtr& c) override;
  void on_frame(const ConnPtr& c, wire::Frame&& f) override;
  void on_disconnect(const ConnPtr& c) override;

 private:
  struct SubEntry {
    std::uint64_t sub_id;
    ConnPtr conn;
  };
  struct WildEntry {
    KeyPattern pattern;
    SubEntry sub;
  };
  struct ConnState {
    // sub id -> pattern (needed to remove from the right index bucket)
    std::unordered_map<std::uint64_t, KeyPattern> subs;
  };

  void handle_publish(const ConnPtr& c, std::span<const std::uint8_t> payload);
  void handle_subscribe(const ConnPtr& c, std::span<const std::uint8_t> payload);
  void handle_unsubscribe(const ConnPtr& c, std::span<const std::uint8_t> payload);
  void remove_sub_locked(std::uint64_t sub_id, const KeyPattern& pattern);
  static ConnState* state(const ConnPtr& c) { return static_cast<ConnState*>(c->user); }

  BusOptions opts_;
  Stats stats_;
  std::atomic<std::uint64_t> next_sub_id_{1};

  std::shared_mutex index_mu_;
  std::unordered_map<std::string, std::vector<SubEntry>> exact_;
  std::vector<WildEntry> wild_;
};

}  // namespace sdnator::bus

#endif  // SDNATOR_BUS_HPP
