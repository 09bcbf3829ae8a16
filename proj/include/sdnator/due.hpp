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

#ifndef SDNATOR_DUE_HPP
#define SDNATOR_DUE_HPP

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "sdnator/client.hpp"
#include "sdnator/config.hpp"
#include "sdnator/control.hpp"

namespace sdnator::due {

struct WriteFlags {
  bool pub_only = false;  // bypass Data Archives
  bool no_wait = false;   // flush buffers right away instead of lingering
};

enum class WriteResult {
  accepted,  // enqueued toward the bus (and archive unless pub_only)
  paced,     // over the assigned frequency budget; the value is dropped
  rejected,  // capability has no assignment (no consumer demand)
};

struct DueConfig {
  std::string bus_addr = "127.0.0.1:7070";
  std::string archive_addr;  // empty: Data Archives disabled for this app
  std::uint32_t updates_batch = 1;
  std::uint32_t archive_batch = 1;
  std::uint64_t batch_linger_us = 5'000;
  std::uint64_t heartbeat_interval_us = 1'000'000;
  std::uint32_t heartbeat_timeout_multiplier = 3;
  std::uint64_t handshake_timeout_us = 15'000'000;
  std::uint64_t handshake_retry_us = 1'000'000;
  std::uint64_t max_frame = wire::kDefaultMaxFrame;
  std::uint64_t inject_latency_us = 0;
  std::size_t observer_queue_depth = 10'000;
  // Pending-write buffer capacity in batches; writers block when it is full
  // so offered load degrades to the transport rate instead of ballooning.
  std::uint32_t send_window_batches = 4;
  ClockFn pacing_clock;  // defaults to the monotonic clock

  static DueConfig from_config(const Config& cfg);
  void validate() const;
};

struct SessionStats {
  std::atomic<std::uint64_t> accepted{0};
  std::atomic<std::uint64_t> paced{0};
  std::atomic<std::uint64_t> rejected{0};
  std::atomic<std::uint64_t> bus_acked{0};
  std::atomic<std::uint64_t> archive_acked{0};
  std::atomic<std::uint64_t> delivered{0};
  std::atomic<std::uint64_t> dropped_observer{0};
  std::atomic<std::uint64_t> lost_on_reconnect{0};
  std::atomic<std::uint64_t> resubscribes{0};
};

class Session;

// Callback registration handle for one subscription. Callbacks for one
// observer run serially in delivery order on a dedicated dispatch thread; a
// slow callback backpressures only its own queue, which drops oldest on
// overflow.
class Observer {
 public:
  using Callback = std::function<void(const wire::Deliver&)>;

  ~Observer();
  std::uint64_t add_callback(Callback cb);
  void on_resubscribed(std::function<void()> hook);
  const KeyPattern& pattern() const { return pattern_; }
  std::uint64_t delivered() const { return delivered_.load(); }
  std::uint64_t dropped() const { return dropped_.load(); }
  void close();

 private:
  friend class Session;
  Observer(Session* session, KeyPattern pattern, std::size_t depth);
  void push(wire::Deliver&& d);
  void dispatch_loop();

  Session* session_;
  KeyPattern pattern_;
  std::size_t depth_;
  std::uint64_t sub_id_ = 0;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<wire::Deliver> queue_;
  bool closing_ = false;
  std::atomic<std::uint64_t> delivered_{0};
  std::atomic<std::uint64_t> dropped_{0};

  std::mutex cb_mu_;
  std::vector<std::pair<std::uint64_t, Callback>> callbacks_;
  std::function<void()> resub_hook_;
  std::uint64_t next_cb_id_ = 1;

  std::thread dispatcher_;
};

// The Data Ubiquity Engine session an application holds for its lifetime.
// Shareable across threads: write() serializes internally to preserve order,
// observer callbacks run on library-managed threads, get() is synchronous,
// heartbeats run on their own timer thread.
class Session {
 public:
  // Registers with the coordinator (handshake with retries), receives the
  // initial assignments, and starts the heartbeat loop. Interests are *not*
  // auto-subscribed; call observe() explicitly.
  static std::unique_ptr<Session> init(const AppIdentity& identity, Manifest manifest,
                                       DueConfig config);

  // Control-plane entry point used by the coordinator itself: no
  // registration handshake, reserved-namespace publishing allowed.
  static std::unique_ptr<Session> init_coordinator(const AppIdentity& identity, DueConfig config);

  ~Session();
  Session(const Session&) = delete;

  WriteResult write(const DataKey& key, std::vector<std::uint8_t> value, WriteFlags flags = {});
  WriteResult write(const DataKey& key, std::string_view value, WriteFlags flags = {});

  std::shared_ptr<Observer> observe(const KeyPattern& pattern);
  std::shared_ptr<Observer> observe(const std::string& pattern_text);

  // Forwarded to the Data Archives query engine.
  std::vector<wire::StoredRecord> get(const wire::Query& q);

  // Transmits and acks both buffers before returning.
  void flush();

  // Flushes, emits the OFFLINE heartbeat, stops all loops. Idempotent.
  void close();

  control::StatusReply query_status(std::optional<std::string> app_filter,
                                    std::uint64_t timeout_us = 5'000'000);

  const AppIdentity& identity() const { return identity_; }
  const DueConfig& config() const { return config_; }
  const SessionStats& stats() const { return stats_; }

  // Current view of this instance's assignments (empty when another instance
  // of the app is active).
  AssignmentSet current_assignments() const;
  bool has_assignment(const DataKey& key) const;
  std::uint64_t assignment_revision() const { return assignment_revision_.load(); }

  // Reserved-namespace publication used by DUE internals and the
  // coordinator; bypasses capability gating, pacing and the batch buffers
  // (sent and acked synchronously).
  void publish_control(const std::string& key, std::vector<std::uint8_t> payload, bool pub_only);

  // Internal subscriptions (reserved keys) skip the consumer-role check.
  std::shared_ptr<Observer> observe_internal(const KeyPattern& pattern);

 private:
  friend class Observer;
  Session(AppIdentity identity, Manifest manifest, DueConfig config, bool coordinator_mode);

  struct PendingWrite {
    std::string key;
    std::vector<std::uint8_t> value;
    std::uint64_t timestamp_us;
  };
  struct Channel {
    std::mutex mu;
    std::condition_variable cv;        // wakes the sender
    std::condition_variable space_cv;  // wakes blocked writers
    std::deque<PendingWrite> pending;
    std::uint64_t oldest_enqueue_us = 0;
    bool in_flight = false;
    bool flush_hint = false;
    std::uint64_t flushed_through = 0;  // accepted counter drained + acked
    std::uint64_t enqueued = 0;
  };

  void connect();
  void register_with_coordinator();
  void apply_assignment(const control::AssignmentMsg& msg);
  void sender_loop(bool archive);
  bool send_batch(bool archive, std::vector<PendingWrite>&& batch);
  void heartbeat_loop();
  void reconnect_loop();
  void enqueue(Channel& ch, PendingWrite&& w, std::size_t cap);
  void on_deliver(wire::Deliver&& d);
  void send_heartbeat(control::HeartbeatStatus status);
  void subscribe_observer(const std::shared_ptr<Observer>& obs);
  void remove_observer(Observer* obs);
  std::shared_ptr<net::FramedClient> bus() const;
  std::shared_ptr<net::FramedClient> archive() const;

  AppIdentity identity_;
  Manifest manifest_;
  DueConfig config_;
  bool coordinator_mode_;
  std::unordered_set<std::string> capability_keys_;  // rendered
  std::uint64_t clock_now() const { return config_.pacing_clock ? config_.pacing_clock() : now_steady_us(); }

  mutable std::shared_mutex conn_mu_;
  std::shared_ptr<net::FramedClient> bus_;
  std::shared_ptr<net::FramedClient> archive_;

  std::atomic<bool> closing_{false};
  std::atomic<bool> closed_{false};
  std::atomic<bool> bus_down_{false};

  Channel updates_;
  Channel archive_ch_;
  std::mutex write_mu_;  // serializes the gate+pace+enqueue path

  struct Bucket {
    double tokens = 1.0;
    std::uint64_t last_us = 0;
  };
  mutable std::mutex assign_mu_;
  AssignmentSet assignments_;
  std::unordered_map<std::string, Bucket> buckets_;
  std::atomic<std::uint64_t> assignment_revision_{0};

  std::mutex obs_mu_;
  std::unordered_map<std::uint64_t, std::shared_ptr<Observer>> observers_;
  std::deque<wire::Deliver> orphan_delivers_;

  // Handshake/status replies.
  std::mutex reply_mu_;
  std::condition_variable reply_cv_;
  std::optional<control::RegistrationReply> pending_registration_;
  std::optional<control::StatusReply> pending_status_;
  std::mutex status_req_mu_;
  std::shared_ptr<Observer> status_observer_;

  SessionStats stats_;
  std::uint64_t started_us_ = 0;
  std::atomic<std::uint64_t> activity_marker_{0};

  std::mutex hb_mu_;
  std::condition_variable hb_cv_;
  std::mutex reconnect_mu_;
  std::condition_variable reconnect_cv_;

  std::thread updates_sender_;
  std::thread archive_sender_;
  std::thread heartbeat_;
  std::thread reconnector_;
};

}  // namespace sdnator::due

#endif  // SDNATOR_DUE_HPP
