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

#ifndef SDNATOR_COORDINATOR_HPP
#define SDNATOR_COORDINATOR_HPP

#include <map>
#include <memory>
#include <optional>
#include <queue>

#include "sdnator/due.hpp"

namespace sdnator::coord {

struct ConsolidationResult {
  // app id -> assignments for that app's capabilities (present for every app
  // that declared at least one capability; possibly empty).
  std::map<std::string, AssignmentSet> per_app;
  std::vector<control::UnmetInterest> unmet;  // sorted, unique

  bool operator==(const ConsolidationResult&) const = default;
};

// Matches all interests and capabilities per data key and derives the
// assigned frequency: the largest stated demand, clamped to the producer's
// capacity (clamps are reported as FrequencyExceedsCapacity). Capabilities
// nobody matched get no assignment; when every matched interest is
// rate-unconstrained the producer's own cap (or unbounded) applies.
// Interests matching no capability are reported NoProducer. Pure and
// deterministic in the manifest map.
ConsolidationResult consolidate(const std::map<std::string, Manifest>& manifests);

struct CoordinatorOptions {
  due::DueConfig due;
  std::string app_id = "coordinator";
  bool recover = true;
  std::uint64_t sweep_interval_us = 0;  // 0: heartbeat interval / 4
  std::uint64_t failover_seed = 0;      // 0: nondeterministic
};

// The special application: registers apps, consolidates interests with
// capabilities, publishes assignments, watches heartbeats, fails over active
// instances. Communicates exclusively through DUE on reserved keys; all state
// is soft and rebuilt from the archive plus live heartbeats after a restart.
class Coordinator {
 public:
  static std::unique_ptr<Coordinator> start(CoordinatorOptions opts);
  ~Coordinator();
  void stop();

  // Snapshot for in-process callers (the status-request path over the bus
  // serves the same data).
  control::StatusReply snapshot(std::optional<std::string> app_filter = std::nullopt) const;
  ConsolidationResult last_consolidation() const;
  const AppIdentity& identity() const { return identity_; }
  due::Session& session() { return *session_; }

 private:
  explicit Coordinator(CoordinatorOptions opts);
  void run_loop();

  struct Instance {
    InstanceStatus status = InstanceStatus::online;
    std::uint64_t last_heartbeat_us = 0;
    Manifest manifest;
    bool registered = false;
  };
  struct App {
    std::map<Uuid, Instance> instances;
    std::optional<Uuid> active;
    AssignmentSet last_published;
    std::optional<Uuid> last_published_active;
    bool ever_published = false;
  };

  struct Event {
    enum class Kind { registration, heartbeat, status_request } kind;
    std::vector<std::uint8_t> payload;
  };

  void handle_registration(std::span<const std::uint8_t> payload);
  void handle_heartbeat(std::span<const std::uint8_t> payload);
  void handle_status_request(std::span<const std::uint8_t> payload);
  void sweep(std::uint64_t now_us);
  // Keeps a healthy active instance selected (random choice on change);
  // returns true when the active instance changed.
  bool ensure_active(App& app);
  void recompute_and_publish();
  void recover_from_archive();
  control::StatusReply build_status(const std::optional<std::string>& filter) const;
  static bool healthy(const Instance& i) {
    return i.status == InstanceStatus::online || i.status == InstanceStatus::idle;
  }

  CoordinatorOptions opts_;
  AppIdentity identity_;
  std::unique_ptr<due::Session> session_;
  std::shared_ptr<due::Observer> reg_obs_, hb_obs_, status_obs_;

  mutable std::mutex state_mu_;
  std::map<std::string, App> apps_;
  std::map<Uuid, std::string> instance_owner_;
  ConsolidationResult last_result_;
  std::uint64_t revision_ = 0;

  SplitMix64 rng_;

  std::mutex q_mu_;
  std::condition_variable q_cv_;
  std::queue<Event> events_;
  std::atomic<bool> stopping_{false};
  std::thread loop_;
};

}  // namespace sdnator::coord

#endif  // SDNATOR_COORDINATOR_HPP
