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

#ifndef SDNATOR_CONTROL_HPP
#define SDNATOR_CONTROL_HPP

#include <optional>
#include <string>
#include <vector>

#include "sdnator/app.hpp"

// Coordinator control plane carried as ordinary records on reserved keys.
// Payloads are versioned binary using the wire primitive encoding; layouts
// are documented field by field in docs/protocol.md.
namespace sdnator::control {

inline constexpr std::uint8_t kPayloadVersion = 1;
inline constexpr const char* kRegisterRequestKey = "sdnator.register.request";
inline constexpr const char* kStatusRequestKey = "sdnator.status.request";
inline constexpr const char* kHeartbeatPattern = "sdnator.heartbeat.**";

std::string register_reply_key(const Uuid& instance);
std::string assignment_key(const std::string& app_id);
std::string heartbeat_key(const std::string& app_id, const Uuid& instance);
std::string status_reply_key(const Uuid& instance);

struct RegistrationRequest {
  std::string app_id;
  Uuid instance;
  std::uint8_t roles = 0;
  std::string reply_key;
  Manifest manifest;
};

// Assignments address the whole app; only the named active instance may
// produce. Standbys apply an empty set until failover re-targets them.
struct AssignmentMsg {
  std::string app_id;
  Uuid active_instance;
  std::uint64_t revision = 0;
  AssignmentSet assignments;
};

struct RegistrationReply {
  bool ok = true;
  std::uint16_t error_code = 0;
  std::string error;
  AssignmentMsg assignment;
};

enum class HeartbeatStatus : std::uint8_t { online = 0, idle = 1, offline = 2 };

struct HeartbeatMsg {
  std::string app_id;
  Uuid instance;
  HeartbeatStatus status = HeartbeatStatus::online;
  std::uint64_t uptime_ms = 0;
  std::uint64_t writes = 0;
  std::uint64_t deliveries = 0;
};

struct StatusRequest {
  std::optional<std::string> app_filter;
  std::string reply_key;
};

enum class UnmetReason : std::uint8_t { no_producer = 0, frequency_exceeds_capacity = 1 };

struct UnmetInterest {
  std::string pattern;
  UnmetReason reason = UnmetReason::no_producer;

  bool operator==(const UnmetInterest&) const = default;
  auto operator<=>(const UnmetInterest&) const = default;
};

struct InstanceInfo {
  Uuid instance;
  InstanceStatus status = InstanceStatus::online;
  std::uint64_t last_heartbeat_us = 0;
  Manifest manifest;
};

struct AppInfo {
  std::string app_id;
  std::optional<Uuid> active_instance;
  std::vector<InstanceInfo> instances;
};

struct StatusReply {
  bool ok = true;
  std::uint16_t error_code = 0;
  std::string error;
  std::vector<AppInfo> apps;
  std::vector<UnmetInterest> unmet;
};

std::vector<std::uint8_t> encode_manifest(const Manifest& m);
Manifest decode_manifest(ByteReader& r);

std::vector<std::uint8_t> encode_registration_request(const RegistrationRequest& r);
RegistrationRequest decode_registration_request(std::span<const std::uint8_t> p);

std::vector<std::uint8_t> encode_assignment_msg(const AssignmentMsg& m);
AssignmentMsg decode_assignment_msg(std::span<const std::uint8_t> p);

std::vector<std::uint8_t> encode_registration_reply(const RegistrationReply& r);
RegistrationReply decode_registration_reply(std::span<const std::uint8_t> p);

std::vector<std::uint8_t> encode_heartbeat(const HeartbeatMsg& h);
HeartbeatMsg decode_heartbeat(std::span<const std::uint8_t> p);

std::vector<std::uint8_t> encode_status_request(const StatusRequest& s);
StatusRequest decode_status_request(std::span<const std::uint8_t> p);

std::vector<std::uint8_t> encode_status_reply(const StatusReply& s);
StatusReply decode_status_reply(std::span<const std::uint8_t> p);

}  // namespace sdnator::control

#endif  // SDNATOR_CONTROL_HPP
