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

#ifndef SDNATOR_APP_HPP
#define SDNATOR_APP_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sdnator/keys.hpp"
#include "sdnator/util.hpp"
#include "sdnator/wire.hpp"

namespace sdnator {

struct AppIdentity {
  std::string app_id;  // shared across redundant instances; legal key segment
  Uuid instance = Uuid::random();
  std::uint8_t roles = wire::kRoleProducer | wire::kRoleConsumer;

  bool producer() const { return roles & wire::kRoleProducer; }
  bool consumer() const { return roles & wire::kRoleConsumer; }
};

// A consumer's declared demand for a key pattern, optionally rate-qualified.
struct Interest {
  KeyPattern pattern;
  std::optional<double> desired_hz;

  bool operator==(const Interest&) const = default;
};

// A producer's declared ability to generate one literal key, optionally
// capped in rate, optionally asking the archive to index it.
struct Capability {
  DataKey key;
  std::optional<double> max_hz;
  bool index = false;

  bool operator==(const Capability&) const = default;
};

struct Manifest {
  std::vector<Interest> interests;
  std::vector<Capability> capabilities;

  bool operator==(const Manifest&) const = default;

  // Throws on wildcard capability keys, non-positive frequencies, or
  // capabilities under the reserved namespace.
  void validate() const;
};

// Coordinator directive for one key: produce at most at `hz`, or freely when
// unbounded (no interested consumer stated a rate and the producer has no
// cap).
struct Assignment {
  std::optional<double> hz;  // nullopt = unbounded

  bool operator==(const Assignment&) const = default;
};

struct AssignmentSet {
  // canonical key -> assignment; every key appears in the app's capabilities
  std::map<std::string, Assignment> entries;

  bool operator==(const AssignmentSet&) const = default;
};

enum class InstanceStatus : std::uint8_t { online = 0, idle = 1, unresponsive = 2, offline = 3 };

const char* instance_status_name(InstanceStatus s);

}  // namespace sdnator

#endif  // SDNATOR_APP_HPP
