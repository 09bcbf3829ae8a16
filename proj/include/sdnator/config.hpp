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

#ifndef SDNATOR_CONFIG_HPP
#define SDNATOR_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace sdnator {

// INI-style configuration shared by the services, the client library, the
// simulator and the benchmark harness:
//
//   # comment
//   [bus]
//   listen = 127.0.0.1:7070
//
// Keys are addressed as "section.key". Missing required keys raise
// Error(bad_config) naming the key.
class Config {
 public:
  Config() = default;

  static Config load_file(const std::string& path);
  static Config parse(std::string_view text, const std::string& origin = "<inline>");

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_str(const std::string& key) const;  // required
  std::string get_str(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::optional<std::string> find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  std::string origin_ = "<empty>";
};

}  // namespace sdnator

#endif  // SDNATOR_CONFIG_HPP
