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

#ifndef SDNATOR_ERRORS_HPP
#define SDNATOR_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sdnator {

enum class Errc : std::uint16_t {
  ok = 0,
  malformed_frame = 1,
  frame_too_large = 2,
  sequence_gap = 3,
  backpressure = 4,
  too_many_subscriptions = 5,
  unknown_subscription = 6,
  malformed_query = 7,
  not_a_literal_key = 8,
  storage_full = 9,
  bad_hello = 10,
  reserved_namespace = 11,
  duplicate_instance = 12,
  unknown_app = 13,
  malformed_key = 14,
  handshake_timeout = 15,
  not_a_producer = 16,
  not_a_consumer = 17,
  unknown_capability_key = 18,
  bad_config = 19,
  transport = 20,
  port_in_use = 21,
  invalid_config = 22,
  archive_unavailable = 23,
  internal = 99,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace sdnator

#endif  // SDNATOR_ERRORS_HPP
