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

#ifndef SDNATOR_KEYS_HPP
#define SDNATOR_KEYS_HPP

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sdnator/errors.hpp"

namespace sdnator {

// Hierarchical data key: dot-separated segments in increasing granularity,
// optionally followed by `:k1=v1,k2=v2` specifications. Segments and spec
// names/values draw from [a-z0-9_-] so keys stay safe in file names and wire
// frames. Values are immutable after construction; all operations are pure.
struct DataKey {
  std::vector<std::string> segments;
  // Specs are an ordered map: order is preserved as written, names unique.
  std::vector<std::pair<std::string, std::string>> specs;

  // Throws Error(malformed_key) on empty segments, illegal characters,
  // malformed spec pairs, or fewer than 2 segments.
  static DataKey parse(std::string_view text);

  // Canonical string; parse(render()) == *this.
  std::string render() const;

  // Segments joined by '.', specs omitted. This is the unit pattern matching
  // and subscription indexing operate on.
  std::string segment_path() const;

  bool operator==(const DataKey&) const = default;
};

// Subscription pattern over key segments. `*` matches exactly one segment;
// a trailing `**` matches zero or more remaining segments. Specs never
// participate in matching (a pattern with specs parses but drops them).
struct KeyPattern {
  std::vector<std::string> segments;  // literals or "*"
  bool multi_tail = false;            // trailing "**"

  static KeyPattern parse(std::string_view text);

  std::string render() const;

  // True when the pattern contains no wildcards, i.e. it matches exactly the
  // key with identical segments.
  bool literal() const;

  bool matches(const DataKey& key) const { return matches_path(key.segments); }
  bool matches_path(std::span<const std::string> segs) const;

  bool operator==(const KeyPattern&) const = default;
};

bool valid_key_segment(std::string_view s);

// Reserved framework namespace (`sdnator.**`): applications may not declare
// capabilities or publish under it through the public API.
bool is_reserved_key_path(std::span<const std::string> segments);

}  // namespace sdnator

#endif  // SDNATOR_KEYS_HPP
