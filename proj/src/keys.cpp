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

#include "sdnator/keys.hpp"

#include <algorithm>

namespace sdnator {

namespace {

[[noreturn]] void malformed(std::string_view text, const char* why) {
  throw Error(Errc::malformed_key, std::string(why) + " in \"" + std::string(text) + "\"");
}

bool valid_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

}  // namespace

bool valid_key_segment(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), valid_char);
}

bool is_reserved_key_path(std::span<const std::string> segments) {
  return !segments.empty() && segments.front() == "sdnator";
}

DataKey DataKey::parse(std::string_view text) {
  if (text.empty()) malformed(text, "empty key");
  DataKey key;
  std::string_view path = text;
  std::string_view spec_part;
  if (auto colon = text.find(':'); colon != std::string_view::npos) {
    path = text.substr(0, colon);
    spec_part = text.substr(colon + 1);
    if (spec_part.empty()) malformed(text, "empty specification list");
  }
  for (auto seg : split(path, '.')) {
    if (seg.empty()) malformed(text, "empty segment");
    if (!valid_key_segment(seg)) malformed(text, "illegal character in segment");
    key.segments.emplace_back(seg);
  }
  if (key.segments.size() < 2) malformed(text, "fewer than 2 segments");
  if (!spec_part.empty()) {
    for (auto pair : split(spec_part, ',')) {
      auto eq = pair.find('=');
      if (eq == std::string_view::npos) malformed(text, "spec pair missing '='");
      auto name = pair.substr(0, eq);
      auto value = pair.substr(eq + 1);
      if (!valid_key_segment(name) || !valid_key_segment(value))
        malformed(text, "malformed spec pair");
      for (const auto& [n, v] : key.specs)
        if (n == name) malformed(text, "duplicate spec name");
      key.specs.emplace_back(std::string(name), std::string(value));
    }
  }
  return key;
}

std::string DataKey::render() const {
  std::string out = segment_path();
  if (!specs.empty()) {
    out += ':';
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (i) out += ',';
      out += specs[i].first;
      out += '=';
      out += specs[i].second;
    }
  }
  return out;
}

std::string DataKey::segment_path() const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += '.';
    out += segments[i];
  }
  return out;
}

KeyPattern KeyPattern::parse(std::string_view text) {
  if (text.empty()) malformed(text, "empty pattern");
  std::string_view path = text;
  if (auto colon = text.find(':'); colon != std::string_view::npos)
    path = text.substr(0, colon);  // specs are ignored for matching
  KeyPattern pat;
  auto segs = split(path, '.');
  for (std::size_t i = 0; i < segs.size(); ++i) {
    auto seg = segs[i];
    if (seg == "**") {
      if (i + 1 != segs.size()) malformed(text, "'**' only allowed as final element");
      pat.multi_tail = true;
      break;
    }
    if (seg == "*") {
      pat.segments.emplace_back("*");
      continue;
    }
    if (seg.empty()) malformed(text, "empty segment");
    if (!valid_key_segment(seg)) malformed(text, "illegal character in segment");
    pat.segments.emplace_back(seg);
  }
  if (pat.segments.empty() && !pat.multi_tail) malformed(text, "empty pattern");
  return pat;
}

std::string KeyPattern::render() const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += '.';
    out += segments[i];
  }
  if (multi_tail) {
    if (!segments.empty()) out += '.';
    out += "**";
  }
  return out;
}

bool KeyPattern::literal() const {
  if (multi_tail) return false;
  return std::none_of(segments.begin(), segments.end(),
                      [](const std::string& s) { return s == "*"; });
}

bool KeyPattern::matches_path(std::span<const std::string> segs) const {
  if (multi_tail) {
    if (segs.size() < segments.size()) return false;
  } else {
    if (segs.size() != segments.size()) return false;
  }
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i] != "*" && segments[i] != segs[i]) return false;
  return true;
}

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ok: return "ok";
    case Errc::malformed_frame: return "MalformedFrame";
    case Errc::frame_too_large: return "FrameTooLarge";
    case Errc::sequence_gap: return "SequenceGap";
    case Errc::backpressure: return "Backpressure";
    case Errc::too_many_subscriptions: return "TooManySubscriptions";
    case Errc::unknown_subscription: return "UnknownSubscription";
    case Errc::malformed_query: return "MalformedQuery";
    case Errc::not_a_literal_key: return "NotALiteralKey";
    case Errc::storage_full: return "StorageFull";
    case Errc::bad_hello: return "BadHello";
    case Errc::reserved_namespace: return "ReservedNamespace";
    case Errc::duplicate_instance: return "DuplicateInstanceId";
    case Errc::unknown_app: return "UnknownApp";
    case Errc::malformed_key: return "MalformedKey";
    case Errc::handshake_timeout: return "HandshakeTimeout";
    case Errc::not_a_producer: return "NotAProducer";
    case Errc::not_a_consumer: return "NotAConsumer";
    case Errc::unknown_capability_key: return "UnknownCapabilityKey";
    case Errc::bad_config: return "BadConfig";
    case Errc::transport: return "Transport";
    case Errc::port_in_use: return "PortInUse";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::archive_unavailable: return "ArchiveUnavailable";
    case Errc::internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace sdnator
