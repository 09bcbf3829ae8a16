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

#ifndef SDNATOR_WIRE_HPP
#define SDNATOR_WIRE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdnator/bytes.hpp"
#include "sdnator/util.hpp"

namespace sdnator::wire {

// Framing shared by Data Updates, Data Archives and coordinator traffic:
//
//   u32 length (little-endian, excludes the length field itself)
//   u8  frame type
//   payload (length - 1 bytes)
//
// Strings are u16-length-prefixed UTF-8; values are u32-length-prefixed
// opaque bytes; UUIDs are 16 raw bytes.
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::uint64_t kDefaultMaxFrame = 16ull * 1024 * 1024;

enum class FrameType : std::uint8_t {
  hello = 1,
  hello_ack = 2,
  pub_batch = 3,
  ack = 4,
  sub = 5,
  sub_ack = 6,
  unsub = 7,
  deliver = 8,
  err = 9,
  ping = 10,
  pong = 11,
  archive_batch = 12,
  query = 13,
  query_result = 14,
  set_index = 15,
};

struct Frame {
  FrameType type{};
  std::vector<std::uint8_t> payload;
};

enum Role : std::uint8_t {
  kRoleProducer = 0x1,
  kRoleConsumer = 0x2,
};

struct Hello {
  std::uint16_t version = kProtocolVersion;
  std::string app_id;
  Uuid instance;
  std::uint8_t roles = kRoleProducer | kRoleConsumer;
};

struct HelloAck {
  std::uint16_t version = kProtocolVersion;
  std::string server_kind;  // "bus" | "archive"
};

// Publication unit. Producer identity travels in HELLO, not per envelope;
// the server stamps deliveries from the connection's identity.
struct Envelope {
  std::string key;  // canonical rendered DataKey
  std::vector<std::uint8_t> value;
  std::uint64_t seq = 0;  // per-connection, strictly increasing, contiguous
};

struct Ack {
  std::uint64_t value = 0;  // last seq for batches, sub id for unsubscribes
  std::uint32_t count = 0;
};

struct Deliver {
  std::uint64_t sub_id = 0;
  std::string key;
  std::string producer_app;
  Uuid producer_instance;
  std::vector<std::uint8_t> value;
  std::uint64_t seq = 0;
};

struct ErrMsg {
  std::uint16_t code = 0;
  std::string message;
};

// Archive record on the wire: the publish envelope plus the client-assigned
// timestamp (microseconds since the Unix epoch).
struct ArchiveEntry {
  std::string key;
  std::vector<std::uint8_t> value;
  std::uint64_t seq = 0;
  std::uint64_t timestamp_us = 0;
};

struct Query {
  std::string pattern;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> time_range;  // [lo, hi)
  std::optional<std::string> producer_app;
  std::optional<std::uint32_t> limit;
  bool descending = false;
};

// Fully attributed record as stored and returned by queries.
struct StoredRecord {
  std::string key;
  std::vector<std::uint8_t> value;
  std::uint64_t timestamp_us = 0;
  std::string producer_app;
  Uuid producer_instance;

  bool operator==(const StoredRecord&) const = default;
};

struct QueryResult {
  std::vector<StoredRecord> records;
  bool final_chunk = true;
};

struct SetIndex {
  std::string key;
  bool enabled = true;
};

// --- encoding ---------------------------------------------------------------

std::vector<std::uint8_t> encode_hello(const Hello& h);
std::vector<std::uint8_t> encode_hello_ack(const HelloAck& h);
std::vector<std::uint8_t> encode_pub_batch(const std::vector<Envelope>& batch);
std::vector<std::uint8_t> encode_ack(const Ack& a);
std::vector<std::uint8_t> encode_sub(const std::string& pattern);
std::vector<std::uint8_t> encode_sub_ack(std::uint64_t sub_id);
std::vector<std::uint8_t> encode_unsub(std::uint64_t sub_id);
std::vector<std::uint8_t> encode_deliver(const Deliver& d);
std::vector<std::uint8_t> encode_err(const ErrMsg& e);
std::vector<std::uint8_t> encode_u64(std::uint64_t v);  // ping/pong nonce
std::vector<std::uint8_t> encode_archive_batch(const std::vector<ArchiveEntry>& batch);
std::vector<std::uint8_t> encode_query(const Query& q);
std::vector<std::uint8_t> encode_query_result(const QueryResult& r);
std::vector<std::uint8_t> encode_set_index(const SetIndex& s);

// --- decoding (throws Error(malformed_frame) on truncation/garbage) ---------

Hello decode_hello(std::span<const std::uint8_t> p);
HelloAck decode_hello_ack(std::span<const std::uint8_t> p);
std::vector<Envelope> decode_pub_batch(std::span<const std::uint8_t> p);
Ack decode_ack(std::span<const std::uint8_t> p);
std::string decode_sub(std::span<const std::uint8_t> p);
std::uint64_t decode_u64(std::span<const std::uint8_t> p);
Deliver decode_deliver(std::span<const std::uint8_t> p);
ErrMsg decode_err(std::span<const std::uint8_t> p);
std::vector<ArchiveEntry> decode_archive_batch(std::span<const std::uint8_t> p);
Query decode_query(std::span<const std::uint8_t> p);
QueryResult decode_query_result(std::span<const std::uint8_t> p);
SetIndex decode_set_index(std::span<const std::uint8_t> p);

}  // namespace sdnator::wire

#endif  // SDNATOR_WIRE_HPP
