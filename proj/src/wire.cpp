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

#include "sdnator/wire.hpp"

namespace sdnator::wire {

namespace {

void put_uuid(ByteWriter& w, const Uuid& u) { w.raw(u.bytes.data(), u.bytes.size()); }

Uuid get_uuid(ByteReader& r) {
  Uuid u;
  r.raw(u.bytes.data(), u.bytes.size());
  return u;
}

}  // namespace

std::vector<std::uint8_t> encode_hello(const Hello& h) {
  ByteWriter w;
  w.u16(h.version);
  w.str(h.app_id);
  put_uuid(w, h.instance);
  w.u8(h.roles);
  return w.take();
}

Hello decode_hello(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  Hello h;
  h.version = r.u16();
  h.app_id = r.str();
  h.instance = get_uuid(r);
  h.roles = r.u8();
  return h;
}

std::vector<std::uint8_t> encode_hello_ack(const HelloAck& h) {
  ByteWriter w;
  w.u16(h.version);
  w.str(h.server_kind);
  return w.take();
}

HelloAck decode_hello_ack(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  HelloAck h;
  h.version = r.u16();
  h.server_kind = r.str();
  return h;
}

std::vector<std::uint8_t> encode_pub_batch(const std::vector<Envelope>& batch) {
  std::size_t bytes = 8;
  for (const auto& e : batch) bytes += e.key.size() + e.value.size() + 16;
  ByteWriter w(bytes);
  w.u32(static_cast<std::uint32_t>(batch.size()));
  for (const auto& e : batch) {
    w.str(e.key);
    w.blob(e.value);
    w.u64(e.seq);
  }
  return w.take();
}

std::vector<Envelope> decode_pub_batch(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  std::uint32_t n = r.u32();
  std::vector<Envelope> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Envelope e;
    e.key = r.str();
    e.value = r.blob();
    e.seq = r.u64();
    out.push_back(std::move(e));
  }
  if (!r.done()) throw Error(Errc::malformed_frame, "trailing bytes in PUB_BATCH");
  return out;
}

std::vector<std::uint8_t> encode_ack(const Ack& a) {
  ByteWriter w;
  w.u64(a.value);
  w.u32(a.count);
  return w.take();
}

Ack decode_ack(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  Ack a;
  a.value = r.u64();
  a.count = r.u32();
  return a;
}

std::vector<std::uint8_t> encode_sub(const std::string& pattern) {
  ByteWriter w;
  w.str(pattern);
  return w.take();
}

std::string decode_sub(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  return r.str();
}

std::vector<std::uint8_t> encode_sub_ack(std::uint64_t sub_id) { return encode_u64(sub_id); }
std::vector<std::uint8_t> encode_unsub(std::uint64_t sub_id) { return encode_u64(sub_id); }

std::vector<std::uint8_t> encode_u64(std::uint64_t v) {
  ByteWriter w;
  w.u64(v);
  return w.take();
}

std::uint64_t decode_u64(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  return r.u64();
}

std::vector<std::uint8_t> encode_deliver(const Deliver& d) {
  ByteWriter w(d.key.size() + d.value.size() + 64);
  w.u64(d.sub_id);
  w.str(d.key);
  w.str(d.producer_app);
  put_uuid(w, d.producer_instance);
  w.blob(d.value);
  w.u64(d.seq);
  return w.take();
}

Deliver decode_deliver(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  Deliver d;
  d.sub_id = r.u64();
  d.key = r.str();
  d.producer_app = r.str();
  d.producer_instance = get_uuid(r);
  d.value = r.blob();
  d.seq = r.u64();
  return d;
}

std::vector<std::uint8_t> encode_err(const ErrMsg& e) {
  ByteWriter w;
  w.u16(e.code);
  w.str(e.message);
  return w.take();
}

ErrMsg decode_err(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  ErrMsg e;
  e.code = r.u16();
  e.message = r.str();
  return e;
}

std::vector<std::uint8_t> encode_archive_batch(const std::vector<ArchiveEntry>& batch) {
  std::size_t bytes = 8;
  for (const auto& e : batch) bytes += e.key.size() + e.value.size() + 24;
  ByteWriter w(bytes);
  w.u32(static_cast<std::uint32_t>(batch.size()));
  for (const auto& e : batch) {
    w.str(e.key);
    w.blob(e.value);
    w.u64(e.seq);
    w.u64(e.timestamp_us);
  }
  return w.take();
}

std::vector<ArchiveEntry> decode_archive_batch(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  std::uint32_t n = r.u32();
  std::vector<ArchiveEntry> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ArchiveEntry e;
    e.key = r.str();
    e.value = r.blob();
    e.seq = r.u64();
    e.timestamp_us = r.u64();
    out.push_back(std::move(e));
  }
  if (!r.done()) throw Error(Errc::malformed_frame, "trailing bytes in ARCHIVE_BATCH");
  return out;
}

std::vector<std::uint8_t> encode_query(const Query& q) {
  ByteWriter w;
  w.str(q.pattern);
  w.u8(q.time_range ? 1 : 0);
  w.u64(q.time_range ? q.time_range->first : 0);
  w.u64(q.time_range ? q.time_range->second : 0);
  w.u8(q.producer_app ? 1 : 0);
  w.str(q.producer_app ? *q.producer_app : "");
  w.u8(q.limit ? 1 : 0);
  w.u32(q.limit ? *q.limit : 0);
  w.u8(q.descending ? 1 : 0);
  return w.take();
}

Query decode_query(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  Query q;
  q.pattern = r.str();
  bool has_range = r.u8() != 0;
  std::uint64_t lo = r.u64(), hi = r.u64();
  if (has_range) q.time_range = {lo, hi};
  bool has_producer = r.u8() != 0;
  std::string producer = r.str();
  if (has_producer) q.producer_app = producer;
  bool has_limit = r.u8() != 0;
  std::uint32_t limit = r.u32();
  if (has_limit) q.limit = limit;
  q.descending = r.u8() != 0;
  return q;
}

std::vector<std::uint8_t> encode_query_result(const QueryResult& res) {
  std::size_t bytes = 16;
  for (const auto& rec : res.records)
    bytes += rec.key.size() + rec.value.size() + rec.producer_app.size() + 40;
  ByteWriter w(bytes);
  w.u32(static_cast<std::uint32_t>(res.records.size()));
  for (const auto& rec : res.records) {
    w.str(rec.key);
    w.str(rec.producer_app);
    put_uuid(w, rec.producer_instance);
    w.blob(rec.value);
    w.u64(rec.timestamp_us);
  }
  w.u8(res.final_chunk ? 1 : 0);
  return w.take();
}

QueryResult decode_query_result(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  QueryResult res;
  std::uint32_t n = r.u32();
  res.records.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    StoredRecord rec;
    rec.key = r.str();
    rec.producer_app = r.str();
    rec.producer_instance = get_uuid(r);
    rec.value = r.blob();
    rec.timestamp_us = r.u64();
    res.records.push_back(std::move(rec));
  }
  res.final_chunk = r.u8() != 0;
  return res;
}

std::vector<std::uint8_t> encode_set_index(const SetIndex& s) {
  ByteWriter w;
  w.str(s.key);
  w.u8(s.enabled ? 1 : 0);
  return w.take();
}

SetIndex decode_set_index(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  SetIndex s;
  s.key = r.str();
  s.enabled = r.u8() != 0;
  return s;
}

}  // namespace sdnator::wire
