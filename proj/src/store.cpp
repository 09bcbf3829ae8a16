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

#include "sdnator/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sdnator/util.hpp"

namespace sdnator::store {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'A', 'R'};
constexpr std::uint16_t kSegmentVersion = 1;
constexpr std::size_t kHeaderSize = 6;
constexpr std::size_t kResultChunkBytes = 4 * 1024 * 1024;

std::vector<std::uint8_t> encode_disk_record(const wire::StoredRecord& r) {
  ByteWriter w(r.key.size() + r.producer_app.size() + r.value.size() + 40);
  w.str(r.key);
  w.str(r.producer_app);
  w.raw(r.producer_instance.bytes.data(), 16);
  w.u64(r.timestamp_us);
  w.blob(r.value);
  return w.take();
}

}  // namespace

StoreOptions StoreOptions::from_config(const Config& cfg) {
  StoreOptions o;
  o.dir = cfg.get_str("archive.dir");
  o.segment_bytes = static_cast<std::uint64_t>(cfg.get_int("archive.segment_mb", 64)) * 1024 * 1024;
  std::string fsync = cfg.get_str("archive.fsync", "batch");
  if (fsync == "batch") {
    o.fsync = FsyncMode::per_batch;
  } else if (fsync.rfind("interval:", 0) == 0) {
    o.fsync = FsyncMode::interval;
    o.fsync_interval_ms = std::strtoull(fsync.c_str() + 9, nullptr, 10);
    if (o.fsync_interval_ms == 0)
      throw Error(Errc::bad_config, "archive.fsync interval must be positive");
  } else {
    throw Error(Errc::bad_config, "archive.fsync must be batch or interval:<ms>");
  }
  return o;
}

StoreServerOptions StoreServerOptions::from_config(const Config& cfg) {
  StoreServerOptions o;
  o.net.listen = net::Addr::parse(cfg.get_str("archive.listen", "127.0.0.1:7071"));
  o.net.max_frame =
      static_cast<std::uint64_t>(cfg.get_int("archive.max_frame_mb", 16)) * 1024 * 1024;
  o.net.kind = "archive";
  o.store = StoreOptions::from_config(cfg);
  return o;
}

ArchiveStore::ArchiveStore(StoreOptions opts) : opts_(std::move(opts)) { open_dir(); }

ArchiveStore::~ArchiveStore() {
  sync_now();
  if (write_fd_ >= 0) ::close(write_fd_);
  std::lock_guard lk(fds_mu_);
  for (int fd : read_fds_)
    if (fd >= 0) ::close(fd);
}

std::string ArchiveStore::segment_path(std::uint32_t index) const {
  char name[32];
  std::snprintf(name, sizeof name, "%06u.sdar", index);
  return opts_.dir + "/" + name;
}

void ArchiveStore::open_dir() {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(opts_.dir, ec);
  if (ec) throw Error(Errc::transport, "cannot create archive dir " + opts_.dir);

  // Index config first so lists can be built during the scan.
  std::ifstream idx(opts_.dir + "/index.cfg");
  for (std::string line; std::getline(idx, line);)
    if (!line.empty()) index_enabled_.insert(line);

  std::vector<std::uint32_t> segments;
  for (const auto& entry : fs::directory_iterator(opts_.dir)) {
    auto name = entry.path().filename().string();
    if (name.size() == 11 && name.ends_with(".sdar"))
      segments.push_back(static_cast<std::uint32_t>(std::strtoul(name.c_str(), nullptr, 10)));
  }
  std::sort(segments.begin(), segments.end());
  for (auto s : segments) scan_segment(s, segment_path(s));

  active_segment_ = segments.empty() ? 0 : segments.back();
  std::string path = segment_path(active_segment_);
  write_fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT, 0644);
  if (write_fd_ < 0) throw Error(Errc::transport, "open " + path + ": " + std::strerror(errno));
  struct stat st {};
  ::fstat(write_fd_, &st);
  if (st.st_size == 0) {
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u16(kSegmentVersion);
    if (::write(write_fd_, w.data().data(), w.size()) != static_cast<ssize_t>(w.size()))
      throw Error(Errc::transport, "cannot write segment header");
    active_size_ = kHeaderSize;
  } else {
    active_size_ = static_cast<std::uint64_t>(st.st_size);
    ::lseek(write_fd_, 0, SEEK_END);
  }
  SDN_INFO("archive: opened %s with %llu records across %zu segments", opts_.dir.c_str(),
           static_cast<unsigned long long>(count_.load()), segments.size());
}

void ArchiveStore::scan_segment(std::uint32_t seg_index, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::transport, "cannot open segment " + path);
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t good = 0;
  if (data.size() >= kHeaderSize && std::memcmp(data.data(), kMagic, 4) == 0) {
    good = kHeaderSize;
    std::size_t pos = kHeaderSize;
    while (pos + 4 <= data.size()) {
      std::uint32_t len = 0;
      std::memcpy(&len, data.data() + pos, 4);
      if (len == 0 || pos + 4 + len > data.size()) break;  // truncated tail
      try {
        ByteReader r(std::span(reinterpret_cast<const std::uint8_t*>(data.data() + pos + 4), len));
        wire::StoredRecord rec;
        rec.key = r.str();
        rec.producer_app = r.str();
        r.raw(rec.producer_instance.bytes.data(), 16);
        rec.timestamp_us = r.u64();
        std::uint32_t vlen = r.u32();
        r.skip(vlen);
        if (!r.done()) break;
        DataKey key = DataKey::parse(rec.key);
        Meta m;
        m.key_id = intern_key(rec.key, key);
        m.producer_id = intern_producer(rec.producer_app, rec.producer_instance);
        m.ts = rec.timestamp_us;
        m.segment = seg_index;
        m.offset = static_cast<std::uint32_t>(pos + 4);
        m.length = len;
        push_meta(m);
      } catch (const std::exception&) {
        break;
      }
      pos += 4 + len;
      good = pos;
    }
  } else if (!data.empty()) {
    SDN_WARN("archive: segment %s has a bad header, ignoring contents", path.c_str());
  } else {
    good = 0;
  }
  if (good < data.size()) {
    SDN_WARN("archive: truncating %s at %zu (was %zu) after partial record", path.c_str(), good,
             data.size());
    if (::truncate(path.c_str(), static_cast<off_t>(good)) != 0)
      throw Error(Errc::transport, "cannot truncate corrupt segment " + path);
  }
}

std::uint32_t ArchiveStore::intern_key(const std::string& rendered, const DataKey& parsed) {
  {
    std::shared_lock lk(intern_mu_);
    if (auto it = key_ids_.find(rendered); it != key_ids_.end()) return it->second;
  }
  std::unique_lock lk(intern_mu_);
  if (auto it = key_ids_.find(rendered); it != key_ids_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(key_names_.size());
  key_names_.push_back(rendered);
  key_segments_.push_back(parsed.segments);
  key_ids_.emplace(rendered, id);
  return id;
}

std::uint32_t ArchiveStore::intern_producer(const std::string& app, const Uuid& instance) {
  std::string token = app + "\x01" + instance.to_string();
  {
    std::shared_lock lk(intern_mu_);
    if (auto it = producer_ids_.find(token); it != producer_ids_.end()) return it->second;
  }
  std::unique_lock lk(intern_mu_);
  if (auto it = producer_ids_.find(token); it != producer_ids_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(producers_.size());
  producers_.emplace_back(app, instance);
  producer_ids_.emplace(token, id);
  return id;
}

void ArchiveStore::push_meta(Meta m) {
  std::uint64_t n = count_.load(std::memory_order_relaxed);
  {
    std::lock_guard lk(chunks_mu_);
    if (n % kChunk == 0) chunks_.push_back(std::make_shared<MetaChunk>());
    (*chunks_[n / kChunk])[n % kChunk] = m;
  }
  {
    std::lock_guard lk(index_mu_);
    std::shared_lock ilk(intern_mu_);
    if (index_enabled_.count(key_names_[m.key_id])) {
      auto& list = index_[m.key_id];
      // Timestamps usually arrive nearly sorted; restore (ts, idx) order from
      // the back. chunks_ is only mutated on this (appending) thread.
      list.push_back(static_cast<std::uint32_t>(n));
      std::size_t i = list.size() - 1;
      while (i > 0) {
        const Meta& prev = meta_at(chunks_, list[i - 1]);
        const Meta& cur = meta_at(chunks_, list[i]);
        if (prev.ts <= cur.ts) break;
        std::swap(list[i - 1], list[i]);
        --i;
      }
    }
  }
  count_.store(n + 1, std::memory_order_release);
}

std::uint32_t ArchiveStore::append(std::span<const wire::StoredRecord> records) {
  if (records.empty()) return 0;
  ByteWriter batch;
  std::vector<std::uint32_t> lengths;
  lengths.reserve(records.size());
  for (const auto& r : records) {
    if (r.timestamp_us == 0) throw Error(Errc::malformed_frame, "record timestamp must be > 0");
    DataKey::parse(r.key);  // validates shape before anything hits disk
    auto payload = encode_disk_record(r);
    batch.u32(static_cast<std::uint32_t>(payload.size()));
    batch.raw(payload.data(), payload.size());
    lengths.push_back(static_cast<std::uint32_t>(payload.size()));
  }

  std::lock_guard lk(append_mu_);
  if (active_size_ + batch.size() > opts_.segment_bytes && active_size_ > kHeaderSize)
    roll_segment();

  const auto& buf = batch.data();
  std::size_t written = 0;
  while (written < buf.size()) {
    ssize_t w = ::write(write_fd_, buf.data() + written, buf.size() - written);
    if (w < 0) {
      if (errno == EINTR) continue;
      if (errno == ENOSPC) throw Error(Errc::storage_full, "archive device full");
      throw Error(Errc::transport, std::string("archive write: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(w);
  }
  if (opts_.fsync == FsyncMode::per_batch) {
    ::fdatasync(write_fd_);
  } else {
    std::uint64_t now = now_steady_us();
    if (now - last_sync_us_ >= opts_.fsync_interval_ms * 1000) {
      ::fdatasync(write_fd_);
      last_sync_us_ = now;
    }
  }

  // Records become queryable only after they are durable.
  std::uint64_t off = active_size_;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    Meta m;
    m.key_id = intern_key(r.key, DataKey::parse(r.key));
    m.producer_id = intern_producer(r.producer_app, r.producer_instance);
    m.ts = r.timestamp_us;
    m.segment = active_segment_;
    m.offset = static_cast<std::uint32_t>(off + 4);
    m.length = lengths[i];
    push_meta(m);
    off += 4 + lengths[i];
  }
  active_size_ = off;
  return static_cast<std::uint32_t>(records.size());
}

void ArchiveStore::roll_segment() {
  ::fdatasync(write_fd_);
  ::close(write_fd_);
  ++active_segment_;
  std::string path = segment_path(active_segment_);
  write_fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (write_fd_ < 0) throw Error(Errc::transport, "open " + path + ": " + std::strerror(errno));
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kSegmentVersion);
  if (::write(write_fd_, w.data().data(), w.size()) != static_cast<ssize_t>(w.size()))
    throw Error(Errc::transport, "cannot write segment header");
  active_size_ = kHeaderSize;
  SDN_INFO("archive: rolled to segment %u", active_segment_);
}

int ArchiveStore::read_fd(std::uint32_t segment) const {
  std::lock_guard lk(fds_mu_);
  if (read_fds_.size() <= segment) read_fds_.resize(segment + 1, -1);
  if (read_fds_[segment] < 0) {
    std::string path = segment_path(segment);
    read_fds_[segment] = ::open(path.c_str(), O_RDONLY);
    if (read_fds_[segment] < 0)
      throw Error(Errc::transport, "open " + path + ": " + std::strerror(errno));
  }
  return read_fds_[segment];
}

wire::StoredRecord ArchiveStore::read_record(const Meta& m) const {
  std::vector<std::uint8_t> buf(m.length);
  ssize_t r = ::pread(read_fd(m.segment), buf.data(), m.length, m.offset);
  if (r != static_cast<ssize_t>(m.length))
    throw Error(Errc::transport, "short read from archive segment");
  ByteReader reader(buf);
  wire::StoredRecord rec;
  rec.key = reader.str();
  rec.producer_app = reader.str();
  reader.raw(rec.producer_instance.bytes.data(), 16);
  rec.timestamp_us = reader.u64();
  rec.value = reader.blob();
  return rec;
}

std::vector<wire::StoredRecord> ArchiveStore::query(const wire::Query& q) const {
  KeyPattern pattern;
  try {
    pattern = KeyPattern::parse(q.pattern);
  } catch (const Error& e) {
    throw Error(Errc::malformed_query, e.what());
  }
  if (q.time_range && q.time_range->first >= q.time_range->second)
    throw Error(Errc::malformed_query, "time range requires t_lo < t_hi");
  std::uint64_t t_lo = q.time_range ? q.time_range->first : 0;
  std::uint64_t t_hi = q.time_range ? q.time_range->second : UINT64_MAX;

  const std::uint64_t n = count_.load(std::memory_order_acquire);
  std::vector<std::shared_ptr<MetaChunk>> chunks;
  {
    std::lock_guard lk(chunks_mu_);
    chunks = chunks_;
  }

  // Resolve the pattern against the intern table once per distinct key.
  std::vector<char> key_match;
  std::uint32_t known_keys = 0;
  {
    std::shared_lock lk(intern_mu_);
    known_keys = static_cast<std::uint32_t>(key_segments_.size());
    key_match.resize(known_keys);
    for (std::uint32_t i = 0; i < known_keys; ++i)
      key_match[i] = pattern.matches_path(key_segments_[i]) ? 1 : 0;
  }

  auto producer_ok = [&](std::uint32_t pid) {
    if (!q.producer_app) return true;
    std::shared_lock lk(intern_mu_);
    return producers_[pid].first == *q.producer_app;
  };

  std::vector<std::uint32_t> hits;
  bool used_index = false;
  if (pattern.literal()) {
    std::lock_guard lk(index_mu_);
    // Fresh chunk snapshot under the index lock: every idx in the list has a
    // fully written Meta whose chunk predates this copy.
    {
      std::lock_guard clk(chunks_mu_);
      chunks = chunks_;
    }
    std::shared_lock ilk(intern_mu_);
    auto kit = key_ids_.find(pattern.render());
    if (kit != key_ids_.end() && index_enabled_.count(pattern.render())) {
      auto iit = index_.find(kit->second);
      if (iit != index_.end()) {
        used_index = true;
        // List is (ts, idx)-ascending; binary search the time range.
        const auto& list = iit->second;
        auto lo = std::lower_bound(list.begin(), list.end(), t_lo,
                                   [&](std::uint32_t idx, std::uint64_t t) {
                                     return meta_at(chunks, idx).ts < t;
                                   });
        for (auto it = lo; it != list.end(); ++it) {
          const Meta& m = meta_at(chunks, *it);
          if (m.ts >= t_hi) break;
          hits.push_back(*it);
        }
      }
    }
  }
  if (!used_index) {
    for (std::uint64_t i = 0; i < n; ++i) {
      const Meta& m = meta_at(chunks, i);
      if (m.key_id >= known_keys || !key_match[m.key_id]) continue;
      if (m.ts < t_lo || m.ts >= t_hi) continue;
      hits.push_back(static_cast<std::uint32_t>(i));
    }
    // Scan order is append order; make it (ts, idx) ascending.
    std::stable_sort(hits.begin(), hits.end(), [&](std::uint32_t a, std::uint32_t b) {
      return meta_at(chunks, a).ts < meta_at(chunks, b).ts;
    });
  }

  if (q.producer_app)
    std::erase_if(hits, [&](std::uint32_t i) { return !producer_ok(meta_at(chunks, i).producer_id); });
  if (q.descending) std::reverse(hits.begin(), hits.end());
  if (q.limit && hits.size() > *q.limit) hits.resize(*q.limit);

  std::vector<wire::StoredRecord> out;
  out.reserve(hits.size());
  for (auto i : hits) out.push_back(read_record(meta_at(chunks, i)));
  return out;
}

void ArchiveStore::set_index(const std::string& literal_key, bool enabled) {
  KeyPattern pattern = KeyPattern::parse(literal_key);
  if (!pattern.literal())
    throw Error(Errc::not_a_literal_key, "indexes require a literal key, got " + literal_key);
  std::string rendered = pattern.render();
  // Hold the append path still while (re)building so the list is complete.
  std::lock_guard alk(append_mu_);
  std::lock_guard lk(index_mu_);
  if (!enabled) {
    index_enabled_.erase(rendered);
    std::shared_lock ilk(intern_mu_);
    if (auto it = key_ids_.find(rendered); it != key_ids_.end()) index_.erase(it->second);
  } else if (index_enabled_.insert(rendered).second) {
    std::shared_lock ilk(intern_mu_);
    if (auto it = key_ids_.find(rendered); it != key_ids_.end()) {
      std::uint64_t n = count_.load(std::memory_order_acquire);
      std::vector<std::shared_ptr<MetaChunk>> chunks;
      {
        std::lock_guard clk(chunks_mu_);
        chunks = chunks_;
      }
      auto& list = index_[it->second];
      list.clear();
      for (std::uint64_t i = 0; i < n; ++i)
        if (meta_at(chunks, i).key_id == it->second) list.push_back(static_cast<std::uint32_t>(i));
      std::stable_sort(list.begin(), list.end(), [&](std::uint32_t a, std::uint32_t b) {
        return meta_at(chunks, a).ts < meta_at(chunks, b).ts;
      });
    }
  }
  persist_index_config();
}

std::vector<std::string> ArchiveStore::indexed_keys() const {
  std::lock_guard lk(index_mu_);
  return {index_enabled_.begin(), index_enabled_.end()};
}

void ArchiveStore::persist_index_config() const {
  std::string tmp = opts_.dir + "/index.cfg.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& k : index_enabled_) out << k << "\n";
  }
  std::rename(tmp.c_str(), (opts_.dir + "/index.cfg").c_str());
}

void ArchiveStore::sync_now() {
  std::lock_guard lk(append_mu_);
  if (write_fd_ >= 0) ::fdatasync(write_fd_);
}

net::Addr StoreServer::start(const StoreServerOptions& opts) {
  engine_ = std::make_unique<ArchiveStore>(opts.store);
  return net::FrameServer::start(opts.net);
}

void StoreServer::stop() {
  net::FrameServer::stop();
  engine_.reset();
}

void StoreServer::on_hello(const ConnPtr& c) {
  send_control(c, wire::FrameType::hello_ack,
               wire::encode_hello_ack({wire::kProtocolVersion, "archive"}));
}

void StoreServer::on_frame(const ConnPtr& c, wire::Frame&& f) {
  switch (f.type) {
    case wire::FrameType::archive_batch:
      handle_append(c, f.payload);
      break;
    case wire::FrameType::query:
      handle_query(c, f.payload);
      break;
    case wire::FrameType::set_index:
      handle_set_index(c, f.payload);
      break;
    default:
      send_err_and_close(c, Errc::malformed_frame, "unexpected frame type on archive connection");
  }
}

void StoreServer::handle_append(const ConnPtr& c, std::span<const std::uint8_t> payload) {
  auto entries = wire::decode_archive_batch(payload);
  if (entries.empty()) {
    send_err_and_close(c, Errc::malformed_frame, "empty ARCHIVE_BATCH");
    return;
  }
  std::vector<wire::StoredRecord> records;
  records.reserve(entries.size());
  std::uint64_t last_seq = 0;
  for (auto& e : entries) {
    wire::StoredRecord r;
    r.key = std::move(e.key);
    r.value = std::move(e.value);
    r.timestamp_us = e.timestamp_us;
    r.producer_app = c->hello.app_id;
    r.producer_instance = c->hello.instance;
    records.push_back(std::move(r));
    last_seq = e.seq;
  }
  try {
    std::uint32_t n = engine_->append(records);
    send_control(c, wire::FrameType::ack, wire::encode_ack({last_seq, n}));
  } catch (const Error& e) {
    send_control(c, wire::FrameType::err,
                 wire::encode_err({static_cast<std::uint16_t>(e.code()), e.what()}));
  }
}

void StoreServer::handle_query(const ConnPtr& c, std::span<const std::uint8_t> payload) {
  try {
    auto q = wire::decode_query(payload);
    auto records = engine_->query(q);
    // Stream in chunks so big result sets stay under the frame cap.
    std::size_t i = 0;
    do {
      wire::QueryResult chunk;
      std::size_t bytes = 0;
      while (i < records.size() && bytes < kResultChunkBytes) {
        bytes += records[i].key.size() + records[i].value.size() + 64;
        chunk.records.push_back(std::move(records[i]));
        ++i;
      }
      chunk.final_chunk = (i == records.size());
      send_control(c, wire::FrameType::query_result, wire::encode_query_result(chunk));
    } while (i < records.size());
  } catch (const Error& e) {
    send_control(c, wire::FrameType::err,
                 wire::encode_err({static_cast<std::uint16_t>(e.code()), e.what()}));
  }
}

void StoreServer::handle_set_index(const ConnPtr& c, std::span<const std::uint8_t> payload) {
  try {
    auto s = wire::decode_set_index(payload);
    engine_->set_index(s.key, s.enabled);
    send_control(c, wire::FrameType::ack, wire::encode_ack({0, 1}));
  } catch (const Error& e) {
    send_control(c, wire::FrameType::err,
                 wire::encode_err({static_cast<std::uint16_t>(e.code()), e.what()}));
  }
}

}  // namespace sdnator::store
