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

#ifndef SDNATOR_STORE_HPP
#define SDNATOR_STORE_HPP

#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sdnator/config.hpp"
#include "sdnator/keys.hpp"
#include "sdnator/net.hpp"

namespace sdnator::store {

enum class FsyncMode { per_batch, interval };

struct StoreOptions {
  std::string dir;
  std::uint64_t segment_bytes = 64ull * 1024 * 1024;
  FsyncMode fsync = FsyncMode::per_batch;
  std::uint64_t fsync_interval_ms = 100;

  static StoreOptions from_config(const Config& cfg);
};

// Data Archives storage engine: append-only log segments of length-prefixed
// records plus an in-memory record directory rebuilt by segment scan on
// startup. Records are never deleted. Appends are serialized onto the active
// segment; queries run concurrently and see every record acked before they
// started. A batch is durable (per the fsync policy) before append() returns.
class ArchiveStore {
 public:
  explicit ArchiveStore(StoreOptions opts);
  ~ArchiveStore();
  ArchiveStore(const ArchiveStore&) = delete;

  // Validates timestamps (> 0) and key shape; throws Error(storage_full) when
  // the filesystem rejects the write.
  std::uint32_t append(std::span<const wire::StoredRecord> records);

  // Exactly the stored records matching all present filters, sorted by
  // timestamp per the query order; timestamp ties break by append order
  // (descending order is the exact reverse of ascending). Enabled indexes
  // change the lookup path, never the results.
  std::vector<wire::StoredRecord> query(const wire::Query& q) const;

  void set_index(const std::string& literal_key, bool enabled);
  std::vector<std::string> indexed_keys() const;

  std::uint64_t record_count() const { return count_.load(std::memory_order_acquire); }
  void sync_now();

 private:
  struct Meta {
    std::uint32_t key_id;
    std::uint32_t producer_id;
    std::uint64_t ts;
    std::uint32_t segment;
    std::uint32_t offset;  // of the record payload, after the length prefix
    std::uint32_t length;
  };
  static constexpr std::size_t kChunk = 16384;
  using MetaChunk = std::array<Meta, kChunk>;

  void open_dir();
  void scan_segment(std::uint32_t seg_index, const std::string& path);
  void roll_segment();
  std::uint32_t intern_key(const std::string& rendered, const DataKey& parsed);
  std::uint32_t intern_producer(const std::string& app, const Uuid& instance);
  const Meta& meta_at(const std::vector<std::shared_ptr<MetaChunk>>& chunks, std::size_t i) const {
    return (*chunks[i / kChunk])[i % kChunk];
  }
  void push_meta(Meta m);
  wire::StoredRecord read_record(const Meta& m) const;
  int read_fd(std::uint32_t segment) const;
  void persist_index_config() const;
  std::string segment_path(std::uint32_t index) const;

  StoreOptions opts_;

  mutable std::mutex append_mu_;  // serializes writers onto the active segment
  int write_fd_ = -1;
  std::uint32_t active_segment_ = 0;
  std::uint64_t active_size_ = 0;
  std::uint64_t last_sync_us_ = 0;

  std::atomic<std::uint64_t> count_{0};
  mutable std::mutex chunks_mu_;
  std::vector<std::shared_ptr<MetaChunk>> chunks_;

  mutable std::shared_mutex intern_mu_;
  std::vector<std::string> key_names_;
  std::vector<std::vector<std::string>> key_segments_;
  std::unordered_map<std::string, std::uint32_t> key_ids_;
  std::vector<std::pair<std::string, Uuid>> producers_;
  std::unordered_map<std::string, std::uint32_t> producer_ids_;

  mutable std::mutex index_mu_;
  std::unordered_set<std::string> index_enabled_;                    // by rendered key
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> index_;  // key_id -> meta idx, (ts, idx) asc

  mutable std::mutex fds_mu_;
  mutable std::vector<int> read_fds_;
};

struct StoreServerOptions {
  net::ServerOptions net;
  StoreOptions store;

  static StoreServerOptions from_config(const Config& cfg);
};

class StoreServer : public net::FrameServer {
 public:
  net::Addr start(const StoreServerOptions& opts);
  void stop();

  ArchiveStore* engine() { return engine_.get(); }

 protected:
  void on_hello(const ConnPtr& c) override;
  void on_frame(const ConnPtr& c, wire::Frame&& f) override;
  void on_disconnect(const ConnPtr&) override {}

 private:
  void handle_append(const ConnPtr& c, std::span<const std::uint8_t> payload);
  void handle_query(const ConnPtr& c, std::span<const std::uint8_t> payload);
  void handle_set_index(const ConnPtr& c, std::span<const std::uint8_t> payload);

  std::unique_ptr<ArchiveStore> engine_;
};

}  // namespace sdnator::store

#endif  // SDNATOR_STORE_HPP
