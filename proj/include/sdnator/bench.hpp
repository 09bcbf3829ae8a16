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

#ifndef SDNATOR_BENCH_HPP
#define SDNATOR_BENCH_HPP

#include <memory>
#include <string>
#include <vector>

#include "sdnator/bus.hpp"
#include "sdnator/coordinator.hpp"
#include "sdnator/store.hpp"

namespace sdnator::bench {

struct StackOptions {
  bool archive = false;
  std::string archive_dir;  // required when archive is on
  store::FsyncMode fsync = store::FsyncMode::per_batch;
  std::size_t bus_queue_depth = 65536;
  std::uint64_t heartbeat_interval_us = 1'000'000;
};

// In-process backend stack (bus + coordinator, optional archive) bound to
// ephemeral loopback ports. Used by benchmarks and tests.
class Stack {
 public:
  explicit Stack(const StackOptions& opts = {});
  ~Stack();

  const std::string& bus_addr() const { return bus_addr_; }
  const std::string& archive_addr() const { return archive_addr_; }
  bus::BusServer& bus() { return *bus_; }
  coord::Coordinator& coordinator() { return *coordinator_; }
  store::StoreServer* archive() { return store_.get(); }
  void stop();

 private:
  std::unique_ptr<bus::BusServer> bus_;
  std::unique_ptr<store::StoreServer> store_;
  std::unique_ptr<coord::Coordinator> coordinator_;
  std::string bus_addr_, archive_addr_;
};

struct BenchConfig {
  std::uint32_t msg_size = 1024;
  std::uint32_t updates_batch = 1;
  std::uint32_t archive_batch = 1;
  bool archive_on = false;
  std::uint32_t pairs = 1;
  double latency_ms = 0;
  double duration_s = 10;
  double warmup_s = 2;
  std::uint64_t seed = 1;
  // latency mode: messages are sent in bursts of exactly one batch
  double burst_interval_ms = 2.0;
};

struct Endpoints {
  std::string bus_addr;
  std::string archive_addr;  // required when archive_on
};

struct LatencyResult {
  double p50_us = 0, p95_us = 0, p99_us = 0;
  std::uint64_t samples = 0;
  std::uint64_t sent = 0, delivered = 0;
  bool zero_loss = false;
};

struct ThroughputResult {
  double msgs_per_s = 0;
  std::uint64_t sent = 0, delivered = 0, archived = 0;
  bool zero_loss = false;
};

struct PairResult {
  double msgs_per_s = 0;
  std::uint64_t sent = 0, delivered = 0;
};

struct ScaleResult {
  std::vector<PairResult> per_pair;
  double aggregate_msgs_per_s = 0;
  double cov = 0;  // coefficient of variation across pairs
  double single_pair_msgs_per_s = 0;
  bool zero_loss = false;
};

// End-to-end latency between one producer and one consumer, timestamped at
// send-enqueue and callback-delivery. The producer paces bursts of exactly
// one batch so queueing delay does not pollute the path measurement.
LatencyResult run_latency(const BenchConfig& cfg, const Endpoints& ep);

// Steady-state delivered message rate over duration - warmup, one producer
// flat out against one consumer.
ThroughputResult run_throughput(const BenchConfig& cfg, const Endpoints& ep);

// One producer/consumer pair in this process; used by scale workers.
PairResult run_pair(const BenchConfig& cfg, const Endpoints& ep, const std::string& pair_name);

// Spawns cfg.pairs worker processes (each one producer/consumer pair with
// injected latency), plus a single-pair baseline for the linear-extrapolation
// reference.
ScaleResult run_scale(const BenchConfig& cfg, const Endpoints& ep, const std::string& worker_exe);

// Path of the sdnator CLI next to the running binary (build tree layouts).
std::string default_worker_exe();

}  // namespace sdnator::bench

#endif  // SDNATOR_BENCH_HPP
