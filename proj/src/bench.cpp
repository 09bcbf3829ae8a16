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

#include "sdnator/bench.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sdnator/due.hpp"

namespace sdnator::bench {

namespace {

// Cheap per-message payload randomization (contents must differ message to
// message to rule out caching effects, not be cryptographic).
struct XorShift {
  std::uint64_t s;
  std::uint64_t next() {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return s;
  }
  void fill(std::vector<std::uint8_t>& buf) {
    std::size_t i = 0;
    for (; i + 8 <= buf.size(); i += 8) {
      std::uint64_t v = next();
      std::memcpy(buf.data() + i, &v, 8);
    }
    if (i < buf.size()) {
      std::uint64_t v = next();
      std::memcpy(buf.data() + i, &v, buf.size() - i);
    }
  }
};

due::DueConfig consumer_config(const BenchConfig& cfg, const Endpoints& ep) {
  due::DueConfig c;
  c.bus_addr = ep.bus_addr;
  c.inject_latency_us = static_cast<std::uint64_t>(cfg.latency_ms * 1000);
  c.observer_queue_depth = 1 << 17;
  return c;
}

due::DueConfig producer_config(const BenchConfig& cfg, const Endpoints& ep) {
  due::DueConfig c;
  c.bus_addr = ep.bus_addr;
  if (cfg.archive_on) c.archive_addr = ep.archive_addr;
  c.updates_batch = cfg.updates_batch;
  c.archive_batch = cfg.archive_batch;
  c.inject_latency_us = static_cast<std::uint64_t>(cfg.latency_ms * 1000);
  return c;
}

struct PairHarness {
  std::unique_ptr<due::Session> consumer;
  std::unique_ptr<due::Session> producer;
  std::shared_ptr<due::Observer> observer;
  DataKey key;

  PairHarness(const BenchConfig& cfg, const Endpoints& ep, const std::string& name,
              due::Observer::Callback on_msg) {
    key = DataKey::parse("bench." + name + ".data");
    AppIdentity cons_id;
    cons_id.app_id = "bench-sub-" + name;
    cons_id.roles = wire::kRoleConsumer;
    Manifest cons_mf;
    cons_mf.interests.push_back({KeyPattern::parse(key.render()), std::nullopt});
    consumer = due::Session::init(cons_id, cons_mf, consumer_config(cfg, ep));
    observer = consumer->observe(key.render());
    observer->add_callback(std::move(on_msg));

    // Consumer registers first so the producer's registration reply already
    // carries the assignment.
    AppIdentity prod_id;
    prod_id.app_id = "bench-pub-" + name;
    prod_id.roles = wire::kRoleProducer;
    Manifest prod_mf;
    prod_mf.capabilities.push_back({key, std::nullopt, false});
    producer = due::Session::init(prod_id, prod_mf, producer_config(cfg, ep));
    if (!producer->has_assignment(key))
      throw Error(Errc::internal, "benchmark producer got no assignment");
  }

  void close() {
    if (producer) producer->close();
    observer.reset();
    if (consumer) consumer->close();
  }
};

}  // namespace

Stack::Stack(const StackOptions& opts) {
  bus_ = std::make_unique<bus::BusServer>();
  bus::BusOptions bopts;
  bopts.net.listen = net::Addr::parse("127.0.0.1:0");
  bopts.net.subscriber_queue_depth = opts.bus_queue_depth;
  bus_addr_ = bus_->start(bopts).to_string();

  if (opts.archive) {
    if (opts.archive_dir.empty()) throw Error(Errc::bad_config, "archive requires archive_dir");
    store_ = std::make_unique<store::StoreServer>();
    store::StoreServerOptions sopts;
    sopts.net.listen = net::Addr::parse("127.0.0.1:0");
    sopts.net.kind = "archive";
    sopts.store.dir = opts.archive_dir;
    sopts.store.fsync = opts.fsync;
    archive_addr_ = store_->start(sopts).to_string();
  }

  coord::CoordinatorOptions copts;
  copts.due.bus_addr = bus_addr_;
  copts.due.archive_addr = archive_addr_;
  copts.due.heartbeat_interval_us = opts.heartbeat_interval_us;
  copts.recover = false;
  coordinator_ = coord::Coordinator::start(copts);
}

Stack::~Stack() { stop(); }

void Stack::stop() {
  if (coordinator_) coordinator_->stop();
  coordinator_.reset();
  if (store_) store_->stop();
  store_.reset();
  if (bus_) bus_->stop();
  bus_.reset();
}

ThroughputResult run_throughput(const BenchConfig& cfg, const Endpoints& ep) {
  ThroughputResult res;
  if (cfg.duration_s <= 0) return res;
  std::atomic<std::uint64_t> delivered{0};
  PairHarness pair(cfg, ep, "tput",
                   [&](const wire::Deliver&) { delivered.fetch_add(1, std::memory_order_relaxed); });

  std::vector<std::uint8_t> payload(cfg.msg_size);
  XorShift rng{cfg.seed | 1};
  std::uint64_t t0 = now_steady_us();
  std::uint64_t t_warm = t0 + static_cast<std::uint64_t>(cfg.warmup_s * 1e6);
  std::uint64_t t_end = t0 + static_cast<std::uint64_t>(cfg.duration_s * 1e6);

  std::atomic<std::uint64_t> warm_count{0}, end_count{0};
  std::thread sampler([&] {
    std::uint64_t now = now_steady_us();
    if (t_warm > now) sleep_us(t_warm - now);
    warm_count.store(delivered.load());
    now = now_steady_us();
    if (t_end > now) sleep_us(t_end - now);
    end_count.store(delivered.load());
  });

  std::uint64_t sent = 0;
  while (now_steady_us() < t_end) {
    rng.fill(payload);
    auto r = pair.producer->write(pair.key, payload);
    if (r == due::WriteResult::accepted) ++sent;
  }
  pair.producer->flush();
  sampler.join();

  // With the buffers acked, anything still missing is in flight downstream.
  std::uint64_t deadline = now_steady_us() + 60'000'000;
  while (delivered.load() < sent && now_steady_us() < deadline) sleep_us(5'000);

  res.sent = sent;
  res.delivered = delivered.load();
  res.archived = pair.producer->stats().archive_acked.load();
  double window_s = cfg.duration_s - cfg.warmup_s;
  res.msgs_per_s =
      window_s > 0 ? static_cast<double>(end_count.load() - warm_count.load()) / window_s : 0;
  res.zero_loss = res.delivered == res.sent && (!cfg.archive_on || res.archived == res.sent);
  pair.close();
  return res;
}

LatencyResult run_latency(const BenchConfig& cfg, const Endpoints& ep) {
  LatencyResult res;
  if (cfg.duration_s <= 0) return res;
  const std::uint64_t burst = cfg.updates_batch;
  const std::uint64_t interval_us =
      std::max<std::uint64_t>(static_cast<std::uint64_t>(cfg.burst_interval_ms * 1000), 200);
  const std::uint64_t bursts = static_cast<std::uint64_t>(cfg.duration_s * 1e6) / interval_us;
  const std::uint64_t total = bursts * burst;

  std::vector<std::uint64_t> enqueue_us(total, 0);
  std::vector<std::uint32_t> latencies;
  latencies.reserve(total);
  std::mutex lat_mu;
  std::uint64_t warm_threshold = UINT64_MAX;
  std::atomic<std::uint64_t> delivered{0};

  PairHarness pair(cfg, ep, "lat", [&](const wire::Deliver& d) {
    std::uint64_t now = now_steady_us();
    delivered.fetch_add(1, std::memory_order_relaxed);
    if (d.value.size() < 8) return;
    std::uint64_t idx;
    std::memcpy(&idx, d.value.data(), 8);
    if (idx >= enqueue_us.size()) return;
    std::uint64_t enq = enqueue_us[idx];
    if (enq == 0 || enq < warm_threshold) return;
    std::lock_guard lk(lat_mu);
    latencies.push_back(static_cast<std::uint32_t>(now - enq));
  });

  std::vector<std::uint8_t> payload(std::max<std::uint32_t>(cfg.msg_size, 8));
  XorShift rng{cfg.seed | 1};
  std::uint64_t t0 = now_steady_us();
  warm_threshold = t0 + static_cast<std::uint64_t>(cfg.warmup_s * 1e6);

  std::uint64_t idx = 0;
  for (std::uint64_t b = 0; b < bursts; ++b) {
    std::uint64_t due_at = t0 + b * interval_us;
    std::uint64_t now = now_steady_us();
    if (due_at > now) sleep_us(due_at - now);
    for (std::uint64_t i = 0; i < burst; ++i, ++idx) {
      rng.fill(payload);
      std::memcpy(payload.data(), &idx, 8);
      enqueue_us[idx] = now_steady_us();
      pair.producer->write(pair.key, payload);
    }
  }
  pair.producer->flush();
  std::uint64_t deadline = now_steady_us() + 30'000'000;
  while (delivered.load() < total && now_steady_us() < deadline) sleep_us(2'000);

  res.sent = idx;
  res.delivered = delivered.load();
  res.zero_loss = res.delivered == res.sent;
  std::lock_guard lk(lat_mu);
  res.samples = latencies.size();
  if (!latencies.empty()) {
    std::sort(latencies.begin(), latencies.end());
    auto pct = [&](double p) {
      std::size_t i = static_cast<std::size_t>(p * static_cast<double>(latencies.size() - 1));
      return static_cast<double>(latencies[i]);
    };
    res.p50_us = pct(0.50);
    res.p95_us = pct(0.95);
    res.p99_us = pct(0.99);
  }
  pair.close();
  return res;
}

PairResult run_pair(const BenchConfig& cfg, const Endpoints& ep, const std::string& pair_name) {
  PairResult res;
  std::atomic<std::uint64_t> delivered{0};
  PairHarness pair(cfg, ep, pair_name,
                   [&](const wire::Deliver&) { delivered.fetch_add(1, std::memory_order_relaxed); });

  std::vector<std::uint8_t> payload(cfg.msg_size);
  XorShift rng{cfg.seed | 1};
  std::uint64_t t0 = now_steady_us();
  std::uint64_t t_warm = t0 + static_cast<std::uint64_t>(cfg.warmup_s * 1e6);
  std::uint64_t t_end = t0 + static_cast<std::uint64_t>(cfg.duration_s * 1e6);
  std::atomic<std::uint64_t> warm_count{0}, end_count{0};
  std::thread sampler([&] {
    std::uint64_t now = now_steady_us();
    if (t_warm > now) sleep_us(t_warm - now);
    warm_count.store(delivered.load());
    now = now_steady_us();
    if (t_end > now) sleep_us(t_end - now);
    end_count.store(delivered.load());
  });
  std::uint64_t sent = 0;
  while (now_steady_us() < t_end) {
    rng.fill(payload);
    if (pair.producer->write(pair.key, payload) == due::WriteResult::accepted) ++sent;
  }
  pair.producer->flush();
  sampler.join();
  std::uint64_t deadline = now_steady_us() + 60'000'000;
  while (delivered.load() < sent && now_steady_us() < deadline) sleep_us(5'000);

  res.sent = sent;
  res.delivered = delivered.load();
  double window_s = cfg.duration_s - cfg.warmup_s;
  res.msgs_per_s =
      window_s > 0 ? static_cast<double>(end_count.load() - warm_count.load()) / window_s : 0;
  pair.close();
  return res;
}

std::string default_worker_exe() {
  char buf[4096];
  ssize_t n = ::readlink("/proc/self/exe", buf, sizeof buf - 1);
  if (n <= 0) return "./sdnator";
  buf[n] = '\0';
  std::string self(buf);
  auto slash = self.rfind('/');
  std::string dir = slash == std::string::npos ? "." : self.substr(0, slash);
  for (const auto& cand : {dir + "/sdnator", dir + "/../sdnator"}) {
    if (::access(cand.c_str(), X_OK) == 0) return cand;
  }
  return self;  // the CLI spawning itself
}

namespace {

pid_t spawn_worker(const std::string& exe, const std::vector<std::string>& args) {
  std::vector<char*> argv;
  argv.push_back(const_cast<char*>(exe.c_str()));
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid = ::fork();
  if (pid < 0) throw Error(Errc::transport, "fork failed (resource exhausted?)");
  if (pid == 0) {
    ::execv(exe.c_str(), argv.data());
    _exit(127);
  }
  return pid;
}

PairResult read_pair_result(const std::string& path) {
  std::ifstream in(path);
  PairResult r;
  char comma;
  if (!(in >> r.msgs_per_s >> comma >> r.sent >> comma >> r.delivered))
    throw Error(Errc::transport, "scale worker produced no result at " + path);
  return r;
}

}  // namespace

ScaleResult run_scale(const BenchConfig& cfg, const Endpoints& ep, const std::string& worker_exe) {
  ScaleResult res;
  std::string tmp = "/tmp/sdnator-scale-" + std::to_string(::getpid());
  std::filesystem::create_directories(tmp);

  auto worker_args = [&](std::uint32_t i, const std::string& out) {
    return std::vector<std::string>{"bench",
                                    "pair-worker",
                                    "--bus",
                                    ep.bus_addr,
                                    "--pair-name",
                                    "p" + std::to_string(i),
                                    "--msg-size",
                                    std::to_string(cfg.msg_size),
                                    "--updates-batch",
                                    std::to_string(cfg.updates_batch),
                                    "--latency-ms",
                                    std::to_string(cfg.latency_ms),
                                    "--duration",
                                    std::to_string(cfg.duration_s),
                                    "--warmup",
                                    std::to_string(cfg.warmup_s),
                                    "--seed",
                                    std::to_string(cfg.seed + i),
                                    "--out",
                                    out};
  };

  auto await = [&](pid_t pid) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };

  // Single-pair baseline at the same injected latency.
  {
    std::string out = tmp + "/baseline.csv";
    pid_t pid = spawn_worker(worker_exe, worker_args(9999, out));
    if (!await(pid)) throw Error(Errc::transport, "baseline scale worker failed");
    res.single_pair_msgs_per_s = read_pair_result(out).msgs_per_s;
  }

  std::vector<pid_t> pids;
  std::vector<std::string> outs;
  for (std::uint32_t i = 0; i < cfg.pairs; ++i) {
    outs.push_back(tmp + "/pair-" + std::to_string(i) + ".csv");
    pids.push_back(spawn_worker(worker_exe, worker_args(i, outs.back())));
  }
  bool all_ok = true;
  for (pid_t pid : pids) all_ok = await(pid) && all_ok;
  if (!all_ok) throw Error(Errc::transport, "one or more scale workers failed");

  res.zero_loss = true;
  double sum = 0;
  for (const auto& out : outs) {
    auto r = read_pair_result(out);
    res.per_pair.push_back(r);
    sum += r.msgs_per_s;
    if (r.delivered != r.sent) res.zero_loss = false;
  }
  res.aggregate_msgs_per_s = sum;
  double mean = sum / static_cast<double>(res.per_pair.size());
  double var = 0;
  for (const auto& r : res.per_pair) var += (r.msgs_per_s - mean) * (r.msgs_per_s - mean);
  var /= static_cast<double>(res.per_pair.size());
  res.cov = mean > 0 ? std::sqrt(var) / mean : 0;
  std::filesystem::remove_all(tmp);
  return res;
}

}  // namespace sdnator::bench
