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

#include "sdnator/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <queue>
#include <set>

#include "sdnator/bus.hpp"
#include "sdnator/coordinator.hpp"
#include "sdnator/due.hpp"

namespace sdnator::fleet {

namespace {

constexpr const char* kMetaKey = "fleet.meta.fleet";
constexpr const char* kOrdersKey = "fleet.orders.batch";
constexpr const char* kRequestKey = "fleet.sched.request";
constexpr const char* kDecisionKey = "fleet.sched.decision";
constexpr const char* kReadyKey = "fleet.sched.ready";

std::string twin_key(int machine, const char* facet) {
  return "fleet.twin.m" + std::to_string(machine) + "." + std::string(facet);
}

// --- simulation record payloads ---------------------------------------------

struct JobItem {
  std::uint64_t id;
  double duration_s;
  bool ppe;
};

struct OrderMsg {
  std::uint64_t request_id = 0;
  std::uint64_t epoch = 0;
  std::vector<JobItem> items;
};

enum class RequestKind : std::uint8_t { pull = 1, reschedule = 2 };

struct RequestMsg {
  std::uint64_t request_id = 0;
  std::uint64_t epoch = 0;
  RequestKind kind = RequestKind::pull;
  std::uint32_t machine = 0;  // pull only
  std::vector<JobItem> items;  // reschedule only
};

struct Placement {
  std::uint64_t job = 0;
  std::uint32_t machine = 0;
  bool priority = false;
};

struct DecisionMsg {
  std::uint64_t request_id = 0;
  std::vector<Placement> placements;
};

struct MetaMsg {
  std::uint32_t machines = 0;
  double setup_s = 0;
  double twin_period_s = 0;
  double anomaly_prob = 0;
};

enum class MachineTwinStatus : std::uint8_t { idle = 0, setup = 1, printing = 2, maintenance = 3 };

struct TwinMachineMsg {
  std::uint64_t epoch = 0;
  std::uint32_t machine = 0;
  MachineTwinStatus status = MachineTwinStatus::idle;
  std::uint64_t current_job = 0;
  double current_remaining_s = 0;
  double maintenance_remaining_s = 0;
};

struct TwinQueueMsg {
  std::uint64_t epoch = 0;
  std::uint32_t machine = 0;
  double queue_finish_s = 0;
  std::uint32_t length = 0;
  double avg_wait_s = 0;
  std::vector<std::uint64_t> history;  // queued job ids, head first
};

struct TwinAnomalyMsg {
  std::uint64_t epoch = 0;
  std::uint32_t machine = 0;
  std::uint64_t last_anomaly_job = 0;
  std::uint32_t anomaly_count = 0;
  bool in_maintenance = false;
};

void put_items(ByteWriter& w, const std::vector<JobItem>& items) {
  w.u32(static_cast<std::uint32_t>(items.size()));
  for (const auto& it : items) {
    w.u64(it.id);
    w.f64(it.duration_s);
    w.u8(it.ppe ? 1 : 0);
  }
}

std::vector<JobItem> get_items(ByteReader& r) {
  std::vector<JobItem> items(r.u32());
  for (auto& it : items) {
    it.id = r.u64();
    it.duration_s = r.f64();
    it.ppe = r.u8() != 0;
  }
  return items;
}

std::vector<std::uint8_t> encode_order(const OrderMsg& m) {
  ByteWriter w;
  w.u64(m.request_id);
  w.u64(m.epoch);
  put_items(w, m.items);
  return w.take();
}

OrderMsg decode_order(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  OrderMsg m;
  m.request_id = r.u64();
  m.epoch = r.u64();
  m.items = get_items(r);
  return m;
}

std::vector<std::uint8_t> encode_request(const RequestMsg& m) {
  ByteWriter w;
  w.u64(m.request_id);
  w.u64(m.epoch);
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u32(m.machine);
  put_items(w, m.items);
  return w.take();
}

RequestMsg decode_request(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  RequestMsg m;
  m.request_id = r.u64();
  m.epoch = r.u64();
  m.kind = static_cast<RequestKind>(r.u8());
  m.machine = r.u32();
  m.items = get_items(r);
  return m;
}

std::vector<std::uint8_t> encode_decision(const DecisionMsg& m) {
  ByteWriter w;
  w.u64(m.request_id);
  w.u32(static_cast<std::uint32_t>(m.placements.size()));
  for (const auto& p : m.placements) {
    w.u64(p.job);
    w.u32(p.machine);
    w.u8(p.priority ? 1 : 0);
  }
  return w.take();
}

DecisionMsg decode_decision(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  DecisionMsg m;
  m.request_id = r.u64();
  m.placements.resize(r.u32());
  for (auto& pl : m.placements) {
    pl.job = r.u64();
    pl.machine = r.u32();
    pl.priority = r.u8() != 0;
  }
  return m;
}

std::vector<std::uint8_t> encode_meta(const MetaMsg& m) {
  ByteWriter w;
  w.u32(m.machines);
  w.f64(m.setup_s);
  w.f64(m.twin_period_s);
  w.f64(m.anomaly_prob);
  return w.take();
}

MetaMsg decode_meta(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  MetaMsg m;
  m.machines = r.u32();
  m.setup_s = r.f64();
  m.twin_period_s = r.f64();
  m.anomaly_prob = r.f64();
  return m;
}

std::vector<std::uint8_t> encode_twin_machine(const TwinMachineMsg& m) {
  ByteWriter w;
  w.u64(m.epoch);
  w.u32(m.machine);
  w.u8(static_cast<std::uint8_t>(m.status));
  w.u64(m.current_job);
  w.f64(m.current_remaining_s);
  w.f64(m.maintenance_remaining_s);
  return w.take();
}

TwinMachineMsg decode_twin_machine(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  TwinMachineMsg m;
  m.epoch = r.u64();
  m.machine = r.u32();
  m.status = static_cast<MachineTwinStatus>(r.u8());
  m.current_job = r.u64();
  m.current_remaining_s = r.f64();
  m.maintenance_remaining_s = r.f64();
  return m;
}

std::vector<std::uint8_t> encode_twin_queue(const TwinQueueMsg& m) {
  ByteWriter w;
  w.u64(m.epoch);
  w.u32(m.machine);
  w.f64(m.queue_finish_s);
  w.u32(m.length);
  w.f64(m.avg_wait_s);
  w.u32(static_cast<std::uint32_t>(m.history.size()));
  for (auto id : m.history) w.u64(id);
  return w.take();
}

TwinQueueMsg decode_twin_queue(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  TwinQueueMsg m;
  m.epoch = r.u64();
  m.machine = r.u32();
  m.queue_finish_s = r.f64();
  m.length = r.u32();
  m.avg_wait_s = r.f64();
  m.history.resize(r.u32());
  for (auto& id : m.history) id = r.u64();
  return m;
}

std::vector<std::uint8_t> encode_twin_anomaly(const TwinAnomalyMsg& m) {
  ByteWriter w;
  w.u64(m.epoch);
  w.u32(m.machine);
  w.u64(m.last_anomaly_job);
  w.u32(m.anomaly_count);
  w.u8(m.in_maintenance ? 1 : 0);
  return w.take();
}

TwinAnomalyMsg decode_twin_anomaly(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  TwinAnomalyMsg m;
  m.epoch = r.u64();
  m.machine = r.u32();
  m.last_anomaly_job = r.u64();
  m.anomaly_count = r.u32();
  m.in_maintenance = r.u8() != 0;
  return m;
}

// --- the job scheduler application ------------------------------------------

// Consumes orders, pull/reschedule requests and (for the centralized
// state-aware algorithms) twin records; publishes placements. All event
// processing is serialized on one worker thread; state-aware decisions wait
// until the twin view has caught up to the epoch stamped on the request.
class SchedulerApp {
 public:
  SchedulerApp(SchedulerKind kind, const ScenarioConfig& cfg, const due::DueConfig& due_cfg)
      : kind_(kind),
        ppe_priority_(cfg.ppe_priority),
        rng_(cfg.seed ^ hash_str("job-scheduler")) {
    identity_.app_id = std::string("sched-") + scheduler_kind_name(kind);
    Manifest mf;
    mf.capabilities.push_back({DataKey::parse(kDecisionKey), std::nullopt, false});
    mf.capabilities.push_back({DataKey::parse(kReadyKey), std::nullopt, false});
    mf.interests.push_back({KeyPattern::parse(kOrdersKey), std::nullopt});
    mf.interests.push_back({KeyPattern::parse(kRequestKey), std::nullopt});
    if (kind != SchedulerKind::decentralized)
      mf.interests.push_back({KeyPattern::parse(kMetaKey), std::nullopt});
    if (uses_twins())
      mf.interests.push_back(
          {KeyPattern::parse("fleet.twin.**"), 1.02 / cfg.twin_period_s});
    session_ = due::Session::init(identity_, std::move(mf), due_cfg);

    worker_ = std::thread([this] { loop(); });
    auto push = [this](Item::Kind k) {
      return [this, k](const wire::Deliver& d) {
        std::lock_guard lk(mu_);
        queue_.push_back({k, d.key, d.value});
        cv_.notify_one();
      };
    };
    orders_obs_ = session_->observe(kOrdersKey);
    orders_obs_->add_callback(push(Item::Kind::order));
    request_obs_ = session_->observe(kRequestKey);
    request_obs_->add_callback(push(Item::Kind::request));
    if (kind != SchedulerKind::decentralized) {
      meta_obs_ = session_->observe(kMetaKey);
      meta_obs_->add_callback(push(Item::Kind::meta));
    }
    if (uses_twins()) {
      twin_obs_ = session_->observe("fleet.twin.**");
      twin_obs_->add_callback(push(Item::Kind::twin));
    }

    // The ready record doubles as the assignment barrier: it is accepted only
    // once the coordinator has consolidated our capabilities with the fleet's
    // interests.
    std::uint64_t deadline = now_steady_us() + 10'000'000;
    while (true) {
      auto r = session_->write(DataKey::parse(kReadyKey), std::string_view("up"),
                               {.pub_only = false, .no_wait = true});
      if (r == due::WriteResult::accepted) break;
      if (now_steady_us() > deadline)
        throw Error(Errc::handshake_timeout, "scheduler never received assignments");
      sleep_us(2'000);
    }
  }

  ~SchedulerApp() { close(); }

  void close() {
    if (closed_.exchange(true)) return;
    {
      std::lock_guard lk(mu_);
      stop_ = true;
      cv_.notify_all();
    }
    if (worker_.joinable()) worker_.join();
    orders_obs_.reset();
    request_obs_.reset();
    meta_obs_.reset();
    twin_obs_.reset();
    if (session_) session_->close();
  }

  bool uses_twins() const {
    return kind_ == SchedulerKind::fcfs || kind_ == SchedulerKind::dynamic;
  }

 private:
  struct Item {
    enum class Kind { order, request, meta, twin } kind;
    std::string key;
    std::vector<std::uint8_t> payload;
  };

  struct MachineView {
    std::uint64_t machine_epoch = 0;
    std::uint64_t queue_epoch = 0;
    MachineTwinStatus status = MachineTwinStatus::idle;
    double current_remaining_s = 0;
    double maintenance_remaining_s = 0;
    double queue_finish_s = 0;
    std::uint32_t queue_len = 0;
    std::vector<std::uint64_t> queue_jobs;
  };

  void loop() {
    while (true) {
      Item item;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stop_ || !queue_.empty(); });
        if (stop_ && queue_.empty()) return;
        if (queue_.empty()) continue;
        item = std::move(queue_.front());
        queue_.pop_front();
      }
      try {
        handle(item);
      } catch (const std::exception& e) {
        SDN_WARN("scheduler: %s", e.what());
      }
    }
  }

  void handle(const Item& item) {
    switch (item.kind) {
      case Item::Kind::meta: {
        auto m = decode_meta(item.payload);
        machines_ = static_cast<int>(m.machines);
        setup_s_ = m.setup_s;
        anomaly_prob_ = m.anomaly_prob;
        views_.assign(static_cast<std::size_t>(machines_), {});
        pending_count_.assign(static_cast<std::size_t>(machines_), 0);
        pending_work_.assign(static_cast<std::size_t>(machines_), 0.0);
        pending_ppe_work_.assign(static_cast<std::size_t>(machines_), 0.0);
        have_meta_ = true;
        for (auto& t : pre_meta_twins_) handle_twin(t);
        pre_meta_twins_.clear();
        break;
      }
      case Item::Kind::twin:
        // Twin facets from the DT app can outrun the meta record (separate
        // producers); hold them until the fleet size is known.
        if (!have_meta_) {
          pre_meta_twins_.push_back(item);
          return;
        }
        handle_twin(item);
        break;
      case Item::Kind::order: {
        auto m = decode_order(item.payload);
        for (const auto& it : m.items) catalog_[it.id] = it;
        backlog_.push_back({m.request_id, m.epoch, std::move(m.items), false, 0});
        break;
      }
      case Item::Kind::request: {
        auto m = decode_request(item.payload);
        for (const auto& it : m.items) catalog_[it.id] = it;
        backlog_.push_back({m.request_id, m.epoch, std::move(m.items),
                            m.kind == RequestKind::pull, m.machine});
        break;
      }
    }
    process_backlog();
  }

  void handle_twin(const Item& item) {
    // fleet.twin.m<K>.<facet>
    auto key = DataKey::parse(item.key);
    if (key.segments.size() != 4) return;
    int m = std::atoi(key.segments[2].c_str() + 1);
    if (m < 0 || m >= machines_ || views_.empty()) return;
    auto& v = views_[static_cast<std::size_t>(m)];
    const auto& facet = key.segments[3];
    if (facet == "machine") {
      auto t = decode_twin_machine(item.payload);
      v.machine_epoch = t.epoch;
      v.status = t.status;
      v.current_remaining_s = t.current_remaining_s;
      v.maintenance_remaining_s = t.maintenance_remaining_s;
    } else if (facet == "queue") {
      auto t = decode_twin_queue(item.payload);
      v.queue_epoch = t.epoch;
      v.queue_finish_s = t.queue_finish_s;
      v.queue_len = t.length;
      v.queue_jobs = std::move(t.history);
    } else {
      return;  // the anomaly facet carries no scheduling state
    }
    std::uint64_t complete = UINT64_MAX;
    for (const auto& view : views_)
      complete = std::min({complete, view.machine_epoch, view.queue_epoch});
    if (views_.empty()) complete = 0;
    if (complete != view_epoch_ && complete != UINT64_MAX) {
      view_epoch_ = complete;
      // The new snapshot reflects everything we placed before it was taken.
      std::fill(pending_count_.begin(), pending_count_.end(), 0);
      std::fill(pending_work_.begin(), pending_work_.end(), 0.0);
      std::fill(pending_ppe_work_.begin(), pending_ppe_work_.end(), 0.0);
    }
  }

  struct Work {
    std::uint64_t request_id;
    std::uint64_t epoch;
    std::vector<JobItem> items;
    bool is_pull;
    std::uint32_t pull_machine;
  };

  void process_backlog() {
    while (!backlog_.empty()) {
      Work& w = backlog_.front();
      if (kind_ != SchedulerKind::decentralized && !have_meta_) return;
      // State-aware algorithms never decide blind: they need the twin view
      // to have caught up with the epoch stamped on the request, and at
      // least one snapshot to exist at all.
      if (uses_twins() && (view_epoch_ < w.epoch || view_epoch_ == 0)) return;
      Work work = std::move(w);
      backlog_.pop_front();
      DecisionMsg decision;
      decision.request_id = work.request_id;
      if (work.is_pull) {
        decision.placements = handle_pull(static_cast<int>(work.pull_machine));
      } else {
        decision.placements = schedule(work.items);
      }
      publish(decision);
    }
  }

  std::vector<Placement> handle_pull(int machine) {
    std::vector<Placement> out;
    if (kind_ != SchedulerKind::decentralized) return out;
    if (pool_.empty()) {
      announced_.insert(machine);
      return out;
    }
    // The pulling machine is the only queue-empty machine right now (any
    // other would have pulled earlier, and orders drain into announced
    // machines on arrival).
    out.push_back({pool_.front(), static_cast<std::uint32_t>(machine), false});
    pool_.pop_front();
    return out;
  }

  std::vector<Placement> schedule(const std::vector<JobItem>& items) {
    switch (kind_) {
      case SchedulerKind::decentralized: {
        for (const auto& it : items) pool_.push_back(it.id);
        std::vector<Placement> out;
        while (!pool_.empty() && !announced_.empty()) {
          // Uniformly random machine among those whose queue is empty.
          std::uint64_t pick = rng_.below(announced_.size());
          auto it = announced_.begin();
          std::advance(it, static_cast<long>(pick));
          out.push_back({pool_.front(), static_cast<std::uint32_t>(*it), false});
          pool_.pop_front();
          announced_.erase(it);
        }
        return out;
      }
      case SchedulerKind::baseline: {
        // Uniform distribution over machine ids, oblivious to machine state.
        std::vector<Placement> out;
        for (const auto& it : items) {
          out.push_back({it.id, static_cast<std::uint32_t>(rr_next_), false});
          rr_next_ = (rr_next_ + 1) % machines_;
        }
        return out;
      }
      case SchedulerKind::fcfs: {
        std::vector<int> counts(static_cast<std::size_t>(machines_), 0);
        for (int m = 0; m < machines_; ++m) {
          const auto& v = views_[static_cast<std::size_t>(m)];
          counts[static_cast<std::size_t>(m)] =
              static_cast<int>(v.queue_len) + (v.status != MachineTwinStatus::idle ? 1 : 0) +
              pending_count_[static_cast<std::size_t>(m)];
        }
        std::vector<Placement> out;
        for (const auto& it : items) {
          int m = fcfs_pick(counts);
          out.push_back({it.id, static_cast<std::uint32_t>(m), false});
          ++counts[static_cast<std::size_t>(m)];
          ++pending_count_[static_cast<std::size_t>(m)];
        }
        return out;
      }
      case SchedulerKind::dynamic:
        return schedule_dynamic(items);
    }
    return {};
  }

  std::vector<Placement> schedule_dynamic(const std::vector<JobItem>& items) {
    bool ppe_batch = ppe_priority_ && !items.empty() &&
                     std::all_of(items.begin(), items.end(),
                                 [](const JobItem& j) { return j.ppe; });
    std::vector<double> base(static_cast<std::size_t>(machines_), 0.0);
    std::vector<double> setups(static_cast<std::size_t>(machines_), setup_s_);
    for (int m = 0; m < machines_; ++m) {
      const auto& v = views_[static_cast<std::size_t>(m)];
      if (ppe_batch) {
        // Priority jobs precede every queued normal job, so only the running
        // print, maintenance, queued priority work and our not-yet-visible
        // priority placements stand in front of them.
        double load = v.current_remaining_s + v.maintenance_remaining_s;
        for (auto id : v.queue_jobs) {
          auto it = catalog_.find(id);
          if (it != catalog_.end() && it->second.ppe)
            load += setup_s_ + inflate(it->second.duration_s);
        }
        base[static_cast<std::size_t>(m)] = load + pending_ppe_work_[static_cast<std::size_t>(m)];
      } else {
        base[static_cast<std::size_t>(m)] =
            v.queue_finish_s + pending_work_[static_cast<std::size_t>(m)];
      }
    }
    std::vector<double> durations;
    durations.reserve(items.size());
    for (const auto& it : items) durations.push_back(inflate(it.duration_s));
    auto res = solve_min_max(base, setups, durations);
    std::vector<Placement> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto m = static_cast<std::size_t>(res.machine_of[i]);
      out.push_back({items[i].id, static_cast<std::uint32_t>(m), ppe_batch});
      pending_work_[m] += setup_s_ + durations[i];
      if (ppe_batch) pending_ppe_work_[m] += setup_s_ + durations[i];
      pending_count_[m] += 1;
    }
    return out;
  }

  // Expected makespan contribution under reprints: a print succeeds with
  // probability (1 - p), so the expected number of attempts is 1/(1 - p).
  double inflate(double duration) const {
    if (anomaly_prob_ <= 0.0 || anomaly_prob_ >= 1.0) return duration;
    return duration / (1.0 - anomaly_prob_);
  }

  void publish(const DecisionMsg& decision) {
    auto r = session_->write(DataKey::parse(kDecisionKey), encode_decision(decision),
                             {.pub_only = false, .no_wait = true});
    if (r != due::WriteResult::accepted)
      SDN_WARN("scheduler: decision %llu not accepted",
               static_cast<unsigned long long>(decision.request_id));
  }

  SchedulerKind kind_;
  bool ppe_priority_;
  SplitMix64 rng_;
  AppIdentity identity_;
  std::unique_ptr<due::Session> session_;
  std::shared_ptr<due::Observer> orders_obs_, request_obs_, meta_obs_, twin_obs_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Item> queue_;
  bool stop_ = false;
  std::atomic<bool> closed_{false};
  std::thread worker_;

  // scheduling state (worker thread only)
  bool have_meta_ = false;
  int machines_ = 0;
  double setup_s_ = 0;
  double anomaly_prob_ = 0;
  std::vector<MachineView> views_;
  std::uint64_t view_epoch_ = 0;
  std::deque<Work> backlog_;
  std::vector<Item> pre_meta_twins_;
  std::map<std::uint64_t, JobItem> catalog_;
  std::deque<std::uint64_t> pool_;  // decentralized job pool, FIFO
  std::set<int> announced_;         // machines with announced empty queues
  int rr_next_ = 0;                 // baseline round-robin cursor
  std::vector<int> pending_count_;
  std::vector<double> pending_work_;
  std::vector<double> pending_ppe_work_;
};

// --- the emulated fleet + DES ------------------------------------------------

struct Printer {
  int id = 0;
  enum class St { idle, setup, printing, maintenance } st = St::idle;
  std::deque<std::uint64_t> queue;
  std::uint64_t current = 0;  // job id, 0 = none
  double phase_end_s = 0;
  std::uint64_t token = 0;  // invalidates superseded phase events
  bool abort_pending = false;
  double current_started_s = 0;
  double waits_sum = 0;
  std::uint64_t waits_n = 0;
  std::uint64_t anomaly_count = 0;
  std::uint64_t last_anomaly_job = 0;
};

class SimRunner {
 public:
  explicit SimRunner(const ScenarioConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  ScenarioReport run();

 private:
  struct Ev {
    double t;
    std::uint64_t seq;
    enum class Kind { order, twin, phase } kind;
    int machine = 0;
    std::uint64_t token = 0;
    std::size_t order_idx = 0;

    bool operator>(const Ev& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
  };

  void setup_backends();
  void start_apps();
  void push_event(Ev ev) {
    ev.seq = ++ev_seq_;
    events_.push(ev);
  }
  void advance_clock(double t);
  void handle_order(std::size_t idx, double now);
  void handle_phase_end(int machine, double now);
  void start_next(Printer& p, double now);
  void schedule_phase(Printer& p, double end_s);
  void publish_meta();
  void publish_twins(double now);
  void publish_pull(int machine, double now);
  void reschedule_job(std::uint64_t job, double now);
  DecisionMsg await_decision(std::uint64_t request_id);
  void apply_placements(const std::vector<Placement>& ps, double now);
  void issue_pending_pulls(double now);
  double job_duration(std::uint64_t id) const { return jobs_[id - 1].duration_s; }
  double queue_finish(const Printer& p, double now) const;
  ScenarioReport finalize(bool stalled);

  ScenarioConfig cfg_;
  SplitMix64 rng_;

  std::unique_ptr<bus::BusServer> bus_server_;
  std::unique_ptr<coord::Coordinator> coordinator_;
  std::string bus_addr_;
  std::unique_ptr<due::Session> fleet_session_, twin_session_, creator_session_;
  std::unique_ptr<SchedulerApp> scheduler_;
  std::shared_ptr<due::Observer> decision_obs_, ready_obs_;

  std::atomic<std::uint64_t> vclock_us_{0};

  std::mutex mail_mu_;
  std::condition_variable mail_cv_;
  std::map<std::uint64_t, DecisionMsg> mail_;
  bool sched_ready_ = false;

  std::vector<Printer> printers_;
  std::vector<JobRecord> jobs_;
  std::vector<double> queued_at_;  // per job, for queue-wait stats
  struct OrderBatch {
    double t;
    std::vector<std::uint64_t> ids;
  };
  std::vector<OrderBatch> order_plan_;

  std::priority_queue<Ev, std::vector<Ev>, std::greater<>> events_;
  std::uint64_t ev_seq_ = 0;
  std::uint64_t next_request_id_ = 1;
  std::uint64_t epoch_ = 0;
  std::uint64_t jobs_done_ = 0;
  std::uint64_t reprints_ = 0;
  std::vector<int> pulls_wanted_;       // machines whose queues just emptied
  std::vector<char> pull_outstanding_;  // an announced machine awaits a job
  double wall_start_us_ = 0;
};

void SimRunner::setup_backends() {
  if (cfg_.bus_addr.empty()) {
    bus_server_ = std::make_unique<bus::BusServer>();
    bus::BusOptions bopts;
    bopts.net.listen = net::Addr::parse("127.0.0.1:0");
    bopts.net.subscriber_queue_depth = 65536;
    bus_addr_ = bus_server_->start(bopts).to_string();

    coord::CoordinatorOptions copts;
    copts.due.bus_addr = bus_addr_;
    copts.due.archive_addr = cfg_.archive_addr;
    copts.recover = false;
    copts.failover_seed = cfg_.seed + 1;
    coordinator_ = coord::Coordinator::start(copts);
  } else {
    bus_addr_ = cfg_.bus_addr;
  }
}

void SimRunner::start_apps() {
  due::DueConfig base;
  base.bus_addr = bus_addr_;
  base.archive_addr = cfg_.archive_addr;
  base.updates_batch = 64;
  base.batch_linger_us = 500;
  base.observer_queue_depth = 65536;
  base.pacing_clock = [this] { return vclock_us_.load(std::memory_order_relaxed); };

  AppIdentity fleet_id;
  fleet_id.app_id = "fleet-assets";
  Manifest fleet_mf;
  fleet_mf.capabilities.push_back({DataKey::parse(kMetaKey), std::nullopt, false});
  fleet_mf.capabilities.push_back({DataKey::parse(kRequestKey), std::nullopt, false});
  fleet_mf.interests.push_back({KeyPattern::parse(kDecisionKey), std::nullopt});
  fleet_mf.interests.push_back({KeyPattern::parse(kReadyKey), std::nullopt});
  fleet_session_ = due::Session::init(fleet_id, fleet_mf, base);

  decision_obs_ = fleet_session_->observe(kDecisionKey);
  decision_obs_->add_callback([this](const wire::Deliver& d) {
    auto msg = decode_decision(d.value);
    std::lock_guard lk(mail_mu_);
    mail_[msg.request_id] = std::move(msg);
    mail_cv_.notify_all();
  });
  ready_obs_ = fleet_session_->observe(kReadyKey);
  ready_obs_->add_callback([this](const wire::Deliver&) {
    std::lock_guard lk(mail_mu_);
    sched_ready_ = true;
    mail_cv_.notify_all();
  });

  if (cfg_.twins_enabled) {
    AppIdentity twin_id;
    twin_id.app_id = "digital-twins";
    Manifest twin_mf;
    for (int m = 0; m < cfg_.machines; ++m)
      for (const char* facet : {"machine", "queue", "anomaly"})
        twin_mf.capabilities.push_back(
            {DataKey::parse(twin_key(m, facet)), 1.02 / cfg_.twin_period_s, false});
    twin_session_ = due::Session::init(twin_id, twin_mf, base);
  }

  AppIdentity creator_id;
  creator_id.app_id = "job-creator";
  Manifest creator_mf;
  creator_mf.capabilities.push_back({DataKey::parse(kOrdersKey), std::nullopt, false});
  creator_session_ = due::Session::init(creator_id, creator_mf, base);

  scheduler_ = std::make_unique<SchedulerApp>(cfg_.scheduler, cfg_, base);

  // Scheduler signalled readiness through the bus; wait for it here.
  {
    std::unique_lock lk(mail_mu_);
    if (!mail_cv_.wait_for(lk, std::chrono::milliseconds(cfg_.barrier_timeout_ms),
                           [&] { return sched_ready_; }))
      throw Error(Errc::handshake_timeout, "scheduler ready record never arrived");
  }

  // Late consolidation updates travel async; block until every producer in
  // the workflow holds the assignments it is about to use.
  auto settle = [&](due::Session& s, const std::vector<std::string>& keys) {
    std::uint64_t deadline = now_steady_us() + cfg_.barrier_timeout_ms * 1000;
    for (const auto& k : keys) {
      while (!s.has_assignment(DataKey::parse(k))) {
        if (now_steady_us() > deadline)
          throw Error(Errc::handshake_timeout, "assignment for " + k + " never arrived");
        sleep_us(1'000);
      }
    }
  };
  // The decentralized scheduler declares no meta interest, so that
  // capability legitimately stays unassigned (on-demand production).
  std::vector<std::string> fleet_keys{kRequestKey};
  if (cfg_.scheduler != SchedulerKind::decentralized) fleet_keys.push_back(kMetaKey);
  settle(*fleet_session_, fleet_keys);
  settle(*creator_session_, {kOrdersKey});
  if (twin_session_ && scheduler_->uses_twins()) {
    std::vector<std::string> twin_keys;
    for (int m = 0; m < cfg_.machines; ++m)
      for (const char* facet : {"machine", "queue", "anomaly"})
        twin_keys.push_back(twin_key(m, facet));
    settle(*twin_session_, twin_keys);
  }
}

void SimRunner::advance_clock(double t) {
  if (cfg_.time_dilation_ms_per_s > 0) {
    double target_wall =
        wall_start_us_ + t * cfg_.time_dilation_ms_per_s * 1000.0;
    double now_wall = static_cast<double>(now_steady_us());
    if (target_wall > now_wall) sleep_us(static_cast<std::uint64_t>(target_wall - now_wall));
  }
  vclock_us_.store(static_cast<std::uint64_t>(t * 1e6), std::memory_order_relaxed);
}

double SimRunner::queue_finish(const Printer& p, double now) const {
  double rem = 0;
  if (p.st == Printer::St::setup) {
    rem += (p.phase_end_s - now) + job_duration(p.current);
  } else if (p.st == Printer::St::printing) {
    // Nominal remainder; the twin cannot see a future anomaly.
    rem += std::max(0.0, p.current_started_s + job_duration(p.current) - now);
  } else if (p.st == Printer::St::maintenance) {
    rem += p.phase_end_s - now;
  }
  for (auto id : p.queue) rem += cfg_.setup_s + job_duration(id);
  return rem;
}

void SimRunner::publish_meta() {
  MetaMsg m{static_cast<std::uint32_t>(cfg_.machines), cfg_.setup_s, cfg_.twin_period_s,
            cfg_.anomaly_prob};
  fleet_session_->write(DataKey::parse(kMetaKey), encode_meta(m),
                        {.pub_only = false, .no_wait = true});
  fleet_session_->flush();
}

void SimRunner::publish_twins(double now) {
  if (!twin_session_) return;
  ++epoch_;
  for (const auto& p : printers_) {
    TwinMachineMsg tm;
    tm.epoch = epoch_;
    tm.machine = static_cast<std::uint32_t>(p.id);
    switch (p.st) {
      case Printer::St::idle: tm.status = MachineTwinStatus::idle; break;
      case Printer::St::setup: tm.status = MachineTwinStatus::setup; break;
      case Printer::St::printing: tm.status = MachineTwinStatus::printing; break;
      case Printer::St::maintenance: tm.status = MachineTwinStatus::maintenance; break;
    }
    tm.current_job = p.current;
    if (p.st == Printer::St::setup)
      tm.current_remaining_s = (p.phase_end_s - now) + job_duration(p.current);
    else if (p.st == Printer::St::printing)
      tm.current_remaining_s = std::max(0.0, p.current_started_s + job_duration(p.current) - now);
    if (p.st == Printer::St::maintenance) tm.maintenance_remaining_s = p.phase_end_s - now;
    twin_session_->write(DataKey::parse(twin_key(p.id, "machine")), encode_twin_machine(tm));

    TwinQueueMsg tq;
    tq.epoch = epoch_;
    tq.machine = static_cast<std::uint32_t>(p.id);
    tq.queue_finish_s = queue_finish(p, now);
    tq.length = static_cast<std::uint32_t>(p.queue.size());
    tq.avg_wait_s = p.waits_n ? p.waits_sum / static_cast<double>(p.waits_n) : 0.0;
    tq.history.assign(p.queue.begin(), p.queue.end());
    twin_session_->write(DataKey::parse(twin_key(p.id, "queue")), encode_twin_queue(tq));

    TwinAnomalyMsg ta;
    ta.epoch = epoch_;
    ta.machine = static_cast<std::uint32_t>(p.id);
    ta.last_anomaly_job = p.last_anomaly_job;
    ta.anomaly_count = static_cast<std::uint32_t>(p.anomaly_count);
    ta.in_maintenance = p.st == Printer::St::maintenance;
    twin_session_->write(DataKey::parse(twin_key(p.id, "anomaly")), encode_twin_anomaly(ta));
  }
  twin_session_->flush();
}

DecisionMsg SimRunner::await_decision(std::uint64_t request_id) {
  std::unique_lock lk(mail_mu_);
  if (!mail_cv_.wait_for(lk, std::chrono::milliseconds(cfg_.barrier_timeout_ms),
                         [&] { return mail_.count(request_id) != 0; }))
    throw Error(Errc::transport, "scheduler decision timed out (request " +
                                     std::to_string(request_id) + ")");
  DecisionMsg msg = std::move(mail_[request_id]);
  mail_.erase(request_id);
  return msg;
}

void SimRunner::apply_placements(const std::vector<Placement>& ps, double now) {
  for (const auto& pl : ps) {
    auto& p = printers_.at(pl.machine);
    std::uint64_t job = pl.job;
    if (cfg_.scheduler == SchedulerKind::decentralized) pull_outstanding_[pl.machine] = 0;
    queued_at_[job - 1] = now;
    if (pl.priority) {
      // Reconfigurable queue: priority jobs precede queued normal jobs but
      // never preempt the running print or queued priority work.
      auto pos = p.queue.begin();
      while (pos != p.queue.end() && jobs_[*pos - 1].ppe) ++pos;
      p.queue.insert(pos, job);
    } else {
      p.queue.push_back(job);
    }
    if (p.st == Printer::St::idle && p.current == 0) start_next(p, now);
  }
}

void SimRunner::start_next(Printer& p, double now) {
  if (p.st != Printer::St::idle || p.current != 0) return;
  if (p.queue.empty()) {
    if (cfg_.scheduler == SchedulerKind::decentralized &&
        !pull_outstanding_[static_cast<std::size_t>(p.id)])
      pulls_wanted_.push_back(p.id);
    return;
  }
  std::uint64_t job = p.queue.front();
  p.queue.pop_front();
  p.current = job;
  p.st = Printer::St::setup;
  auto& rec = jobs_[job - 1];
  if (rec.started_s < 0) rec.started_s = now;
  p.waits_sum += now - queued_at_[job - 1];
  p.waits_n += 1;
  schedule_phase(p, now + cfg_.setup_s);
  // Taking the queued job freed the buffer slot: a decentralized machine
  // announces its empty queue right away.
  if (cfg_.scheduler == SchedulerKind::decentralized && p.queue.empty() &&
      !pull_outstanding_[static_cast<std::size_t>(p.id)])
    pulls_wanted_.push_back(p.id);
}

void SimRunner::schedule_phase(Printer& p, double end_s) {
  p.phase_end_s = end_s;
  ++p.token;
  Ev ev;
  ev.t = end_s;
  ev.kind = Ev::Kind::phase;
  ev.machine = p.id;
  ev.token = p.token;
  push_event(ev);
}

void SimRunner::handle_phase_end(int machine, double now) {
  auto& p = printers_[static_cast<std::size_t>(machine)];
  switch (p.st) {
    case Printer::St::setup: {
      p.st = Printer::St::printing;
      p.current_started_s = now;
      double dur = job_duration(p.current);
      if (cfg_.anomaly_prob > 0 && rng_.bernoulli(cfg_.anomaly_prob)) {
        p.abort_pending = true;
        schedule_phase(p, now + rng_.unit() * dur);
      } else {
        p.abort_pending = false;
        schedule_phase(p, now + dur);
      }
      break;
    }
    case Printer::St::printing: {
      std::uint64_t job = p.current;
      p.current = 0;
      if (p.abort_pending) {
        p.abort_pending = false;
        auto& rec = jobs_[job - 1];
        rec.reprints += 1;
        ++reprints_;
        ++p.anomaly_count;
        p.last_anomaly_job = job;
        p.st = Printer::St::maintenance;
        schedule_phase(p, now + cfg_.maintenance_s);
        if (cfg_.max_reprints && rec.reprints >= cfg_.max_reprints) {
          rec.failed = true;
          ++jobs_done_;
        } else if (cfg_.scheduler == SchedulerKind::decentralized) {
          // Reprinted on the same printer, ahead of anything buffered.
          p.queue.push_front(job);
          queued_at_[job - 1] = now;
        } else {
          reschedule_job(job, now);
        }
      } else {
        auto& rec = jobs_[job - 1];
        rec.finished_s = now;
        rec.machine = p.id;
        ++jobs_done_;
        p.st = Printer::St::idle;
        start_next(p, now);
      }
      break;
    }
    case Printer::St::maintenance: {
      p.st = Printer::St::idle;
      start_next(p, now);
      break;
    }
    case Printer::St::idle:
      break;
  }
}

void SimRunner::publish_pull(int machine, double now) {
  RequestMsg req;
  req.request_id = next_request_id_++;
  req.epoch = epoch_;
  req.kind = RequestKind::pull;
  req.machine = static_cast<std::uint32_t>(machine);
  fleet_session_->write(DataKey::parse(kRequestKey), encode_request(req),
                        {.pub_only = false, .no_wait = true});
  auto decision = await_decision(req.request_id);
  apply_placements(decision.placements, now);
}

void SimRunner::reschedule_job(std::uint64_t job, double now) {
  // The scheduler decides on the last periodic twin snapshot (at most one
  // twin period stale); an extra event-driven snapshot would blow the
  // coordinator-assigned twin frequency budget.
  RequestMsg req;
  req.request_id = next_request_id_++;
  req.epoch = epoch_;
  req.kind = RequestKind::reschedule;
  const auto& rec = jobs_[job - 1];
  req.items.push_back({job, rec.duration_s, rec.ppe});
  fleet_session_->write(DataKey::parse(kRequestKey), encode_request(req),
                        {.pub_only = false, .no_wait = true});
  auto decision = await_decision(req.request_id);
  apply_placements(decision.placements, now);
}

void SimRunner::handle_order(std::size_t idx, double now) {
  const auto& batch = order_plan_[idx];
  OrderMsg order;
  order.request_id = next_request_id_++;
  order.epoch = epoch_;
  for (auto id : batch.ids) {
    jobs_[id - 1].created_s = now;
    order.items.push_back({id, jobs_[id - 1].duration_s, jobs_[id - 1].ppe});
  }
  creator_session_->write(DataKey::parse(kOrdersKey), encode_order(order),
                          {.pub_only = false, .no_wait = true});
  auto decision = await_decision(order.request_id);
  apply_placements(decision.placements, now);
}

void SimRunner::issue_pending_pulls(double now) {
  while (!pulls_wanted_.empty()) {
    std::vector<int> machines;
    machines.swap(pulls_wanted_);
    std::sort(machines.begin(), machines.end());
    for (int m : machines) {
      auto& p = printers_[static_cast<std::size_t>(m)];
      if (pull_outstanding_[static_cast<std::size_t>(m)] || !p.queue.empty()) continue;
      pull_outstanding_[static_cast<std::size_t>(m)] = 1;
      publish_pull(m, now);
    }
  }
}

ScenarioReport SimRunner::run() {
  cfg_.validate();
  setup_backends();
  start_apps();

  // Pre-draw all job parameters so the stream of random numbers is
  // independent of scheduling behaviour.
  std::uint32_t nb = (cfg_.normal_jobs + cfg_.order_batch - 1) / std::max(1u, cfg_.order_batch);
  std::uint64_t next_id = 1;
  for (std::uint32_t b = 0; b < nb; ++b) {
    OrderBatch ob;
    ob.t = b * cfg_.order_interval_s;
    for (std::uint32_t j = 0; j < cfg_.order_batch && next_id <= cfg_.normal_jobs; ++j) {
      JobRecord rec;
      rec.id = next_id++;
      rec.ppe = false;
      rec.duration_s = rng_.uniform(cfg_.normal_min_s, cfg_.normal_max_s);
      jobs_.push_back(rec);
      ob.ids.push_back(rec.id);
    }
    order_plan_.push_back(std::move(ob));
  }
  if (cfg_.ppe_jobs > 0) {
    OrderBatch ob;
    ob.t = cfg_.ppe_inject_frac * static_cast<double>(nb) * cfg_.order_interval_s;
    for (std::uint32_t j = 0; j < cfg_.ppe_jobs; ++j) {
      JobRecord rec;
      rec.id = next_id++;
      rec.ppe = true;
      rec.duration_s = cfg_.ppe_duration_s;
      jobs_.push_back(rec);
      ob.ids.push_back(rec.id);
    }
    order_plan_.push_back(std::move(ob));
  }
  queued_at_.assign(jobs_.size(), 0.0);
  pull_outstanding_.assign(static_cast<std::size_t>(cfg_.machines), 0);
  printers_.resize(static_cast<std::size_t>(cfg_.machines));
  for (int m = 0; m < cfg_.machines; ++m) printers_[static_cast<std::size_t>(m)].id = m;

  publish_meta();
  wall_start_us_ = static_cast<double>(now_steady_us());

  if (cfg_.twins_enabled) {
    Ev tw;
    tw.t = 0;
    tw.kind = Ev::Kind::twin;
    push_event(tw);
  }
  for (std::size_t i = 0; i < order_plan_.size(); ++i) {
    Ev ev;
    ev.t = order_plan_[i].t;
    ev.kind = Ev::Kind::order;
    ev.order_idx = i;
    push_event(ev);
  }

  bool stalled = false;
  try {
    if (cfg_.scheduler == SchedulerKind::decentralized) {
      for (int m = 0; m < cfg_.machines; ++m) pulls_wanted_.push_back(m);
      issue_pending_pulls(0.0);
    }
    const std::uint64_t total_jobs = jobs_.size();
    while (jobs_done_ < total_jobs && !events_.empty()) {
      Ev ev = events_.top();
      events_.pop();
      advance_clock(ev.t);
      switch (ev.kind) {
        case Ev::Kind::twin: {
          publish_twins(ev.t);
          Ev next;
          next.t = ev.t + cfg_.twin_period_s;
          next.kind = Ev::Kind::twin;
          push_event(next);
          break;
        }
        case Ev::Kind::order:
          handle_order(ev.order_idx, ev.t);
          break;
        case Ev::Kind::phase: {
          auto& p = printers_[static_cast<std::size_t>(ev.machine)];
          if (ev.token != p.token) break;  // superseded
          handle_phase_end(ev.machine, ev.t);
          break;
        }
      }
      issue_pending_pulls(ev.t);
    }
  } catch (const Error& e) {
    SDN_WARN("scenario stalled: %s", e.what());
    stalled = true;
  }
  return finalize(stalled);
}

ScenarioReport SimRunner::finalize(bool stalled) {
  ScenarioReport rep;
  rep.scheduler = scheduler_kind_name(cfg_.scheduler);
  rep.seed = cfg_.seed;
  rep.stalled = stalled;
  rep.jobs = jobs_;
  rep.reprints = reprints_;
  double sum = 0, ppe_sum = 0;
  std::uint64_t n = 0, ppe_n = 0;
  for (const auto& j : jobs_) {
    if (j.failed) {
      ++rep.failed_jobs;
      continue;
    }
    if (j.finished_s < 0) continue;  // stalled run
    double mk = j.makespan_s();
    sum += mk;
    ++n;
    rep.max_makespan_s = std::max(rep.max_makespan_s, mk);
    rep.horizon_s = std::max(rep.horizon_s, j.finished_s);
    if (j.ppe) {
      ppe_sum += mk;
      ++ppe_n;
    }
  }
  rep.mean_makespan_s = n ? sum / static_cast<double>(n) : 0.0;
  rep.ppe_mean_makespan_s = ppe_n ? ppe_sum / static_cast<double>(ppe_n) : 0.0;

  // Teardown order: producers first, then the scheduler, then backends.
  if (creator_session_) creator_session_->close();
  if (twin_session_) twin_session_->close();
  if (scheduler_) scheduler_->close();
  decision_obs_.reset();
  ready_obs_.reset();
  if (fleet_session_) fleet_session_->close();
  if (coordinator_) coordinator_->stop();
  if (bus_server_) bus_server_->stop();
  return rep;
}

}  // namespace

// --- public API ---------------------------------------------------------------

ScenarioConfig ScenarioConfig::from_config(const Config& cfg) {
  ScenarioConfig s;
  s.scheduler = scheduler_kind_from_string(cfg.get_str("scenario.scheduler", "dynamic"));
  s.machines = static_cast<int>(cfg.get_int("scenario.machines", s.machines));
  s.seed = static_cast<std::uint64_t>(cfg.get_int("scenario.seed", 1));
  s.setup_s = cfg.get_double("scenario.setup_s", s.setup_s);
  s.maintenance_s = cfg.get_double("scenario.maintenance_s", s.maintenance_s);
  s.anomaly_prob = cfg.get_double("scenario.anomaly_prob", s.anomaly_prob);
  s.max_reprints = static_cast<std::uint32_t>(cfg.get_int("scenario.max_reprints", 0));
  s.normal_jobs = static_cast<std::uint32_t>(cfg.get_int("scenario.normal_jobs", s.normal_jobs));
  s.order_batch = static_cast<std::uint32_t>(cfg.get_int("scenario.order_batch", s.order_batch));
  s.order_interval_s = cfg.get_double("scenario.order_interval_s", s.order_interval_s);
  s.normal_min_s = cfg.get_double("scenario.normal_min_s", s.normal_min_s);
  s.normal_max_s = cfg.get_double("scenario.normal_max_s", s.normal_max_s);
  s.ppe_jobs = static_cast<std::uint32_t>(cfg.get_int("scenario.ppe_jobs", s.ppe_jobs));
  s.ppe_duration_s = cfg.get_double("scenario.ppe_duration_s", s.ppe_duration_s);
  s.ppe_inject_frac = cfg.get_double("scenario.ppe_inject_frac", s.ppe_inject_frac);
  s.ppe_priority = cfg.get_bool("scenario.ppe_priority", true);
  s.twin_period_s = cfg.get_double("scenario.twin_period_s", s.twin_period_s);
  s.twins_enabled = cfg.get_bool("scenario.twins_enabled", true);
  s.bus_addr = cfg.get_str("scenario.bus", "");
  s.archive_addr = cfg.get_str("scenario.archive", "");
  s.time_dilation_ms_per_s = cfg.get_double("scenario.time_dilation_ms_per_s", 0.0);
  s.validate();
  return s;
}

void ScenarioConfig::validate() const {
  if (machines < 1) throw Error(Errc::invalid_config, "machines must be >= 1");
  if (order_batch < 1) throw Error(Errc::invalid_config, "order_batch must be >= 1");
  if (normal_min_s <= 0 || normal_max_s < normal_min_s)
    throw Error(Errc::invalid_config, "normal job duration range is invalid");
  if (anomaly_prob < 0 || anomaly_prob > 1)
    throw Error(Errc::invalid_config, "anomaly_prob must be within [0, 1]");
  if (anomaly_prob >= 1.0 && max_reprints == 0)
    throw Error(Errc::invalid_config, "anomaly_prob = 1 requires a reprint cap");
  if (twin_period_s <= 0) throw Error(Errc::invalid_config, "twin_period_s must be > 0");
}

ScenarioReport run_scenario(const ScenarioConfig& cfg) {
  SimRunner runner(cfg);
  return runner.run();
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& base,
                                const std::vector<SchedulerKind>& schedulers,
                                const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  for (auto kind : schedulers) {
    for (auto seed : seeds) {
      ScenarioConfig cfg = base;
      cfg.scheduler = kind;
      cfg.seed = seed;
      auto rep = run_scenario(cfg);
      rows.push_back({rep.scheduler, rep.seed, rep.mean_makespan_s, rep.max_makespan_s,
                      rep.ppe_mean_makespan_s, rep.reprints});
    }
  }
  return rows;
}

double mean_of(const std::vector<SweepRow>& rows, SchedulerKind kind, bool ppe_only) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.scheduler != scheduler_kind_name(kind)) continue;
    sum += ppe_only ? r.ppe_mean_makespan_s : r.mean_makespan_s;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

void ScenarioReport::write_jobs_csv(std::ostream& out) const {
  out << "job_id,kind,created_s,started_s,finished_s,machine,reprints,makespan_s\n";
  char buf[256];
  for (const auto& j : jobs) {
    std::snprintf(buf, sizeof buf, "%llu,%s,%.3f,%.3f,%.3f,%d,%u,%.3f\n",
                  static_cast<unsigned long long>(j.id), j.ppe ? "ppe" : "normal", j.created_s,
                  j.started_s, j.finished_s, j.machine, j.reprints,
                  j.failed || j.finished_s < 0 ? -1.0 : j.makespan_s());
    out << buf;
  }
}

void ScenarioReport::write_summary_header(std::ostream& out) {
  out << "scheduler,seed,mean_makespan_s,max_makespan_s,normalized_mean,ppe_mean_makespan_s,"
         "reprints,failed,stalled\n";
}

void ScenarioReport::write_summary_row(std::ostream& out, double normalized_mean) const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%llu,%.3f,%.3f,%.6f,%.3f,%llu,%llu,%d\n", scheduler.c_str(),
                static_cast<unsigned long long>(seed), mean_makespan_s, max_makespan_s,
                normalized_mean, ppe_mean_makespan_s, static_cast<unsigned long long>(reprints),
                static_cast<unsigned long long>(failed_jobs), stalled ? 1 : 0);
  out << buf;
}

}  // namespace sdnator::fleet
