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

#ifndef SDNATOR_FLEET_HPP
#define SDNATOR_FLEET_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "sdnator/config.hpp"
#include "sdnator/schedulers.hpp"

namespace sdnator::fleet {

// Reserved key layout of the simulated manufacturing workflow:
//   fleet.meta.fleet            fleet facts (machine count, setup, anomaly p)
//   fleet.orders.batch          production orders from the job creator
//   fleet.sched.request         pull / reschedule requests from the fleet
//   fleet.sched.decision        scheduler placements (reply to orders/requests)
//   fleet.sched.ready           scheduler announces it is observing
//   fleet.twin.<m>.machine      machine-state twin facet
//   fleet.twin.<m>.queue        queue twin facet
//   fleet.twin.<m>.anomaly      anomaly twin facet

struct ScenarioConfig {
  SchedulerKind scheduler = SchedulerKind::dynamic;
  int machines = 8;
  std::uint64_t seed = 1;

  double setup_s = 300;        // per-job setup phase
  double maintenance_s = 900;  // after an anomaly
  double anomaly_prob = 0.0;   // per print attempt
  std::uint32_t max_reprints = 0;  // 0 = unbounded

  std::uint32_t normal_jobs = 100;
  std::uint32_t order_batch = 10;
  double order_interval_s = 8400;
  double normal_min_s = 1800;
  double normal_max_s = 7200;

  std::uint32_t ppe_jobs = 0;
  double ppe_duration_s = 1200;
  double ppe_inject_frac = 0.25;  // of the order-arrival span
  bool ppe_priority = true;       // dynamic's reconfigurable queue

  double twin_period_s = 60;
  bool twins_enabled = true;  // firewall experiments disable the DT app

  // Empty: spawn an in-process bus (+ coordinator) for the run.
  std::string bus_addr;
  std::string archive_addr;

  // Wall milliseconds per virtual second; 0 = free-running virtual time.
  double time_dilation_ms_per_s = 0;
  std::uint64_t barrier_timeout_ms = 15'000;

  static ScenarioConfig from_config(const Config& cfg);
  void validate() const;
};

struct JobRecord {
  std::uint64_t id = 0;
  bool ppe = false;
  double duration_s = 0;
  double created_s = 0;
  double started_s = -1;
  double finished_s = -1;
  int machine = -1;
  std::uint32_t reprints = 0;
  bool failed = false;  // hit the reprint cap

  double makespan_s() const { return finished_s - created_s; }
};

struct ScenarioReport {
  std::string scheduler;
  std::uint64_t seed = 0;
  std::vector<JobRecord> jobs;
  double mean_makespan_s = 0;
  double max_makespan_s = 0;
  double ppe_mean_makespan_s = 0;
  std::uint64_t reprints = 0;
  std::uint64_t failed_jobs = 0;
  double horizon_s = 0;  // virtual time at which the last job finished
  bool stalled = false;  // a barrier timed out (e.g. twins removed)

  void write_jobs_csv(std::ostream& out) const;
  static void write_summary_header(std::ostream& out);
  void write_summary_row(std::ostream& out, double normalized_mean) const;
};

// Runs one deterministic scenario: emulated printers advance virtual time in
// a discrete-event loop while twins, job creator and the scheduler run as
// real framework apps over the bus; the loop blocks at decision points until
// the scheduler's placements arrive.
ScenarioReport run_scenario(const ScenarioConfig& cfg);

struct SweepRow {
  std::string scheduler;
  std::uint64_t seed = 0;
  double mean_makespan_s = 0;
  double max_makespan_s = 0;
  double ppe_mean_makespan_s = 0;
  std::uint64_t reprints = 0;
};

std::vector<SweepRow> run_sweep(const ScenarioConfig& base,
                                const std::vector<SchedulerKind>& schedulers,
                                const std::vector<std::uint64_t>& seeds);

double mean_of(const std::vector<SweepRow>& rows, SchedulerKind kind, bool ppe_only = false);

}  // namespace sdnator::fleet

#endif  // SDNATOR_FLEET_HPP
