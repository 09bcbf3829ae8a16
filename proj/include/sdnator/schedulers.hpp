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

#ifndef SDNATOR_SCHEDULERS_HPP
#define SDNATOR_SCHEDULERS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace sdnator::fleet {

enum class SchedulerKind { decentralized, baseline, fcfs, dynamic };

SchedulerKind scheduler_kind_from_string(const std::string& s);
const char* scheduler_kind_name(SchedulerKind k);

struct MinMaxOptions {
  // Exact branch-and-bound up to jobs*machines cells; LPT beyond.
  std::uint64_t exact_cell_limit = 80;
  // Safety valve for adversarial exact instances; the incumbent is returned
  // with its bound gap when exhausted.
  std::uint64_t node_budget = 4'000'000;
};

struct MinMaxResult {
  std::vector<int> machine_of;  // one machine index per job
  double makespan = 0;
  bool exact = false;
  double lower_bound = 0;
  double bound_gap = 0;  // (makespan - lower_bound) / lower_bound when inexact
  std::uint64_t nodes = 0;
};

// Longest-processing-time greedy: jobs in descending duration, each to the
// machine whose resulting load is smallest.
std::vector<int> lpt_assign(const std::vector<double>& base_loads,
                            const std::vector<double>& setups,
                            const std::vector<double>& durations, double* makespan_out = nullptr);

// min max_m ( base_load_m + sum_{j -> m} (setup_m + duration_j) ), the
// assignment program behind the dynamic scheduler. Exact via depth-first
// branch-and-bound with an LPT incumbent when jobs*machines fits the limit.
MinMaxResult solve_min_max(const std::vector<double>& base_loads,
                           const std::vector<double>& setups,
                           const std::vector<double>& durations, const MinMaxOptions& opts = {});

// FCFS pick: machine with the fewest jobs on it (queued + running + already
// assigned this round); ties to the lowest machine id.
int fcfs_pick(const std::vector<int>& job_counts);

}  // namespace sdnator::fleet

#endif  // SDNATOR_SCHEDULERS_HPP
