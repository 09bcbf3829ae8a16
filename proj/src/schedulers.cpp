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

#include "sdnator/schedulers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdnator/errors.hpp"

namespace sdnator::fleet {

SchedulerKind scheduler_kind_from_string(const std::string& s) {
  if (s == "decentralized") return SchedulerKind::decentralized;
  if (s == "baseline") return SchedulerKind::baseline;
  if (s == "fcfs") return SchedulerKind::fcfs;
  if (s == "dynamic") return SchedulerKind::dynamic;
  throw Error(Errc::invalid_config,
              "scheduler must be decentralized|baseline|fcfs|dynamic, got " + s);
}

const char* scheduler_kind_name(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::decentralized: return "decentralized";
    case SchedulerKind::baseline: return "baseline";
    case SchedulerKind::fcfs: return "fcfs";
    case SchedulerKind::dynamic: return "dynamic";
  }
  return "?";
}

std::vector<int> lpt_assign(const std::vector<double>& base_loads,
                            const std::vector<double>& setups,
                            const std::vector<double>& durations, double* makespan_out) {
  const std::size_t m = base_loads.size();
  std::vector<int> order(durations.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return durations[a] > durations[b]; });
  std::vector<double> loads = base_loads;
  std::vector<int> assign(durations.size(), 0);
  for (int j : order) {
    std::size_t best = 0;
    double best_load = loads[0] + setups[0] + durations[j];
    for (std::size_t i = 1; i < m; ++i) {
      double l = loads[i] + setups[i] + durations[j];
      if (l < best_load) {
        best_load = l;
        best = i;
      }
    }
    loads[best] = best_load;
    assign[j] = static_cast<int>(best);
  }
  if (makespan_out) {
    *makespan_out = *std::max_element(loads.begin(), loads.end());
  }
  return assign;
}

namespace {

struct BnB {
  const std::vector<double>& setups;
  const std::vector<double>& durations;
  std::vector<double> loads;
  std::vector<int> order;    // job indices, longest first
  std::vector<int> current;  // machine per depth
  std::vector<int> best;     // machine per job index
  double best_makespan;
  std::uint64_t nodes = 0;
  std::uint64_t node_budget;
  bool aborted = false;

  void dfs(std::size_t depth, double current_max, double remaining_work) {
    if (++nodes > node_budget) {
      aborted = true;
      return;
    }
    if (depth == order.size()) {
      if (current_max < best_makespan) {
        best_makespan = current_max;
        for (std::size_t i = 0; i < order.size(); ++i) best[order[i]] = current[i];
      }
      return;
    }
    // Even perfectly balanced, the remaining work keeps the makespan at
    // least at the average load.
    double avg_bound = (std::accumulate(loads.begin(), loads.end(), 0.0) + remaining_work) /
                       static_cast<double>(loads.size());
    if (std::max(current_max, avg_bound) >= best_makespan) return;

    double d = durations[static_cast<std::size_t>(order[depth])];
    for (std::size_t m = 0; m < loads.size(); ++m) {
      // Machines with identical state are interchangeable; branch once.
      bool dup = false;
      for (std::size_t k = 0; k < m && !dup; ++k)
        dup = loads[k] == loads[m] && setups[k] == setups[m];
      if (dup) continue;
      double add = setups[m] + d;
      double nl = loads[m] + add;
      if (nl >= best_makespan) continue;
      loads[m] = nl;
      current[depth] = static_cast<int>(m);
      dfs(depth + 1, std::max(current_max, nl), remaining_work - add);
      loads[m] = nl - add;
      if (aborted) return;
    }
  }
};

}  // namespace

MinMaxResult solve_min_max(const std::vector<double>& base_loads,
                           const std::vector<double>& setups,
                           const std::vector<double>& durations, const MinMaxOptions& opts) {
  if (base_loads.empty() || base_loads.size() != setups.size())
    throw Error(Errc::invalid_config, "min-max solver needs matching machine vectors");
  MinMaxResult res;
  const std::size_t m = base_loads.size();
  const std::size_t j = durations.size();

  double lpt_makespan = 0;
  auto lpt = lpt_assign(base_loads, setups, durations, &lpt_makespan);
  if (j == 0) {
    res.machine_of = std::move(lpt);
    res.makespan = *std::max_element(base_loads.begin(), base_loads.end());
    res.exact = true;
    res.lower_bound = res.makespan;
    return res;
  }

  double min_setup = *std::min_element(setups.begin(), setups.end());
  double min_base = *std::min_element(base_loads.begin(), base_loads.end());
  double max_base = *std::max_element(base_loads.begin(), base_loads.end());
  double total = std::accumulate(base_loads.begin(), base_loads.end(), 0.0);
  double longest = 0;
  for (double d : durations) {
    total += d + min_setup;
    longest = std::max(longest, d + min_setup);
  }
  res.lower_bound = std::max({total / static_cast<double>(m), longest + min_base, max_base});

  if (j * m > opts.exact_cell_limit) {
    res.machine_of = std::move(lpt);
    res.makespan = lpt_makespan;
    res.exact = false;
    res.bound_gap = res.lower_bound > 0 ? (res.makespan - res.lower_bound) / res.lower_bound : 0.0;
    return res;
  }

  BnB bnb{setups, durations,      base_loads, {}, std::vector<int>(j, 0), lpt, lpt_makespan,
          0,      opts.node_budget};
  bnb.order.resize(j);
  std::iota(bnb.order.begin(), bnb.order.end(), 0);
  std::stable_sort(bnb.order.begin(), bnb.order.end(),
                   [&](int a, int b) { return durations[a] > durations[b]; });
  double remaining = 0;
  for (double d : durations) remaining += d + min_setup;
  bnb.dfs(0, max_base, remaining);

  res.machine_of = std::move(bnb.best);
  res.makespan = bnb.best_makespan;
  res.nodes = bnb.nodes;
  res.exact = !bnb.aborted;
  if (!res.exact)
    res.bound_gap = res.lower_bound > 0 ? (res.makespan - res.lower_bound) / res.lower_bound : 0.0;
  return res;
}

int fcfs_pick(const std::vector<int>& job_counts) {
  int best = 0;
  for (std::size_t i = 1; i < job_counts.size(); ++i)
    if (job_counts[i] < job_counts[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace sdnator::fleet
