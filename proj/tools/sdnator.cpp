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

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sdnator/bench.hpp"
#include "sdnator/fleet.hpp"

namespace {

using namespace sdnator;

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

void install_signals() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

void wait_for_signal() {
  while (!g_stop) sleep_us(100'000);
}

Config load_config(const std::string& path) {
  if (path.empty()) return Config{};
  return Config::load_file(path);
}

void write_port_file(const std::string& path, const net::Addr& addr) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::trunc);
  out << addr.to_string() << "\n";
}

struct BenchFlags {
  std::string config_path;
  std::string bus_addr, archive_addr;
  std::string out_csv;
  std::string pair_name = "p0";
  std::string archive_mode = "off";
  bench::BenchConfig cfg;

  void add_common(CLI::App* cmd, bool with_pairs) {
    cmd->add_option("--config", config_path, "shared config file")->envname("SDNATOR_CONFIG");
    cmd->add_option("--bus", bus_addr, "attach to a running Data Updates bus (host:port)")
        ->envname("SDNATOR_BUS");
    cmd->add_option("--archive-addr", archive_addr, "attach to a running Data Archives store")
        ->envname("SDNATOR_ARCHIVE");
    cmd->add_option("--msg-size", cfg.msg_size, "message payload bytes");
    cmd->add_option("--updates-batch", cfg.updates_batch, "Data Updates batch size");
    cmd->add_option("--archive-batch", cfg.archive_batch, "Data Archives batch size");
    cmd->add_option("--archive", archive_mode, "mirror writes to Data Archives (on|off)");
    if (with_pairs) cmd->add_option("--pairs", cfg.pairs, "number of producer/consumer pairs");
    cmd->add_option("--latency-ms", cfg.latency_ms, "injected one-way latency (ms)");
    cmd->add_option("--duration", cfg.duration_s, "measurement duration (s)");
    cmd->add_option("--warmup", cfg.warmup_s, "warmup excluded from rates (s)");
    cmd->add_option("--seed", cfg.seed, "payload randomization seed");
    cmd->add_option("--out", out_csv, "CSV output path (default stdout)");
  }

  void finish() {
    cfg.archive_on = archive_mode == "on";
    if (archive_mode != "on" && archive_mode != "off")
      throw Error(Errc::bad_config, "--archive must be on or off");
    if (cfg.duration_s > 0 && cfg.warmup_s >= cfg.duration_s)
      throw Error(Errc::invalid_config, "duration must exceed warmup");
  }

  // Attach to the given endpoints or spin up an in-process stack.
  std::unique_ptr<bench::Stack> stack;
  std::string tmp_dir;
  bench::Endpoints endpoints() {
    if (!bus_addr.empty()) {
      if (cfg.archive_on && archive_addr.empty())
        throw Error(Errc::bad_config, "--archive on needs --archive-addr with --bus");
      return {bus_addr, archive_addr};
    }
    bench::StackOptions sopts;
    sopts.archive = cfg.archive_on;
    if (cfg.archive_on) {
      tmp_dir = "/tmp/sdnator-bench-" + std::to_string(::getpid());
      std::filesystem::create_directories(tmp_dir);
      sopts.archive_dir = tmp_dir;
    }
    stack = std::make_unique<bench::Stack>(sopts);
    return {stack->bus_addr(), stack->archive_addr()};
  }

  ~BenchFlags() {
    stack.reset();
    if (!tmp_dir.empty()) {
      std::error_code ec;
      std::filesystem::remove_all(tmp_dir, ec);
    }
  }

  std::ostream& open_out(std::ofstream& file) {
    if (out_csv.empty()) return std::cout;
    file.open(out_csv, std::ios::trunc);
    if (!file) throw Error(Errc::bad_config, "cannot open " + out_csv);
    return file;
  }
};

int cmd_run_bus(const std::string& config_path, const std::string& listen,
                const std::string& port_file) {
  auto cfg = load_config(config_path);
  auto opts = bus::BusOptions::from_config(cfg);
  if (!listen.empty()) opts.net.listen = net::Addr::parse(listen);
  bus::BusServer server;
  auto bound = server.start(opts);
  write_port_file(port_file, bound);
  std::cerr << "data-updates bus listening on " << bound.to_string() << "\n";
  install_signals();
  wait_for_signal();
  server.stop();
  std::cerr << "bus: published " << server.stats().published.load() << ", delivered "
            << server.stats().delivered.load() << ", dropped " << server.dropped() << "\n";
  return 0;
}

int cmd_run_store(const std::string& config_path, const std::string& listen,
                  const std::string& dir, const std::string& port_file) {
  auto cfg = load_config(config_path);
  if (!dir.empty()) cfg.set("archive.dir", dir);
  auto opts = store::StoreServerOptions::from_config(cfg);
  if (!listen.empty()) opts.net.listen = net::Addr::parse(listen);
  store::StoreServer server;
  auto bound = server.start(opts);
  write_port_file(port_file, bound);
  std::cerr << "data-archives store listening on " << bound.to_string() << " (dir "
            << opts.store.dir << ")\n";
  install_signals();
  wait_for_signal();
  std::cerr << "store: " << server.engine()->record_count() << " records\n";
  server.stop();
  return 0;
}

int cmd_run_coordinator(const std::string& config_path, const std::string& bus,
                        const std::string& archive, bool no_recover) {
  auto cfg = load_config(config_path);
  coord::CoordinatorOptions opts;
  opts.due = due::DueConfig::from_config(cfg);
  if (!bus.empty()) opts.due.bus_addr = bus;
  if (!archive.empty()) opts.due.archive_addr = archive;
  opts.recover = !no_recover && !opts.due.archive_addr.empty();
  auto coordinator = coord::Coordinator::start(opts);
  std::cerr << "coordinator up (instance " << coordinator->identity().instance.to_string()
            << ")\n";
  install_signals();
  wait_for_signal();
  coordinator->stop();
  return 0;
}

int cmd_run_sim(const std::string& config_path, const std::string& scheduler, std::int64_t seed,
                std::int64_t machines, const std::string& out_dir) {
  auto cfg = load_config(config_path);
  auto scenario = fleet::ScenarioConfig::from_config(cfg);
  if (!scheduler.empty()) scenario.scheduler = fleet::scheduler_kind_from_string(scheduler);
  if (seed >= 0) scenario.seed = static_cast<std::uint64_t>(seed);
  if (machines > 0) scenario.machines = static_cast<int>(machines);
  auto report = fleet::run_scenario(scenario);

  std::filesystem::create_directories(out_dir);
  std::string base = out_dir + "/" + report.scheduler + "-seed" + std::to_string(report.seed);
  {
    std::ofstream jobs(base + "-jobs.csv", std::ios::trunc);
    report.write_jobs_csv(jobs);
  }
  {
    std::ofstream sum(base + "-summary.csv", std::ios::trunc);
    fleet::ScenarioReport::write_summary_header(sum);
    report.write_summary_row(sum, 1.0);
  }
  std::cout << "scheduler=" << report.scheduler << " seed=" << report.seed
            << " mean_makespan_s=" << report.mean_makespan_s
            << " max_makespan_s=" << report.max_makespan_s
            << " ppe_mean_makespan_s=" << report.ppe_mean_makespan_s
            << " reprints=" << report.reprints << (report.stalled ? " STALLED" : "") << "\n";
  if (report.stalled) return 4;
  return 0;
}

int cmd_bench_latency(BenchFlags& flags) {
  flags.finish();
  auto ep = flags.endpoints();
  std::ofstream file;
  auto& out = flags.open_out(file);
  out << "mode,msg_size,updates_batch,archive,archive_batch,latency_ms,samples,p50_us,p95_us,"
         "p99_us,sent,delivered\n";
  if (flags.cfg.duration_s <= 0) return 0;
  auto res = bench::run_latency(flags.cfg, ep);
  out << "latency," << flags.cfg.msg_size << "," << flags.cfg.updates_batch << ","
      << (flags.cfg.archive_on ? "on" : "off") << "," << flags.cfg.archive_batch << ","
      << flags.cfg.latency_ms << "," << res.samples << "," << res.p50_us << "," << res.p95_us
      << "," << res.p99_us << "," << res.sent << "," << res.delivered << "\n";
  std::cerr << "p50 " << res.p50_us << " us, p95 " << res.p95_us << " us, p99 " << res.p99_us
            << " us over " << res.samples << " samples; zero_loss=" << res.zero_loss << "\n";
  return res.zero_loss ? 0 : 5;
}

int cmd_bench_throughput(BenchFlags& flags) {
  flags.finish();
  auto ep = flags.endpoints();
  std::ofstream file;
  auto& out = flags.open_out(file);
  out << "mode,msg_size,updates_batch,archive,archive_batch,latency_ms,duration_s,warmup_s,sent,"
         "delivered,archived,msgs_per_s\n";
  if (flags.cfg.duration_s <= 0) return 0;
  auto res = bench::run_throughput(flags.cfg, ep);
  out << "throughput," << flags.cfg.msg_size << "," << flags.cfg.updates_batch << ","
      << (flags.cfg.archive_on ? "on" : "off") << "," << flags.cfg.archive_batch << ","
      << flags.cfg.latency_ms << "," << flags.cfg.duration_s << "," << flags.cfg.warmup_s << ","
      << res.sent << "," << res.delivered << "," << res.archived << "," << res.msgs_per_s << "\n";
  std::cerr << res.msgs_per_s << " msgs/s steady state; zero_loss=" << res.zero_loss << "\n";
  return res.zero_loss ? 0 : 5;
}

int cmd_bench_scale(BenchFlags& flags) {
  flags.finish();
  auto ep = flags.endpoints();
  std::ofstream file;
  auto& out = flags.open_out(file);
  out << "mode,pairs,latency_ms,msg_size,updates_batch,pair,msgs_per_s,sent,delivered,cov,"
         "aggregate_msgs_per_s,single_pair_msgs_per_s\n";
  if (flags.cfg.duration_s <= 0) return 0;
  auto res = bench::run_scale(flags.cfg, ep, bench::default_worker_exe());
  for (std::size_t i = 0; i < res.per_pair.size(); ++i) {
    const auto& p = res.per_pair[i];
    out << "scale," << flags.cfg.pairs << "," << flags.cfg.latency_ms << "," << flags.cfg.msg_size
        << "," << flags.cfg.updates_batch << "," << i << "," << p.msgs_per_s << "," << p.sent
        << "," << p.delivered << ",,,\n";
  }
  out << "scale," << flags.cfg.pairs << "," << flags.cfg.latency_ms << "," << flags.cfg.msg_size
      << "," << flags.cfg.updates_batch << ",-1,,,," << res.cov << ","
      << res.aggregate_msgs_per_s << "," << res.single_pair_msgs_per_s << "\n";
  std::cerr << "aggregate " << res.aggregate_msgs_per_s << " msgs/s over " << flags.cfg.pairs
            << " pairs (cov " << res.cov << ", single-pair " << res.single_pair_msgs_per_s
            << "); zero_loss=" << res.zero_loss << "\n";
  return res.zero_loss ? 0 : 5;
}

int cmd_bench_pair_worker(BenchFlags& flags) {
  flags.finish();
  if (flags.bus_addr.empty()) throw Error(Errc::bad_config, "pair-worker requires --bus");
  bench::Endpoints ep{flags.bus_addr, flags.archive_addr};
  auto res = bench::run_pair(flags.cfg, ep, flags.pair_name);
  std::ofstream file;
  auto& out = flags.open_out(file);
  out << res.msgs_per_s << "," << res.sent << "," << res.delivered << "\n";
  return 0;
}

int cmd_status(const std::string& config_path, const std::string& bus, const std::string& app) {
  auto cfg = load_config(config_path);
  auto due_cfg = due::DueConfig::from_config(cfg);
  if (!bus.empty()) due_cfg.bus_addr = bus;
  due_cfg.archive_addr.clear();
  AppIdentity id;
  id.app_id = "statuscli";
  id.roles = wire::kRoleConsumer;
  auto session = due::Session::init(id, Manifest{}, due_cfg);
  auto reply =
      session->query_status(app.empty() ? std::nullopt : std::optional<std::string>(app));
  for (const auto& a : reply.apps) {
    std::cout << a.app_id;
    if (a.active_instance) std::cout << " active=" << a.active_instance->to_string();
    std::cout << "\n";
    for (const auto& inst : a.instances) {
      std::cout << "  " << inst.instance.to_string() << " " << instance_status_name(inst.status)
                << " interests=" << inst.manifest.interests.size()
                << " capabilities=" << inst.manifest.capabilities.size() << "\n";
    }
  }
  for (const auto& u : reply.unmet)
    std::cout << "unmet " << u.pattern << " ("
              << (u.reason == control::UnmetReason::no_producer ? "NoProducer"
                                                                : "FrequencyExceedsCapacity")
              << ")\n";
  session->close();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SDNator: data-driven centralized control for cyber-physical systems"};
  app.require_subcommand(1);

  // run ----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run a service or the fleet simulator");
  run->require_subcommand(1);
  std::string run_config, run_listen, run_port_file, run_dir, run_bus, run_archive;
  bool no_recover = false;

  auto* run_bus_cmd = run->add_subcommand("bus", "Data Updates publish/subscribe service");
  run_bus_cmd->add_option("--config", run_config, "config file")->envname("SDNATOR_CONFIG");
  run_bus_cmd->add_option("--listen", run_listen, "listen address host:port");
  run_bus_cmd->add_option("--port-file", run_port_file, "write the bound address here");

  auto* run_store_cmd = run->add_subcommand("store", "Data Archives persistent store");
  run_store_cmd->add_option("--config", run_config, "config file")->envname("SDNATOR_CONFIG");
  run_store_cmd->add_option("--listen", run_listen, "listen address host:port");
  run_store_cmd->add_option("--dir", run_dir, "archive directory");
  run_store_cmd->add_option("--port-file", run_port_file, "write the bound address here");

  auto* run_coord_cmd = run->add_subcommand("coordinator", "registration/consolidation app");
  run_coord_cmd->add_option("--config", run_config, "config file")->envname("SDNATOR_CONFIG");
  run_coord_cmd->add_option("--bus", run_bus, "bus address")->envname("SDNATOR_BUS");
  run_coord_cmd->add_option("--archive", run_archive, "archive address")->envname("SDNATOR_ARCHIVE");
  run_coord_cmd->add_flag("--no-recover", no_recover, "skip archive checkpoint recovery");

  std::string sim_scheduler, sim_out = ".";
  std::int64_t sim_seed = -1, sim_machines = 0;
  auto* run_sim_cmd = run->add_subcommand("sim", "manufacturing fleet scenario");
  run_sim_cmd->add_option("--config", run_config, "scenario config file")
      ->envname("SDNATOR_CONFIG");
  run_sim_cmd->add_option("--scheduler", sim_scheduler,
                          "decentralized|baseline|fcfs|dynamic (overrides config)");
  run_sim_cmd->add_option("--seed", sim_seed, "scenario seed (overrides config)");
  run_sim_cmd->add_option("--machines", sim_machines, "fleet size (overrides config)");
  run_sim_cmd->add_option("--out", sim_out, "directory for jobs/summary CSVs");

  // bench --------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "performance harness");
  bench_cmd->require_subcommand(1);
  BenchFlags lat_flags, tput_flags, scale_flags, worker_flags;
  auto* lat = bench_cmd->add_subcommand("latency", "end-to-end latency distribution");
  lat_flags.add_common(lat, false);
  lat->add_option("--burst-interval-ms", lat_flags.cfg.burst_interval_ms,
                  "pacing between bursts");
  auto* tput = bench_cmd->add_subcommand("throughput", "steady-state message rate");
  tput_flags.add_common(tput, false);
  auto* scale = bench_cmd->add_subcommand("scale", "many pairs as separate processes");
  scale_flags.add_common(scale, true);
  auto* worker = bench_cmd->add_subcommand("pair-worker", "internal: one scale pair");
  worker_flags.add_common(worker, false);
  worker->add_option("--pair-name", worker_flags.pair_name, "unique pair name");

  // status -------------------------------------------------------------
  std::string status_config, status_bus, status_app;
  auto* status = app.add_subcommand("status", "query app statuses from the coordinator");
  status->add_option("--config", status_config, "config file")->envname("SDNATOR_CONFIG");
  status->add_option("--bus", status_bus, "bus address")->envname("SDNATOR_BUS");
  status->add_option("--app", status_app, "restrict to one app id");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_bus_cmd->parsed()) return cmd_run_bus(run_config, run_listen, run_port_file);
    if (run_store_cmd->parsed())
      return cmd_run_store(run_config, run_listen, run_dir, run_port_file);
    if (run_coord_cmd->parsed())
      return cmd_run_coordinator(run_config, run_bus, run_archive, no_recover);
    if (run_sim_cmd->parsed())
      return cmd_run_sim(run_config, sim_scheduler, sim_seed, sim_machines, sim_out);
    if (lat->parsed()) return cmd_bench_latency(lat_flags);
    if (tput->parsed()) return cmd_bench_throughput(tput_flags);
    if (scale->parsed()) return cmd_bench_scale(scale_flags);
    if (worker->parsed()) return cmd_bench_pair_worker(worker_flags);
    if (status->parsed()) return cmd_status(status_config, status_bus, status_app);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::bad_config: return 2;
      case Errc::port_in_use: return 3;
      case Errc::invalid_config: return 2;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
