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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "sdnator/bench.hpp"
#include "sdnator/coordinator.hpp"
#include "testutil.hpp"

using namespace sdnator;

namespace {

Manifest mk_manifest(std::vector<std::pair<std::string, std::optional<double>>> interests,
                     std::vector<std::pair<std::string, std::optional<double>>> capabilities) {
  Manifest m;
  for (auto& [p, hz] : interests) m.interests.push_back({KeyPattern::parse(p), hz});
  for (auto& [k, hz] : capabilities) m.capabilities.push_back({DataKey::parse(k), hz, false});
  return m;
}

// Straight-line reference implementation of the consolidation rule, written
// independently of coord::consolidate (string-level matching, no shared
// helpers beyond the key grammar).
coord::ConsolidationResult reference_consolidate(const std::map<std::string, Manifest>& ms) {
  coord::ConsolidationResult out;
  // Collect every interest with its pattern.
  struct I {
    KeyPattern pat;
    std::optional<double> hz;
    bool hit = false;
  };
  std::vector<I> all;
  for (const auto& [app, m] : ms)
    for (const auto& i : m.interests) all.push_back({i.pattern, i.desired_hz});

  for (const auto& [app, m] : ms) {
    if (m.capabilities.empty()) continue;
    AssignmentSet set;
    for (const auto& cap : m.capabilities) {
      bool matched = false;
      bool any_rate = false;
      double top = 0;
      for (auto& i : all) {
        if (!i.pat.matches(cap.key)) continue;
        matched = true;
        i.hit = true;
        if (i.hz) {
          any_rate = true;
          top = std::max(top, *i.hz);
        }
      }
      if (!matched) continue;
      Assignment a;
      if (!any_rate) {
        a.hz = cap.max_hz;
      } else if (cap.max_hz && top > *cap.max_hz) {
        a.hz = *cap.max_hz;
        for (const auto& i : all)
          if (i.hz && *i.hz > *cap.max_hz && i.pat.matches(cap.key))
            out.unmet.push_back(
                {i.pat.render(), control::UnmetReason::frequency_exceeds_capacity});
      } else {
        a.hz = top;
      }
      set.entries[cap.key.render()] = a;
    }
    out.per_app[app] = set;
  }
  for (const auto& i : all)
    if (!i.hit) out.unmet.push_back({i.pat.render(), control::UnmetReason::no_producer});
  std::sort(out.unmet.begin(), out.unmet.end());
  out.unmet.erase(std::unique(out.unmet.begin(), out.unmet.end()), out.unmet.end());
  return out;
}

}  // namespace

TEST_CASE("consolidation: two consumers, capacity-bounded producer") {
  std::map<std::string, Manifest> ms;
  ms["x"] = mk_manifest({{"sensors.temp", 10.0}}, {});
  ms["y"] = mk_manifest({{"sensors.temp", 5.0}}, {});
  ms["p"] = mk_manifest({}, {{"sensors.temp", 20.0}});
  auto r = coord::consolidate(ms);
  REQUIRE(r.per_app.count("p"));
  REQUIRE(r.per_app["p"].entries.count("sensors.temp"));
  CHECK(*r.per_app["p"].entries["sensors.temp"].hz == doctest::Approx(10.0));
  CHECK(r.unmet.empty());
}

TEST_CASE("consolidation: demand above capacity clamps and is reported") {
  std::map<std::string, Manifest> ms;
  ms["x"] = mk_manifest({{"sensors.temp", 50.0}}, {});
  ms["p"] = mk_manifest({}, {{"sensors.temp", 20.0}});
  auto r = coord::consolidate(ms);
  CHECK(*r.per_app["p"].entries["sensors.temp"].hz == doctest::Approx(20.0));
  REQUIRE(r.unmet.size() == 1);
  CHECK(r.unmet[0].reason == control::UnmetReason::frequency_exceeds_capacity);
  CHECK(r.unmet[0].pattern == "sensors.temp");
}

TEST_CASE("consolidation: gates, unconstrained demand, NoProducer, dual producers") {
  std::map<std::string, Manifest> ms;
  ms["p"] = mk_manifest({}, {{"a.b", 7.0}, {"a.orphan", std::nullopt}});
  ms["q"] = mk_manifest({}, {{"a.b", std::nullopt}});
  ms["c"] = mk_manifest({{"a.b", std::nullopt}, {"ghost.**", 3.0}}, {});
  auto r = coord::consolidate(ms);
  // Unconstrained interest: producer cap applies (or unbounded without one).
  CHECK(*r.per_app["p"].entries["a.b"].hz == doctest::Approx(7.0));
  CHECK_FALSE(r.per_app["q"].entries["a.b"].hz.has_value());
  // Nobody asked for a.orphan: no assignment at all.
  CHECK(r.per_app["p"].entries.count("a.orphan") == 0);
  // Both producers of a.b got assignments.
  CHECK(r.per_app["q"].entries.count("a.b") == 1);
  REQUIRE(r.unmet.size() == 1);
  CHECK(r.unmet[0].pattern == "ghost.**");
  CHECK(r.unmet[0].reason == control::UnmetReason::no_producer);
}

TEST_CASE("consolidation is deterministic and matches the reference on random manifests") {
  SplitMix64 rng(2024);
  std::vector<std::string> key_pool;
  for (int i = 0; i < 10; ++i)
    key_pool.push_back("dom" + std::to_string(i % 3) + ".k" + std::to_string(i));
  for (int trial = 0; trial < 300; ++trial) {
    std::map<std::string, Manifest> ms;
    std::size_t apps = 1 + rng.below(5);
    for (std::size_t a = 0; a < apps; ++a) {
      Manifest m;
      std::size_t caps = rng.below(4);
      for (std::size_t c = 0; c < caps; ++c) {
        Capability cap;
        cap.key = DataKey::parse(key_pool[rng.below(key_pool.size())]);
        if (rng.bernoulli(0.6)) cap.max_hz = 1.0 + static_cast<double>(rng.below(50));
        if (std::any_of(m.capabilities.begin(), m.capabilities.end(),
                        [&](const Capability& e) { return e.key == cap.key; }))
          continue;
        m.capabilities.push_back(cap);
      }
      std::size_t ints = rng.below(4);
      for (std::size_t i = 0; i < ints; ++i) {
        Interest in;
        switch (rng.below(3)) {
          case 0: in.pattern = KeyPattern::parse(key_pool[rng.below(key_pool.size())]); break;
          case 1: in.pattern = KeyPattern::parse("dom" + std::to_string(rng.below(3)) + ".*"); break;
          default: in.pattern = KeyPattern::parse("dom" + std::to_string(rng.below(4)) + ".**");
        }
        if (rng.bernoulli(0.7)) in.desired_hz = 1.0 + static_cast<double>(rng.below(80));
        m.interests.push_back(in);
      }
      ms["app" + std::to_string(a)] = std::move(m);
    }
    CAPTURE(trial);
    auto got = coord::consolidate(ms);
    auto want = reference_consolidate(ms);
    REQUIRE(got.per_app == want.per_app);
    REQUIRE(got.unmet == want.unmet);
    CHECK(coord::consolidate(ms) == got);  // deterministic re-run
  }
}

// A raw control-plane client: registers forged apps and beats their hearts,
// giving tests precise control over liveness without full DUE sessions.
namespace {

struct FakeApp {
  std::string app_id;
  Uuid instance = Uuid::random();
  std::unique_ptr<net::FramedClient> client;
  testutil::DeliverLog assignments;
  testutil::DeliverLog replies;
  std::uint64_t assign_sub = 0;

  FakeApp(const std::string& bus_addr, std::string app, const Manifest& manifest) : app_id(app) {
    net::ClientOptions opts;
    opts.on_deliver = [this](wire::Deliver&& d) {
      if (d.key.rfind("sdnator.assignment.", 0) == 0)
        assignments.push(std::move(d));
      else
        replies.push(std::move(d));
    };
    client = std::make_unique<net::FramedClient>(net::Addr::parse(bus_addr),
                                                 wire::Hello{wire::kProtocolVersion, app_id,
                                                             instance, 3},
                                                 opts);
    client->subscribe(control::register_reply_key(instance));
    assign_sub = client->subscribe(control::assignment_key(app_id));
    control::RegistrationRequest req;
    req.app_id = app_id;
    req.instance = instance;
    req.roles = 3;
    req.reply_key = control::register_reply_key(instance);
    req.manifest = manifest;
    std::vector<wire::Envelope> batch;
    batch.push_back({control::kRegisterRequestKey, control::encode_registration_request(req), 0});
    client->publish(std::move(batch));
  }

  control::RegistrationReply await_reply() {
    REQUIRE(replies.wait_for_count(1));
    auto items = replies.snapshot();
    return control::decode_registration_reply(items.back().value);
  }

  void beat(control::HeartbeatStatus status) {
    control::HeartbeatMsg hb;
    hb.app_id = app_id;
    hb.instance = instance;
    hb.status = status;
    std::vector<wire::Envelope> batch;
    batch.push_back(
        {control::heartbeat_key(app_id, instance), control::encode_heartbeat(hb), 0});
    client->publish(std::move(batch));
  }
};

}  // namespace

TEST_CASE("registration reply carries assignments; duplicate instance ids are rejected") {
  bench::Stack stack;
  FakeApp consumer(stack.bus_addr(), "consumer", mk_manifest({{"feed.x", 4.0}}, {}));
  REQUIRE(consumer.await_reply().ok);
  FakeApp producer(stack.bus_addr(), "producer", mk_manifest({}, {{"feed.x", 9.0}}));
  auto reply = producer.await_reply();
  REQUIRE(reply.ok);
  CHECK(reply.assignment.active_instance == producer.instance);
  REQUIRE(reply.assignment.assignments.entries.count("feed.x"));
  CHECK(*reply.assignment.assignments.entries["feed.x"].hz == doctest::Approx(4.0));

  // Same instance uuid under a different app id: DuplicateInstanceId.
  control::RegistrationRequest req;
  req.app_id = "thief";
  req.instance = producer.instance;
  req.roles = 3;
  req.reply_key = control::register_reply_key(producer.instance);
  testutil::DeliverLog log;
  net::ClientOptions opts;
  opts.on_deliver = [&](wire::Deliver&& d) { log.push(std::move(d)); };
  net::FramedClient watcher(net::Addr::parse(stack.bus_addr()),
                            wire::Hello{wire::kProtocolVersion, "watcher", Uuid::random(), 3},
                            opts);
  watcher.subscribe(req.reply_key);
  std::vector<wire::Envelope> batch;
  batch.push_back({control::kRegisterRequestKey, control::encode_registration_request(req), 0});
  watcher.publish(std::move(batch));
  REQUIRE(log.wait_for_count(1));
  auto rep = control::decode_registration_reply(log.snapshot().back().value);
  CHECK_FALSE(rep.ok);
  CHECK(rep.error_code == static_cast<std::uint16_t>(Errc::duplicate_instance));
  watcher.close();
}

TEST_CASE("heartbeat state machine: idle stays healthy, offline and timeout fail over") {
  bench::StackOptions sopts;
  sopts.heartbeat_interval_us = 100'000;  // 100 ms beat for a fast test
  bench::Stack stack(sopts);

  // A real session keeps the consumer side alive with automatic heartbeats.
  due::DueConfig ccfg;
  ccfg.bus_addr = stack.bus_addr();
  ccfg.heartbeat_interval_us = 100'000;
  auto consumer = due::Session::init({"watcherapp", Uuid::random(), wire::kRoleConsumer},
                                     mk_manifest({{"k.x", std::nullopt}}, {}), ccfg);
  FakeApp a(stack.bus_addr(), "prod", mk_manifest({}, {{"k.x", std::nullopt}}));
  a.await_reply();
  FakeApp b(stack.bus_addr(), "prod", mk_manifest({}, {{"k.x", std::nullopt}}));
  b.await_reply();

  auto active_of = [&]() -> std::optional<Uuid> {
    auto snap = stack.coordinator().snapshot("prod");
    if (!snap.ok || snap.apps.empty()) return std::nullopt;
    return snap.apps[0].active_instance;
  };
  REQUIRE(active_of().has_value());
  Uuid first = *active_of();
  CHECK((first == a.instance || first == b.instance));

  // IDLE heartbeats are healthy: no failover.
  FakeApp& act = (first == a.instance) ? a : b;
  FakeApp& standby = (first == a.instance) ? b : a;
  for (int i = 0; i < 3; ++i) {
    act.beat(control::HeartbeatStatus::idle);
    standby.beat(control::HeartbeatStatus::online);
    sleep_us(30'000);
  }
  CHECK(*active_of() == act.instance);

  // Explicit OFFLINE fails over to the standby within the event handling.
  act.beat(control::HeartbeatStatus::offline);
  REQUIRE(testutil::eventually([&] { return active_of() == standby.instance; }, 3'000));

  // The standby now goes silent: the sweep marks it unresponsive and, with
  // no healthy instance left, the key becomes unmet NoProducer.
  REQUIRE(testutil::eventually(
      [&] {
        auto snap = stack.coordinator().snapshot("prod");
        if (!snap.ok) return false;
        for (const auto& u : snap.unmet)
          if (u.pattern == "k.x" && u.reason == control::UnmetReason::no_producer) return true;
        return false;
      },
      5'000));
  auto snap = stack.coordinator().snapshot("prod");
  int unresponsive = 0, offline = 0;
  for (const auto& inst : snap.apps[0].instances) {
    if (inst.status == InstanceStatus::unresponsive) ++unresponsive;
    if (inst.status == InstanceStatus::offline) ++offline;
  }
  CHECK(unresponsive == 1);
  CHECK(offline == 1);
  CHECK_FALSE(snap.apps[0].active_instance.has_value());

  // A fresh heartbeat resurrects the silent instance (never without one).
  standby.beat(control::HeartbeatStatus::online);
  REQUIRE(testutil::eventually([&] { return active_of() == standby.instance; }, 3'000));
  consumer->close();
}

TEST_CASE("failover selection is uniform across healthy instances") {
  bench::StackOptions sopts;
  sopts.heartbeat_interval_us = 2'000'000;  // long timeout: liveness via explicit beats
  bench::Stack stack(sopts);
  FakeApp consumer(stack.bus_addr(), "cons", mk_manifest({{"f.x", std::nullopt}}, {}));
  consumer.await_reply();

  std::vector<std::unique_ptr<FakeApp>> instances;
  for (int i = 0; i < 4; ++i) {
    instances.push_back(
        std::make_unique<FakeApp>(stack.bus_addr(), "prod", mk_manifest({}, {{"f.x", std::nullopt}})));
    instances.back()->await_reply();
  }
  auto active_of = [&]() -> Uuid {
    auto snap = stack.coordinator().snapshot("prod");
    REQUIRE(snap.apps[0].active_instance.has_value());
    return *snap.apps[0].active_instance;
  };
  std::map<Uuid, int> wins;
  Uuid current = active_of();
  for (int round = 0; round < 300; ++round) {
    // Keep everyone fresh, then kill the active; a random healthy instance
    // of the remaining 3 wins.
    FakeApp* act = nullptr;
    for (auto& inst : instances) {
      inst->beat(control::HeartbeatStatus::online);
      if (inst->instance == current) act = inst.get();
    }
    consumer.beat(control::HeartbeatStatus::online);
    REQUIRE(act != nullptr);
    REQUIRE(testutil::eventually([&] { return active_of() == current; }, 3'000));
    act->beat(control::HeartbeatStatus::offline);
    REQUIRE(testutil::eventually([&] { return active_of() != current; }, 3'000));
    Uuid fresh = active_of();
    wins[fresh]++;
    current = fresh;
  }
  // 300 selections over 3 candidates each: every instance should win often.
  for (auto& inst : instances) {
    CAPTURE(inst->instance.to_string());
    CHECK(wins[inst->instance] >= 50);
  }
}

TEST_CASE("coordinator restart recovers soft state from the archive") {
  auto dir = testutil::fresh_dir("coord-recover");
  bench::StackOptions sopts;
  sopts.archive = true;
  sopts.archive_dir = dir;
  bench::Stack stack(sopts);

  due::DueConfig cfg;
  cfg.bus_addr = stack.bus_addr();
  cfg.archive_addr = stack.archive_addr();
  auto consumer = due::Session::init({"cons", Uuid::random(), wire::kRoleConsumer},
                                     mk_manifest({{"r.x", 5.0}}, {}), cfg);
  auto producer = due::Session::init({"prod", Uuid::random(), wire::kRoleProducer},
                                     mk_manifest({}, {{"r.x", 20.0}}), cfg);
  REQUIRE(producer->has_assignment(DataKey::parse("r.x")));
  auto before = stack.coordinator().snapshot();
  std::uint64_t revision_before = producer->assignment_revision();

  // Kill the coordinator and start a fresh one that replays the archive.
  stack.coordinator().stop();
  coord::CoordinatorOptions copts;
  copts.due = cfg;
  copts.recover = true;
  auto fresh = coord::Coordinator::start(copts);

  REQUIRE(testutil::eventually(
      [&] {
        auto snap = fresh->snapshot();
        return snap.apps.size() == before.apps.size();
      },
      5'000));
  auto snap = fresh->snapshot();
  REQUIRE(snap.apps.size() == 2);
  for (const auto& app : snap.apps) {
    const control::AppInfo* was = nullptr;
    for (const auto& b : before.apps)
      if (b.app_id == app.app_id) was = &b;
    REQUIRE(was != nullptr);
    CHECK(app.active_instance == was->active_instance);  // sticky across restart
    REQUIRE(app.instances.size() == was->instances.size());
    CHECK(app.instances[0].manifest == was->instances[0].manifest);
  }
  // Unchanged assignments are not republished: the producer keeps its
  // revision and keeps producing without interruption.
  sleep_us(300'000);
  CHECK(producer->assignment_revision() == revision_before);
  CHECK(producer->has_assignment(DataKey::parse("r.x")));

  producer->close();
  consumer->close();
  fresh->stop();
}

TEST_CASE("restart with an empty archive starts empty and re-registers on retry") {
  auto dir = testutil::fresh_dir("coord-empty");
  bench::StackOptions sopts;
  sopts.archive = true;
  sopts.archive_dir = dir;
  bench::Stack stack(sopts);
  auto snap = stack.coordinator().snapshot();
  CHECK(snap.apps.empty());

  // An app whose init begins while no coordinator is around succeeds once
  // one arrives (handshake retries).
  stack.coordinator().stop();
  due::DueConfig cfg;
  cfg.bus_addr = stack.bus_addr();
  cfg.handshake_retry_us = 200'000;
  cfg.handshake_timeout_us = 10'000'000;
  std::unique_ptr<due::Session> late;
  std::thread init_thread([&] {
    late = due::Session::init({"late", Uuid::random(), wire::kRoleProducer},
                              mk_manifest({}, {{"l.x", std::nullopt}}), cfg);
  });
  sleep_us(400'000);
  coord::CoordinatorOptions copts;
  copts.due.bus_addr = stack.bus_addr();
  copts.recover = false;
  auto fresh = coord::Coordinator::start(copts);
  init_thread.join();
  REQUIRE(late != nullptr);
  CHECK(testutil::eventually([&] {
    auto s = fresh->snapshot();
    return s.apps.size() == 1 && s.apps[0].app_id == "late";
  }));
  late->close();
  fresh->stop();
}

TEST_CASE("status queries over the bus answer filtered and unknown apps") {
  bench::Stack stack;
  due::DueConfig cfg;
  cfg.bus_addr = stack.bus_addr();
  auto app = due::Session::init({"queryme", Uuid::random(), wire::kRoleProducer},
                                mk_manifest({}, {{"q.x", std::nullopt}}), cfg);
  auto reply = app->query_status(std::nullopt);
  REQUIRE(reply.ok);
  CHECK(reply.apps.size() == 1);

  auto one = app->query_status("queryme");
  REQUIRE(one.ok);
  REQUIRE(one.apps.size() == 1);
  CHECK(one.apps[0].app_id == "queryme");
  CHECK(one.apps[0].instances[0].status == InstanceStatus::online);

  CHECK_THROWS_AS(app->query_status("nosuchapp"), Error);
  app->close();
}
