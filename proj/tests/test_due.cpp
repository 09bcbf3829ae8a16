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

#include "sdnator/bench.hpp"
#include "sdnator/due.hpp"
#include "testutil.hpp"

using namespace sdnator;

namespace {

due::DueConfig base_config(const bench::Stack& stack) {
  due::DueConfig c;
  c.bus_addr = stack.bus_addr();
  c.archive_addr = stack.archive_addr();
  return c;
}

AppIdentity ident(const std::string& app, std::uint8_t roles) { return {app, Uuid::random(), roles}; }

Manifest producer_manifest(const std::string& key, std::optional<double> max_hz = std::nullopt) {
  Manifest m;
  m.capabilities.push_back({DataKey::parse(key), max_hz, false});
  return m;
}

Manifest consumer_manifest(const std::string& pattern,
                           std::optional<double> desired_hz = std::nullopt) {
  Manifest m;
  m.interests.push_back({KeyPattern::parse(pattern), desired_hz});
  return m;
}

}  // namespace

TEST_CASE("handshake returns the consolidated assignment") {
  bench::Stack stack;
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("data.feed", 10.0), base_config(stack));
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("data.feed", 20.0), base_config(stack));
  auto assignments = producer->current_assignments();
  REQUIRE(assignments.entries.count("data.feed") == 1);
  REQUIRE(assignments.entries["data.feed"].hz.has_value());
  CHECK(*assignments.entries["data.feed"].hz == doctest::Approx(10.0));

  // Consumer-only app holds no assignments.
  CHECK(consumer->current_assignments().entries.empty());
  producer->close();
  consumer->close();
}

TEST_CASE("init without a coordinator times out") {
  bus::BusServer bus_only;
  bus::BusOptions opts;
  opts.net.listen = net::Addr::parse("127.0.0.1:0");
  auto addr = bus_only.start(opts);
  due::DueConfig cfg;
  cfg.bus_addr = addr.to_string();
  cfg.handshake_timeout_us = 300'000;
  cfg.handshake_retry_us = 100'000;
  auto t0 = now_steady_us();
  CHECK_THROWS_AS(due::Session::init(ident("lonely", wire::kRoleProducer),
                                     producer_manifest("a.b"), cfg),
                  Error);
  CHECK(now_steady_us() - t0 >= 300'000);
  bus_only.stop();
}

TEST_CASE("on-demand gate: no interest means rejected, demand opens the key") {
  bench::Stack stack;
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("lonely.key"), base_config(stack));
  CHECK(producer->write(DataKey::parse("lonely.key"), "v") == due::WriteResult::rejected);
  CHECK(producer->stats().rejected.load() == 1);
  CHECK(producer->stats().bus_acked.load() == 0);

  // A consumer joining re-runs consolidation and unlocks production.
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("lonely.**"), base_config(stack));
  REQUIRE(testutil::eventually(
      [&] { return producer->has_assignment(DataKey::parse("lonely.key")); }));
  CHECK(producer->write(DataKey::parse("lonely.key"), "v") == due::WriteResult::accepted);
  producer->flush();

  // And the consumer leaving closes it again.
  consumer->close();
  REQUIRE(testutil::eventually(
      [&] { return !producer->has_assignment(DataKey::parse("lonely.key")); }));
  CHECK(producer->write(DataKey::parse("lonely.key"), "v") == due::WriteResult::rejected);
  producer->close();
}

TEST_CASE("write errors: role, unknown capability, reserved namespace") {
  bench::Stack stack;
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("x.**"), base_config(stack));
  CHECK_THROWS_AS(consumer->write(DataKey::parse("x.y"), "v"), Error);  // NotAProducer
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("x.y"), base_config(stack));
  CHECK_THROWS_AS(producer->write(DataKey::parse("x.z"), "v"), Error);  // UnknownCapabilityKey
  CHECK_THROWS_AS(producer->write(DataKey::parse("sdnator.heartbeat.x.y"), "v"), Error);
  CHECK_THROWS_AS(producer->observe("x.**"), Error);  // NotAConsumer
  // Reserved capability rejected at validation time.
  CHECK_THROWS_AS(due::Session::init(ident("bad", wire::kRoleProducer),
                                     producer_manifest("sdnator.evil.key"), base_config(stack)),
                  Error);
  producer->close();
  consumer->close();
}

TEST_CASE("pacing enforces the assigned frequency with a 1-token bucket") {
  bench::Stack stack;
  std::atomic<std::uint64_t> fake_us{1'000'000};
  auto cfg = base_config(stack);
  cfg.pacing_clock = [&] { return fake_us.load(); };

  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("paced.key", 10.0), base_config(stack));
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("paced.key", 20.0), cfg);
  REQUIRE(producer->has_assignment(DataKey::parse("paced.key")));

  // Offered 1000 Hz for 10 virtual seconds against a 10 Hz assignment.
  std::uint64_t accepted = 0, paced = 0;
  for (int i = 0; i < 10'000; ++i) {
    fake_us.fetch_add(1'000);  // 1 ms per attempt
    auto r = producer->write(DataKey::parse("paced.key"), "x");
    if (r == due::WriteResult::accepted)
      ++accepted;
    else if (r == due::WriteResult::paced)
      ++paced;
  }
  CHECK(accepted == 100);  // 10 Hz for 10 s, deterministic under the fake clock
  CHECK(paced == 9'900);
  producer->flush();
  producer->close();
  consumer->close();
}

TEST_CASE("pub_only writes reach the bus but never the archive") {
  bench::StackOptions sopts;
  sopts.archive = true;
  sopts.archive_dir = testutil::fresh_dir("due-pubonly");
  bench::Stack stack(sopts);

  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("mix.**"), base_config(stack));
  std::atomic<int> seen{0};
  auto obs = consumer->observe("mix.**");
  obs->add_callback([&](const wire::Deliver&) { seen.fetch_add(1); });

  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("mix.data"), base_config(stack));
  CHECK(producer->write(DataKey::parse("mix.data"), "archived") == due::WriteResult::accepted);
  CHECK(producer->write(DataKey::parse("mix.data"), "ephemeral",
                        {.pub_only = true, .no_wait = false}) == due::WriteResult::accepted);
  producer->flush();
  REQUIRE(testutil::eventually([&] { return seen.load() == 2; }));

  wire::Query q;
  q.pattern = "mix.data";
  auto records = producer->get(q);
  REQUIRE(records.size() == 1);  // the pub_only value was never archived
  CHECK(std::string(records[0].value.begin(), records[0].value.end()) == "archived");
  CHECK(records[0].producer_app == "prod");
  CHECK(records[0].timestamp_us > 0);
  producer->close();
  consumer->close();
}

TEST_CASE("batching transparency: order and count survive batches and flush") {
  bench::Stack stack;
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("seq.key"), base_config(stack));
  std::vector<std::uint64_t> got;
  std::mutex mu;
  auto obs = consumer->observe("seq.key");
  obs->add_callback([&](const wire::Deliver& d) {
    std::uint64_t v = 0;
    std::memcpy(&v, d.value.data(), 8);
    std::lock_guard lk(mu);
    got.push_back(v);
  });

  auto cfg = base_config(stack);
  cfg.updates_batch = 37;  // deliberately not a divisor of the total
  cfg.batch_linger_us = 200'000;
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("seq.key"), cfg);
  constexpr std::uint64_t kTotal = 1'000;
  for (std::uint64_t i = 0; i < kTotal; ++i) {
    std::vector<std::uint8_t> v(8);
    std::memcpy(v.data(), &i, 8);
    REQUIRE(producer->write(DataKey::parse("seq.key"), std::move(v)) ==
            due::WriteResult::accepted);
  }
  producer->flush();
  CHECK(producer->stats().bus_acked.load() == kTotal);
  REQUIRE(testutil::eventually([&] {
    std::lock_guard lk(mu);
    return got.size() == kTotal;
  }));
  std::lock_guard lk(mu);
  for (std::uint64_t i = 0; i < kTotal; ++i) CHECK(got[i] == i);
  producer->close();
  consumer->close();
}

TEST_CASE("flush on empty buffers returns immediately; write/flush loop counts exactly") {
  bench::Stack stack;
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("wf.key"), base_config(stack));
  std::atomic<std::uint64_t> seen{0};
  auto obs = consumer->observe("wf.key");
  obs->add_callback([&](const wire::Deliver&) { seen.fetch_add(1); });

  auto cfg = base_config(stack);
  cfg.updates_batch = 100;
  cfg.batch_linger_us = 1'000'000;
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("wf.key"), cfg);
  auto t0 = now_steady_us();
  producer->flush();
  CHECK(now_steady_us() - t0 < 200'000);  // no pending data: immediate

  constexpr int kLoops = 1'000;
  for (int i = 0; i < kLoops; ++i) {
    producer->write(DataKey::parse("wf.key"), "x");
    producer->flush();
  }
  CHECK(producer->stats().bus_acked.load() == kLoops);
  REQUIRE(testutil::eventually([&] { return seen.load() == kLoops; }));
  producer->close();
  consumer->close();
}

TEST_CASE("no_wait flushes without waiting for the batch to fill") {
  bench::Stack stack;
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("nw.key"), base_config(stack));
  std::atomic<std::uint64_t> seen{0};
  auto obs = consumer->observe("nw.key");
  obs->add_callback([&](const wire::Deliver&) { seen.fetch_add(1); });

  auto cfg = base_config(stack);
  cfg.updates_batch = 10'000;
  cfg.batch_linger_us = 60'000'000;  // would otherwise sit for a minute
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("nw.key"), cfg);
  producer->write(DataKey::parse("nw.key"), "v", {.pub_only = false, .no_wait = true});
  CHECK(testutil::eventually([&] { return seen.load() == 1; }, 2'000));
  producer->close();
  consumer->close();
}

TEST_CASE("observers: delivery order, overlap independence, no replay") {
  bench::Stack stack;
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("obs.**"), base_config(stack));
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("obs.data"), base_config(stack));

  // Observe before any traffic: stream stays silent until a write happens.
  std::vector<int> a_order;
  std::atomic<int> b_count{0};
  std::mutex mu;
  auto obs_a = consumer->observe("obs.data");
  obs_a->add_callback([&](const wire::Deliver& d) {
    std::lock_guard lk(mu);
    a_order.push_back(d.value[0]);
  });
  sleep_us(50'000);
  CHECK(obs_a->delivered() == 0);

  auto obs_b = consumer->observe("obs.**");
  obs_b->add_callback([&](const wire::Deliver&) { b_count.fetch_add(1); });

  for (int i = 0; i < 3; ++i) {
    std::vector<std::uint8_t> v{static_cast<std::uint8_t>(i)};
    producer->write(DataKey::parse("obs.data"), std::move(v));
  }
  producer->flush();
  REQUIRE(testutil::eventually([&] { return obs_a->delivered() == 3 && b_count.load() == 3; }));
  {
    std::lock_guard lk(mu);
    CHECK(a_order == std::vector<int>{0, 1, 2});
  }

  // Closing one observer leaves the other delivering.
  obs_a->close();
  producer->write(DataKey::parse("obs.data"), "zz");
  producer->flush();
  REQUIRE(testutil::eventually([&] { return b_count.load() == 4; }));
  CHECK(obs_a->delivered() == 3);
  producer->close();
  consumer->close();
}

TEST_CASE("get() delegates to the archive with filters") {
  bench::StackOptions sopts;
  sopts.archive = true;
  sopts.archive_dir = testutil::fresh_dir("due-get");
  bench::Stack stack(sopts);
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("g.**"), base_config(stack));
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("g.k"), base_config(stack));
  for (int i = 0; i < 5; ++i) producer->write(DataKey::parse("g.k"), "v" + std::to_string(i));
  producer->flush();

  wire::Query q;
  q.pattern = "g.**";
  auto all = consumer->get(q);
  CHECK(all.size() == 5);
  q.limit = 2;
  q.descending = true;
  auto top = consumer->get(q);
  REQUIRE(top.size() == 2);
  CHECK(top[0].timestamp_us >= top[1].timestamp_us);
  producer->close();
  consumer->close();
}

TEST_CASE("get without an archive configured raises ArchiveUnavailable") {
  bench::Stack stack;  // no archive
  auto session = due::Session::init(ident("solo", wire::kRoleConsumer),
                                    consumer_manifest("n.**"), base_config(stack));
  wire::Query q;
  q.pattern = "n.x";
  CHECK_THROWS_AS(session->get(q), Error);
  session->close();
}

TEST_CASE("close is idempotent, flushes, and reports offline") {
  bench::Stack stack;
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("cl.key"), base_config(stack));
  std::atomic<int> seen{0};
  auto obs = consumer->observe("cl.key");
  obs->add_callback([&](const wire::Deliver&) { seen.fetch_add(1); });

  auto cfg = base_config(stack);
  cfg.updates_batch = 1'000;
  cfg.batch_linger_us = 60'000'000;
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("cl.key"), cfg);
  auto instance = producer->identity().instance;
  for (int i = 0; i < 5; ++i) producer->write(DataKey::parse("cl.key"), "v");
  producer->close();
  producer->close();  // double close is a no-op
  CHECK(testutil::eventually([&] { return seen.load() == 5; }));  // buffers flushed on close

  // The coordinator saw the OFFLINE heartbeat.
  REQUIRE(testutil::eventually([&] {
    auto snap = stack.coordinator().snapshot("prod");
    if (!snap.ok || snap.apps.empty()) return false;
    for (const auto& inst : snap.apps[0].instances)
      if (inst.instance == instance) return inst.status == InstanceStatus::offline;
    return false;
  }));
  consumer->close();
}

TEST_CASE("heartbeats flow while user code is busy and go idle without traffic") {
  bench::Stack stack;
  auto cfg = base_config(stack);
  cfg.heartbeat_interval_us = 60'000;
  auto producer = due::Session::init(ident("hb", wire::kRoleProducer),
                                     producer_manifest("hb.key"), cfg);
  // No write/observe activity: within a few intervals the coordinator sees
  // IDLE (the heartbeat timer runs independently of the app thread).
  REQUIRE(testutil::eventually([&] {
    auto snap = stack.coordinator().snapshot("hb");
    return snap.ok && !snap.apps.empty() && !snap.apps[0].instances.empty() &&
           snap.apps[0].instances[0].status == InstanceStatus::idle;
  }));
  producer->close();
}

TEST_CASE("bus reconnect restores subscriptions and signals the stream") {
  // A bus bound to a fixed port so a restart reuses the address.
  net::Addr probe = net::Listener::bind(net::Addr::parse("127.0.0.1:0")).bound_addr();
  auto bus = std::make_unique<bus::BusServer>();
  bus::BusOptions bopts;
  bopts.net.listen = probe;
  bus->start(bopts);
  coord::CoordinatorOptions copts;
  copts.due.bus_addr = probe.to_string();
  copts.recover = false;
  auto coordinator = coord::Coordinator::start(copts);

  due::DueConfig cfg;
  cfg.bus_addr = probe.to_string();
  auto consumer = due::Session::init(ident("cons", wire::kRoleConsumer),
                                     consumer_manifest("rc.**"), cfg);
  std::atomic<int> seen{0}, resubs{0};
  auto obs = consumer->observe("rc.key");
  obs->add_callback([&](const wire::Deliver&) { seen.fetch_add(1); });
  obs->on_resubscribed([&] { resubs.fetch_add(1); });

  // Bounce the bus under the session.
  bus->stop();
  bus = std::make_unique<bus::BusServer>();
  bus->start(bopts);
  REQUIRE(testutil::eventually([&] { return resubs.load() >= 1; }, 15'000));

  // The reconnected subscription still delivers. The producer arrives after
  // the bounce, so consolidation happens against the fresh bus.
  auto producer = due::Session::init(ident("prod", wire::kRoleProducer),
                                     producer_manifest("rc.key"), cfg);
  REQUIRE(testutil::eventually([&] { return producer->has_assignment(DataKey::parse("rc.key")); }));
  producer->write(DataKey::parse("rc.key"), "hello");
  producer->flush();
  REQUIRE(testutil::eventually([&] { return seen.load() >= 1; }));

  producer->close();
  consumer->close();
  coordinator->stop();
  bus->stop();
}
