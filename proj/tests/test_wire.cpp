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

#include "sdnator/config.hpp"
#include "sdnator/control.hpp"
#include "sdnator/wire.hpp"

using namespace sdnator;

TEST_CASE("primitive encoding is little-endian with length-prefixed strings") {
  ByteWriter w;
  w.u16(0x1234);
  w.u32(0xdeadbeef);
  w.str("hi");
  auto buf = w.take();
  REQUIRE(buf.size() == 2 + 4 + 2 + 2);
  CHECK(buf[0] == 0x34);
  CHECK(buf[1] == 0x12);
  CHECK(buf[2] == 0xef);
  CHECK(buf[5] == 0xde);
  CHECK(buf[6] == 2);  // u16 length prefix
  CHECK(buf[7] == 0);
  CHECK(buf[8] == 'h');
}

TEST_CASE("truncated payloads throw") {
  ByteWriter w;
  w.str("hello");
  auto buf = w.take();
  buf.pop_back();
  ByteReader r(buf);
  CHECK_THROWS_AS(r.str(), Error);
}

TEST_CASE("pub batch round trip keeps order, seq and values") {
  std::vector<wire::Envelope> batch;
  SplitMix64 rng(7);
  for (int i = 0; i < 50; ++i) {
    wire::Envelope e;
    e.key = "bench.data.k" + std::to_string(i % 5);
    e.value.resize(rng.below(300));
    for (auto& b : e.value) b = static_cast<std::uint8_t>(rng.next());
    e.seq = static_cast<std::uint64_t>(i + 1);
    batch.push_back(std::move(e));
  }
  auto decoded = wire::decode_pub_batch(wire::encode_pub_batch(batch));
  REQUIRE(decoded.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(decoded[i].key == batch[i].key);
    CHECK(decoded[i].value == batch[i].value);
    CHECK(decoded[i].seq == batch[i].seq);
  }
}

TEST_CASE("deliver round trip carries producer identity") {
  wire::Deliver d;
  d.sub_id = 42;
  d.key = "a.b:f=1";
  d.producer_app = "appx";
  d.producer_instance = Uuid::random();
  d.value = {1, 2, 3};
  d.seq = 99;
  auto out = wire::decode_deliver(wire::encode_deliver(d));
  CHECK(out.sub_id == d.sub_id);
  CHECK(out.key == d.key);
  CHECK(out.producer_app == d.producer_app);
  CHECK(out.producer_instance == d.producer_instance);
  CHECK(out.value == d.value);
  CHECK(out.seq == d.seq);
}

TEST_CASE("query round trip with all optional fields") {
  wire::Query q;
  q.pattern = "a.**";
  q.time_range = {{10, 20}};
  q.producer_app = "p";
  q.limit = 7;
  q.descending = true;
  auto out = wire::decode_query(wire::encode_query(q));
  CHECK(out.pattern == q.pattern);
  CHECK(out.time_range == q.time_range);
  CHECK(out.producer_app == q.producer_app);
  CHECK(out.limit == q.limit);
  CHECK(out.descending == q.descending);

  wire::Query bare;
  bare.pattern = "a.b";
  auto out2 = wire::decode_query(wire::encode_query(bare));
  CHECK_FALSE(out2.time_range.has_value());
  CHECK_FALSE(out2.producer_app.has_value());
  CHECK_FALSE(out2.limit.has_value());
  CHECK_FALSE(out2.descending);
}

TEST_CASE("uuid string round trip") {
  for (int i = 0; i < 100; ++i) {
    Uuid u = Uuid::random();
    CHECK(Uuid::parse(u.to_string()) == u);
    CHECK(u.to_string().size() == 36);
  }
  CHECK_THROWS_AS(Uuid::parse("zz"), Error);
}

TEST_CASE("registration payload round trip") {
  control::RegistrationRequest req;
  req.app_id = "myapp";
  req.instance = Uuid::random();
  req.roles = wire::kRoleProducer;
  req.reply_key = control::register_reply_key(req.instance);
  req.manifest.interests.push_back({KeyPattern::parse("a.**"), 5.0});
  req.manifest.interests.push_back({KeyPattern::parse("b.c"), std::nullopt});
  req.manifest.capabilities.push_back({DataKey::parse("d.e"), 20.0, true});
  auto out = control::decode_registration_request(control::encode_registration_request(req));
  CHECK(out.app_id == req.app_id);
  CHECK(out.instance == req.instance);
  CHECK(out.reply_key == req.reply_key);
  CHECK(out.manifest == req.manifest);
}

TEST_CASE("assignment payload round trip") {
  control::AssignmentMsg m;
  m.app_id = "p";
  m.active_instance = Uuid::random();
  m.revision = 9;
  m.assignments.entries["a.b"] = Assignment{10.0};
  m.assignments.entries["a.c"] = Assignment{std::nullopt};
  auto out = control::decode_assignment_msg(control::encode_assignment_msg(m));
  CHECK(out.app_id == m.app_id);
  CHECK(out.active_instance == m.active_instance);
  CHECK(out.revision == m.revision);
  CHECK(out.assignments == m.assignments);
}

TEST_CASE("status reply round trip") {
  control::StatusReply s;
  control::AppInfo app;
  app.app_id = "x";
  app.active_instance = Uuid::random();
  control::InstanceInfo inst;
  inst.instance = *app.active_instance;
  inst.status = InstanceStatus::idle;
  inst.last_heartbeat_us = 1234;
  app.instances.push_back(inst);
  s.apps.push_back(app);
  s.unmet.push_back({"a.**", control::UnmetReason::no_producer});
  auto out = control::decode_status_reply(control::encode_status_reply(s));
  REQUIRE(out.apps.size() == 1);
  CHECK(out.apps[0].app_id == "x");
  CHECK(out.apps[0].active_instance == app.active_instance);
  REQUIRE(out.apps[0].instances.size() == 1);
  CHECK(out.apps[0].instances[0].status == InstanceStatus::idle);
  REQUIRE(out.unmet.size() == 1);
  CHECK(out.unmet[0].pattern == "a.**");
}

TEST_CASE("manifest validation") {
  Manifest m;
  m.capabilities.push_back({DataKey::parse("sdnator.register.request"), std::nullopt, false});
  CHECK_THROWS_AS(m.validate(), Error);

  Manifest m2;
  m2.interests.push_back({KeyPattern::parse("a.b"), -1.0});
  CHECK_THROWS_AS(m2.validate(), Error);

  Manifest ok;
  ok.interests.push_back({KeyPattern::parse("a.**"), 1.0});
  ok.capabilities.push_back({DataKey::parse("a.b"), 2.0, false});
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("config parsing with sections, comments and errors") {
  auto cfg = Config::parse(R"(
# a comment
[bus]
listen = 127.0.0.1:7070
queue_depth = 4096

[archive]
dir = /tmp/a
fsync = interval:50
)");
  CHECK(cfg.get_str("bus.listen") == "127.0.0.1:7070");
  CHECK(cfg.get_int("bus.queue_depth") == 4096);
  CHECK(cfg.get_str("archive.fsync") == "interval:50");
  CHECK(cfg.get_int("bus.missing", 7) == 7);
  CHECK_THROWS_WITH_AS(static_cast<void>(cfg.get_str("archive.missing_key")),
                       doctest::Contains("archive.missing_key"), Error);
  CHECK_THROWS_AS(Config::parse("novalue\n"), Error);
}
