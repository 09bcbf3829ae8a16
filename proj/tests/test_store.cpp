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

#include <fstream>

#include "sdnator/store.hpp"
#include "testutil.hpp"

using namespace sdnator;

namespace {

wire::StoredRecord rec(const std::string& key, std::uint64_t ts, const std::string& producer,
                       const Uuid& inst, std::string value) {
  wire::StoredRecord r;
  r.key = key;
  r.timestamp_us = ts;
  r.producer_app = producer;
  r.producer_instance = inst;
  r.value.assign(value.begin(), value.end());
  return r;
}

// Independent oracle: linear scan + stable sort, the reference for query().
std::vector<wire::StoredRecord> oracle_query(const std::vector<wire::StoredRecord>& all,
                                             const wire::Query& q) {
  KeyPattern pattern = KeyPattern::parse(q.pattern);
  std::vector<wire::StoredRecord> out;
  for (const auto& r : all) {
    if (!pattern.matches(DataKey::parse(r.key))) continue;
    if (q.time_range &&
        (r.timestamp_us < q.time_range->first || r.timestamp_us >= q.time_range->second))
      continue;
    if (q.producer_app && r.producer_app != *q.producer_app) continue;
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.timestamp_us < b.timestamp_us;
  });
  if (q.descending) std::reverse(out.begin(), out.end());
  if (q.limit && out.size() > *q.limit) out.resize(*q.limit);
  return out;
}

store::StoreOptions small_store(const std::string& dir) {
  store::StoreOptions o;
  o.dir = dir;
  o.segment_bytes = 1 << 20;  // force frequent roll-over in tests
  return o;
}

}  // namespace

TEST_CASE("read-your-writes after append ack") {
  auto dir = testutil::fresh_dir("store-ryw");
  store::ArchiveStore s(small_store(dir));
  Uuid inst = Uuid::random();
  std::vector<wire::StoredRecord> batch{rec("a.b", 100, "app", inst, "v1")};
  CHECK(s.append(batch) == 1);
  wire::Query q;
  q.pattern = "a.b";
  auto out = s.query(q);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == batch[0]);
}

TEST_CASE("out-of-order appends come back in timestamp order") {
  auto dir = testutil::fresh_dir("store-order");
  store::ArchiveStore s(small_store(dir));
  Uuid inst = Uuid::random();
  std::vector<wire::StoredRecord> batch{
      rec("a.b", 300, "app", inst, "t3"),
      rec("a.b", 100, "app", inst, "t1"),
      rec("a.b", 200, "app", inst, "t2"),
  };
  s.append(batch);
  wire::Query q;
  q.pattern = "a.b";
  q.time_range = {{100, 300}};
  auto out = s.query(q);
  REQUIRE(out.size() == 2);
  CHECK(out[0].timestamp_us == 100);
  CHECK(out[1].timestamp_us == 200);
}

TEST_CASE("empty time range yields an empty result") {
  auto dir = testutil::fresh_dir("store-empty");
  store::ArchiveStore s(small_store(dir));
  Uuid inst = Uuid::random();
  std::vector<wire::StoredRecord> batch{rec("a.b", 500, "app", inst, "x")};
  s.append(batch);
  wire::Query q;
  q.pattern = "a.b";
  q.time_range = {{100, 101}};
  CHECK(s.query(q).empty());

  q.time_range = {{101, 100}};
  CHECK_THROWS_AS(s.query(q), Error);  // t_lo >= t_hi
  q.time_range.reset();
  q.pattern = "not-a-key..";
  CHECK_THROWS_AS(s.query(q), Error);  // MalformedQuery
}

TEST_CASE("randomized corpus matches the brute-force oracle") {
  auto dir = testutil::fresh_dir("store-oracle");
  store::ArchiveStore s(small_store(dir));
  SplitMix64 rng(42);
  std::vector<std::string> keys;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 3; ++c)
        keys.push_back("app" + std::to_string(a) + ".cat" + std::to_string(b) + ".k" +
                       std::to_string(c));
  std::vector<std::string> producers{"p0", "p1", "p2"};
  std::vector<Uuid> instances{Uuid::random(), Uuid::random(), Uuid::random()};

  std::vector<wire::StoredRecord> all;
  constexpr int kRecords = 20'000;
  std::vector<wire::StoredRecord> batch;
  for (int i = 0; i < kRecords; ++i) {
    std::size_t p = rng.below(producers.size());
    auto r = rec(keys[rng.below(keys.size())], 1 + rng.below(5'000), producers[p], instances[p],
                 "v" + std::to_string(i));
    all.push_back(r);
    batch.push_back(std::move(r));
    if (batch.size() == 500) {
      s.append(batch);
      batch.clear();
    }
  }
  if (!batch.empty()) s.append(batch);
  REQUIRE(s.record_count() == kRecords);

  std::vector<std::string> patterns{"app0.**",          "app1.cat2.*", "app2.cat0.k1", "**",
                                    "app0.*.k2",        "*.cat3.*",    "nomatch.**",
                                    "app1.cat1.k0"};
  for (int trial = 0; trial < 400; ++trial) {
    wire::Query q;
    q.pattern = patterns[rng.below(patterns.size())];
    if (rng.bernoulli(0.5)) {
      std::uint64_t lo = 1 + rng.below(5'000);
      q.time_range = {{lo, lo + 1 + rng.below(2'000)}};
    }
    if (rng.bernoulli(0.4)) q.producer_app = producers[rng.below(producers.size())];
    if (rng.bernoulli(0.3)) q.limit = static_cast<std::uint32_t>(rng.below(50));
    q.descending = rng.bernoulli(0.5);
    CAPTURE(trial);
    CAPTURE(q.pattern);
    auto got = s.query(q);
    auto want = oracle_query(all, q);
    REQUIRE(got.size() == want.size());
    CHECK(got == want);
  }
}

TEST_CASE("index is transparent and faster on exact keys") {
  auto dir = testutil::fresh_dir("store-index");
  store::ArchiveStore s(small_store(dir));
  SplitMix64 rng(7);
  Uuid inst = Uuid::random();
  std::vector<wire::StoredRecord> all;
  std::vector<wire::StoredRecord> batch;
  constexpr int kRecords = 200'000;
  for (int i = 0; i < kRecords; ++i) {
    std::string key = "load.k" + std::to_string(rng.below(1000)) + ".x";
    auto r = rec(key, 1 + rng.below(100'000), "p", inst, "v");
    all.push_back(r);
    batch.push_back(std::move(r));
    if (batch.size() == 5'000) {
      s.append(batch);
      batch.clear();
    }
  }

  // A selective range query: the unindexed path pays the full directory
  // scan, the indexed one a binary search plus a handful of reads.
  wire::Query q;
  q.pattern = "load.k7.x";
  q.time_range = {{50'000, 52'000}};
  auto before = s.query(q);

  // Warm both paths, then compare times.
  std::uint64_t t0 = now_steady_us();
  for (int i = 0; i < 20; ++i) s.query(q);
  std::uint64_t unindexed_us = now_steady_us() - t0;

  s.set_index("load.k7.x", true);
  auto after = s.query(q);
  CHECK(after == before);  // bit-identical with the index enabled
  CHECK(after == oracle_query(all, q));

  t0 = now_steady_us();
  for (int i = 0; i < 20; ++i) s.query(q);
  std::uint64_t indexed_us = now_steady_us() - t0;
  MESSAGE("unindexed ", unindexed_us, " us vs indexed ", indexed_us, " us over 20 queries");
  CHECK(indexed_us * 10 <= unindexed_us);

  // Appends keep the index fresh.
  std::vector<wire::StoredRecord> more{rec("load.k7.x", 50'000, "p", inst, "new")};
  s.append(more);
  all.push_back(more[0]);
  CHECK(s.query(q) == oracle_query(all, q));

  s.set_index("load.k7.x", false);
  CHECK(s.query(q) == oracle_query(all, q));

  CHECK_THROWS_AS(s.set_index("load.*.x", true), Error);  // NotALiteralKey
}

TEST_CASE("durability across clean restart with segment roll-over") {
  auto dir = testutil::fresh_dir("store-restart");
  Uuid inst = Uuid::random();
  std::vector<wire::StoredRecord> all;
  {
    store::ArchiveStore s(small_store(dir));
    std::vector<wire::StoredRecord> batch;
    for (int i = 0; i < 5'000; ++i) {
      auto r = rec("a.k" + std::to_string(i % 7), 1 + static_cast<std::uint64_t>(i), "p", inst,
                   std::string(400, 'x'));  // ~2 MB total, crosses segments
      all.push_back(r);
      batch.push_back(std::move(r));
      if (batch.size() == 100) {
        s.append(batch);
        batch.clear();
      }
    }
  }
  store::ArchiveStore s(small_store(dir));
  CHECK(s.record_count() == 5'000);
  wire::Query q;
  q.pattern = "**";
  CHECK(s.query(q) == oracle_query(all, q));
}

TEST_CASE("a torn tail write is truncated away on restart") {
  auto dir = testutil::fresh_dir("store-torn");
  Uuid inst = Uuid::random();
  {
    store::ArchiveStore s(small_store(dir));
    std::vector<wire::StoredRecord> batch{rec("a.b", 10, "p", inst, "keep1"),
                                          rec("a.b", 20, "p", inst, "keep2")};
    s.append(batch);
  }
  {
    // Simulate a crash mid-append: a record length prefix with half a body.
    std::ofstream seg(dir + "/000000.sdar", std::ios::binary | std::ios::app);
    std::uint32_t len = 500;
    seg.write(reinterpret_cast<const char*>(&len), 4);
    seg.write("partial-garbage", 15);
  }
  store::ArchiveStore s(small_store(dir));
  CHECK(s.record_count() == 2);
  wire::Query q;
  q.pattern = "a.b";
  auto out = s.query(q);
  REQUIRE(out.size() == 2);
  CHECK(std::string(out[1].value.begin(), out[1].value.end()) == "keep2");
  // And it keeps accepting appends after the truncation.
  std::vector<wire::StoredRecord> more{rec("a.b", 30, "p", inst, "post")};
  CHECK(s.append(more) == 1);
  CHECK(s.query(q).size() == 3);
}

TEST_CASE("indexed keys persist across restart") {
  auto dir = testutil::fresh_dir("store-idxcfg");
  Uuid inst = Uuid::random();
  {
    store::ArchiveStore s(small_store(dir));
    std::vector<wire::StoredRecord> batch{rec("a.b", 10, "p", inst, "x")};
    s.append(batch);
    s.set_index("a.b", true);
  }
  store::ArchiveStore s(small_store(dir));
  auto keys = s.indexed_keys();
  REQUIRE(keys.size() == 1);
  CHECK(keys[0] == "a.b");
  wire::Query q;
  q.pattern = "a.b";
  CHECK(s.query(q).size() == 1);
}

TEST_CASE("zero timestamps are rejected") {
  auto dir = testutil::fresh_dir("store-zerots");
  store::ArchiveStore s(small_store(dir));
  std::vector<wire::StoredRecord> batch{rec("a.b", 0, "p", Uuid::random(), "x")};
  CHECK_THROWS_AS(s.append(batch), Error);
}

TEST_CASE("wire-level append, query chunking and producer stamping") {
  auto dir = testutil::fresh_dir("store-wire");
  store::StoreServer server;
  store::StoreServerOptions opts;
  opts.net.listen = net::Addr::parse("127.0.0.1:0");
  opts.store = small_store(dir);
  auto addr = server.start(opts);

  auto hello = testutil::hello("writerapp");
  net::FramedClient client(addr, hello, {});
  // Push enough volume that the result spans multiple QUERY_RESULT chunks
  // (chunk budget is 4 MiB).
  std::vector<wire::ArchiveEntry> entries;
  std::string big(64 * 1024, 'b');
  for (int i = 0; i < 120; ++i) {
    wire::ArchiveEntry e;
    e.key = "big.data";
    e.value.assign(big.begin(), big.end());
    e.timestamp_us = static_cast<std::uint64_t>(i + 1);
    entries.push_back(std::move(e));
  }
  auto ack = client.archive_append(std::move(entries));
  CHECK(ack.count == 120);

  wire::Query q;
  q.pattern = "big.data";
  auto out = client.query(q);
  REQUIRE(out.size() == 120);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].timestamp_us == i + 1);
    CHECK(out[i].producer_app == "writerapp");
    CHECK(out[i].producer_instance == hello.instance);
  }

  client.set_index({"big.data", true});
  CHECK(client.query(q).size() == 120);
  CHECK_THROWS_AS(client.set_index({"big.*", true}), Error);

  client.close();
  server.stop();
}
