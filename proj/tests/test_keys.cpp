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

#include "sdnator/keys.hpp"
#include "sdnator/util.hpp"

using namespace sdnator;

TEST_CASE("parse of the canonical production key") {
  auto k = DataKey::parse("network.traffic_capture.sonata.tcp:flag=syn");
  CHECK(k.segments == std::vector<std::string>{"network", "traffic_capture", "sonata", "tcp"});
  REQUIRE(k.specs.size() == 1);
  CHECK(k.specs[0].first == "flag");
  CHECK(k.specs[0].second == "syn");
  CHECK(k.render() == "network.traffic_capture.sonata.tcp:flag=syn");
}

TEST_CASE("minimal legal key") {
  auto k = DataKey::parse("a.b");
  CHECK(k.segments == std::vector<std::string>{"a", "b"});
  CHECK(k.specs.empty());
  CHECK(k.render() == "a.b");
}

TEST_CASE("malformed keys are rejected") {
  CHECK_THROWS_AS(DataKey::parse("a..b"), Error);       // empty segment
  CHECK_THROWS_AS(DataKey::parse("a"), Error);          // one segment
  CHECK_THROWS_AS(DataKey::parse(""), Error);           // empty
  CHECK_THROWS_AS(DataKey::parse("a.B"), Error);        // uppercase
  CHECK_THROWS_AS(DataKey::parse("a.b:"), Error);       // empty spec list
  CHECK_THROWS_AS(DataKey::parse("a.b:x"), Error);      // spec without '='
  CHECK_THROWS_AS(DataKey::parse("a.b:x="), Error);     // empty spec value
  CHECK_THROWS_AS(DataKey::parse("a.b:=1"), Error);     // empty spec name
  CHECK_THROWS_AS(DataKey::parse("a b.c"), Error);      // whitespace
  CHECK_THROWS_AS(DataKey::parse("a.b:f=1,f=2"), Error);  // duplicate spec
  CHECK_THROWS_AS(DataKey::parse("a.*.b"), Error);      // wildcard in a key
}

TEST_CASE("spec rendering order is preserved") {
  auto k = DataKey::parse("a.b:z=1,a=2");
  CHECK(k.render() == "a.b:z=1,a=2");
  auto k2 = DataKey::parse("a.b:f=1");
  CHECK(k2.render() == "a.b:f=1");
}

TEST_CASE("specs participate in identity") {
  CHECK(DataKey::parse("a.b") != DataKey::parse("a.b:f=1"));
  CHECK(DataKey::parse("a.b:f=1") == DataKey::parse("a.b:f=1"));
}

TEST_CASE("pattern basics") {
  CHECK(KeyPattern::parse("a.*.c").matches(DataKey::parse("a.b.c")));
  CHECK_FALSE(KeyPattern::parse("a.*.c").matches(DataKey::parse("a.b.d")));
  CHECK(KeyPattern::parse("a.**").matches(DataKey::parse("a.b.c.d")));
  CHECK(KeyPattern::parse("a.b.**").matches(DataKey::parse("a.b")));  // '**' spans zero segments
  CHECK(KeyPattern::parse("a.**").matches(DataKey::parse("a.b")));
  // "a.**" never matches a bare "a" at the DataKey level: one segment is not
  // a valid key to begin with.
  CHECK_THROWS_AS(DataKey::parse("a"), Error);
  // specs never affect matching
  CHECK(KeyPattern::parse("a.b").matches(DataKey::parse("a.b:flag=syn")));
  CHECK(KeyPattern::parse("a.b:flag=syn").matches(DataKey::parse("a.b")));
}

TEST_CASE("multi-segment wildcard only allowed at the tail") {
  CHECK_THROWS_AS(KeyPattern::parse("a.**.b"), Error);
  CHECK_THROWS_AS(KeyPattern::parse("**.b"), Error);
  CHECK(KeyPattern::parse("**").multi_tail);
}

TEST_CASE("literal pattern matches exactly one key") {
  auto p = KeyPattern::parse("a.b.c");
  CHECK(p.literal());
  CHECK(p.matches(DataKey::parse("a.b.c")));
  CHECK_FALSE(p.matches(DataKey::parse("a.b")));
  CHECK_FALSE(p.matches(DataKey::parse("a.b.c.d")));
  CHECK_FALSE(KeyPattern::parse("a.*").literal());
  CHECK_FALSE(KeyPattern::parse("a.**").literal());
}

namespace {

// Brute-force reference matcher over segment lists.
bool ref_match(const std::vector<std::string>& pat, bool multi_tail,
               const std::vector<std::string>& key) {
  if (!multi_tail && pat.size() != key.size()) return false;
  if (multi_tail && key.size() < pat.size()) return false;
  for (std::size_t i = 0; i < pat.size(); ++i)
    if (pat[i] != "*" && pat[i] != key[i]) return false;
  return true;
}

void enumerate(std::vector<std::vector<std::string>>& out, std::vector<std::string>& cur,
               const std::vector<std::string>& alphabet, std::size_t max_len) {
  if (!cur.empty()) out.push_back(cur);
  if (cur.size() == max_len) return;
  for (const auto& s : alphabet) {
    cur.push_back(s);
    enumerate(out, cur, alphabet, max_len);
    cur.pop_back();
  }
}

}  // namespace

TEST_CASE("wildcard soundness against the reference matcher") {
  // All patterns/keys of <= 4 segments over a 3-symbol alphabet.
  std::vector<std::vector<std::string>> keys, pats;
  std::vector<std::string> cur;
  enumerate(keys, cur, {"x", "y", "z"}, 4);
  enumerate(pats, cur, {"x", "y", "*"}, 4);

  std::size_t checked = 0;
  for (const auto& pat_segs : pats) {
    for (bool multi_tail : {false, true}) {
      KeyPattern pat;
      pat.segments = pat_segs;
      pat.multi_tail = multi_tail;
      for (const auto& key_segs : keys) {
        CHECK(pat.matches_path(key_segs) == ref_match(pat_segs, multi_tail, key_segs));
        ++checked;
      }
    }
  }
  CHECK(checked == 28'800);
}

TEST_CASE("round trip over 10,000 random valid keys") {
  SplitMix64 rng(0xfeedu);
  const std::string chars = "abcdefghijklmnopqrstuvwxyz0123456789_-";
  auto rand_token = [&] {
    std::size_t len = 1 + rng.below(8);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += chars[rng.below(chars.size())];
    return s;
  };
  for (int i = 0; i < 10'000; ++i) {
    DataKey k;
    std::size_t nseg = 2 + rng.below(5);
    for (std::size_t s = 0; s < nseg; ++s) k.segments.push_back(rand_token());
    std::size_t nspec = rng.below(4);
    for (std::size_t s = 0; s < nspec; ++s) {
      std::string name;
      do {
        name = rand_token();
      } while (std::any_of(k.specs.begin(), k.specs.end(),
                           [&](const auto& p) { return p.first == name; }));
      k.specs.emplace_back(name, rand_token());
    }
    CAPTURE(k.render());
    CHECK(DataKey::parse(k.render()) == k);
  }
}

TEST_CASE("reserved namespace detection") {
  CHECK(is_reserved_key_path(DataKey::parse("sdnator.register.request").segments));
  CHECK_FALSE(is_reserved_key_path(DataKey::parse("fleet.twin.m0.queue").segments));
}
