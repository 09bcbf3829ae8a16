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

#ifndef SDNATOR_UTIL_HPP
#define SDNATOR_UTIL_HPP

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>

namespace sdnator {

struct Uuid {
  std::array<std::uint8_t, 16> bytes{};

  static Uuid random();
  static Uuid parse(const std::string& text);  // throws on malformed input
  static Uuid nil() { return Uuid{}; }

  std::string to_string() const;  // canonical lowercase 8-4-4-4-12
  bool is_nil() const;

  auto operator<=>(const Uuid&) const = default;
};

struct UuidHash {
  std::size_t operator()(const Uuid& u) const noexcept;
};

// Microseconds since the Unix epoch; used for archive timestamps.
std::uint64_t now_wall_us();
// Monotonic microseconds; used for pacing, latency measurement, timeouts.
std::uint64_t now_steady_us();

// Pluggable monotonic clock, microseconds. DUE pacing consults this so the
// fleet simulator can drive frequency enforcement in virtual time.
using ClockFn = std::function<std::uint64_t()>;

void sleep_us(std::uint64_t us);

// Deterministic, platform-independent PRNG helpers. std::uniform_*
// distributions are not guaranteed to produce identical streams across
// standard libraries, and the simulator's reports must be reproducible
// bit-for-bit, so the mapping from raw engine output is done by hand.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n) without modulo bias.
  std::uint64_t below(std::uint64_t n);
  // Uniform in [0, 1).
  double unit();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  bool bernoulli(double p) { return unit() < p; }
};

std::uint64_t hash_str(std::string_view s);

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

void set_log_level(LogLevel lvl);
LogLevel log_level();
void log_line(LogLevel lvl, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

#define SDN_DEBUG(...) ::sdnator::log_line(::sdnator::LogLevel::debug, __VA_ARGS__)
#define SDN_INFO(...) ::sdnator::log_line(::sdnator::LogLevel::info, __VA_ARGS__)
#define SDN_WARN(...) ::sdnator::log_line(::sdnator::LogLevel::warn, __VA_ARGS__)
#define SDN_ERROR(...) ::sdnator::log_line(::sdnator::LogLevel::error, __VA_ARGS__)

}  // namespace sdnator

#endif  // SDNATOR_UTIL_HPP
