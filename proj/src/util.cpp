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

#include "sdnator/util.hpp"

#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <random>
#include <thread>

#include "sdnator/errors.hpp"

namespace sdnator {

namespace {

int hex_val(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::atomic<int> g_log_level{[] {
  const char* env = std::getenv("SDNATOR_LOG");
  if (!env) return static_cast<int>(LogLevel::warn);
  if (std::strcmp(env, "debug") == 0) return static_cast<int>(LogLevel::debug);
  if (std::strcmp(env, "info") == 0) return static_cast<int>(LogLevel::info);
  if (std::strcmp(env, "warn") == 0) return static_cast<int>(LogLevel::warn);
  if (std::strcmp(env, "error") == 0) return static_cast<int>(LogLevel::error);
  if (std::strcmp(env, "off") == 0) return static_cast<int>(LogLevel::off);
  return static_cast<int>(LogLevel::warn);
}()};

}  // namespace

Uuid Uuid::random() {
  static std::mutex mu;
  static std::mt19937_64 gen{[] {
    std::random_device rd;
    std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    seed ^= static_cast<std::uint64_t>(now_wall_us());
    return seed;
  }()};
  Uuid u;
  {
    std::lock_guard lk(mu);
    std::uint64_t a = gen(), b = gen();
    std::memcpy(u.bytes.data(), &a, 8);
    std::memcpy(u.bytes.data() + 8, &b, 8);
  }
  u.bytes[6] = static_cast<std::uint8_t>((u.bytes[6] & 0x0f) | 0x40);  // version 4
  u.bytes[8] = static_cast<std::uint8_t>((u.bytes[8] & 0x3f) | 0x80);  // variant
  return u;
}

std::string Uuid::to_string() const {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(36);
  for (int i = 0; i < 16; ++i) {
    if (i == 4 || i == 6 || i == 8 || i == 10) out += '-';
    out += hex[bytes[i] >> 4];
    out += hex[bytes[i] & 0x0f];
  }
  return out;
}

Uuid Uuid::parse(const std::string& text) {
  Uuid u;
  int bi = 0;
  int hi = -1;
  for (char c : text) {
    if (c == '-') continue;
    int v = hex_val(c);
    if (v < 0 || bi >= 16) throw Error(Errc::malformed_frame, "bad uuid: " + text);
    if (hi < 0) {
      hi = v;
    } else {
      u.bytes[bi++] = static_cast<std::uint8_t>((hi << 4) | v);
      hi = -1;
    }
  }
  if (bi != 16 || hi >= 0) throw Error(Errc::malformed_frame, "bad uuid: " + text);
  return u;
}

bool Uuid::is_nil() const {
  for (auto b : bytes)
    if (b) return false;
  return true;
}

std::size_t UuidHash::operator()(const Uuid& u) const noexcept {
  std::uint64_t a, b;
  std::memcpy(&a, u.bytes.data(), 8);
  std::memcpy(&b, u.bytes.data() + 8, 8);
  return static_cast<std::size_t>(a ^ (b * 0x9e3779b97f4a7c15ull));
}

std::uint64_t now_wall_us() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

std::uint64_t now_steady_us() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

void sleep_us(std::uint64_t us) { std::this_thread::sleep_for(std::chrono::microseconds(us)); }

std::uint64_t SplitMix64::below(std::uint64_t n) {
  if (n == 0) return 0;
  std::uint64_t threshold = -n % n;
  while (true) {
    std::uint64_t r = next();
    if (r >= threshold) return r % n;
  }
}

double SplitMix64::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void set_log_level(LogLevel lvl) { g_log_level.store(static_cast<int>(lvl)); }
LogLevel log_level() { return static_cast<LogLevel>(g_log_level.load()); }

void log_line(LogLevel lvl, const char* fmt, ...) {
  if (static_cast<int>(lvl) < g_log_level.load(std::memory_order_relaxed)) return;
  static const char* names[] = {"DEBUG", "INFO", "WARN", "ERROR"};
  char msg[1024];
  va_list ap;
  va_start(ap, fmt);
  vsnprintf(msg, sizeof msg, fmt, ap);
  va_end(ap);
  std::uint64_t us = now_wall_us();
  std::fprintf(stderr, "[%llu.%06llu] %-5s %s\n",
               static_cast<unsigned long long>(us / 1000000),
               static_cast<unsigned long long>(us % 1000000),
               names[static_cast<int>(lvl)], msg);
}

}  // namespace sdnator
