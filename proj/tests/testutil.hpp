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

#ifndef SDNATOR_TESTS_TESTUTIL_HPP
#define SDNATOR_TESTS_TESTUTIL_HPP

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "sdnator/bus.hpp"
#include "sdnator/client.hpp"
#include "sdnator/util.hpp"

namespace testutil {

inline std::string fresh_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::string dir = "/tmp/sdnator-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Collects DELIVER frames from a raw FramedClient.
struct DeliverLog {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<sdnator::wire::Deliver> items;

  void push(sdnator::wire::Deliver&& d) {
    std::lock_guard lk(mu);
    items.push_back(std::move(d));
    cv.notify_all();
  }
  std::size_t size() {
    std::lock_guard lk(mu);
    return items.size();
  }
  bool wait_for_count(std::size_t n, std::uint64_t timeout_ms = 5000) {
    std::unique_lock lk(mu);
    return cv.wait_for(lk, std::chrono::milliseconds(timeout_ms),
                       [&] { return items.size() >= n; });
  }
  std::vector<sdnator::wire::Deliver> snapshot() {
    std::lock_guard lk(mu);
    return {items.begin(), items.end()};
  }
};

inline sdnator::wire::Hello hello(const std::string& app,
                                  std::uint8_t roles = sdnator::wire::kRoleProducer |
                                                       sdnator::wire::kRoleConsumer) {
  return {sdnator::wire::kProtocolVersion, app, sdnator::Uuid::random(), roles};
}

inline bool eventually(const std::function<bool()>& cond, std::uint64_t timeout_ms = 5000,
                       std::uint64_t poll_us = 2000) {
  std::uint64_t deadline = sdnator::now_steady_us() + timeout_ms * 1000;
  while (sdnator::now_steady_us() < deadline) {
    if (cond()) return true;
    sdnator::sleep_us(poll_us);
  }
  return cond();
}

}  // namespace testutil

#endif  // SDNATOR_TESTS_TESTUTIL_HPP
