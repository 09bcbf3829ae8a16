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

#include "sdnator/due.hpp"

#include <algorithm>

namespace sdnator::due {

// ---------------------------------------------------------------------------
// DueConfig

DueConfig DueConfig::from_config(const Config& cfg) {
  DueConfig d;
  d.bus_addr = cfg.get_str("due.bus", cfg.get_str("bus.listen", d.bus_addr));
  d.archive_addr = cfg.get_str("due.archive", cfg.get_str("archive.listen", ""));
  d.updates_batch = static_cast<std::uint32_t>(cfg.get_int("due.updates_batch", 1));
  d.archive_batch = static_cast<std::uint32_t>(cfg.get_int("due.archive_batch", 1));
  d.batch_linger_us = static_cast<std::uint64_t>(cfg.get_double("due.batch_linger_ms", 5.0) * 1000);
  d.heartbeat_interval_us =
      static_cast<std::uint64_t>(cfg.get_double("due.heartbeat_interval_ms", 1000.0) * 1000);
  d.heartbeat_timeout_multiplier =
      static_cast<std::uint32_t>(cfg.get_int("due.heartbeat_timeout_multiplier", 3));
  d.handshake_timeout_us =
      static_cast<std::uint64_t>(cfg.get_double("due.handshake_timeout_ms", 15000.0) * 1000);
  d.max_frame = static_cast<std::uint64_t>(cfg.get_int("due.max_frame_mb", 16)) * 1024 * 1024;
  d.observer_queue_depth = static_cast<std::size_t>(cfg.get_int("due.observer_queue_depth", 10000));
  d.inject_latency_us =
      static_cast<std::uint64_t>(cfg.get_double("due.inject_latency_ms", 0.0) * 1000);
  d.validate();
  return d;
}

void DueConfig::validate() const {
  if (updates_batch < 1 || archive_batch < 1)
    throw Error(Errc::invalid_config, "batch sizes must be >= 1");
  if (batch_linger_us == 0) throw Error(Errc::invalid_config, "batch linger must be > 0");
  if (heartbeat_interval_us == 0)
    throw Error(Errc::invalid_config, "heartbeat interval must be > 0");
  if (heartbeat_timeout_multiplier < 1)
    throw Error(Errc::invalid_config, "heartbeat timeout multiplier must be >= 1");
}

// ---------------------------------------------------------------------------
// Observer

Observer::Observer(Session* session, KeyPattern pattern, std::size_t depth)
    : session_(session), pattern_(std::move(pattern)), depth_(depth) {
  dispatcher_ = std::thread([this] { dispatch_loop(); });
}

Observer::~Observer() { close(); }

std::uint64_t Observer::add_callback(Callback cb) {
  std::lock_guard lk(cb_mu_);
  std::uint64_t id = next_cb_id_++;
  callbacks_.emplace_back(id, std::move(cb));
  return id;
}

void Observer::on_resubscribed(std::function<void()> hook) {
  std::lock_guard lk(cb_mu_);
  resub_hook_ = std::move(hook);
}

void Observer::push(wire::Deliver&& d) {
  std::lock_guard lk(mu_);
  if (closing_) return;
  if (queue_.size() >= depth_) {
    queue_.pop_front();
    dropped_.fetch_add(1);
  }
  queue_.push_back(std::move(d));
  cv_.notify_one();
}

void Observer::dispatch_loop() {
  std::deque<wire::Deliver> batch;
  while (true) {
    batch.clear();
    {
      std::unique_lock lk(mu_);
      cv_.wait(lk, [&] { return closing_ || !queue_.empty(); });
      if (queue_.empty()) break;
      batch.swap(queue_);
    }
    std::vector<Callback> cbs;
    {
      std::lock_guard lk(cb_mu_);
      cbs.reserve(callbacks_.size());
      for (auto& [id, cb] : callbacks_) cbs.push_back(cb);
    }
    for (auto& d : batch) {
      for (auto& cb : cbs) {
        try {
          cb(d);
        } catch (const std::exception& e) {
          SDN_WARN("observer callback threw: %s", e.what());
        }
      }
      delivered_.fetch_add(1);
    }
  }
}

void Observer::close() {
  Session* s;
  {
    std::lock_guard lk(cb_mu_);
    s = session_;
    session_ = nullptr;
  }
  if (s) s->remove_observer(this);
  {
    std::lock_guard lk(mu_);
    closing_ = true;
    cv_.notify_all();
  }
  if (dispatcher_.joinable() && dispatcher_.get_id() != std::this_thread::get_id())
    dispatcher_.join();
}

// ---------------------------------------------------------------------------
// Session

std::unique_ptr<Session> Session::init(const AppIdentity& identity, Manifest manifest,
                                       DueConfig config) {
  config.validate();
  manifest.validate();
  if (!valid_key_segment(identity.app_id))
    throw Error(Errc::invalid_config, "app id must be a legal key segment: " + identity.app_id);
  std::unique_ptr<Session> s(new Session(identity, std::move(manifest), std::move(config), false));
  return s;
}

std::unique_ptr<Session> Session::init_coordinator(const AppIdentity& identity, DueConfig config) {
  config.validate();
  std::unique_ptr<Session> s(new Session(identity, Manifest{}, std::move(config), true));
  return s;
}

Session::Session(AppIdentity identity, Manifest manifest, DueConfig config, bool coordinator_mode)
    : identity_(std::move(identity)),
      manifest_(std::move(manifest)),
      config_(std::move(config)),
      coordinator_mode_(coordinator_mode) {
  for (const auto& c : manifest_.capabilities) capability_keys_.insert(c.key.render());
  started_us_ = now_steady_us();
  connect();
  try {
    if (!coordinator_mode_) register_with_coordinator();
    updates_sender_ = std::thread([this] { sender_loop(false); });
    if (archive_) archive_sender_ = std::thread([this] { sender_loop(true); });
    heartbeat_ = std::thread([this] { heartbeat_loop(); });
    reconnector_ = std::thread([this] { reconnect_loop(); });
  } catch (...) {
    close();
    throw;
  }
}

Session::~Session() { close(); }

void Session::connect() {
  net::ClientOptions bus_opts;
  bus_opts.max_frame = config_.max_frame;
  bus_opts.inject_latency_us = config_.inject_latency_us;
  bus_opts.on_deliver = [this](wire::Deliver&& d) { on_deliver(std::move(d)); };
  bus_opts.on_connection_lost = [this] {
    bus_down_.store(true);
    std::lock_guard lk(reconnect_mu_);
    reconnect_cv_.notify_all();
  };
  wire::Hello hello{wire::kProtocolVersion, identity_.app_id, identity_.instance, identity_.roles};
  auto bus = std::make_shared<net::FramedClient>(net::Addr::parse(config_.bus_addr), hello, bus_opts);

  std::shared_ptr<net::FramedClient> arc;
  if (!config_.archive_addr.empty()) {
    net::ClientOptions arc_opts;
    arc_opts.max_frame = config_.max_frame;
    arc_opts.inject_latency_us = config_.inject_latency_us;
    arc_opts.on_connection_lost = [this] {
      std::lock_guard lk(reconnect_mu_);
      reconnect_cv_.notify_all();
    };
    arc = std::make_shared<net::FramedClient>(net::Addr::parse(config_.archive_addr), hello,
                                              arc_opts);
  }
  std::unique_lock lk(conn_mu_);
  bus_ = std::move(bus);
  archive_ = std::move(arc);
}

std::shared_ptr<net::FramedClient> Session::bus() const {
  std::shared_lock lk(conn_mu_);
  return bus_;
}

std::shared_ptr<net::FramedClient> Session::archive() const {
  std::shared_lock lk(conn_mu_);
  return archive_;
}

void Session::register_with_coordinator() {
  auto reply_obs = observe_internal(KeyPattern::parse(control::register_reply_key(identity_.instance)));
  reply_obs->add_callback([this](const wire::Deliver& d) {
    try {
      auto reply = control::decode_registration_reply(d.value);
      std::lock_guard lk(reply_mu_);
      pending_registration_ = std::move(reply);
      reply_cv_.notify_all();
    } catch (const std::exception& e) {
      SDN_WARN("bad registration reply: %s", e.what());
    }
  });
  auto assign_obs = observe_internal(KeyPattern::parse(control::assignment_key(identity_.app_id)));
  assign_obs->add_callback([this](const wire::Deliver& d) {
    try {
      apply_assignment(control::decode_assignment_msg(d.value));
    } catch (const std::exception& e) {
      SDN_WARN("bad assignment payload: %s", e.what());
    }
  });

  control::RegistrationRequest req;
  req.app_id = identity_.app_id;
  req.instance = identity_.instance;
  req.roles = identity_.roles;
  req.reply_key = control::register_reply_key(identity_.instance);
  req.manifest = manifest_;
  auto payload = control::encode_registration_request(req);

  std::uint64_t deadline = now_steady_us() + config_.handshake_timeout_us;
  while (true) {
    // Registrations are archived (not pub-only) so the coordinator can
    // recover its soft state by replay.
    publish_control(control::kRegisterRequestKey, payload, /*pub_only=*/false);
    std::unique_lock lk(reply_mu_);
    std::uint64_t wait_us = std::min(config_.handshake_retry_us,
                                     deadline > now_steady_us() ? deadline - now_steady_us() : 0);
    reply_cv_.wait_for(lk, std::chrono::microseconds(wait_us),
                       [&] { return pending_registration_.has_value(); });
    if (pending_registration_) break;
    if (now_steady_us() >= deadline)
      throw Error(Errc::handshake_timeout,
                  "coordinator did not reply within " +
                      std::to_string(config_.handshake_timeout_us / 1000) + " ms");
  }
  control::RegistrationReply reply = std::move(*pending_registration_);
  if (!reply.ok) throw Error(static_cast<Errc>(reply.error_code), reply.error);
  apply_assignment(reply.assignment);
}

void Session::apply_assignment(const control::AssignmentMsg& msg) {
  std::lock_guard lk(assign_mu_);
  if (msg.revision != 0 && msg.revision < assignment_revision_.load()) return;  // stale
  assignment_revision_.store(msg.revision);
  if (msg.active_instance == identity_.instance)
    assignments_ = msg.assignments;
  else
    assignments_.entries.clear();
  std::erase_if(buckets_,
                [&](const auto& kv) { return assignments_.entries.count(kv.first) == 0; });
}

AssignmentSet Session::current_assignments() const {
  std::lock_guard lk(assign_mu_);
  return assignments_;
}

bool Session::has_assignment(const DataKey& key) const {
  std::lock_guard lk(assign_mu_);
  return assignments_.entries.count(key.render()) != 0;
}

WriteResult Session::write(const DataKey& key, std::string_view value, WriteFlags flags) {
  return write(key, std::vector<std::uint8_t>(value.begin(), value.end()), flags);
}

WriteResult Session::write(const DataKey& key, std::vector<std::uint8_t> value, WriteFlags flags) {
  if (closing_.load() || closed_.load()) throw Error(Errc::transport, "session is closed");
  if (!identity_.producer()) throw Error(Errc::not_a_producer, identity_.app_id);
  if (is_reserved_key_path(key.segments))
    throw Error(Errc::reserved_namespace, "applications may not write under sdnator.**");
  std::string rendered = key.render();
  if (!capability_keys_.count(rendered))
    throw Error(Errc::unknown_capability_key, rendered + " is not a declared capability");

  std::lock_guard wlk(write_mu_);
  {
    std::lock_guard alk(assign_mu_);
    auto it = assignments_.entries.find(rendered);
    if (it == assignments_.entries.end()) {
      stats_.rejected.fetch_add(1);
      return WriteResult::rejected;
    }
    if (it->second.hz) {
      auto [bit, fresh] = buckets_.try_emplace(rendered);
      Bucket& b = bit->second;
      std::uint64_t now = clock_now();
      if (fresh) {
        b.last_us = now;  // bucket starts full
      } else {
        double refill = static_cast<double>(now - b.last_us) * (*it->second.hz) / 1e6;
        b.tokens = std::min(1.0, b.tokens + refill);
        b.last_us = now;
      }
      if (b.tokens < 1.0) {
        stats_.paced.fetch_add(1);
        return WriteResult::paced;
      }
      b.tokens -= 1.0;
    }
  }

  std::uint64_t ts = now_wall_us();
  bool mirror = !flags.pub_only && archive() != nullptr;
  PendingWrite w{rendered, std::move(value), ts};
  if (mirror) {
    PendingWrite copy{w.key, w.value, ts};
    enqueue(archive_ch_, std::move(copy),
            std::max<std::size_t>(std::size_t{config_.archive_batch} * config_.send_window_batches, 64));
  }
  enqueue(updates_, std::move(w),
          std::max<std::size_t>(std::size_t{config_.updates_batch} * config_.send_window_batches, 64));
  if (flags.no_wait) {
    {
      std::lock_guard lk(updates_.mu);
      updates_.flush_hint = true;
      updates_.cv.notify_all();
    }
    if (mirror) {
      std::lock_guard lk(archive_ch_.mu);
      archive_ch_.flush_hint = true;
      archive_ch_.cv.notify_all();
    }
  }
  stats_.accepted.fetch_add(1);
  activity_marker_.fetch_add(1);
  return WriteResult::accepted;
}

void Session::enqueue(Channel& ch, PendingWrite&& w, std::size_t cap) {
  std::unique_lock lk(ch.mu);
  ch.space_cv.wait(lk, [&] { return closing_.load() || ch.pending.size() < cap; });
  if (closing_.load()) return;
  if (ch.pending.empty()) ch.oldest_enqueue_us = now_steady_us();
  ch.pending.push_back(std::move(w));
  ++ch.enqueued;
  ch.cv.notify_one();
}

void Session::sender_loop(bool archive_side) {
  Channel& ch = archive_side ? archive_ch_ : updates_;
  const std::uint32_t batch_size = archive_side ? config_.archive_batch : config_.updates_batch;
  const std::size_t frame_budget = config_.max_frame > 65536 ? config_.max_frame - 65536 : 65536;

  while (true) {
    std::vector<PendingWrite> batch;
    {
      std::unique_lock lk(ch.mu);
      while (true) {
        if (ch.pending.empty()) {
          if (closing_.load()) return;
          ch.flush_hint = false;
          ch.cv.wait(lk);
          continue;
        }
        if (closing_.load() || ch.flush_hint || ch.pending.size() >= batch_size) break;
        std::uint64_t age = now_steady_us() - ch.oldest_enqueue_us;
        if (age >= config_.batch_linger_us) break;
        ch.cv.wait_for(lk, std::chrono::microseconds(config_.batch_linger_us - age));
      }
      std::size_t used = 0;
      while (!ch.pending.empty() && batch.size() < batch_size) {
        auto& front = ch.pending.front();
        std::size_t sz = front.key.size() + front.value.size() + 48;
        if (!batch.empty() && used + sz > frame_budget) break;
        used += sz;
        batch.push_back(std::move(front));
        ch.pending.pop_front();
      }
      ch.in_flight = true;
      ch.space_cv.notify_all();
    }
    send_batch(archive_side, std::move(batch));
    {
      std::lock_guard lk(ch.mu);
      ch.in_flight = false;
      if (ch.pending.empty()) ch.flush_hint = false;
      ch.space_cv.notify_all();
      ch.cv.notify_all();
    }
  }
}

bool Session::send_batch(bool archive_side, std::vector<PendingWrite>&& batch) {
  // Wait out reconnects, then attempt delivery exactly once: the bus contract
  // is at-most-once, so a batch that was in flight when the connection died
  // is dropped, never resent.
  std::shared_ptr<net::FramedClient> client;
  while (true) {
    client = archive_side ? archive() : bus();
    if (client && client->alive()) break;
    if (closing_.load()) {
      stats_.lost_on_reconnect.fetch_add(batch.size());
      return false;
    }
    sleep_us(10'000);
  }
  try {
    if (archive_side) {
      std::vector<wire::ArchiveEntry> entries;
      entries.reserve(batch.size());
      for (auto& w : batch)
        entries.push_back({std::move(w.key), std::move(w.value), 0, w.timestamp_us});
      auto ack = client->archive_append(std::move(entries));
      stats_.archive_acked.fetch_add(ack.count);
    } else {
      std::vector<wire::Envelope> envs;
      envs.reserve(batch.size());
      for (auto& w : batch) envs.push_back({std::move(w.key), std::move(w.value), 0});
      auto ack = client->publish(std::move(envs));
      stats_.bus_acked.fetch_add(ack.count);
    }
    return true;
  } catch (const Error& e) {
    stats_.lost_on_reconnect.fetch_add(batch.size());
    if (!closing_.load())
      SDN_WARN("%s batch of %zu dropped: %s", archive_side ? "archive" : "updates", batch.size(),
               e.what());
    return false;
  }
}

void Session::flush() {
  auto drain = [&](Channel& ch) {
    std::unique_lock lk(ch.mu);
    ch.flush_hint = true;
    ch.cv.notify_all();
    ch.space_cv.wait(lk, [&] {
      return closed_.load() || (ch.pending.empty() && !ch.in_flight);
    });
  };
  drain(updates_);
  if (archive()) drain(archive_ch_);
}

void Session::close() {
  if (closed_.exchange(true)) return;
  if (!closing_.load()) {
    try {
      flush();
    } catch (const std::exception&) {
    }
    try {
      send_heartbeat(control::HeartbeatStatus::offline);
    } catch (const std::exception&) {
    }
  }
  closing_.store(true);
  {
    std::lock_guard lk(updates_.mu);
    updates_.cv.notify_all();
    updates_.space_cv.notify_all();
  }
  {
    std::lock_guard lk(archive_ch_.mu);
    archive_ch_.cv.notify_all();
    archive_ch_.space_cv.notify_all();
  }
  {
    std::lock_guard lk(hb_mu_);
    hb_cv_.notify_all();
  }
  {
    std::lock_guard lk(reconnect_mu_);
    reconnect_cv_.notify_all();
  }
  if (updates_sender_.joinable()) updates_sender_.join();
  if (archive_sender_.joinable()) archive_sender_.join();
  if (heartbeat_.joinable()) heartbeat_.join();
  if (reconnector_.joinable()) reconnector_.join();

  std::vector<std::shared_ptr<Observer>> observers;
  {
    std::lock_guard lk(obs_mu_);
    for (auto& [id, obs] : observers_) observers.push_back(obs);
    observers_.clear();
    orphan_delivers_.clear();
  }
  for (auto& obs : observers) {
    std::lock_guard lk(obs->cb_mu_);
    obs->session_ = nullptr;  // session is going away; skip unsubscribe round trips
  }
  for (auto& obs : observers) obs->close();
  status_observer_.reset();

  std::unique_lock lk(conn_mu_);
  if (bus_) bus_->close();
  if (archive_) archive_->close();
}

void Session::publish_control(const std::string& key, std::vector<std::uint8_t> payload,
                              bool pub_only) {
  auto client = bus();
  if (!client || !client->alive()) throw Error(Errc::transport, "bus connection is down");
  std::vector<wire::Envelope> batch;
  batch.push_back({key, payload, 0});
  client->publish(std::move(batch));
  if (!pub_only) {
    auto arc = archive();
    if (arc && arc->alive()) {
      std::vector<wire::ArchiveEntry> entries;
      entries.push_back({key, std::move(payload), 0, now_wall_us()});
      arc->archive_append(std::move(entries));
    }
  }
}

std::shared_ptr<Observer> Session::observe(const std::string& pattern_text) {
  return observe(KeyPattern::parse(pattern_text));
}

std::shared_ptr<Observer> Session::observe(const KeyPattern& pattern) {
  if (!coordinator_mode_ && !identity_.consumer())
    throw Error(Errc::not_a_consumer, identity_.app_id);
  return observe_internal(pattern);
}

std::shared_ptr<Observer> Session::observe_internal(const KeyPattern& pattern) {
  if (closing_.load() || closed_.load()) throw Error(Errc::transport, "session is closed");
  std::shared_ptr<Observer> obs(new Observer(this, pattern, config_.observer_queue_depth));
  subscribe_observer(obs);
  return obs;
}

void Session::subscribe_observer(const std::shared_ptr<Observer>& obs) {
  auto client = bus();
  if (!client || !client->alive()) throw Error(Errc::transport, "bus connection is down");
  std::uint64_t id = client->subscribe(obs->pattern_.render());
  std::lock_guard lk(obs_mu_);
  obs->sub_id_ = id;
  observers_[id] = obs;
  // Deliveries can outrun subscribe()'s return; drain anything stashed.
  std::deque<wire::Deliver> rest;
  for (auto& d : orphan_delivers_) {
    if (d.sub_id == id)
      obs->push(std::move(d));
    else
      rest.push_back(std::move(d));
  }
  orphan_delivers_.swap(rest);
}

void Session::remove_observer(Observer* obs) {
  std::uint64_t id = 0;
  std::shared_ptr<Observer> holder;
  {
    std::lock_guard lk(obs_mu_);
    for (auto it = observers_.begin(); it != observers_.end(); ++it) {
      if (it->second.get() == obs) {
        id = it->first;
        holder = it->second;
        observers_.erase(it);
        break;
      }
    }
  }
  if (!holder) return;
  auto client = bus();
  if (client && client->alive()) {
    try {
      client->unsubscribe(id);
    } catch (const std::exception&) {
    }
  }
}

void Session::on_deliver(wire::Deliver&& d) {
  stats_.delivered.fetch_add(1);
  activity_marker_.fetch_add(1);
  std::lock_guard lk(obs_mu_);
  auto it = observers_.find(d.sub_id);
  if (it != observers_.end()) {
    it->second->push(std::move(d));
  } else {
    orphan_delivers_.push_back(std::move(d));
    if (orphan_delivers_.size() > 4096) orphan_delivers_.pop_front();
  }
}

std::vector<wire::StoredRecord> Session::get(const wire::Query& q) {
  auto arc = archive();
  if (!arc) throw Error(Errc::archive_unavailable, "no Data Archives endpoint configured");
  return arc->query(q);
}

void Session::send_heartbeat(control::HeartbeatStatus status) {
  control::HeartbeatMsg hb;
  hb.app_id = identity_.app_id;
  hb.instance = identity_.instance;
  hb.status = status;
  hb.uptime_ms = (now_steady_us() - started_us_) / 1000;
  hb.writes = stats_.accepted.load();
  hb.deliveries = stats_.delivered.load();
  publish_control(control::heartbeat_key(identity_.app_id, identity_.instance),
                  control::encode_heartbeat(hb), /*pub_only=*/true);
}

void Session::heartbeat_loop() {
  std::uint64_t last_marker = activity_marker_.load();
  while (!closing_.load()) {
    {
      std::unique_lock lk(hb_mu_);
      hb_cv_.wait_for(lk, std::chrono::microseconds(config_.heartbeat_interval_us),
                      [&] { return closing_.load(); });
    }
    if (closing_.load()) break;
    std::uint64_t marker = activity_marker_.load();
    auto status = marker != last_marker ? control::HeartbeatStatus::online
                                        : control::HeartbeatStatus::idle;
    last_marker = marker;
    try {
      send_heartbeat(status);
    } catch (const std::exception&) {
      // Transport is down; the reconnector brings the session back.
    }
  }
}

void Session::reconnect_loop() {
  std::uint64_t backoff_us = 100'000;
  while (!closing_.load()) {
    {
      std::unique_lock lk(reconnect_mu_);
      reconnect_cv_.wait_for(lk, std::chrono::milliseconds(500), [&] {
        return closing_.load() || bus_down_.load();
      });
    }
    if (closing_.load()) break;

    bool bus_needs = bus_down_.load();
    bool archive_needs = false;
    {
      std::shared_lock lk(conn_mu_);
      if (!config_.archive_addr.empty() && archive_ && !archive_->alive()) archive_needs = true;
      if (bus_ && !bus_->alive()) bus_needs = true;
    }
    if (!bus_needs && !archive_needs) {
      backoff_us = 100'000;
      continue;
    }

    try {
      if (bus_needs) {
        net::ClientOptions opts;
        opts.max_frame = config_.max_frame;
        opts.inject_latency_us = config_.inject_latency_us;
        opts.on_deliver = [this](wire::Deliver&& d) { on_deliver(std::move(d)); };
        opts.on_connection_lost = [this] {
          bus_down_.store(true);
          std::lock_guard lk(reconnect_mu_);
          reconnect_cv_.notify_all();
        };
        wire::Hello hello{wire::kProtocolVersion, identity_.app_id, identity_.instance,
                          identity_.roles};
        auto fresh =
            std::make_shared<net::FramedClient>(net::Addr::parse(config_.bus_addr), hello, opts);
        {
          std::unique_lock lk(conn_mu_);
          bus_ = fresh;
        }
        bus_down_.store(false);

        // Re-establish every observer under new subscription ids. A delivery
        // gap is possible; streams are told via their resubscribed hook.
        std::vector<std::shared_ptr<Observer>> observers;
        {
          std::lock_guard lk(obs_mu_);
          for (auto& [id, obs] : observers_) observers.push_back(obs);
          observers_.clear();
          orphan_delivers_.clear();
        }
        for (auto& obs : observers) {
          std::uint64_t id = fresh->subscribe(obs->pattern_.render());
          std::lock_guard lk(obs_mu_);
          obs->sub_id_ = id;
          observers_[id] = obs;
        }
        stats_.resubscribes.fetch_add(1);
        for (auto& obs : observers) {
          std::function<void()> hook;
          {
            std::lock_guard lk(obs->cb_mu_);
            hook = obs->resub_hook_;
          }
          if (hook) hook();
        }
        SDN_INFO("%s: bus connection re-established", identity_.app_id.c_str());
      }
      if (archive_needs) {
        net::ClientOptions opts;
        opts.max_frame = config_.max_frame;
        opts.inject_latency_us = config_.inject_latency_us;
        wire::Hello hello{wire::kProtocolVersion, identity_.app_id, identity_.instance,
                          identity_.roles};
        auto fresh = std::make_shared<net::FramedClient>(net::Addr::parse(config_.archive_addr),
                                                         hello, opts);
        std::unique_lock lk(conn_mu_);
        archive_ = fresh;
      }
      backoff_us = 100'000;
    } catch (const std::exception&) {
      sleep_us(backoff_us);
      backoff_us = std::min<std::uint64_t>(backoff_us * 2, 5'000'000);
    }
  }
}

control::StatusReply Session::query_status(std::optional<std::string> app_filter,
                                           std::uint64_t timeout_us) {
  std::lock_guard slk(status_req_mu_);
  if (!status_observer_) {
    status_observer_ =
        observe_internal(KeyPattern::parse(control::status_reply_key(identity_.instance)));
    status_observer_->add_callback([this](const wire::Deliver& d) {
      try {
        auto reply = control::decode_status_reply(d.value);
        std::lock_guard lk(reply_mu_);
        pending_status_ = std::move(reply);
        reply_cv_.notify_all();
      } catch (const std::exception& e) {
        SDN_WARN("bad status reply: %s", e.what());
      }
    });
  }
  {
    std::lock_guard lk(reply_mu_);
    pending_status_.reset();
  }
  control::StatusRequest req;
  req.app_filter = std::move(app_filter);
  req.reply_key = control::status_reply_key(identity_.instance);
  publish_control(control::kStatusRequestKey, control::encode_status_request(req),
                  /*pub_only=*/true);
  std::unique_lock lk(reply_mu_);
  if (!reply_cv_.wait_for(lk, std::chrono::microseconds(timeout_us),
                          [&] { return pending_status_.has_value(); }))
    throw Error(Errc::transport, "status query timed out");
  auto reply = std::move(*pending_status_);
  pending_status_.reset();
  if (!reply.ok) throw Error(static_cast<Errc>(reply.error_code), reply.error);
  return reply;
}

}  // namespace sdnator::due
