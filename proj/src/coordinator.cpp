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

#include "sdnator/coordinator.hpp"

#include <algorithm>

namespace sdnator::coord {

ConsolidationResult consolidate(const std::map<std::string, Manifest>& manifests) {
  ConsolidationResult result;

  // Gather interests once; order by app id, then declaration order.
  struct Want {
    const Interest* interest;
    bool matched_any = false;
  };
  std::vector<Want> wants;
  for (const auto& [app, m] : manifests)
    for (const auto& i : m.interests) wants.push_back({&i});

  for (const auto& [app, m] : manifests) {
    if (m.capabilities.empty()) continue;
    AssignmentSet set;
    for (const auto& cap : m.capabilities) {
      bool any_match = false;
      std::optional<double> top_demand;
      for (auto& w : wants) {
        if (!w.interest->pattern.matches(cap.key)) continue;
        any_match = true;
        w.matched_any = true;
        if (w.interest->desired_hz) {
          if (!top_demand || *w.interest->desired_hz > *top_demand)
            top_demand = *w.interest->desired_hz;
        }
      }
      if (!any_match) continue;  // on-demand gate: nobody wants it
      Assignment a;
      if (!top_demand) {
        a.hz = cap.max_hz;  // every interest unconstrained: producer cap or unbounded
      } else if (cap.max_hz && *top_demand > *cap.max_hz) {
        a.hz = cap.max_hz;
        for (const auto& w : wants) {
          if (w.interest->desired_hz && w.interest->pattern.matches(cap.key) &&
              *w.interest->desired_hz > *cap.max_hz)
            result.unmet.push_back({w.interest->pattern.render(),
                                    control::UnmetReason::frequency_exceeds_capacity});
        }
      } else {
        a.hz = top_demand;
      }
      set.entries[cap.key.render()] = a;
    }
    result.per_app[app] = std::move(set);
  }

  for (const auto& w : wants)
    if (!w.matched_any)
      result.unmet.push_back({w.interest->pattern.render(), control::UnmetReason::no_producer});

  std::sort(result.unmet.begin(), result.unmet.end());
  result.unmet.erase(std::unique(result.unmet.begin(), result.unmet.end()), result.unmet.end());
  return result;
}

std::unique_ptr<Coordinator> Coordinator::start(CoordinatorOptions opts) {
  return std::unique_ptr<Coordinator>(new Coordinator(std::move(opts)));
}

Coordinator::Coordinator(CoordinatorOptions opts)
    : opts_(std::move(opts)),
      rng_(opts_.failover_seed ? opts_.failover_seed
                               : (static_cast<std::uint64_t>(now_wall_us()) ^
                                  UuidHash{}(Uuid::random()))) {
  identity_.app_id = opts_.app_id;
  identity_.roles = wire::kRoleProducer | wire::kRoleConsumer;
  if (opts_.sweep_interval_us == 0)
    opts_.sweep_interval_us = std::max<std::uint64_t>(opts_.due.heartbeat_interval_us / 4, 10'000);

  session_ = due::Session::init_coordinator(identity_, opts_.due);

  auto enqueue = [this](Event::Kind kind) {
    return [this, kind](const wire::Deliver& d) {
      std::lock_guard lk(q_mu_);
      events_.push(Event{kind, d.value});
      q_cv_.notify_one();
    };
  };
  reg_obs_ = session_->observe_internal(KeyPattern::parse(control::kRegisterRequestKey));
  reg_obs_->add_callback(enqueue(Event::Kind::registration));
  hb_obs_ = session_->observe_internal(KeyPattern::parse(control::kHeartbeatPattern));
  hb_obs_->add_callback(enqueue(Event::Kind::heartbeat));
  status_obs_ = session_->observe_internal(KeyPattern::parse(control::kStatusRequestKey));
  status_obs_->add_callback(enqueue(Event::Kind::status_request));

  if (opts_.recover) recover_from_archive();

  loop_ = std::thread([this] { run_loop(); });
  SDN_INFO("coordinator: up as %s/%s", identity_.app_id.c_str(),
           identity_.instance.to_string().c_str());
}

Coordinator::~Coordinator() { stop(); }

void Coordinator::stop() {
  if (stopping_.exchange(true)) return;
  {
    std::lock_guard lk(q_mu_);
    q_cv_.notify_all();
  }
  if (loop_.joinable()) loop_.join();
  reg_obs_.reset();
  hb_obs_.reset();
  status_obs_.reset();
  if (session_) session_->close();
}

void Coordinator::run_loop() {
  std::uint64_t next_sweep = now_steady_us() + opts_.sweep_interval_us;
  while (!stopping_.load()) {
    Event ev;
    bool have = false;
    {
      std::unique_lock lk(q_mu_);
      q_cv_.wait_until(lk,
                       std::chrono::steady_clock::time_point(std::chrono::microseconds(next_sweep)),
                       [&] { return stopping_.load() || !events_.empty(); });
      if (stopping_.load()) break;
      if (!events_.empty()) {
        ev = std::move(events_.front());
        events_.pop();
        have = true;
      }
    }
    if (have) {
      try {
        switch (ev.kind) {
          case Event::Kind::registration: handle_registration(ev.payload); break;
          case Event::Kind::heartbeat: handle_heartbeat(ev.payload); break;
          case Event::Kind::status_request: handle_status_request(ev.payload); break;
        }
      } catch (const std::exception& e) {
        SDN_WARN("coordinator event failed: %s", e.what());
      }
    }
    std::uint64_t now = now_steady_us();
    if (now >= next_sweep) {
      sweep(now);
      next_sweep = now + opts_.sweep_interval_us;
    }
  }
}

void Coordinator::handle_registration(std::span<const std::uint8_t> payload) {
  control::RegistrationRequest req;
  try {
    req = control::decode_registration_request(payload);
  } catch (const std::exception& e) {
    SDN_WARN("coordinator: dropping malformed registration: %s", e.what());
    return;
  }

  control::RegistrationReply reply;
  std::lock_guard lk(state_mu_);
  try {
    req.manifest.validate();
    auto owner = instance_owner_.find(req.instance);
    if (owner != instance_owner_.end() && owner->second != req.app_id)
      throw Error(Errc::duplicate_instance,
                  "instance " + req.instance.to_string() + " already registered by app " +
                      owner->second);

    App& app = apps_[req.app_id];
    Instance& inst = app.instances[req.instance];
    inst.manifest = std::move(req.manifest);
    inst.registered = true;
    inst.status = InstanceStatus::online;
    inst.last_heartbeat_us = now_steady_us();
    instance_owner_[req.instance] = req.app_id;
    ensure_active(app);
    // Consolidation re-runs over all apps whenever an application joins.
    recompute_and_publish();

    reply.assignment.app_id = req.app_id;
    reply.assignment.active_instance = app.active.value_or(Uuid::nil());
    reply.assignment.revision = revision_;
    if (auto it = last_result_.per_app.find(req.app_id); it != last_result_.per_app.end())
      reply.assignment.assignments = it->second;
  } catch (const Error& e) {
    reply.ok = false;
    reply.error_code = static_cast<std::uint16_t>(e.code());
    reply.error = e.what();
  }
  try {
    session_->publish_control(req.reply_key, control::encode_registration_reply(reply),
                              /*pub_only=*/true);
  } catch (const std::exception& e) {
    SDN_WARN("coordinator: reply to %s failed: %s", req.app_id.c_str(), e.what());
  }
}

void Coordinator::handle_heartbeat(std::span<const std::uint8_t> payload) {
  control::HeartbeatMsg hb;
  try {
    hb = control::decode_heartbeat(payload);
  } catch (const std::exception&) {
    return;
  }
  if (hb.app_id == identity_.app_id) return;  // self

  std::lock_guard lk(state_mu_);
  App& app = apps_[hb.app_id];
  auto [it, created] = app.instances.try_emplace(hb.instance);
  Instance& inst = it->second;
  if (created) {
    // Unknown instance: record as online pending registration.
    instance_owner_.emplace(hb.instance, hb.app_id);
  }
  inst.last_heartbeat_us = now_steady_us();

  InstanceStatus before = inst.status;
  switch (hb.status) {
    case control::HeartbeatStatus::online: inst.status = InstanceStatus::online; break;
    case control::HeartbeatStatus::idle: inst.status = InstanceStatus::idle; break;
    case control::HeartbeatStatus::offline: inst.status = InstanceStatus::offline; break;
  }
  bool was_active = app.active && *app.active == hb.instance;
  if (inst.status == InstanceStatus::offline && was_active) {
    SDN_INFO("coordinator: active instance of %s went offline, failing over", hb.app_id.c_str());
    ensure_active(app);
    recompute_and_publish();
  } else if (healthy(inst) && (created || before == InstanceStatus::offline ||
                               before == InstanceStatus::unresponsive || !app.active)) {
    if (ensure_active(app) || created) recompute_and_publish();
  }
}

void Coordinator::sweep(std::uint64_t now_us) {
  std::lock_guard lk(state_mu_);
  std::uint64_t timeout =
      static_cast<std::uint64_t>(opts_.due.heartbeat_timeout_multiplier) *
      opts_.due.heartbeat_interval_us;
  bool changed = false;
  for (auto& [app_id, app] : apps_) {
    for (auto& [uuid, inst] : app.instances) {
      if (!healthy(inst)) continue;
      if (now_us - inst.last_heartbeat_us > timeout) {
        inst.status = InstanceStatus::unresponsive;
        SDN_INFO("coordinator: %s/%s unresponsive (no heartbeat for %llu ms)", app_id.c_str(),
                 uuid.to_string().c_str(),
                 static_cast<unsigned long long>((now_us - inst.last_heartbeat_us) / 1000));
        if (app.active && *app.active == uuid) {
          ensure_active(app);
          changed = true;
        }
      }
    }
  }
  if (changed) recompute_and_publish();
}

bool Coordinator::ensure_active(App& app) {
  if (app.active) {
    auto it = app.instances.find(*app.active);
    if (it != app.instances.end() && healthy(it->second)) return false;  // stick with it
  }
  std::vector<Uuid> candidates;
  for (const auto& [uuid, inst] : app.instances)
    if (healthy(inst)) candidates.push_back(uuid);
  std::optional<Uuid> chosen;
  if (!candidates.empty())
    chosen = candidates[static_cast<std::size_t>(rng_.below(candidates.size()))];
  bool changed = chosen != app.active;
  app.active = chosen;
  return changed;
}

void Coordinator::recompute_and_publish() {
  // Manifests enter consolidation only for apps with a healthy instance; the
  // active instance's manifest speaks for the app.
  std::map<std::string, Manifest> manifests;
  for (auto& [app_id, app] : apps_) {
    const Instance* pick = nullptr;
    if (app.active) {
      auto it = app.instances.find(*app.active);
      if (it != app.instances.end() && healthy(it->second) && it->second.registered)
        pick = &it->second;
    }
    if (!pick) {
      for (const auto& [uuid, inst] : app.instances)
        if (healthy(inst) && inst.registered) {
          pick = &inst;
          break;
        }
    }
    if (pick) manifests[app_id] = pick->manifest;
  }
  last_result_ = consolidate(manifests);
  ++revision_;

  for (auto& [app_id, app] : apps_) {
    AssignmentSet fresh;
    if (auto it = last_result_.per_app.find(app_id); it != last_result_.per_app.end())
      fresh = it->second;
    bool relevant = app.ever_published || !fresh.entries.empty();
    if (!relevant) continue;
    if (app.ever_published && fresh == app.last_published &&
        app.active == app.last_published_active)
      continue;
    control::AssignmentMsg msg;
    msg.app_id = app_id;
    msg.active_instance = app.active.value_or(Uuid::nil());
    msg.revision = revision_;
    msg.assignments = fresh;
    try {
      // Archived (not pub-only): assignment publications are the checkpoint
      // recovery replays.
      session_->publish_control(control::assignment_key(app_id),
                                control::encode_assignment_msg(msg), /*pub_only=*/false);
    } catch (const std::exception& e) {
      SDN_WARN("coordinator: assignment publish for %s failed: %s", app_id.c_str(), e.what());
    }
    app.last_published = std::move(fresh);
    app.last_published_active = app.active;
    app.ever_published = true;
  }
}

void Coordinator::handle_status_request(std::span<const std::uint8_t> payload) {
  control::StatusRequest req;
  try {
    req = control::decode_status_request(payload);
  } catch (const std::exception&) {
    return;
  }
  control::StatusReply reply;
  {
    std::lock_guard lk(state_mu_);
    reply = build_status(req.app_filter);
  }
  try {
    session_->publish_control(req.reply_key, control::encode_status_reply(reply),
                              /*pub_only=*/true);
  } catch (const std::exception& e) {
    SDN_WARN("coordinator: status reply failed: %s", e.what());
  }
}

control::StatusReply Coordinator::build_status(const std::optional<std::string>& filter) const {
  control::StatusReply reply;
  if (filter && !apps_.count(*filter)) {
    reply.ok = false;
    reply.error_code = static_cast<std::uint16_t>(Errc::unknown_app);
    reply.error = "unknown app: " + *filter;
    return reply;
  }
  for (const auto& [app_id, app] : apps_) {
    if (filter && app_id != *filter) continue;
    control::AppInfo info;
    info.app_id = app_id;
    info.active_instance = app.active;
    for (const auto& [uuid, inst] : app.instances) {
      control::InstanceInfo ii;
      ii.instance = uuid;
      ii.status = inst.status;
      ii.last_heartbeat_us = inst.last_heartbeat_us;
      ii.manifest = inst.manifest;
      info.instances.push_back(std::move(ii));
    }
    reply.apps.push_back(std::move(info));
  }
  reply.unmet = last_result_.unmet;
  return reply;
}

control::StatusReply Coordinator::snapshot(std::optional<std::string> app_filter) const {
  std::lock_guard lk(state_mu_);
  return build_status(app_filter);
}

ConsolidationResult Coordinator::last_consolidation() const {
  std::lock_guard lk(state_mu_);
  return last_result_;
}

void Coordinator::recover_from_archive() {
  // Soft state: replay archived registrations for manifests, archived
  // assignment publications for active-instance stickiness, then let live
  // heartbeats confirm or deny liveness.
  std::vector<wire::StoredRecord> regs, assigns;
  try {
    wire::Query q;
    q.pattern = control::kRegisterRequestKey;
    regs = session_->get(q);
    q.pattern = "sdnator.assignment.*";
    assigns = session_->get(q);
  } catch (const std::exception& e) {
    SDN_WARN("coordinator: recovery skipped (%s); starting empty", e.what());
    return;
  }

  std::lock_guard lk(state_mu_);
  std::uint64_t now = now_steady_us();
  for (const auto& rec : regs) {
    try {
      auto req = control::decode_registration_request(rec.value);
      App& app = apps_[req.app_id];
      Instance& inst = app.instances[req.instance];
      inst.manifest = std::move(req.manifest);
      inst.registered = true;
      inst.status = InstanceStatus::online;  // grace until the sweep decides
      inst.last_heartbeat_us = now;
      instance_owner_[req.instance] = req.app_id;
    } catch (const std::exception&) {
    }
  }
  std::uint64_t top_revision = 0;
  for (const auto& rec : assigns) {
    try {
      auto msg = control::decode_assignment_msg(rec.value);
      auto it = apps_.find(msg.app_id);
      if (it == apps_.end()) continue;
      if (!msg.active_instance.is_nil() && it->second.instances.count(msg.active_instance))
        it->second.active = msg.active_instance;
      it->second.last_published = msg.assignments;
      it->second.last_published_active = msg.active_instance.is_nil()
                                             ? std::optional<Uuid>{}
                                             : std::optional<Uuid>{msg.active_instance};
      it->second.ever_published = true;
      top_revision = std::max(top_revision, msg.revision);
    } catch (const std::exception&) {
    }
  }
  revision_ = top_revision;
  for (auto& [app_id, app] : apps_) ensure_active(app);
  // Re-derive assignments; unchanged sets are not republished, so steady
  // production is untouched by a coordinator restart.
  recompute_and_publish();
  SDN_INFO("coordinator: recovered %zu apps from archive (revision %llu)", apps_.size(),
           static_cast<unsigned long long>(revision_));
}

}  // namespace sdnator::coord
