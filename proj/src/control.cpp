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

#include "sdnator/control.hpp"

namespace sdnator {

const char* instance_status_name(InstanceStatus s) {
  switch (s) {
    case InstanceStatus::online: return "ONLINE";
    case InstanceStatus::idle: return "IDLE";
    case InstanceStatus::unresponsive: return "UNRESPONSIVE";
    case InstanceStatus::offline: return "OFFLINE";
  }
  return "?";
}

void Manifest::validate() const {
  for (const auto& i : interests) {
    if (i.desired_hz && *i.desired_hz <= 0)
      throw Error(Errc::invalid_config, "interest frequency must be positive");
  }
  for (const auto& c : capabilities) {
    if (c.key.segments.size() < 2) throw Error(Errc::malformed_key, "capability key too short");
    if (c.max_hz && *c.max_hz <= 0)
      throw Error(Errc::invalid_config, "capability frequency must be positive");
    if (is_reserved_key_path(c.key.segments))
      throw Error(Errc::reserved_namespace,
                  "capability under sdnator.**: " + c.key.render());
  }
}

}  // namespace sdnator

namespace sdnator::control {

namespace {

void check_version(ByteReader& r) {
  std::uint8_t v = r.u8();
  if (v != kPayloadVersion)
    throw Error(Errc::malformed_frame, "unsupported control payload version");
}

void put_uuid(ByteWriter& w, const Uuid& u) { w.raw(u.bytes.data(), 16); }

Uuid get_uuid(ByteReader& r) {
  Uuid u;
  r.raw(u.bytes.data(), 16);
  return u;
}

void put_opt_f64(ByteWriter& w, const std::optional<double>& v) {
  w.u8(v ? 1 : 0);
  w.f64(v ? *v : 0.0);
}

std::optional<double> get_opt_f64(ByteReader& r) {
  bool has = r.u8() != 0;
  double v = r.f64();
  if (has) return v;
  return std::nullopt;
}

void put_assignment_set(ByteWriter& w, const AssignmentSet& s) {
  w.u32(static_cast<std::uint32_t>(s.entries.size()));
  for (const auto& [key, a] : s.entries) {
    w.str(key);
    put_opt_f64(w, a.hz);
  }
}

AssignmentSet get_assignment_set(ByteReader& r) {
  AssignmentSet s;
  std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string key = r.str();
    s.entries[key] = Assignment{get_opt_f64(r)};
  }
  return s;
}

void put_assignment_msg(ByteWriter& w, const AssignmentMsg& m) {
  w.str(m.app_id);
  put_uuid(w, m.active_instance);
  w.u64(m.revision);
  put_assignment_set(w, m.assignments);
}

AssignmentMsg get_assignment_msg(ByteReader& r) {
  AssignmentMsg m;
  m.app_id = r.str();
  m.active_instance = get_uuid(r);
  m.revision = r.u64();
  m.assignments = get_assignment_set(r);
  return m;
}

}  // namespace

std::string register_reply_key(const Uuid& instance) {
  return "sdnator.register.reply." + instance.to_string();
}

std::string assignment_key(const std::string& app_id) { return "sdnator.assignment." + app_id; }

std::string heartbeat_key(const std::string& app_id, const Uuid& instance) {
  return "sdnator.heartbeat." + app_id + "." + instance.to_string();
}

std::string status_reply_key(const Uuid& instance) {
  return "sdnator.status.reply." + instance.to_string();
}

std::vector<std::uint8_t> encode_manifest(const Manifest& m) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(m.interests.size()));
  for (const auto& i : m.interests) {
    w.str(i.pattern.render());
    put_opt_f64(w, i.desired_hz);
  }
  w.u32(static_cast<std::uint32_t>(m.capabilities.size()));
  for (const auto& c : m.capabilities) {
    w.str(c.key.render());
    put_opt_f64(w, c.max_hz);
    w.u8(c.index ? 1 : 0);
  }
  return w.take();
}

Manifest decode_manifest(ByteReader& r) {
  Manifest m;
  std::uint32_t ni = r.u32();
  for (std::uint32_t i = 0; i < ni; ++i) {
    Interest in;
    in.pattern = KeyPattern::parse(r.str());
    in.desired_hz = get_opt_f64(r);
    m.interests.push_back(std::move(in));
  }
  std::uint32_t nc = r.u32();
  for (std::uint32_t i = 0; i < nc; ++i) {
    Capability c;
    c.key = DataKey::parse(r.str());
    c.max_hz = get_opt_f64(r);
    c.index = r.u8() != 0;
    m.capabilities.push_back(std::move(c));
  }
  return m;
}

std::vector<std::uint8_t> encode_registration_request(const RegistrationRequest& req) {
  ByteWriter w;
  w.u8(kPayloadVersion);
  w.str(req.app_id);
  put_uuid(w, req.instance);
  w.u8(req.roles);
  w.str(req.reply_key);
  auto m = encode_manifest(req.manifest);
  w.raw(m.data(), m.size());
  return w.take();
}

RegistrationRequest decode_registration_request(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  check_version(r);
  RegistrationRequest req;
  req.app_id = r.str();
  req.instance = get_uuid(r);
  req.roles = r.u8();
  req.reply_key = r.str();
  req.manifest = decode_manifest(r);
  return req;
}

std::vector<std::uint8_t> encode_assignment_msg(const AssignmentMsg& m) {
  ByteWriter w;
  w.u8(kPayloadVersion);
  put_assignment_msg(w, m);
  return w.take();
}

AssignmentMsg decode_assignment_msg(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  check_version(r);
  return get_assignment_msg(r);
}

std::vector<std::uint8_t> encode_registration_reply(const RegistrationReply& rep) {
  ByteWriter w;
  w.u8(kPayloadVersion);
  w.u8(rep.ok ? 1 : 0);
  w.u16(rep.error_code);
  w.str(rep.error);
  put_assignment_msg(w, rep.assignment);
  return w.take();
}

RegistrationReply decode_registration_reply(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  check_version(r);
  RegistrationReply rep;
  rep.ok = r.u8() != 0;
  rep.error_code = r.u16();
  rep.error = r.str();
  rep.assignment = get_assignment_msg(r);
  return rep;
}

std::vector<std::uint8_t> encode_heartbeat(const HeartbeatMsg& h) {
  ByteWriter w;
  w.u8(kPayloadVersion);
  w.str(h.app_id);
  put_uuid(w, h.instance);
  w.u8(static_cast<std::uint8_t>(h.status));
  w.u64(h.uptime_ms);
  w.u64(h.writes);
  w.u64(h.deliveries);
  return w.take();
}

HeartbeatMsg decode_heartbeat(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  check_version(r);
  HeartbeatMsg h;
  h.app_id = r.str();
  h.instance = get_uuid(r);
  h.status = static_cast<HeartbeatStatus>(r.u8());
  h.uptime_ms = r.u64();
  h.writes = r.u64();
  h.deliveries = r.u64();
  return h;
}

std::vector<std::uint8_t> encode_status_request(const StatusRequest& s) {
  ByteWriter w;
  w.u8(kPayloadVersion);
  w.u8(s.app_filter ? 1 : 0);
  w.str(s.app_filter ? *s.app_filter : "");
  w.str(s.reply_key);
  return w.take();
}

StatusRequest decode_status_request(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  check_version(r);
  StatusRequest s;
  bool has = r.u8() != 0;
  std::string filter = r.str();
  if (has) s.app_filter = filter;
  s.reply_key = r.str();
  return s;
}

std::vector<std::uint8_t> encode_status_reply(const StatusReply& s) {
  ByteWriter w;
  w.u8(kPayloadVersion);
  w.u8(s.ok ? 1 : 0);
  w.u16(s.error_code);
  w.str(s.error);
  w.u32(static_cast<std::uint32_t>(s.apps.size()));
  for (const auto& app : s.apps) {
    w.str(app.app_id);
    w.u8(app.active_instance ? 1 : 0);
    put_uuid(w, app.active_instance ? *app.active_instance : Uuid::nil());
    w.u32(static_cast<std::uint32_t>(app.instances.size()));
    for (const auto& inst : app.instances) {
      put_uuid(w, inst.instance);
      w.u8(static_cast<std::uint8_t>(inst.status));
      w.u64(inst.last_heartbeat_us);
      auto m = encode_manifest(inst.manifest);
      w.raw(m.data(), m.size());
    }
  }
  w.u32(static_cast<std::uint32_t>(s.unmet.size()));
  for (const auto& u : s.unmet) {
    w.str(u.pattern);
    w.u8(static_cast<std::uint8_t>(u.reason));
  }
  return w.take();
}

StatusReply decode_status_reply(std::span<const std::uint8_t> p) {
  ByteReader r(p);
  check_version(r);
  StatusReply s;
  s.ok = r.u8() != 0;
  s.error_code = r.u16();
  s.error = r.str();
  std::uint32_t na = r.u32();
  for (std::uint32_t i = 0; i < na; ++i) {
    AppInfo app;
    app.app_id = r.str();
    bool has_active = r.u8() != 0;
    Uuid active = get_uuid(r);
    if (has_active) app.active_instance = active;
    std::uint32_t ni = r.u32();
    for (std::uint32_t j = 0; j < ni; ++j) {
      InstanceInfo inst;
      inst.instance = get_uuid(r);
      inst.status = static_cast<InstanceStatus>(r.u8());
      inst.last_heartbeat_us = r.u64();
      inst.manifest = decode_manifest(r);
      app.instances.push_back(std::move(inst));
    }
    s.apps.push_back(std::move(app));
  }
  std::uint32_t nu = r.u32();
  for (std::uint32_t i = 0; i < nu; ++i) {
    UnmetInterest u;
    u.pattern = r.str();
    u.reason = static_cast<UnmetReason>(r.u8());
    s.unmet.push_back(std::move(u));
  }
  return s;
}

}  // namespace sdnator::control
