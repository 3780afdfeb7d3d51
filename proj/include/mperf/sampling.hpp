#pragma once

// Counter group planning, sample records and the replay trace format.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mperf/detail/format.hpp"
#include "mperf/error.hpp"
#include "mperf/platform.hpp"

namespace mperf {

/// Prime, so the sampler does not lock step with periodic workloads.
inline constexpr std::uint32_t kDefaultSampleFrequencyHz = 997;
inline constexpr std::uint32_t kMaxSampleFrequencyHz = 100000;

struct EventRequest {
  EventDescriptor event;
  bool want_sampling = false;
  std::uint32_t sample_frequency_hz = kDefaultSampleFrequencyHz;
};

struct GroupPlan {
  EventDescriptor leader;
  std::vector<EventDescriptor> members;  // request order, never contains the leader
  std::uint32_t sample_frequency_hz = 0;  // 0 for counting-only plans
  bool leader_is_proxy = false;
  bool sampling = false;
  std::size_t counter_budget = 8;

  /// Leader first, then members.
  std::vector<std::string> event_names() const {
    std::vector<std::string> names{leader.name};
    for (const auto& m : members) names.push_back(m.name);
    return names;
  }

  friend bool operator==(const GroupPlan&, const GroupPlan&) = default;
};

/// Splits the members into hardware groups that each fit the counter budget
/// (leader included). Members are dealt round-robin in request order; every
/// group reuses the plan's leader.
inline std::vector<std::vector<EventDescriptor>> hardware_groups(const GroupPlan& plan) {
  const std::size_t per_group = plan.counter_budget - 1;
  const std::size_t n = plan.members.size();
  const std::size_t groups = n == 0 ? 1 : (n + per_group - 1) / per_group;
  std::vector<std::vector<EventDescriptor>> out(groups);
  for (std::size_t i = 0; i < n; ++i) out[i % groups].push_back(plan.members[i]);
  return out;
}

namespace detail {

inline const EventDescriptor* pick_proxy_leader(const PlatformProfile& profile) {
  for (ModeScope scope : {ModeScope::UserOnly, ModeScope::SupervisorOnly, ModeScope::MachineOnly,
                          ModeScope::All}) {
    for (const auto& e : profile.events)
      if (e.sampling_capable && e.mode_scope == scope) return &e;
  }
  return nullptr;
}

}  // namespace detail

/// Chooses the group leader. A requested sampling-capable event leads the
/// group itself; otherwise a sampling-capable vendor counter (user mode
/// first) is borrowed as a proxy leader whose overflow reads every requested
/// event. Duplicate requests collapse onto their first occurrence.
inline GroupPlan plan_groups(const PlatformProfile& profile, const std::vector<EventRequest>& requests) {
  if (requests.empty()) throw Error(ErrorKind::EmptyRequest, "no events requested");

  std::vector<const EventRequest*> unique;
  std::set<std::string> seen;
  bool want_sampling = false;
  std::optional<std::uint32_t> frequency;
  for (const auto& r : requests) {
    if (r.want_sampling) {
      if (r.sample_frequency_hz < 1 || r.sample_frequency_hz > kMaxSampleFrequencyHz)
        throw Error(ErrorKind::InvalidRequest,
                    "sample frequency must be in [1, 100000], got " +
                        std::to_string(r.sample_frequency_hz));
      if (frequency && *frequency != r.sample_frequency_hz)
        throw Error(ErrorKind::InvalidRequest, "all sampled events must share one frequency");
      frequency = r.sample_frequency_hz;
      want_sampling = true;
    }
    if (seen.insert(r.event.name).second) unique.push_back(&r);
  }

  GroupPlan plan;
  plan.counter_budget = profile.counter_budget;
  plan.sampling = want_sampling;

  if (!want_sampling) {
    plan.leader = unique.front()->event;
    for (std::size_t i = 1; i < unique.size(); ++i) plan.members.push_back(unique[i]->event);
    return plan;
  }
  plan.sample_frequency_hz = *frequency;

  // Sampling capability is a property of the core, so consult the profile's
  // copy of the event rather than trusting the request.
  auto capable = [&](const EventDescriptor& e) {
    const auto* known = profile.find_event(e.name);
    return known ? known->sampling_capable : false;
  };

  for (const auto* r : unique) {
    if (!capable(r->event)) continue;
    plan.leader = *profile.find_event(r->event.name);
    for (const auto* other : unique)
      if (other != r) plan.members.push_back(other->event);
    return plan;
  }

  const auto* proxy = detail::pick_proxy_leader(profile);
  if (!proxy)
    throw Error(ErrorKind::SamplingUnsupported,
                "no sampling-capable counter on " + describe_capabilities(profile));
  plan.leader = *proxy;
  plan.leader_is_proxy = true;
  for (const auto* r : unique) plan.members.push_back(r->event);
  return plan;
}

/// Looks event names up in the profile's catalog.
inline std::vector<EventDescriptor> resolve_events(const PlatformProfile& profile,
                                                   const std::vector<std::string>& names) {
  std::vector<EventDescriptor> out;
  for (const auto& n : names) {
    const auto* e = profile.find_event(n);
    if (!e) {
      std::string valid;
      for (const auto& known : profile.events) valid += (valid.empty() ? "" : ", ") + known.name;
      throw Error(ErrorKind::UnknownEvent,
                  "unknown event '" + n + "' for " + profile.name + "; valid events: " + valid);
    }
    out.push_back(*e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample records
// ---------------------------------------------------------------------------

struct SampleRecord {
  std::uint64_t timestamp_ns = 0;
  std::int32_t pid = 0;
  std::int32_t tid = 0;
  std::uint64_t pc = 0;
  std::vector<std::uint64_t> callchain;  // leaf first
  std::map<std::string, std::uint64_t> counter_values;  // cumulative group read
  std::map<std::uint64_t, std::string> symbols;  // optional per-record "syms"

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct CounterDelta {
  std::map<std::string, std::uint64_t> values;
  bool reset = false;  // at least one counter went backwards
};

/// cur - prev per event. A counter that went backwards is clamped to 0.
/// Events missing from prev count from zero.
inline CounterDelta delta_counters(const SampleRecord& prev, const SampleRecord& cur) {
  if (prev.tid != cur.tid)
    throw Error(ErrorKind::TidMismatch,
                "tid " + std::to_string(prev.tid) + " vs " + std::to_string(cur.tid));
  CounterDelta d;
  for (const auto& [name, value] : cur.counter_values) {
    const auto it = prev.counter_values.find(name);
    const std::uint64_t before = it == prev.counter_values.end() ? 0 : it->second;
    if (value < before) {
      d.values[name] = 0;
      d.reset = true;
    } else {
      d.values[name] = value - before;
    }
  }
  return d;
}

/// Per-sample deltas for a whole stream. The first sample of each thread is
/// measured against zero (group reads start at session start).
inline std::vector<CounterDelta> stream_deltas(const std::vector<SampleRecord>& samples) {
  std::vector<CounterDelta> out;
  out.reserve(samples.size());
  std::map<std::int32_t, const SampleRecord*> last;
  for (const auto& s : samples) {
    auto [it, fresh] = last.try_emplace(s.tid, &s);
    if (fresh) {
      SampleRecord zero;
      zero.tid = s.tid;
      out.push_back(delta_counters(zero, s));
    } else {
      out.push_back(delta_counters(*it->second, s));
      it->second = &s;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace format: one JSON object per line.
// {"ts":..,"pid":..,"tid":..,"pc":..,"stack":[..],"counters":{..},"syms":{"0x..":".."}}
// ---------------------------------------------------------------------------

inline std::string serialize_trace_line(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["ts"] = r.timestamp_ns;
  j["pid"] = r.pid;
  j["tid"] = r.tid;
  j["pc"] = r.pc;
  j["stack"] = r.callchain;
  nlohmann::ordered_json counters = nlohmann::ordered_json::object();
  for (const auto& [name, value] : r.counter_values) counters[name] = value;
  j["counters"] = std::move(counters);
  if (!r.symbols.empty()) {
    nlohmann::ordered_json syms = nlohmann::ordered_json::object();
    for (const auto& [addr, name] : r.symbols) syms[detail::hex(addr)] = name;
    j["syms"] = std::move(syms);
  }
  return j.dump();
}

struct DecodedLine {
  std::optional<SampleRecord> record;
  std::string problem;  // set when the line is well-formed JSON but not a valid record
};

/// Syntax errors are fatal (TraceFormatError); schema violations come back
/// as a problem description so the caller can skip and count them.
inline DecodedLine decode_trace_line(std::string_view line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(ErrorKind::TraceFormatError,
                "line " + std::to_string(line_no) + ": " + ex.what());
  }
  DecodedLine out;
  if (!j.is_object()) {
    out.problem = "record is not an object";
    return out;
  }
  // nlohmann converts negative numbers to unsigned silently.
  auto u64 = [](const nlohmann::json& v, const char* field) {
    if (!v.is_number_unsigned()) throw Error(ErrorKind::TraceFormatError, std::string(field) + " must be unsigned");
    return v.get<std::uint64_t>();
  };
  try {
    SampleRecord r;
    r.timestamp_ns = u64(j.at("ts"), "ts");
    r.pid = j.at("pid").get<std::int32_t>();
    r.tid = j.at("tid").get<std::int32_t>();
    r.pc = u64(j.at("pc"), "pc");
    if (!j.at("stack").is_array() || !j.at("counters").is_object())
      throw Error(ErrorKind::TraceFormatError, "stack must be an array and counters an object");
    for (const auto& addr : j.at("stack")) r.callchain.push_back(u64(addr, "stack entry"));
    for (const auto& [name, value] : j.at("counters").items())
      r.counter_values[name] = u64(value, "counter value");
    if (j.contains("syms"))
      for (const auto& [addr, name] : j["syms"].items())
        r.symbols[detail::parse_hex_u64(addr)] = name.get<std::string>();
    if (r.callchain.empty()) {
      out.problem = "empty stack";
      return out;
    }
    out.record = std::move(r);
  } catch (const nlohmann::json::exception& ex) {
    out.problem = ex.what();
  } catch (const Error& ex) {
    out.problem = ex.what();
  }
  return out;
}

}  // namespace mperf
