#pragma once

// CPU identification and the per-core capability / event database.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mperf/detail/format.hpp"
#include "mperf/error.hpp"

namespace mperf {

struct CpuIdentity {
  std::uint64_t vendor_id = 0;  // mvendorid
  std::uint64_t arch_id = 0;    // marchid
  std::uint64_t impl_id = 0;    // mimpid

  friend bool operator==(const CpuIdentity&, const CpuIdentity&) = default;
};

enum class RvvVersion { None, V0_7_1, V1_0 };
enum class OverflowSupport { None, Limited, Full };
enum class UpstreamLinux { No, Partial, Yes };
enum class EventKind { StandardHardware, VendorRaw };
enum class ModeScope { All, UserOnly, SupervisorOnly, MachineOnly };

inline constexpr std::array<std::string_view, 5> kStandardEventNames = {
    "cycles", "instructions", "cache-references", "cache-misses", "branch-misses"};

inline bool is_standard_event_name(std::string_view name) {
  return std::find(kStandardEventNames.begin(), kStandardEventNames.end(), name) !=
         kStandardEventNames.end();
}

struct EventDescriptor {
  std::string name;
  EventKind kind = EventKind::StandardHardware;
  std::uint64_t raw_code = 0;
  bool sampling_capable = false;
  ModeScope mode_scope = ModeScope::All;

  friend bool operator==(const EventDescriptor&, const EventDescriptor&) = default;
};

struct PlatformProfile {
  std::string name;
  bool out_of_order = false;
  RvvVersion rvv_version = RvvVersion::None;
  OverflowSupport overflow_support = OverflowSupport::None;
  UpstreamLinux upstream_linux = UpstreamLinux::No;
  std::vector<EventDescriptor> events;
  // Database key. Profiles without a vendor id are reachable by name only.
  std::optional<std::uint64_t> vendor_id;
  std::optional<std::uint64_t> arch_id;
  std::optional<std::uint64_t> impl_id;
  std::size_t counter_budget = 8;

  const EventDescriptor* find_event(std::string_view event_name) const {
    for (const auto& e : events)
      if (e.name == event_name) return &e;
    return nullptr;
  }

  bool has_sampling_counter() const {
    return std::any_of(events.begin(), events.end(),
                       [](const EventDescriptor& e) { return e.sampling_capable; });
  }

  friend bool operator==(const PlatformProfile&, const PlatformProfile&) = default;
};

enum class CapabilityDimension { OutOfOrder, RvvVersion, OverflowSupport, UpstreamLinux };

using CapabilityValue = std::variant<bool, RvvVersion, OverflowSupport, UpstreamLinux>;

inline CapabilityValue capability(const PlatformProfile& profile, CapabilityDimension dim) {
  switch (dim) {
    case CapabilityDimension::OutOfOrder: return profile.out_of_order;
    case CapabilityDimension::RvvVersion: return profile.rvv_version;
    case CapabilityDimension::OverflowSupport: return profile.overflow_support;
    case CapabilityDimension::UpstreamLinux: return profile.upstream_linux;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Enum <-> text. The database uses the enumerator spellings.
// ---------------------------------------------------------------------------

inline const char* to_string(RvvVersion v) {
  switch (v) {
    case RvvVersion::None: return "None";
    case RvvVersion::V0_7_1: return "V0_7_1";
    case RvvVersion::V1_0: return "V1_0";
  }
  return "None";
}
inline const char* to_string(OverflowSupport v) {
  switch (v) {
    case OverflowSupport::None: return "None";
    case OverflowSupport::Limited: return "Limited";
    case OverflowSupport::Full: return "Full";
  }
  return "None";
}
inline const char* to_string(UpstreamLinux v) {
  switch (v) {
    case UpstreamLinux::No: return "No";
    case UpstreamLinux::Partial: return "Partial";
    case UpstreamLinux::Yes: return "Yes";
  }
  return "No";
}
inline const char* to_string(EventKind v) {
  return v == EventKind::VendorRaw ? "VendorRaw" : "StandardHardware";
}
inline const char* to_string(ModeScope v) {
  switch (v) {
    case ModeScope::All: return "All";
    case ModeScope::UserOnly: return "UserOnly";
    case ModeScope::SupervisorOnly: return "SupervisorOnly";
    case ModeScope::MachineOnly: return "MachineOnly";
  }
  return "All";
}

namespace detail {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::array<Enum, N>& values, const char* field) {
  for (Enum v : values)
    if (text == to_string(v)) return v;
  throw Error(ErrorKind::DatabaseError, std::string("bad value '") + text + "' for " + field);
}

inline std::uint64_t parse_hex_u64(std::string_view text) {
  text = trim(text);
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) text.remove_prefix(2);
  if (text.empty() || text.size() > 16)
    throw Error(ErrorKind::ParseError, "not a 64-bit hex value: '" + std::string(text) + "'");
  std::uint64_t value = 0;
  for (char c : text) {
    int digit;
    if (c >= '0' && c <= '9') digit = c - '0';
    else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') digit = c - 'A' + 10;
    else throw Error(ErrorKind::ParseError, "not a hex value: '" + std::string(text) + "'");
    value = (value << 4) | static_cast<std::uint64_t>(digit);
  }
  return value;
}

inline std::uint64_t json_u64(const nlohmann::json& j, const char* field) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return j.get<std::uint64_t>();
  if (j.is_string()) {
    try {
      return parse_hex_u64(j.get<std::string>());
    } catch (const Error&) {
    }
  }
  throw Error(ErrorKind::DatabaseError, std::string("field '") + field + "' must be unsigned");
}

}  // namespace detail

inline EventDescriptor event_from_json(const nlohmann::json& j) {
  using detail::parse_enum;
  if (!j.is_object()) throw Error(ErrorKind::DatabaseError, "event entry must be an object");
  EventDescriptor e;
  try {
    e.name = j.at("name").get<std::string>();
    e.kind = parse_enum(j.at("kind").get<std::string>(),
                        std::array{EventKind::StandardHardware, EventKind::VendorRaw}, "kind");
    e.sampling_capable = j.at("sampling_capable").get<bool>();
    e.mode_scope = parse_enum(j.value("mode_scope", std::string("All")),
                              std::array{ModeScope::All, ModeScope::UserOnly,
                                         ModeScope::SupervisorOnly, ModeScope::MachineOnly},
                              "mode_scope");
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::DatabaseError, std::string("event entry: ") + ex.what());
  }
  if (e.kind == EventKind::StandardHardware) {
    if (!is_standard_event_name(e.name))
      throw Error(ErrorKind::DatabaseError, "'" + e.name + "' is not a standard hardware event");
    if (j.contains("raw_code") && detail::json_u64(j["raw_code"], "raw_code") != 0)
      throw Error(ErrorKind::DatabaseError, "standard event '" + e.name + "' carries a raw code");
  } else {
    if (!j.contains("raw_code"))
      throw Error(ErrorKind::DatabaseError, "vendor event '" + e.name + "' needs raw_code");
    e.raw_code = detail::json_u64(j["raw_code"], "raw_code");
  }
  return e;
}

inline nlohmann::ordered_json event_to_json(const EventDescriptor& e) {
  nlohmann::ordered_json j;
  j["name"] = e.name;
  j["kind"] = to_string(e.kind);
  j["raw_code"] = e.raw_code;
  j["sampling_capable"] = e.sampling_capable;
  j["mode_scope"] = to_string(e.mode_scope);
  return j;
}

/// Checks the structural invariants every profile must satisfy.
inline void validate_profile(const PlatformProfile& p) {
  if (p.name.empty()) throw Error(ErrorKind::DatabaseError, "profile without a name");
  for (std::size_t i = 0; i < p.events.size(); ++i)
    for (std::size_t k = i + 1; k < p.events.size(); ++k)
      if (p.events[i].name == p.events[k].name)
        throw Error(ErrorKind::DatabaseError,
                    p.name + ": duplicate event '" + p.events[i].name + "'");
  const bool sampling = p.has_sampling_counter();
  if (p.overflow_support == OverflowSupport::None && sampling)
    throw Error(ErrorKind::DatabaseError,
                p.name + ": sampling-capable event on a core without overflow support");
  if (p.overflow_support != OverflowSupport::None && !sampling)
    throw Error(ErrorKind::DatabaseError,
                p.name + ": overflow support declared but no sampling-capable event");
  if (p.counter_budget < 2)
    throw Error(ErrorKind::DatabaseError, p.name + ": counter_budget must be at least 2");
}

inline PlatformProfile profile_from_json(const nlohmann::json& j) {
  using detail::parse_enum;
  if (!j.is_object()) throw Error(ErrorKind::DatabaseError, "profile entry must be an object");
  PlatformProfile p;
  try {
    p.name = j.at("name").get<std::string>();
    p.out_of_order = j.at("out_of_order").get<bool>();
    p.rvv_version = parse_enum(j.at("rvv_version").get<std::string>(),
                               std::array{RvvVersion::None, RvvVersion::V0_7_1, RvvVersion::V1_0},
                               "rvv_version");
    p.overflow_support = parse_enum(
        j.at("overflow_support").get<std::string>(),
        std::array{OverflowSupport::None, OverflowSupport::Limited, OverflowSupport::Full},
        "overflow_support");
    p.upstream_linux = parse_enum(
        j.at("upstream_linux").get<std::string>(),
        std::array{UpstreamLinux::No, UpstreamLinux::Partial, UpstreamLinux::Yes},
        "upstream_linux");
    for (const auto& ev : j.at("events")) p.events.push_back(event_from_json(ev));
    if (j.contains("counter_budget")) p.counter_budget = j["counter_budget"].get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::DatabaseError, std::string("profile entry: ") + ex.what());
  }
  if (j.contains("vendor_id")) p.vendor_id = detail::json_u64(j["vendor_id"], "vendor_id");
  if (j.contains("arch_id")) p.arch_id = detail::json_u64(j["arch_id"], "arch_id");
  if (j.contains("impl_id")) p.impl_id = detail::json_u64(j["impl_id"], "impl_id");
  if (p.vendor_id.has_value() != p.arch_id.has_value())
    throw Error(ErrorKind::DatabaseError, p.name + ": vendor_id and arch_id go together");
  validate_profile(p);
  return p;
}

/// The conservative profile used for cores the database does not know.
inline PlatformProfile generic_profile() {
  PlatformProfile p;
  p.name = "generic";
  p.upstream_linux = UpstreamLinux::Yes;
  p.events = {{"cycles", EventKind::StandardHardware, 0, false, ModeScope::All},
              {"instructions", EventKind::StandardHardware, 0, false, ModeScope::All}};
  return p;
}

class PlatformDatabase {
 public:
  PlatformDatabase() = default;
  explicit PlatformDatabase(std::vector<PlatformProfile> profiles) : profiles_(std::move(profiles)) {
    for (std::size_t i = 0; i < profiles_.size(); ++i)
      for (std::size_t k = i + 1; k < profiles_.size(); ++k)
        if (profiles_[i].name == profiles_[k].name)
          throw Error(ErrorKind::DatabaseError, "duplicate profile '" + profiles_[i].name + "'");
  }

  static PlatformDatabase from_json_text(std::string_view text) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
      throw Error(ErrorKind::DatabaseError, ex.what());
    }
    if (!doc.is_array()) throw Error(ErrorKind::DatabaseError, "database must be a JSON array");
    std::vector<PlatformProfile> profiles;
    for (const auto& entry : doc) profiles.push_back(profile_from_json(entry));
    return PlatformDatabase(std::move(profiles));
  }

  static PlatformDatabase from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::DatabaseError, "cannot read platform database " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
  }

  static PlatformDatabase embedded() {
    static const char* const kText =
#include "mperf/detail/platform_db.inc"
        ;
    return from_json_text(kText);
  }

  /// Embedded database unless MPERF_PLATFORM_DB names a replacement file.
  static PlatformDatabase load_default() {
    if (const char* path = std::getenv("MPERF_PLATFORM_DB"); path && *path) return from_file(path);
    return embedded();
  }

  const std::vector<PlatformProfile>& profiles() const { return profiles_; }

  const PlatformProfile* find(std::string_view name) const {
    for (const auto& p : profiles_)
      if (p.name == name) return &p;
    return nullptr;
  }

  /// Total: unknown identities map to the generic counting-only profile.
  /// Key is (vendor_id, arch_id); an exact impl_id match wins over an
  /// entry without impl_id.
  PlatformProfile identify(const CpuIdentity& id) const {
    const PlatformProfile* wildcard = nullptr;
    for (const auto& p : profiles_) {
      if (!p.vendor_id || *p.vendor_id != id.vendor_id || *p.arch_id != id.arch_id) continue;
      if (p.impl_id) {
        if (*p.impl_id == id.impl_id) return p;
      } else if (!wildcard) {
        wildcard = &p;
      }
    }
    if (wildcard) return *wildcard;
    if (const auto* g = find("generic")) return *g;
    return generic_profile();
  }

 private:
  std::vector<PlatformProfile> profiles_;
};

inline PlatformProfile identify_platform(const CpuIdentity& id) {
  return PlatformDatabase::load_default().identify(id);
}

/// Parses cpuinfo-style "key : value" text. The first occurrence of each key
/// wins (the kernel repeats them per hart).
inline CpuIdentity read_local_identity(std::string_view proc_info_text) {
  std::optional<std::uint64_t> vendor, arch, impl;
  std::size_t pos = 0;
  while (pos <= proc_info_text.size()) {
    auto eol = proc_info_text.find('\n', pos);
    if (eol == std::string_view::npos) eol = proc_info_text.size();
    const auto line = proc_info_text.substr(pos, eol - pos);
    pos = eol + 1;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const auto key = detail::trim(line.substr(0, colon));
    const auto value = line.substr(colon + 1);
    auto assign = [&](std::optional<std::uint64_t>& slot) {
      if (!slot) slot = detail::parse_hex_u64(value);
    };
    if (key == "mvendorid") assign(vendor);
    else if (key == "marchid") assign(arch);
    else if (key == "mimpid") assign(impl);
  }
  if (!vendor) throw Error(ErrorKind::MissingField, "mvendorid");
  if (!arch) throw Error(ErrorKind::MissingField, "marchid");
  if (!impl) throw Error(ErrorKind::MissingField, "mimpid");
  return {*vendor, *arch, *impl};
}

/// Profile for the running host: MPERF_FORCE_PLATFORM, then /proc/cpuinfo,
/// then the generic fallback.
inline PlatformProfile detect_platform(const PlatformDatabase& db,
                                       const std::string& cpuinfo_path = "/proc/cpuinfo") {
  if (const char* forced = std::getenv("MPERF_FORCE_PLATFORM"); forced && *forced) {
    if (const auto* p = db.find(forced)) return *p;
    throw Error(ErrorKind::DatabaseError,
                std::string("MPERF_FORCE_PLATFORM names unknown platform '") + forced + "'");
  }
  std::ifstream in(cpuinfo_path);
  if (in) {
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      return db.identify(read_local_identity(ss.str()));
    } catch (const Error&) {
      // Not a RISC-V host, or a kernel that hides the ID registers.
    }
  }
  if (const auto* g = db.find("generic")) return *g;
  return generic_profile();
}

/// One-line human summary of the capability row, used in diagnostics.
inline std::string describe_capabilities(const PlatformProfile& p) {
  std::string out = p.name + ": out-of-order " + (p.out_of_order ? "yes" : "no");
  out += ", RVV ";
  switch (p.rvv_version) {
    case RvvVersion::None: out += "not supported"; break;
    case RvvVersion::V0_7_1: out += "0.7.1"; break;
    case RvvVersion::V1_0: out += "1.0"; break;
  }
  out += ", counter overflow interrupts ";
  switch (p.overflow_support) {
    case OverflowSupport::None: out += "not supported"; break;
    case OverflowSupport::Limited: out += "limited (vendor counters only)"; break;
    case OverflowSupport::Full: out += "supported"; break;
  }
  out += ", upstream Linux ";
  switch (p.upstream_linux) {
    case UpstreamLinux::No: out += "no"; break;
    case UpstreamLinux::Partial: out += "partial"; break;
    case UpstreamLinux::Yes: out += "yes"; break;
  }
  return out;
}

}  // namespace mperf
