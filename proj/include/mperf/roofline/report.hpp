#pragma once

// Per-loop records produced by instrumented programs and the run-report file
// that carries them from the runtime to the analysis.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "mperf/error.hpp"

namespace mperf::roofline {

struct LoopInfo {
  std::uint32_t line = 0;
  std::string filename;
  std::string func_name;

  auto key() const { return std::tie(filename, line, func_name); }
  friend bool operator==(const LoopInfo& a, const LoopInfo& b) { return a.key() == b.key(); }
  friend bool operator<(const LoopInfo& a, const LoopInfo& b) { return a.key() < b.key(); }

  /// `func@file:line`, the label used in tables and plots.
  std::string label() const { return func_name + "@" + filename + ":" + std::to_string(line); }
};

struct LoopCounters {
  std::uint64_t load_bytes = 0;
  std::uint64_t store_bytes = 0;
  std::uint64_t int_ops = 0;
  std::uint64_t fp_ops = 0;

  LoopCounters& operator+=(const LoopCounters& o) {
    load_bytes += o.load_bytes;
    store_bytes += o.store_bytes;
    int_ops += o.int_ops;
    fp_ops += o.fp_ops;
    return *this;
  }
  std::uint64_t traffic_bytes() const { return load_bytes + store_bytes; }
  bool is_zero() const { return load_bytes == 0 && store_bytes == 0 && int_ops == 0 && fp_ops == 0; }

  friend bool operator==(const LoopCounters&, const LoopCounters&) = default;
};

enum class Phase { Baseline, Instrumented };

inline const char* to_string(Phase p) { return p == Phase::Baseline ? "baseline" : "instrumented"; }

inline Phase parse_phase(const std::string& text) {
  if (text == "baseline") return Phase::Baseline;
  if (text == "instrumented") return Phase::Instrumented;
  throw Error(ErrorKind::ReportFormatError, "unknown phase '" + text + "'");
}

struct LoopRecord {
  LoopInfo info;
  LoopCounters counters;
  std::uint64_t invocations = 0;
  std::uint64_t wall_time_ns = 0;
  Phase phase = Phase::Baseline;

  friend bool operator==(const LoopRecord&, const LoopRecord&) = default;
};

struct RunReport {
  Phase phase = Phase::Baseline;
  std::vector<LoopRecord> records;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

inline std::string serialize_report(const RunReport& report) {
  nlohmann::ordered_json doc;
  doc["phase"] = to_string(report.phase);
  doc["records"] = nlohmann::ordered_json::array();
  for (const auto& r : report.records) {
    nlohmann::ordered_json j;
    j["file"] = r.info.filename;
    j["line"] = r.info.line;
    j["func"] = r.info.func_name;
    j["invocations"] = r.invocations;
    j["wall_ns"] = r.wall_time_ns;
    j["load_bytes"] = r.counters.load_bytes;
    j["store_bytes"] = r.counters.store_bytes;
    j["int_ops"] = r.counters.int_ops;
    j["fp_ops"] = r.counters.fp_ops;
    doc["records"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

inline RunReport parse_report(const std::string& text) {
  RunReport report;
  try {
    const auto doc = nlohmann::json::parse(text);
    report.phase = parse_phase(doc.at("phase").get<std::string>());
    for (const auto& j : doc.at("records")) {
      LoopRecord r;
      r.info.filename = j.at("file").get<std::string>();
      r.info.line = j.at("line").get<std::uint32_t>();
      r.info.func_name = j.at("func").get<std::string>();
      r.invocations = j.at("invocations").get<std::uint64_t>();
      r.wall_time_ns = j.at("wall_ns").get<std::uint64_t>();
      r.counters.load_bytes = j.at("load_bytes").get<std::uint64_t>();
      r.counters.store_bytes = j.at("store_bytes").get<std::uint64_t>();
      r.counters.int_ops = j.at("int_ops").get<std::uint64_t>();
      r.counters.fp_ops = j.at("fp_ops").get<std::uint64_t>();
      r.phase = report.phase;
      report.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::ReportFormatError, ex.what());
  }
  return report;
}

inline RunReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ReportMissing, path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

}  // namespace mperf::roofline
