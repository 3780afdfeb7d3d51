#pragma once

// Subcommands of the `mperf` tool. Kept in a header so tests can drive the
// exact code path the binary runs, with captured streams.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mperf/detail/format.hpp"
#include "mperf/error.hpp"
#include "mperf/hotspots.hpp"
#include "mperf/platform.hpp"
#include "mperf/roofline/analysis.hpp"
#include "mperf/sampling.hpp"
#include "mperf/session.hpp"

namespace mperf::cli {

namespace detail {

using mperf::detail::fixed;
using mperf::detail::pad_left;
using mperf::detail::pad_right;
using mperf::detail::thousands;

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!(out << content) || !out.flush())
    throw Error(ErrorKind::Usage, "cannot write " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PlatformProfile select_platform(const std::string& forced) {
  const auto db = PlatformDatabase::load_default();
  if (!forced.empty()) {
    if (const auto* p = db.find(forced)) return *p;
    std::string names;
    for (const auto& p : db.profiles()) names += (names.empty() ? "" : ", ") + p.name;
    throw Error(ErrorKind::Usage, "unknown platform '" + forced + "'; known: " + names);
  }
  return detect_platform(db);
}

inline void require_replay_file(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::BackendUnavailable, "replay trace not found: " + path);
}

inline void report_session_stats(const SessionStats& stats, std::ostream& err) {
  if (stats.corrupt_records)
    err << "warning: skipped " << stats.corrupt_records << " corrupt record(s)\n";
  for (const auto& d : stats.corrupt_details) err << "  " << d << "\n";
  if (stats.equal_timestamp_warnings)
    err << "warning: " << stats.equal_timestamp_warnings
        << " record(s) share a timestamp with the previous record of their thread\n";
  for (const auto& w : stats.warnings) err << "warning: " << w << "\n";
}

inline std::string describe_plan(const GroupPlan& plan) {
  std::string out = "leader: " + plan.leader.name + (plan.leader_is_proxy ? " (proxy)" : "") + "\n";
  out += "members:";
  if (plan.members.empty()) out += " (none)";
  for (const auto& m : plan.members) out += " " + m.name;
  out += "\n";
  if (plan.sampling) out += "frequency: " + std::to_string(plan.sample_frequency_hz) + " Hz\n";
  const auto groups = hardware_groups(plan);
  if (groups.size() > 1)
    out += "multiplexed: " + std::to_string(groups.size()) + " groups (budget " +
           std::to_string(plan.counter_budget) + ")\n";
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// stat
// ---------------------------------------------------------------------------

struct StatOptions {
  std::vector<std::string> events{"cycles", "instructions"};
  std::string replay;
  std::string platform;
  bool json = false;
  std::vector<std::string> target;
};

inline int cmd_stat(const StatOptions& o, std::ostream& out, std::ostream& err) {
  using namespace detail;
  const auto profile = select_platform(o.platform);
  std::vector<EventRequest> requests;
  for (const auto& e : resolve_events(profile, o.events)) requests.push_back({e, false});
  const auto plan = plan_groups(profile, requests);

  std::map<std::string, std::uint64_t> totals;
  int child_status = 0;
  std::string source;
  if (!o.replay.empty()) {
    require_replay_file(o.replay);
    ReplaySession session(o.replay, std::set<std::string>(o.events.begin(), o.events.end()));
    const auto samples = collect(session);
    report_session_stats(session.stats(), err);
    for (const auto& name : o.events) totals[name] = 0;
    for (const auto& d : stream_deltas(samples))
      for (const auto& name : o.events) totals[name] += d.values.at(name);
    source = "replay:" + o.replay;
  } else {
    if (o.target.empty()) throw Error(ErrorKind::Usage, "stat needs a command or --replay");
#ifdef __linux__
    const auto result = count_command(plan, o.target);
    totals = result.totals;
    child_status = result.exit_status;
#else
    throw Error(ErrorKind::BackendUnavailable, "live counting needs Linux perf events");
#endif
    for (const auto& a : o.target) source += (source.empty() ? "" : " ") + a;
  }

  const bool have_ipc = totals.count("cycles") && totals.count("instructions");
  const double run_ipc = have_ipc ? ipc(totals["instructions"], totals["cycles"]) : 0.0;
  if (o.json) {
    nlohmann::ordered_json j;
    j["platform"] = profile.name;
    j["source"] = source;
    j["events"] = nlohmann::ordered_json::object();
    for (const auto& name : o.events) j["events"][name] = totals[name];
    if (have_ipc) j["ipc"] = run_ipc;
    out << j.dump(2) << "\n";
  } else {
    out << "Performance counter stats for '" << source << "' (platform " << profile.name << "):\n\n";
    for (const auto& name : o.events)
      out << pad_right(name, 16) << pad_left(thousands(totals[name]), 20) << "\n";
    if (have_ipc) out << pad_right("IPC", 16) << pad_left(fixed(run_ipc, 2), 20) << "\n";
  }
  if (child_status != 0) {
    err << "error: command exited with status " << child_status << "\n";
    return kExitChild;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// record
// ---------------------------------------------------------------------------

struct RecordOptions {
  std::uint32_t frequency_hz = kDefaultSampleFrequencyHz;
  std::string out = "mperf.trace.jsonl";
  std::string replay;
  std::string platform;
  std::vector<std::string> target;
};

inline int cmd_record(const RecordOptions& o, std::ostream& out, std::ostream& err) {
  using namespace detail;
  const auto profile = select_platform(o.platform);
  std::vector<EventRequest> requests;
  for (const auto& e : resolve_events(profile, {"cycles", "instructions"}))
    requests.push_back({e, true, o.frequency_hz});
  GroupPlan plan;
  try {
    plan = plan_groups(profile, requests);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SamplingUnsupported) throw;
    err << "error: sampling is not possible on this core. " << describe_capabilities(profile)
        << ".\nCounter overflow interrupts are required; use 'mperf stat' for whole-run counts.\n";
    return e.exit_code();
  }
  out << "platform: " << profile.name << "\n" << describe_plan(plan);

  if (o.replay.empty() && o.target.empty())
    throw Error(ErrorKind::Usage, "record needs a command or --replay");
  if (!o.replay.empty()) require_replay_file(o.replay);
  const Backend backend = o.replay.empty() ? Backend{LiveBackend{}} : Backend{ReplayBackend{o.replay}};
  auto session = open_session(plan, ProcessTarget{o.target, std::nullopt}, backend);

  std::ofstream trace(o.out, std::ios::binary | std::ios::trunc);
  if (!trace) throw Error(ErrorKind::Usage, "cannot write " + o.out);
  std::size_t n = 0;
  while (auto r = session->next_sample()) {
    trace << serialize_trace_line(*r) << "\n";
    ++n;
  }
  trace.flush();
  report_session_stats(session->stats(), err);
  out << "wrote " << n << " samples to " << o.out << "\n";
#ifdef __linux__
  if (const auto* live = dynamic_cast<const LiveSession*>(session.get());
      live && live->target_exit_status() != 0) {
    err << "error: command exited with status " << live->target_exit_status() << "\n";
    return kExitChild;
  }
#endif
  return kExitOk;
}

// ---------------------------------------------------------------------------
// flamegraph
// ---------------------------------------------------------------------------

struct FlamegraphOptions {
  std::string trace;
  std::string metric = "cycles";
  std::string svg_out;
  std::string folded_out;
  std::string symbols;
  std::size_t top = 10;
};

inline int cmd_flamegraph(const FlamegraphOptions& o, std::ostream& out, std::ostream& err) {
  using namespace detail;
  if (o.metric != "cycles" && o.metric != "instructions")
    throw Error(ErrorKind::Usage, "--metric must be cycles or instructions");
  ReplaySession session(o.trace, {o.metric});
  const auto samples = collect(session);
  report_session_stats(session.stats(), err);
  if (samples.empty()) {
    if (session.stats().corrupt_records > 0)
      throw Error(ErrorKind::MetricMissing, "no usable samples carry counter '" + o.metric + "'");
    throw Error(ErrorKind::EmptyInput, "trace has no samples: " + o.trace);
  }
  const SymbolMap symbols = o.symbols.empty() ? SymbolMap{} : SymbolMap::load(o.symbols);

  const auto folded = fold_stacks(samples, o.metric, symbols);
  if (!o.folded_out.empty()) write_file(o.folded_out, to_collapsed(folded));
  if (!o.svg_out.empty()) {
    FlameGraphOptions fg;
    fg.title = "Flame Graph";
    write_file(o.svg_out, render_flamegraph(folded, o.metric, fg));
  }

  const bool both = std::all_of(samples.begin(), samples.end(), [](const SampleRecord& s) {
    return s.counter_values.count("cycles") && s.counter_values.count("instructions");
  });
  if (both && !samples.empty()) {
    out << format_hotspot_table(hotspot_table(samples, symbols, o.top));
  } else {
    err << "note: hotspot table needs both cycles and instructions counters\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// roofline
// ---------------------------------------------------------------------------

struct RooflineOptions {
  std::string machine;
  std::string out_dir = "mperf-roofline";
  std::string replay_dir;
  bool json = false;
  std::vector<std::string> target;
};

inline int cmd_roofline(const RooflineOptions& o, std::ostream& out, std::ostream& err) {
  using namespace detail;
  namespace rl = mperf::roofline;
  if (o.machine.empty())
    throw Error(ErrorKind::ModelError,
                std::string("--machine is required; the model file looks like\n  ") +
                    rl::kMachineModelSchema);
  const auto model = rl::load_machine_model(o.machine);

  rl::PhaseReports reports;
  if (!o.replay_dir.empty()) {
    reports.baseline = rl::read_report(rl::phase_report_path(o.replay_dir, rl::Phase::Baseline));
    reports.instrumented =
        rl::read_report(rl::phase_report_path(o.replay_dir, rl::Phase::Instrumented));
  } else {
    if (o.target.empty()) throw Error(ErrorKind::Usage, "roofline needs a command or --replay");
    reports = rl::two_phase_run(o.target, o.out_dir);
    const auto base_out = read_file((std::filesystem::path(o.out_dir) / "baseline.stdout").string());
    const auto inst_out =
        read_file((std::filesystem::path(o.out_dir) / "instrumented.stdout").string());
    if (base_out != inst_out)
      err << "warning: program output differs between baseline and instrumented runs\n";
  }

  const auto analysis = rl::analyze(reports, model);
  for (const auto& w : analysis.warnings) err << "warning: " << w << "\n";
  for (const auto& e : analysis.excluded)
    err << "excluded: " << e.loop.label() << ": " << e.reason << "\n";

  std::filesystem::create_directories(o.out_dir);
  const auto json_text = rl::analysis_json(analysis, model);
  write_file((std::filesystem::path(o.out_dir) / "roofline.json").string(), json_text);
  const bool plottable = std::any_of(analysis.points.begin(), analysis.points.end(), [](const auto& p) {
    return p.arithmetic_intensity_fp > 0 && p.gflops > 0;
  });
  if (plottable)
    write_file((std::filesystem::path(o.out_dir) / "roofline.svg").string(),
               rl::render_roofline(model, analysis.points));

  if (o.json) {
    out << json_text;
    return kExitOk;
  }
  std::size_t w = 4;
  for (const auto& p : analysis.points) w = std::max(w, p.loop.label().size());
  out << "machine: " << model.name << " (peak " << fixed(model.peak_gflops, 3) << " GFLOP/s, "
      << fixed(model.mem_bandwidth_gbs, 3) << " GB/s, knee " << fixed(model.knee(), 4)
      << " FLOP/byte)\n\n";
  out << pad_right("Loop", w) << "  " << pad_left("AI (FLOP/B)", 12) << "  " << pad_left("GFLOP/s", 10)
      << "  " << pad_left("Attainable", 10) << "  " << pad_right("Bound", 12) << "  "
      << pad_left("Overhead", 9) << "\n";
  for (std::size_t i = 0; i < analysis.points.size(); ++i) {
    const auto& p = analysis.points[i];
    const auto& c = analysis.classes[i];
    out << pad_right(p.loop.label(), w) << "  " << pad_left(fixed(p.arithmetic_intensity_fp, 4), 12)
        << "  " << pad_left(fixed(p.gflops, 4), 10) << "  "
        << pad_left(fixed(c.attainable_gflops, 4), 10) << "  " << pad_right(to_string(c.bound), 12)
        << "  " << pad_left(fixed(p.overhead_ratio, 2) + "x", 9)
        << (p.gflops > c.attainable_gflops * (1 + 1e-9) ? "  ! above roof" : "") << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// roofs
// ---------------------------------------------------------------------------

struct RoofsOptions {
  double ipc = 0;
  double flops_per_insn = 0;
  double freq_ghz = 0;
  double bytes_per_cycle = 0;
  std::string name = "custom";
};

inline int cmd_roofs(const RoofsOptions& o, std::ostream& out, std::ostream&) {
  for (double v : {o.ipc, o.flops_per_insn, o.freq_ghz, o.bytes_per_cycle})
    if (!(v > 0)) throw Error(ErrorKind::Usage, "all roof inputs must be positive");
  namespace rl = mperf::roofline;
  rl::MachineModel m;
  m.name = o.name;
  m.frequency_ghz = o.freq_ghz;
  m.peak_gflops = rl::theoretical_compute_peak(o.ipc, o.flops_per_insn, o.freq_ghz);
  m.mem_bandwidth_gbs = rl::bandwidth_from_bytes_per_cycle(o.bytes_per_cycle, o.freq_ghz);
  out << rl::to_json(m).dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mperf: PMU sampling, flame graphs and instrumentation-based roofline analysis"};
  app.require_subcommand(1);

  StatOptions stat;
  auto* stat_cmd = app.add_subcommand("stat", "Count events over a whole run");
  stat_cmd->add_option("-e,--events", stat.events, "Events to count")->delimiter(',');
  stat_cmd->add_option("--replay", stat.replay, "Read counters from a trace instead of running");
  stat_cmd->add_option("--platform", stat.platform, "Platform profile name (skip detection)");
  stat_cmd->add_flag("--json", stat.json, "Machine-readable output");
  stat_cmd->add_option("command", stat.target, "Command to run (after --)");

  RecordOptions record;
  auto* record_cmd = app.add_subcommand("record", "Sample cycles and instructions into a trace");
  record_cmd->add_option("-F,--freq", record.frequency_hz, "Sample frequency in Hz")
      ->check(CLI::Range(1u, kMaxSampleFrequencyHz));
  record_cmd->add_option("-o,--out", record.out, "Trace output path");
  record_cmd->add_option("--replay", record.replay, "Re-record samples from an existing trace");
  record_cmd->add_option("--platform", record.platform, "Platform profile name (skip detection)");
  record_cmd->add_option("command", record.target, "Command to run (after --)");

  FlamegraphOptions fg;
  auto* fg_cmd = app.add_subcommand("flamegraph", "Render a flame graph and hotspot table");
  fg_cmd->add_option("trace", fg.trace, "Trace file")->required();
  fg_cmd->add_option("--metric", fg.metric, "cycles or instructions")
      ->check(CLI::IsMember({"cycles", "instructions"}));
  fg_cmd->add_option("--out", fg.svg_out, "SVG output path");
  fg_cmd->add_option("--folded", fg.folded_out, "Collapsed-stack output path");
  fg_cmd->add_option("--symbols", fg.symbols, "Symbol map: '<hex start> <hex end> <name>' lines");
  fg_cmd->add_option("--top", fg.top, "Rows in the hotspot table")->check(CLI::PositiveNumber);

  RooflineOptions roof;
  auto* roof_cmd = app.add_subcommand("roofline", "Two-phase roofline analysis of an instrumented binary");
  roof_cmd->add_option("--machine", roof.machine, "Machine model JSON");
  roof_cmd->add_option("--out", roof.out_dir, "Output directory");
  roof_cmd->add_option("--replay", roof.replay_dir,
                       "Analyse baseline.json / instrumented.json from this directory");
  roof_cmd->add_flag("--json", roof.json, "Print the JSON report instead of the table");
  roof_cmd->add_option("command", roof.target, "Command to run (after --)");

  RoofsOptions roofs;
  auto* roofs_cmd = app.add_subcommand("roofs", "Compute a machine model from theoretical rates");
  roofs_cmd->add_option("--ipc", roofs.ipc, "Instructions per cycle")->required();
  roofs_cmd->add_option("--flops-per-insn", roofs.flops_per_insn, "FLOP per vector instruction")
      ->required();
  roofs_cmd->add_option("--freq-ghz", roofs.freq_ghz, "Core frequency in GHz")->required();
  roofs_cmd->add_option("--bytes-per-cycle", roofs.bytes_per_cycle, "Sustained bytes per cycle")
      ->required();
  roofs_cmd->add_option("--name", roofs.name, "Model name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*stat_cmd) return cmd_stat(stat, out, err);
    if (*record_cmd) return cmd_record(record, out, err);
    if (*fg_cmd) return cmd_flamegraph(fg, out, err);
    if (*roof_cmd) return cmd_roofline(roof, out, err);
    if (*roofs_cmd) return cmd_roofs(roofs, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mperf::cli
