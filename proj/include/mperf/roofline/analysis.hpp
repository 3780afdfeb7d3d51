#pragma once

// Two-phase run orchestration, baseline/instrumented correlation, roofline
// metrics and plotting.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spawn.h>
#include <sys/wait.h>
#include <fcntl.h>
#include <unistd.h>

#include "json.hpp"
#include "mperf/detail/format.hpp"
#include "mperf/error.hpp"
#include "mperf/roofline/report.hpp"

extern char** environ;

namespace mperf::roofline {

// ---------------------------------------------------------------------------
// Machine model
// ---------------------------------------------------------------------------

enum class CeilingKind { Compute, Bandwidth };

struct ExtraCeiling {
  std::string label;
  CeilingKind kind = CeilingKind::Compute;
  double value = 0;  // GFLOP/s or GB/s
};

struct MachineModel {
  std::string name;
  double frequency_ghz = 0;
  double peak_gflops = 0;
  double mem_bandwidth_gbs = 0;
  std::vector<ExtraCeiling> extra_ceilings;

  /// Arithmetic intensity where the bandwidth roof meets the compute roof.
  double knee() const { return peak_gflops / mem_bandwidth_gbs; }
};

/// ipc x flops per instruction x GHz.
inline double theoretical_compute_peak(double ipc, double flops_per_instruction, double frequency_ghz) {
  return ipc * flops_per_instruction * frequency_ghz;
}

inline double bandwidth_from_bytes_per_cycle(double bytes_per_cycle, double frequency_ghz) {
  return bytes_per_cycle * frequency_ghz;
}

inline constexpr const char* kMachineModelSchema =
    R"({"name": string, "frequency_ghz": number > 0, "peak_gflops": number > 0,)"
    R"( "mem_bandwidth_gbs": number > 0,)"
    R"( "extra_ceilings": [{"label": string, "gflops" | "gbs": number > 0}] (optional)})";

inline void validate_model(const MachineModel& m) {
  auto positive = [](double v, const char* field) {
    if (!(v > 0) || !std::isfinite(v))
      throw Error(ErrorKind::ModelError, std::string(field) + " must be a positive number");
  };
  positive(m.frequency_ghz, "frequency_ghz");
  positive(m.peak_gflops, "peak_gflops");
  positive(m.mem_bandwidth_gbs, "mem_bandwidth_gbs");
  for (const auto& c : m.extra_ceilings) {
    positive(c.value, "extra ceiling value");
    if (c.kind == CeilingKind::Compute && c.value > m.peak_gflops)
      throw Error(ErrorKind::ModelError, "compute ceiling '" + c.label + "' exceeds peak_gflops");
  }
}

inline MachineModel parse_machine_model(const std::string& text) {
  MachineModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.name = j.at("name").get<std::string>();
    m.frequency_ghz = j.at("frequency_ghz").get<double>();
    m.peak_gflops = j.at("peak_gflops").get<double>();
    m.mem_bandwidth_gbs = j.at("mem_bandwidth_gbs").get<double>();
    if (j.contains("extra_ceilings")) {
      for (const auto& c : j["extra_ceilings"]) {
        ExtraCeiling ceiling;
        ceiling.label = c.at("label").get<std::string>();
        const bool compute = c.contains("gflops");
        if (compute == c.contains("gbs"))
          throw Error(ErrorKind::ModelError,
                      "ceiling '" + ceiling.label + "' needs exactly one of gflops / gbs");
        ceiling.kind = compute ? CeilingKind::Compute : CeilingKind::Bandwidth;
        ceiling.value = (compute ? c["gflops"] : c["gbs"]).get<double>();
        m.extra_ceilings.push_back(std::move(ceiling));
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::ModelError, std::string(ex.what()) + "\nexpected " + kMachineModelSchema);
  }
  validate_model(m);
  return m;
}

inline MachineModel load_machine_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ModelError, "cannot read machine model " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_machine_model(ss.str());
}

inline nlohmann::ordered_json to_json(const MachineModel& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["frequency_ghz"] = m.frequency_ghz;
  j["peak_gflops"] = m.peak_gflops;
  j["mem_bandwidth_gbs"] = m.mem_bandwidth_gbs;
  j["extra_ceilings"] = nlohmann::ordered_json::array();
  for (const auto& c : m.extra_ceilings) {
    nlohmann::ordered_json cj;
    cj["label"] = c.label;
    cj[c.kind == CeilingKind::Compute ? "gflops" : "gbs"] = c.value;
    j["extra_ceilings"].push_back(std::move(cj));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Two-phase run
// ---------------------------------------------------------------------------

struct PhaseReports {
  RunReport baseline;
  RunReport instrumented;
};

namespace detail {

inline int spawn_and_wait(const std::vector<std::string>& argv,
                          const std::map<std::string, std::string>& overrides,
                          const std::string& stdout_path) {
  std::vector<std::string> env_storage;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry = *e;
    const auto eq = entry.find('=');
    if (eq != std::string::npos && overrides.count(entry.substr(0, eq))) continue;
    env_storage.push_back(entry);
  }
  for (const auto& [k, v] : overrides) env_storage.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : env_storage) envp.push_back(s.data());
  envp.push_back(nullptr);

  std::vector<std::string> args_storage = argv;
  std::vector<char*> args;
  for (auto& a : args_storage) args.push_back(a.data());
  args.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  if (!stdout_path.empty())
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, stdout_path.c_str(),
                                     O_WRONLY | O_CREAT | O_TRUNC, 0644);
  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) return 127;
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return 127;
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + WTERMSIG(status);
}

}  // namespace detail

inline std::string phase_report_path(const std::filesystem::path& out_dir, Phase phase) {
  return (out_dir / (std::string(to_string(phase)) + ".json")).string();
}

/// Runs the command twice, baseline then instrumented, each writing its own
/// report into out_dir. Child stdout goes to out_dir/<phase>.stdout.
inline PhaseReports two_phase_run(const std::vector<std::string>& command,
                                  const std::filesystem::path& out_dir) {
  if (command.empty()) throw Error(ErrorKind::Usage, "no command to run");
  std::filesystem::create_directories(out_dir);
  PhaseReports result;
  for (Phase phase : {Phase::Baseline, Phase::Instrumented}) {
    const std::string report_path = phase_report_path(out_dir, phase);
    std::filesystem::remove(report_path);
    const std::string stdout_path =
        (out_dir / (std::string(to_string(phase)) + ".stdout")).string();
    const int code = detail::spawn_and_wait(
        command, {{"MPERF_ROOFLINE_MODE", to_string(phase)}, {"MPERF_ROOFLINE_OUT", report_path}},
        stdout_path);
    if (code != 0)
      throw Error(ErrorKind::ChildFailed, std::string(to_string(phase)) + " run exited with " +
                                              std::to_string(code));
    if (!std::filesystem::exists(report_path))
      throw Error(ErrorKind::ReportMissing,
                  std::string(to_string(phase)) +
                      " run wrote no report (is the binary linked against mperf_rt?)");
    auto report = read_report(report_path);
    (phase == Phase::Baseline ? result.baseline : result.instrumented) = std::move(report);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Correlation and metrics
// ---------------------------------------------------------------------------

struct JoinedRow {
  LoopInfo info;
  LoopCounters counters;                    // from the instrumented run
  std::optional<std::uint64_t> baseline_wall_ns;
  std::uint64_t instrumented_wall_ns = 0;
  std::uint64_t invocations = 0;
};

struct Correlation {
  std::vector<JoinedRow> rows;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::map<LoopInfo, LoopRecord> merge_by_key(const RunReport& report) {
  std::map<LoopInfo, LoopRecord> merged;
  for (const auto& r : report.records) {
    auto [it, fresh] = merged.try_emplace(r.info, r);
    if (!fresh) {
      it->second.counters += r.counters;
      it->second.invocations += r.invocations;
      it->second.wall_time_ns += r.wall_time_ns;
    }
  }
  return merged;
}

}  // namespace detail

/// Exact join on (file, line, func). Counters come from the instrumented
/// record, time from the baseline record. Output is ordered by key, so it does
/// not depend on record order.
inline Correlation correlate(const RunReport& baseline, const RunReport& instrumented) {
  Correlation out;
  const auto base = detail::merge_by_key(baseline);
  const auto inst = detail::merge_by_key(instrumented);
  if (inst.empty()) out.warnings.push_back("instrumented report has no loop records");
  for (const auto& [key, rec] : inst) {
    JoinedRow row{key, rec.counters, std::nullopt, rec.wall_time_ns, rec.invocations};
    if (const auto it = base.find(key); it != base.end())
      row.baseline_wall_ns = it->second.wall_time_ns;
    else
      out.warnings.push_back(key.label() + ": missing from baseline run; using instrumented time");
    out.rows.push_back(std::move(row));
  }
  for (const auto& [key, rec] : base)
    if (!inst.count(key)) out.warnings.push_back(key.label() + ": missing from instrumented run");
  return out;
}

struct RooflinePoint {
  LoopInfo loop;
  LoopCounters counters;
  double arithmetic_intensity_fp = 0;     // FLOP / byte
  double arithmetic_intensity_total = 0;  // (int + fp ops) / byte
  double gflops = 0;
  double gbs = 0;
  double baseline_time_s = 0;
  double instrumented_time_s = 0;
  double overhead_ratio = 0;
  bool baseline_missing = false;  // throughput computed from instrumented time
};

/// Throughput and traffic use baseline time; instrumented time only feeds the
/// overhead ratio.
inline RooflinePoint derive_point(const JoinedRow& row) {
  RooflinePoint p;
  p.loop = row.info;
  p.counters = row.counters;
  p.baseline_missing = !row.baseline_wall_ns.has_value();
  const std::uint64_t time_ns = row.baseline_wall_ns.value_or(row.instrumented_wall_ns);
  if (time_ns == 0) throw Error(ErrorKind::ZeroTime, row.info.label());
  const std::uint64_t bytes = row.counters.traffic_bytes();
  if (bytes == 0) throw Error(ErrorKind::ZeroTraffic, row.info.label());

  const double t = static_cast<double>(time_ns) * 1e-9;
  const double b = static_cast<double>(bytes);
  const double fp = static_cast<double>(row.counters.fp_ops);
  p.baseline_time_s = t;
  p.instrumented_time_s = static_cast<double>(row.instrumented_wall_ns) * 1e-9;
  p.arithmetic_intensity_fp = fp / b;
  p.arithmetic_intensity_total = (fp + static_cast<double>(row.counters.int_ops)) / b;
  p.gflops = fp / t / 1e9;
  p.gbs = b / t / 1e9;
  p.overhead_ratio = p.instrumented_time_s / t;
  return p;
}

enum class Bound { MemoryBound, ComputeBound };

inline const char* to_string(Bound b) {
  return b == Bound::MemoryBound ? "MemoryBound" : "ComputeBound";
}

struct BoundClass {
  Bound bound = Bound::MemoryBound;
  double attainable_gflops = 0;
  double efficiency = 0;  // measured / attainable
};

/// attainable = min(peak, ai x bw). A point exactly at the knee is
/// compute bound; comparing against the knee keeps that tie exact.
inline BoundClass classify(const RooflinePoint& point, const MachineModel& model) {
  BoundClass c;
  const double ai = point.arithmetic_intensity_fp;
  if (ai >= model.knee()) {
    c.bound = Bound::ComputeBound;
    c.attainable_gflops = model.peak_gflops;
  } else {
    c.bound = Bound::MemoryBound;
    c.attainable_gflops = ai * model.mem_bandwidth_gbs;
  }
  c.efficiency = c.attainable_gflops > 0 ? point.gflops / c.attainable_gflops : 0.0;
  return c;
}

struct Exclusion {
  LoopInfo loop;
  std::string reason;
};

struct RooflineAnalysis {
  std::vector<RooflinePoint> points;
  std::vector<BoundClass> classes;  // parallel to points
  std::vector<Exclusion> excluded;
  std::vector<std::string> warnings;
};

inline RooflineAnalysis analyze(const PhaseReports& reports, const MachineModel& model) {
  RooflineAnalysis a;
  auto joined = correlate(reports.baseline, reports.instrumented);
  a.warnings = std::move(joined.warnings);
  for (const auto& row : joined.rows) {
    try {
      a.points.push_back(derive_point(row));
      a.classes.push_back(classify(a.points.back(), model));
    } catch (const Error& e) {
      a.excluded.push_back({row.info, e.what()});
    }
  }
  return a;
}

inline std::string analysis_json(const RooflineAnalysis& a, const MachineModel& model) {
  nlohmann::ordered_json doc;
  doc["machine"] = to_json(model);
  doc["knee_ai"] = model.knee();
  doc["points"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const auto& p = a.points[i];
    const auto& c = a.classes[i];
    nlohmann::ordered_json j;
    j["file"] = p.loop.filename;
    j["line"] = p.loop.line;
    j["func"] = p.loop.func_name;
    j["load_bytes"] = p.counters.load_bytes;
    j["store_bytes"] = p.counters.store_bytes;
    j["int_ops"] = p.counters.int_ops;
    j["fp_ops"] = p.counters.fp_ops;
    j["ai_fp"] = p.arithmetic_intensity_fp;
    j["ai_total"] = p.arithmetic_intensity_total;
    j["gflops"] = p.gflops;
    j["gbs"] = p.gbs;
    j["baseline_time_s"] = p.baseline_time_s;
    j["instrumented_time_s"] = p.instrumented_time_s;
    j["overhead_ratio"] = p.overhead_ratio;
    j["baseline_missing"] = p.baseline_missing;
    j["bound"] = to_string(c.bound);
    j["attainable_gflops"] = c.attainable_gflops;
    j["efficiency"] = c.efficiency;
    doc["points"].push_back(std::move(j));
  }
  doc["excluded"] = nlohmann::ordered_json::array();
  for (const auto& e : a.excluded)
    doc["excluded"].push_back({{"loop", e.loop.label()}, {"reason", e.reason}});
  doc["warnings"] = a.warnings;
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Plot
// ---------------------------------------------------------------------------

struct RooflinePlotOptions {
  double width = 900;
  double height = 600;
  double margin_left = 80;
  double margin_right = 40;
  double margin_top = 50;
  double margin_bottom = 60;
};

/// Log-log roofline: x = FLOP/byte, y = GFLOP/s. Points above their roof get
/// an "out-of-model" marker.
inline std::string render_roofline(const MachineModel& model, const std::vector<RooflinePoint>& points,
                                   const RooflinePlotOptions& opt = {}) {
  using mperf::detail::fixed;
  using mperf::detail::xml_escape;
  std::vector<const RooflinePoint*> plotted;
  for (const auto& p : points)
    if (p.arithmetic_intensity_fp > 0 && p.gflops > 0) plotted.push_back(&p);
  if (plotted.empty()) throw Error(ErrorKind::EmptyInput, "no plottable roofline points");

  const double knee = model.knee();
  double ai_min = knee, ai_max = knee, perf_min = model.peak_gflops, perf_max = model.peak_gflops;
  for (const auto* p : plotted) {
    ai_min = std::min(ai_min, p->arithmetic_intensity_fp);
    ai_max = std::max(ai_max, p->arithmetic_intensity_fp);
    perf_min = std::min(perf_min, p->gflops);
    perf_max = std::max(perf_max, p->gflops);
  }
  const double x_lo = std::floor(std::log10(ai_min) - 0.5);
  const double x_hi = std::ceil(std::log10(ai_max) + 0.5);
  const double y_lo = std::floor(std::log10(perf_min) - 0.5);
  const double y_hi = std::ceil(std::log10(perf_max) + 0.5);

  const double plot_w = opt.width - opt.margin_left - opt.margin_right;
  const double plot_h = opt.height - opt.margin_top - opt.margin_bottom;
  auto sx = [&](double ai) { return opt.margin_left + (std::log10(ai) - x_lo) / (x_hi - x_lo) * plot_w; };
  auto sy = [&](double g) {
    return opt.margin_top + plot_h - (std::log10(g) - y_lo) / (y_hi - y_lo) * plot_h;
  };
  const double x_min = std::pow(10.0, x_lo), x_max = std::pow(10.0, x_hi);
  const double y_min = std::pow(10.0, y_lo);

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" standalone=\"no\"?>\n"
      << "<svg version=\"1.1\" width=\"" << fixed(opt.width, 0) << "\" height=\""
      << fixed(opt.height, 0) << "\" xmlns=\"http://www.w3.org/2000/svg\" font-family=\"Verdana\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << fixed(opt.width / 2, 2) << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">"
      << xml_escape("Roofline: " + model.name) << "</text>\n";

  // Decade grid and tick labels.
  char tick[32];
  for (double e = x_lo; e <= x_hi + 1e-9; e += 1) {
    const double x = sx(std::pow(10.0, e));
    std::snprintf(tick, sizeof(tick), "%g", std::pow(10.0, e));
    svg << "<line class=\"grid\" x1=\"" << fixed(x, 2) << "\" y1=\"" << fixed(opt.margin_top, 2)
        << "\" x2=\"" << fixed(x, 2) << "\" y2=\"" << fixed(opt.margin_top + plot_h, 2)
        << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << fixed(x, 2) << "\" y=\"" << fixed(opt.margin_top + plot_h + 18, 2)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << tick << "</text>\n";
  }
  for (double e = y_lo; e <= y_hi + 1e-9; e += 1) {
    const double y = sy(std::pow(10.0, e));
    std::snprintf(tick, sizeof(tick), "%g", std::pow(10.0, e));
    svg << "<line class=\"grid\" x1=\"" << fixed(opt.margin_left, 2) << "\" y1=\"" << fixed(y, 2)
        << "\" x2=\"" << fixed(opt.margin_left + plot_w, 2) << "\" y2=\"" << fixed(y, 2)
        << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << fixed(opt.margin_left - 6, 2) << "\" y=\"" << fixed(y + 4, 2)
        << "\" text-anchor=\"end\" font-size=\"11\">" << tick << "</text>\n";
  }
  svg << "<rect x=\"" << fixed(opt.margin_left, 2) << "\" y=\"" << fixed(opt.margin_top, 2)
      << "\" width=\"" << fixed(plot_w, 2) << "\" height=\"" << fixed(plot_h, 2)
      << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << fixed(opt.margin_left + plot_w / 2, 2) << "\" y=\""
      << fixed(opt.height - 15, 2) << "\" text-anchor=\"middle\" font-size=\"13\">"
      << "Arithmetic intensity (FLOP/byte)</text>\n"
      << "<text transform=\"rotate(-90)\" x=\"" << fixed(-(opt.margin_top + plot_h / 2), 2)
      << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">Performance (GFLOP/s)</text>\n";

  auto line = [&](const char* cls, double ax, double ay, double bx, double by, const char* style) {
    svg << "<line class=\"" << cls << "\" x1=\"" << fixed(sx(ax), 2) << "\" y1=\"" << fixed(sy(ay), 2)
        << "\" x2=\"" << fixed(sx(bx), 2) << "\" y2=\"" << fixed(sy(by), 2) << "\" " << style
        << "/>\n";
  };
  // Sloped roof: perf = bw * ai, clipped to the plot floor.
  auto bandwidth_roof = [&](const char* cls, double bw, double cap, const char* style) {
    const double start = std::max(x_min, y_min / bw);
    const double stop = std::min(x_max, cap / bw);
    if (start < stop) line(cls, start, bw * start, stop, bw * stop, style);
  };

  const double bw = model.mem_bandwidth_gbs;
  bandwidth_roof("roof-bandwidth", bw, model.peak_gflops, "stroke=\"#1f5fbf\" stroke-width=\"2.5\"");
  line("roof-compute", knee, model.peak_gflops, x_max, model.peak_gflops,
       "stroke=\"#bf1f1f\" stroke-width=\"2.5\"");
  svg << "<text x=\"" << fixed(sx(x_max) - 4, 2) << "\" y=\"" << fixed(sy(model.peak_gflops) - 6, 2)
      << "\" text-anchor=\"end\" font-size=\"11\">" << fixed(model.peak_gflops, 2)
      << " GFLOP/s</text>\n"
      << "<text x=\"" << fixed(sx(std::max(x_min, y_min / bw)) + 6, 2) << "\" y=\""
      << fixed(sy(bw * std::max(x_min, y_min / bw)) - 8, 2) << "\" font-size=\"11\">" << fixed(bw, 3)
      << " GB/s</text>\n";
  svg << "<line class=\"knee\" x1=\"" << fixed(sx(knee), 2) << "\" y1=\"" << fixed(sy(model.peak_gflops), 2)
      << "\" x2=\"" << fixed(sx(knee), 2) << "\" y2=\"" << fixed(opt.margin_top + plot_h, 2)
      << "\" stroke=\"#888\" stroke-dasharray=\"2,3\"/>\n"
      << "<text x=\"" << fixed(sx(knee) + 4, 2) << "\" y=\"" << fixed(opt.margin_top + plot_h - 6, 2)
      << "\" font-size=\"10\" fill=\"#555\">knee " << fixed(knee, 4) << " FLOP/byte</text>\n";

  for (const auto& c : model.extra_ceilings) {
    if (c.kind == CeilingKind::Compute) {
      line("ceiling-compute", c.value / bw, c.value, x_max, c.value,
           "stroke=\"#bf1f1f\" stroke-dasharray=\"6,4\"");
      svg << "<text x=\"" << fixed(sx(x_max) - 4, 2) << "\" y=\"" << fixed(sy(c.value) - 4, 2)
          << "\" text-anchor=\"end\" font-size=\"10\">" << xml_escape(c.label) << "</text>\n";
    } else {
      bandwidth_roof("ceiling-bandwidth", c.value, model.peak_gflops,
                     "stroke=\"#1f5fbf\" stroke-dasharray=\"6,4\"");
    }
  }

  for (const auto* p : plotted) {
    const auto cls = classify(*p, model);
    const bool above = p->gflops > cls.attainable_gflops * (1 + 1e-9);
    const double x = sx(p->arithmetic_intensity_fp), y = sy(p->gflops);
    svg << "<g class=\"" << (above ? "point out-of-model" : "point") << "\"><title>"
        << xml_escape(p->loop.label()) << ": " << fixed(p->arithmetic_intensity_fp, 4) << " FLOP/byte, "
        << fixed(p->gflops, 4) << " GFLOP/s, " << to_string(cls.bound)
        << (above ? ", above roof" : "") << "</title><circle cx=\"" << fixed(x, 2) << "\" cy=\""
        << fixed(y, 2) << "\" r=\"5\" fill=\"" << (above ? "#e08000" : "#2a2a2a") << "\"/>";
    if (above)
      svg << "<text class=\"warning\" x=\"" << fixed(x - 3, 2) << "\" y=\"" << fixed(y - 8, 2)
          << "\" font-size=\"13\" fill=\"#e08000\">!</text>";
    svg << "<text x=\"" << fixed(x + 8, 2) << "\" y=\"" << fixed(y + 4, 2) << "\" font-size=\"11\">"
        << xml_escape(p->loop.label()) << "</text></g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace mperf::roofline
