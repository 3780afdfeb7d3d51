#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mperf/roofline/analysis.hpp"
#include "oracle/matmul_oracle.hpp"
#include "test_util.hpp"

using namespace mperf;
using namespace mperf::roofline;

namespace {

const MachineModel& x60() {
  static const MachineModel m = load_machine_model(testutil::data_path("x60_model.json"));
  return m;
}

MachineModel simple_model(double peak, double bw) {
  MachineModel m;
  m.name = "m";
  m.frequency_ghz = 1;
  m.peak_gflops = peak;
  m.mem_bandwidth_gbs = bw;
  return m;
}

LoopRecord rec(LoopInfo info, LoopCounters c, std::uint64_t wall_ns, std::uint64_t inv = 1) {
  return {std::move(info), c, inv, wall_ns, Phase::Instrumented};
}

RooflinePoint point_with(double ai, double gflops = 1.0) {
  RooflinePoint p;
  p.loop = {1, "k.c", "k"};
  p.arithmetic_intensity_fp = ai;
  p.gflops = gflops;
  return p;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Usage;
}

}  // namespace

TEST(Ceilings, ComputePeak) {
  EXPECT_EQ(theoretical_compute_peak(2, 8, 1.6), 25.6);
  EXPECT_EQ(theoretical_compute_peak(1, 1, 1.0), 1.0);
  EXPECT_NEAR(theoretical_compute_peak(3.38, 1, 4.2), 14.196, 14.196 * 1e-12);
}

TEST(Ceilings, Bandwidth) {
  EXPECT_NEAR(bandwidth_from_bytes_per_cycle(3.16, 1.6), 5.056, 5.056 * 1e-12);
  EXPECT_EQ(bandwidth_from_bytes_per_cycle(1, 1), 1.0);
  EXPECT_EQ(bandwidth_from_bytes_per_cycle(0.5, 2.0), 1.0);
}

TEST(Ceilings, Knee) {
  EXPECT_NEAR(x60().knee(), 256.0 / 47.0, 1e-12);
  EXPECT_NEAR(x60().knee(), 5.4468, 5e-5);
}

TEST(Classify, Cases) {
  const auto mem = classify(point_with(1.0 / 6.0, 0.5), x60());
  EXPECT_EQ(mem.bound, Bound::MemoryBound);
  EXPECT_NEAR(mem.attainable_gflops, 4.7 / 6.0, 1e-12);
  EXPECT_NEAR(mem.attainable_gflops, 0.7833, 5e-5);

  const auto comp = classify(point_with(10.0), x60());
  EXPECT_EQ(comp.bound, Bound::ComputeBound);
  EXPECT_EQ(comp.attainable_gflops, 25.6);

  const auto measured = classify(point_with(10.0, 1.58), x60());
  EXPECT_LT(measured.efficiency, 1.0);
  EXPECT_NEAR(measured.efficiency, 1.58 / 25.6, 1e-12);
}

TEST(Classify, KneeTieIsComputeBound) {
  for (const auto& m : {x60(), simple_model(25.6, 5.056), simple_model(3, 7), simple_model(1e3, 3.3)}) {
    const auto c = classify(point_with(m.knee()), m);
    EXPECT_EQ(c.bound, Bound::ComputeBound);
    EXPECT_EQ(c.attainable_gflops, m.peak_gflops);
    const auto below = classify(point_with(std::nextafter(m.knee(), 0.0)), m);
    EXPECT_EQ(below.bound, Bound::MemoryBound);
    EXPECT_LE(below.attainable_gflops, m.peak_gflops * (1 + 1e-15));
  }
}

TEST(Classify, AttainableIsMinOfRoofs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> exp10(-3, 3);
  for (int i = 0; i < 1000; ++i) {
    const auto m = simple_model(std::pow(10, exp10(rng)), std::pow(10, exp10(rng)));
    const double ai = std::pow(10, exp10(rng));
    const auto c = classify(point_with(ai), m);
    EXPECT_NEAR(c.attainable_gflops, std::min(m.peak_gflops, ai * m.mem_bandwidth_gbs),
                1e-12 * m.peak_gflops);
    if (ai * m.mem_bandwidth_gbs < m.peak_gflops * (1 - 1e-12)) {
      EXPECT_EQ(c.bound, Bound::MemoryBound);
    }
    if (ai * m.mem_bandwidth_gbs > m.peak_gflops * (1 + 1e-12)) {
      EXPECT_EQ(c.bound, Bound::ComputeBound);
    }
  }
}

TEST(DerivePoint, TiledMatmulIntensity) {
  const JoinedRow row{{5, "mm.c", "matmul"}, {640, 128, 0, 128}, 1000, 5000, 1};
  const auto p = derive_point(row);
  EXPECT_NEAR(p.arithmetic_intensity_fp, 128.0 / 768.0, 1e-15);
  EXPECT_NEAR(p.arithmetic_intensity_fp, 0.16667, 5e-6);
  EXPECT_DOUBLE_EQ(p.overhead_ratio, 5.0);
  EXPECT_FALSE(p.baseline_missing);
}

TEST(DerivePoint, Throughput) {
  // 33.0 GFLOP/s sustained for two seconds.
  const JoinedRow row{{5, "mm.c", "matmul"}, {66'000'000'000ull, 0, 0, 66'000'000'000ull}, 2'000'000'000ull,
                      2'000'000'000ull, 1};
  const auto p = derive_point(row);
  EXPECT_NEAR(p.gflops, 33.0, 33.0 * 1e-12);
  EXPECT_NEAR(p.gbs, 33.0, 33.0 * 1e-12);
  EXPECT_DOUBLE_EQ(p.baseline_time_s, 2.0);
}

TEST(DerivePoint, Errors) {
  EXPECT_EQ(kind_of([] { derive_point({{1, "a", "f"}, {0, 0, 5, 5}, 100, 100, 1}); }), ErrorKind::ZeroTraffic);
  EXPECT_EQ(kind_of([] { derive_point({{1, "a", "f"}, {4, 0, 0, 1}, 0, 100, 1}); }), ErrorKind::ZeroTime);
}

TEST(DerivePoint, ScaleInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> d(1, 1'000'000);
  for (int i = 0; i < 500; ++i) {
    const LoopCounters c{d(rng), d(rng), d(rng), d(rng)};
    const std::uint64_t t = d(rng), ti = t + d(rng);
    const std::uint64_t k = 1 + rng() % 100000;
    const auto a = derive_point({{1, "a", "f"}, c, t, ti, 1});
    const auto b = derive_point(
        {{1, "a", "f"}, {c.load_bytes * k, c.store_bytes * k, c.int_ops * k, c.fp_ops * k}, t * k, ti * k, 1});
    auto rel = [](double x, double y) { return std::abs(x - y) / std::abs(x); };
    EXPECT_LE(rel(a.arithmetic_intensity_fp, b.arithmetic_intensity_fp), 1e-12);
    EXPECT_LE(rel(a.gflops, b.gflops), 1e-12);
    EXPECT_LE(rel(a.gbs, b.gbs), 1e-12);
  }
}

TEST(Correlate, JoinsOnExactKey) {
  RunReport base{Phase::Baseline, {rec({42, "foo.c", "bar"}, {}, 1000)}};
  RunReport inst{Phase::Instrumented, {rec({42, "foo.c", "bar"}, {8, 4, 1, 2}, 3000)}};
  const auto c = correlate(base, inst);
  ASSERT_EQ(c.rows.size(), 1u);
  EXPECT_EQ(c.rows[0].baseline_wall_ns, 1000u);
  EXPECT_EQ(c.rows[0].instrumented_wall_ns, 3000u);
  EXPECT_EQ(c.rows[0].counters, (LoopCounters{8, 4, 1, 2}));
  EXPECT_TRUE(c.warnings.empty());
}

TEST(Correlate, EmptyInstrumentedReport) {
  RunReport base{Phase::Baseline, {rec({42, "foo.c", "bar"}, {}, 1000)}};
  const auto c = correlate(base, {});
  EXPECT_TRUE(c.rows.empty());
  EXPECT_FALSE(c.warnings.empty());
}

TEST(Correlate, DuplicatesMergedBySummation) {
  RunReport base{Phase::Baseline, {rec({42, "foo.c", "bar"}, {}, 1000), rec({42, "foo.c", "bar"}, {}, 500)}};
  RunReport inst{Phase::Instrumented,
                 {rec({42, "foo.c", "bar"}, {8, 0, 0, 2}, 10, 2), rec({42, "foo.c", "bar"}, {8, 4, 0, 0}, 20, 3)}};
  const auto c = correlate(base, inst);
  ASSERT_EQ(c.rows.size(), 1u);
  EXPECT_EQ(c.rows[0].counters, (LoopCounters{16, 4, 0, 2}));
  EXPECT_EQ(c.rows[0].baseline_wall_ns, 1500u);
  EXPECT_EQ(c.rows[0].instrumented_wall_ns, 30u);
  EXPECT_EQ(c.rows[0].invocations, 5u);
}

TEST(Correlate, LoopMissingFromBaseline) {
  RunReport inst{Phase::Instrumented, {rec({7, "a.c", "f"}, {8, 0, 0, 2}, 4000)}};
  RunReport base{Phase::Baseline, {rec({8, "a.c", "f"}, {}, 10)}};
  const auto c = correlate(base, inst);
  ASSERT_EQ(c.rows.size(), 1u);
  EXPECT_FALSE(c.rows[0].baseline_wall_ns);
  EXPECT_EQ(c.warnings.size(), 2u);
  const auto p = derive_point(c.rows[0]);
  EXPECT_TRUE(p.baseline_missing);
  EXPECT_DOUBLE_EQ(p.baseline_time_s, 4e-6);
}

TEST(Analyze, IndependentOfRecordOrder) {
  std::mt19937_64 rng(17);
  RunReport base{Phase::Baseline, {}}, inst{Phase::Instrumented, {}};
  for (std::uint32_t line = 1; line <= 12; ++line) {
    const LoopInfo info{line, line % 2 ? "a.c" : "b.c", "f"};
    base.records.push_back(rec(info, {}, 100 + line));
    inst.records.push_back(rec(info, {line * 8, line, line, line * 3}, 900 + line));
    if (line % 4 == 0) inst.records.push_back(rec(info, {1, 1, 1, 1}, 7));
  }
  inst.records.push_back(rec({99, "c.c", "g"}, {0, 0, 1, 0}, 5));  // zero traffic: excluded
  const auto reference = analysis_json(analyze({base, inst}, x60()), x60());
  for (int i = 0; i < 20; ++i) {
    std::shuffle(base.records.begin(), base.records.end(), rng);
    std::shuffle(inst.records.begin(), inst.records.end(), rng);
    EXPECT_EQ(analysis_json(analyze({base, inst}, x60()), x60()), reference);
  }
  const auto a = analyze({base, inst}, x60());
  ASSERT_EQ(a.excluded.size(), 1u);
  EXPECT_EQ(a.excluded[0].loop.func_name, "g");
  EXPECT_EQ(a.points.size(), 12u);
}

TEST(MachineModel, ParseAndErrors) {
  EXPECT_EQ(x60().name, "spacemit-x60");
  EXPECT_EQ(x60().peak_gflops, 25.6);
  EXPECT_EQ(x60().mem_bandwidth_gbs, 4.7);
  ASSERT_EQ(x60().extra_ceilings.size(), 1u);
  EXPECT_EQ(x60().extra_ceilings[0].kind, CeilingKind::Compute);

  const auto round = parse_machine_model(to_json(x60()).dump());
  EXPECT_EQ(round.peak_gflops, x60().peak_gflops);
  EXPECT_EQ(round.extra_ceilings.size(), 1u);

  auto model_error = [](const std::string& text) {
    try {
      parse_machine_model(text);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::ModelError;
    }
    return false;
  };
  EXPECT_TRUE(model_error("{"));
  EXPECT_TRUE(model_error(R"({"name":"m","frequency_ghz":1,"peak_gflops":2})"));
  EXPECT_TRUE(model_error(R"({"name":"m","frequency_ghz":1,"peak_gflops":-2,"mem_bandwidth_gbs":1})"));
  EXPECT_TRUE(model_error(R"({"name":"m","frequency_ghz":0,"peak_gflops":2,"mem_bandwidth_gbs":1})"));
  EXPECT_TRUE(model_error(
      R"({"name":"m","frequency_ghz":1,"peak_gflops":2,"mem_bandwidth_gbs":1,"extra_ceilings":[{"label":"x","gflops":3}]})"));
  EXPECT_TRUE(model_error(
      R"({"name":"m","frequency_ghz":1,"peak_gflops":2,"mem_bandwidth_gbs":1,"extra_ceilings":[{"label":"x","gflops":1,"gbs":1}]})"));
  EXPECT_EQ(kind_of([] { load_machine_model("/nonexistent.json"); }), ErrorKind::ModelError);
  try {
    parse_machine_model("{}");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("mem_bandwidth_gbs"), std::string::npos);
  }
}

TEST(RenderRoofline, KneeMarkerAndWarning) {
  std::vector<RooflinePoint> pts = {point_with(1.0 / 6.0, 0.5), point_with(1.0 / 6.0, 0.9)};
  pts[1].loop = {2, "k.c", "hot"};
  const auto svg = render_roofline(x60(), pts);
  EXPECT_NE(svg.find("class=\"knee\""), std::string::npos);
  EXPECT_NE(svg.find("knee 5.4468 FLOP/byte"), std::string::npos);
  EXPECT_NE(svg.find("class=\"roof-bandwidth\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"roof-compute\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"ceiling-compute\""), std::string::npos);
  // 0.9 GFLOP/s is above the 0.7833 roof at this intensity.
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '!'), 1);
  const auto hot = svg.find("hot@k.c:2");
  ASSERT_NE(hot, std::string::npos);
  EXPECT_NE(svg.rfind("point out-of-model", hot), std::string::npos);
  EXPECT_EQ(svg.find("point out-of-model"), svg.rfind("point out-of-model"));
}

TEST(RenderRoofline, DeterministicAndEmpty) {
  const std::vector<RooflinePoint> pts = {point_with(0.25, 0.2), point_with(12, 3)};
  EXPECT_EQ(render_roofline(x60(), pts), render_roofline(x60(), pts));
  EXPECT_EQ(kind_of([] { render_roofline(x60(), {}); }), ErrorKind::EmptyInput);
}

// ---------------------------------------------------------------------------
// Counting oracle vs closed forms and vs the hand-instrumented fixture
// ---------------------------------------------------------------------------

TEST(MatmulOracle, ClosedForms) {
  for (long n : {4, 8, 16}) {
    for (long tile : {2, 4}) {
      SCOPED_TRACE("n=" + std::to_string(n) + " tile=" + std::to_string(tile));
      const auto run = oracle::run_tiled_matmul(n, tile);
      const std::uint64_t n3 = static_cast<std::uint64_t>(n * n * n);
      EXPECT_EQ(run.counts.fp_ops, 2 * n3);
      EXPECT_EQ(run.counts.load_bytes, 4 * (2 * n3 + n3 / static_cast<std::uint64_t>(tile)));
      EXPECT_EQ(run.counts.store_bytes, 4 * n3 / static_cast<std::uint64_t>(tile));
    }
  }
}

TEST(MatmulOracle, ComputesTheProduct) {
  const long n = 8;
  const auto run = oracle::run_tiled_matmul(n, 4);
  std::vector<float> a, b, c;
  oracle::fill_inputs(a, b, c, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) {
      double ref = 0;
      for (long k = 0; k < n; ++k) ref += double(a[i * n + k]) * double(b[k * n + j]);
      EXPECT_NEAR(run.c[static_cast<std::size_t>(i * n + j)], ref, 1e-3);
    }
}

TEST(MatmulOracle, FixtureMatchesExactly) {
  testutil::TempDir dir;
  for (long n : {4, 8, 16}) {
    for (long tile : {2, 4}) {
      SCOPED_TRACE("n=" + std::to_string(n) + " tile=" + std::to_string(tile));
      const auto run = oracle::run_tiled_matmul(n, tile);
      const auto report_path = dir.file("r" + std::to_string(n) + "_" + std::to_string(tile) + ".json");
      const auto res = testutil::run_process({MPERF_MATMUL_FIXTURE, std::to_string(n), std::to_string(tile)},
                                             {{"MPERF_ROOFLINE_MODE", "instrumented"},
                                              {"MPERF_ROOFLINE_OUT", report_path},
                                              {"MPERF_ROOFLINE_FILTER", ""}});
      ASSERT_EQ(res.exit_code, 0) << res.err;
      const auto report = read_report(report_path);
      ASSERT_EQ(report.records.size(), 1u);
      const auto& got = report.records[0].counters;
      EXPECT_EQ(got.fp_ops, run.counts.fp_ops);
      EXPECT_EQ(got.load_bytes, run.counts.load_bytes);
      EXPECT_EQ(got.store_bytes, run.counts.store_bytes);
      EXPECT_EQ(got.int_ops, run.counts.int_ops);
    }
  }
}

// ---------------------------------------------------------------------------
// Two-phase execution
// ---------------------------------------------------------------------------

TEST(TwoPhaseRun, MatmulFixture) {
  testutil::TempDir dir;
  const auto reports = two_phase_run({MPERF_MATMUL_FIXTURE, "32", "2", "2", "extra"}, dir.path() / "out");
  EXPECT_EQ(reports.baseline.phase, Phase::Baseline);
  EXPECT_EQ(reports.instrumented.phase, Phase::Instrumented);
  ASSERT_EQ(reports.baseline.records.size(), 2u);
  ASSERT_EQ(reports.instrumented.records.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(reports.baseline.records[i].info, reports.instrumented.records[i].info);
    EXPECT_TRUE(reports.baseline.records[i].counters.is_zero());
    EXPECT_EQ(reports.baseline.records[i].invocations, reports.instrumented.records[i].invocations);
  }
  EXPECT_EQ(reports.instrumented.records[0].invocations, 2u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "baseline.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "instrumented.stdout"));

  const auto a = analyze(reports, x60());
  ASSERT_EQ(a.points.size(), 2u);
  EXPECT_EQ(a.classes[0].bound, Bound::MemoryBound);
  EXPECT_NEAR(a.points[0].arithmetic_intensity_fp, 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(a.classes[0].attainable_gflops, 4.7 / 6.0, 1e-6);
  EXPECT_NEAR(a.points[1].arithmetic_intensity_fp, 0.25, 1e-15);
}

TEST(TwoPhaseRun, NoRuntimeMeansNoReport) {
  testutil::TempDir dir;
  EXPECT_EQ(kind_of([&] { two_phase_run({MPERF_NO_RUNTIME_FIXTURE}, dir.path()); }), ErrorKind::ReportMissing);
}

TEST(TwoPhaseRun, FailingChild) {
  testutil::TempDir dir;
  try {
    two_phase_run({"/bin/sh", "-c", "exit 3"}, dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ChildFailed);
    EXPECT_NE(std::string(e.what()).find("baseline"), std::string::npos);
  }
  EXPECT_EQ(kind_of([&] { two_phase_run({"/nonexistent/binary"}, dir.path()); }), ErrorKind::ChildFailed);
  EXPECT_EQ(kind_of([&] { two_phase_run({}, dir.path()); }), ErrorKind::Usage);
}

TEST(TwoPhaseRun, StaleReportIsNotReused) {
  testutil::TempDir dir;
  testutil::write_file(dir.file("baseline.json"), R"({"phase":"baseline","records":[]})");
  EXPECT_EQ(kind_of([&] { two_phase_run({MPERF_NO_RUNTIME_FIXTURE}, dir.path()); }), ErrorKind::ReportMissing);
}
