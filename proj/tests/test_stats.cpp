#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "ckpt/harness.hpp"
#include "ckpt/stats.hpp"
#include "ckpt/svg.hpp"
#include "test_util.hpp"

using namespace ckpt;
using ckpt::testing::slurp;
using ckpt::testing::TempDir;
using ckpt::testing::xml_well_formed;

namespace {

double brute_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double r = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(r));
  const auto hi = static_cast<std::size_t>(std::ceil(r));
  return v[lo] + (r - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// P(X >= k) and P(X <= k) for X ~ Binomial(n, p), by direct summation.
long double upper_tail(std::uint64_t k, std::uint64_t n, long double p) {
  long double s = 0;
  for (std::uint64_t i = k; i <= n; ++i)
    s += std::exp(std::lgamma((long double)n + 1) - std::lgamma((long double)i + 1) -
                  std::lgamma((long double)(n - i) + 1) + i * std::log(p) + (n - i) * std::log1p(-p));
  return s;
}
long double lower_tail(std::uint64_t k, std::uint64_t n, long double p) { return 1 - upper_tail(k + 1, n, p); }

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  svg::write_file(path, text);
}

std::string reference_crash_csv(const std::string& path) {
  std::vector<std::string> lines{"experiment,mode,crash_point,trial,ok,reason"};
  auto add = [&](const std::string& mode, const std::string& point, int n, bool ok, const std::string& reason) {
    for (int i = 0; i < n; ++i)
      lines.push_back("crash," + mode + "," + point + "," + std::to_string(i) + "," + (ok ? "1" : "0") + "," + reason);
  };
  add("atomic_dirsync", "none", 400, true, "");
  add("unsafe", "after_model", 400, false, "load_error");
  add("unsafe", "before_manifest", 10, false, "missing_manifest");
  add("unsafe", "manifest_partial", 10, false, "manifest_parse_error");
  add("unsafe", "before_commit", 10, false, "missing_commit");
  write_lines(path, lines);
  return path;
}

}  // namespace

TEST_CASE("percentile examples") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(percentile(a, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
  std::vector<double> ten;
  for (int i = 1; i <= 10; ++i) ten.push_back(i);
  // numpy.quantile(range(1, 11), 0.99)
  CHECK(std::fabs(percentile(ten, 0.99) - 9.91) < 1e-12);
  CHECK(percentile(ten, 0.0) == 1);
  CHECK(percentile(ten, 1.0) == 10);
  const std::vector<double> one{7.5};
  CHECK(percentile(one, 0.3) == 7.5);
}

TEST_CASE("percentile errors") {
  CHECK_THROWS_WITH_AS(percentile(std::vector<double>{}, 0.5), "empty_input", StatsError);
  CHECK_THROWS_AS(percentile(std::vector<double>{1}, 1.5), StatsError);
  CHECK_THROWS_AS(percentile(std::vector<double>{1}, -0.1), StatsError);
}

TEST_CASE("percentile agrees with brute force on 1000 random inputs") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> val(-1e3, 1e3), qd(0, 1);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(1 + rng() % 200);
    for (auto& x : v) x = val(rng);
    const double q = (i % 10 == 0) ? (i % 20 == 0 ? 0.0 : 1.0) : qd(rng);
    CHECK(std::fabs(percentile(v, q) - brute_percentile(v, q)) <= 1e-12);
  }
}

TEST_CASE("summarize") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  const PercentileSummary s = summarize("unsafe", v);
  CHECK(s.n == 100);
  CHECK(s.p50 == doctest::Approx(50.5));
  CHECK(s.p90 == doctest::Approx(90.1));
  CHECK(s.p99 == doctest::Approx(99.01));
}

TEST_CASE("exact intervals match reference values") {
  struct Ref {
    std::uint64_t k, n;
    double lo, hi;
  };
  // scipy.stats.beta.ppf based Clopper-Pearson bounds
  const Ref refs[] = {
      {0, 400, 0.0, 0.00917980458366526},
      {400, 400, 0.9908201954163347, 1.0},
      {0, 10, 0.0, 0.3084971078187608},
      {3, 10, 0.06673951117773447, 0.6524528500599973},
      {7, 20, 0.15390920478454118, 0.5921885345328282},
      {399, 400, 0.9861502300379867, 0.9999367074830952},
  };
  for (const auto& r : refs) {
    const ProportionCI ci = binomial_ci(r.k, r.n, CiMethod::Exact);
    CHECK(ci.lo == doctest::Approx(r.lo).epsilon(1e-9));
    CHECK(ci.hi == doctest::Approx(r.hi).epsilon(1e-9));
    CHECK(ci.rate == doctest::Approx(static_cast<double>(r.k) / static_cast<double>(r.n)));
  }
  CHECK(binomial_ci(0, 10).hi == doctest::Approx(1 - std::pow(0.025, 0.1)).epsilon(1e-12));
}

TEST_CASE("printed intervals after rounding to one decimal") {
  auto printed = [](std::uint64_t k, std::uint64_t n) {
    const ProportionCI ci = binomial_ci(k, n, CiMethod::Exact);
    return format_fixed(ci.lo * 100, 1) + "," + format_fixed(ci.hi * 100, 1);
  };
  CHECK(printed(0, 400) == "0.0,0.9");
  CHECK(printed(400, 400) == "99.1,100.0");
  CHECK(printed(0, 10) == "0.0,30.8");
}

TEST_CASE("exact bounds solve the binomial tail equations") {
  for (std::uint64_t n : {5, 17, 40}) {
    for (std::uint64_t k = 1; k < n; ++k) {
      const ProportionCI ci = binomial_ci(k, n, CiMethod::Exact);
      CHECK(std::fabs(static_cast<double>(upper_tail(k, n, ci.lo)) - 0.025) < 1e-9);
      CHECK(std::fabs(static_cast<double>(lower_tail(k, n, ci.hi)) - 0.025) < 1e-9);
    }
  }
}

TEST_CASE("wilson intervals") {
  struct Ref {
    std::uint64_t k, n;
    double lo, hi;
  };
  const Ref refs[] = {
      {0, 400, 0.0, 0.009512640599680667},
      {0, 10, 0.0, 0.2775401687666166},
      {3, 10, 0.10778928748621183, 0.6032267800204347},
      {399, 400, 0.9859763590327523, 0.9995585635705656},
  };
  for (const auto& r : refs) {
    const ProportionCI ci = binomial_ci(r.k, r.n, CiMethod::Wilson);
    CHECK(ci.lo == doctest::Approx(r.lo).epsilon(1e-9));
    CHECK(ci.hi == doctest::Approx(r.hi).epsilon(1e-9));
  }
  const double z2 = kZ95 * kZ95;
  CHECK(binomial_ci(0, 400, CiMethod::Wilson).hi == doctest::Approx(z2 / (400 + z2)).epsilon(1e-12));
}

TEST_CASE("interval properties") {
  for (CiMethod m : {CiMethod::Exact, CiMethod::Wilson}) {
    for (std::uint64_t n : {1, 10, 50}) {
      double prev_lo = -1, prev_hi = -1;
      for (std::uint64_t k = 0; k <= n; ++k) {
        const ProportionCI ci = binomial_ci(k, n, m);
        CHECK(ci.lo >= 0);
        CHECK(ci.hi <= 1);
        CHECK(ci.lo <= ci.rate + 1e-15);
        CHECK(ci.rate <= ci.hi + 1e-15);
        CHECK(ci.lo >= prev_lo);
        CHECK(ci.hi >= prev_hi);
        prev_lo = ci.lo;
        prev_hi = ci.hi;
      }
    }
    // more trials at the same rate narrow the interval
    const auto a = binomial_ci(5, 10, m), b = binomial_ci(50, 100, m);
    CHECK(b.hi - b.lo < a.hi - a.lo);
  }
  const auto wide = binomial_ci(3, 10, CiMethod::Exact, 2.576), narrow = binomial_ci(3, 10, CiMethod::Exact);
  CHECK(wide.lo < narrow.lo);
  CHECK(wide.hi > narrow.hi);
  CHECK_THROWS_WITH_AS(binomial_ci(5, 4), "invalid_counts", StatsError);
  CHECK_THROWS_AS(binomial_ci(0, 0), StatsError);
  CHECK(ci_method_from_name("wilson") == CiMethod::Wilson);
  CHECK(ci_method_from_name("exact") == CiMethod::Exact);
}

TEST_CASE("overhead") {
  CHECK(std::fabs(overhead(3.87, 2.47) - 56.5) <= 1.0);
  CHECK(overhead(3.87, 2.47) == doctest::Approx(56.68016194331984));
  CHECK(overhead(2.0, 2.0) == 0.0);
  CHECK(std::fabs(overhead(20.27, 3.02) - 570.6) <= 1.0);
  CHECK_THROWS_AS(overhead(1, 0), StatsError);
}

TEST_CASE("number formatting") {
  CHECK(format_sig3(2.4712) == "2.47");
  CHECK(format_sig3(20.27) == "20.3");
  CHECK(format_sig3(570.61) == "571");
  CHECK(format_sig3(0.012345) == "0.0123");
  CHECK(format_fixed(99.95, 1) == "100.0");
  CHECK(format_fixed(0.0, 1) == "0.0");
}

TEST_CASE("crash table from a replication run") {
  TempDir dir("report");
  const TableData t = crash_table(reference_crash_csv(dir / "crash.csv"), CiMethod::Exact);
  REQUIRE(t.rows.size() == 5);
  CHECK(csv_line(t.rows[0]) == "atomic@none,400,400,100.0,99.1,100.0\n");
  CHECK(csv_line(t.rows[1]) == "unsafe@after_model,0,400,0.0,0.0,0.9\n");
  CHECK(csv_line(t.rows[2]) == "unsafe@before_manifest,0,10,0.0,0.0,30.8\n");
  const TableData w = crash_table(dir / "crash.csv", CiMethod::Wilson);
  CHECK(w.rows[2][5] == "27.8");
}

TEST_CASE("latency table") {
  TempDir dir("latency");
  std::vector<std::string> lines{"experiment,mode,seed,epoch,latency_ns,ok"};
  for (int i = 1; i <= 10; ++i) {
    lines.push_back("bench,atomic_dirsync,1," + std::to_string(i) + "," + std::to_string(3'000'000 * i) + ",1");
    lines.push_back("bench,unsafe,1," + std::to_string(i) + "," + std::to_string(1'000'000 * i) + ",1");
    lines.push_back("bench,atomic_nodirsync,1," + std::to_string(i) + "," + std::to_string(2'000'000 * i) + ",1");
  }
  write_lines(dir / "bench.csv", lines);
  const TableData t = latency_table(dir / "bench.csv");
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0] == std::vector<std::string>{"unsafe", "5.50", "9.10", "9.91", "0.0", "0.0"});
  CHECK(t.rows[1] == std::vector<std::string>{"atomic_nodirsync", "11.0", "18.2", "19.8", "100.0", "100.0"});
  CHECK(t.rows[2] == std::vector<std::string>{"atomic_dirsync", "16.5", "27.3", "29.7", "200.0", "200.0"});
}

TEST_CASE("corruption table") {
  TempDir dir("ctable");
  std::vector<std::string> lines{"experiment,fault,trial,detected,reason,mech_load,mech_digest,mech_file_sha,mech_structural"};
  for (int i = 0; i < 4; ++i) lines.push_back("corrupt,bitflip," + std::to_string(i) + ",1,file_sha_mismatch,0,1,1,0");
  lines.push_back("corrupt,truncate,0,1,load_error,1,0,1,1");
  lines.push_back("corrupt,none,0,0,,0,0,0,0");
  write_lines(dir / "c.csv", lines);
  const TableData t = corruption_table(dir / "c.csv");
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0] == std::vector<std::string>{"bitflip", "4", "4", "100.0", "0", "4", "4"});
  CHECK(t.rows[1][4] == "1");
  CHECK(t.rows[2][2] == "0");
}

TEST_CASE("make_report") {
  TempDir dir("mk");
  reference_crash_csv(dir / "crash.csv");
  write_lines(dir / "corrupt.csv", {"experiment,fault,trial,detected,reason,mech_load,mech_digest,mech_file_sha,mech_structural"});
  SUBCASE("partial inputs") {
    const ReportFiles f = make_report(ReportInputs{"", dir / "crash.csv", dir / "corrupt.csv"}, dir / "out");
    CHECK(std::find(f.notes.begin(), f.notes.end(), "no corruption trials") != f.notes.end());
    CHECK(std::find(f.notes.begin(), f.notes.end(), "no benchmark runs") != f.notes.end());
    CHECK(f.corruption_csv.empty());
    REQUIRE_FALSE(f.crash_csv.empty());
    CHECK(slurp(f.crash_csv).find("unsafe@after_model,0,400,0.0,0.0,0.9\n") != std::string::npos);
    std::string root;
    CHECK(xml_well_formed(slurp(f.crash_svg), &root));
    CHECK(root == "svg");
  }
  SUBCASE("deterministic output") {
    const ReportFiles a = make_report(ReportInputs{"", dir / "crash.csv", ""}, dir / "a");
    const ReportFiles b = make_report(ReportInputs{"", dir / "crash.csv", ""}, dir / "b");
    CHECK(slurp(a.crash_csv) == slurp(b.crash_csv));
    CHECK(slurp(a.crash_txt) == slurp(b.crash_txt));
    CHECK(slurp(a.crash_svg) == slurp(b.crash_svg));
  }
  SUBCASE("wrong header") {
    write_lines(dir / "bad.csv", {"mode,ok", "unsafe,1"});
    CHECK_THROWS_AS(make_report(ReportInputs{dir / "bad.csv", "", ""}, dir / "x"), SchemaMismatch);
  }
}

TEST_CASE("report from a simulated pipeline") {
  TempDir dir("pipe");
  ExperimentConfig c;
  c.root = dir.str();
  c.sizes = GroupSizes{4096, 2048, 256};
  c.seeds = {1, 2};
  c.epochs = 9;
  c.trials_per_fault = 10;
  c.plan = TrialPlan::parse("atomic_dirsync:none:4,unsafe:after_model:4");
  const ReportFiles f =
      make_report(ReportInputs{run_bench(c), run_crash_trials(c), run_corruption_trials(c)}, dir / "report");
  CHECK(f.notes.empty());
  for (const auto& svgp : {f.latency_svg, f.crash_svg, f.corruption_svg}) CHECK(xml_well_formed(slurp(svgp)));
  CHECK(read_csv(f.latency_csv).rows.size() == 3);
  CHECK(read_csv(f.corruption_csv).rows.size() == 4);
}

TEST_CASE("svg rendering escapes text") {
  svg::BarChart chart;
  chart.title = "a < b & \"c\"";
  chart.categories = {"x&y", "z"};
  chart.series.push_back(svg::Series{"s<1>", {1.0, 2.0}, {0.5, 1.5}, {1.5, 2.5}});
  const std::string doc = svg::render(chart);
  CHECK(xml_well_formed(doc));
  CHECK(doc.find("a &lt; b &amp;") != std::string::npos);
  CHECK(doc.find("class=\"err\"") != std::string::npos);
  svg::LinePlot plot;
  plot.x = {0, 1, 2};
  plot.y = {3, 1, 2};
  plot.markers = {1};
  const std::string line = svg::render(plot);
  CHECK(xml_well_formed(line));
  CHECK(line.find("class=\"event\"") != std::string::npos);
  svg::LinePlot empty;
  CHECK(xml_well_formed(svg::render(empty)));
}

TEST_CASE("timeline conservation") {
  std::vector<SamplerRow> samples;
  for (int s = 0; s < 60; ++s) samples.push_back(SamplerRow{1000 + s, static_cast<double>(s % 7)});
  const std::vector<std::uint64_t> events{1'000'000'000'000ULL + 500, 1'005'200'000'000ULL,
                                          1'005'900'000'000ULL, 1'030'000'000'000ULL, 1'059'999'999'999ULL};
  std::vector<std::string> warnings;
  const auto rows = merge_timeline_rows(samples, events, &warnings);
  CHECK(rows.size() == 60);
  std::uint64_t total = 0;
  for (const auto& r : rows) total += r.events;
  CHECK(total == 5);
  CHECK(warnings.empty());
  CHECK(rows[5].events == 2);
}

TEST_CASE("timeline synthesizes missing seconds") {
  const std::vector<SamplerRow> samples{{10, 1.0}, {11, 2.0}};
  const std::vector<std::uint64_t> events{11'000'000'000ULL, 13'500'000'000ULL};
  std::vector<std::string> warnings;
  const auto rows = merge_timeline_rows(samples, events, &warnings);
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].unix_s == 13);
  CHECK(rows[2].tps == 0);
  CHECK(rows[2].events == 1);
  CHECK(warnings.size() == 1);
}

TEST_CASE("timeline rejects unsorted input") {
  const std::vector<SamplerRow> bad{{11, 1.0}, {10, 1.0}};
  CHECK_THROWS_AS(merge_timeline_rows(bad, {}), UnsortedInput);
  const std::vector<SamplerRow> good{{10, 1.0}};
  const std::vector<std::uint64_t> ev{2, 1};
  CHECK_THROWS_AS(merge_timeline_rows(good, ev), UnsortedInput);
}

TEST_CASE("peak alignment") {
  const std::vector<TimelineRow> rows{{0, 1, 0}, {1, 5, 1}, {2, 2, 0}, {3, 1, 0}, {4, 0.5, 0}, {5, 0.2, 1}, {6, 3, 0}};
  CHECK(peak_alignment(rows) == doctest::Approx(1.0));
  const std::vector<TimelineRow> flat{{0, 0, 1}, {1, 0, 0}};
  CHECK(peak_alignment(flat) == 0.0);
}

TEST_CASE("merge_timeline files") {
  TempDir dir("tl");
  std::vector<std::string> s{"unix_s,tps"};
  for (int i = 0; i < 60; ++i) s.push_back(std::to_string(1700000000 + i) + "," + std::to_string(i % 5) + ".5");
  write_lines(dir / "sampler.csv", s);
  std::vector<std::string> e{"unix_ns,event,group_path"};
  for (int i = 0; i < 5; ++i)
    e.push_back(std::to_string((1700000000ULL + 12 * i) * 1'000'000'000ULL) + ",group_checkpoint,/r/ckpt-00000" +
                std::to_string(i));
  write_lines(dir / "events.csv", e);
  const TimelineResult r = merge_timeline(dir / "sampler.csv", dir / "events.csv", dir / "out");
  CHECK(r.rows.size() == 60);
  const CsvTable t = read_csv(r.csv_path);
  CHECK(t.header == CsvRow{"unix_s", "tps", "events"});
  std::uint64_t total = 0;
  for (const auto& row : t.rows) total += std::stoull(row[2]);
  CHECK(total == 5);
  CHECK(xml_well_formed(slurp(r.svg_path)));

  write_lines(dir / "bad.csv", {"time,tps", "1,1"});
  CHECK_THROWS_AS(merge_timeline(dir / "bad.csv", dir / "events.csv", dir / "out"), SchemaMismatch);
}

TEST_CASE("iostat report parsing") {
  const std::string text =
      "Linux 6.1.0 (host) \t10/14/2026 \t_x86_64_\t(1 CPU)\n\n"
      "Device             tps    kB_read/s    kB_wrtn/s    kB_dscd/s    kB_read    kB_wrtn    kB_dscd\n"
      "sda              12.00         0.00       480.00         0.00          0        480          0\n"
      "sdb               3.50         0.00        10.00         0.00          0         10          0\n\n"
      "Device             tps    kB_read/s    kB_wrtn/s    kB_dscd/s    kB_read    kB_wrtn    kB_dscd\n"
      "sda               1.00         0.00         4.00         0.00          0          4          0\n\n";
  const auto reports = parse_iostat_reports(text);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0] == doctest::Approx(15.5));
  CHECK(reports[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(parse_iostat_reports("Device tps\nsda notanumber\n\n"), SamplerParseError);
}

TEST_CASE("live disk sampling smoke") {
  TempDir dir("sample");
  try {
    const auto rows = sample_disk_activity(2.0, dir / "s.csv", 500);
    CHECK(rows.size() >= 3);
    CHECK(rows.size() <= 5);
    for (const auto& r : rows) CHECK(r.tps >= 0);
    CHECK(read_csv(dir / "s.csv").header == CsvRow{"unix_s", "tps"});
  } catch (const UnsupportedPlatform& e) {
    MESSAGE("sampler unsupported here: " << e.what());
  }
}
