#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ckpt/harness.hpp"
#include "test_util.hpp"

using namespace ckpt;
using ckpt::testing::TempDir;

namespace {

ExperimentConfig small_config(const std::string& root) {
  ExperimentConfig c;
  c.root = root;
  c.sizes = GroupSizes{4096, 2048, 256};
  return c;
}

std::size_t count_where(const CsvTable& t, std::string_view col, std::string_view value) {
  const std::size_t i = t.column(col);
  return static_cast<std::size_t>(
      std::count_if(t.rows.begin(), t.rows.end(), [&](const CsvRow& r) { return r[i] == value; }));
}

}  // namespace

TEST_CASE("csv escaping and parsing") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_line({"a", "b,c", ""}) == "a,\"b,c\",\n");
  const CsvTable t = parse_csv("x,y\r\n1,\"2,3\"\n4,\"a\"\"b\"\n");
  CHECK(t.header == CsvRow{"x", "y"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == CsvRow{"1", "2,3"});
  CHECK(t.rows[1][1] == "a\"b");
  CHECK(t.column("y") == 1);
  CHECK_THROWS_AS(t.column("z"), CsvError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), CsvError);
}

TEST_CASE("csv writer round trip") {
  TempDir dir("csv");
  {
    CsvWriter w(dir / "t.csv", {"a", "b"});
    w.write({"1", "x,y"});
  }
  {
    CsvWriter w(dir / "t.csv", {"a", "b"}, true);
    w.write({"2", "z"});
  }
  const CsvTable t = read_csv(dir / "t.csv");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[1][0] == "2");
}

TEST_CASE("checkpoint schedule arithmetic") {
  ExperimentConfig c;
  const auto e = c.checkpoint_epochs();
  REQUIRE(e.size() == 40);
  CHECK(e.front() == 3);
  CHECK(e.back() == 120);
  c.epochs = 6;
  CHECK(c.checkpoint_epochs() == std::vector<std::int64_t>{3, 6});
  c.epochs = 2;
  CHECK(c.checkpoint_epochs().empty());
}

TEST_CASE("bench with one seed and six epochs") {
  TempDir dir("bench1");
  ExperimentConfig c = small_config(dir.str());
  c.seeds = {1};
  c.epochs = 6;
  const CsvTable t = read_csv(run_bench(c));
  CHECK(t.header == bench_header());
  CHECK(t.rows.size() == 6);
  for (auto m : {"unsafe", "atomic_nodirsync", "atomic_dirsync"}) CHECK(count_where(t, "mode", m) == 2);
  CHECK(count_where(t, "ok", "1") == 6);
  const CsvTable ev = read_csv(events_csv_path(c));
  CHECK(ev.rows.size() == 6);
}

TEST_CASE("default bench configuration on the simulated backend") {
  TempDir dir("bench");
  ExperimentConfig c;
  c.root = dir.str();
  const CsvTable t = read_csv(run_bench(c));
  CHECK(t.rows.size() == 1200);
  for (auto m : {"unsafe", "atomic_nodirsync", "atomic_dirsync"}) CHECK(count_where(t, "mode", m) == 400);
  CHECK(count_where(t, "ok", "1") == 1200);
}

TEST_CASE("event log") {
  TempDir dir("events");
  ExperimentConfig c = small_config(dir.str());
  c.seeds = {1};
  c.modes = {WriteMode::AtomicDirsync};
  run_bench(c);
  const CsvTable ev = read_csv(events_csv_path(c));
  CHECK(ev.header == events_header());
  CHECK(ev.rows.size() == 40);
  std::uint64_t last = 0;
  for (const auto& r : ev.rows) {
    const std::uint64_t ns = std::stoull(r[0]);
    CHECK(ns >= last);
    last = ns;
    CHECK(r[1] == "group_checkpoint");
  }
}

TEST_CASE("real bench refuses a dirty directory") {
  TempDir dir("dirty");
  ExperimentConfig c = small_config(dir.str());
  c.backend = BackendKind::Real;
  c.seeds = {1};
  c.epochs = 3;
  run_bench(c);
  CHECK_THROWS_AS(run_bench(c), HarnessError);
}

TEST_CASE("simulated crash trials per point") {
  TempDir dir("crash");
  ExperimentConfig c = small_config(dir.str());
  c.plan = TrialPlan::parse(
      "atomic_dirsync:none:5,unsafe:after_model:5,unsafe:before_manifest:2,unsafe:manifest_partial:2,"
      "unsafe:before_commit:2,atomic_dirsync:before_commit:2,atomic_nodirsync:manifest_partial:2");
  c.sizes = GroupSizes{};
  const auto rows = crash_rows(c);
  REQUIRE(rows.size() == 20);
  for (const auto& r : rows) {
    if (!r.crash_point) {
      CHECK(r.ok);
      CHECK(r.reason.empty());
      continue;
    }
    CHECK_FALSE(r.ok);
    switch (*r.crash_point) {
      case CrashPoint::AfterModel:
        CHECK((r.reason == "size_mismatch" || r.reason == "load_error"));
        CHECK(r.subject == "model.ckt");
        break;
      case CrashPoint::BeforeManifest: CHECK(r.reason == "missing_manifest"); break;
      case CrashPoint::ManifestPartial:
        if (r.mode == WriteMode::Unsafe) CHECK((r.reason == "manifest_parse_error" || r.reason == "commit_mismatch"));
        else CHECK(r.reason == "missing_manifest");
        break;
      case CrashPoint::BeforeCommit: CHECK(r.reason == "missing_commit"); break;
    }
  }
}

TEST_CASE("simulated crash trials are deterministic") {
  ExperimentConfig c = small_config("/unused");
  const CrashTrial t{WriteMode::Unsafe, CrashPoint::ManifestPartial, 3, 77};
  const CrashRow a = run_sim_crash_trial(t, c), b = run_sim_crash_trial(t, c);
  CHECK(a.reason == b.reason);
  CHECK(a.ok == b.ok);
}

TEST_CASE("crash csv") {
  TempDir dir("crashcsv");
  ExperimentConfig c = small_config(dir.str());
  c.plan = TrialPlan::parse("atomic_dirsync:none:3,unsafe:before_commit:2");
  const CsvTable t = read_csv(run_crash_trials(c));
  CHECK(t.header == crash_header());
  REQUIRE(t.rows.size() == 5);
  CHECK(t.rows[0][t.column("crash_point")] == "none");
  CHECK(t.rows[4][t.column("reason")] == "missing_commit");
  CHECK(count_where(t, "ok", "1") == 3);
}

TEST_CASE("real crash trials run the writer in a child process") {
  TempDir dir("realcrash");
  ExperimentConfig c = small_config(dir.str());
  c.backend = BackendKind::Real;
  c.writer_exe = CKPT_EXE;
  c.plan = TrialPlan::parse("unsafe:after_model:2,unsafe:before_commit:1,unsafe:manifest_partial:1,atomic_dirsync:none:2");
  c.sizes = GroupSizes{};
  const auto rows = crash_rows(c);
  REQUIRE(rows.size() == 6);
  CHECK((rows[0].reason == "load_error" || rows[0].reason == "size_mismatch"));
  CHECK(rows[0].subject == "model.ckt");
  CHECK(rows[2].reason == "missing_commit");
  CHECK((rows[3].reason == "manifest_parse_error" || rows[3].reason == "commit_mismatch"));
  CHECK(rows[4].ok);
  CHECK(rows[5].ok);

  ExperimentConfig bad = c;
  bad.root = dir / "bad";
  bad.writer_exe = dir / "missing-binary";
  bad.plan = TrialPlan::parse("unsafe:after_model:1");
  CHECK_THROWS_AS(crash_rows(bad), HarnessError);
}

TEST_CASE("small corruption run") {
  TempDir dir("corrupt");
  ExperimentConfig c = small_config(dir.str());
  c.trials_per_fault = 40;
  const CsvTable t = read_csv(run_corruption_trials(c));
  CHECK(t.header == corrupt_header());
  REQUIRE(t.rows.size() == 160);
  const std::size_t fault = t.column("fault"), det = t.column("detected"), load = t.column("mech_load"),
                    sha = t.column("mech_file_sha");
  for (const auto& r : t.rows) {
    if (r[fault] == "none") {
      CHECK(r[det] == "0");
    } else if (r[fault] == "truncate") {
      CHECK(r[det] == "1");
      CHECK(r[load] == "1");
    } else if (r[fault] == "bitflip") {
      CHECK(r[det] == "1");
      CHECK(r[sha] == "1");
    }
  }
}

TEST_CASE("corruption rows do not depend on the thread count") {
  ExperimentConfig c = small_config("/unused");
  c.trials_per_fault = 25;
  c.faults = {FaultKind::Bitflip, FaultKind::Zerorange};
  const auto one = corruption_rows(c);
  c.threads = 4;
  const auto four = corruption_rows(c);
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].injection == four[i].injection);
    CHECK(one[i].detected == four[i].detected);
    CHECK(one[i].mechanisms == four[i].mechanisms);
  }
}

TEST_CASE("strict bitflip corruption") {
  ExperimentConfig c = small_config("/unused");
  c.trials_per_fault = 50;
  c.faults = {FaultKind::Bitflip, FaultKind::Zerorange};
  c.verify_changed = true;
  for (const auto& r : corruption_rows(c)) {
    CHECK(r.detected);
    CHECK(r.injection.bytes_actually_changed);
  }
}
