#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <random>

#include "ckpt/protocols.hpp"
#include "ckpt/sim_fs.hpp"
#include "test_util.hpp"

using namespace ckpt;
using ckpt::testing::bytes_of;
using ckpt::testing::random_bytes;
using ckpt::testing::TempDir;

namespace {

constexpr std::size_t KiB = 1024;

std::vector<std::string> temp_files(const FsBackend& fs, const std::string& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs.list(dir))
    if (is_temp_name(e.name)) out.push_back(e.name);
  return out;
}

// Position of the first trace event matching (op, predicate on path).
template <typename Pred>
std::ptrdiff_t find_op(const std::vector<TraceEvent>& trace, std::string_view op, Pred pred) {
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (trace[i].op == op && pred(trace[i].path)) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

}  // namespace

TEST_CASE("path helpers") {
  CHECK(join_path("/a", "b") == "/a/b");
  CHECK(join_path("/a/", "b") == "/a/b");
  CHECK(parent_path("/a/b/c.txt") == "/a/b");
  CHECK(file_name("/a/b/c.txt") == "c.txt");
}

TEST_CASE("write mode names") {
  CHECK(to_string(WriteMode::Unsafe) == "unsafe");
  CHECK(to_string(WriteMode::AtomicNoDirsync) == "atomic_nodirsync");
  CHECK(to_string(WriteMode::AtomicDirsync) == "atomic_dirsync");
  CHECK(write_mode_from_name("atomic_nodirsync") == WriteMode::AtomicNoDirsync);
  CHECK_FALSE(write_mode_from_name("fast").has_value());
  CHECK_FALSE(is_atomic(WriteMode::Unsafe));
  CHECK(is_atomic(WriteMode::AtomicDirsync));
}

TEST_CASE("temp names") {
  const std::string t = temp_path_for("/d/model.ckt", "0123abcd");
  CHECK(t == "/d/model.ckt.tmp.0123abcd");
  CHECK(is_temp_name(file_name(t)));
  CHECK_FALSE(is_temp_name("model.ckt"));
  SimFs fs(3);
  const std::string s = fs.random_suffix();
  CHECK(s.size() == 8);
  CHECK(s.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("unsafe write, no crash") {
  SimFs fs;
  fs.make_dirs("/d");
  const Bytes data(100 * KiB, 0x11);
  const WriteReceipt r = write_unsafe(fs, "/d/f", data);
  CHECK(r.bytes_written == data.size());
  CHECK(fs.read("/d/f") == data);
  CHECK(fs.open_handles() == 0);
}

TEST_CASE("unsafe write crashed before close keeps only the flushed chunk") {
  SimFs fs;
  fs.make_dirs("/d");
  const Bytes data(100 * KiB, 0x22);
  const StepHook hook = [&](WriteStep step, const std::string&) {
    if (step == WriteStep::Queued) fs.crash_now();
  };
  CHECK_THROWS_AS(write_unsafe(fs, "/d/f", data, hook), SimulatedCrash);
  const auto after = fs.read("/d/f");
  REQUIRE(after.has_value());
  CHECK(after->size() == 64 * KiB);
  CHECK(*after == Bytes(64 * KiB, 0x22));
  CHECK(fs.open_handles() == 0);
}

TEST_CASE("128 KiB unsafe crash leaves exactly one buffer on disk") {
  // The buffer drains only when the next byte does not fit, so the second
  // 64 KiB chunk is still pending when the process dies.
  SimFs fs;
  fs.make_dirs("/d");
  const StepHook hook = [&](WriteStep step, const std::string&) {
    if (step == WriteStep::Queued) fs.crash_now();
  };
  CHECK_THROWS_AS(write_unsafe(fs, "/d/f", Bytes(128 * KiB, 1), hook), SimulatedCrash);
  CHECK(fs.read("/d/f")->size() == 64 * KiB);
}

TEST_CASE("atomic write crashed between sync and rename") {
  SimFs fs(5);
  fs.make_dirs("/d");
  const StepHook hook = [&](WriteStep step, const std::string&) {
    if (step == WriteStep::Synced) fs.crash_now();
  };
  CHECK_THROWS_AS(write_atomic(fs, "/d/f", Bytes(1000, 3), true, hook), SimulatedCrash);
  CHECK_FALSE(fs.exists("/d/f"));
  CHECK(temp_files(fs, "/d").size() == 1);
}

TEST_CASE("atomic write crashed after rename without dirsync") {
  SimFs fs;
  fs.make_dirs("/d");
  const Bytes data(5000, 9);
  const StepHook hook = [&](WriteStep step, const std::string&) {
    if (step == WriteStep::Renamed) fs.crash_now();
  };
  CHECK_THROWS_AS(write_atomic(fs, "/d/f", data, false, hook), SimulatedCrash);
  CHECK(fs.read("/d/f") == data);
  CHECK(temp_files(fs, "/d").empty());
}

TEST_CASE("overwrite keeps old or new content") {
  const Bytes x = bytes_of("old contents"), y = bytes_of("brand new contents");
  SUBCASE("no crash") {
    SimFs fs;
    fs.make_dirs("/d");
    write_atomic(fs, "/d/f", x, true);
    write_atomic(fs, "/d/f", y, true);
    CHECK(fs.read("/d/f") == y);
  }
  SUBCASE("crash before rename") {
    SimFs fs;
    fs.make_dirs("/d");
    write_atomic(fs, "/d/f", x, true);
    const StepHook hook = [&](WriteStep s, const std::string&) {
      if (s == WriteStep::Synced) fs.crash_now();
    };
    CHECK_THROWS_AS(write_atomic(fs, "/d/f", y, true, hook), SimulatedCrash);
    CHECK(fs.read("/d/f") == x);
  }
}

TEST_CASE("power loss distinguishes directory sync") {
  const Bytes x = bytes_of("xxxx"), y = bytes_of("yyyyyyyy");
  SUBCASE("dirsync makes the rename durable") {
    SimFs fs;
    fs.make_dirs("/d");
    write_atomic(fs, "/d/f", x, true);
    write_atomic(fs, "/d/f", y, true);
    fs.apply_crash(CrashKind::PowerLoss);
    CHECK(fs.read("/d/f") == y);
  }
  SUBCASE("without dirsync the old name survives") {
    SimFs fs;
    fs.make_dirs("/d");
    write_atomic(fs, "/d/f", x, true);
    write_atomic(fs, "/d/f", y, false);
    CHECK(fs.read("/d/f") == y);
    fs.apply_crash(CrashKind::PowerLoss);
    CHECK(fs.read("/d/f") == x);
  }
  SUBCASE("unsynced unsafe data is lost") {
    SimFs fs;
    fs.make_dirs("/d");
    write_unsafe(fs, "/d/f", y);
    fs.apply_crash(CrashKind::PowerLoss);
    CHECK_FALSE(fs.exists("/d/f"));
  }
}

TEST_CASE("crash with empty buffers leaves state unchanged") {
  SimFs fs;
  fs.make_dirs("/d");
  write_atomic(fs, "/d/a", Bytes(300, 1), true);
  write_unsafe(fs, "/d/b", Bytes(20, 2));
  const auto before = fs.snapshot();
  CHECK_THROWS_AS(crash_now(fs), SimulatedCrash);
  CHECK(fs.snapshot() == before);
}

TEST_CASE("crash with 10 KiB pending drops those bytes") {
  SimFs fs;
  fs.make_dirs("/d");
  const FileId f = fs.create("/d/f");
  fs.write(f, Bytes(10 * KiB, 7));
  CHECK_THROWS_AS(fs.crash_now(), SimulatedCrash);
  CHECK(fs.read("/d/f") == Bytes{});
  CHECK_THROWS_AS(fs.write(f, Bytes(1, 0)), IoError);
}

TEST_CASE("identical seeded trials give identical snapshots") {
  auto trial = [](std::uint64_t seed) {
    SimFs fs(seed);
    fs.make_dirs("/d");
    fs.crash_at_step(9);
    try {
      write_atomic(fs, "/d/a", Bytes(70 * KiB, 4), true);
      write_atomic(fs, "/d/b", Bytes(10, 5), true);
    } catch (const SimulatedCrash&) {
    }
    return fs.snapshot();
  };
  CHECK(trial(11) == trial(11));
}

TEST_CASE("atomic write trace order") {
  SimFs fs;
  fs.make_dirs("/d");
  fs.set_tracing(true);
  write_atomic(fs, "/d/f", Bytes(10, 1), true);
  const auto& t = fs.trace();
  auto is_temp = [](const std::string& p) { return is_temp_name(file_name(p)); };
  auto any = [](const std::string&) { return true; };
  const auto create = find_op(t, "create", is_temp);
  const auto sync = find_op(t, "sync", is_temp);
  const auto rename = find_op(t, "rename", any);
  const auto dsync = find_op(t, "sync_dir", [](const std::string& p) { return p == "/d"; });
  REQUIRE(create >= 0);
  REQUIRE(sync >= 0);
  REQUIRE(rename >= 0);
  REQUIRE(dsync >= 0);
  CHECK(create < sync);
  CHECK(sync < rename);
  CHECK(rename < dsync);

  fs.clear_trace();
  write_atomic(fs, "/d/g", Bytes(10, 1), false);
  CHECK(find_op(fs.trace(), "sync_dir", any) == -1);
  fs.clear_trace();
  write_unsafe(fs, "/d/h", Bytes(10, 1));
  CHECK(find_op(fs.trace(), "sync", any) == -1);
}

TEST_CASE("every crash step of an atomic overwrite leaves old or new content") {
  const Bytes x(90 * KiB, 0xA1), y(150 * KiB, 0xB2);
  for (bool dirsync : {false, true}) {
    SimFs probe;
    probe.make_dirs("/d");
    write_atomic(probe, "/d/f", x, dirsync);
    const std::uint64_t base = probe.steps_taken();
    write_atomic(probe, "/d/f", y, dirsync);
    const std::uint64_t total = probe.steps_taken() - base;
    REQUIRE(total > 4);
    for (std::uint64_t s = 0; s <= total; ++s) {
      for (CrashKind kind : {CrashKind::Process, CrashKind::PowerLoss}) {
        SimFs fs;
        fs.make_dirs("/d");
        write_atomic(fs, "/d/f", x, dirsync);
        fs.sync_dir("/d");
        fs.crash_at_step(fs.steps_taken() + s);
        try {
          write_atomic(fs, "/d/f", y, dirsync);
        } catch (const SimulatedCrash&) {
        }
        fs.apply_crash(kind);
        const auto got = fs.read("/d/f");
        REQUIRE(got.has_value());
        CHECK((*got == x || *got == y));
      }
    }
  }
}

TEST_CASE("sim directory operations") {
  SimFs fs;
  CHECK_THROWS_AS(fs.create("/missing/f"), IoError);
  fs.make_dirs("/a/b");
  CHECK(fs.is_directory("/a"));
  CHECK(fs.is_directory("/a/b"));
  write_atomic(fs, "/a/b/f", Bytes(3, 1), true);
  fs.rename_replace("/a/b", "/a/c");
  CHECK(fs.read("/a/c/f") == Bytes(3, 1));
  CHECK_FALSE(fs.exists("/a/b/f"));
  const auto entries = fs.list("/a");
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].name == "c");
  CHECK(entries[0].is_directory);
  fs.overwrite("/a/c/f", Bytes(2, 9));
  CHECK(fs.read("/a/c/f") == Bytes(2, 9));
  fs.remove("/a/c/f");
  CHECK_FALSE(fs.exists("/a/c/f"));
  const std::uint64_t t0 = fs.now_unix_ns();
  CHECK(fs.now_unix_ns() > t0);
}

TEST_CASE("real backend writes") {
  TempDir dir("fs");
  RealFs fs;
  const Bytes data(128 * KiB, 0x3C);
  SUBCASE("unsafe receipt") {
    const WriteReceipt r = write_unsafe(fs, dir / "u.bin", data);
    CHECK(r.bytes_written == 131072);
    CHECK(std::filesystem::file_size(dir / "u.bin") == 131072);
  }
  SUBCASE("atomic leaves no temp") {
    for (WriteMode m : {WriteMode::AtomicNoDirsync, WriteMode::AtomicDirsync}) {
      const WriteReceipt r = write_file(fs, dir / "a.bin", data, m);
      CHECK(r.mode == m);
      CHECK(fs.read(dir / "a.bin") == data);
      CHECK(temp_files(fs, dir.str()).empty());
    }
  }
  SUBCASE("failed rename removes the temp file") {
    std::filesystem::create_directories(dir / "occupied/sub");
    CHECK_THROWS_AS(write_atomic(fs, dir / "occupied", data, true), IoError);
    CHECK(temp_files(fs, dir.str()).empty());
  }
  SUBCASE("missing parent is an io error") {
    CHECK_THROWS_AS(write_unsafe(fs, dir / "nope/x", data), IoError);
  }
}

TEST_CASE("real and simulated backends agree on final contents") {
  TempDir dir("diff");
  RealFs real;
  SimFs sim;
  sim.make_dirs(dir.str());
  std::mt19937_64 rng(5);
  const std::vector<std::string> names{"a", "b", "c"};
  for (int i = 0; i < 30; ++i) {
    const std::string name = names[rng() % names.size()];
    const Bytes data = random_bytes(rng, rng() % (200 * KiB));
    const auto mode = static_cast<WriteMode>(rng() % 3);
    write_file(real, dir / name, data, mode);
    write_file(sim, dir / name, data, mode);
  }
  for (const auto& n : names) CHECK(real.read(dir / n) == sim.read(dir / n));
  auto names_of = [](const std::vector<DirEntry>& es) {
    std::vector<std::string> out;
    for (const auto& e : es) out.push_back(e.name);
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(names_of(real.list(dir.str())) == names_of(sim.list(dir.str())));
}
