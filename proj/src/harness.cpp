#include "ckpt/harness.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <thread>

#include "ckpt/sim_fs.hpp"

extern char** environ;

namespace ckpt {

namespace fs = std::filesystem;

namespace {

std::string bool_field(bool b) { return b ? "1" : "0"; }

std::string point_name(const std::optional<CrashPoint>& p) { return p ? std::string(to_string(*p)) : "none"; }

std::string numbered(std::string_view prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", n);
  return std::string(prefix) + buf;
}

std::int64_t trial_epoch(const ExperimentConfig& config, std::size_t trial) {
  const auto epochs = config.checkpoint_epochs();
  return epochs.empty() ? 0 : epochs[trial % epochs.size()];
}

GroupMeta meta_for(std::uint64_t seed, std::int64_t epoch) {
  return GroupMeta{"s" + std::to_string(seed) + "-e" + std::to_string(epoch), epoch, seed};
}

void ensure_root(const std::string& root) {
  if (root.empty()) throw HarnessError("experiment root not set");
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw HarnessError("cannot create root " + root + ": " + ec.message());
}

std::unique_ptr<FsBackend> make_backend(BackendKind kind, std::uint64_t seed) {
  if (kind == BackendKind::Real) return std::make_unique<RealFs>();
  return std::make_unique<SimFs>(seed);
}

CrashRow from_report(const CrashTrial& t, const ValidationReport& report) {
  CrashRow row{t.mode, t.crash_point, t.trial, report.valid, "", ""};
  if (!report.valid) {
    row.reason = std::string(to_string(*report.reason));
    row.subject = report.reason_subject;
  }
  return row;
}

// Child writer protocol: `<exe> write-group --dir D --mode M --seed S --epoch E ...`
// with CKPT_CRASH_POINT in the environment.
CrashRow run_real_crash_trial(const CrashTrial& t, const ExperimentConfig& config) {
  if (config.writer_exe.empty()) throw HarnessError("real-backend crash trials need writer_exe");
  const std::int64_t epoch = trial_epoch(config, t.trial);
  const std::string trial_dir = join_path(join_path(join_path(config.root, "crash"),
                                                    std::string(to_string(t.mode)) + "@" + point_name(t.crash_point)),
                                          numbered("trial-", t.trial));
  const std::string group_dir = join_path(trial_dir, GroupLayout::dir_name(epoch));
  std::error_code ec;
  fs::remove_all(trial_dir, ec);
  fs::create_directories(trial_dir, ec);

  std::vector<std::string> args = {config.writer_exe,
                                   "write-group",
                                   "--dir",
                                   group_dir,
                                   "--mode",
                                   std::string(to_string(t.mode)),
                                   "--seed",
                                   std::to_string(t.seed),
                                   "--epoch",
                                   std::to_string(epoch),
                                   "--model-bytes",
                                   std::to_string(config.sizes.model_bytes),
                                   "--optimizer-bytes",
                                   std::to_string(config.sizes.optimizer_bytes),
                                   "--rng-bytes",
                                   std::to_string(config.sizes.rng_bytes),
                                   "--quiet"};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  std::vector<std::string> env_store;
  const std::string prefix = std::string(kCrashPointEnv) + "=";
  for (char** e = environ; *e; ++e) {
    if (std::string_view(*e).substr(0, prefix.size()) != prefix) env_store.emplace_back(*e);
  }
  if (t.crash_point) env_store.push_back(prefix + std::string(to_string(*t.crash_point)));
  std::vector<char*> envp;
  for (auto& e : env_store) envp.push_back(e.data());
  envp.push_back(nullptr);

  pid_t pid = 0;
  if (const int rc = ::posix_spawn(&pid, config.writer_exe.c_str(), nullptr, nullptr, argv.data(), envp.data());
      rc != 0) {
    throw HarnessError("child_spawn_error: " + std::string(std::strerror(rc)));
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw HarnessError("waitpid failed");
  }

  if (WIFEXITED(status) && WEXITSTATUS(status) != 0) {
    throw HarnessError("writer child exited with status " + std::to_string(WEXITSTATUS(status)));
  }
  if (WIFEXITED(status) && t.crash_point) {
    return CrashRow{t.mode, t.crash_point, t.trial, false, std::string(kHarnessAnomaly), ""};
  }
  RealFs real;
  return from_report(t, validate_group(real, group_dir));
}

CorruptRow run_corruption_trial(const ExperimentConfig& config, FaultKind kind, std::size_t trial,
                                std::uint64_t seed) {
  auto backend = make_backend(config.backend, seed);
  const std::int64_t epoch = trial_epoch(config, trial);
  std::string base = config.backend == BackendKind::Real
                         ? join_path(join_path(join_path(config.root, "corrupt"), std::string(to_string(kind))),
                                     numbered("trial-", trial))
                         : "/corrupt";
  if (config.backend == BackendKind::Real) {
    std::error_code ec;
    fs::remove_all(base, ec);
  }
  const GroupLayout layout{join_path(base, GroupLayout::dir_name(epoch))};
  const auto parts = synthetic_parts(seed, epoch, config.sizes);
  write_group(*backend, layout, parts, WriteMode::AtomicDirsync, meta_for(seed, epoch));

  FaultSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  spec.verify_changed = config.verify_changed;
  spec.include_metadata = config.include_metadata;
  InjectionRecord injection = inject_group(*backend, layout.dir, spec);

  const ValidationReport report = validate_group(*backend, layout.dir);
  CorruptRow row{kind, trial, !report.valid, "", report.mechanisms, injection};
  if (!report.valid) row.reason = std::string(to_string(*report.reason));
  return row;
}

}  // namespace

std::vector<std::int64_t> ExperimentConfig::checkpoint_epochs() const {
  std::vector<std::int64_t> out;
  if (ckpt_every <= 0) return out;
  for (int e = ckpt_every; e <= epochs; e += ckpt_every) out.push_back(e);
  return out;
}

CsvRow bench_header() { return {"experiment", "mode", "seed", "epoch", "latency_ns", "ok"}; }
CsvRow crash_header() { return {"experiment", "mode", "crash_point", "trial", "ok", "reason"}; }
CsvRow corrupt_header() {
  return {"experiment", "fault", "trial", "detected", "reason", "mech_load", "mech_digest", "mech_file_sha",
          "mech_structural"};
}
CsvRow events_header() { return {"unix_ns", "event", "group_path"}; }

std::string bench_csv_path(const ExperimentConfig& c) { return join_path(c.root, "bench.csv"); }
std::string crash_csv_path(const ExperimentConfig& c) { return join_path(c.root, "crash.csv"); }
std::string corrupt_csv_path(const ExperimentConfig& c) { return join_path(c.root, "corrupt.csv"); }
std::string events_csv_path(const ExperimentConfig& c) { return join_path(c.root, "events.csv"); }

EventLog::EventLog(const std::string& path) : writer_(path, events_header(), true) {}

void EventLog::record(const std::string& event, const std::string& group_path) {
  const auto now = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                                  std::chrono::system_clock::now().time_since_epoch())
                                                  .count());
  last_ns_ = std::max(last_ns_, now);
  writer_.write({std::to_string(last_ns_), event, group_path});
  ++count_;
}

std::vector<BenchRow> bench_rows(const ExperimentConfig& config, EventLog* events) {
  std::vector<BenchRow> rows;
  const auto epochs = config.checkpoint_epochs();
  for (WriteMode mode : config.modes) {
    for (std::uint64_t seed : config.seeds) {
      auto backend = make_backend(config.backend, seed);
      const std::string seed_dir = join_path(join_path(join_path(config.root, "bench"), std::string(to_string(mode))),
                                             "seed-" + std::to_string(seed));
      for (std::int64_t epoch : epochs) {
        const GroupLayout layout{join_path(seed_dir, GroupLayout::dir_name(epoch))};
        const auto parts = synthetic_parts(seed, epoch, config.sizes);
        const WriteReceipt receipt = write_group(*backend, layout, parts, mode, meta_for(seed, epoch));
        if (events) events->record("group_checkpoint", layout.dir);
        const bool ok = validate_group(*backend, layout.dir).valid;
        rows.push_back(BenchRow{mode, seed, epoch, receipt.latency_ns, ok});
      }
    }
  }
  return rows;
}

CrashRow run_sim_crash_trial(const CrashTrial& t, const ExperimentConfig& config) {
  SimFs fs(t.seed);
  const std::int64_t epoch = trial_epoch(config, t.trial);
  const GroupLayout layout{join_path("/trial", GroupLayout::dir_name(epoch))};
  const auto parts = synthetic_parts(t.seed, epoch, config.sizes);
  bool crashed = false;
  try {
    write_group(fs, layout, parts, t.mode, meta_for(t.seed, epoch), t.crash_point);
  } catch (const SimulatedCrash&) {
    crashed = true;
  }
  if (t.crash_point && !crashed) {
    return CrashRow{t.mode, t.crash_point, t.trial, false, std::string(kHarnessAnomaly), ""};
  }
  return from_report(t, validate_group(fs, layout.dir));
}

std::vector<CrashRow> crash_rows(const ExperimentConfig& config) {
  std::vector<CrashRow> rows;
  for (const CrashTrial& t : crash_point_schedule(config.plan)) {
    rows.push_back(config.backend == BackendKind::Real ? run_real_crash_trial(t, config)
                                                       : run_sim_crash_trial(t, config));
  }
  return rows;
}

std::vector<CorruptRow> corruption_rows(const ExperimentConfig& config) {
  struct Job {
    FaultKind kind;
    std::size_t trial;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < config.faults.size(); ++k) {
    for (std::size_t i = 0; i < config.trials_per_fault; ++i) {
      jobs.push_back(Job{config.faults[k], i, config.corruption_base_seed + k * config.trials_per_fault + i});
    }
  }
  std::vector<std::optional<CorruptRow>> results(jobs.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < jobs.size(); i += stride) {
      results[i] = run_corruption_trial(config, jobs[i].kind, jobs[i].trial, jobs[i].seed);
    }
  };
  const unsigned threads = std::max(1u, config.threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<CorruptRow> rows;
  rows.reserve(results.size());
  for (auto& r : results) rows.push_back(std::move(*r));
  return rows;
}

std::string run_bench(const ExperimentConfig& config) {
  ensure_root(config.root);
  if (config.backend == BackendKind::Real && fs::exists(join_path(config.root, "bench")) &&
      !fs::is_empty(join_path(config.root, "bench"))) {
    throw HarnessError("bench directory under " + config.root + " is not empty");
  }
  std::optional<EventLog> events;
  if (config.record_events) {
    std::error_code ec;
    fs::remove(events_csv_path(config), ec);
    events.emplace(events_csv_path(config));
  }
  const auto rows = bench_rows(config, events ? &*events : nullptr);
  CsvWriter out(bench_csv_path(config), bench_header());
  for (const auto& r : rows) {
    out.write({"bench", std::string(to_string(r.mode)), std::to_string(r.seed), std::to_string(r.epoch),
               std::to_string(r.latency_ns), bool_field(r.ok)});
  }
  return out.path();
}

std::string run_crash_trials(const ExperimentConfig& config) {
  ensure_root(config.root);
  // Rows are appended by this (parent) process only, after each child has exited.
  CsvWriter out(crash_csv_path(config), crash_header());
  for (const CrashTrial& t : crash_point_schedule(config.plan)) {
    const CrashRow r = config.backend == BackendKind::Real ? run_real_crash_trial(t, config)
                                                           : run_sim_crash_trial(t, config);
    out.write({"crash", std::string(to_string(r.mode)), point_name(r.crash_point), std::to_string(r.trial),
               bool_field(r.ok), r.reason});
  }
  return out.path();
}

std::string run_corruption_trials(const ExperimentConfig& config) {
  ensure_root(config.root);
  const auto rows = corruption_rows(config);
  CsvWriter out(corrupt_csv_path(config), corrupt_header());
  for (const auto& r : rows) {
    out.write({"corrupt", std::string(to_string(r.fault)), std::to_string(r.trial), bool_field(r.detected), r.reason,
               bool_field(r.mechanisms.load), bool_field(r.mechanisms.digest), bool_field(r.mechanisms.file_sha),
               bool_field(r.mechanisms.structural)});
  }
  return out.path();
}

}  // namespace ckpt
