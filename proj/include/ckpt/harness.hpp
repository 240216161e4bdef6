#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ckpt/csv.hpp"
#include "ckpt/faults.hpp"
#include "ckpt/group.hpp"
#include "ckpt/guard.hpp"

namespace ckpt {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const char* const kCrashPointEnv = "CKPT_CRASH_POINT";
inline constexpr std::string_view kHarnessAnomaly = "harness_anomaly";

struct ExperimentConfig {
  std::string root;
  std::vector<WriteMode> modes{WriteMode::Unsafe, WriteMode::AtomicNoDirsync, WriteMode::AtomicDirsync};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int epochs = 120;
  int ckpt_every = 3;
  GroupSizes sizes;
  BackendKind backend = BackendKind::Simulated;

  TrialPlan plan = TrialPlan::standard();

  std::vector<FaultKind> faults{FaultKind::Bitflip, FaultKind::Zerorange, FaultKind::Truncate, FaultKind::None};
  std::size_t trials_per_fault = 400;
  std::uint64_t corruption_base_seed = 20000;
  bool verify_changed = false;
  bool include_metadata = false;
  // Corruption trials only; each trial owns its directory.
  unsigned threads = 1;

  // CLI binary used as the crash-trial child on the real backend.
  std::string writer_exe;
  bool record_events = true;

  // Checkpoint epochs per seed: ckpt_every, 2*ckpt_every, ... <= epochs.
  std::vector<std::int64_t> checkpoint_epochs() const;
};

struct BenchRow {
  WriteMode mode;
  std::uint64_t seed;
  std::int64_t epoch;
  std::uint64_t latency_ns;
  bool ok;
};

struct CrashRow {
  WriteMode mode;
  std::optional<CrashPoint> crash_point;
  std::size_t trial;
  bool ok;
  std::string reason;  // empty iff ok
  std::string subject;
};

struct CorruptRow {
  FaultKind fault;
  std::size_t trial;
  bool detected;
  std::string reason;
  MechanismSet mechanisms;
  InjectionRecord injection;
};

// events.csv: unix_ns,event,group_path. Timestamps are forced nondecreasing.
class EventLog {
 public:
  explicit EventLog(const std::string& path);
  void record(const std::string& event, const std::string& group_path);
  const std::string& path() const { return writer_.path(); }
  std::size_t count() const { return count_; }

 private:
  CsvWriter writer_;
  std::uint64_t last_ns_ = 0;
  std::size_t count_ = 0;
};

std::vector<BenchRow> bench_rows(const ExperimentConfig& config, EventLog* events = nullptr);
std::vector<CrashRow> crash_rows(const ExperimentConfig& config);
std::vector<CorruptRow> corruption_rows(const ExperimentConfig& config);

// One simulated crash trial, fully in-process and deterministic.
CrashRow run_sim_crash_trial(const CrashTrial& trial, const ExperimentConfig& config);

// Each run_* writes <root>/<experiment>.csv and returns its path.
std::string run_bench(const ExperimentConfig& config);
std::string run_crash_trials(const ExperimentConfig& config);
std::string run_corruption_trials(const ExperimentConfig& config);

std::string bench_csv_path(const ExperimentConfig& config);
std::string crash_csv_path(const ExperimentConfig& config);
std::string corrupt_csv_path(const ExperimentConfig& config);
std::string events_csv_path(const ExperimentConfig& config);

CsvRow bench_header();
CsvRow crash_header();
CsvRow corrupt_header();
CsvRow events_header();

}  // namespace ckpt
