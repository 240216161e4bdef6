#include "ckpt/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "ckpt/faults.hpp"
#include "ckpt/group.hpp"
#include "ckpt/guard.hpp"
#include "ckpt/harness.hpp"
#include "ckpt/stats.hpp"

namespace ckpt {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<WriteMode> parse_modes(const std::string& s) {
  std::vector<WriteMode> out;
  for (const auto& m : split_list(s)) {
    auto mode = write_mode_from_name(m);
    if (!mode) throw UsageError("unknown mode: " + m);
    out.push_back(*mode);
  }
  if (out.empty()) throw UsageError("no modes given");
  return out;
}

// "1-10" or "1,2,5"
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  try {
    for (const auto& item : split_list(s)) {
      const auto dash = item.find('-');
      if (dash != std::string::npos && dash > 0) {
        const std::uint64_t lo = std::stoull(item.substr(0, dash));
        const std::uint64_t hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw UsageError("empty seed range: " + item);
        for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoull(item));
      }
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("bad seed list: " + s);
  }
  if (out.empty()) throw UsageError("no seeds given");
  return out;
}

std::vector<FaultKind> parse_faults(const std::string& s) {
  std::vector<FaultKind> out;
  for (const auto& f : split_list(s)) {
    auto kind = fault_kind_from_name(f);
    if (!kind) throw UsageError("unknown fault kind: " + f);
    out.push_back(*kind);
  }
  if (out.empty()) throw UsageError("no fault kinds given");
  return out;
}

BackendKind parse_backend(const std::string& s) {
  auto b = backend_kind_from_name(s);
  if (!b) throw UsageError("unknown backend: " + s + " (expected real or sim)");
  return *b;
}

std::string self_exe() {
  std::error_code ec;
  auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::string() : p.string();
}

struct Options {
  std::string dir, root, mode = "atomic_dirsync", file, kind, modes = "unsafe,atomic_nodirsync,atomic_dirsync";
  std::string seeds = "1-10", plan = "default", backend, faults = "bitflip,zerorange,truncate,none";
  std::string bench, crash, corrupt, out, ci_method = "exact", sampler, events;
  std::uint64_t seed = 1;
  std::int64_t epoch = 3;
  int epochs = 120, every = 3;
  std::size_t trials = 400, model_bytes = 131072, optimizer_bytes = 65536, rng_bytes = 256;
  unsigned threads = 1, interval_ms = 1000;
  double seconds = 10, min_age_s = 0;
  bool json = false, verify_changed = false, include_metadata = false, quiet = false;
};

void add_sizes(CLI::App* cmd, Options& o) {
  cmd->add_option("--model-bytes", o.model_bytes, "model payload bytes");
  cmd->add_option("--optimizer-bytes", o.optimizer_bytes, "optimizer payload bytes");
  cmd->add_option("--rng-bytes", o.rng_bytes, "rng payload bytes");
}

ExperimentConfig base_config(const Options& o) {
  ExperimentConfig c;
  c.root = o.root;
  c.sizes = GroupSizes{o.model_bytes, o.optimizer_bytes, o.rng_bytes};
  c.epochs = o.epochs;
  c.ckpt_every = o.every;
  if (c.epochs <= 0 || c.ckpt_every <= 0) throw UsageError("--epochs and --every must be positive");
  return c;
}

int run(CLI::App& app, const Options& o, std::ostream& out, std::ostream& err) {
  const std::string name = app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name();

  if (name == "write-group") {
    auto mode = write_mode_from_name(o.mode);
    if (!mode) throw UsageError("unknown mode: " + o.mode);
    std::optional<CrashPoint> point;
    if (const char* env = std::getenv(kCrashPointEnv); env && *env) {
      point = crash_point_from_name(env);
      if (!point) throw UsageError(std::string("unknown ") + kCrashPointEnv + ": " + env);
    }
    RealFs fs;
    const auto parts = synthetic_parts(o.seed, o.epoch, GroupSizes{o.model_bytes, o.optimizer_bytes, o.rng_bytes});
    const GroupMeta meta{"s" + std::to_string(o.seed) + "-e" + std::to_string(o.epoch), o.epoch, o.seed};
    const WriteReceipt r = write_group(fs, GroupLayout{o.dir}, parts, *mode, meta, point);
    if (!o.quiet) {
      out << "wrote " << r.path << " " << r.bytes_written << " bytes in " << format_sig3(r.latency_ns / 1e6)
          << " ms (" << to_string(r.mode) << ")\n";
    }
    return kExitOk;
  }

  if (name == "validate") {
    RealFs fs;
    const ValidationReport report = validate_group(fs, o.dir);
    if (o.json) {
      out << canonical_json(report.to_json()) << "\n";
    } else {
      out << report.summary() << "\n";
    }
    return report.valid ? kExitOk : kExitInvalid;
  }

  if (name == "recover") {
    RealFs fs;
    try {
      const RecoveryResult r = recover_latest(fs, o.root);
      if (o.json) {
        Json quarantined = Json::array();
        for (const auto& q : r.quarantined) quarantined.push_back(q);
        Json rejected = Json::array();
        for (const auto& rep : r.rejected) rejected.push_back(rep.to_json());
        out << canonical_json(Json{{"group", r.group_name}, {"group_path", r.group_path},
                                   {"quarantined", quarantined}, {"rejected", rejected}})
            << "\n";
      } else {
        for (const auto& q : r.quarantined) err << "quarantined " << q << "\n";
        out << r.group_name << "\n";
      }
      return kExitOk;
    } catch (const NoValidCheckpoint& e) {
      if (o.json) {
        out << canonical_json(Json{{"group", nullptr}, {"error", "no_valid_checkpoint"}}) << "\n";
      }
      err << e.what() << "\n";
      return kExitInvalid;
    }
  }

  if (name == "inject") {
    auto kind = fault_kind_from_name(o.kind);
    if (!kind) throw UsageError("unknown fault kind: " + o.kind);
    RealFs fs;
    const InjectionRecord r = inject_file(fs, o.file, *kind, o.seed, o.verify_changed);
    out << canonical_json(Json{{"file", r.file},
                               {"kind", std::string(to_string(r.kind))},
                               {"offset", r.offset},
                               {"length", r.length},
                               {"bit", r.bit},
                               {"original_length", r.original_length},
                               {"new_length", r.new_length},
                               {"bytes_actually_changed", r.bytes_actually_changed}})
        << "\n";
    return kExitOk;
  }

  if (name == "bench") {
    ExperimentConfig c = base_config(o);
    c.modes = parse_modes(o.modes);
    c.seeds = parse_seeds(o.seeds);
    c.backend = parse_backend(o.backend.empty() ? "real" : o.backend);
    out << run_bench(c) << "\n";
    return kExitOk;
  }

  if (name == "crash-trials") {
    ExperimentConfig c = base_config(o);
    try {
      c.plan = TrialPlan::parse(o.plan);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    c.backend = parse_backend(o.backend.empty() ? "sim" : o.backend);
    c.writer_exe = self_exe();
    out << run_crash_trials(c) << "\n";
    return kExitOk;
  }

  if (name == "corrupt-trials") {
    ExperimentConfig c = base_config(o);
    c.faults = parse_faults(o.faults);
    c.trials_per_fault = o.trials;
    c.verify_changed = o.verify_changed;
    c.include_metadata = o.include_metadata;
    c.threads = o.threads;
    c.backend = parse_backend(o.backend.empty() ? "sim" : o.backend);
    out << run_corruption_trials(c) << "\n";
    return kExitOk;
  }

  if (name == "report") {
    auto method = ci_method_from_name(o.ci_method);
    if (!method) throw UsageError("unknown --ci-method: " + o.ci_method);
    const ReportFiles files = make_report(ReportInputs{o.bench, o.crash, o.corrupt}, o.out, *method);
    for (const auto& n : files.notes) err << "note: " << n << "\n";
    for (const auto* p : {&files.latency_csv, &files.crash_csv, &files.corruption_csv}) {
      if (!p->empty()) out << *p << "\n";
    }
    return kExitOk;
  }

  if (name == "timeline") {
    const TimelineResult r = merge_timeline(o.sampler, o.events, o.out);
    for (const auto& w : r.warnings) err << "warning: " << w << "\n";
    out << r.csv_path << "\n" << r.svg_path << "\n";
    out << "peak_alignment " << format_fixed(r.peak_alignment, 3) << "\n";
    return kExitOk;
  }

  if (name == "sample-io") {
    const auto rows = sample_disk_activity(o.seconds, o.out, o.interval_ms);
    out << o.out << " (" << rows.size() << " rows)\n";
    return kExitOk;
  }

  if (name == "sweep") {
    RealFs fs;
    const auto removed = sweep_orphans(fs, o.root, static_cast<std::uint64_t>(o.min_age_s * 1e9));
    out << removed << "\n";
    return kExitOk;
  }

  throw UsageError("a subcommand is required");
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crash-consistent checkpoint writer, integrity guard and experiment harness", "ckpt"};
  app.require_subcommand(1);
  Options o;

  auto* wg = app.add_subcommand("write-group", "write one checkpoint group (honors CKPT_CRASH_POINT)");
  wg->add_option("--dir", o.dir, "group directory")->required();
  wg->add_option("--mode", o.mode, "unsafe | atomic_nodirsync | atomic_dirsync")->required();
  wg->add_option("--seed", o.seed, "payload seed");
  wg->add_option("--epoch", o.epoch, "epoch number");
  wg->add_flag("--quiet", o.quiet, "no output on success");
  add_sizes(wg, o);

  auto* val = app.add_subcommand("validate", "validate a group directory");
  val->add_option("--dir", o.dir, "group directory")->required();
  val->add_flag("--json", o.json, "emit the report as canonical JSON");

  auto* rec = app.add_subcommand("recover", "select the newest valid group and update LATEST_OK");
  rec->add_option("--root", o.root, "checkpoint root")->required();
  rec->add_flag("--json", o.json, "emit canonical JSON");

  auto* inj = app.add_subcommand("inject", "corrupt one file in place");
  inj->add_option("--file", o.file, "target file")->required();
  inj->add_option("--kind", o.kind, "bitflip | zerorange | truncate")->required();
  inj->add_option("--seed", o.seed, "injection seed")->required();
  inj->add_flag("--verify-changed", o.verify_changed, "redraw zero ranges that change nothing");

  auto* bench = app.add_subcommand("bench", "latency benchmark over modes x seeds x checkpoint epochs");
  bench->add_option("--root", o.root, "output root")->required();
  bench->add_option("--modes", o.modes, "comma-separated modes");
  bench->add_option("--seeds", o.seeds, "seed list, e.g. 1-10 or 1,2,3");
  bench->add_option("--epochs", o.epochs, "epochs per seed");
  bench->add_option("--every", o.every, "checkpoint every N epochs");
  bench->add_option("--backend", o.backend, "real (default) | sim");
  add_sizes(bench, o);

  auto* crash = app.add_subcommand("crash-trials", "crash-injection trials");
  crash->add_option("--root", o.root, "output root")->required();
  crash->add_option("--plan", o.plan, "default, or mode:point:count[,...]");
  crash->add_option("--backend", o.backend, "sim (default) | real");
  add_sizes(crash, o);

  auto* corrupt = app.add_subcommand("corrupt-trials", "corruption-injection trials on atomic groups");
  corrupt->add_option("--root", o.root, "output root")->required();
  corrupt->add_option("--faults", o.faults, "comma-separated fault kinds");
  corrupt->add_option("--trials", o.trials, "trials per fault kind");
  corrupt->add_flag("--verify-changed", o.verify_changed, "zero ranges must change at least one byte");
  corrupt->add_flag("--include-metadata", o.include_metadata, "allow MANIFEST/COMMIT as targets");
  corrupt->add_option("--threads", o.threads, "worker threads");
  corrupt->add_option("--backend", o.backend, "sim (default) | real");
  add_sizes(corrupt, o);

  auto* report = app.add_subcommand("report", "regenerate tables and plots from trial CSVs");
  report->add_option("--bench", o.bench, "bench.csv");
  report->add_option("--crash", o.crash, "crash.csv");
  report->add_option("--corrupt", o.corrupt, "corrupt.csv");
  report->add_option("--out", o.out, "output directory")->required();
  report->add_option("--ci-method", o.ci_method, "exact (default) | wilson");

  auto* tl = app.add_subcommand("timeline", "merge sampler and event CSVs into a timeline");
  tl->add_option("--sampler", o.sampler, "sampler CSV (unix_s,tps)")->required();
  tl->add_option("--events", o.events, "events CSV")->required();
  tl->add_option("--out", o.out, "output directory")->required();

  auto* sio = app.add_subcommand("sample-io", "capture disk transactions per second");
  sio->add_option("--seconds", o.seconds, "capture duration")->required();
  sio->add_option("--out", o.out, "sampler CSV path")->required();
  sio->add_option("--interval-ms", o.interval_ms, "sampling interval");

  auto* sweep = app.add_subcommand("sweep", "delete orphaned temp files");
  sweep->add_option("--root", o.root, "checkpoint root")->required();
  sweep->add_option("--min-age-s", o.min_age_s, "only files at least this old");

  std::vector<std::string> argv_store{"ckpt"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    return run(app, o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FaultError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const UnsupportedPlatform& e) {
    err << "unsupported: " << e.what() << "\n";
    return kExitIo;
  } catch (const SchemaMismatch& e) {
    err << "schema_mismatch: " << e.what() << "\n";
    return kExitIo;
  } catch (const CsvError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace ckpt
