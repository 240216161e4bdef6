#include "ckpt/protocols.hpp"

#include <chrono>

namespace ckpt {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point start) {
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
  return ns > 0 ? static_cast<std::uint64_t>(ns) : 1;
}

void notify(const StepHook& hook, WriteStep step, const std::string& path) {
  if (hook) hook(step, path);
}

}  // namespace

std::string_view to_string(WriteMode mode) {
  switch (mode) {
    case WriteMode::Unsafe: return "unsafe";
    case WriteMode::AtomicNoDirsync: return "atomic_nodirsync";
    case WriteMode::AtomicDirsync: return "atomic_dirsync";
  }
  return "unknown";
}

std::optional<WriteMode> write_mode_from_name(std::string_view name) {
  if (name == "unsafe") return WriteMode::Unsafe;
  if (name == "atomic_nodirsync") return WriteMode::AtomicNoDirsync;
  if (name == "atomic_dirsync" || name == "atomic") return WriteMode::AtomicDirsync;
  return std::nullopt;
}

bool is_atomic(WriteMode mode) { return mode != WriteMode::Unsafe; }

std::string temp_path_for(const std::string& final_path, const std::string& suffix) {
  return final_path + ".tmp." + suffix;
}

bool is_temp_name(std::string_view name) { return name.find(".tmp.") != std::string_view::npos; }

WriteReceipt write_unsafe(FsBackend& fs, const std::string& path, std::span<const std::uint8_t> bytes,
                          const StepHook& hook) {
  const auto start = Clock::now();
  const FileId f = fs.create(path);
  try {
    fs.write(f, bytes);
    notify(hook, WriteStep::Queued, path);
  } catch (const IoError&) {
    try {
      fs.close(f);
    } catch (const IoError&) {
    }
    throw;
  }
  fs.close(f);
  return WriteReceipt{path, bytes.size(), elapsed_ns(start), WriteMode::Unsafe};
}

WriteReceipt write_atomic(FsBackend& fs, const std::string& path, std::span<const std::uint8_t> bytes,
                          bool dirsync, const StepHook& hook) {
  const auto start = Clock::now();
  const std::string tmp = temp_path_for(path, fs.random_suffix());
  const FileId f = fs.create(tmp);
  bool open = true;
  try {
    fs.write(f, bytes);
    notify(hook, WriteStep::Queued, tmp);
    fs.flush(f);
    notify(hook, WriteStep::Flushed, tmp);
    fs.sync(f);
    notify(hook, WriteStep::Synced, tmp);
    open = false;
    fs.close(f);
    fs.rename_replace(tmp, path);
  } catch (const IoError&) {
    try {
      if (open) fs.close(f);
    } catch (const IoError&) {
    }
    try {
      fs.remove(tmp);
    } catch (const IoError&) {
    }
    throw;
  }
  notify(hook, WriteStep::Renamed, path);
  if (dirsync) {
    fs.sync_dir(parent_path(path));
    notify(hook, WriteStep::DirSynced, path);
  }
  return WriteReceipt{path, bytes.size(), elapsed_ns(start),
                      dirsync ? WriteMode::AtomicDirsync : WriteMode::AtomicNoDirsync};
}

WriteReceipt write_file(FsBackend& fs, const std::string& path, std::span<const std::uint8_t> bytes,
                        WriteMode mode, const StepHook& hook) {
  switch (mode) {
    case WriteMode::Unsafe: return write_unsafe(fs, path, bytes, hook);
    case WriteMode::AtomicNoDirsync: return write_atomic(fs, path, bytes, false, hook);
    case WriteMode::AtomicDirsync: return write_atomic(fs, path, bytes, true, hook);
  }
  throw std::invalid_argument("write_file: unknown mode");
}

}  // namespace ckpt
