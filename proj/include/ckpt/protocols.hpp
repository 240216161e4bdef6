#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ckpt/fs_backend.hpp"

namespace ckpt {

enum class WriteMode { Unsafe, AtomicNoDirsync, AtomicDirsync };

std::string_view to_string(WriteMode mode);
std::optional<WriteMode> write_mode_from_name(std::string_view name);
bool is_atomic(WriteMode mode);

struct WriteReceipt {
  std::string path;
  std::uint64_t bytes_written = 0;
  std::uint64_t latency_ns = 0;
  WriteMode mode = WriteMode::Unsafe;
};

// Points inside a single-file write where a caller may observe (or crash).
enum class WriteStep {
  Queued,     // all bytes handed to the application buffer; handle still open
  Flushed,    // application buffer handed to the OS
  Synced,     // file contents forced to the device
  Renamed,    // temp file installed under the final name
  DirSynced,  // parent directory entry forced to the device
};

// Invoked with the step and the path currently being written (temp or final).
using StepHook = std::function<void(WriteStep, const std::string&)>;

// Buffered write straight to `path`; no fsync. The handle is closed before
// returning, which is the only flush of the tail chunk.
WriteReceipt write_unsafe(FsBackend& fs, const std::string& path, std::span<const std::uint8_t> bytes,
                          const StepHook& hook = {});

// temp write -> flush -> fsync -> rename over `path` -> optional parent-dir fsync.
// The temp file is removed on any IoError.
WriteReceipt write_atomic(FsBackend& fs, const std::string& path, std::span<const std::uint8_t> bytes,
                          bool dirsync, const StepHook& hook = {});

WriteReceipt write_file(FsBackend& fs, const std::string& path, std::span<const std::uint8_t> bytes,
                        WriteMode mode, const StepHook& hook = {});

// Temp-file naming used by write_atomic: final + ".tmp." + 8 hex chars.
std::string temp_path_for(const std::string& final_path, const std::string& suffix);
bool is_temp_name(std::string_view name);

[[noreturn]] inline void crash_now(FsBackend& fs) {
  fs.crash_now();
  std::abort();  // backends never return from crash_now
}

}  // namespace ckpt
