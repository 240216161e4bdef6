#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ckpt/payload.hpp"

namespace ckpt {

enum class BackendKind { Real, Simulated };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> backend_kind_from_name(std::string_view name);

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& op, const std::string& path, int err = 0);
  const std::string& path() const { return path_; }
  int error_number() const { return errno_; }

 private:
  std::string path_;
  int errno_;
};

// Thrown by the simulated backend when a crash point fires. Deliberately not an
// IoError: writers must not run their error-path cleanup on a crash.
class SimulatedCrash : public std::exception {
 public:
  const char* what() const noexcept override { return "simulated process crash"; }
};

struct DirEntry {
  std::string name;
  bool is_directory = false;
};

// One backend call, recorded when tracing is enabled.
struct TraceEvent {
  std::string op;
  std::string path;
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

class DirLock {
 public:
  virtual ~DirLock() = default;
};

using FileId = std::uint64_t;

// Application-side write buffer with stdio-style overflow flushing: the buffer
// is handed to the OS only when a write would not fit.
class AppBuffer {
 public:
  explicit AppBuffer(std::size_t capacity) : capacity_(capacity) { data_.reserve(capacity); }

  template <typename Sink>
  void append(std::span<const std::uint8_t> bytes, Sink&& sink) {
    while (!bytes.empty()) {
      if (data_.size() == capacity_) drain(sink);
      const std::size_t take = std::min(capacity_ - data_.size(), bytes.size());
      data_.insert(data_.end(), bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(take));
      bytes = bytes.subspan(take);
    }
  }

  template <typename Sink>
  void drain(Sink&& sink) {
    if (data_.empty()) return;
    sink(std::span<const std::uint8_t>(data_));
    data_.clear();
  }

  std::size_t pending() const { return data_.size(); }

 private:
  std::size_t capacity_;
  Bytes data_;
};

// Filesystem capability used by the write protocols, the guard and the injectors.
// Single writer per directory.
class FsBackend {
 public:
  static constexpr std::size_t kAppBufferSize = 64 * 1024;

  virtual ~FsBackend() = default;

  virtual BackendKind kind() const = 0;

  // Create or truncate a file for writing.
  virtual FileId create(const std::string& path) = 0;
  // Queue bytes into the handle's application buffer.
  virtual void write(FileId file, std::span<const std::uint8_t> bytes) = 0;
  // Hand the application buffer to the OS (page cache).
  virtual void flush(FileId file) = 0;
  // fsync: page cache to device.
  virtual void sync(FileId file) = 0;
  // Flush the application buffer and release the handle.
  virtual void close(FileId file) = 0;
  // Atomic at the name level. Works for files and directories.
  virtual void rename_replace(const std::string& from, const std::string& to) = 0;
  virtual void sync_dir(const std::string& dir) = 0;

  virtual std::optional<Bytes> read(const std::string& path) const = 0;
  virtual std::vector<DirEntry> list(const std::string& dir) const = 0;
  virtual bool exists(const std::string& path) const = 0;
  virtual bool is_directory(const std::string& path) const = 0;
  virtual std::uint64_t mtime_ns(const std::string& path) const = 0;

  virtual void remove(const std::string& path) = 0;
  virtual void make_dirs(const std::string& path) = 0;
  // Replace a file's bytes in place, outside any write protocol (offline corruption).
  virtual void overwrite(const std::string& path, std::span<const std::uint8_t> bytes) = 0;

  // Terminate the writer at an instrumented crash point. Real backend: the
  // process dies. Simulated backend: crash transition, then SimulatedCrash.
  [[noreturn]] virtual void crash_now() = 0;

  virtual std::uint64_t now_unix_ns() = 0;
  // Eight lowercase hex characters for temp-file names.
  virtual std::string random_suffix() = 0;
  virtual std::unique_ptr<DirLock> lock_dir(const std::string& dir) = 0;

  void set_tracing(bool on) { tracing_ = on; }
  const std::vector<TraceEvent>& trace() const { return trace_; }
  void clear_trace() { trace_.clear(); }

 protected:
  void record(std::string_view op, const std::string& path) {
    if (tracing_) trace_.push_back(TraceEvent{std::string(op), path});
  }

 private:
  bool tracing_ = false;
  std::vector<TraceEvent> trace_;
};

std::string join_path(const std::string& dir, const std::string& name);
std::string parent_path(const std::string& path);
std::string file_name(const std::string& path);

// POSIX filesystem.
class RealFs final : public FsBackend {
 public:
  RealFs();
  ~RealFs() override;
  RealFs(const RealFs&) = delete;
  RealFs& operator=(const RealFs&) = delete;

  BackendKind kind() const override { return BackendKind::Real; }
  FileId create(const std::string& path) override;
  void write(FileId file, std::span<const std::uint8_t> bytes) override;
  void flush(FileId file) override;
  void sync(FileId file) override;
  void close(FileId file) override;
  void rename_replace(const std::string& from, const std::string& to) override;
  void sync_dir(const std::string& dir) override;
  std::optional<Bytes> read(const std::string& path) const override;
  std::vector<DirEntry> list(const std::string& dir) const override;
  bool exists(const std::string& path) const override;
  bool is_directory(const std::string& path) const override;
  std::uint64_t mtime_ns(const std::string& path) const override;
  void remove(const std::string& path) override;
  void make_dirs(const std::string& path) override;
  void overwrite(const std::string& path, std::span<const std::uint8_t> bytes) override;
  [[noreturn]] void crash_now() override;
  std::uint64_t now_unix_ns() override;
  std::string random_suffix() override;
  std::unique_ptr<DirLock> lock_dir(const std::string& dir) override;

 private:
  struct Handle;
  Handle& handle(FileId file);
  std::vector<std::unique_ptr<Handle>> handles_;
  std::uint64_t suffix_state_;
};

}  // namespace ckpt
