#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "ckpt/fs_backend.hpp"

namespace ckpt {

enum class CrashKind { Process, PowerLoss };

// In-memory filesystem that models the three persistence tiers a write passes
// through: the application buffer (lost on process crash), the page cache
// (survives a process crash) and the device (survives power loss). Directory
// entries become durable only on sync_dir.
//
// Not thread-safe; one instance per trial.
class SimFs final : public FsBackend {
 public:
  explicit SimFs(std::uint64_t seed = 0);

  BackendKind kind() const override { return BackendKind::Simulated; }
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

  // Apply a crash transition without unwinding.
  void apply_crash(CrashKind kind);

  // Crash (process semantics) when the mutating-operation counter reaches
  // `step`; steps are counted from zero across create/write/flush/sync/close/
  // rename/sync_dir/mkdir/remove.
  void crash_at_step(std::optional<std::uint64_t> step) { crash_step_ = step; }
  std::uint64_t steps_taken() const { return steps_; }

  void advance_clock(std::uint64_t ns) { clock_ns_ += ns; }

  // Visible namespace: every file path with its page-cache bytes, plus every
  // directory (mapped to nullopt). Ordered, so two states compare directly.
  std::map<std::string, std::optional<Bytes>> snapshot() const;

  std::size_t open_handles() const { return handles_.size(); }
  // Bytes of a file that persist on the device.
  std::optional<Bytes> device_bytes(const std::string& path) const;

 private:
  struct Inode {
    Bytes cache;
    Bytes device;
    std::uint64_t mtime_ns = 0;
  };
  struct Handle {
    std::uint64_t inode;
    std::string path;
    AppBuffer buffer{kAppBufferSize};
  };

  void step(std::string_view op, const std::string& path);
  Handle& handle(FileId file);
  void require_parent(const std::string& path, std::string_view op) const;
  static std::string norm(const std::string& path);

  std::map<std::string, std::uint64_t> names_;
  std::map<std::string, std::uint64_t> durable_names_;
  std::set<std::string> dirs_;
  std::map<std::uint64_t, Inode> inodes_;
  std::map<FileId, Handle> handles_;
  std::uint64_t next_inode_ = 1;
  FileId next_handle_ = 1;
  std::uint64_t steps_ = 0;
  std::optional<std::uint64_t> crash_step_;
  std::uint64_t clock_ns_;
  std::uint64_t suffix_seed_;
  std::uint64_t suffix_counter_ = 0;
};

}  // namespace ckpt
