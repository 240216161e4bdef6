#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ckpt/fs_backend.hpp"
#include "ckpt/group.hpp"

namespace ckpt {

enum class FaultKind { Bitflip, Zerorange, Truncate, None };

std::string_view to_string(FaultKind kind);
std::optional<FaultKind> fault_kind_from_name(std::string_view name);

inline constexpr std::string_view kRandomPart = "random_part";
inline constexpr std::uint64_t kZerorangeMaxLength = 4096;
inline constexpr int kZerorangeMaxRedraws = 64;

struct FaultSpec {
  FaultKind kind = FaultKind::None;
  std::uint64_t seed = 0;
  std::string target{kRandomPart};
  bool verify_changed = false;
  // Allow MANIFEST.json / COMMIT.json as random targets.
  bool include_metadata = false;
};

struct InjectionRecord {
  std::string file;
  FaultKind kind = FaultKind::None;
  std::uint64_t offset = 0;
  // Bitflip: 1 (the byte); zerorange: bytes zeroed; truncate: bytes removed.
  std::uint64_t length = 0;
  std::uint8_t bit = 0;
  std::uint64_t original_length = 0;
  std::uint64_t new_length = 0;
  bool bytes_actually_changed = false;

  friend bool operator==(const InjectionRecord&, const InjectionRecord&) = default;
};

class FaultError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// In-memory injectors; deterministic in (bytes, seed). Throw FaultError("empty_file").
InjectionRecord inject_bitflip(Bytes& bytes, std::uint64_t seed);
InjectionRecord inject_zerorange(Bytes& bytes, std::uint64_t seed, bool verify_changed);
InjectionRecord inject_truncate(Bytes& bytes, std::uint64_t seed);
InjectionRecord inject_bytes(Bytes& bytes, FaultKind kind, std::uint64_t seed, bool verify_changed);

// Read-modify-write of one file through the backend.
InjectionRecord inject_file(FsBackend& fs, const std::string& path, FaultKind kind, std::uint64_t seed,
                            bool verify_changed);

// Resolves spec.target inside a group directory and injects. kind=None only resolves the target.
InjectionRecord inject_group(FsBackend& fs, const std::string& group_dir, const FaultSpec& spec);

struct PlanEntry {
  WriteMode mode = WriteMode::Unsafe;
  std::optional<CrashPoint> crash_point;
  std::size_t count = 0;
};

struct TrialPlan {
  std::uint64_t base_seed = 1000;
  std::vector<PlanEntry> entries;

  // unsafe@{after_model 400, before_manifest 10, manifest_partial 10, before_commit 10}
  // plus an atomic_dirsync no-crash reference of 400.
  static TrialPlan standard();
  // "default" or comma-separated "mode:point:count" (point may be "none").
  static TrialPlan parse(std::string_view text);
};

struct CrashTrial {
  WriteMode mode = WriteMode::Unsafe;
  std::optional<CrashPoint> crash_point;
  std::size_t trial = 0;  // index within its plan entry
  std::uint64_t seed = 0;
};

std::vector<CrashTrial> crash_point_schedule(const TrialPlan& plan);

}  // namespace ckpt
