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

enum class FailureReason {
  MissingPart,
  SizeMismatch,
  LoadError,
  ShapeMismatch,
  DigestMismatch,
  FileShaMismatch,
  NonFinite,
  MissingManifest,
  ManifestParseError,
  MissingCommit,
  CommitMismatch,
};

std::string_view to_string(FailureReason reason);
std::optional<FailureReason> failure_reason_from_name(std::string_view name);

enum class Mechanism { Load, Digest, FileSha, Structural };

std::string_view to_string(Mechanism mechanism);
Mechanism mechanism_for(FailureReason reason);

struct MechanismSet {
  bool load = false;
  bool digest = false;
  bool file_sha = false;
  bool structural = false;

  void add(Mechanism m);
  bool contains(Mechanism m) const;
  bool empty() const { return !(load || digest || file_sha || structural); }
  friend bool operator==(const MechanismSet&, const MechanismSet&) = default;
};

// Number of per-part checks: present+size, load, shape, digest, file hash, finite.
inline constexpr int kPartChecks = 6;

struct PartResult {
  std::string name;
  int checks_passed = 0;
  std::optional<FailureReason> failure;
  // Every check that failed, in evaluation order.
  std::vector<FailureReason> failures;
};

struct ValidationReport {
  std::string group_path;
  bool valid = false;
  // First failing check; empty iff valid.
  std::optional<FailureReason> reason;
  // The part or metadata file the primary reason refers to.
  std::string reason_subject;
  std::vector<FailureReason> structural_failures;
  std::vector<PartResult> parts;
  MechanismSet mechanisms;
  std::uint64_t duration_ns = 0;

  Json to_json() const;
  // e.g. "valid" or "load_error model.ckt"
  std::string summary() const;
};

// Runs every layer; never throws for missing or garbage input.
ValidationReport validate_group(const FsBackend& fs, const std::string& group_path);

class NoValidCheckpoint : public std::runtime_error {
 public:
  explicit NoValidCheckpoint(const std::string& root)
      : std::runtime_error("no valid checkpoint under '" + root + "'") {}
};

inline constexpr std::string_view kLatestOkFile = "LATEST_OK";
inline constexpr std::string_view kQuarantineSuffix = ".corrupt";

struct RecoveryResult {
  std::string group_path;
  std::string group_name;
  std::vector<std::string> quarantined;
  std::vector<ValidationReport> rejected;
};

// Newest-first by epoch; invalid groups are renamed aside with ".corrupt" and the
// first valid one is published through LATEST_OK. Throws NoValidCheckpoint.
RecoveryResult recover_latest(FsBackend& fs, const std::string& root);

std::optional<std::string> read_latest_ok(const FsBackend& fs, const std::string& root);

// Removes "*.tmp.*" files at least `min_age_ns` old under root and its group directories.
std::size_t sweep_orphans(FsBackend& fs, const std::string& root, std::uint64_t min_age_ns = 0);

}  // namespace ckpt
