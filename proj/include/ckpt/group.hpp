#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ckpt/payload.hpp"
#include "ckpt/protocols.hpp"
#include "json.hpp"

namespace ckpt {

using Json = nlohmann::json;

// Sorted keys, no whitespace, integers only.
std::string canonical_json(const Json& value);

enum class CrashPoint { AfterModel, BeforeManifest, ManifestPartial, BeforeCommit };

std::string_view to_string(CrashPoint point);
std::optional<CrashPoint> crash_point_from_name(std::string_view name);

struct PartEntry {
  std::string name;
  std::uint64_t size = 0;
  std::string file_sha256;
  std::string content_digest;

  friend bool operator==(const PartEntry&, const PartEntry&) = default;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Manifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string group_id;
  std::int64_t epoch = 0;
  std::uint64_t seed = 0;
  std::vector<PartEntry> parts;
  std::uint64_t created_unix_ns = 0;

  Json to_json() const;
  // Throws ManifestError on schema violations (missing fields, duplicate or
  // path-like part names, empty part list, malformed hashes).
  static Manifest from_json(const Json& j);

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct CommitRecord {
  std::string manifest_sha256;
  std::string group_id;
  std::uint64_t committed_unix_ns = 0;

  Json to_json() const;
  static CommitRecord from_json(const Json& j);
};

// One group per directory, fixed file names.
struct GroupLayout {
  static constexpr std::string_view kModel = "model.ckt";
  static constexpr std::string_view kOptimizer = "optimizer.ckt";
  static constexpr std::string_view kRng = "rng.ckt";
  static constexpr std::string_view kManifest = "MANIFEST.json";
  static constexpr std::string_view kCommit = "COMMIT.json";

  std::string dir;

  std::string path(std::string_view name) const { return join_path(dir, std::string(name)); }
  // "ckpt-000042"
  static std::string dir_name(std::int64_t epoch);
  // Epoch parsed from a "ckpt-NNNNNN" directory name.
  static std::optional<std::int64_t> parse_dir_name(std::string_view name);
};

struct GroupPart {
  std::string name;
  TensorBlob blob;
};

struct GroupMeta {
  std::string group_id;
  std::int64_t epoch = 0;
  std::uint64_t seed = 0;
};

struct GroupSizes {
  std::size_t model_bytes = 131072;
  std::size_t optimizer_bytes = 65536;
  std::size_t rng_bytes = 256;
};

// Deterministic model/optimizer/rng parts for (seed, epoch).
std::vector<GroupPart> synthetic_parts(std::uint64_t seed, std::int64_t epoch, const GroupSizes& sizes = {});

// Parts first, then MANIFEST.json, then COMMIT.json, each with `mode`.
// `crash` fires the named crash point through FsBackend::crash_now.
WriteReceipt write_group(FsBackend& fs, const GroupLayout& layout, std::span<const GroupPart> parts,
                         WriteMode mode, const GroupMeta& meta, std::optional<CrashPoint> crash = std::nullopt);

}  // namespace ckpt
