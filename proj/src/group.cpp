#include "ckpt/group.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <set>

#include "ckpt/sha256.hpp"

namespace ckpt {

namespace {

template <typename T>
T required(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ManifestError(std::string("missing field: ") + key);
  const Json& v = j.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ManifestError(std::string("field not a string: ") + key);
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned()) throw ManifestError(std::string("field not an unsigned integer: ") + key);
  } else {
    if (!v.is_number_integer()) throw ManifestError(std::string("field not an integer: ") + key);
  }
  return v.get<T>();
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::uint64_t part_seed(std::uint64_t seed, std::int64_t epoch, std::uint64_t index) {
  std::uint8_t buf[24];
  put_u64_be(seed, buf);
  put_u64_be(static_cast<std::uint64_t>(epoch), buf + 8);
  put_u64_be(index, buf + 16);
  const Sha256Digest d = sha256(buf);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
  return v;
}

void reject_floats(const Json& v) {
  if (v.is_number_float()) throw std::invalid_argument("canonical_json: floats are not representable");
  if (v.is_structured()) {
    for (const auto& child : v) reject_floats(child);
  }
}

}  // namespace

std::string canonical_json(const Json& value) {
  reject_floats(value);
  // nlohmann::json objects are std::map-backed, so dump() emits keys in
  // bytewise ascending order with no whitespace.
  return value.dump(-1, ' ', false, Json::error_handler_t::strict);
}

std::string_view to_string(CrashPoint point) {
  switch (point) {
    case CrashPoint::AfterModel: return "after_model";
    case CrashPoint::BeforeManifest: return "before_manifest";
    case CrashPoint::ManifestPartial: return "manifest_partial";
    case CrashPoint::BeforeCommit: return "before_commit";
  }
  return "unknown";
}

std::optional<CrashPoint> crash_point_from_name(std::string_view name) {
  if (name == "after_model") return CrashPoint::AfterModel;
  if (name == "before_manifest") return CrashPoint::BeforeManifest;
  if (name == "manifest_partial") return CrashPoint::ManifestPartial;
  if (name == "before_commit") return CrashPoint::BeforeCommit;
  return std::nullopt;
}

Json Manifest::to_json() const {
  Json parts_json = Json::array();
  for (const auto& p : parts) {
    parts_json.push_back(Json{{"name", p.name},
                              {"size", p.size},
                              {"file_sha256", p.file_sha256},
                              {"content_digest", p.content_digest}});
  }
  return Json{{"format_version", format_version}, {"group_id", group_id}, {"epoch", epoch},
              {"seed", seed},                     {"parts", parts_json},  {"created_unix_ns", created_unix_ns}};
}

Manifest Manifest::from_json(const Json& j) {
  Manifest m;
  m.format_version = required<int>(j, "format_version");
  if (m.format_version != kFormatVersion) throw ManifestError("unsupported format_version");
  m.group_id = required<std::string>(j, "group_id");
  m.epoch = required<std::int64_t>(j, "epoch");
  m.seed = required<std::uint64_t>(j, "seed");
  m.created_unix_ns = required<std::uint64_t>(j, "created_unix_ns");
  if (!j.contains("parts") || !j.at("parts").is_array()) throw ManifestError("missing field: parts");
  std::set<std::string> seen;
  for (const Json& pj : j.at("parts")) {
    PartEntry p;
    p.name = required<std::string>(pj, "name");
    p.size = required<std::uint64_t>(pj, "size");
    p.file_sha256 = required<std::string>(pj, "file_sha256");
    p.content_digest = required<std::string>(pj, "content_digest");
    if (p.name.empty() || p.name.find('/') != std::string::npos || p.name.find('\\') != std::string::npos ||
        p.name == "." || p.name == "..") {
      throw ManifestError("invalid part name: " + p.name);
    }
    if (!is_sha256_hex(p.file_sha256) || !is_sha256_hex(p.content_digest)) {
      throw ManifestError("malformed hash for part " + p.name);
    }
    if (!seen.insert(p.name).second) throw ManifestError("duplicate part name: " + p.name);
    m.parts.push_back(std::move(p));
  }
  if (m.parts.empty()) throw ManifestError("manifest lists no parts");
  return m;
}

Json CommitRecord::to_json() const {
  return Json{{"group_id", group_id}, {"manifest_sha256", manifest_sha256}, {"committed_unix_ns", committed_unix_ns}};
}

CommitRecord CommitRecord::from_json(const Json& j) {
  CommitRecord c;
  c.group_id = required<std::string>(j, "group_id");
  c.manifest_sha256 = required<std::string>(j, "manifest_sha256");
  c.committed_unix_ns = required<std::uint64_t>(j, "committed_unix_ns");
  if (!is_sha256_hex(c.manifest_sha256)) throw ManifestError("malformed manifest_sha256");
  return c;
}

std::string GroupLayout::dir_name(std::int64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt-%06lld", static_cast<long long>(epoch));
  return buf;
}

std::optional<std::int64_t> GroupLayout::parse_dir_name(std::string_view name) {
  constexpr std::string_view kPrefix = "ckpt-";
  if (name.size() < kPrefix.size() + 6 || name.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  const std::string_view digits = name.substr(kPrefix.size());
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  std::int64_t epoch = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), epoch);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return epoch;
}

std::vector<GroupPart> synthetic_parts(std::uint64_t seed, std::int64_t epoch, const GroupSizes& sizes) {
  std::vector<GroupPart> parts;
  parts.push_back({std::string(GroupLayout::kModel), generate_synthetic(part_seed(seed, epoch, 0), sizes.model_bytes, Dtype::F32)});
  parts.push_back({std::string(GroupLayout::kOptimizer),
                   generate_synthetic(part_seed(seed, epoch, 1), sizes.optimizer_bytes, Dtype::F64)});
  parts.push_back({std::string(GroupLayout::kRng), generate_synthetic(part_seed(seed, epoch, 2), sizes.rng_bytes, Dtype::F32)});
  return parts;
}

WriteReceipt write_group(FsBackend& fs, const GroupLayout& layout, std::span<const GroupPart> parts,
                         WriteMode mode, const GroupMeta& meta, std::optional<CrashPoint> crash) {
  if (parts.empty()) throw std::invalid_argument("write_group: no parts");
  const auto crash_here = [&](CrashPoint p) {
    if (crash == p) fs.crash_now();
  };

  std::vector<std::pair<std::string, Bytes>> encoded;
  encoded.reserve(parts.size());
  for (const auto& part : parts) encoded.emplace_back(part.name, encode_container(part.blob));

  fs.make_dirs(layout.dir);

  const auto start = std::chrono::steady_clock::now();
  std::uint64_t total = 0;

  Manifest manifest;
  manifest.group_id = meta.group_id;
  manifest.epoch = meta.epoch;
  manifest.seed = meta.seed;

  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& [name, bytes] = encoded[i];
    StepHook hook;
    if (i == 0 && crash == CrashPoint::AfterModel) {
      hook = [&](WriteStep step, const std::string&) {
        if (step == WriteStep::Queued) fs.crash_now();
      };
    }
    total += write_file(fs, layout.path(name), bytes, mode, hook).bytes_written;
    manifest.parts.push_back(PartEntry{name, bytes.size(), sha256_hex(bytes), tensor_digest(parts[i].blob).hex()});
  }

  crash_here(CrashPoint::BeforeManifest);
  manifest.created_unix_ns = fs.now_unix_ns();
  const std::string manifest_text = canonical_json(manifest.to_json());
  const std::string manifest_path = layout.path(GroupLayout::kManifest);

  if (crash == CrashPoint::ManifestPartial) {
    // Torn manifest: the first half reaches the OS, then the writer dies.
    const std::string target = is_atomic(mode) ? temp_path_for(manifest_path, fs.random_suffix()) : manifest_path;
    const FileId f = fs.create(target);
    fs.write(f, as_bytes(manifest_text).first(manifest_text.size() / 2));
    fs.flush(f);
    fs.crash_now();
  }
  total += write_file(fs, manifest_path, as_bytes(manifest_text), mode).bytes_written;

  crash_here(CrashPoint::BeforeCommit);
  CommitRecord commit{sha256_hex(manifest_text), meta.group_id, fs.now_unix_ns()};
  const std::string commit_text = canonical_json(commit.to_json());
  total += write_file(fs, layout.path(GroupLayout::kCommit), as_bytes(commit_text), mode).bytes_written;

  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
  return WriteReceipt{layout.dir, total, ns > 0 ? static_cast<std::uint64_t>(ns) : 1, mode};
}

}  // namespace ckpt
