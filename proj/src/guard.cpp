#include "ckpt/guard.hpp"

#include <algorithm>
#include <chrono>

#include "ckpt/protocols.hpp"
#include "ckpt/sha256.hpp"

namespace ckpt {

namespace {

struct ReasonName {
  FailureReason reason;
  std::string_view name;
};

constexpr ReasonName kReasonNames[] = {
    {FailureReason::MissingPart, "missing_part"},
    {FailureReason::SizeMismatch, "size_mismatch"},
    {FailureReason::LoadError, "load_error"},
    {FailureReason::ShapeMismatch, "shape_mismatch"},
    {FailureReason::DigestMismatch, "digest_mismatch"},
    {FailureReason::FileShaMismatch, "file_sha_mismatch"},
    {FailureReason::NonFinite, "non_finite"},
    {FailureReason::MissingManifest, "missing_manifest"},
    {FailureReason::ManifestParseError, "manifest_parse_error"},
    {FailureReason::MissingCommit, "missing_commit"},
    {FailureReason::CommitMismatch, "commit_mismatch"},
};

std::optional<Json> parse_json(const Bytes& bytes) {
  Json j = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

// Checks that pass before `reason` fires, in evaluation order.
int check_index(FailureReason reason) {
  switch (reason) {
    case FailureReason::SizeMismatch: return 0;
    case FailureReason::LoadError: return 1;
    case FailureReason::ShapeMismatch: return 2;
    case FailureReason::DigestMismatch: return 3;
    case FailureReason::FileShaMismatch: return 4;
    case FailureReason::NonFinite: return 5;
    default: return 0;
  }
}

PartResult check_part(const FsBackend& fs, const std::string& group_path, const PartEntry& entry,
                      MechanismSet& mechanisms) {
  PartResult r;
  r.name = entry.name;
  auto fail = [&](FailureReason reason) {
    r.failures.push_back(reason);
    mechanisms.add(mechanism_for(reason));
  };

  const std::optional<Bytes> file = fs.read(join_path(group_path, entry.name));
  if (!file) {
    fail(FailureReason::MissingPart);
    r.failure = FailureReason::MissingPart;
    return r;
  }

  // (1) size
  if (file->size() != entry.size) fail(FailureReason::SizeMismatch);
  // (2) load
  const DecodeResult decoded = decode_container(*file);
  const TensorBlob* blob = std::get_if<TensorBlob>(&decoded);
  if (!blob) fail(FailureReason::LoadError);
  // (3) shape: the container's own dims are the schema
  if (blob && !blob->well_formed()) fail(FailureReason::ShapeMismatch);
  // (4) content digest
  if (blob && tensor_digest(*blob).hex() != entry.content_digest) fail(FailureReason::DigestMismatch);
  // (5) file hash; computed over whatever bytes exist
  if (sha256_hex(*file) != entry.file_sha256) fail(FailureReason::FileShaMismatch);
  // (6) finiteness
  if (blob && has_non_finite(*blob)) fail(FailureReason::NonFinite);

  if (r.failures.empty()) {
    r.checks_passed = kPartChecks;
  } else {
    r.failure = r.failures.front();
    r.checks_passed = check_index(*r.failure);
  }
  return r;
}

}  // namespace

std::string_view to_string(FailureReason reason) {
  for (const auto& rn : kReasonNames) {
    if (rn.reason == reason) return rn.name;
  }
  return "unknown";
}

std::optional<FailureReason> failure_reason_from_name(std::string_view name) {
  for (const auto& rn : kReasonNames) {
    if (rn.name == name) return rn.reason;
  }
  return std::nullopt;
}

std::string_view to_string(Mechanism mechanism) {
  switch (mechanism) {
    case Mechanism::Load: return "load";
    case Mechanism::Digest: return "digest";
    case Mechanism::FileSha: return "file_sha";
    case Mechanism::Structural: return "structural";
  }
  return "unknown";
}

Mechanism mechanism_for(FailureReason reason) {
  switch (reason) {
    case FailureReason::LoadError: return Mechanism::Load;
    case FailureReason::DigestMismatch: return Mechanism::Digest;
    case FailureReason::FileShaMismatch: return Mechanism::FileSha;
    default: return Mechanism::Structural;
  }
}

void MechanismSet::add(Mechanism m) {
  switch (m) {
    case Mechanism::Load: load = true; break;
    case Mechanism::Digest: digest = true; break;
    case Mechanism::FileSha: file_sha = true; break;
    case Mechanism::Structural: structural = true; break;
  }
}

bool MechanismSet::contains(Mechanism m) const {
  switch (m) {
    case Mechanism::Load: return load;
    case Mechanism::Digest: return digest;
    case Mechanism::FileSha: return file_sha;
    case Mechanism::Structural: return structural;
  }
  return false;
}

Json ValidationReport::to_json() const {
  Json parts_json = Json::array();
  for (const auto& p : parts) {
    Json failures_json = Json::array();
    for (auto f : p.failures) failures_json.push_back(std::string(to_string(f)));
    parts_json.push_back(Json{{"name", p.name},
                              {"checks_passed", p.checks_passed},
                              {"failure", p.failure ? Json(std::string(to_string(*p.failure))) : Json(nullptr)},
                              {"failures", failures_json}});
  }
  Json mech = Json::array();
  for (auto m : {Mechanism::Load, Mechanism::Digest, Mechanism::FileSha, Mechanism::Structural}) {
    if (mechanisms.contains(m)) mech.push_back(std::string(to_string(m)));
  }
  Json structural = Json::array();
  for (auto f : structural_failures) structural.push_back(std::string(to_string(f)));
  return Json{{"group_path", group_path},
              {"valid", valid},
              {"reason", reason ? Json(std::string(to_string(*reason))) : Json(nullptr)},
              {"reason_subject", reason_subject},
              {"structural_failures", structural},
              {"parts", parts_json},
              {"mechanisms", mech},
              {"duration_ns", duration_ns}};
}

std::string ValidationReport::summary() const {
  if (valid) return "valid";
  std::string s(reason ? to_string(*reason) : "invalid");
  if (!reason_subject.empty()) s += " " + reason_subject;
  return s;
}

ValidationReport validate_group(const FsBackend& fs, const std::string& group_path) {
  const auto start = std::chrono::steady_clock::now();
  ValidationReport report;
  report.group_path = group_path;

  std::optional<std::pair<FailureReason, std::string>> first_structural;
  auto structural = [&](FailureReason reason, std::string_view subject) {
    report.structural_failures.push_back(reason);
    report.mechanisms.add(Mechanism::Structural);
    if (!first_structural) first_structural.emplace(reason, std::string(subject));
  };

  std::optional<Manifest> manifest;
  std::optional<Bytes> manifest_bytes;
  try {
    manifest_bytes = fs.read(join_path(group_path, std::string(GroupLayout::kManifest)));
  } catch (const IoError&) {
  }
  if (!manifest_bytes) {
    structural(FailureReason::MissingManifest, GroupLayout::kManifest);
  } else if (auto j = parse_json(*manifest_bytes)) {
    try {
      manifest = Manifest::from_json(*j);
    } catch (const ManifestError&) {
      structural(FailureReason::ManifestParseError, GroupLayout::kManifest);
    } catch (const Json::exception&) {
      structural(FailureReason::ManifestParseError, GroupLayout::kManifest);
    }
  } else {
    structural(FailureReason::ManifestParseError, GroupLayout::kManifest);
  }

  std::optional<Bytes> commit_bytes;
  try {
    commit_bytes = fs.read(join_path(group_path, std::string(GroupLayout::kCommit)));
  } catch (const IoError&) {
  }
  if (!commit_bytes) {
    structural(FailureReason::MissingCommit, GroupLayout::kCommit);
  } else if (manifest_bytes) {
    bool matches = false;
    if (auto j = parse_json(*commit_bytes)) {
      try {
        const CommitRecord commit = CommitRecord::from_json(*j);
        matches = commit.manifest_sha256 == sha256_hex(*manifest_bytes) &&
                  (!manifest || commit.group_id == manifest->group_id);
      } catch (const ManifestError&) {
      } catch (const Json::exception&) {
      }
    }
    if (!matches) structural(FailureReason::CommitMismatch, GroupLayout::kCommit);
  }

  if (manifest) {
    for (const auto& entry : manifest->parts) {
      PartResult part;
      try {
        part = check_part(fs, group_path, entry, report.mechanisms);
      } catch (const IoError&) {
        part.name = entry.name;
        part.failure = FailureReason::MissingPart;
        part.failures = {FailureReason::MissingPart};
        report.mechanisms.add(Mechanism::Structural);
      }
      report.parts.push_back(std::move(part));
    }
  } else {
    // No usable manifest: load whatever part files exist so a torn part is
    // still reported as the root cause.
    std::vector<DirEntry> entries;
    try {
      entries = fs.list(group_path);
    } catch (const IoError&) {
    }
    for (const auto& e : entries) {
      if (e.is_directory || is_temp_name(e.name) || !e.name.ends_with(".ckt")) continue;
      PartResult part;
      part.name = e.name;
      std::optional<Bytes> bytes;
      try {
        bytes = fs.read(join_path(group_path, e.name));
      } catch (const IoError&) {
      }
      if (bytes) {
        const DecodeResult decoded = decode_container(*bytes);
        if (const auto* blob = std::get_if<TensorBlob>(&decoded)) {
          if (has_non_finite(*blob)) part.failures.push_back(FailureReason::NonFinite);
        } else {
          part.failures.push_back(FailureReason::LoadError);
        }
      } else {
        part.failures.push_back(FailureReason::MissingPart);
      }
      for (auto f : part.failures) report.mechanisms.add(mechanism_for(f));
      if (!part.failures.empty()) part.failure = part.failures.front();
      part.checks_passed = part.failure ? check_index(*part.failure) : kPartChecks;
      report.parts.push_back(std::move(part));
    }
  }

  // Part-level evidence outranks metadata: a torn part explains a missing manifest.
  for (const auto& part : report.parts) {
    if (part.failure) {
      report.reason = part.failure;
      report.reason_subject = part.name;
      break;
    }
  }
  if (!report.reason && first_structural) {
    report.reason = first_structural->first;
    report.reason_subject = first_structural->second;
  }

  report.valid = !report.reason.has_value();
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
  report.duration_ns = static_cast<std::uint64_t>(std::max<std::int64_t>(ns, 0));
  return report;
}

std::optional<std::string> read_latest_ok(const FsBackend& fs, const std::string& root) {
  auto bytes = fs.read(join_path(root, std::string(kLatestOkFile)));
  if (!bytes) return std::nullopt;
  std::string s(bytes->begin(), bytes->end());
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

RecoveryResult recover_latest(FsBackend& fs, const std::string& root) {
  const auto lock = fs.lock_dir(root);

  std::vector<std::pair<std::int64_t, std::string>> groups;
  for (const auto& e : fs.list(root)) {
    if (!e.is_directory) continue;
    if (auto epoch = GroupLayout::parse_dir_name(e.name)) groups.emplace_back(*epoch, e.name);
  }
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  RecoveryResult result;
  for (const auto& [epoch, name] : groups) {
    const std::string path = join_path(root, name);
    ValidationReport report = validate_group(fs, path);
    if (report.valid) {
      const std::string pointer = name + "\n";
      write_atomic(fs, join_path(root, std::string(kLatestOkFile)),
                   std::span(reinterpret_cast<const std::uint8_t*>(pointer.data()), pointer.size()), true);
      result.group_path = path;
      result.group_name = name;
      return result;
    }
    std::string target = path + std::string(kQuarantineSuffix);
    for (int n = 1; fs.exists(target); ++n) target = path + std::string(kQuarantineSuffix) + "." + std::to_string(n);
    fs.rename_replace(path, target);
    result.quarantined.push_back(target);
    result.rejected.push_back(std::move(report));
  }
  throw NoValidCheckpoint(root);
}

std::size_t sweep_orphans(FsBackend& fs, const std::string& root, std::uint64_t min_age_ns) {
  const std::uint64_t now = fs.now_unix_ns();
  std::size_t removed = 0;
  auto sweep_dir = [&](const std::string& dir) {
    for (const auto& e : fs.list(dir)) {
      if (e.is_directory || !is_temp_name(e.name)) continue;
      const std::string path = join_path(dir, e.name);
      const std::uint64_t mtime = fs.mtime_ns(path);
      if (now >= mtime && now - mtime < min_age_ns) continue;
      if (now < mtime && min_age_ns > 0) continue;
      fs.remove(path);
      ++removed;
    }
  };
  sweep_dir(root);
  for (const auto& e : fs.list(root)) {
    if (e.is_directory) sweep_dir(join_path(root, e.name));
  }
  return removed;
}

}  // namespace ckpt
