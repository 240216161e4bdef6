#include "ckpt/faults.hpp"

#include <algorithm>
#include <charconv>

#include "ckpt/sha256.hpp"

namespace ckpt {

namespace {

void require_nonempty(const Bytes& bytes) {
  if (bytes.empty()) throw FaultError("empty_file");
}

bool all_zero(const Bytes& bytes, std::uint64_t offset, std::uint64_t length) {
  return std::all_of(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                     bytes.begin() + static_cast<std::ptrdiff_t>(offset + length),
                     [](std::uint8_t b) { return b == 0; });
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

// Separate stream so the part choice is not correlated with the injector's draws.
constexpr std::uint64_t kTargetSalt = 0x9E3779B97F4A7C15ull;

}  // namespace

std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::Bitflip: return "bitflip";
    case FaultKind::Zerorange: return "zerorange";
    case FaultKind::Truncate: return "truncate";
    case FaultKind::None: return "none";
  }
  return "unknown";
}

std::optional<FaultKind> fault_kind_from_name(std::string_view name) {
  if (name == "bitflip") return FaultKind::Bitflip;
  if (name == "zerorange") return FaultKind::Zerorange;
  if (name == "truncate") return FaultKind::Truncate;
  if (name == "none" || name == "control") return FaultKind::None;
  return std::nullopt;
}

InjectionRecord inject_bitflip(Bytes& bytes, std::uint64_t seed) {
  require_nonempty(bytes);
  HashStream stream(seed);
  const std::uint64_t offset = stream.uniform(bytes.size());
  const auto bit = static_cast<std::uint8_t>(stream.uniform(8));
  bytes[offset] ^= static_cast<std::uint8_t>(1u << bit);
  InjectionRecord r;
  r.kind = FaultKind::Bitflip;
  r.offset = offset;
  r.length = 1;
  r.bit = bit;
  r.original_length = r.new_length = bytes.size();
  r.bytes_actually_changed = true;
  return r;
}

InjectionRecord inject_zerorange(Bytes& bytes, std::uint64_t seed, bool verify_changed) {
  require_nonempty(bytes);
  HashStream stream(seed);
  const std::uint64_t len = bytes.size();
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  bool changed = false;
  for (int attempt = 0; attempt <= kZerorangeMaxRedraws; ++attempt) {
    offset = stream.uniform(len);
    length = stream.uniform_inclusive(1, std::min<std::uint64_t>(kZerorangeMaxLength, len - offset));
    changed = !all_zero(bytes, offset, length);
    if (changed || !verify_changed) break;
  }
  std::fill_n(bytes.begin() + static_cast<std::ptrdiff_t>(offset), length, std::uint8_t{0});
  InjectionRecord r;
  r.kind = FaultKind::Zerorange;
  r.offset = offset;
  r.length = length;
  r.original_length = r.new_length = len;
  r.bytes_actually_changed = changed;
  return r;
}

InjectionRecord inject_truncate(Bytes& bytes, std::uint64_t seed) {
  require_nonempty(bytes);
  HashStream stream(seed);
  const std::uint64_t new_len = stream.uniform(bytes.size());
  InjectionRecord r;
  r.kind = FaultKind::Truncate;
  r.offset = new_len;
  r.length = bytes.size() - new_len;
  r.original_length = bytes.size();
  r.new_length = new_len;
  r.bytes_actually_changed = true;
  bytes.resize(new_len);
  return r;
}

InjectionRecord inject_bytes(Bytes& bytes, FaultKind kind, std::uint64_t seed, bool verify_changed) {
  switch (kind) {
    case FaultKind::Bitflip: return inject_bitflip(bytes, seed);
    case FaultKind::Zerorange: return inject_zerorange(bytes, seed, verify_changed);
    case FaultKind::Truncate: return inject_truncate(bytes, seed);
    case FaultKind::None: break;
  }
  InjectionRecord r;
  r.original_length = r.new_length = bytes.size();
  return r;
}

InjectionRecord inject_file(FsBackend& fs, const std::string& path, FaultKind kind, std::uint64_t seed,
                            bool verify_changed) {
  std::optional<Bytes> bytes = fs.read(path);
  if (!bytes) throw IoError("inject", path, 2);
  InjectionRecord r = inject_bytes(*bytes, kind, seed, verify_changed);
  r.file = path;
  if (kind != FaultKind::None) fs.overwrite(path, *bytes);
  return r;
}

InjectionRecord inject_group(FsBackend& fs, const std::string& group_dir, const FaultSpec& spec) {
  std::string name = spec.target;
  if (name == kRandomPart) {
    std::vector<std::string> candidates;
    if (auto bytes = fs.read(join_path(group_dir, std::string(GroupLayout::kManifest)))) {
      Json j = Json::parse(bytes->begin(), bytes->end(), nullptr, false);
      if (!j.is_discarded()) {
        try {
          for (const auto& p : Manifest::from_json(j).parts) candidates.push_back(p.name);
        } catch (const ManifestError&) {
        }
      }
    }
    if (candidates.empty()) {
      candidates = {std::string(GroupLayout::kModel), std::string(GroupLayout::kOptimizer),
                    std::string(GroupLayout::kRng)};
    }
    if (spec.include_metadata) {
      candidates.emplace_back(GroupLayout::kManifest);
      candidates.emplace_back(GroupLayout::kCommit);
    }
    HashStream pick(spec.seed ^ kTargetSalt);
    name = candidates[pick.uniform(candidates.size())];
  }
  return inject_file(fs, join_path(group_dir, name), spec.kind, spec.seed, spec.verify_changed);
}

TrialPlan TrialPlan::standard() {
  TrialPlan plan;
  plan.entries = {
      {WriteMode::AtomicDirsync, std::nullopt, 400},
      {WriteMode::Unsafe, CrashPoint::AfterModel, 400},
      {WriteMode::Unsafe, CrashPoint::BeforeManifest, 10},
      {WriteMode::Unsafe, CrashPoint::ManifestPartial, 10},
      {WriteMode::Unsafe, CrashPoint::BeforeCommit, 10},
  };
  return plan;
}

TrialPlan TrialPlan::parse(std::string_view text) {
  if (text == "default") return standard();
  TrialPlan plan;
  if (text.empty()) return plan;
  for (std::string_view item : split(text, ',')) {
    const auto fields = split(item, ':');
    if (fields.size() != 3) throw std::invalid_argument("plan entry must be mode:point:count: " + std::string(item));
    PlanEntry e;
    auto mode = write_mode_from_name(fields[0]);
    if (!mode) throw std::invalid_argument("unknown mode in plan: " + std::string(fields[0]));
    e.mode = *mode;
    if (fields[1] != "none") {
      e.crash_point = crash_point_from_name(fields[1]);
      if (!e.crash_point) throw std::invalid_argument("unknown crash point in plan: " + std::string(fields[1]));
    }
    auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), e.count);
    if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size()) {
      throw std::invalid_argument("bad count in plan: " + std::string(fields[2]));
    }
    plan.entries.push_back(e);
  }
  return plan;
}

std::vector<CrashTrial> crash_point_schedule(const TrialPlan& plan) {
  std::vector<CrashTrial> out;
  std::uint64_t index = 0;
  for (const auto& e : plan.entries) {
    if (e.count == 0) throw std::invalid_argument("crash_point_schedule: counts must be positive");
    for (std::size_t i = 0; i < e.count; ++i) out.push_back(CrashTrial{e.mode, e.crash_point, i, plan.base_seed + index++});
  }
  return out;
}

}  // namespace ckpt
