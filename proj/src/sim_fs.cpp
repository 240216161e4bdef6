#include "ckpt/sim_fs.hpp"

#include <cerrno>
#include <filesystem>

#include "ckpt/sha256.hpp"

namespace ckpt {

namespace {

constexpr std::uint64_t kClockOrigin = 1'700'000'000'000'000'000ull;
constexpr std::uint64_t kClockTick = 1'000;

bool is_root(const std::string& p) { return p.empty() || p == "." || p == "/"; }

// True iff `path` lies strictly below `dir`.
bool is_under(const std::string& path, const std::string& dir) {
  if (is_root(dir)) return !is_root(path);
  return path.size() > dir.size() && path.compare(0, dir.size(), dir) == 0 && path[dir.size()] == '/';
}

std::string parent_of(const std::string& p) {
  const auto pos = p.find_last_of('/');
  if (pos == std::string::npos) return ".";
  if (pos == 0) return "/";
  return p.substr(0, pos);
}

class NoopLock final : public DirLock {};

}  // namespace

SimFs::SimFs(std::uint64_t seed) : clock_ns_(kClockOrigin), suffix_seed_(seed) {}

std::string SimFs::norm(const std::string& path) {
  std::string p = std::filesystem::path(path).lexically_normal().generic_string();
  while (p.size() > 1 && p.back() == '/') p.pop_back();
  return p;
}

void SimFs::step(std::string_view op, const std::string& path) {
  if (crash_step_ && steps_ == *crash_step_) {
    crash_step_.reset();
    crash_now();
  }
  ++steps_;
  record(op, path);
}

SimFs::Handle& SimFs::handle(FileId file) {
  auto it = handles_.find(file);
  if (it == handles_.end()) throw IoError("use of closed handle", "<fd>", EBADF);
  return it->second;
}

void SimFs::require_parent(const std::string& path, std::string_view op) const {
  const std::string parent = parent_of(path);
  if (!is_root(parent) && !dirs_.contains(parent)) throw IoError(std::string(op), path, ENOENT);
}

FileId SimFs::create(const std::string& raw) {
  const std::string path = norm(raw);
  step("create", path);
  require_parent(path, "open");
  if (dirs_.contains(path)) throw IoError("open", path, EISDIR);
  std::uint64_t ino;
  if (auto it = names_.find(path); it != names_.end()) {
    ino = it->second;
    inodes_[ino].cache.clear();
  } else {
    ino = next_inode_++;
    inodes_[ino] = Inode{};
    names_[path] = ino;
  }
  inodes_[ino].mtime_ns = now_unix_ns();
  const FileId id = next_handle_++;
  handles_.emplace(id, Handle{ino, path});
  return id;
}

void SimFs::write(FileId file, std::span<const std::uint8_t> bytes) {
  Handle& h = handle(file);
  step("write", h.path);
  Inode& node = inodes_[h.inode];
  h.buffer.append(bytes, [&](std::span<const std::uint8_t> chunk) {
    node.cache.insert(node.cache.end(), chunk.begin(), chunk.end());
    node.mtime_ns = now_unix_ns();
  });
}

void SimFs::flush(FileId file) {
  Handle& h = handle(file);
  step("flush", h.path);
  Inode& node = inodes_[h.inode];
  h.buffer.drain([&](std::span<const std::uint8_t> chunk) {
    node.cache.insert(node.cache.end(), chunk.begin(), chunk.end());
    node.mtime_ns = now_unix_ns();
  });
}

void SimFs::sync(FileId file) {
  Handle& h = handle(file);
  step("sync", h.path);
  Inode& node = inodes_[h.inode];
  node.device = node.cache;
}

void SimFs::close(FileId file) {
  Handle& h = handle(file);
  step("close", h.path);
  Inode& node = inodes_[h.inode];
  h.buffer.drain([&](std::span<const std::uint8_t> chunk) {
    node.cache.insert(node.cache.end(), chunk.begin(), chunk.end());
    node.mtime_ns = now_unix_ns();
  });
  handles_.erase(file);
}

void SimFs::rename_replace(const std::string& raw_from, const std::string& raw_to) {
  const std::string from = norm(raw_from);
  const std::string to = norm(raw_to);
  step("rename", to);
  require_parent(to, "rename");
  if (from == to) return;

  if (dirs_.contains(from)) {
    if (names_.contains(to)) throw IoError("rename", to, ENOTDIR);
    if (dirs_.contains(to)) {
      for (const auto& [p, ino] : names_) {
        if (is_under(p, to)) throw IoError("rename", to, ENOTEMPTY);
      }
      for (const auto& d : dirs_) {
        if (is_under(d, to)) throw IoError("rename", to, ENOTEMPTY);
      }
    }
    auto move_prefix = [&](auto& table) {
      std::vector<std::pair<std::string, std::uint64_t>> moved;
      for (auto it = table.begin(); it != table.end();) {
        if (is_under(it->first, from)) {
          moved.emplace_back(to + it->first.substr(from.size()), it->second);
          it = table.erase(it);
        } else {
          ++it;
        }
      }
      for (auto& m : moved) table[m.first] = m.second;
    };
    move_prefix(names_);
    move_prefix(durable_names_);
    std::vector<std::string> moved_dirs;
    for (auto it = dirs_.begin(); it != dirs_.end();) {
      if (*it == from || is_under(*it, from)) {
        moved_dirs.push_back(to + it->substr(from.size()));
        it = dirs_.erase(it);
      } else {
        ++it;
      }
    }
    dirs_.insert(moved_dirs.begin(), moved_dirs.end());
    return;
  }

  auto it = names_.find(from);
  if (it == names_.end()) throw IoError("rename", from, ENOENT);
  if (dirs_.contains(to)) throw IoError("rename", to, EISDIR);
  names_[to] = it->second;
  names_.erase(from);
}

void SimFs::sync_dir(const std::string& raw) {
  const std::string dir = norm(raw);
  step("sync_dir", dir);
  if (!is_root(dir) && !dirs_.contains(dir)) throw IoError("open dir", dir, ENOENT);
  for (auto it = durable_names_.begin(); it != durable_names_.end();) {
    if (parent_of(it->first) == dir && !names_.contains(it->first)) {
      it = durable_names_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [p, ino] : names_) {
    if (parent_of(p) == dir) durable_names_[p] = ino;
  }
}

std::optional<Bytes> SimFs::read(const std::string& raw) const {
  auto it = names_.find(norm(raw));
  if (it == names_.end()) return std::nullopt;
  return inodes_.at(it->second).cache;
}

std::vector<DirEntry> SimFs::list(const std::string& raw) const {
  const std::string dir = norm(raw);
  std::vector<DirEntry> out;
  for (const auto& d : dirs_) {
    if (parent_of(d) == dir && d != dir) out.push_back(DirEntry{d.substr(d.find_last_of('/') + 1), true});
  }
  for (const auto& [p, ino] : names_) {
    if (parent_of(p) == dir) {
      const auto pos = p.find_last_of('/');
      out.push_back(DirEntry{pos == std::string::npos ? p : p.substr(pos + 1), false});
    }
  }
  std::sort(out.begin(), out.end(), [](const DirEntry& a, const DirEntry& b) { return a.name < b.name; });
  return out;
}

bool SimFs::exists(const std::string& raw) const {
  const std::string p = norm(raw);
  return is_root(p) || names_.contains(p) || dirs_.contains(p);
}

bool SimFs::is_directory(const std::string& raw) const {
  const std::string p = norm(raw);
  return is_root(p) || dirs_.contains(p);
}

std::uint64_t SimFs::mtime_ns(const std::string& raw) const {
  auto it = names_.find(norm(raw));
  if (it == names_.end()) throw IoError("stat", raw, ENOENT);
  return inodes_.at(it->second).mtime_ns;
}

void SimFs::remove(const std::string& raw) {
  const std::string p = norm(raw);
  step("remove", p);
  if (names_.erase(p) > 0) return;
  if (!dirs_.contains(p)) return;
  std::erase_if(names_, [&](const auto& kv) { return is_under(kv.first, p); });
  std::erase_if(dirs_, [&](const std::string& d) { return d == p || is_under(d, p); });
}

void SimFs::make_dirs(const std::string& raw) {
  const std::string p = norm(raw);
  step("mkdir", p);
  for (std::string cur = p; !is_root(cur); cur = parent_of(cur)) {
    if (names_.contains(cur)) throw IoError("mkdir", cur, EEXIST);
    dirs_.insert(cur);
  }
}

void SimFs::overwrite(const std::string& raw, std::span<const std::uint8_t> bytes) {
  const std::string p = norm(raw);
  step("overwrite", p);
  auto it = names_.find(p);
  if (it == names_.end()) throw IoError("open", p, ENOENT);
  Inode& node = inodes_[it->second];
  node.cache.assign(bytes.begin(), bytes.end());
  node.device = node.cache;
  node.mtime_ns = now_unix_ns();
}

void SimFs::apply_crash(CrashKind kind) {
  handles_.clear();
  if (kind == CrashKind::PowerLoss) {
    names_ = durable_names_;
    for (auto& [ino, node] : inodes_) node.cache = node.device;
  }
}

void SimFs::crash_now() {
  apply_crash(CrashKind::Process);
  throw SimulatedCrash();
}

std::uint64_t SimFs::now_unix_ns() { return clock_ns_ += kClockTick; }

std::string SimFs::random_suffix() {
  const Sha256Digest d = HashStream::block(suffix_seed_, suffix_counter_++);
  return to_hex(std::span(d.data(), 4));
}

std::unique_ptr<DirLock> SimFs::lock_dir(const std::string&) { return std::make_unique<NoopLock>(); }

std::map<std::string, std::optional<Bytes>> SimFs::snapshot() const {
  std::map<std::string, std::optional<Bytes>> out;
  for (const auto& d : dirs_) out[d] = std::nullopt;
  for (const auto& [p, ino] : names_) out[p] = inodes_.at(ino).cache;
  return out;
}

std::optional<Bytes> SimFs::device_bytes(const std::string& raw) const {
  auto it = durable_names_.find(norm(raw));
  if (it == durable_names_.end()) return std::nullopt;
  return inodes_.at(it->second).device;
}

}  // namespace ckpt
