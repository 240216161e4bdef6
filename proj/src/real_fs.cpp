#include <fcntl.h>
#include <signal.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <random>

#include "ckpt/fs_backend.hpp"

namespace ckpt {

namespace fs = std::filesystem;

namespace {

std::string describe(const std::string& op, const std::string& path, int err) {
  std::string msg = op + " failed for '" + path + "'";
  if (err != 0) msg += ": " + std::string(std::strerror(err));
  return msg;
}

void write_all(int fd, std::span<const std::uint8_t> bytes, const std::string& path) {
  while (!bytes.empty()) {
    const ssize_t n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("write", path, errno);
    }
    bytes = bytes.subspan(static_cast<std::size_t>(n));
  }
}

class FlockGuard final : public DirLock {
 public:
  explicit FlockGuard(int fd) : fd_(fd) {}
  ~FlockGuard() override {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }

 private:
  int fd_;
};

}  // namespace

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::Real ? "real" : "simulated";
}

std::optional<BackendKind> backend_kind_from_name(std::string_view name) {
  if (name == "real") return BackendKind::Real;
  if (name == "sim" || name == "simulated") return BackendKind::Simulated;
  return std::nullopt;
}

IoError::IoError(const std::string& op, const std::string& path, int err)
    : std::runtime_error(describe(op, path, err)), path_(path), errno_(err) {}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return (fs::path(dir) / name).generic_string();
}

std::string parent_path(const std::string& path) {
  std::string parent = fs::path(path).parent_path().generic_string();
  return parent.empty() ? "." : parent;
}

std::string file_name(const std::string& path) { return fs::path(path).filename().generic_string(); }

struct RealFs::Handle {
  int fd;
  std::string path;
  AppBuffer buffer{kAppBufferSize};
};

RealFs::RealFs() : suffix_state_(std::random_device{}()) {}

RealFs::~RealFs() {
  for (auto& h : handles_) {
    if (h) ::close(h->fd);
  }
}

RealFs::Handle& RealFs::handle(FileId file) {
  if (file >= handles_.size() || !handles_[file]) throw IoError("use of closed handle", "<fd>", EBADF);
  return *handles_[file];
}

FileId RealFs::create(const std::string& path) {
  record("create", path);
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("open", path, errno);
  handles_.push_back(std::make_unique<Handle>(Handle{fd, path}));
  return handles_.size() - 1;
}

void RealFs::write(FileId file, std::span<const std::uint8_t> bytes) {
  Handle& h = handle(file);
  record("write", h.path);
  h.buffer.append(bytes, [&](std::span<const std::uint8_t> chunk) { write_all(h.fd, chunk, h.path); });
}

void RealFs::flush(FileId file) {
  Handle& h = handle(file);
  record("flush", h.path);
  h.buffer.drain([&](std::span<const std::uint8_t> chunk) { write_all(h.fd, chunk, h.path); });
}

void RealFs::sync(FileId file) {
  Handle& h = handle(file);
  record("sync", h.path);
  if (::fsync(h.fd) != 0) throw IoError("fsync", h.path, errno);
}

void RealFs::close(FileId file) {
  Handle& h = handle(file);
  record("close", h.path);
  std::unique_ptr<Handle> owned = std::move(handles_[file]);
  owned->buffer.drain([&](std::span<const std::uint8_t> chunk) {
    try {
      write_all(owned->fd, chunk, owned->path);
    } catch (...) {
      ::close(owned->fd);
      throw;
    }
  });
  if (::close(owned->fd) != 0) throw IoError("close", owned->path, errno);
}

void RealFs::rename_replace(const std::string& from, const std::string& to) {
  record("rename", to);
  if (::rename(from.c_str(), to.c_str()) != 0) throw IoError("rename", from, errno);
}

void RealFs::sync_dir(const std::string& dir) {
  record("sync_dir", dir);
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) throw IoError("open dir", dir, errno);
  const int rc = ::fsync(fd);
  const int err = errno;
  ::close(fd);
  if (rc != 0) throw IoError("fsync dir", dir, err);
}

std::optional<Bytes> RealFs::read(const std::string& path) const {
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) {
    if (errno == ENOENT || errno == ENOTDIR) return std::nullopt;
    throw IoError("open", path, errno);
  }
  struct stat st {};
  if (::fstat(fd, &st) != 0 || S_ISDIR(st.st_mode)) {
    ::close(fd);
    return std::nullopt;
  }
  Bytes out;
  out.reserve(static_cast<std::size_t>(st.st_size));
  std::uint8_t buf[1 << 16];
  for (;;) {
    const ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw IoError("read", path, err);
    }
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  ::close(fd);
  return out;
}

std::vector<DirEntry> RealFs::list(const std::string& dir) const {
  std::vector<DirEntry> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    out.push_back(DirEntry{entry.path().filename().string(), entry.is_directory()});
  }
  if (ec && ec != std::errc::no_such_file_or_directory) throw IoError("list", dir, ec.value());
  std::sort(out.begin(), out.end(), [](const DirEntry& a, const DirEntry& b) { return a.name < b.name; });
  return out;
}

bool RealFs::exists(const std::string& path) const {
  struct stat st {};
  return ::stat(path.c_str(), &st) == 0;
}

bool RealFs::is_directory(const std::string& path) const {
  struct stat st {};
  return ::stat(path.c_str(), &st) == 0 && S_ISDIR(st.st_mode);
}

std::uint64_t RealFs::mtime_ns(const std::string& path) const {
  struct stat st {};
  if (::stat(path.c_str(), &st) != 0) throw IoError("stat", path, errno);
  return static_cast<std::uint64_t>(st.st_mtim.tv_sec) * 1'000'000'000ull +
         static_cast<std::uint64_t>(st.st_mtim.tv_nsec);
}

void RealFs::remove(const std::string& path) {
  record("remove", path);
  std::error_code ec;
  fs::remove_all(path, ec);
  if (ec) throw IoError("remove", path, ec.value());
}

void RealFs::make_dirs(const std::string& path) {
  record("mkdir", path);
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw IoError("mkdir", path, ec.value());
}

void RealFs::overwrite(const std::string& path, std::span<const std::uint8_t> bytes) {
  record("overwrite", path);
  const int fd = ::open(path.c_str(), O_WRONLY | O_TRUNC | O_CLOEXEC);
  if (fd < 0) throw IoError("open", path, errno);
  try {
    write_all(fd, bytes, path);
  } catch (...) {
    ::close(fd);
    throw;
  }
  if (::close(fd) != 0) throw IoError("close", path, errno);
}

void RealFs::crash_now() {
  // SIGKILL cannot be caught: no stdio flush, no atexit handlers, no destructors.
  ::kill(::getpid(), SIGKILL);
  std::abort();
}

std::uint64_t RealFs::now_unix_ns() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

std::string RealFs::random_suffix() {
  // splitmix64
  std::uint64_t z = (suffix_state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(8, '0');
  for (int i = 0; i < 8; ++i) out[i] = kDigits[(z >> (4 * i)) & 0xF];
  return out;
}

std::unique_ptr<DirLock> RealFs::lock_dir(const std::string& dir) {
  const std::string path = join_path(dir, ".ckpt.lock");
  const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("open lock", path, errno);
  if (::flock(fd, LOCK_EX) != 0) {
    const int err = errno;
    ::close(fd);
    throw IoError("flock", path, err);
  }
  return std::make_unique<FlockGuard>(fd);
}

}  // namespace ckpt
