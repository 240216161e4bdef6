#include "ckpt/sha256.hpp"

#include <openssl/evp.h>

#include <limits>
#include <stdexcept>

namespace ckpt {

struct Sha256::Impl {
  EVP_MD_CTX* ctx = nullptr;
  ~Impl() { EVP_MD_CTX_free(ctx); }
};

Sha256::Sha256() : impl_(std::make_unique<Impl>()) {
  impl_->ctx = EVP_MD_CTX_new();
  if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: EVP init failed");
  }
}

Sha256::~Sha256() = default;
Sha256::Sha256(Sha256&&) noexcept = default;
Sha256& Sha256::operator=(Sha256&&) noexcept = default;

Sha256& Sha256::update(std::span<const std::uint8_t> bytes) {
  if (!bytes.empty() && EVP_DigestUpdate(impl_->ctx, bytes.data(), bytes.size()) != 1) {
    throw std::runtime_error("sha256: update failed");
  }
  return *this;
}

Sha256& Sha256::update(std::string_view text) {
  return update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Sha256Digest Sha256::finish() {
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(impl_->ctx, out.data(), &len) != 1 || len != out.size()) {
    throw std::runtime_error("sha256: final failed");
  }
  EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr);
  return out;
}

Sha256Digest sha256(std::span<const std::uint8_t> bytes) { return Sha256().update(bytes).finish(); }

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) { return to_hex(sha256(bytes)); }

std::string sha256_hex(std::string_view text) {
  return to_hex(Sha256().update(text).finish());
}

bool is_sha256_hex(std::string_view text) {
  if (text.size() != 64) return false;
  for (char c : text) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

void put_u64_be(std::uint64_t value, std::uint8_t* out) {
  for (int i = 7; i >= 0; --i) {
    out[i] = static_cast<std::uint8_t>(value & 0xFF);
    value >>= 8;
  }
}

Sha256Digest HashStream::block(std::uint64_t seed, std::uint64_t index) {
  std::array<std::uint8_t, 16> input{};
  put_u64_be(seed, input.data());
  put_u64_be(index, input.data() + 8);
  return sha256(input);
}

std::uint8_t HashStream::next_byte() {
  if (pos_ == current_.size()) {
    current_ = block(seed_, counter_++);
    pos_ = 0;
  }
  return current_[pos_++];
}

std::uint64_t HashStream::next_u64() {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | next_byte();
  return v;
}

std::uint64_t HashStream::uniform(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("HashStream::uniform: bound must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % bound + 1) % bound;
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v <= limit) return v % bound;
  }
}

std::uint64_t HashStream::uniform_inclusive(std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw std::invalid_argument("HashStream::uniform_inclusive: empty range");
  if (lo == 0 && hi == std::numeric_limits<std::uint64_t>::max()) return next_u64();
  return lo + uniform(hi - lo + 1);
}

}  // namespace ckpt
