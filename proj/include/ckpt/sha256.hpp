#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace ckpt {

using Sha256Digest = std::array<std::uint8_t, 32>;

// Incremental SHA-256 (OpenSSL EVP underneath).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  Sha256(Sha256&&) noexcept;
  Sha256& operator=(Sha256&&) noexcept;

  Sha256& update(std::span<const std::uint8_t> bytes);
  Sha256& update(std::string_view text);
  Sha256Digest finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Sha256Digest sha256(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes);

// True iff `text` is 64 lowercase hex characters.
bool is_sha256_hex(std::string_view text);

void put_u64_be(std::uint64_t value, std::uint8_t* out);

// Deterministic byte stream: block i = SHA-256(seed_be8 || i_be8).
class HashStream {
 public:
  explicit HashStream(std::uint64_t seed) : seed_(seed) {}

  std::uint8_t next_byte();
  std::uint64_t next_u64();
  // Uniform draw in [0, bound); bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
  // Uniform draw in [lo, hi], inclusive.
  std::uint64_t uniform_inclusive(std::uint64_t lo, std::uint64_t hi);

  static Sha256Digest block(std::uint64_t seed, std::uint64_t index);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  Sha256Digest current_{};
  std::size_t pos_ = current_.size();
};

}  // namespace ckpt
