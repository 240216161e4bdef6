#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ckpt {

using Bytes = std::vector<std::uint8_t>;

enum class Dtype : std::uint8_t { F32 = 1, F64 = 2 };

std::string_view canonical_name(Dtype dtype);
std::size_t elem_size(Dtype dtype);
std::optional<Dtype> dtype_from_code(std::uint8_t code);
std::optional<Dtype> dtype_from_name(std::string_view name);

inline constexpr std::size_t kMaxDims = 8;

// A dense row-major tensor as stored in one checkpoint part.
struct TensorBlob {
  Dtype dtype = Dtype::F32;
  std::vector<std::uint64_t> shape;
  Bytes payload;

  std::uint64_t element_count() const;
  // payload length matches shape and shape rank is within the container limit.
  bool well_formed() const;

  friend bool operator==(const TensorBlob&, const TensorBlob&) = default;
};

// 64-char lowercase hex SHA-256.
class ContentDigest {
 public:
  explicit ContentDigest(std::string hex);
  const std::string& hex() const { return hex_; }
  friend bool operator==(const ContentDigest&, const ContentDigest&) = default;

 private:
  std::string hex_;
};

enum class LoadErrorCode { BadMagic, BadVersion, BadDtype, Truncated, LengthMismatch, TrailingBytes };

std::string_view to_string(LoadErrorCode code);

struct LoadError {
  LoadErrorCode code;
  std::string detail;
};

using DecodeResult = std::variant<TensorBlob, LoadError>;

class PayloadError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// CKT1 layout: "CKT1" | u8 version=1 | u8 dtype | u8 ndim | ndim x u64le dims | u64le len | payload
inline constexpr std::uint8_t kContainerVersion = 1;
inline constexpr std::size_t kContainerFixedHeader = 4 + 1 + 1 + 1 + 8;

Bytes encode_container(const TensorBlob& blob);
DecodeResult decode_container(std::span<const std::uint8_t> bytes);

ContentDigest tensor_digest(const TensorBlob& blob);
bool has_non_finite(const TensorBlob& blob);

// Throws PayloadError(size_not_aligned) when byte_size is not a multiple of the element size.
TensorBlob generate_synthetic(std::uint64_t seed, std::size_t byte_size, Dtype dtype);

}  // namespace ckpt
