#include "ckpt/payload.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "ckpt/sha256.hpp"

namespace ckpt {

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'K', 'T', '1'};

std::uint64_t get_u64_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

template <typename U>
U load_le(const std::uint8_t* p) {
  U v = 0;
  for (int i = static_cast<int>(sizeof(U)) - 1; i >= 0; --i) v = static_cast<U>((v << 8) | p[i]);
  return v;
}

template <typename U>
void store_le(std::uint8_t* p, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    p[i] = static_cast<std::uint8_t>(v & 0xFF);
    v = static_cast<U>(v >> 8);
  }
}

LoadError fail(LoadErrorCode code, std::string detail) { return LoadError{code, std::move(detail)}; }

}  // namespace

std::string_view canonical_name(Dtype dtype) {
  switch (dtype) {
    case Dtype::F32: return "float32";
    case Dtype::F64: return "float64";
  }
  return "unknown";
}

std::size_t elem_size(Dtype dtype) { return dtype == Dtype::F64 ? 8 : 4; }

std::optional<Dtype> dtype_from_code(std::uint8_t code) {
  if (code == 1) return Dtype::F32;
  if (code == 2) return Dtype::F64;
  return std::nullopt;
}

std::optional<Dtype> dtype_from_name(std::string_view name) {
  if (name == "float32" || name == "f32") return Dtype::F32;
  if (name == "float64" || name == "f64") return Dtype::F64;
  return std::nullopt;
}

std::uint64_t TensorBlob::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) n *= d;
  return n;
}

bool TensorBlob::well_formed() const {
  if (shape.size() > kMaxDims) return false;
  // Guard against dims whose product overflows 64 bits.
  unsigned __int128 n = 1;
  for (std::uint64_t d : shape) {
    n *= d;
    if (n > (static_cast<unsigned __int128>(1) << 64)) return false;
  }
  return n * elem_size(dtype) == payload.size();
}

ContentDigest::ContentDigest(std::string hex) : hex_(std::move(hex)) {
  if (!is_sha256_hex(hex_)) throw PayloadError("ContentDigest: not a 64-char lowercase hex string");
}

std::string_view to_string(LoadErrorCode code) {
  switch (code) {
    case LoadErrorCode::BadMagic: return "bad_magic";
    case LoadErrorCode::BadVersion: return "bad_version";
    case LoadErrorCode::BadDtype: return "bad_dtype";
    case LoadErrorCode::Truncated: return "truncated";
    case LoadErrorCode::LengthMismatch: return "length_mismatch";
    case LoadErrorCode::TrailingBytes: return "trailing_bytes";
  }
  return "unknown";
}

Bytes encode_container(const TensorBlob& blob) {
  if (!blob.well_formed()) throw PayloadError("encode_container: blob invariants violated");
  const std::size_t header = kContainerFixedHeader + 8 * blob.shape.size();
  Bytes out(header + blob.payload.size());
  std::uint8_t* p = out.data();
  std::memcpy(p, kMagic, 4);
  p[4] = kContainerVersion;
  p[5] = static_cast<std::uint8_t>(blob.dtype);
  p[6] = static_cast<std::uint8_t>(blob.shape.size());
  p += 7;
  for (std::uint64_t d : blob.shape) {
    store_le<std::uint64_t>(p, d);
    p += 8;
  }
  store_le<std::uint64_t>(p, blob.payload.size());
  if (!blob.payload.empty()) std::memcpy(out.data() + header, blob.payload.data(), blob.payload.size());
  return out;
}

DecodeResult decode_container(std::span<const std::uint8_t> bytes) {
  const std::size_t n = bytes.size();
  if (n == 0) return fail(LoadErrorCode::Truncated, "empty file");
  if (n < 4) {
    // A prefix of the magic is a torn file; anything else is garbage.
    if (std::memcmp(bytes.data(), kMagic, n) == 0) return fail(LoadErrorCode::Truncated, "shorter than magic");
    return fail(LoadErrorCode::BadMagic, "bad magic");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) return fail(LoadErrorCode::BadMagic, "bad magic");
  if (n < 5) return fail(LoadErrorCode::Truncated, "missing version");
  if (bytes[4] != kContainerVersion) return fail(LoadErrorCode::BadVersion, "unsupported version");
  if (n < 6) return fail(LoadErrorCode::Truncated, "missing dtype");
  auto dtype = dtype_from_code(bytes[5]);
  if (!dtype) return fail(LoadErrorCode::BadDtype, "unknown dtype code");
  if (n < 7) return fail(LoadErrorCode::Truncated, "missing ndim");
  const std::size_t ndim = bytes[6];
  if (ndim > kMaxDims) return fail(LoadErrorCode::LengthMismatch, "ndim exceeds limit");
  const std::size_t header = 7 + 8 * ndim + 8;
  if (n < header) return fail(LoadErrorCode::Truncated, "header truncated");

  TensorBlob blob;
  blob.dtype = *dtype;
  blob.shape.reserve(ndim);
  for (std::size_t i = 0; i < ndim; ++i) blob.shape.push_back(get_u64_le(bytes.data() + 7 + 8 * i));
  const std::uint64_t declared = get_u64_le(bytes.data() + 7 + 8 * ndim);

  unsigned __int128 expected = elem_size(blob.dtype);
  for (std::uint64_t d : blob.shape) {
    expected *= d;
    if (expected > (static_cast<unsigned __int128>(1) << 64)) {
      return fail(LoadErrorCode::LengthMismatch, "dims overflow");
    }
  }
  if (expected != declared) return fail(LoadErrorCode::LengthMismatch, "dims disagree with payload length");

  const std::size_t available = n - header;
  if (available < declared) return fail(LoadErrorCode::Truncated, "payload shorter than declared");
  if (available > declared) return fail(LoadErrorCode::TrailingBytes, "bytes after payload");

  blob.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return blob;
}

ContentDigest tensor_digest(const TensorBlob& blob) {
  std::string prefix(canonical_name(blob.dtype));
  prefix.push_back(';');
  for (std::size_t i = 0; i < blob.shape.size(); ++i) {
    if (i) prefix.push_back(',');
    prefix += std::to_string(blob.shape[i]);
  }
  prefix.push_back(';');
  Sha256 h;
  h.update(prefix).update(blob.payload);
  return ContentDigest(to_hex(h.finish()));
}

bool has_non_finite(const TensorBlob& blob) {
  const std::uint8_t* p = blob.payload.data();
  const std::size_t n = blob.payload.size();
  if (blob.dtype == Dtype::F32) {
    for (std::size_t i = 0; i + 4 <= n; i += 4) {
      if (!std::isfinite(std::bit_cast<float>(load_le<std::uint32_t>(p + i)))) return true;
    }
  } else {
    for (std::size_t i = 0; i + 8 <= n; i += 8) {
      if (!std::isfinite(std::bit_cast<double>(load_le<std::uint64_t>(p + i)))) return true;
    }
  }
  return false;
}

TensorBlob generate_synthetic(std::uint64_t seed, std::size_t byte_size, Dtype dtype) {
  const std::size_t es = elem_size(dtype);
  if (byte_size % es != 0) throw PayloadError("size_not_aligned");

  TensorBlob blob;
  blob.dtype = dtype;
  blob.shape = {byte_size / es};
  blob.payload.resize(byte_size);
  for (std::size_t off = 0, block = 0; off < byte_size; ++block) {
    const Sha256Digest d = HashStream::block(seed, block);
    const std::size_t take = std::min<std::size_t>(d.size(), byte_size - off);
    std::memcpy(blob.payload.data() + off, d.data(), take);
    off += take;
  }

  // Clear the top exponent bit of any Inf/NaN pattern.
  std::uint8_t* p = blob.payload.data();
  if (dtype == Dtype::F32) {
    constexpr std::uint32_t kExp = 0x7F800000u;
    for (std::size_t i = 0; i < byte_size; i += 4) {
      std::uint32_t u = load_le<std::uint32_t>(p + i);
      if ((u & kExp) == kExp) store_le<std::uint32_t>(p + i, u & ~(1u << 30));
    }
  } else {
    constexpr std::uint64_t kExp = 0x7FF0000000000000ull;
    for (std::size_t i = 0; i < byte_size; i += 8) {
      std::uint64_t u = load_le<std::uint64_t>(p + i);
      if ((u & kExp) == kExp) store_le<std::uint64_t>(p + i, u & ~(1ull << 62));
    }
  }
  return blob;
}

}  // namespace ckpt
