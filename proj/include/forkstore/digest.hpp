#pragma once

#include <openssl/evp.h>

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "forkstore/bytes.hpp"
#include "forkstore/error.hpp"

namespace forkstore {

// Identifier of the digest that names every chunk in a store. Recorded in the
// store manifest; a store never mixes algorithms.
enum class DigestAlgorithm : std::uint8_t {
  Sha256 = 1,
  Blake2s256 = 2,
};

inline std::string_view digest_name(DigestAlgorithm a) {
  switch (a) {
    case DigestAlgorithm::Sha256: return "sha256";
    case DigestAlgorithm::Blake2s256: return "blake2s256";
  }
  return "unknown";
}

inline DigestAlgorithm parse_digest(std::string_view name) {
  if (name == "sha256") return DigestAlgorithm::Sha256;
  if (name == "blake2s256") return DigestAlgorithm::Blake2s256;
  throw Error(ErrorCode::InvalidArgument, "unknown digest algorithm: " + std::string(name));
}

inline DigestAlgorithm digest_from_id(std::uint8_t id) {
  if (id == 1) return DigestAlgorithm::Sha256;
  if (id == 2) return DigestAlgorithm::Blake2s256;
  throw Error(ErrorCode::Corrupt, "unknown digest algorithm id " + std::to_string(id));
}

/// A 32-byte content identifier. Chunk ids (cids) and version ids (uids) share
/// this representation; a uid is the cid of a Meta chunk.
class Cid {
 public:
  static constexpr std::size_t kSize = 32;

  Cid() { bytes_.fill(0); }
  explicit Cid(const std::array<std::uint8_t, kSize>& b) : bytes_(b) {}

  static Cid from_view(ByteView b) {
    if (b.size() != kSize) throw Error(ErrorCode::Corrupt, "cid must be 32 bytes");
    Cid c;
    std::copy(b.begin(), b.end(), c.bytes_.begin());
    return c;
  }

  static Cid from_hex(std::string_view hex) {
    if (hex.size() != 2 * kSize) throw Error(ErrorCode::InvalidArgument, "uid must be 64 hex digits");
    return from_view(forkstore::from_hex(hex));
  }

  const std::array<std::uint8_t, kSize>& bytes() const { return bytes_; }
  ByteView view() const { return {bytes_.data(), bytes_.size()}; }
  std::string hex() const { return to_hex(view()); }
  std::string short_hex() const { return hex().substr(0, 12); }

  // Trailing eight bytes read big-endian: the "low" end of the digest.
  std::uint64_t low64() const {
    std::uint64_t v = 0;
    for (std::size_t i = kSize - 8; i < kSize; ++i) v = (v << 8) | bytes_[i];
    return v;
  }

  // Leading eight bytes read big-endian.
  std::uint64_t high64() const {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | bytes_[i];
    return v;
  }

  auto operator<=>(const Cid&) const = default;
  bool operator==(const Cid&) const = default;

 private:
  std::array<std::uint8_t, kSize> bytes_;
};

using Uid = Cid;

struct CidHash {
  std::size_t operator()(const Cid& c) const noexcept {
    return static_cast<std::size_t>(c.high64());
  }
};

namespace detail {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

inline const EVP_MD* evp_for(DigestAlgorithm a) {
  switch (a) {
    case DigestAlgorithm::Sha256: return EVP_sha256();
    case DigestAlgorithm::Blake2s256: return EVP_blake2s256();
  }
  throw Error(ErrorCode::InvalidArgument, "unsupported digest");
}

}  // namespace detail

/// Incremental digest over a byte stream.
class Hasher {
 public:
  explicit Hasher(DigestAlgorithm algo = DigestAlgorithm::Sha256) : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), detail::evp_for(algo), nullptr) != 1)
      throw Error(ErrorCode::Io, "digest initialisation failed");
  }

  Hasher& update(ByteView b) {
    if (!b.empty()) EVP_DigestUpdate(ctx_.get(), b.data(), b.size());
    return *this;
  }

  Cid finish() {
    std::array<std::uint8_t, EVP_MAX_MD_SIZE> out{};
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx_.get(), out.data(), &n);
    if (n != Cid::kSize) throw Error(ErrorCode::Io, "unexpected digest length");
    std::array<std::uint8_t, Cid::kSize> d{};
    std::copy_n(out.begin(), Cid::kSize, d.begin());
    return Cid(d);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, detail::MdCtxDeleter> ctx_;
};

inline Cid digest_of(ByteView b, DigestAlgorithm algo = DigestAlgorithm::Sha256) {
  return Hasher(algo).update(b).finish();
}

}  // namespace forkstore

template <>
struct std::hash<forkstore::Cid> {
  std::size_t operator()(const forkstore::Cid& c) const noexcept { return forkstore::CidHash{}(c); }
};
