#pragma once

#include <cstdint>
#include <string_view>

#include "forkstore/bytes.hpp"
#include "forkstore/digest.hpp"
#include "forkstore/error.hpp"

namespace forkstore {

// On-disk tag values. Never renumber.
enum class ChunkType : std::uint8_t {
  Meta = 0,
  UIndex = 1,
  SIndex = 2,
  Blob = 3,
  List = 4,
  Set = 5,
  Map = 6,
};

inline constexpr std::size_t kChunkTypeCount = 7;

inline bool valid_chunk_type(std::uint8_t tag) { return tag < kChunkTypeCount; }

inline std::string_view chunk_type_name(ChunkType t) {
  switch (t) {
    case ChunkType::Meta: return "Meta";
    case ChunkType::UIndex: return "UIndex";
    case ChunkType::SIndex: return "SIndex";
    case ChunkType::Blob: return "Blob";
    case ChunkType::List: return "List";
    case ChunkType::Set: return "Set";
    case ChunkType::Map: return "Map";
  }
  return "?";
}

inline constexpr std::uint8_t kChunkFormatVersion = 0x01;
inline constexpr std::size_t kChunkHeaderSize = 6;
inline constexpr std::uint64_t kMaxChunkPayload = 0xFFFFFFFFull;

/// Immutable unit of storage: a type tag plus an opaque payload.
struct Chunk {
  ChunkType type = ChunkType::Blob;
  Bytes payload;

  bool operator==(const Chunk&) const = default;
};

/// Canonical encoding: version byte, type tag, payload length (u32 LE), payload.
inline Bytes serialize_chunk(ChunkType type, ByteView payload) {
  if (payload.size() > kMaxChunkPayload)
    throw Error(ErrorCode::InvalidArgument, "chunk payload exceeds 2^32-1 bytes");
  Bytes out;
  out.reserve(kChunkHeaderSize + payload.size());
  out.push_back(kChunkFormatVersion);
  out.push_back(static_cast<std::uint8_t>(type));
  const auto n = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline Bytes serialize_chunk(const Chunk& c) { return serialize_chunk(c.type, c.payload); }

/// Parses one serialized chunk occupying the whole of `bytes`.
inline Chunk deserialize_chunk(ByteView bytes) {
  if (bytes.size() < kChunkHeaderSize) throw Error(ErrorCode::Corrupt, "chunk shorter than header");
  if (bytes[0] != kChunkFormatVersion) throw Error(ErrorCode::Corrupt, "unknown chunk format version");
  if (!valid_chunk_type(bytes[1])) throw Error(ErrorCode::Corrupt, "unknown chunk type tag");
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(bytes[2 + i]) << (8 * i);
  if (bytes.size() != kChunkHeaderSize + n) throw Error(ErrorCode::Corrupt, "chunk length mismatch");
  return Chunk{static_cast<ChunkType>(bytes[1]), Bytes(bytes.begin() + kChunkHeaderSize, bytes.end())};
}

inline Cid compute_cid(ChunkType type, ByteView payload, DigestAlgorithm algo = DigestAlgorithm::Sha256) {
  if (payload.size() > kMaxChunkPayload)
    throw Error(ErrorCode::InvalidArgument, "chunk payload exceeds 2^32-1 bytes");
  std::uint8_t header[kChunkHeaderSize] = {kChunkFormatVersion, static_cast<std::uint8_t>(type), 0, 0, 0, 0};
  const auto n = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) header[2 + i] = static_cast<std::uint8_t>(n >> (8 * i));
  return Hasher(algo).update(ByteView(header, kChunkHeaderSize)).update(payload).finish();
}

inline Cid compute_cid(const Chunk& c, DigestAlgorithm algo = DigestAlgorithm::Sha256) {
  return compute_cid(c.type, c.payload, algo);
}

}  // namespace forkstore
