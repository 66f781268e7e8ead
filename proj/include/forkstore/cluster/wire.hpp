#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forkstore/merge.hpp"
#include "forkstore/object.hpp"

namespace forkstore::cluster {

// Frame: u32 LE length of what follows, u8 opcode, u64 LE request id, payload.
// A response echoes the request id and sets the opcode's high bit; its
// payload starts with a status byte (an ErrorCode, 0 on success).
enum class Op : std::uint8_t {
  GetBranch = 1,     // M1
  GetUid = 2,        // M2
  PutBranch = 3,     // M3
  PutUid = 4,        // M4
  MergeBranch = 5,   // M5
  MergeUid = 6,      // M6
  MergeMany = 7,     // M7
  ListKeys = 8,      // M8
  ListTagged = 9,    // M9
  ListUntagged = 10, // M10
  ForkBranch = 11,   // M11
  ForkUid = 12,      // M12
  Rename = 13,       // M13
  Remove = 14,       // M14
  TrackBranch = 15,  // M15
  TrackUid = 16,     // M16
  Lca = 17,          // M17
  GetChunk = 18,
  PutChunk = 19,
  HasChunk = 20,
  Stats = 21,
  Hello = 22,
};

inline constexpr std::uint8_t kResponseBit = 0x80;
inline constexpr std::size_t kFrameHeader = 4 + 1 + 8;
inline constexpr std::uint32_t kMaxFrame = 1u << 30;

inline bool valid_op(std::uint8_t op) { return op >= 1 && op <= static_cast<std::uint8_t>(Op::Hello); }

struct Frame {
  std::uint8_t opcode = 0;
  std::uint64_t request_id = 0;
  Bytes payload;
};

inline Bytes encode_frame(const Frame& f) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(1 + 8 + f.payload.size()));
  w.u8(f.opcode);
  w.u64(f.request_id);
  w.raw(f.payload);
  return std::move(w).take();
}

/// Decodes one whole frame (length prefix included).
inline Frame decode_frame(ByteView b) {
  ByteReader r(b);
  const std::uint32_t len = r.u32();
  if (len < 9 || len > kMaxFrame || len != r.remaining()) throw Error(ErrorCode::Corrupt, "bad frame length");
  Frame f;
  f.opcode = r.u8();
  f.request_id = r.u64();
  ByteView p = r.raw(r.remaining());
  f.payload.assign(p.begin(), p.end());
  return f;
}

// ---- field encodings --------------------------------------------------------

inline void put_uid(ByteWriter& w, const Uid& u) { w.raw(u.view()); }
inline Uid get_uid(ByteReader& r) { return Cid::from_view(r.raw(Cid::kSize)); }

inline void put_opt_uid(ByteWriter& w, const std::optional<Uid>& u) {
  w.u8(u ? 1 : 0);
  if (u) put_uid(w, *u);
}
inline std::optional<Uid> get_opt_uid(ByteReader& r) {
  if (r.u8() == 0) return std::nullopt;
  return get_uid(r);
}

inline void put_str(ByteWriter& w, const std::string& s) { w.blob(s); }
inline std::string get_str(ByteReader& r) { return to_string(r.blob()); }

inline void put_value(ByteWriter& w, const Value& v) {
  w.u8(static_cast<std::uint8_t>(v.type()));
  w.blob(v.data());
}
inline Value get_value(ByteReader& r) {
  const std::uint8_t t = r.u8();
  if (!valid_value_type(t)) throw Error(ErrorCode::Corrupt, "bad value type on the wire");
  return Value::decode(static_cast<ValueType>(t), r.blob());
}

/// Only named custom resolvers travel; an in-process hook cannot.
inline void put_resolver(ByteWriter& w, const Resolver& res) {
  if (res.kind == Resolver::Kind::Custom && res.name.empty())
    throw Error(ErrorCode::InvalidArgument, "custom resolver hooks cannot be sent to a servlet; register it by name");
  w.u8(static_cast<std::uint8_t>(res.kind));
  w.u8(res.side);
  w.blob(res.name);
}
inline Resolver get_resolver(ByteReader& r) {
  Resolver res;
  const std::uint8_t k = r.u8();
  if (k > static_cast<std::uint8_t>(Resolver::Kind::Custom)) throw Error(ErrorCode::Corrupt, "bad resolver kind");
  res.kind = static_cast<Resolver::Kind>(k);
  res.side = r.u8();
  res.name = get_str(r);
  return res;
}

// An FObject travels as its Meta payload, the same bytes its uid hashes.
inline void put_object(ByteWriter& w, const FObject& o) { w.blob(o.to_chunk().payload); }
inline FObject get_object(ByteReader& r) {
  ByteView p = r.blob();
  return FObject::from_chunk(Chunk{ChunkType::Meta, Bytes(p.begin(), p.end())});
}

inline void put_list(ByteWriter& w, const std::vector<Bytes>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& b : v) w.blob(b);
}
inline std::vector<Bytes> get_list(ByteReader& r) {
  std::vector<Bytes> v(r.u32());
  for (auto& b : v) b = r.blob_copy();
  return v;
}

inline void put_chunk(ByteWriter& w, const Chunk& c) { w.blob(serialize_chunk(c)); }
inline Chunk get_chunk(ByteReader& r) { return deserialize_chunk(r.blob()); }

inline void put_track(ByteWriter& w, const std::vector<TrackEntry>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& e : v) {
    w.u64(e.distance);
    put_uid(w, e.uid);
    put_object(w, e.object);
  }
}
inline std::vector<TrackEntry> get_track(ByteReader& r) {
  std::vector<TrackEntry> v(r.u32());
  for (auto& e : v) {
    e.distance = r.u64();
    e.uid = get_uid(r);
    e.object = get_object(r);
  }
  return v;
}

inline void put_stats(ByteWriter& w, const ChunkStoreStats& s) {
  w.u64(s.unique_chunk_count);
  w.u64(s.total_payload_bytes);
  w.u64(s.log_file_bytes);
  w.u64(s.dedup_hit_count);
  for (auto v : s.chunks_by_type) w.u64(v);
  for (auto v : s.payload_bytes_by_type) w.u64(v);
}
inline ChunkStoreStats get_stats(ByteReader& r) {
  ChunkStoreStats s;
  s.unique_chunk_count = r.u64();
  s.total_payload_bytes = r.u64();
  s.log_file_bytes = r.u64();
  s.dedup_hit_count = r.u64();
  for (auto& v : s.chunks_by_type) v = r.u64();
  for (auto& v : s.payload_bytes_by_type) v = r.u64();
  return s;
}

inline void put_conflicts(ByteWriter& w, const std::vector<Conflict>& cs) {
  w.u32(static_cast<std::uint32_t>(cs.size()));
  for (const auto& c : cs) {
    w.u8(static_cast<std::uint8_t>(c.kind));
    w.u8(static_cast<std::uint8_t>(c.value_type));
    w.blob(c.key);
    w.u64(c.begin);
    w.u64(c.end);
    put_list(w, c.base);
    put_list(w, c.side1);
    put_list(w, c.side2);
  }
}
inline std::vector<Conflict> get_conflicts(ByteReader& r) {
  std::vector<Conflict> cs(r.u32());
  for (auto& c : cs) {
    c.kind = static_cast<ConflictKind>(r.u8());
    c.value_type = static_cast<ValueType>(r.u8());
    c.key = r.blob_copy();
    c.begin = r.u64();
    c.end = r.u64();
    c.base = get_list(r);
    c.side1 = get_list(r);
    c.side2 = get_list(r);
  }
  return cs;
}

// ---- responses --------------------------------------------------------------

inline Bytes ok_payload(const Bytes& body = {}) {
  Bytes out(body.size() + 1, 0);
  std::copy(body.begin(), body.end(), out.begin() + 1);
  return out;
}

inline Bytes error_payload(const Error& e) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(e.code()));
  w.blob(std::string(e.what()));
  if (auto* m = dynamic_cast<const MergeConflictError*>(&e)) put_conflicts(w, m->conflicts());
  return std::move(w).take();
}

/// Returns the body of a successful response or rethrows the servlet's error
/// with its original class.
inline Bytes unwrap_response(const Bytes& payload) {
  ByteReader r(payload);
  const std::uint8_t status = r.u8();
  if (status == 0) {
    ByteView rest = r.raw(r.remaining());
    return Bytes(rest.begin(), rest.end());
  }
  const std::string msg = get_str(r);
  if (status == static_cast<std::uint8_t>(ErrorCode::UnresolvedConflicts) && !r.done())
    throw MergeConflictError(get_conflicts(r));
  if (status > static_cast<std::uint8_t>(ErrorCode::UnknownOpcode))
    throw Error(ErrorCode::Corrupt, "unknown status " + std::to_string(status) + ": " + msg);
  throw Error(static_cast<ErrorCode>(status), msg);
}

}  // namespace forkstore::cluster
