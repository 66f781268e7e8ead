#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "forkstore/bytes.hpp"
#include "forkstore/chunk.hpp"
#include "forkstore/chunk_store.hpp"

namespace forkstore {

/// Content kinds backed by a POS-Tree.
enum class TreeKind : std::uint8_t { Blob, List, Set, Map };

inline std::string_view tree_kind_name(TreeKind k) {
  switch (k) {
    case TreeKind::Blob: return "Blob";
    case TreeKind::List: return "List";
    case TreeKind::Set: return "Set";
    case TreeKind::Map: return "Map";
  }
  return "?";
}

inline bool is_sorted_kind(TreeKind k) { return k == TreeKind::Set || k == TreeKind::Map; }

inline ChunkType leaf_chunk_type(TreeKind k) {
  switch (k) {
    case TreeKind::Blob: return ChunkType::Blob;
    case TreeKind::List: return ChunkType::List;
    case TreeKind::Set: return ChunkType::Set;
    case TreeKind::Map: return ChunkType::Map;
  }
  return ChunkType::Blob;
}

inline ChunkType index_chunk_type(TreeKind k) { return is_sorted_kind(k) ? ChunkType::SIndex : ChunkType::UIndex; }

inline bool is_index_type(ChunkType t) { return t == ChunkType::UIndex || t == ChunkType::SIndex; }

// ---- element encodings ----------------------------------------------------
//
// Blob:  one raw byte per element.
// List:  u32 length, bytes.
// Set:   u32 length, key bytes.
// Map:   u32 key length, key, u32 value length, value.

inline Bytes encode_list_element(ByteView v) {
  ByteWriter w;
  w.blob(v);
  return std::move(w).take();
}

inline Bytes encode_set_element(ByteView key) { return encode_list_element(key); }

inline Bytes encode_map_element(ByteView key, ByteView value) {
  ByteWriter w;
  w.blob(key);
  w.blob(value);
  return std::move(w).take();
}

struct MapEntryView {
  ByteView key;
  ByteView value;
};

inline MapEntryView decode_map_element(ByteView e) {
  ByteReader r(e);
  MapEntryView out;
  out.key = r.blob();
  out.value = r.blob();
  return out;
}

inline ByteView decode_list_element(ByteView e) {
  ByteReader r(e);
  return r.blob();
}

/// Ordering key of an encoded leaf element of a sorted kind.
inline ByteView element_key(TreeKind kind, ByteView e) {
  if (kind == TreeKind::Map) return decode_map_element(e).key;
  return decode_list_element(e);
}

// ---- index entries ----------------------------------------------------------
//
// UIndex entry: child cid (32), element count u64.
// SIndex entry: child cid (32), element count u64, u32 key length, largest key.

struct IndexEntry {
  Cid child;
  std::uint64_t count = 0;
  Bytes split_key;  // SIndex only
};

inline Bytes encode_index_entry(const IndexEntry& e, bool sorted) {
  ByteWriter w;
  w.raw(e.child.view());
  w.u64(e.count);
  if (sorted) w.blob(e.split_key);
  return std::move(w).take();
}

/// A decoded tree node. Element views point into `payload`.
class Node {
 public:
  Node(const Cid& cid, Chunk chunk) : cid_(cid), type_(chunk.type), payload_(std::move(chunk.payload)) { parse(); }

  const Cid& cid() const { return cid_; }
  ChunkType type() const { return type_; }
  bool is_leaf() const { return !is_index_type(type_); }
  const Bytes& payload() const { return payload_; }

  std::size_t size() const { return type_ == ChunkType::Blob ? payload_.size() : offsets_.size() - 1; }
  bool empty() const { return size() == 0; }

  ByteView element(std::size_t i) const {
    if (type_ == ChunkType::Blob) return ByteView(payload_).subspan(i, 1);
    return ByteView(payload_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
  }

  // Index accessors.
  Cid child(std::size_t i) const { return Cid::from_view(element(i).first(Cid::kSize)); }
  std::uint64_t count(std::size_t i) const {
    ByteReader r(element(i).subspan(Cid::kSize));
    return r.u64();
  }
  ByteView split_key(std::size_t i) const {
    ByteReader r(element(i).subspan(Cid::kSize + 8));
    return r.blob();
  }

  /// Number of leaf elements beneath this node.
  std::uint64_t total_count() const {
    if (is_leaf()) return size();
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += count(i);
    return n;
  }

  /// Largest key beneath this node (sorted kinds, non-empty node).
  ByteView last_key(TreeKind kind) const {
    if (is_leaf()) return element_key(kind, element(size() - 1));
    return split_key(size() - 1);
  }

  /// Entry describing this node inside its parent.
  IndexEntry entry(TreeKind kind) const {
    IndexEntry e;
    e.child = cid_;
    e.count = total_count();
    if (is_sorted_kind(kind) && !empty()) {
      ByteView k = last_key(kind);
      e.split_key.assign(k.begin(), k.end());
    }
    return e;
  }

 private:
  void parse() {
    if (type_ == ChunkType::Blob) return;
    if (type_ == ChunkType::Meta) throw Error(ErrorCode::TypeMismatch, "meta chunk is not a tree node");
    ByteReader r(payload_);
    offsets_.push_back(0);
    while (!r.done()) {
      switch (type_) {
        case ChunkType::List:
        case ChunkType::Set:
          r.blob();
          break;
        case ChunkType::Map:
          r.blob();
          r.blob();
          break;
        case ChunkType::UIndex:
          r.raw(Cid::kSize + 8);
          break;
        case ChunkType::SIndex:
          r.raw(Cid::kSize + 8);
          r.blob();
          break;
        default:
          throw Error(ErrorCode::Corrupt, "unexpected chunk type in tree");
      }
      offsets_.push_back(static_cast<std::uint32_t>(r.position()));
    }
  }

  Cid cid_;
  ChunkType type_;
  Bytes payload_;
  std::vector<std::uint32_t> offsets_;
};

using NodePtr = std::shared_ptr<const Node>;

inline NodePtr load_node(const ChunkStore& store, const Cid& cid, bool verify = false) {
  return std::make_shared<const Node>(cid, store.get(cid, verify));
}

/// Cids of the children of an index chunk; empty for leaves.
inline std::vector<Cid> index_children(const Chunk& c) {
  std::vector<Cid> out;
  if (!is_index_type(c.type)) return out;
  Node n(Cid{}, c);
  out.reserve(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(n.child(i));
  return out;
}

}  // namespace forkstore
