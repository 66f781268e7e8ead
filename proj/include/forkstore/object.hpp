#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "forkstore/chunk_store.hpp"
#include "forkstore/pos_diff.hpp"
#include "forkstore/value.hpp"

namespace forkstore {

/// A version record. Stored as one Meta chunk whose cid is the version's uid.
struct FObject {
  ValueType type = ValueType::String;
  std::string key;
  Bytes data;
  std::uint64_t depth = 0;
  std::vector<Uid> bases;
  Bytes context;

  // Meta payload: type u8, key (u32 len), data (u32 len), depth u64,
  // base count u32 + 32-byte uids, context (u32 len).
  Chunk to_chunk() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(type));
    w.blob(as_view(key));
    w.blob(data);
    w.u64(depth);
    w.u32(static_cast<std::uint32_t>(bases.size()));
    for (const auto& b : bases) w.raw(b.view());
    w.blob(context);
    return Chunk{ChunkType::Meta, std::move(w).take()};
  }

  static FObject from_chunk(const Chunk& c) {
    if (c.type != ChunkType::Meta) throw Error(ErrorCode::TypeMismatch, "not a meta chunk");
    ByteReader r(c.payload);
    FObject o;
    const std::uint8_t t = r.u8();
    if (!valid_value_type(t)) throw Error(ErrorCode::Corrupt, "unknown value type tag " + std::to_string(t));
    o.type = static_cast<ValueType>(t);
    o.key = to_string(r.blob());
    o.data = r.blob_copy();
    o.depth = r.u64();
    const std::uint32_t n = r.u32();
    o.bases.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) o.bases.push_back(Cid::from_view(r.raw(Cid::kSize)));
    o.context = r.blob_copy();
    r.expect_done("meta chunk");
    return o;
  }

  Value value() const { return Value::decode(type, data); }
  PosTree tree() const { return value().as_tree(); }

  bool operator==(const FObject&) const = default;
};

struct Version {
  Uid uid;
  FObject object;
};

struct TrackEntry {
  std::uint64_t distance = 0;
  Uid uid;
  FObject object;
};

/// Outcome of comparing two versions.
struct VersionDiff {
  ValueType type = ValueType::String;
  bool keys_differ = false;
  bool value_changed = false;  // primitives
  Value before, after;         // primitives
  TreeDiff tree;               // chunkables

  bool empty() const { return is_chunkable(type) ? tree.empty() : !value_changed; }
};

/// Lowest common ancestor in a derivation DAG. Nodes are visited deepest
/// first; the first one reached from both sides wins, smaller uid on ties.
/// `depth_of` and `bases_of` describe the graph.
inline std::optional<Uid> dag_lca(const Uid& a, const Uid& b, const std::function<std::uint64_t(const Uid&)>& depth_of,
                                  const std::function<std::vector<Uid>(const Uid&)>& bases_of) {
  if (a == b) return a;
  struct Entry {
    std::uint64_t depth;
    Uid uid;
    bool operator<(const Entry& o) const {
      if (depth != o.depth) return depth < o.depth;
      return o.uid < uid;
    }
  };
  std::unordered_map<Uid, std::uint8_t, CidHash> flags;
  std::priority_queue<Entry> heap;
  auto mark = [&](const Uid& u, std::uint8_t f, std::optional<std::uint64_t> depth) {
    auto [it, fresh] = flags.try_emplace(u, 0);
    it->second |= f;
    if (fresh) heap.push({depth ? *depth : depth_of(u), u});
  };
  mark(a, 1, std::nullopt);
  mark(b, 2, std::nullopt);
  std::unordered_set<Uid, CidHash> done;
  while (!heap.empty()) {
    Entry e = heap.top();
    heap.pop();
    if (!done.insert(e.uid).second) continue;
    const std::uint8_t f = flags[e.uid];
    if (f == 3) return e.uid;
    for (const Uid& p : bases_of(e.uid)) mark(p, f, std::nullopt);
  }
  return std::nullopt;
}

/// Versioned object layer over a chunk store.
class ObjectStore {
 public:
  explicit ObjectStore(ChunkStore& store, std::uint64_t max_inline_bytes = 32768)
      : store_(store), max_inline_(max_inline_bytes) {}

  ChunkStore& chunks() { return store_; }

  /// Stores a new version. Bases must exist, share the key and the type.
  Version commit(const std::string& key, const Value& value, const std::vector<Uid>& bases, ByteView context = {},
                 bool* created = nullptr) {
    FObject o;
    o.type = value.type();
    o.key = key;
    o.data = value.data();
    o.context.assign(context.begin(), context.end());
    if (!value.chunkable() && o.data.size() > max_inline_)
      throw Error(ErrorCode::InvalidArgument, "inline value of " + std::to_string(o.data.size()) + " bytes exceeds " +
                                                  std::to_string(max_inline_));
    if (value.chunkable() && !store_.contains(value.as_tree().root))
      throw Error(ErrorCode::NotFound, "tree root " + value.as_tree().root.hex() + " is not stored");
    std::uint64_t depth = 0;
    for (const Uid& b : bases) {
      FObject base = load(b);
      if (base.key != key) throw Error(ErrorCode::KeyMismatch, "base " + b.short_hex() + " belongs to another key");
      if (base.type != o.type)
        throw Error(ErrorCode::TypeMismatch, "base " + b.short_hex() + " holds a " +
                                                 std::string(value_type_name(base.type)) + ", not a " +
                                                 std::string(value_type_name(o.type)));
      depth = std::max(depth, base.depth + 1);
    }
    o.depth = depth;
    o.bases = bases;
    Chunk meta = o.to_chunk();
    if (created) *created = !store_.contains(store_.cid_of(meta));
    Uid uid = store_.put(meta);
    return {uid, std::move(o)};
  }

  FObject load(const Uid& uid, bool verify = false) const {
    Chunk c;
    try {
      c = store_.get(uid, verify);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NotFound) throw Error(ErrorCode::NotFound, "version " + uid.hex() + " not found");
      throw;
    }
    if (c.type != ChunkType::Meta) throw Error(ErrorCode::NotFound, uid.hex() + " is not a version");
    return FObject::from_chunk(c);
  }

  bool exists(const Uid& uid) const { return store_.contains(uid); }

  /// Loads `uid` re-hashing it and every ancestor up to `depth` steps back.
  /// With `deep`, every tree chunk of those versions is re-hashed too.
  FObject load_verified(const Uid& uid, std::uint64_t depth, bool deep = false) const {
    FObject head = load(uid, true);
    std::unordered_set<Cid, CidHash> seen_chunks;
    std::unordered_set<Uid, CidHash> seen{uid};
    std::deque<std::pair<Uid, std::uint64_t>> q{{uid, 0}};
    while (!q.empty()) {
      auto [u, d] = q.front();
      q.pop_front();
      FObject o = u == uid ? head : load(u, true);
      if (deep && is_chunkable(o.type)) verify_tree(store_, o.tree(), &seen_chunks);
      if (d == depth) continue;
      for (const Uid& b : o.bases)
        if (seen.insert(b).second) q.emplace_back(b, d + 1);
    }
    return head;
  }

  /// Breadth-first walk over bases; returns versions whose distance from
  /// `start` lies in [lo, hi], nearest first, each once.
  std::vector<TrackEntry> track(const Uid& start, std::uint64_t lo, std::uint64_t hi, bool verify = false) const {
    if (lo > hi) throw Error(ErrorCode::InvalidArgument, "distance range is empty");
    std::vector<TrackEntry> out;
    std::unordered_set<Uid, CidHash> seen{start};
    std::deque<std::pair<Uid, std::uint64_t>> q{{start, 0}};
    while (!q.empty()) {
      auto [u, d] = q.front();
      q.pop_front();
      FObject o = load(u, verify);
      if (verify && is_chunkable(o.type)) verify_tree(store_, o.tree());
      if (d < hi)
        for (const Uid& b : o.bases)
          if (seen.insert(b).second) q.emplace_back(b, d + 1);
      if (d >= lo) out.push_back({d, u, std::move(o)});
    }
    return out;
  }

  std::optional<Uid> lca(const Uid& a, const Uid& b) const {
    FObject oa = load(a), ob = load(b);
    if (oa.key != ob.key) throw Error(ErrorCode::KeyMismatch, "versions belong to different keys");
    std::unordered_map<Uid, FObject, CidHash> cache{{a, oa}, {b, ob}};
    auto get = [&](const Uid& u) -> const FObject& {
      auto it = cache.find(u);
      if (it == cache.end()) it = cache.emplace(u, load(u)).first;
      return it->second;
    };
    return dag_lca(
        a, b, [&](const Uid& u) { return get(u).depth; }, [&](const Uid& u) { return get(u).bases; });
  }

  VersionDiff diff(const Uid& a, const Uid& b) const {
    FObject oa = load(a), ob = load(b);
    if (oa.type != ob.type)
      throw Error(ErrorCode::TypeMismatch, "cannot diff " + std::string(value_type_name(oa.type)) + " against " +
                                               std::string(value_type_name(ob.type)));
    VersionDiff d;
    d.type = oa.type;
    d.keys_differ = oa.key != ob.key;
    if (is_chunkable(oa.type)) {
      d.tree = diff_trees(store_, oa.tree(), ob.tree());
    } else {
      d.before = oa.value();
      d.after = ob.value();
      d.value_changed = !(d.before == d.after);
    }
    return d;
  }

 private:
  ChunkStore& store_;
  std::uint64_t max_inline_;
};

}  // namespace forkstore
