#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <unordered_set>
#include <utility>
#include <vector>

#include "forkstore/chunk_store.hpp"
#include "forkstore/chunker.hpp"
#include "forkstore/pos_node.hpp"

namespace forkstore {

/// Handle to an immutable Pattern-Oriented-Split Tree. Every node is a chunk;
/// the root cid commits to the whole content.
struct PosTree {
  TreeKind kind = TreeKind::Blob;
  Cid root;

  bool operator==(const PosTree&) const = default;
};

/// A flat sequence of encoded elements. In per-byte mode (Blob) every byte of
/// the buffer is an element.
class ElementList {
 public:
  ElementList() = default;

  static ElementList bytes(ByteView data) {
    ElementList l;
    l.per_byte_ = true;
    l.data_.assign(data.begin(), data.end());
    return l;
  }

  void push(ByteView e) {
    if (per_byte_) throw Error(ErrorCode::InvalidArgument, "per-byte list takes raw bytes only");
    data_.insert(data_.end(), e.begin(), e.end());
    ends_.push_back(data_.size());
  }

  std::size_t size() const { return per_byte_ ? data_.size() : ends_.size(); }
  bool empty() const { return size() == 0; }
  bool per_byte() const { return per_byte_; }

  ByteView at(std::size_t i) const {
    if (per_byte_) return ByteView(data_).subspan(i, 1);
    const std::size_t b = i == 0 ? 0 : ends_[i - 1];
    return ByteView(data_).subspan(b, ends_[i] - b);
  }

  const Bytes& data() const { return data_; }

 private:
  Bytes data_;
  std::vector<std::size_t> ends_;
  bool per_byte_ = false;
};

namespace detail {

inline std::uint64_t entry_count(ByteView entry) {
  ByteReader r(entry.subspan(Cid::kSize));
  return r.u64();
}

inline ByteView entry_key(ByteView entry) {
  ByteReader r(entry.subspan(Cid::kSize + 8));
  return r.blob();
}

/// Accumulates the elements of one node and writes it as a chunk.
class GroupSink {
 public:
  GroupSink(ChunkStore& store, TreeKind kind, bool leaf) : store_(store), kind_(kind), leaf_(leaf) {}

  void add(ByteView e) {
    last_ = payload_.size();
    payload_.insert(payload_.end(), e.begin(), e.end());
    ++elements_;
    count_ += leaf_ ? 1 : entry_count(e);
  }

  // Blob leaves: each byte is an element.
  void add_raw(ByteView bytes) {
    payload_.insert(payload_.end(), bytes.begin(), bytes.end());
    elements_ += bytes.size();
    count_ += bytes.size();
  }

  std::uint64_t elements() const { return elements_; }

  IndexEntry close() {
    IndexEntry e;
    e.count = count_;
    if (is_sorted_kind(kind_) && elements_ > 0) {
      ByteView last = ByteView(payload_).subspan(last_);
      ByteView k = leaf_ ? element_key(kind_, last) : entry_key(last);
      e.split_key.assign(k.begin(), k.end());
    }
    const ChunkType t = leaf_ ? leaf_chunk_type(kind_) : index_chunk_type(kind_);
    e.child = store_.put(Chunk{t, std::move(payload_)});
    payload_.clear();
    elements_ = 0;
    count_ = 0;
    last_ = 0;
    return e;
  }

 private:
  ChunkStore& store_;
  TreeKind kind_;
  bool leaf_;
  Bytes payload_;
  std::uint64_t elements_ = 0;
  std::uint64_t count_ = 0;
  std::size_t last_ = 0;
};

}  // namespace detail

/// Bottom-up POS-Tree construction. Leaf groups are cut by the rolling-hash
/// pattern, index groups by the child-cid pattern, both bounded by the forced
/// split; a level gains a parent only once it has more than one node.
class TreeBuilder {
 public:
  TreeBuilder(ChunkStore& store, const ChunkerConfig& cfg, TreeKind kind)
      : TreeBuilder(store, cfg, kind, /*base_is_leaf=*/true) {}

  /// Builder whose input is index entries for nodes that already exist.
  static TreeBuilder over_entries(ChunkStore& store, const ChunkerConfig& cfg, TreeKind kind) {
    return TreeBuilder(store, cfg, kind, false);
  }

  TreeBuilder(TreeBuilder&&) = default;

  void add(ByteView element) {
    if (is_sorted_kind(kind_) && base_is_leaf_) {
      ByteView k = element_key(kind_, element);
      if (have_last_ && compare_bytes(last_key_, k) >= 0)
        throw Error(ErrorCode::InvalidArgument, "keys must be strictly increasing");
      last_key_.assign(k.begin(), k.end());
      have_last_ = true;
    }
    push(0, element);
  }

  void add(const IndexEntry& e) { push(0, encode_index_entry(e, is_sorted_kind(kind_))); }

  /// Blob fast path.
  void add_bytes(ByteView data) {
    if (kind_ != TreeKind::Blob || !base_is_leaf_) throw Error(ErrorCode::TypeMismatch, "add_bytes needs a Blob tree");
    Level& l = *levels_[0];
    while (!data.empty()) {
      CloseReason why;
      const std::size_t n = l.splitter.add_bytes(data, why);
      l.sink.add_raw(data.first(n));
      data = data.subspan(n);
      if (why != CloseReason::None) close_group(0, why);
    }
  }

  PosTree finish() {
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      Level& l = *levels_[i];
      if (l.sink.elements() > 0 || (i == 0 && l.nodes == 0)) {
        if (i == 0 && l.nodes == 0 && l.sink.elements() == 0 && !base_is_leaf_)
          throw Error(ErrorCode::InvalidArgument, "cannot build an index over zero entries");
        close_group(i, CloseReason::None);
      }
    }
    const Level& top = *levels_.back();
    return PosTree{kind_, top.first->child};
  }

  const SplitStats& leaf_stats() const { return levels_[0]->splitter.stats(); }
  const std::vector<std::string>& diagnostics() const { return levels_[0]->splitter.diagnostics(); }

 private:
  struct Level {
    Level(ChunkStore& store, const ChunkerConfig& cfg, TreeKind kind, bool leaf)
        : splitter(cfg, leaf ? SplitLevel::Leaf : SplitLevel::Index), sink(store, kind, leaf) {}
    Splitter splitter;
    detail::GroupSink sink;
    std::uint64_t nodes = 0;
    std::optional<IndexEntry> first;  // held until a sibling shows up
  };

  TreeBuilder(ChunkStore& store, const ChunkerConfig& cfg, TreeKind kind, bool base_is_leaf)
      : store_(&store), cfg_(cfg), kind_(kind), base_is_leaf_(base_is_leaf) {
    levels_.push_back(std::make_unique<Level>(store, cfg, kind, base_is_leaf));
  }

  void push(std::size_t i, ByteView e) {
    Level& l = *levels_[i];
    if (l.splitter.must_close_before(e.size())) close_group(i, CloseReason::Forced);
    l.sink.add(e);
    if (CloseReason why = l.splitter.add(e); why != CloseReason::None) close_group(i, why);
  }

  void close_group(std::size_t i, CloseReason why) {
    Level& l = *levels_[i];
    IndexEntry e = l.sink.close();
    l.splitter.close(why);
    ++l.nodes;
    if (l.nodes == 1) {
      l.first = std::move(e);
      return;
    }
    if (levels_.size() == i + 1) levels_.push_back(std::make_unique<Level>(*store_, cfg_, kind_, false));
    const bool sorted = is_sorted_kind(kind_);
    if (l.first) {
      Bytes first = encode_index_entry(*l.first, sorted);
      l.first.reset();
      push(i + 1, first);
    }
    push(i + 1, encode_index_entry(e, sorted));
  }

  ChunkStore* store_;
  ChunkerConfig cfg_;
  TreeKind kind_;
  bool base_is_leaf_;
  std::vector<std::unique_ptr<Level>> levels_;
  Bytes last_key_;
  bool have_last_ = false;
};

inline PosTree build_tree(ChunkStore& store, const ChunkerConfig& cfg, TreeKind kind, const ElementList& elements) {
  TreeBuilder b(store, cfg, kind);
  if (elements.per_byte()) {
    b.add_bytes(elements.data());
  } else {
    for (std::size_t i = 0; i < elements.size(); ++i) b.add(elements.at(i));
  }
  return b.finish();
}

inline PosTree build_blob(ChunkStore& store, const ChunkerConfig& cfg, ByteView data) {
  TreeBuilder b(store, cfg, TreeKind::Blob);
  b.add_bytes(data);
  return b.finish();
}

inline PosTree build_list(ChunkStore& store, const ChunkerConfig& cfg, const std::vector<Bytes>& items) {
  TreeBuilder b(store, cfg, TreeKind::List);
  for (const auto& v : items) b.add(encode_list_element(v));
  return b.finish();
}

/// Keys are sorted and de-duplicated before building.
inline PosTree build_set(ChunkStore& store, const ChunkerConfig& cfg, std::vector<Bytes> keys) {
  std::sort(keys.begin(), keys.end(), [](const Bytes& a, const Bytes& b) { return compare_bytes(a, b) < 0; });
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  TreeBuilder b(store, cfg, TreeKind::Set);
  for (const auto& k : keys) b.add(encode_set_element(k));
  return b.finish();
}

struct BytesLess {
  bool operator()(const Bytes& a, const Bytes& b) const { return compare_bytes(a, b) < 0; }
};

using FlatMap = std::map<Bytes, Bytes, BytesLess>;

inline PosTree build_map(ChunkStore& store, const ChunkerConfig& cfg, const FlatMap& entries) {
  TreeBuilder b(store, cfg, TreeKind::Map);
  for (const auto& [k, v] : entries) b.add(encode_map_element(k, v));
  return b.finish();
}

// ---- navigation -------------------------------------------------------------

/// Root-to-node path. The bottom frame addresses an element (leaf level) or an
/// entry (index level); sibling moves fetch only the nodes they need.
class TreePath {
 public:
  struct Frame {
    NodePtr node;
    std::size_t idx = 0;
  };

  TreePath(const ChunkStore& store, NodePtr root) : store_(&store) { frames_.push_back({std::move(root), 0}); }

  std::vector<Frame>& frames() { return frames_; }
  const std::vector<Frame>& frames() const { return frames_; }
  Frame& bottom() { return frames_.back(); }
  const Frame& bottom() const { return frames_.back(); }
  std::size_t depth() const { return frames_.size() - 1; }

  void descend(std::size_t child_idx_in_bottom, std::size_t idx) {
    bottom().idx = child_idx_in_bottom;
    frames_.push_back({load(bottom().node->child(child_idx_in_bottom)), idx});
  }

  /// Moves frame `d` to the neighbouring node on the same level. Forward moves
  /// land on the first element, backward moves on the last. Leaves the path
  /// untouched and returns false at either end of the level.
  bool step_node(std::size_t d, bool forward) {
    if (d == 0) return false;
    Frame& p = frames_[d - 1];
    if (forward ? p.idx + 1 < p.node->size() : p.idx > 0) {
      p.idx = forward ? p.idx + 1 : p.idx - 1;
    } else if (!step_node(d - 1, forward)) {
      return false;
    }
    NodePtr child = load(frames_[d - 1].node->child(frames_[d - 1].idx));
    const std::size_t idx = forward || child->empty() ? 0 : child->size() - 1;
    frames_[d] = {std::move(child), idx};
    return true;
  }

  /// Truncates to the frame addressing the entry of the bottom node.
  TreePath parent() const {
    TreePath p = *this;
    p.frames_.pop_back();
    return p;
  }

  // Leaf-level element iteration.
  bool at_end() const { return bottom().idx >= bottom().node->size(); }
  ByteView element() const { return bottom().node->element(bottom().idx); }
  void advance() {
    Frame& b = bottom();
    ++b.idx;
    if (b.idx >= b.node->size()) {
      const std::size_t keep = b.idx;
      if (!step_node(depth(), true)) bottom().idx = keep;
    }
  }

  NodePtr load(const Cid& cid) const { return load_node(*store_, cid); }
  const ChunkStore& store() const { return *store_; }

 private:
  const ChunkStore* store_;
  std::vector<Frame> frames_;
};

/// Path to element `pos` (== size for the end position).
inline TreePath seek_position(const ChunkStore& store, const PosTree& t, std::uint64_t pos) {
  TreePath p(store, load_node(store, t.root));
  std::uint64_t rem = pos;
  while (!p.bottom().node->is_leaf()) {
    const Node& n = *p.bottom().node;
    std::size_t i = 0;
    for (; i < n.size(); ++i) {
      const std::uint64_t c = n.count(i);
      if (rem < c) break;
      rem -= c;
    }
    if (i == n.size()) {
      if (rem != 0 || n.empty()) throw Error(ErrorCode::OutOfRange, "position " + std::to_string(pos) + " out of range");
      i = n.size() - 1;
      rem = n.count(i);
    }
    p.descend(i, 0);
  }
  if (rem > p.bottom().node->size())
    throw Error(ErrorCode::OutOfRange, "position " + std::to_string(pos) + " out of range");
  p.bottom().idx = static_cast<std::size_t>(rem);
  return p;
}

/// Path to the first element whose key is >= `key` (the end position if none).
inline TreePath seek_key(const ChunkStore& store, const PosTree& t, ByteView key) {
  if (!is_sorted_kind(t.kind)) throw Error(ErrorCode::TypeMismatch, "key lookup needs a Set or Map");
  TreePath p(store, load_node(store, t.root));
  bool beyond = false;
  while (!p.bottom().node->is_leaf()) {
    const Node& n = *p.bottom().node;
    std::size_t lo = 0, hi = n.size();
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (compare_bytes(n.split_key(mid), key) < 0) lo = mid + 1;
      else hi = mid;
    }
    if (lo == n.size()) {
      beyond = true;
      lo = n.size() - 1;
    }
    p.descend(lo, 0);
  }
  const Node& leaf = *p.bottom().node;
  if (beyond) {
    p.bottom().idx = leaf.size();
    return p;
  }
  std::size_t lo = 0, hi = leaf.size();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (compare_bytes(element_key(t.kind, leaf.element(mid)), key) < 0) lo = mid + 1;
    else hi = mid;
  }
  p.bottom().idx = lo;
  return p;
}

inline TreePath seek_first(const ChunkStore& store, const PosTree& t) { return seek_position(store, t, 0); }

/// Number of leaf elements (bytes for Blob). Reads the root only.
inline std::uint64_t tree_size(const ChunkStore& store, const PosTree& t) {
  return load_node(store, t.root)->total_count();
}

/// Levels from root to leaf; 1 for a lone leaf.
inline std::uint32_t tree_height(const ChunkStore& store, const PosTree& t) {
  std::uint32_t h = 1;
  NodePtr n = load_node(store, t.root);
  while (!n->is_leaf()) {
    n = load_node(store, n->child(0));
    ++h;
  }
  return h;
}

/// Visits every node once, parents before children.
inline void for_each_node(const ChunkStore& store, const PosTree& t,
                          const std::function<void(const Node&, std::uint32_t level_from_root)>& fn,
                          bool verify = false) {
  std::function<void(const Cid&, std::uint32_t)> walk = [&](const Cid& cid, std::uint32_t lvl) {
    NodePtr n = load_node(store, cid, verify);
    fn(*n, lvl);
    if (!n->is_leaf())
      for (std::size_t i = 0; i < n->size(); ++i) walk(n->child(i), lvl + 1);
  };
  walk(t.root, 0);
}

/// Re-hashes every chunk of the tree; throws TamperDetected on mismatch.
/// Chunks already in `seen` are skipped and new ones are added.
inline void verify_tree(const ChunkStore& store, const PosTree& t, std::unordered_set<Cid, CidHash>* seen = nullptr) {
  std::unordered_set<Cid, CidHash> local;
  auto& done = seen ? *seen : local;
  std::function<void(const Cid&)> walk = [&](const Cid& cid) {
    if (!done.insert(cid).second) return;
    NodePtr n = load_node(store, cid, true);
    if (!n->is_leaf())
      for (std::size_t i = 0; i < n->size(); ++i) walk(n->child(i));
  };
  walk(t.root);
}

// ---- reads ------------------------------------------------------------------

inline std::optional<Bytes> map_get(const ChunkStore& store, const PosTree& t, ByteView key) {
  if (t.kind != TreeKind::Map) throw Error(ErrorCode::TypeMismatch, "map_get needs a Map");
  TreePath p = seek_key(store, t, key);
  if (p.at_end()) return std::nullopt;
  MapEntryView e = decode_map_element(p.element());
  if (!equal_bytes(e.key, key)) return std::nullopt;
  return Bytes(e.value.begin(), e.value.end());
}

inline bool set_contains(const ChunkStore& store, const PosTree& t, ByteView key) {
  if (t.kind != TreeKind::Set) throw Error(ErrorCode::TypeMismatch, "set_contains needs a Set");
  TreePath p = seek_key(store, t, key);
  return !p.at_end() && equal_bytes(decode_list_element(p.element()), key);
}

/// Encoded element at `pos`.
inline Bytes element_at(const ChunkStore& store, const PosTree& t, std::uint64_t pos) {
  TreePath p = seek_position(store, t, pos);
  if (p.at_end()) throw Error(ErrorCode::OutOfRange, "position " + std::to_string(pos) + " out of range");
  ByteView e = p.element();
  return Bytes(e.begin(), e.end());
}

inline Bytes list_get(const ChunkStore& store, const PosTree& t, std::uint64_t pos) {
  if (t.kind != TreeKind::List) throw Error(ErrorCode::TypeMismatch, "list_get needs a List");
  Bytes e = element_at(store, t, pos);
  ByteView v = decode_list_element(e);
  return Bytes(v.begin(), v.end());
}

/// Forward iterator over encoded leaf elements; leaves are fetched lazily.
class ElementIterator {
 public:
  explicit ElementIterator(TreePath path) : path_(std::move(path)) {}

  bool valid() const { return !path_.at_end(); }
  ByteView element() const { return path_.element(); }
  void next() { path_.advance(); }

 private:
  TreePath path_;
};

inline ElementIterator iterate(const ChunkStore& store, const PosTree& t, std::uint64_t from = 0) {
  return ElementIterator(seek_position(store, t, from));
}

inline ElementIterator iterate_from_key(const ChunkStore& store, const PosTree& t, ByteView key) {
  return ElementIterator(seek_key(store, t, key));
}

/// Visits leaves left to right.
inline void for_each_leaf(const ChunkStore& store, const PosTree& t, const std::function<void(const Node&)>& fn) {
  std::function<void(const Cid&)> walk = [&](const Cid& cid) {
    NodePtr n = load_node(store, cid);
    if (n->is_leaf()) {
      fn(*n);
      return;
    }
    for (std::size_t i = 0; i < n->size(); ++i) walk(n->child(i));
  };
  walk(t.root);
}

inline Bytes read_blob(const ChunkStore& store, const PosTree& t) {
  if (t.kind != TreeKind::Blob) throw Error(ErrorCode::TypeMismatch, "read_blob needs a Blob");
  Bytes out;
  for_each_leaf(store, t, [&](const Node& n) { out.insert(out.end(), n.payload().begin(), n.payload().end()); });
  return out;
}

inline Bytes read_blob_range(const ChunkStore& store, const PosTree& t, std::uint64_t pos, std::uint64_t len) {
  Bytes out;
  out.reserve(static_cast<std::size_t>(len));
  ElementIterator it = iterate(store, t, pos);
  for (; it.valid() && out.size() < len; it.next()) out.push_back(it.element()[0]);
  return out;
}

inline std::vector<Bytes> read_list(const ChunkStore& store, const PosTree& t) {
  std::vector<Bytes> out;
  for_each_leaf(store, t, [&](const Node& n) {
    for (std::size_t i = 0; i < n.size(); ++i) {
      ByteView v = decode_list_element(n.element(i));
      out.emplace_back(v.begin(), v.end());
    }
  });
  return out;
}

inline FlatMap read_map(const ChunkStore& store, const PosTree& t) {
  FlatMap out;
  for_each_leaf(store, t, [&](const Node& n) {
    for (std::size_t i = 0; i < n.size(); ++i) {
      MapEntryView e = decode_map_element(n.element(i));
      out.emplace_hint(out.end(), Bytes(e.key.begin(), e.key.end()), Bytes(e.value.begin(), e.value.end()));
    }
  });
  return out;
}

inline std::vector<Bytes> read_set(const ChunkStore& store, const PosTree& t) { return read_list(store, t); }

// ---- copy-on-write updates -----------------------------------------------------

namespace detail {

/// Replaces `remove` elements at `at` (any level) with `inserts` and re-chunks
/// from the start of the preceding node until a new boundary coincides with an
/// untouched old node start. The replaced node range becomes an edit one level
/// up, repeated until the root is rebuilt.
inline PosTree rechunk(ChunkStore& store, const ChunkerConfig& cfg, TreeKind kind, TreePath at,
                       std::uint64_t remove, ElementList inserts) {
  const bool sorted = is_sorted_kind(kind);
  while (true) {
    const std::size_t d = at.depth();
    const bool leaf = at.bottom().node->is_leaf();
    Splitter splitter(cfg, leaf ? SplitLevel::Leaf : SplitLevel::Index);
    GroupSink sink(store, kind, leaf);
    std::vector<IndexEntry> produced;
    auto feed = [&](ByteView e) {
      if (splitter.must_close_before(e.size())) {
        produced.push_back(sink.close());
        splitter.close(CloseReason::Forced);
      }
      sink.add(e);
      if (CloseReason why = splitter.add(e); why != CloseReason::None) {
        produced.push_back(sink.close());
        splitter.close(why);
      }
    };

    TreePath start = at;
    start.bottom().idx = 0;
    const bool has_prev = start.step_node(d, false);
    start.bottom().idx = 0;

    TreePath w = start;
    std::int64_t ordinal = 0;
    std::int64_t touched = -1;
    if (has_prev) {
      const Node& n = *w.bottom().node;
      for (std::size_t i = 0; i < n.size(); ++i) feed(n.element(i));
      touched = 0;
      w.step_node(d, true);
      ordinal = 1;
    }
    {
      const std::size_t i = at.bottom().idx;
      const Node& n = *w.bottom().node;
      for (std::size_t j = 0; j < i; ++j) feed(n.element(j));
      if (i > 0) touched = ordinal;
      w.bottom().idx = i;
    }
    for (std::size_t j = 0; j < inserts.size(); ++j) feed(inserts.at(j));
    for (std::uint64_t r = 0; r < remove; ++r) {
      if (w.bottom().idx >= w.bottom().node->size()) {
        if (!w.step_node(d, true)) throw Error(ErrorCode::OutOfRange, "removal runs past the end");
        ++ordinal;
      }
      touched = ordinal;
      ++w.bottom().idx;
    }
    bool resynced = false;
    while (true) {
      auto& b = w.bottom();
      if (b.idx >= b.node->size()) {
        if (!w.step_node(d, true)) break;
        ++ordinal;
        continue;
      }
      if (sink.elements() == 0 && b.idx == 0 && ordinal > touched) {
        resynced = true;
        break;
      }
      touched = ordinal;
      feed(b.node->element(b.idx));
      ++b.idx;
    }
    if (sink.elements() > 0) {
      produced.push_back(sink.close());
      splitter.close(CloseReason::None);
    }
    if (!resynced && !has_prev && produced.empty() && touched >= 0) {
      if (!leaf) throw Error(ErrorCode::Corrupt, "index level emptied during update");
      produced.push_back(sink.close());  // the empty object keeps one empty leaf
    }
    const auto consumed = static_cast<std::uint64_t>(touched + 1);

    if (d == 0) {
      if (produced.empty()) return PosTree{kind, at.bottom().node->cid()};
      Cid root;
      if (produced.size() == 1) {
        root = produced[0].child;
      } else {
        TreeBuilder up = TreeBuilder::over_entries(store, cfg, kind);
        for (const auto& e : produced) up.add(e);
        root = up.finish().root;
      }
      NodePtr r = load_node(store, root);
      while (!r->is_leaf() && r->size() == 1) r = load_node(store, r->child(0));
      return PosTree{kind, r->cid()};
    }

    ElementList up;
    for (const auto& e : produced) up.push(encode_index_entry(e, sorted));
    at = start.parent();
    remove = consumed;
    inserts = std::move(up);
  }
}

}  // namespace detail

/// Removes `remove` elements at `pos` and inserts `inserts` there. Positions
/// count elements (bytes for Blob).
inline PosTree splice(ChunkStore& store, const ChunkerConfig& cfg, const PosTree& t, std::uint64_t pos,
                      std::uint64_t remove, const ElementList& inserts) {
  if (remove == 0 && inserts.empty()) return t;
  TreePath p = seek_position(store, t, pos);
  const std::uint64_t total = p.frames().front().node->total_count();
  if (pos + remove > total) throw Error(ErrorCode::OutOfRange, "range exceeds object size");
  return detail::rechunk(store, cfg, t.kind, std::move(p), remove, inserts);
}

inline PosTree blob_splice(ChunkStore& store, const ChunkerConfig& cfg, const PosTree& t, std::uint64_t pos,
                           std::uint64_t remove, ByteView bytes) {
  if (t.kind != TreeKind::Blob) throw Error(ErrorCode::TypeMismatch, "blob edit on a " + std::string(tree_kind_name(t.kind)));
  return splice(store, cfg, t, pos, remove, ElementList::bytes(bytes));
}

inline PosTree list_splice(ChunkStore& store, const ChunkerConfig& cfg, const PosTree& t, std::uint64_t pos,
                           std::uint64_t remove, const std::vector<Bytes>& items) {
  if (t.kind != TreeKind::List) throw Error(ErrorCode::TypeMismatch, "list edit on a " + std::string(tree_kind_name(t.kind)));
  ElementList l;
  for (const auto& v : items) l.push(encode_list_element(v));
  return splice(store, cfg, t, pos, remove, l);
}

inline PosTree map_put(ChunkStore& store, const ChunkerConfig& cfg, const PosTree& t, ByteView key, ByteView value) {
  if (t.kind != TreeKind::Map) throw Error(ErrorCode::TypeMismatch, "map edit on a " + std::string(tree_kind_name(t.kind)));
  TreePath p = seek_key(store, t, key);
  std::uint64_t remove = 0;
  if (!p.at_end()) {
    MapEntryView e = decode_map_element(p.element());
    if (equal_bytes(e.key, key)) {
      if (equal_bytes(e.value, value)) return t;
      remove = 1;
    }
  }
  ElementList l;
  l.push(encode_map_element(key, value));
  return detail::rechunk(store, cfg, t.kind, std::move(p), remove, std::move(l));
}

inline PosTree map_remove(ChunkStore& store, const ChunkerConfig& cfg, const PosTree& t, ByteView key) {
  if (t.kind != TreeKind::Map) throw Error(ErrorCode::TypeMismatch, "map edit on a " + std::string(tree_kind_name(t.kind)));
  TreePath p = seek_key(store, t, key);
  if (p.at_end() || !equal_bytes(decode_map_element(p.element()).key, key))
    throw Error(ErrorCode::NotFound, "key not present in map");
  return detail::rechunk(store, cfg, t.kind, std::move(p), 1, ElementList{});
}

inline PosTree set_insert(ChunkStore& store, const ChunkerConfig& cfg, const PosTree& t, ByteView key) {
  if (t.kind != TreeKind::Set) throw Error(ErrorCode::TypeMismatch, "set edit on a " + std::string(tree_kind_name(t.kind)));
  TreePath p = seek_key(store, t, key);
  if (!p.at_end() && equal_bytes(decode_list_element(p.element()), key)) return t;
  ElementList l;
  l.push(encode_set_element(key));
  return detail::rechunk(store, cfg, t.kind, std::move(p), 0, std::move(l));
}

inline PosTree set_remove(ChunkStore& store, const ChunkerConfig& cfg, const PosTree& t, ByteView key) {
  if (t.kind != TreeKind::Set) throw Error(ErrorCode::TypeMismatch, "set edit on a " + std::string(tree_kind_name(t.kind)));
  TreePath p = seek_key(store, t, key);
  if (p.at_end() || !equal_bytes(decode_list_element(p.element()), key))
    throw Error(ErrorCode::NotFound, "element not present in set");
  return detail::rechunk(store, cfg, t.kind, std::move(p), 1, ElementList{});
}

}  // namespace forkstore
