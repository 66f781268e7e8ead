#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "forkstore/pos_tree.hpp"

namespace forkstore {

enum class DiffOp : std::uint8_t { Added = 1, Removed = 2, Changed = 3 };

inline std::string_view diff_op_name(DiffOp op) {
  switch (op) {
    case DiffOp::Added: return "added";
    case DiffOp::Removed: return "removed";
    case DiffOp::Changed: return "changed";
  }
  return "?";
}

/// One differing key of a Map or Set. `before`/`after` hold Map values.
struct KeyChange {
  DiffOp op = DiffOp::Changed;
  Bytes key;
  Bytes before;
  Bytes after;

  bool operator==(const KeyChange&) const = default;
};

/// Replacement of a[a_begin, a_end) by b[b_begin, b_end). List ranges carry
/// decoded element values, Blob ranges carry bytes.
struct RangeChange {
  std::uint64_t a_begin = 0, a_end = 0;
  std::uint64_t b_begin = 0, b_end = 0;
  std::vector<Bytes> removed;
  std::vector<Bytes> inserted;
  Bytes removed_bytes;
  Bytes inserted_bytes;

  bool operator==(const RangeChange&) const = default;
};

struct TreeDiff {
  TreeKind kind = TreeKind::Blob;
  std::vector<KeyChange> keys;
  std::vector<RangeChange> ranges;

  bool empty() const { return keys.empty() && ranges.empty(); }
  std::size_t size() const { return keys.size() + ranges.size(); }
};

namespace detail {

class NodeCache {
 public:
  explicit NodeCache(const ChunkStore& store) : store_(store) {}
  NodePtr get(const Cid& cid) {
    auto it = cache_.find(cid);
    if (it != cache_.end()) return it->second;
    NodePtr n = load_node(store_, cid);
    cache_.emplace(cid, n);
    return n;
  }
  std::uint32_t height(const Cid& root) {
    std::uint32_t h = 1;
    NodePtr n = get(root);
    while (!n->is_leaf()) {
      n = get(n->child(0));
      ++h;
    }
    return h;
  }

 private:
  const ChunkStore& store_;
  std::unordered_map<Cid, NodePtr, CidHash> cache_;
};

/// Matched index pairs of a shortest edit script (Myers). Returns nullopt when
/// the trace would exceed `budget` cells.
inline std::optional<std::vector<std::pair<std::size_t, std::size_t>>> myers_matches(
    std::size_t n, std::size_t m, const std::function<bool(std::size_t, std::size_t)>& eq,
    std::size_t budget = 50'000'000) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n == 0 || m == 0) return out;
  const std::ptrdiff_t N = static_cast<std::ptrdiff_t>(n), M = static_cast<std::ptrdiff_t>(m);
  const std::ptrdiff_t max = N + M, off = max;
  std::vector<std::ptrdiff_t> v(static_cast<std::size_t>(2 * max + 2), 0);
  std::vector<std::vector<std::ptrdiff_t>> trace;
  std::size_t cells = 0;
  std::ptrdiff_t found = -1;
  for (std::ptrdiff_t d = 0; d <= max; ++d) {
    cells += v.size();
    if (cells > budget) return std::nullopt;
    trace.push_back(v);
    for (std::ptrdiff_t k = -d; k <= d; k += 2) {
      std::ptrdiff_t x;
      if (k == -d || (k != d && v[off + k - 1] < v[off + k + 1])) x = v[off + k + 1];
      else x = v[off + k - 1] + 1;
      std::ptrdiff_t y = x - k;
      while (x < N && y < M && eq(static_cast<std::size_t>(x), static_cast<std::size_t>(y))) {
        ++x;
        ++y;
      }
      v[off + k] = x;
      if (x >= N && y >= M) {
        found = d;
        break;
      }
    }
    if (found >= 0) break;
  }
  std::ptrdiff_t x = N, y = M;
  for (std::ptrdiff_t d = found; d > 0; --d) {
    const auto& pv = trace[static_cast<std::size_t>(d)];
    const std::ptrdiff_t k = x - y;
    std::ptrdiff_t pk;
    if (k == -d || (k != d && pv[off + k - 1] < pv[off + k + 1])) pk = k + 1;
    else pk = k - 1;
    const std::ptrdiff_t px = pv[off + pk], py = px - pk;
    while (x > px && y > py) {
      --x;
      --y;
      out.emplace_back(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    }
    x = px;
    y = py;
  }
  while (x > 0 && y > 0) {
    --x;
    --y;
    out.emplace_back(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  }
  std::reverse(out.begin(), out.end());
  return out;
}

/// Lazy left-to-right walk over a sorted tree yielding subtrees or elements.
class SortedStream {
 public:
  struct Item {
    enum Kind { End, Subtree, Element } kind = End;
    Cid cid;
    std::uint32_t level = 0;
    ByteView element;
  };

  SortedStream(NodeCache& cache, const Cid& root) : cache_(cache), root_(root), root_level_(cache.height(root) - 1) {}

  Item peek() {
    if (pending_) return Item{Item::Subtree, root_, root_level_, {}};
    while (!frames_.empty() && frames_.back().idx >= frames_.back().node->size()) frames_.pop_back();
    if (frames_.empty()) return Item{};
    const Frame& f = frames_.back();
    if (f.level == 0) return Item{Item::Element, {}, 0, f.node->element(f.idx)};
    return Item{Item::Subtree, f.node->child(f.idx), f.level - 1, {}};
  }

  void pop() {
    if (pending_) pending_ = false;
    else ++frames_.back().idx;
  }

  void expand() {
    if (pending_) {
      pending_ = false;
      frames_.push_back({cache_.get(root_), 0, root_level_});
      return;
    }
    Frame& f = frames_.back();
    NodePtr child = cache_.get(f.node->child(f.idx));
    const std::uint32_t lvl = f.level - 1;
    ++f.idx;
    frames_.push_back({std::move(child), 0, lvl});
  }

 private:
  struct Frame {
    NodePtr node;
    std::size_t idx;
    std::uint32_t level;
  };
  NodeCache& cache_;
  Cid root_;
  std::uint32_t root_level_;
  bool pending_ = true;
  std::vector<Frame> frames_;
};

inline void diff_sorted(NodeCache& cache, const PosTree& a, const PosTree& b, TreeDiff& out) {
  SortedStream sa(cache, a.root), sb(cache, b.root);
  const bool is_map = a.kind == TreeKind::Map;
  auto emit = [&](DiffOp op, ByteView ea, ByteView eb) {
    KeyChange c;
    c.op = op;
    ByteView src = op == DiffOp::Added ? eb : ea;
    ByteView k = element_key(a.kind, src);
    c.key.assign(k.begin(), k.end());
    if (is_map) {
      if (op != DiffOp::Added) {
        ByteView v = decode_map_element(ea).value;
        c.before.assign(v.begin(), v.end());
      }
      if (op != DiffOp::Removed) {
        ByteView v = decode_map_element(eb).value;
        c.after.assign(v.begin(), v.end());
      }
    }
    out.keys.push_back(std::move(c));
  };
  while (true) {
    auto x = sa.peek();
    auto y = sb.peek();
    using K = SortedStream::Item;
    if (x.kind == K::End && y.kind == K::End) break;
    if (x.kind == K::Subtree && y.kind == K::Subtree && x.cid == y.cid) {
      sa.pop();
      sb.pop();
      continue;
    }
    if (x.kind == K::Subtree || y.kind == K::Subtree) {
      const bool ea = x.kind == K::Subtree && (y.kind != K::Subtree || x.level >= y.level);
      const bool eb = y.kind == K::Subtree && (x.kind != K::Subtree || y.level >= x.level);
      if (ea) sa.expand();
      if (eb) sb.expand();
      continue;
    }
    if (x.kind == K::End) {
      emit(DiffOp::Added, {}, y.element);
      sb.pop();
      continue;
    }
    if (y.kind == K::End) {
      emit(DiffOp::Removed, x.element, {});
      sa.pop();
      continue;
    }
    const int c = compare_bytes(element_key(a.kind, x.element), element_key(a.kind, y.element));
    if (c < 0) {
      emit(DiffOp::Removed, x.element, {});
      sa.pop();
    } else if (c > 0) {
      emit(DiffOp::Added, {}, y.element);
      sb.pop();
    } else {
      if (!equal_bytes(x.element, y.element)) emit(DiffOp::Changed, x.element, y.element);
      sa.pop();
      sb.pop();
    }
  }
}

struct Segment {
  bool element = false;
  Cid cid;             // subtree
  std::uint64_t count = 0;
  NodePtr holder;      // keeps element views alive
  ByteView elem;
};

inline void expand_segment(NodeCache& cache, const Segment& s, std::vector<Segment>& out) {
  NodePtr n = cache.get(s.cid);
  for (std::size_t i = 0; i < n->size(); ++i) {
    Segment c;
    if (n->is_leaf()) {
      c.element = true;
      c.count = 1;
      c.holder = n;
      c.elem = n->element(i);
    } else {
      c.cid = n->child(i);
      c.count = n->count(i);
    }
    out.push_back(std::move(c));
  }
}

inline void flatten(NodeCache& cache, const std::vector<Segment>& segs, std::size_t from, std::size_t to,
                    std::vector<Segment>& out) {
  for (std::size_t i = from; i < to; ++i) {
    if (segs[i].element) {
      out.push_back(segs[i]);
      continue;
    }
    std::vector<Segment> tmp;
    expand_segment(cache, segs[i], tmp);
    flatten(cache, tmp, 0, tmp.size(), out);
  }
}

inline void diff_gap(TreeKind kind, const std::vector<Segment>& ea, const std::vector<Segment>& eb,
                     std::uint64_t a_pos, std::uint64_t b_pos, TreeDiff& out) {
  std::size_t pre = 0;
  while (pre < ea.size() && pre < eb.size() && equal_bytes(ea[pre].elem, eb[pre].elem)) ++pre;
  std::size_t suf = 0;
  while (suf < ea.size() - pre && suf < eb.size() - pre &&
         equal_bytes(ea[ea.size() - 1 - suf].elem, eb[eb.size() - 1 - suf].elem))
    ++suf;
  const std::size_t na = ea.size() - pre - suf, nb = eb.size() - pre - suf;
  if (na == 0 && nb == 0) return;

  auto push_range = [&](std::size_t ia, std::size_t ja, std::size_t ib, std::size_t jb) {
    RangeChange r;
    r.a_begin = a_pos + ia;
    r.a_end = a_pos + ja;
    r.b_begin = b_pos + ib;
    r.b_end = b_pos + jb;
    for (std::size_t i = ia; i < ja; ++i) {
      if (kind == TreeKind::Blob) r.removed_bytes.push_back(ea[i].elem[0]);
      else {
        ByteView v = decode_list_element(ea[i].elem);
        r.removed.emplace_back(v.begin(), v.end());
      }
    }
    for (std::size_t i = ib; i < jb; ++i) {
      if (kind == TreeKind::Blob) r.inserted_bytes.push_back(eb[i].elem[0]);
      else {
        ByteView v = decode_list_element(eb[i].elem);
        r.inserted.emplace_back(v.begin(), v.end());
      }
    }
    out.ranges.push_back(std::move(r));
  };

  std::optional<std::vector<std::pair<std::size_t, std::size_t>>> matches;
  if (kind == TreeKind::List)
    matches = myers_matches(na, nb, [&](std::size_t i, std::size_t j) {
      return equal_bytes(ea[pre + i].elem, eb[pre + j].elem);
    });
  if (!matches || matches->empty()) {
    push_range(pre, pre + na, pre, pre + nb);
    return;
  }
  std::size_t pa = 0, pb = 0;
  for (auto [i, j] : *matches) {
    if (i > pa || j > pb) push_range(pre + pa, pre + i, pre + pb, pre + j);
    pa = i + 1;
    pb = j + 1;
  }
  if (pa < na || pb < nb) push_range(pre + pa, pre + na, pre + pb, pre + nb);
}

inline void diff_unsorted(NodeCache& cache, const PosTree& a, const PosTree& b, TreeDiff& out) {
  std::vector<Segment> sa{Segment{false, a.root, cache.get(a.root)->total_count(), {}, {}}};
  std::vector<Segment> sb{Segment{false, b.root, cache.get(b.root)->total_count(), {}, {}}};
  // Expand every subtree the other side does not also contain, to a fixpoint.
  while (true) {
    std::unordered_set<Cid, CidHash> ca, cb;
    for (const auto& s : sa) if (!s.element) ca.insert(s.cid);
    for (const auto& s : sb) if (!s.element) cb.insert(s.cid);
    bool changed = false;
    auto refine = [&](std::vector<Segment>& segs, const std::unordered_set<Cid, CidHash>& other) {
      std::vector<Segment> next;
      next.reserve(segs.size());
      for (const auto& s : segs) {
        if (!s.element && !other.count(s.cid)) {
          expand_segment(cache, s, next);
          changed = true;
        } else {
          next.push_back(s);
        }
      }
      segs = std::move(next);
    };
    refine(sa, cb);
    refine(sb, ca);
    if (!changed) break;
  }
  // Align shared subtrees, then diff the element gaps between them.
  std::vector<std::size_t> ta, tb;
  for (std::size_t i = 0; i < sa.size(); ++i) if (!sa[i].element) ta.push_back(i);
  for (std::size_t i = 0; i < sb.size(); ++i) if (!sb[i].element) tb.push_back(i);
  auto m = myers_matches(ta.size(), tb.size(), [&](std::size_t i, std::size_t j) { return sa[ta[i]].cid == sb[tb[j]].cid; });
  std::vector<std::pair<std::size_t, std::size_t>> anchors;
  if (m) for (auto [i, j] : *m) anchors.emplace_back(ta[i], tb[j]);
  anchors.emplace_back(sa.size(), sb.size());

  std::size_t ia = 0, ib = 0;
  std::uint64_t pa = 0, pb = 0;
  for (auto [na, nb] : anchors) {
    std::vector<Segment> ga, gb;
    flatten(cache, sa, ia, na, ga);
    flatten(cache, sb, ib, nb, gb);
    diff_gap(a.kind, ga, gb, pa, pb, out);
    pa += ga.size();
    pb += gb.size();
    if (na < sa.size()) {
      pa += sa[na].count;
      pb += sb[nb].count;
    }
    ia = na + 1;
    ib = nb + 1;
  }
}

}  // namespace detail

/// Differences turning `a` into `b`. Subtrees with equal cids are skipped
/// without being fetched.
inline TreeDiff diff_trees(const ChunkStore& store, const PosTree& a, const PosTree& b) {
  if (a.kind != b.kind)
    throw Error(ErrorCode::TypeMismatch,
                "cannot diff " + std::string(tree_kind_name(a.kind)) + " against " + std::string(tree_kind_name(b.kind)));
  TreeDiff out;
  out.kind = a.kind;
  if (a.root == b.root) return out;
  detail::NodeCache cache(store);
  if (is_sorted_kind(a.kind)) detail::diff_sorted(cache, a, b, out);
  else detail::diff_unsorted(cache, a, b, out);
  return out;
}

/// Applies a diff produced against `a`.
inline PosTree apply_diff(ChunkStore& store, const ChunkerConfig& cfg, PosTree a, const TreeDiff& d) {
  if (a.kind != d.kind) throw Error(ErrorCode::TypeMismatch, "diff kind does not match tree");
  switch (a.kind) {
    case TreeKind::Map:
      for (const auto& c : d.keys)
        a = c.op == DiffOp::Removed ? map_remove(store, cfg, a, c.key) : map_put(store, cfg, a, c.key, c.after);
      return a;
    case TreeKind::Set:
      for (const auto& c : d.keys)
        a = c.op == DiffOp::Removed ? set_remove(store, cfg, a, c.key) : set_insert(store, cfg, a, c.key);
      return a;
    case TreeKind::List:
    case TreeKind::Blob:
      for (auto it = d.ranges.rbegin(); it != d.ranges.rend(); ++it) {
        if (a.kind == TreeKind::Blob)
          a = blob_splice(store, cfg, a, it->a_begin, it->a_end - it->a_begin, it->inserted_bytes);
        else
          a = list_splice(store, cfg, a, it->a_begin, it->a_end - it->a_begin, it->inserted);
      }
      return a;
  }
  return a;
}

}  // namespace forkstore
