#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forkstore/branch.hpp"
#include "forkstore/object.hpp"
#include "forkstore/pos_diff.hpp"
#include "forkstore/staging.hpp"

namespace forkstore {

enum class ConflictKind : std::uint8_t { Value = 1, MapKey = 2, ListRange = 3, BlobRange = 4 };

inline std::string_view conflict_kind_name(ConflictKind k) {
  switch (k) {
    case ConflictKind::Value: return "value";
    case ConflictKind::MapKey: return "map-key";
    case ConflictKind::ListRange: return "list-range";
    case ConflictKind::BlobRange: return "blob-range";
  }
  return "?";
}

/// A location changed differently on both sides. Contents use one shape per
/// kind: Map key → zero (absent) or one value; List range → elements; Blob
/// range → one byte string; String → one byte string; Integer → one 8-byte
/// little-endian word; Tuple → fields.
struct Conflict {
  ConflictKind kind = ConflictKind::Value;
  ValueType value_type = ValueType::String;
  Bytes key;
  std::uint64_t begin = 0, end = 0;  // base range for List/Blob
  std::vector<Bytes> base, side1, side2;

  bool operator==(const Conflict&) const = default;
};

/// Returns the replacement for a conflict location (same shape as the
/// conflict contents) or nothing to leave it unresolved.
using ResolverHook = std::function<std::optional<std::vector<Bytes>>(const Conflict&)>;

struct Resolver {
  enum class Kind : std::uint8_t { None = 0, Append = 1, Aggregate = 2, ChooseOne = 3, Custom = 4 };
  Kind kind = Kind::None;
  std::uint8_t side = 1;  // ChooseOne
  std::string name;       // Custom, looked up in a registry
  ResolverHook hook;      // Custom, in-process

  static Resolver none() { return {}; }
  static Resolver append() { return {Kind::Append, 1, {}, {}}; }
  static Resolver aggregate() { return {Kind::Aggregate, 1, {}, {}}; }
  static Resolver choose(std::uint8_t side) {
    if (side != 1 && side != 2) throw Error(ErrorCode::InvalidArgument, "choose-one side must be 1 or 2");
    return {Kind::ChooseOne, side, {}, {}};
  }
  static Resolver custom(std::string name) { return {Kind::Custom, 1, std::move(name), {}}; }
  static Resolver custom(ResolverHook hook) { return {Kind::Custom, 1, {}, std::move(hook)}; }

  static Resolver parse(std::string_view s) {
    if (s.empty() || s == "none") return none();
    if (s == "append") return append();
    if (s == "aggregate") return aggregate();
    if (s == "choose-one:1" || s == "ours" || s == "choose-one") return choose(1);
    if (s == "choose-one:2" || s == "theirs") return choose(2);
    if (s.rfind("custom:", 0) == 0) return custom(std::string(s.substr(7)));
    throw Error(ErrorCode::InvalidArgument, "unknown resolver '" + std::string(s) + "'");
  }
};

class MergeConflictError : public Error {
 public:
  explicit MergeConflictError(std::vector<Conflict> conflicts)
      : Error(ErrorCode::UnresolvedConflicts, std::to_string(conflicts.size()) + " unresolved merge conflict(s)"),
        conflicts_(std::move(conflicts)) {}
  const std::vector<Conflict>& conflicts() const { return conflicts_; }

 private:
  std::vector<Conflict> conflicts_;
};

struct MergeOutcome {
  std::optional<Value> value;
  std::vector<Conflict> conflicts;
  bool ok() const { return value.has_value(); }
};

namespace detail {

inline Bytes join(const std::vector<Bytes>& parts) {
  Bytes out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline std::optional<std::vector<Bytes>> resolve(const Conflict& c, const Resolver& r) {
  switch (r.kind) {
    case Resolver::Kind::None:
      return std::nullopt;
    case Resolver::Kind::ChooseOne:
      return r.side == 1 ? c.side1 : c.side2;
    case Resolver::Kind::Append: {
      if (c.kind == ConflictKind::Value && c.value_type == ValueType::Integer) return std::nullopt;
      if (c.kind == ConflictKind::ListRange || (c.kind == ConflictKind::Value && c.value_type == ValueType::Tuple)) {
        std::vector<Bytes> out = c.side1;
        out.insert(out.end(), c.side2.begin(), c.side2.end());
        return out;
      }
      Bytes joined = join(c.side1);
      Bytes two = join(c.side2);
      joined.insert(joined.end(), two.begin(), two.end());
      return std::vector<Bytes>{joined};
    }
    case Resolver::Kind::Aggregate: {
      if (c.kind != ConflictKind::Value || c.value_type != ValueType::Integer) return std::nullopt;
      auto word = [](const std::vector<Bytes>& v) {
        ByteReader rd(v.at(0));
        return rd.i64();
      };
      const std::int64_t base = word(c.base), a = word(c.side1), b = word(c.side2);
      const std::int64_t sum = checked_add(checked_add(base, checked_sub(a, base)), checked_sub(b, base));
      ByteWriter w;
      w.i64(sum);
      return std::vector<Bytes>{std::move(w).take()};
    }
    case Resolver::Kind::Custom:
      if (!r.hook) throw Error(ErrorCode::InvalidArgument, "custom resolver '" + r.name + "' is not registered");
      return r.hook(c);
  }
  return std::nullopt;
}

inline std::vector<Bytes> primitive_parts(const Value& v) {
  if (v.type() == ValueType::Tuple) return v.as_tuple();
  return {v.data()};
}

inline Value primitive_from_parts(ValueType t, const std::vector<Bytes>& parts) {
  switch (t) {
    case ValueType::Tuple: return Value::tuple(parts);
    case ValueType::Integer:
      if (parts.size() != 1 || parts[0].size() != 8)
        throw Error(ErrorCode::InvalidArgument, "integer resolution must be one 8-byte word");
      return Value::decode(t, parts[0]);
    default: return Value::string_bytes(join(parts));
  }
}

inline MergeOutcome merge_primitive(const Value& base, const Value& a, const Value& b, const Resolver& r) {
  if (a == b || b == base) return {a, {}};
  if (a == base) return {b, {}};
  Conflict c{ConflictKind::Value, a.type(), {}, 0, 0, primitive_parts(base), primitive_parts(a), primitive_parts(b)};
  if (auto res = resolve(c, r)) return {primitive_from_parts(a.type(), *res), {}};
  return {std::nullopt, {c}};
}

inline MergeOutcome merge_sorted(ChunkStore& store, const ChunkerConfig& cfg, const PosTree& base, const PosTree& a,
                                 const PosTree& b, const Resolver& r) {
  TreeDiff da = diff_trees(store, base, a);
  TreeDiff db = diff_trees(store, base, b);
  const bool is_map = base.kind == TreeKind::Map;
  PosTree out = a;
  std::vector<Conflict> conflicts;
  auto after_state = [](const KeyChange& k) -> std::vector<Bytes> {
    if (k.op == DiffOp::Removed) return {};
    return {k.after};
  };
  auto apply_state = [&](const Bytes& key, const std::vector<Bytes>& state) {
    if (!is_map) {
      out = state.empty() ? (set_contains(store, out, key) ? set_remove(store, cfg, out, key) : out)
                          : set_insert(store, cfg, out, key);
      return;
    }
    if (state.empty()) {
      if (map_get(store, out, key)) out = map_remove(store, cfg, out, key);
    } else {
      out = map_put(store, cfg, out, key, join(state));
    }
  };
  std::size_t i = 0, j = 0;
  while (j < db.keys.size()) {
    const KeyChange& y = db.keys[j];
    while (i < da.keys.size() && compare_bytes(da.keys[i].key, y.key) < 0) ++i;
    if (i < da.keys.size() && equal_bytes(da.keys[i].key, y.key)) {
      const KeyChange& x = da.keys[i];
      auto sa = after_state(x), sb = after_state(y);
      if (sa != sb) {
        Conflict c;
        c.kind = ConflictKind::MapKey;
        c.value_type = value_type_of(base.kind);
        c.key = y.key;
        if (y.op != DiffOp::Added) c.base = {y.before};
        c.side1 = sa;
        c.side2 = sb;
        if (auto res = resolve(c, r)) apply_state(y.key, *res);
        else conflicts.push_back(std::move(c));
      }
    } else {
      apply_state(y.key, after_state(y));
    }
    ++j;
  }
  if (!conflicts.empty()) return {std::nullopt, std::move(conflicts)};
  return {Value::tree(out), {}};
}

struct RangeEdit {
  std::uint64_t begin = 0, end = 0;
  int side = 0;
  std::vector<Bytes> items;  // List elements, or a single byte string for Blob
};

inline MergeOutcome merge_sequence(ChunkStore& store, const ChunkerConfig& cfg, const PosTree& base, const PosTree& a,
                                   const PosTree& b, const Resolver& r) {
  const bool blob = base.kind == TreeKind::Blob;
  std::vector<RangeEdit> edits;
  auto collect = [&](const TreeDiff& d, int side) {
    for (const auto& rc : d.ranges) {
      RangeEdit e{rc.a_begin, rc.a_end, side, {}};
      if (blob) e.items = {rc.inserted_bytes};
      else e.items = rc.inserted;
      edits.push_back(std::move(e));
    }
  };
  collect(diff_trees(store, base, a), 1);
  collect(diff_trees(store, base, b), 2);
  std::stable_sort(edits.begin(), edits.end(), [](const RangeEdit& x, const RangeEdit& y) {
    return x.begin != y.begin ? x.begin < y.begin : x.end < y.end;
  });

  auto read_base = [&](std::uint64_t from, std::uint64_t to) -> std::vector<Bytes> {
    if (blob) return {read_blob_range(store, base, from, to - from)};
    std::vector<Bytes> out;
    ElementIterator it = iterate(store, base, from);
    for (std::uint64_t n = from; n < to && it.valid(); ++n, it.next()) {
      ByteView v = decode_list_element(it.element());
      out.emplace_back(v.begin(), v.end());
    }
    return out;
  };
  // Content of base[from, to) after one side's edits inside that range.
  auto apply_side = [&](const std::vector<RangeEdit>& cluster, int side, std::uint64_t from, std::uint64_t to) {
    std::vector<Bytes> seg = read_base(from, to);
    if (blob) {
      Bytes s = seg[0];
      for (auto it = cluster.rbegin(); it != cluster.rend(); ++it) {
        if (it->side != side) continue;
        s.erase(s.begin() + static_cast<std::ptrdiff_t>(it->begin - from),
                s.begin() + static_cast<std::ptrdiff_t>(it->end - from));
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(it->begin - from), it->items[0].begin(), it->items[0].end());
      }
      return std::vector<Bytes>{s};
    }
    for (auto it = cluster.rbegin(); it != cluster.rend(); ++it) {
      if (it->side != side) continue;
      seg.erase(seg.begin() + static_cast<std::ptrdiff_t>(it->begin - from),
                seg.begin() + static_cast<std::ptrdiff_t>(it->end - from));
      seg.insert(seg.begin() + static_cast<std::ptrdiff_t>(it->begin - from), it->items.begin(), it->items.end());
    }
    return seg;
  };

  std::vector<RangeEdit> final_edits;
  std::vector<Conflict> conflicts;
  std::size_t i = 0;
  while (i < edits.size()) {
    std::vector<RangeEdit> cluster{edits[i]};
    std::uint64_t cb = edits[i].begin, ce = edits[i].end;
    std::size_t j = i + 1;
    while (j < edits.size() && (edits[j].begin < ce || edits[j].begin == cb)) {
      ce = std::max(ce, edits[j].end);
      cluster.push_back(edits[j]);
      ++j;
    }
    i = j;
    const bool both = std::any_of(cluster.begin(), cluster.end(), [](const RangeEdit& e) { return e.side == 1; }) &&
                      std::any_of(cluster.begin(), cluster.end(), [](const RangeEdit& e) { return e.side == 2; });
    if (!both) {
      final_edits.insert(final_edits.end(), cluster.begin(), cluster.end());
      continue;
    }
    std::vector<Bytes> s1 = apply_side(cluster, 1, cb, ce), s2 = apply_side(cluster, 2, cb, ce);
    if (s1 == s2) {
      final_edits.push_back({cb, ce, 0, std::move(s1)});
      continue;
    }
    Conflict c;
    c.kind = blob ? ConflictKind::BlobRange : ConflictKind::ListRange;
    c.value_type = value_type_of(base.kind);
    c.begin = cb;
    c.end = ce;
    c.base = read_base(cb, ce);
    c.side1 = std::move(s1);
    c.side2 = std::move(s2);
    if (auto res = resolve(c, r)) {
      if (blob) final_edits.push_back({cb, ce, 0, {join(*res)}});
      else final_edits.push_back({cb, ce, 0, std::move(*res)});
    } else {
      conflicts.push_back(std::move(c));
    }
  }
  if (!conflicts.empty()) return {std::nullopt, std::move(conflicts)};
  PosTree out = base;
  for (auto it = final_edits.rbegin(); it != final_edits.rend(); ++it) {
    if (blob) out = blob_splice(store, cfg, out, it->begin, it->end - it->begin, it->items[0]);
    else out = list_splice(store, cfg, out, it->begin, it->end - it->begin, it->items);
  }
  return {Value::tree(out), {}};
}

}  // namespace detail

/// Three-way merge of `a` and `b` against their common ancestor `base`.
/// Changes made on one side are taken; identical changes are taken once;
/// differing changes become conflicts unless the resolver settles them.
inline MergeOutcome three_way_merge(ChunkStore& store, const ChunkerConfig& cfg, const Value& base, const Value& a,
                                    const Value& b, const Resolver& r = {}) {
  if (a.type() != b.type() || base.type() != a.type())
    throw Error(ErrorCode::TypeMismatch, "merge inputs have different types");
  if (a == b) return {a, {}};
  if (!a.chunkable()) return detail::merge_primitive(base, a, b, r);
  if (b == base) return {a, {}};
  if (a == base) return {b, {}};
  const PosTree tb = base.as_tree(), ta = a.as_tree(), tbb = b.as_tree();
  if (is_sorted_kind(tb.kind)) return detail::merge_sorted(store, cfg, tb, ta, tbb, r);
  return detail::merge_sequence(store, cfg, tb, ta, tbb, r);
}

/// Wiring shared by the merge operations.
struct MergeContext {
  ObjectStore& objects;
  BranchManager& branches;
  const ChunkerConfig& cfg;
};

namespace detail {

inline Value merged_or_throw(ChunkStore& store, const ChunkerConfig& cfg, const Value& base, const Value& a,
                             const Value& b, const Resolver& r) {
  MergeOutcome m = three_way_merge(store, cfg, base, a, b, r);
  if (!m.ok()) throw MergeConflictError(std::move(m.conflicts));
  return *m.value;
}

inline void flush_value(StagingChunkStore& staging, const Value& v) {
  if (v.chunkable()) staging.flush({v.as_tree().root});
  else staging.discard();
}

}  // namespace detail

/// Merges `ref` into the head of `target`; only the target head moves.
/// Fails without side effects on conflicts or unrelated histories.
inline Version merge_into_branch(MergeContext ctx, const std::string& key, const std::string& target, const Uid& ref,
                                 const Resolver& r, ByteView context = {}) {
  auto lock = ctx.branches.lock_key(key);
  std::optional<Uid> head = ctx.branches.head(key, target);
  if (!head) throw BranchManager::missing(key, target);
  FObject ref_obj = ctx.objects.load(ref);
  if (ref_obj.key != key)
    throw Error(ErrorCode::NoCommonAncestor, "version " + ref.short_hex() + " belongs to key '" + ref_obj.key + "'");
  FObject head_obj = ctx.objects.load(*head);
  StagingChunkStore staging(ctx.objects.chunks());
  Value merged;
  std::vector<Uid> bases;
  if (*head == ref) {
    merged = head_obj.value();
    bases = {*head};
  } else {
    std::optional<Uid> lca = ctx.objects.lca(*head, ref);
    if (!lca) throw Error(ErrorCode::NoCommonAncestor, "versions share no ancestor");
    merged = detail::merged_or_throw(staging, ctx.cfg, ctx.objects.load(*lca).value(), head_obj.value(),
                                     ref_obj.value(), r);
    bases = {*head, ref};
  }
  detail::flush_value(staging, merged);
  Version v = ctx.objects.commit(key, merged, bases, context);
  ctx.branches.apply({{BranchOp::SetTagged, key, target, v.uid}});
  return v;
}

/// Merges several versions of one key into a new untagged head that replaces
/// the inputs. Inputs are folded left to right; each step uses the deepest
/// common ancestor the new input shares with any earlier one.
inline Version merge_versions(MergeContext ctx, const std::string& key, const std::vector<Uid>& input,
                              const Resolver& r, ByteView context = {}) {
  std::vector<Uid> uids;
  for (const Uid& u : input)
    if (std::find(uids.begin(), uids.end(), u) == uids.end()) uids.push_back(u);
  if (input.size() < 2) throw Error(ErrorCode::InvalidArgument, "merge needs at least two versions");
  auto lock = ctx.branches.lock_key(key);
  std::vector<FObject> objs;
  for (const Uid& u : uids) {
    objs.push_back(ctx.objects.load(u));
    if (objs.back().key != key)
      throw Error(ErrorCode::NoCommonAncestor, "version " + u.short_hex() + " belongs to key '" + objs.back().key + "'");
  }
  StagingChunkStore staging(ctx.objects.chunks());
  Value acc = objs[0].value();
  for (std::size_t i = 1; i < uids.size(); ++i) {
    std::optional<std::pair<std::uint64_t, Uid>> best;
    for (std::size_t j = 0; j < i; ++j) {
      std::optional<Uid> l = ctx.objects.lca(uids[j], uids[i]);
      if (!l) continue;
      const std::uint64_t d = ctx.objects.load(*l).depth;
      if (!best || d > best->first || (d == best->first && *l < best->second)) best = {{d, *l}};
    }
    if (!best) throw Error(ErrorCode::NoCommonAncestor, "version " + uids[i].short_hex() + " shares no ancestor");
    acc = detail::merged_or_throw(staging, ctx.cfg, ctx.objects.load(best->second).value(), acc, objs[i].value(), r);
  }
  detail::flush_value(staging, acc);
  Version v = ctx.objects.commit(key, acc, uids, context);
  std::vector<BranchOp> ops;
  for (const Uid& u : uids)
    if (ctx.branches.untagged_contains(key, u)) ops.push_back({BranchOp::RemoveUntagged, key, "", u});
  ops.push_back({BranchOp::AddUntagged, key, "", v.uid});
  ctx.branches.apply(ops);
  return v;
}

}  // namespace forkstore
