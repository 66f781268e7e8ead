#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "forkstore/bytes.hpp"
#include "forkstore/error.hpp"
#include "forkstore/pos_tree.hpp"

namespace forkstore {

/// Value types. Primitives live inline in the meta chunk; chunkables are
/// POS-Trees referenced by their root cid.
enum class ValueType : std::uint8_t { String = 1, Tuple = 2, Integer = 3, Blob = 4, List = 5, Map = 6, Set = 7 };

inline std::string_view value_type_name(ValueType t) {
  switch (t) {
    case ValueType::String: return "String";
    case ValueType::Tuple: return "Tuple";
    case ValueType::Integer: return "Integer";
    case ValueType::Blob: return "Blob";
    case ValueType::List: return "List";
    case ValueType::Map: return "Map";
    case ValueType::Set: return "Set";
  }
  return "?";
}

inline ValueType parse_value_type(std::string_view s) {
  for (int i = 1; i <= 7; ++i) {
    auto t = static_cast<ValueType>(i);
    std::string name(value_type_name(t));
    std::string lower = name;
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == name || s == lower) return t;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown value type '" + std::string(s) + "'");
}

inline bool valid_value_type(std::uint8_t t) { return t >= 1 && t <= 7; }

inline bool is_chunkable(ValueType t) { return t >= ValueType::Blob; }

inline TreeKind tree_kind_of(ValueType t) {
  switch (t) {
    case ValueType::Blob: return TreeKind::Blob;
    case ValueType::List: return TreeKind::List;
    case ValueType::Map: return TreeKind::Map;
    case ValueType::Set: return TreeKind::Set;
    default: throw Error(ErrorCode::TypeMismatch, std::string(value_type_name(t)) + " is not chunkable");
  }
}

inline ValueType value_type_of(TreeKind k) {
  switch (k) {
    case TreeKind::Blob: return ValueType::Blob;
    case TreeKind::List: return ValueType::List;
    case TreeKind::Map: return ValueType::Map;
    case TreeKind::Set: return ValueType::Set;
  }
  return ValueType::Blob;
}

inline Bytes encode_tuple(const std::vector<Bytes>& fields) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(fields.size()));
  for (const auto& f : fields) w.blob(f);
  return std::move(w).take();
}

inline std::vector<Bytes> decode_tuple(ByteView data) {
  ByteReader r(data);
  const std::uint32_t n = r.u32();
  std::vector<Bytes> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(r.blob_copy());
  r.expect_done("tuple");
  return out;
}

/// A typed value. For chunkable types only the tree handle is held; content is
/// read from a chunk store on demand.
class Value {
 public:
  Value() = default;

  static Value string(std::string_view s) { return Value(ValueType::String, to_bytes(s)); }
  static Value string_bytes(ByteView b) { return Value(ValueType::String, Bytes(b.begin(), b.end())); }
  static Value tuple(const std::vector<Bytes>& fields) { return Value(ValueType::Tuple, encode_tuple(fields)); }
  static Value integer(std::int64_t v) {
    ByteWriter w;
    w.i64(v);
    return Value(ValueType::Integer, std::move(w).take());
  }
  static Value tree(const PosTree& t) {
    return Value(value_type_of(t.kind), Bytes(t.root.view().begin(), t.root.view().end()));
  }

  /// Rebuilds a value from its meta-chunk representation.
  static Value decode(ValueType type, ByteView data) {
    if (!valid_value_type(static_cast<std::uint8_t>(type))) throw Error(ErrorCode::Corrupt, "bad value type");
    if (type == ValueType::Integer && data.size() != 8) throw Error(ErrorCode::Corrupt, "integer must be 8 bytes");
    if (is_chunkable(type) && data.size() != Cid::kSize) throw Error(ErrorCode::Corrupt, "chunkable data must be one cid");
    if (type == ValueType::Tuple) decode_tuple(data);
    return Value(type, Bytes(data.begin(), data.end()));
  }

  ValueType type() const { return type_; }
  bool chunkable() const { return is_chunkable(type_); }
  const Bytes& data() const { return data_; }

  std::string as_string() const {
    expect(ValueType::String);
    return to_string(data_);
  }
  std::vector<Bytes> as_tuple() const {
    expect(ValueType::Tuple);
    return decode_tuple(data_);
  }
  std::int64_t as_integer() const {
    expect(ValueType::Integer);
    ByteReader r(data_);
    return r.i64();
  }
  PosTree as_tree() const {
    if (!chunkable()) throw Error(ErrorCode::TypeMismatch, std::string(value_type_name(type_)) + " has no tree");
    return PosTree{tree_kind_of(type_), Cid::from_view(data_)};
  }

  bool operator==(const Value&) const = default;

 private:
  Value(ValueType t, Bytes d) : type_(t), data_(std::move(d)) {}

  void expect(ValueType t) const {
    if (type_ != t)
      throw Error(ErrorCode::TypeMismatch,
                  "expected " + std::string(value_type_name(t)) + ", found " + std::string(value_type_name(type_)));
  }

  ValueType type_ = ValueType::String;
  Bytes data_;
};

// ---- primitive operations (pure; persisted only by a later commit) --------------

inline Value string_append(const Value& v, std::string_view s) { return Value::string(v.as_string() + std::string(s)); }

inline Value string_insert(const Value& v, std::size_t pos, std::string_view s) {
  std::string cur = v.as_string();
  if (pos > cur.size()) throw Error(ErrorCode::OutOfRange, "insert position past end of string");
  cur.insert(pos, s);
  return Value::string(cur);
}

inline Value tuple_append(const Value& v, ByteView field) {
  auto f = v.as_tuple();
  f.emplace_back(field.begin(), field.end());
  return Value::tuple(f);
}

inline Value tuple_insert(const Value& v, std::size_t pos, ByteView field) {
  auto f = v.as_tuple();
  if (pos > f.size()) throw Error(ErrorCode::OutOfRange, "insert position past end of tuple");
  f.insert(f.begin() + static_cast<std::ptrdiff_t>(pos), Bytes(field.begin(), field.end()));
  return Value::tuple(f);
}

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorCode::Overflow, "integer addition overflows");
  return r;
}

inline std::int64_t checked_sub(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_sub_overflow(a, b, &r)) throw Error(ErrorCode::Overflow, "integer subtraction overflows");
  return r;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorCode::Overflow, "integer multiplication overflows");
  return r;
}

inline Value integer_add(const Value& v, std::int64_t d) { return Value::integer(checked_add(v.as_integer(), d)); }
inline Value integer_multiply(const Value& v, std::int64_t f) { return Value::integer(checked_mul(v.as_integer(), f)); }

}  // namespace forkstore
