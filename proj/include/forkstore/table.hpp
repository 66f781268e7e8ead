#pragma once

#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forkstore/database.hpp"

namespace forkstore {

using CsvRow = std::vector<std::string>;

/// Comma-separated values with double-quote escaping. Accepts LF or CRLF.
inline std::vector<CsvRow> parse_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::InvalidArgument, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string csv_escape(const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string write_csv(const std::vector<CsvRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(r[i]);
    }
    out += '\n';
  }
  return out;
}

enum class TableLayout { Row, Column };

inline TableLayout parse_layout(std::string_view s) {
  if (s == "row") return TableLayout::Row;
  if (s == "column") return TableLayout::Column;
  throw Error(ErrorCode::InvalidArgument, "layout must be 'row' or 'column'");
}

/// Stored in the version's context so exports know how to read the value.
struct TableSchema {
  TableLayout layout = TableLayout::Row;
  std::vector<std::string> columns;
  std::string primary_key;

  Bytes encode() const {
    nlohmann::json j{{"layout", layout == TableLayout::Row ? "row" : "column"},
                     {"columns", columns},
                     {"primary_key", primary_key}};
    return to_bytes(j.dump());
  }

  static TableSchema decode(ByteView b) {
    try {
      auto j = nlohmann::json::parse(to_string(b));
      TableSchema s;
      s.layout = parse_layout(j.at("layout").get<std::string>());
      s.columns = j.at("columns").get<std::vector<std::string>>();
      s.primary_key = j.at("primary_key").get<std::string>();
      return s;
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::TypeMismatch, "version does not hold a table");
    }
  }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw Error(ErrorCode::InvalidArgument, "no column named '" + name + "'");
  }
};

/// Row layout: Map primary key → Tuple of all fields.
/// Column layout: Map column name → cid of a List holding that column, rows
/// ordered by primary key.
inline Uid import_table(Database& db, const std::string& key, const std::string& branch, std::string_view csv,
                        const std::string& primary_key, TableLayout layout) {
  auto rows = parse_csv(csv);
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "CSV has no header row");
  TableSchema schema{layout, rows[0], primary_key};
  const std::size_t pk = schema.column_index(primary_key);
  std::map<Bytes, const CsvRow*, BytesLess> ordered;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != schema.columns.size())
      throw Error(ErrorCode::InvalidArgument, "row " + std::to_string(i + 1) + " has " +
                                                  std::to_string(rows[i].size()) + " fields, expected " +
                                                  std::to_string(schema.columns.size()));
    if (!ordered.emplace(to_bytes(rows[i][pk]), &rows[i]).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate primary key '" + rows[i][pk] + "'");
  }
  ChunkStore& store = db.store_for(key);
  PosTree root;
  if (layout == TableLayout::Row) {
    TreeBuilder b(store, db.chunker(), TreeKind::Map);
    for (const auto& [k, r] : ordered) {
      std::vector<Bytes> fields;
      for (const auto& f : *r) fields.push_back(to_bytes(f));
      b.add(encode_map_element(k, encode_tuple(fields)));
    }
    root = b.finish();
  } else {
    FlatMap cols;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      TreeBuilder b(store, db.chunker(), TreeKind::List);
      for (const auto& [k, r] : ordered) b.add(encode_list_element(as_view((*r)[c])));
      const Cid root_cid = b.finish().root;
      cols[to_bytes(schema.columns[c])] = Bytes(root_cid.view().begin(), root_cid.view().end());
    }
    root = build_map(store, db.chunker(), cols);
  }
  return db.put(key, branch, Value::tree(root), std::nullopt, schema.encode());
}

inline std::vector<CsvRow> table_rows(const ChunkStore& store, const FObject& o) {
  TableSchema s = TableSchema::decode(o.context);
  std::vector<CsvRow> out{s.columns};
  if (s.layout == TableLayout::Row) {
    for (const auto& [k, v] : read_map(store, o.tree())) {
      CsvRow r;
      for (const auto& f : decode_tuple(v)) r.push_back(to_string(f));
      out.push_back(std::move(r));
    }
    return out;
  }
  std::vector<std::vector<Bytes>> cols;
  for (const auto& name : s.columns) {
    auto root = map_get(store, o.tree(), as_view(name));
    if (!root) throw Error(ErrorCode::Corrupt, "column '" + name + "' missing");
    cols.push_back(read_list(store, PosTree{TreeKind::List, Cid::from_view(*root)}));
  }
  const std::size_t n = cols.empty() ? 0 : cols[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    CsvRow r;
    for (const auto& c : cols) r.push_back(to_string(c.at(i)));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string export_table(const ChunkStore& store, const FObject& o) { return write_csv(table_rows(store, o)); }

struct ColumnSum {
  double sum = 0;
  std::uint64_t rows = 0;
};

inline double parse_number(ByteView field) {
  std::string s = to_string(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw Error(ErrorCode::InvalidArgument, "'" + s + "' is not a number");
  return v;
}

/// Sums a numeric column. The column layout reads only that column's chunks.
inline ColumnSum sum_column(const ChunkStore& store, const FObject& o, const std::string& column) {
  TableSchema s = TableSchema::decode(o.context);
  const std::size_t idx = s.column_index(column);
  ColumnSum out;
  if (s.layout == TableLayout::Row) {
    for (ElementIterator it = iterate(store, o.tree()); it.valid(); it.next()) {
      MapEntryView e = decode_map_element(it.element());
      ByteReader r(e.value);
      const std::uint32_t n = r.u32();
      if (idx >= n) throw Error(ErrorCode::Corrupt, "short row");
      for (std::size_t i = 0; i < idx; ++i) r.blob();
      out.sum += parse_number(r.blob());
      ++out.rows;
    }
    return out;
  }
  auto root = map_get(store, o.tree(), as_view(column));
  if (!root) throw Error(ErrorCode::Corrupt, "column '" + column + "' missing");
  PosTree list{TreeKind::List, Cid::from_view(*root)};
  for (ElementIterator it = iterate(store, list); it.valid(); it.next()) {
    out.sum += parse_number(decode_list_element(it.element()));
    ++out.rows;
  }
  return out;
}

}  // namespace forkstore
