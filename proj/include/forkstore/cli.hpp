#pragma once

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "forkstore/bench.hpp"
#include "forkstore/cluster/tcp.hpp"
#include "forkstore/engine.hpp"
#include "forkstore/table.hpp"

namespace forkstore::cli {

// Exit status: 0 on success, the ErrorCode value for engine errors, 64 for
// usage errors and 70 for anything unexpected.
inline constexpr int kUsageExit = 64;
inline constexpr int kInternalExit = 70;

namespace detail {

inline std::string read_stream(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path);
  return read_stream(f);
}

inline std::vector<Bytes> split_lines(const std::string& s) {
  std::vector<Bytes> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(to_bytes(line));
  }
  return out;
}

inline std::int64_t parse_int(const std::string& s) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw Error(ErrorCode::InvalidArgument, "'" + s + "' is not a 64-bit integer");
  return v;
}

inline Uid parse_uid(const std::string& s) {
  try {
    return Cid::from_hex(s);
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidArgument, "'" + s + "' is not a uid (64 hex digits)");
  }
}

/// Builds a value of `type` from raw input. Collections take one element per
/// line; maps take `key<TAB>value` lines.
inline Value make_value(Database& db, const std::string& key, ValueType type, const std::string& raw) {
  switch (type) {
    case ValueType::String: return Value::string(raw);
    case ValueType::Integer: {
      std::string t = raw;
      while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
      return Value::integer(parse_int(t));
    }
    case ValueType::Tuple: return Value::tuple(split_lines(raw));
    case ValueType::Blob: return db.make_blob(as_view(raw), key);
    case ValueType::List: return db.make_list(split_lines(raw), key);
    case ValueType::Set: return db.make_set(split_lines(raw), key);
    case ValueType::Map: {
      FlatMap m;
      for (const auto& line : split_lines(raw)) {
        std::string l = to_string(line);
        const auto tab = l.find('\t');
        if (tab == std::string::npos) throw Error(ErrorCode::InvalidArgument, "map line without a tab: " + l);
        m[to_bytes(l.substr(0, tab))] = to_bytes(l.substr(tab + 1));
      }
      return db.make_map(m, key);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown value type");
}

inline Uid uid_of(Database& db, const FObject& o) { return compute_cid(o.to_chunk(), db.chunk_store().digest()); }

inline std::string render_text(Database& db, const FObject& o) {
  const Value v = o.value();
  std::string out;
  auto lines = [&](const std::vector<Bytes>& xs) {
    for (const auto& x : xs) out += to_string(x) + "\n";
  };
  switch (o.type) {
    case ValueType::String: return v.as_string();
    case ValueType::Integer: return std::to_string(v.as_integer()) + "\n";
    case ValueType::Tuple: lines(v.as_tuple()); break;
    case ValueType::Blob: return to_string(db.read_blob(o));
    case ValueType::List: lines(db.read_list(o)); break;
    case ValueType::Set: lines(db.read_set(o)); break;
    case ValueType::Map:
      for (const auto& [k, val] : db.read_map(o)) out += to_string(k) + "\t" + to_string(val) + "\n";
      break;
  }
  return out;
}

inline nlohmann::json strings(const std::vector<Bytes>& xs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& x : xs) a.push_back(to_string(x));
  return a;
}

inline nlohmann::json render_json(Database& db, const FObject& o) {
  nlohmann::json j{{"key", o.key},
                   {"uid", uid_of(db, o).hex()},
                   {"type", std::string(value_type_name(o.type))},
                   {"depth", o.depth}};
  nlohmann::json bases = nlohmann::json::array();
  for (const auto& b : o.bases) bases.push_back(b.hex());
  j["bases"] = bases;
  if (!o.context.empty()) j["context"] = to_string(o.context);
  const Value v = o.value();
  switch (o.type) {
    case ValueType::String: j["value"] = v.as_string(); break;
    case ValueType::Integer: j["value"] = v.as_integer(); break;
    case ValueType::Tuple: j["value"] = strings(v.as_tuple()); break;
    case ValueType::Blob: j["value"] = to_string(db.read_blob(o)); break;
    case ValueType::List: j["value"] = strings(db.read_list(o)); break;
    case ValueType::Set: j["value"] = strings(db.read_set(o)); break;
    case ValueType::Map: {
      nlohmann::json m = nlohmann::json::object();
      for (const auto& [k, val] : db.read_map(o)) m[to_string(k)] = to_string(val);
      j["value"] = m;
      break;
    }
  }
  return j;
}

inline std::string dump(const nlohmann::json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

inline nlohmann::json conflict_json(const Conflict& c) {
  return {{"kind", std::string(conflict_kind_name(c.kind))},
          {"type", std::string(value_type_name(c.value_type))},
          {"key", to_string(c.key)},
          {"begin", c.begin},
          {"end", c.end},
          {"base", strings(c.base)},
          {"side1", strings(c.side1)},
          {"side2", strings(c.side2)}};
}

inline nlohmann::json diff_json(const VersionDiff& d) {
  nlohmann::json recs = nlohmann::json::array();
  if (!is_chunkable(d.type)) {
    if (d.value_changed) recs.push_back({{"op", "changed"}});
    return recs;
  }
  static constexpr const char* kOps[] = {"", "added", "removed", "changed"};
  for (const auto& k : d.tree.keys)
    recs.push_back({{"op", kOps[static_cast<int>(k.op)]},
                    {"key", to_string(k.key)},
                    {"before", to_string(k.before)},
                    {"after", to_string(k.after)}});
  for (const auto& g : d.tree.ranges) {
    nlohmann::json r{{"op", "range"}, {"a_begin", g.a_begin}, {"a_end", g.a_end}, {"b_begin", g.b_begin},
                     {"b_end", g.b_end}};
    if (d.type == ValueType::Blob) {
      r["removed"] = to_string(g.removed_bytes);
      r["inserted"] = to_string(g.inserted_bytes);
    } else {
      r["removed"] = strings(g.removed);
      r["inserted"] = strings(g.inserted);
    }
    recs.push_back(r);
  }
  return recs;
}

inline std::string diff_text(const VersionDiff& d) {
  std::ostringstream out;
  if (!is_chunkable(d.type)) {
    if (d.value_changed) out << "changed " << to_hex(d.before.data()) << " -> " << to_hex(d.after.data()) << "\n";
    return out.str();
  }
  for (const auto& k : d.tree.keys) {
    const char op = k.op == DiffOp::Added ? '+' : k.op == DiffOp::Removed ? '-' : '~';
    out << op << ' ' << to_string(k.key);
    if (d.type == ValueType::Map) out << '\t' << to_string(k.before) << " -> " << to_string(k.after);
    out << "\n";
  }
  for (const auto& g : d.tree.ranges) {
    const std::size_t removed = d.type == ValueType::Blob ? g.removed_bytes.size() : g.removed.size();
    const std::size_t inserted = d.type == ValueType::Blob ? g.inserted_bytes.size() : g.inserted.size();
    out << "range [" << g.a_begin << "," << g.a_end << ") -> [" << g.b_begin << "," << g.b_end << ") -" << removed
        << " +" << inserted << "\n";
  }
  return out.str();
}

}  // namespace detail

/// Runs one command line (without the program name). Never throws.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Versioned, forkable key-value storage engine"};
  app.require_subcommand(1);

  const char* env_store = std::getenv("FORKSTORE_PATH");
  std::string store_path = env_store && *env_store ? env_store : "forkstore-data";
  std::string cluster_path = cluster::ClusterConfig::env_path().value_or("");
  bool as_json = false;
  std::uint64_t chunk_bytes = 0, index_chunk_bytes = 0;
  double alpha = 0;
  std::uint32_t window = 0;
  std::string digest;
  app.add_option("--store", store_path, "Store directory (env FORKSTORE_PATH)");
  app.add_option("--cluster", cluster_path, "Cluster config file (env FORKSTORE_CLUSTER)");
  app.add_flag("--json", as_json, "Machine-readable output");
  app.add_option("--chunk-bytes", chunk_bytes, "Target leaf chunk size for a new store");
  app.add_option("--index-chunk-bytes", index_chunk_bytes, "Target index chunk size for a new store");
  app.add_option("--alpha", alpha, "Forced-split factor for a new store");
  app.add_option("--window", window, "Rolling hash window for a new store");
  app.add_option("--digest", digest, "sha256 or blake2s, for a new store");

  std::unique_ptr<Database> db_holder;
  auto requested = [&]() -> std::optional<EngineConfig> {
    if (!chunk_bytes && !index_chunk_bytes && alpha == 0 && window == 0 && digest.empty()) return std::nullopt;
    EngineConfig c;
    c.chunker = ChunkerConfig::make(chunk_bytes ? chunk_bytes : 4096, index_chunk_bytes ? index_chunk_bytes : 4096,
                                    alpha > 0 ? alpha : 8.0, window ? window : 32);
    if (!digest.empty()) c.digest = parse_digest(digest);
    return c;
  };
  auto db = [&]() -> Database& {
    if (!db_holder) {
      if (!cluster_path.empty())
        db_holder = cluster::connect_cluster(cluster::ClusterConfig::load(cluster_path));
      else
        db_holder = Engine::open(store_path, requested());
    }
    return *db_holder;
  };
  auto print_uid = [&](const Uid& u) {
    if (as_json)
      out << detail::dump({{"uid", u.hex()}});
    else
      out << u.hex() << "\n";
  };

  std::function<void()> action;

  // put
  std::string key, branch, uid_s, file, value_s, type_s = "blob", guard_s, context_s;
  bool untagged = false;
  auto* put = app.add_subcommand("put", "Store a new version (M3, or M4 with --uid/--untagged)");
  put->add_option("key", key)->required();
  put->add_option("--branch", branch, "Branch to advance (default branch if omitted)");
  put->add_option("--uid", uid_s, "Base version for an untagged put");
  put->add_flag("--untagged", untagged, "Untagged put; without --uid the version has no base");
  put->add_option("--file", file, "Read the value from a file ('-' for stdin)");
  put->add_option("--value", value_s, "Value given inline");
  put->add_option("--type", type_s, "blob, string, integer, tuple, list, set or map");
  put->add_option("--guard", guard_s, "Expected current head (guarded put)");
  put->add_option("--context", context_s, "Application context stored with the version");
  put->callback([&] {
    action = [&] {
      Database& d = db();
      std::string raw;
      if (!value_s.empty() && !file.empty()) throw Error(ErrorCode::InvalidArgument, "give either --value or --file");
      if (!value_s.empty())
        raw = value_s;
      else if (file.empty() || file == "-")
        raw = detail::read_stream(in);
      else
        raw = detail::read_file(file);
      const Value v = detail::make_value(d, key, parse_value_type(type_s), raw);
      if (untagged || !uid_s.empty()) {
        if (!branch.empty()) throw Error(ErrorCode::InvalidArgument, "--branch cannot be combined with --uid/--untagged");
        std::optional<Uid> base;
        if (!uid_s.empty()) base = detail::parse_uid(uid_s);
        print_uid(d.put(key, base, v, as_view(context_s)));
      } else {
        std::optional<Uid> guard;
        if (!guard_s.empty()) guard = detail::parse_uid(guard_s);
        print_uid(d.put(key, branch.empty() ? d.default_branch() : branch, v, guard, as_view(context_s)));
      }
    };
  });

  // get
  std::uint64_t verify_depth = 0;
  bool verify = false, deep = false;
  auto* get = app.add_subcommand("get", "Read a version (M1 by branch, M2 by uid)");
  get->add_option("key", key)->required();
  get->add_option("--branch", branch);
  get->add_option("--uid", uid_s);
  get->add_flag("--verify", verify, "Re-hash the version and its ancestors");
  get->add_option("--depth", verify_depth, "Ancestor depth checked by --verify");
  get->add_flag("--deep", deep, "With --verify, re-hash value trees too");
  get->callback([&] {
    action = [&] {
      Database& d = db();
      FObject o = uid_s.empty() ? d.get(key, branch.empty() ? d.default_branch() : branch)
                                : d.get(key, detail::parse_uid(uid_s));
      if (verify) o = d.verify(detail::uid_of(d, o), verify_depth, deep);
      if (as_json)
        out << detail::dump(detail::render_json(d, o));
      else
        out << detail::render_text(d, o);
    };
  });

  // fork
  std::string ref, new_name;
  bool ref_is_uid = false;
  auto* fork = app.add_subcommand("fork", "Create a branch (M11 from a branch, M12 with --uid)");
  fork->add_option("key", key)->required();
  fork->add_option("ref", ref, "Source branch, or uid with --uid")->required();
  fork->add_option("new", new_name)->required();
  fork->add_flag("--uid", ref_is_uid, "Treat ref as a version uid");
  fork->callback([&] {
    action = [&] {
      if (ref_is_uid)
        db().fork(key, detail::parse_uid(ref), new_name);
      else
        db().fork(key, ref, new_name);
      if (as_json) out << detail::dump({{"branch", new_name}});
    };
  });

  // merge
  std::string target, resolver_s;
  std::vector<std::string> uids;
  auto* merge = app.add_subcommand("merge", "Merge (M5 branches, M6 --uid ref, M7 --uids)");
  merge->add_option("key", key)->required();
  merge->add_option("target", target, "Target branch");
  merge->add_option("ref", ref, "Reference branch, or uid with --uid");
  merge->add_flag("--uid", ref_is_uid, "Treat ref as a version uid");
  merge->add_option("--uids", uids, "Merge these versions into one untagged version");
  merge->add_option("--resolver", resolver_s, "append, aggregate, choose-one:1, choose-one:2 or custom:NAME");
  merge->callback([&] {
    action = [&] {
      const Resolver r = Resolver::parse(resolver_s);
      if (!uids.empty()) {
        if (!target.empty()) throw Error(ErrorCode::InvalidArgument, "--uids takes no target branch");
        std::vector<Uid> us;
        for (const auto& s : uids) us.push_back(detail::parse_uid(s));
        print_uid(db().merge(key, us, r));
        return;
      }
      if (target.empty() || ref.empty()) throw Error(ErrorCode::InvalidArgument, "merge needs TARGET and REF, or --uids");
      print_uid(ref_is_uid ? db().merge(key, target, detail::parse_uid(ref), r) : db().merge(key, target, ref, r));
    };
  });

  // branch
  auto* br = app.add_subcommand("branch", "Branch tables (M8, M9, M10, M13, M14)");
  br->require_subcommand(1);
  auto* br_list = br->add_subcommand("list", "Named branches and untagged heads of a key");
  br_list->add_option("key", key)->required();
  br_list->callback([&] {
    action = [&] {
      Database& d = db();
      auto tb = d.list_tagged(key);
      auto ub = d.list_untagged(key);
      if (as_json) {
        nlohmann::json t = nlohmann::json::object(), u = nlohmann::json::array();
        for (const auto& [n, id] : tb) t[n] = id.hex();
        for (const auto& id : ub) u.push_back(id.hex());
        out << detail::dump({{"tagged", t}, {"untagged", u}});
        return;
      }
      for (const auto& [n, id] : tb) out << n << "\t" << id.hex() << "\n";
      for (const auto& id : ub) out << "(untagged)\t" << id.hex() << "\n";
    };
  });
  auto* br_keys = br->add_subcommand("keys", "All keys");
  br_keys->callback([&] {
    action = [&] {
      auto ks = db().list_keys();
      if (as_json)
        out << detail::dump(ks);
      else
        for (const auto& k : ks) out << k << "\n";
    };
  });
  std::string old_name;
  auto* br_rename = br->add_subcommand("rename", "Rename a branch");
  br_rename->add_option("key", key)->required();
  br_rename->add_option("old", old_name)->required();
  br_rename->add_option("new", new_name)->required();
  br_rename->callback([&] { action = [&] { db().rename(key, old_name, new_name); }; });
  auto* br_remove = br->add_subcommand("remove", "Delete a branch");
  br_remove->add_option("key", key)->required();
  br_remove->add_option("name", old_name)->required();
  br_remove->callback([&] { action = [&] { db().remove(key, old_name); }; });

  // track
  std::uint64_t lo = 0, hi = 1000000;
  auto* track = app.add_subcommand("track", "Versions at distance [from, to] (M15, M16 with --uid)");
  track->add_option("key", key)->required();
  track->add_option("--branch", branch);
  track->add_option("--uid", uid_s);
  track->add_option("--from", lo);
  track->add_option("--to", hi);
  track->callback([&] {
    action = [&] {
      Database& d = db();
      auto hist = uid_s.empty() ? d.track(key, branch.empty() ? d.default_branch() : branch, lo, hi)
                                : d.track(key, detail::parse_uid(uid_s), lo, hi);
      if (as_json) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& e : hist) {
          nlohmann::json bases = nlohmann::json::array();
          for (const auto& b : e.object.bases) bases.push_back(b.hex());
          a.push_back({{"distance", e.distance}, {"uid", e.uid.hex()}, {"depth", e.object.depth}, {"bases", bases}});
        }
        out << detail::dump(a);
        return;
      }
      for (const auto& e : hist) out << e.distance << "\t" << e.uid.hex() << "\n";
    };
  });

  // diff
  std::string a_s, b_s;
  auto* diff = app.add_subcommand("diff", "Differences between two versions of a key");
  diff->add_option("key", key)->required();
  diff->add_option("uid1", a_s)->required();
  diff->add_option("uid2", b_s)->required();
  diff->callback([&] {
    action = [&] {
      Database& d = db();
      const Uid a = detail::parse_uid(a_s), b = detail::parse_uid(b_s);
      d.get(key, a);
      d.get(key, b);
      VersionDiff vd = d.diff(a, b);
      if (as_json)
        out << detail::dump(detail::diff_json(vd));
      else
        out << detail::diff_text(vd);
    };
  });

  // lca
  auto* lca = app.add_subcommand("lca", "Lowest common ancestor of two versions (M17)");
  lca->add_option("key", key)->required();
  lca->add_option("uid1", a_s)->required();
  lca->add_option("uid2", b_s)->required();
  lca->callback([&] {
    action = [&] {
      auto r = db().lca(key, detail::parse_uid(a_s), detail::parse_uid(b_s));
      if (!r) throw Error(ErrorCode::NoCommonAncestor, "versions share no ancestor");
      print_uid(*r);
    };
  });

  // import / export
  std::string pk, layout_s = "row", sum_col;
  auto* imp = app.add_subcommand("import", "Load a CSV relation into a key");
  imp->add_option("key", key)->required();
  imp->add_option("--file", file, "CSV file ('-' for stdin)");
  imp->add_option("--pk", pk, "Primary-key column")->required();
  imp->add_option("--layout", layout_s, "row or column");
  imp->add_option("--branch", branch);
  imp->callback([&] {
    action = [&] {
      Database& d = db();
      const std::string csv = file.empty() || file == "-" ? detail::read_stream(in) : detail::read_file(file);
      print_uid(import_table(d, key, branch.empty() ? d.default_branch() : branch, csv, pk, parse_layout(layout_s)));
    };
  });
  auto* exp = app.add_subcommand("export", "Write a stored relation as CSV");
  exp->add_option("key", key)->required();
  exp->add_option("--branch", branch);
  exp->add_option("--uid", uid_s);
  exp->add_option("--sum", sum_col, "Print the sum of a numeric column instead");
  exp->callback([&] {
    action = [&] {
      Database& d = db();
      FObject o = uid_s.empty() ? d.get(key, branch.empty() ? d.default_branch() : branch)
                                : d.get(key, detail::parse_uid(uid_s));
      if (!sum_col.empty()) {
        ColumnSum s = sum_column(d.store_for(key), o, sum_col);
        if (as_json)
          out << detail::dump({{"column", sum_col}, {"sum", s.sum}, {"rows", s.rows}});
        else
          out << s.sum << "\n";
        return;
      }
      out << export_table(d.store_for(key), o);
    };
  });

  // bench
  bench::Params bp;
  auto* bench_cmd = app.add_subcommand("bench", "Run a seeded benchmark scenario");
  bench_cmd->add_option("scenario", bp.scenario)->required()->check(CLI::IsMember(bench::scenarios()));
  bench_cmd->add_option("--seed", bp.seed);
  bench_cmd->add_option("--clients", bp.clients);
  bench_cmd->add_option("--keys", bp.keys);
  bench_cmd->add_option("--versions", bp.versions);
  bench_cmd->add_option("--ops", bp.ops);
  bench_cmd->add_option("--zipf", bp.zipf);
  bench_cmd->add_option("--update-ratio", bp.update_ratio);
  bench_cmd->add_option("--stores", bp.stores);
  bench_cmd->add_option("--value-bytes", bp.value_bytes);
  bench_cmd->add_option("--append-bytes", bp.append_bytes);
  bench_cmd->add_option("--min-key-exp", bp.min_key_exp);
  bench_cmd->add_option("--max-key-exp", bp.max_key_exp);
  bench_cmd->callback([&] {
    action = [&] {
      if (auto c = requested()) bp.chunker = c->chunker;
      bench::Report r = bench::run(bp);
      if (as_json)
        out << detail::dump(r.json());
      else
        out << r.csv();
    };
  });

  // serve
  std::uint32_t node = 0;
  auto* serve = app.add_subcommand("serve", "Run one cluster node over --store");
  serve->add_option("--node", node, "Index of this node in the cluster config")->required();
  serve->callback([&] {
    action = [&] {
      if (cluster_path.empty()) throw Error(ErrorCode::InvalidArgument, "serve needs --cluster or FORKSTORE_CLUSTER");
      cluster::TcpNode n(cluster::ClusterConfig::load(cluster_path), node, store_path);
      err << "node " << node << " listening on port " << n.port() << std::endl;
      n.run();
    };
  });

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : kUsageExit;
  }

  auto report = [&](ErrorCode code, const std::string& msg, const std::vector<Conflict>* cs) {
    nlohmann::json j{{"error", std::string(error_code_name(code))}, {"code", static_cast<int>(code)}, {"message", msg}};
    if (cs) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& c : *cs) a.push_back(detail::conflict_json(c));
      j["conflicts"] = a;
    }
    err << detail::dump(j);
  };
  try {
    if (action) action();
    if (auto* e = dynamic_cast<Engine*>(db_holder.get())) e->sync();
    return 0;
  } catch (const MergeConflictError& e) {
    report(e.code(), e.what(), &e.conflicts());
    return static_cast<int>(e.code());
  } catch (const Error& e) {
    report(e.code(), e.what(), nullptr);
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << detail::dump({{"error", "Internal"}, {"code", kInternalExit}, {"message", e.what()}});
    return kInternalExit;
  }
}

}  // namespace forkstore::cli
