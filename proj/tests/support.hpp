#pragma once

// Independent oracles and fixtures shared by the unit tests and the
// acceptance binary. Nothing here calls into the code paths it checks.

#include <algorithm>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "forkstore/forkstore.hpp"

namespace fs_test {

using namespace forkstore;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("forkstore-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::uint64_t splitmix64_next(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl_bits(std::uint64_t v, unsigned n, unsigned bits) {
  const std::uint64_t mask = bits == 64 ? ~0ULL : ((1ULL << bits) - 1);
  n %= bits;
  v &= mask;
  if (n == 0) return v;
  return ((v << n) | (v >> (bits - n))) & mask;
}

/// Direct evaluation of the cyclic polynomial over window[0..k):
/// XOR over i of s^(k-1-i)(h(window[i])), everything in q bits.
inline std::uint64_t cyclic_poly_direct(const std::uint8_t* window, unsigned k, unsigned q,
                                        const std::array<std::uint64_t, 256>& h) {
  const std::uint64_t mask = q == 64 ? ~0ULL : ((1ULL << q) - 1);
  std::uint64_t v = 0;
  for (unsigned i = 0; i < k; ++i) v ^= rotl_bits(h[window[i]] & mask, k - 1 - i, q);
  return v;
}

inline std::array<std::uint64_t, 256> oracle_substitution_table(std::uint64_t seed) {
  std::array<std::uint64_t, 256> t{};
  std::uint64_t x = seed;
  for (auto& v : t) v = splitmix64_next(x);
  return t;
}

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& c : b) c = static_cast<std::uint8_t>(rng());
  return b;
}

inline Bytes b(const std::string& s) { return to_bytes(s); }

// ---- DAG oracle --------------------------------------------------------------

/// A random derivation DAG over nodes 0..n-1; node i's bases are earlier nodes.
struct Dag {
  std::vector<std::vector<int>> bases;
  std::vector<std::uint64_t> depth;
  std::vector<Uid> ids;

  static Dag random(std::mt19937_64& rng, int n, double root_prob = 0.02) {
    Dag d;
    d.bases.resize(n);
    d.depth.assign(n, 0);
    for (int i = 0; i < n; ++i) {
      d.ids.push_back(digest_of(to_bytes("node" + std::to_string(i) + "/" + std::to_string(rng()))));
      if (i == 0 || std::uniform_real_distribution<double>(0, 1)(rng) < root_prob) continue;
      const int nb = 1 + (rng() % 4 == 0 ? 1 : 0);
      for (int j = 0; j < nb; ++j) {
        // Prefer recent nodes so chains get long.
        const int span = std::min(i, 1 + static_cast<int>(rng() % 40));
        int p = i - 1 - static_cast<int>(rng() % span);
        if (std::find(d.bases[i].begin(), d.bases[i].end(), p) == d.bases[i].end()) d.bases[i].push_back(p);
      }
      for (int p : d.bases[i]) d.depth[i] = std::max(d.depth[i], d.depth[p] + 1);
    }
    return d;
  }

  /// Ancestor sets (inclusive) by brute force.
  std::vector<std::vector<bool>> ancestors() const {
    const int n = static_cast<int>(bases.size());
    std::vector<std::vector<bool>> anc(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) {
      anc[i][i] = true;
      for (int p : bases[i])
        for (int j = 0; j < n; ++j)
          if (anc[p][j]) anc[i][j] = true;
    }
    return anc;
  }

  /// Lowest common ancestors: common ancestors that are not a proper
  /// ancestor of another common ancestor.
  std::vector<int> lowest_common(const std::vector<std::vector<bool>>& anc, int a, int b) const {
    const int n = static_cast<int>(bases.size());
    std::vector<int> common;
    for (int j = 0; j < n; ++j)
      if (anc[a][j] && anc[b][j]) common.push_back(j);
    std::vector<int> lowest;
    for (int c : common) {
      bool dominated = false;
      for (int o : common)
        if (o != c && anc[o][c]) dominated = true;
      if (!dominated) lowest.push_back(c);
    }
    return lowest;
  }
};

// ---- conformance transcript ---------------------------------------------------

/// Runs every facade operation (M1–M17) plus their error paths and records
/// the observable results. Two databases agree iff the transcripts match.
inline std::vector<std::string> conformance_transcript(Database& db) {
  std::vector<std::string> log;
  auto rec = [&](const std::string& s) { log.push_back(s); };
  auto guard = [&](const std::string& what, auto&& fn) {
    try {
      fn();
      rec(what + " ok");
    } catch (const MergeConflictError& e) {
      rec(what + " " + std::string(error_code_name(e.code())) + " conflicts=" + std::to_string(e.conflicts().size()));
    } catch (const Error& e) {
      rec(what + " " + std::string(error_code_name(e.code())));
    }
  };
  auto obj = [&](const FObject& o) {
    std::ostringstream s;
    s << o.key << " " << value_type_name(o.type) << " d" << o.depth << " n" << o.bases.size() << " "
      << to_hex(o.data);
    return s.str();
  };

  // Error surface on an empty store.
  Uid nowhere = digest_of(b("nowhere"));
  guard("M1 empty", [&] { db.get("k", "master"); });
  guard("M2 empty", [&] { db.get("k", nowhere); });
  guard("M5 empty", [&] { db.merge("k", "master", "dev"); });
  guard("M6 empty", [&] { db.merge("k", "master", nowhere); });
  guard("M7 empty", [&] { db.merge("k", std::vector<Uid>{nowhere, nowhere}); });
  guard("M9 empty", [&] { rec(std::to_string(db.list_tagged("k").size())); });
  guard("M10 empty", [&] { rec(std::to_string(db.list_untagged("k").size())); });
  guard("M11 empty", [&] { db.fork("k", "master", "dev"); });
  guard("M12 empty", [&] { db.fork("k", nowhere, "dev"); });
  guard("M13 empty", [&] { db.rename("k", "master", "x"); });
  guard("M14 empty", [&] { db.remove("k", "master"); });
  guard("M15 empty", [&] { db.track("k", "master", 0, 5); });
  guard("M16 empty", [&] { db.track("k", nowhere, 0, 5); });
  guard("M17 empty", [&] { db.lca("k", nowhere, nowhere); });

  // M3 / M1 across value types.
  Uid s1 = db.put("str", Value::string("hello"));
  rec("M3 " + s1.hex());
  Uid s2 = db.put("str", "master", string_append(db.get("str").value(), " world"));
  rec("M3 " + s2.hex());
  rec("M1 " + obj(db.get("str", "master")));
  rec("M2 " + obj(db.get("str", s1)));
  guard("M3 guard stale", [&] { db.put("str", "master", Value::string("x"), s1); });
  guard("M3 guard ok", [&] { rec(db.put("str", "master", Value::string("guarded"), s2).hex()); });
  guard("M3 missing branch", [&] { db.put("str", "nope", Value::string("x")); });
  guard("M2 other key", [&] { db.get("other", s1); });
  rec("int " + db.put("n", Value::integer(5)).hex());
  rec("tuple " + db.put("t", Value::tuple({b("a"), b("b")})).hex());

  std::string text;
  for (int i = 0; i < 3000; ++i) text += "row " + std::to_string(i) + " of a long blob\n";
  Uid b1 = db.put("blob", db.make_blob(as_view(text), "blob"));
  rec("blob " + b1.hex());
  std::vector<Bytes> items;
  for (int i = 0; i < 2000; ++i) items.push_back(b("item" + std::to_string(i)));
  rec("list " + db.put("list", db.make_list(items, "list")).hex());
  rec("set " + db.put("set", db.make_set(items, "set")).hex());
  FlatMap m;
  for (int i = 0; i < 2000; ++i) m[b("k" + std::to_string(i))] = b("v" + std::to_string(i));
  Uid m1 = db.put("map", db.make_map(m, "map"));
  rec("map " + m1.hex());
  rec("read blob " + std::to_string(db.read_blob(db.get("blob")).size()));
  rec("read map " + std::to_string(db.read_map(db.get("map")).size()));

  // M11 / M12 / M13 / M14.
  db.fork("blob", "master", "dev");
  guard("M11 exists", [&] { db.fork("blob", "master", "dev"); });
  db.fork("blob", b1, "snap");
  guard("M12 other key", [&] { db.fork("blob", m1, "bad"); });
  {
    TreeEditor ed(db, db.get("blob", "dev"));
    ed.blob_remove(0, 10).blob_append(as_view(std::string("tail")));
    rec("dev " + db.put("blob", "dev", ed.finish()).hex());
  }
  {
    TreeEditor ed(db, db.get("blob", "master"));
    ed.blob_insert(5000, as_view(std::string("MASTER")));
    rec("master " + db.put("blob", "master", ed.finish()).hex());
  }
  db.rename("blob", "snap", "snapshot");
  guard("M13 missing", [&] { db.rename("blob", "snap", "x"); });
  db.remove("blob", "snapshot");
  guard("M14 missing", [&] { db.remove("blob", "snapshot"); });
  for (const auto& [n, u] : db.list_tagged("blob")) rec("M9 " + n + " " + u.hex());

  // M5 / M6 / M17.
  const Uid dev = db.list_tagged("blob").at("dev");
  const Uid master = db.list_tagged("blob").at("master");
  rec("M17 " + db.lca("blob", dev, master).value().hex());
  Uid merged = db.merge("blob", "master", "dev");
  rec("M5 " + merged.hex());
  rec("M5 value " + to_hex(digest_of(db.read_blob(db.get("blob"))).view()));
  {
    TreeEditor ed(db, db.get("map"));
    ed.map_put(as_view("k1"), as_view("left"));
    db.fork("map", "master", "side");
    db.put("map", ed.finish());
    TreeEditor ed2(db, db.get("map", "side"));
    ed2.map_put(as_view("k1"), as_view("right"));
    Uid side = db.put("map", "side", ed2.finish());
    guard("M6 conflict", [&] { db.merge("map", "master", side); });
    rec("M6 choose " + db.merge("map", "master", side, Resolver::choose(2)).hex());
    rec("M6 value " + to_string(*map_get(db.store_for("map"), db.get("map").tree(), as_view("k1"))));
  }

  // M4 / M10 / M7.
  Uid u1 = db.put("counter", std::optional<Uid>{}, Value::integer(1));
  Uid u2 = db.put("counter", u1, Value::integer(2));
  Uid u3 = db.put("counter", u1, Value::integer(3));
  std::vector<Uid> ub = db.list_untagged("counter");
  for (const auto& u : ub) rec("M10 " + u.hex());
  guard("M7 conflict", [&] { db.merge("counter", std::vector<Uid>{u2, u3}); });
  Uid u4 = db.merge("counter", std::vector<Uid>{u2, u3}, Resolver::aggregate());
  rec("M7 " + u4.hex() + " " + std::to_string(db.get("counter", u4).value().as_integer()));
  rec("M10 after " + std::to_string(db.list_untagged("counter").size()));
  guard("M4 type mismatch", [&] { db.put("counter", u4, Value::string("x")); });

  // M15 / M16.
  for (const auto& e : db.track("blob", "master", 0, 100)) rec("M15 " + std::to_string(e.distance) + " " + e.uid.hex());
  for (const auto& e : db.track("counter", u4, 1, 2)) rec("M16 " + std::to_string(e.distance) + " " + e.uid.hex());
  guard("M15 bad range", [&] { db.track("blob", "master", 3, 1); });

  // M8.
  for (const auto& k : db.list_keys()) rec("M8 " + k);

  // diff and verification.
  VersionDiff d = db.diff(b1, db.list_tagged("blob").at("dev"));
  rec("diff ranges " + std::to_string(d.tree.ranges.size()));
  rec("verify " + obj(db.verify(merged, 10, true)));
  return log;
}

}  // namespace fs_test
