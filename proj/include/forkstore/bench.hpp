#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "forkstore/cluster/client.hpp"
#include "forkstore/engine.hpp"

namespace forkstore::bench {

/// Discrete Zipf over ranks 0..n-1 with P(k) ∝ 1/(k+1)^s.
class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double s) : cdf_(n) {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "zipf over zero items");
    double sum = 0;
    for (std::size_t k = 0; k < n; ++k) cdf_[k] = sum += 1.0 / std::pow(static_cast<double>(k + 1), s);
    for (auto& c : cdf_) c /= sum;
  }

  template <class Rng>
  std::size_t operator()(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return std::min<std::size_t>(std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin(), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

/// Versioned store that keeps a full copy of every version. The reference
/// point for deduplication numbers.
class FullCopyStore {
 public:
  void put(const std::string& key, Bytes value) {
    std::lock_guard g(mu_);
    bytes_ += value.size();
    versions_[key].push_back(std::move(value));
  }
  std::uint64_t bytes() const {
    std::lock_guard g(mu_);
    return bytes_;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<Bytes>> versions_;
  std::uint64_t bytes_ = 0;
};

struct Params {
  std::string scenario = "micro-ops";
  std::uint64_t seed = 42;
  std::uint32_t clients = 1;
  std::uint32_t keys = 64;
  std::uint32_t versions = 100;
  std::uint64_t ops = 1000;
  double zipf = 0.5;
  double update_ratio = 0.5;
  std::uint32_t stores = 16;
  std::uint64_t value_bytes = 0;   // 0: scenario default
  std::uint64_t append_bytes = 0;  // 0: scenario default
  std::uint32_t min_key_exp = 8;
  std::uint32_t max_key_exp = 15;
  std::optional<ChunkerConfig> chunker;  // unset: scenario default
};

/// Rows of (metric, value) in a fixed order.
struct Report {
  std::string scenario;
  std::vector<std::pair<std::string, double>> rows;

  void add(std::string metric, double v) { rows.emplace_back(std::move(metric), v); }

  double at(const std::string& metric) const {
    for (const auto& [m, v] : rows)
      if (m == metric) return v;
    throw Error(ErrorCode::NotFound, "no metric " + metric);
  }

  std::string csv() const {
    std::ostringstream out;
    out << "scenario,metric,value\n";
    out.precision(10);
    for (const auto& [m, v] : rows) out << scenario << ',' << m << ',' << v << '\n';
    return out.str();
  }

  nlohmann::json json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& [m, v] : rows) rs.push_back({{"metric", m}, {"value", v}});
    return {{"scenario", scenario}, {"rows", rs}};
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (std::size_t i = 0; i < n; i += 8) {
    std::uint64_t x = rng();
    for (std::size_t j = 0; j < 8 && i + j < n; ++j) b[i + j] = static_cast<std::uint8_t>(x >> (8 * j));
  }
  return b;
}

/// Printable text so edits look like page revisions.
inline Bytes random_text(std::mt19937_64& rng, std::size_t n) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz      \n.,";
  Bytes b(n);
  for (auto& c : b) c = static_cast<std::uint8_t>(kAlphabet[rng() % (sizeof kAlphabet - 1)]);
  return b;
}

inline std::string key_name(std::size_t i) { return "k" + std::to_string(i); }

/// Runs `work(w)` for w in [0, clients) on separate threads.
template <class F>
void run_workers(std::uint32_t clients, F&& work) {
  if (clients <= 1) {
    work(0u);
    return;
  }
  std::vector<std::thread> ts;
  for (std::uint32_t w = 0; w < clients; ++w) ts.emplace_back([&, w] { work(w); });
  for (auto& t : ts) t.join();
}

inline std::uint64_t stored_bytes(const ChunkStore& s) { return s.stats().total_payload_bytes; }

}  // namespace detail

/// 100 versions of a 1MB Blob, each appending 1KB.
inline Report dedup_growth(const Params& p) {
  Report rep{"dedup-growth", {}};
  const std::uint64_t base = p.value_bytes ? p.value_bytes : (1u << 20);
  const std::uint64_t step = p.append_bytes ? p.append_bytes : 1024;
  EngineConfig cfg;
  if (p.chunker) cfg.chunker = *p.chunker;
  auto db = Engine::in_memory(cfg);
  FullCopyStore baseline;
  std::mt19937_64 rng(p.seed);
  Bytes content = detail::random_bytes(rng, base);
  const auto t0 = detail::Clock::now();
  db->put("doc", db->make_blob(content));
  baseline.put("doc", content);
  for (std::uint32_t v = 1; v < p.versions; ++v) {
    Bytes extra = detail::random_bytes(rng, step);
    TreeEditor ed(*db, db->get("doc"));
    ed.blob_append(extra);
    db->put("doc", ed.finish());
    content.insert(content.end(), extra.begin(), extra.end());
    baseline.put("doc", content);
  }
  const double ms = detail::ms_since(t0);
  const double engine = static_cast<double>(detail::stored_bytes(db->chunk_store()));
  rep.add("versions", p.versions);
  rep.add("engine_bytes", engine);
  rep.add("baseline_bytes", static_cast<double>(baseline.bytes()));
  rep.add("engine_over_baseline", engine / static_cast<double>(baseline.bytes()));
  rep.add("unique_chunks", static_cast<double>(db->chunk_store().stats().unique_chunk_count));
  rep.add("wall_ms", ms);
  return rep;
}

/// Chunks fetched to track one key's full history, as the number of other
/// keys in the store grows.
inline Report history_track(const Params& p) {
  Report rep{"history-track", {}};
  if (p.min_key_exp > p.max_key_exp || p.max_key_exp > 24)
    throw Error(ErrorCode::InvalidArgument, "key exponent range must satisfy lo <= hi <= 24");
  double lo = 1e300, hi = 0;
  for (std::uint32_t e = p.min_key_exp; e <= p.max_key_exp; ++e) {
    const std::uint64_t total = 1ull << e;
    EngineConfig cfg;
    if (p.chunker) cfg.chunker = *p.chunker;
    auto counting = std::make_shared<CountingChunkStore>(std::make_shared<MemoryChunkStore>(cfg.digest));
    Engine db(counting, std::make_unique<BranchManager>(), cfg);
    std::mt19937_64 rng(p.seed);
    for (std::uint64_t i = 1; i < total; ++i) db.put(detail::key_name(i), Value::string_bytes(detail::random_text(rng, 32)));
    for (std::uint32_t v = 0; v < p.versions; ++v)
      db.put("tracked", Value::string("revision " + std::to_string(v)));
    counting->reset();
    const auto t0 = detail::Clock::now();
    auto hist = db.track("tracked", db.default_branch(), 0, p.versions);
    const double ms = detail::ms_since(t0);
    const double fetched = static_cast<double>(counting->gets());
    lo = std::min(lo, fetched);
    hi = std::max(hi, fetched);
    rep.add("keys_" + std::to_string(total) + "_versions", static_cast<double>(hist.size()));
    rep.add("keys_" + std::to_string(total) + "_chunks_fetched", fetched);
    rep.add("keys_" + std::to_string(total) + "_track_ms", ms);
  }
  rep.add("fetch_spread", hi - lo);
  return rep;
}

struct BalanceResult {
  std::vector<std::uint64_t> store_bytes;  // non-meta payload per store
  double max_over_mean = 0;
};

/// Zipf-distributed writes of fresh random Blobs over an in-process cluster.
inline BalanceResult run_skew(const Params& p, bool one_layer) {
  cluster::LocalCluster::Options o;
  o.nodes = p.stores;
  o.one_layer = one_layer;
  o.engine.chunker = p.chunker ? *p.chunker : ChunkerConfig::make(1024, 1024);
  cluster::LocalCluster lc(o);
  auto client = lc.client();
  const std::uint64_t size = p.value_bytes ? p.value_bytes : 16 * 1024;
  ZipfSampler zipf(p.keys, p.zipf);
  std::mt19937_64 rng(p.seed);
  std::vector<std::vector<std::pair<std::size_t, Bytes>>> per_worker(std::max(1u, p.clients));
  for (std::uint64_t i = 0; i < p.ops; ++i) {
    const std::size_t k = zipf(rng);
    per_worker[k % per_worker.size()].emplace_back(k, detail::random_bytes(rng, size));
  }
  detail::run_workers(static_cast<std::uint32_t>(per_worker.size()), [&](std::uint32_t w) {
    for (auto& [k, data] : per_worker[w]) {
      const std::string key = detail::key_name(k);
      client->put(key, client->make_blob(data, key));
    }
  });
  BalanceResult r;
  double sum = 0, mx = 0;
  for (std::uint32_t i = 0; i < lc.nodes(); ++i) {
    const std::uint64_t b = lc.store(i)->stats().non_meta_payload_bytes();
    r.store_bytes.push_back(b);
    sum += static_cast<double>(b);
    mx = std::max(mx, static_cast<double>(b));
  }
  r.max_over_mean = sum > 0 ? mx / (sum / lc.nodes()) : 0;
  return r;
}

inline Report skew_balance(const Params& p) {
  Report rep{"skew-balance", {}};
  const auto t0 = detail::Clock::now();
  BalanceResult two = run_skew(p, false);
  BalanceResult one = run_skew(p, true);
  rep.add("stores", p.stores);
  rep.add("keys", p.keys);
  rep.add("writes", static_cast<double>(p.ops));
  rep.add("two_layer_max_over_mean", two.max_over_mean);
  rep.add("one_layer_max_over_mean", one.max_over_mean);
  for (std::size_t i = 0; i < two.store_bytes.size(); ++i)
    rep.add("two_layer_store_" + std::to_string(i) + "_bytes", static_cast<double>(two.store_bytes[i]));
  for (std::size_t i = 0; i < one.store_bytes.size(); ++i)
    rep.add("one_layer_store_" + std::to_string(i) + "_bytes", static_cast<double>(one.store_bytes[i]));
  rep.add("wall_ms", detail::ms_since(t0));
  return rep;
}

/// Page edits: each op reads a zipf-chosen page or, with probability
/// `update_ratio`, rewrites a short span of it.
inline Report wiki_edit(const Params& p) {
  Report rep{"wiki-edit", {}};
  const std::uint64_t page = p.value_bytes ? p.value_bytes : 15 * 1024;
  const std::uint64_t edit = p.append_bytes ? p.append_bytes : 128;
  EngineConfig cfg;
  if (p.chunker) cfg.chunker = *p.chunker;
  auto db = Engine::in_memory(cfg);
  FullCopyStore baseline;
  std::mt19937_64 rng(p.seed);
  std::vector<Bytes> pages;
  for (std::uint32_t k = 0; k < p.keys; ++k) {
    pages.push_back(detail::random_text(rng, page));
    db->put(detail::key_name(k), db->make_blob(pages.back()));
    baseline.put(detail::key_name(k), pages.back());
  }
  struct EditOp {
    std::size_t key;
    bool update;
    std::uint64_t pos;
    Bytes text;
  };
  ZipfSampler zipf(p.keys, p.zipf);
  std::vector<std::vector<EditOp>> per_worker(std::max(1u, p.clients));
  std::uint64_t updates = 0;
  for (std::uint64_t i = 0; i < p.ops; ++i) {
    EditOp op{zipf(rng), std::uniform_real_distribution<double>(0, 1)(rng) < p.update_ratio, 0, {}};
    if (op.update) {
      op.pos = rng();
      op.text = detail::random_text(rng, edit);
      ++updates;
    }
    per_worker[op.key % per_worker.size()].push_back(std::move(op));
  }
  const auto t0 = detail::Clock::now();
  detail::run_workers(static_cast<std::uint32_t>(per_worker.size()), [&](std::uint32_t w) {
    for (auto& op : per_worker[w]) {
      const std::string key = detail::key_name(op.key);
      FObject cur = db->get(key);
      if (!op.update) {
        (void)db->read_blob(cur);
        continue;
      }
      Bytes& text = pages[op.key];
      const std::uint64_t pos = op.pos % (text.size() - edit);
      TreeEditor ed(*db, cur);
      ed.blob_replace(pos, edit, op.text);
      db->put(key, ed.finish());
      std::copy(op.text.begin(), op.text.end(), text.begin() + static_cast<std::ptrdiff_t>(pos));
      baseline.put(key, text);
    }
  });
  const double ms = detail::ms_since(t0);
  const std::uint64_t baseline_bytes = baseline.bytes();
  const double engine = static_cast<double>(detail::stored_bytes(db->chunk_store()));
  rep.add("pages", p.keys);
  rep.add("ops", static_cast<double>(p.ops));
  rep.add("updates", static_cast<double>(updates));
  rep.add("engine_bytes", engine);
  rep.add("baseline_bytes", static_cast<double>(baseline_bytes));
  rep.add("engine_over_baseline", engine / static_cast<double>(baseline_bytes));
  rep.add("wall_ms", ms);
  rep.add("ops_per_s", ms > 0 ? static_cast<double>(p.ops) / (ms / 1000.0) : 0);
  return rep;
}

/// Average latency of each facade call kind.
inline Report micro_ops(const Params& p) {
  Report rep{"micro-ops", {}};
  EngineConfig cfg;
  if (p.chunker) cfg.chunker = *p.chunker;
  auto db = Engine::in_memory(cfg);
  std::mt19937_64 rng(p.seed);
  const std::uint64_t n = std::max<std::uint64_t>(1, p.ops);
  auto timed = [&](const std::string& name, auto&& fn) {
    const auto t0 = detail::Clock::now();
    for (std::uint64_t i = 0; i < n; ++i) fn(i);
    rep.add(name + "_us", detail::ms_since(t0) * 1000.0 / static_cast<double>(n));
  };
  std::vector<Bytes> vals;
  for (std::uint64_t i = 0; i < n; ++i) vals.push_back(detail::random_text(rng, 64));
  timed("put_string", [&](std::uint64_t i) { db->put(detail::key_name(i % p.keys), Value::string_bytes(vals[i])); });
  timed("get_string", [&](std::uint64_t i) { (void)db->get(detail::key_name(i % p.keys)); });
  timed("fork", [&](std::uint64_t i) { db->fork(detail::key_name(i % p.keys), "master", "b" + std::to_string(i)); });
  timed("put_untagged", [&](std::uint64_t i) {
    db->put(detail::key_name(i % p.keys), std::optional<Uid>{}, Value::string_bytes(vals[i]));
  });
  timed("track_10", [&](std::uint64_t i) { (void)db->track(detail::key_name(i % p.keys), "master", 0, 10); });
  FlatMap m;
  for (std::uint64_t i = 0; i < 10000; ++i) m[to_bytes("row" + std::to_string(i))] = to_bytes(std::to_string(i));
  db->put("map", db->make_map(m));
  timed("map_update", [&](std::uint64_t i) {
    TreeEditor ed(*db, db->get("map"));
    ed.map_put(as_view("row" + std::to_string(i % 10000)), as_view("v" + std::to_string(i)));
    db->put("map", ed.finish());
  });
  timed("map_get", [&](std::uint64_t i) {
    (void)map_get(db->chunk_store(), db->get("map").tree(), as_view("row" + std::to_string(i % 10000)));
  });
  rep.add("ops_per_kind", static_cast<double>(n));
  return rep;
}

inline const std::vector<std::string>& scenarios() {
  static const std::vector<std::string> names{"wiki-edit", "history-track", "dedup-growth", "skew-balance",
                                              "micro-ops"};
  return names;
}

inline Report run(const Params& p) {
  if (p.clients == 0) throw Error(ErrorCode::InvalidArgument, "clients must be at least 1");
  if (p.keys == 0) throw Error(ErrorCode::InvalidArgument, "keys must be at least 1");
  if (p.scenario == "dedup-growth") return dedup_growth(p);
  if (p.scenario == "history-track") return history_track(p);
  if (p.scenario == "skew-balance") return skew_balance(p);
  if (p.scenario == "wiki-edit") return wiki_edit(p);
  if (p.scenario == "micro-ops") return micro_ops(p);
  throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + p.scenario + "'");
}

}  // namespace forkstore::bench
