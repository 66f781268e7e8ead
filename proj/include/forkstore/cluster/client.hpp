#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "forkstore/cluster/routing.hpp"
#include "forkstore/cluster/servlet.hpp"
#include "forkstore/cluster/transport.hpp"
#include "forkstore/database.hpp"
#include "forkstore/engine.hpp"

namespace forkstore::cluster {

struct NodeAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Static membership. Every node runs a servlet and its chunk store.
///
///   {"nodes": [{"host": "127.0.0.1", "port": 7401, "role": "servlet"}, ...],
///    "one_layer": false, "cache_chunks": 4096,
///    "engine": { ...same object as a store manifest... }}
struct ClusterConfig {
  std::vector<NodeAddress> nodes;
  bool one_layer = false;
  std::size_t cache_chunks = 4096;
  EngineConfig engine;

  static ClusterConfig from_json(const nlohmann::json& j) {
    ClusterConfig c;
    try {
      for (const auto& n : j.at("nodes")) {
        const std::string role = n.value("role", std::string("servlet"));
        if (role != "servlet")
          throw Error(ErrorCode::InvalidArgument, "unsupported node role '" + role + "' (every node is a servlet)");
        c.nodes.push_back({n.value("host", std::string("127.0.0.1")), n.at("port").get<std::uint16_t>()});
      }
      c.one_layer = j.value("one_layer", false);
      c.cache_chunks = j.value("cache_chunks", std::size_t{4096});
      if (j.contains("engine")) c.engine = EngineConfig::from_json(j.at("engine"));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("bad cluster config: ") + e.what());
    }
    if (c.nodes.empty()) throw Error(ErrorCode::InvalidArgument, "cluster config lists no nodes");
    return c;
  }

  static ClusterConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read cluster config " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, "bad cluster config " + path + ": " + e.what());
    }
    return from_json(j);
  }

  /// Path from FORKSTORE_CLUSTER, if set.
  static std::optional<std::string> env_path() {
    const char* p = std::getenv("FORKSTORE_CLUSTER");
    if (!p || !*p) return std::nullopt;
    return std::string(p);
  }
};

/// Database facade that forwards each request to the servlet owning its key
/// and reads tree chunks straight from the stores.
class ClusterClient : public Database {
 public:
  ClusterClient(std::shared_ptr<Transport> t, EngineConfig cfg, bool one_layer = false, std::size_t cache_chunks = 0)
      : t_(std::move(t)), cfg_(std::move(cfg)), one_layer_(one_layer) {
    const std::uint32_t n = t_->nodes();
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "cluster has no nodes");
    for (std::uint32_t i = 0; i < n; ++i) stores_.push_back(std::make_shared<RemoteChunkStore>(t_, i, cfg_.digest));
    routed_ = std::make_unique<RoutedChunkStore>(stores_, 0, false, cache_chunks);
    if (one_layer_)
      for (std::uint32_t i = 0; i < n; ++i)
        owner_views_.push_back(std::make_unique<RoutedChunkStore>(stores_, i, true, cache_chunks));
    objects_ = std::make_unique<ObjectStore>(*routed_, cfg_.chunker.max_leaf_bytes());
  }

  /// Asks node 0 for the cluster's configuration and refuses to talk to a
  /// cluster whose chunking differs from `expected`.
  static std::unique_ptr<ClusterClient> connect(std::shared_ptr<Transport> t,
                                                const std::optional<EngineConfig>& expected = std::nullopt,
                                                std::size_t cache_chunks = 0) {
    Bytes body = t->request(0, Op::Hello, {});
    ByteReader r(body);
    r.u32();
    const std::uint32_t n = r.u32();
    const bool one_layer = r.u8() != 0;
    EngineConfig cfg = EngineConfig::from_json(nlohmann::json::parse(get_str(r)));
    if (n != t->nodes())
      throw Error(ErrorCode::InvalidArgument, "cluster reports " + std::to_string(n) + " nodes, config lists " +
                                                  std::to_string(t->nodes()));
    if (expected && (expected->chunker != cfg.chunker || expected->digest != cfg.digest))
      throw Error(ErrorCode::InvalidArgument, "cluster was started with another chunker configuration");
    return std::make_unique<ClusterClient>(std::move(t), cfg, one_layer, cache_chunks);
  }

  std::uint32_t nodes() const { return t_->nodes(); }
  std::uint32_t owner(const std::string& key) const { return route_key(key, nodes()); }
  Transport& transport() { return *t_; }
  const std::vector<ChunkStorePtr>& stores() const { return stores_; }

  ChunkStore& chunk_store() override { return *routed_; }
  ChunkStore& store_for(const std::string& key) override {
    if (!one_layer_) return *routed_;
    return *owner_views_[owner(key)];
  }
  const ChunkerConfig& chunker() const override { return cfg_.chunker; }
  std::string default_branch() const override { return cfg_.default_branch; }

  using Database::get;
  using Database::put;

  FObject get(const std::string& key, const std::string& branch) override {
    ByteWriter w;
    put_str(w, key);
    put_str(w, branch);
    return object_reply(key, Op::GetBranch, w);
  }
  FObject get(const std::string& key, const Uid& uid) override {
    ByteWriter w;
    put_str(w, key);
    put_uid(w, uid);
    return object_reply(key, Op::GetUid, w);
  }

  Uid put(const std::string& key, const std::string& branch, const Value& value,
          const std::optional<Uid>& guard = std::nullopt, ByteView context = {}) override {
    ByteWriter w;
    put_str(w, key);
    put_str(w, branch);
    put_value(w, value);
    put_opt_uid(w, guard);
    w.blob(context);
    return uid_reply(key, Op::PutBranch, w);
  }
  Uid put(const std::string& key, const std::optional<Uid>& base, const Value& value, ByteView context = {}) override {
    ByteWriter w;
    put_str(w, key);
    put_opt_uid(w, base);
    put_value(w, value);
    w.blob(context);
    return uid_reply(key, Op::PutUid, w);
  }

  Uid merge(const std::string& key, const std::string& target, const std::string& ref, const Resolver& r = {}) override {
    ByteWriter w;
    put_str(w, key);
    put_str(w, target);
    put_str(w, ref);
    put_resolver(w, r);
    return uid_reply(key, Op::MergeBranch, w);
  }
  Uid merge(const std::string& key, const std::string& target, const Uid& ref, const Resolver& r = {}) override {
    ByteWriter w;
    put_str(w, key);
    put_str(w, target);
    put_uid(w, ref);
    put_resolver(w, r);
    return uid_reply(key, Op::MergeUid, w);
  }
  Uid merge(const std::string& key, const std::vector<Uid>& uids, const Resolver& r = {}) override {
    ByteWriter w;
    put_str(w, key);
    w.u32(static_cast<std::uint32_t>(uids.size()));
    for (const auto& u : uids) put_uid(w, u);
    put_resolver(w, r);
    return uid_reply(key, Op::MergeMany, w);
  }

  /// Keys live on their owners, so this asks every servlet.
  std::vector<std::string> list_keys() override {
    std::set<std::string> all;
    for (std::uint32_t i = 0; i < nodes(); ++i) {
      Bytes body = t_->request(i, Op::ListKeys, {});
      ByteReader r(body);
      for (std::uint32_t n = r.u32(); n > 0; --n) all.insert(get_str(r));
    }
    return {all.begin(), all.end()};
  }
  std::map<std::string, Uid> list_tagged(const std::string& key) override {
    ByteWriter w;
    put_str(w, key);
    Bytes body = send(key, Op::ListTagged, w);
    ByteReader r(body);
    std::map<std::string, Uid> out;
    for (std::uint32_t n = r.u32(); n > 0; --n) {
      auto name = get_str(r);
      out[name] = get_uid(r);
    }
    return out;
  }
  std::vector<Uid> list_untagged(const std::string& key) override {
    ByteWriter w;
    put_str(w, key);
    Bytes body = send(key, Op::ListUntagged, w);
    ByteReader r(body);
    std::vector<Uid> out(r.u32());
    for (auto& u : out) u = get_uid(r);
    return out;
  }

  void fork(const std::string& key, const std::string& ref, const std::string& new_branch) override {
    ByteWriter w;
    put_str(w, key);
    put_str(w, ref);
    put_str(w, new_branch);
    send(key, Op::ForkBranch, w);
  }
  void fork(const std::string& key, const Uid& ref, const std::string& new_branch) override {
    ByteWriter w;
    put_str(w, key);
    put_uid(w, ref);
    put_str(w, new_branch);
    send(key, Op::ForkUid, w);
  }
  void rename(const std::string& key, const std::string& branch, const std::string& new_name) override {
    ByteWriter w;
    put_str(w, key);
    put_str(w, branch);
    put_str(w, new_name);
    send(key, Op::Rename, w);
  }
  void remove(const std::string& key, const std::string& branch) override {
    ByteWriter w;
    put_str(w, key);
    put_str(w, branch);
    send(key, Op::Remove, w);
  }

  std::vector<TrackEntry> track(const std::string& key, const std::string& branch, std::uint64_t lo,
                                std::uint64_t hi) override {
    ByteWriter w;
    put_str(w, key);
    put_str(w, branch);
    w.u64(lo);
    w.u64(hi);
    return track_reply(key, Op::TrackBranch, w);
  }
  std::vector<TrackEntry> track(const std::string& key, const Uid& uid, std::uint64_t lo, std::uint64_t hi) override {
    ByteWriter w;
    put_str(w, key);
    put_uid(w, uid);
    w.u64(lo);
    w.u64(hi);
    return track_reply(key, Op::TrackUid, w);
  }
  std::optional<Uid> lca(const std::string& key, const Uid& a, const Uid& b) override {
    ByteWriter w;
    put_str(w, key);
    put_uid(w, a);
    put_uid(w, b);
    Bytes body = send(key, Op::Lca, w);
    ByteReader r(body);
    return get_opt_uid(r);
  }

  // Diff and verification run here over chunks fetched from the stores; the
  // client re-hashes everything itself.
  VersionDiff diff(const Uid& a, const Uid& b) override { return objects_->diff(a, b); }
  FObject verify(const Uid& uid, std::uint64_t depth, bool deep) override {
    return objects_->load_verified(uid, depth, deep);
  }

 private:
  Bytes send(const std::string& key, Op op, ByteWriter& w) { return t_->request(owner(key), op, std::move(w).take()); }

  FObject object_reply(const std::string& key, Op op, ByteWriter& w) {
    Bytes body = send(key, op, w);
    ByteReader r(body);
    return get_object(r);
  }
  Uid uid_reply(const std::string& key, Op op, ByteWriter& w) {
    Bytes body = send(key, op, w);
    ByteReader r(body);
    return get_uid(r);
  }
  std::vector<TrackEntry> track_reply(const std::string& key, Op op, ByteWriter& w) {
    Bytes body = send(key, op, w);
    ByteReader r(body);
    return get_track(r);
  }

  std::shared_ptr<Transport> t_;
  EngineConfig cfg_;
  bool one_layer_;
  std::vector<ChunkStorePtr> stores_;
  std::unique_ptr<RoutedChunkStore> routed_;
  std::vector<std::unique_ptr<RoutedChunkStore>> owner_views_;
  std::unique_ptr<ObjectStore> objects_;
};

/// N servlets in this process, each with its own store, talking through an
/// in-process transport. Stores are in memory unless a directory is given.
class LocalCluster {
 public:
  struct Options {
    std::uint32_t nodes = 4;
    EngineConfig engine;
    bool one_layer = false;
    std::size_t cache_chunks = 0;
    std::optional<std::filesystem::path> dir;  // node i persists under dir/node-i
  };

  explicit LocalCluster(Options o) : opts_(std::move(o)) {
    if (opts_.nodes == 0) throw Error(ErrorCode::InvalidArgument, "cluster needs at least one node");
    for (std::uint32_t i = 0; i < opts_.nodes; ++i) {
      if (opts_.dir) {
        auto d = *opts_.dir / ("node-" + std::to_string(i));
        EngineConfig c = open_manifest(d, opts_.engine);
        LogChunkStore::Options lo;
        lo.digest = c.digest;
        lo.sync_every_put = c.sync_every_put;
        stores_.push_back(std::make_shared<LogChunkStore>(d, lo));
      } else {
        stores_.push_back(std::make_shared<MemoryChunkStore>(opts_.engine.digest));
      }
    }
    std::vector<FrameHandler> handlers;
    for (std::uint32_t i = 0; i < opts_.nodes; ++i) {
      auto branches = opts_.dir ? std::make_unique<BranchManager>(*opts_.dir / ("node-" + std::to_string(i)) /
                                                                  "branches.log")
                                : std::make_unique<BranchManager>();
      servlets_.push_back(std::make_unique<Servlet>(i, stores_, std::move(branches), opts_.engine, opts_.one_layer,
                                                    opts_.cache_chunks));
      Servlet* s = servlets_.back().get();
      handlers.push_back([s](const Bytes& f) { return s->handle_frame(f); });
    }
    transport_ = std::make_shared<InProcessTransport>(std::move(handlers));
  }

  std::unique_ptr<ClusterClient> client(std::size_t cache_chunks = 0) {
    return std::make_unique<ClusterClient>(transport_, opts_.engine, opts_.one_layer, cache_chunks);
  }

  std::uint32_t nodes() const { return opts_.nodes; }
  Servlet& servlet(std::uint32_t i) { return *servlets_.at(i); }
  const ChunkStorePtr& store(std::uint32_t i) const { return stores_.at(i); }
  const std::shared_ptr<InProcessTransport>& transport() const { return transport_; }

 private:
  Options opts_;
  std::vector<ChunkStorePtr> stores_;
  std::vector<std::unique_ptr<Servlet>> servlets_;
  std::shared_ptr<InProcessTransport> transport_;
};

}  // namespace forkstore::cluster
