#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "forkstore/branch.hpp"
#include "forkstore/database.hpp"
#include "forkstore/log_chunk_store.hpp"
#include "forkstore/merge.hpp"

namespace forkstore {

struct EngineConfig {
  std::filesystem::path path;  // empty: volatile in-memory engine
  ChunkerConfig chunker = ChunkerConfig::make();
  DigestAlgorithm digest = DigestAlgorithm::Sha256;
  std::string default_branch = std::string(kDefaultBranch);
  bool sync_every_put = false;

  nlohmann::json to_json() const {
    return {{"format", 1},
            {"digest", std::string(digest_name(digest))},
            {"default_branch", default_branch},
            {"chunker",
             {{"window", chunker.window_k},
              {"leaf_bits", chunker.leaf_bits_q},
              {"index_bits", chunker.index_bits_r},
              {"alpha", chunker.max_factor_alpha},
              {"target_leaf_bytes", chunker.target_leaf_bytes},
              {"target_index_bytes", chunker.target_index_bytes}}}};
  }

  static EngineConfig from_json(const nlohmann::json& j) {
    EngineConfig c;
    c.digest = parse_digest(j.at("digest").get<std::string>());
    c.default_branch = j.value("default_branch", std::string(kDefaultBranch));
    const auto& k = j.at("chunker");
    c.chunker.window_k = k.at("window").get<std::uint32_t>();
    c.chunker.leaf_bits_q = k.at("leaf_bits").get<std::uint32_t>();
    c.chunker.index_bits_r = k.at("index_bits").get<std::uint32_t>();
    c.chunker.max_factor_alpha = k.at("alpha").get<double>();
    c.chunker.target_leaf_bytes = k.at("target_leaf_bytes").get<std::uint64_t>();
    c.chunker.target_index_bytes = k.at("target_index_bytes").get<std::uint64_t>();
    c.chunker.validate();
    return c;
  }
};

/// Reads `dir/manifest.json`, or writes it from `requested` (or defaults) when
/// the directory is new. An existing store keeps its configuration; asking
/// for a different one is an error.
inline EngineConfig open_manifest(const std::filesystem::path& dir, const std::optional<EngineConfig>& requested) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path manifest = dir / "manifest.json";
  EngineConfig cfg;
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    nlohmann::json j;
    try {
      in >> j;
      cfg = EngineConfig::from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Corrupt, "bad manifest " + manifest.string() + ": " + e.what());
    }
    if (requested && (requested->chunker != cfg.chunker || requested->digest != cfg.digest))
      throw Error(ErrorCode::InvalidArgument, "store at " + dir.string() + " was created with another configuration");
    if (requested) cfg.sync_every_put = requested->sync_every_put;
  } else {
    if (requested) cfg = *requested;
    std::ofstream out(manifest);
    out << cfg.to_json().dump(2) << "\n";
    if (!out) throw Error(ErrorCode::Io, "cannot write " + manifest.string());
  }
  cfg.path = dir;
  return cfg;
}

/// Embedded engine: all M1–M17 operations in-process over one chunk store.
class Engine : public Database {
 public:
  /// Opens (or creates) a store directory. A directory that already has a
  /// manifest keeps its configuration; passing a different one is an error.
  static std::unique_ptr<Engine> open(const std::filesystem::path& dir, std::optional<EngineConfig> requested = {}) {
    EngineConfig cfg = open_manifest(dir, requested);
    LogChunkStore::Options o;
    o.digest = cfg.digest;
    o.sync_every_put = cfg.sync_every_put;
    auto store = std::make_shared<LogChunkStore>(dir, o);
    auto branches = std::make_unique<BranchManager>(dir / "branches.log");
    return std::make_unique<Engine>(std::move(store), std::move(branches), cfg);
  }

  static std::unique_ptr<Engine> in_memory(EngineConfig cfg = {}) {
    auto store = std::make_shared<MemoryChunkStore>(cfg.digest);
    return std::make_unique<Engine>(std::move(store), std::make_unique<BranchManager>(), cfg);
  }

  Engine(ChunkStorePtr store, std::unique_ptr<BranchManager> branches, EngineConfig cfg)
      : cfg_(std::move(cfg)),
        store_(std::move(store)),
        objects_(*store_, cfg_.chunker.max_leaf_bytes()),
        branches_(std::move(branches)) {
    cfg_.chunker.validate();
  }

  ChunkStore& chunk_store() override { return *store_; }
  const ChunkStorePtr& chunk_store_ptr() const { return store_; }
  const ChunkerConfig& chunker() const override { return cfg_.chunker; }
  std::string default_branch() const override { return cfg_.default_branch; }
  const EngineConfig& config() const { return cfg_; }
  ObjectStore& objects() { return objects_; }
  BranchManager& branches() { return *branches_; }

  /// Custom merge strategies referenced by name from `Resolver::custom(name)`.
  void register_resolver(const std::string& name, ResolverHook hook) {
    std::lock_guard g(resolvers_mu_);
    resolvers_[name] = std::move(hook);
  }

  using Database::get;
  using Database::put;

  // M1
  FObject get(const std::string& key, const std::string& branch) override {
    std::optional<Uid> h = branches_->head(key, branch);
    if (!h) {
      if (!branches_->has_key(key)) throw Error(ErrorCode::KeyNotFound, "key '" + key + "' not found");
      throw BranchManager::missing(key, branch);
    }
    return objects_.load(*h);
  }

  // M2
  FObject get(const std::string& key, const Uid& uid) override { return load_for_key(key, uid); }

  // M3
  Uid put(const std::string& key, const std::string& branch, const Value& value,
          const std::optional<Uid>& guard = std::nullopt, ByteView context = {}) override {
    check_key(key);
    return branches_->put_tagged(objects_, key, branch, value, guard, context, cfg_.default_branch).uid;
  }

  // M4
  Uid put(const std::string& key, const std::optional<Uid>& base, const Value& value, ByteView context = {}) override {
    check_key(key);
    if (base) load_for_key(key, *base);
    return branches_->put_untagged(objects_, key, base, value, context).uid;
  }

  // M5
  Uid merge(const std::string& key, const std::string& target, const std::string& ref, const Resolver& r = {}) override {
    std::optional<Uid> h = branches_->head(key, ref);
    if (!h) throw BranchManager::missing(key, ref);
    return merge_into_branch(ctx(), key, target, *h, bind(r)).uid;
  }

  // M6
  Uid merge(const std::string& key, const std::string& target, const Uid& ref, const Resolver& r = {}) override {
    return merge_into_branch(ctx(), key, target, ref, bind(r)).uid;
  }

  // M7
  Uid merge(const std::string& key, const std::vector<Uid>& uids, const Resolver& r = {}) override {
    return merge_versions(ctx(), key, uids, bind(r)).uid;
  }

  // M8
  std::vector<std::string> list_keys() override { return branches_->keys(); }
  // M9
  std::map<std::string, Uid> list_tagged(const std::string& key) override { return branches_->tagged(key); }
  // M10
  std::vector<Uid> list_untagged(const std::string& key) override { return branches_->untagged(key); }

  // M11
  void fork(const std::string& key, const std::string& ref, const std::string& new_branch) override {
    branches_->fork_branch(key, ref, new_branch);
  }
  // M12
  void fork(const std::string& key, const Uid& ref, const std::string& new_branch) override {
    load_for_key(key, ref);
    branches_->fork(key, ref, new_branch);
  }
  // M13
  void rename(const std::string& key, const std::string& branch, const std::string& new_name) override {
    branches_->rename(key, branch, new_name);
  }
  // M14
  void remove(const std::string& key, const std::string& branch) override { branches_->remove(key, branch); }

  // M15
  std::vector<TrackEntry> track(const std::string& key, const std::string& branch, std::uint64_t lo,
                                std::uint64_t hi) override {
    std::optional<Uid> h = branches_->head(key, branch);
    if (!h) {
      if (!branches_->has_key(key)) throw Error(ErrorCode::KeyNotFound, "key '" + key + "' not found");
      throw BranchManager::missing(key, branch);
    }
    return objects_.track(*h, lo, hi);
  }
  // M16
  std::vector<TrackEntry> track(const std::string& key, const Uid& uid, std::uint64_t lo, std::uint64_t hi) override {
    load_for_key(key, uid);
    return objects_.track(uid, lo, hi);
  }
  // M17
  std::optional<Uid> lca(const std::string& key, const Uid& a, const Uid& b) override {
    load_for_key(key, a);
    load_for_key(key, b);
    return objects_.lca(a, b);
  }

  VersionDiff diff(const Uid& a, const Uid& b) override { return objects_.diff(a, b); }

  FObject verify(const Uid& uid, std::uint64_t depth, bool deep) override {
    return objects_.load_verified(uid, depth, deep);
  }

  void sync() {
    if (auto* log = dynamic_cast<LogChunkStore*>(store_.get())) log->sync();
    branches_->sync();
  }

 private:
  static void check_key(const std::string& key) {
    if (key.empty()) throw Error(ErrorCode::InvalidArgument, "key must not be empty");
  }

  FObject load_for_key(const std::string& key, const Uid& uid) {
    FObject o = objects_.load(uid);
    if (o.key != key)
      throw Error(ErrorCode::KeyMismatch, "version " + uid.short_hex() + " belongs to key '" + o.key + "'");
    return o;
  }

  MergeContext ctx() { return MergeContext{objects_, *branches_, cfg_.chunker}; }

  Resolver bind(const Resolver& r) {
    if (r.kind != Resolver::Kind::Custom || r.hook) return r;
    std::lock_guard g(resolvers_mu_);
    auto it = resolvers_.find(r.name);
    if (it == resolvers_.end()) throw Error(ErrorCode::InvalidArgument, "no resolver named '" + r.name + "'");
    Resolver out = r;
    out.hook = it->second;
    return out;
  }

  EngineConfig cfg_;
  ChunkStorePtr store_;
  ObjectStore objects_;
  std::unique_ptr<BranchManager> branches_;
  std::mutex resolvers_mu_;
  std::map<std::string, ResolverHook> resolvers_;
};

}  // namespace forkstore
