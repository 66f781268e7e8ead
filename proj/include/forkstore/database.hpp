#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forkstore/merge.hpp"
#include "forkstore/object.hpp"
#include "forkstore/pos_tree.hpp"
#include "forkstore/staging.hpp"

namespace forkstore {

/// The public operations M1–M17. `Engine` runs them in-process;
/// `ClusterClient` forwards them to the servlet owning the key.
class Database {
 public:
  virtual ~Database() = default;

  /// Where tree chunks of new values are written and read.
  virtual ChunkStore& chunk_store() = 0;
  /// Store for chunks of values that will be put under `key`. Differs from
  /// `chunk_store()` only when placement depends on the key.
  virtual ChunkStore& store_for(const std::string& key) {
    (void)key;
    return chunk_store();
  }
  virtual const ChunkerConfig& chunker() const = 0;
  virtual std::string default_branch() const { return std::string(kDefaultBranch); }

  // M1, M2
  virtual FObject get(const std::string& key, const std::string& branch) = 0;
  virtual FObject get(const std::string& key, const Uid& uid) = 0;
  // M3 (guarded when `guard` is set), M4
  virtual Uid put(const std::string& key, const std::string& branch, const Value& value,
                  const std::optional<Uid>& guard = std::nullopt, ByteView context = {}) = 0;
  virtual Uid put(const std::string& key, const std::optional<Uid>& base, const Value& value, ByteView context = {}) = 0;
  // M5, M6, M7
  virtual Uid merge(const std::string& key, const std::string& target, const std::string& ref,
                    const Resolver& r = {}) = 0;
  virtual Uid merge(const std::string& key, const std::string& target, const Uid& ref, const Resolver& r = {}) = 0;
  virtual Uid merge(const std::string& key, const std::vector<Uid>& uids, const Resolver& r = {}) = 0;
  // M8, M9, M10
  virtual std::vector<std::string> list_keys() = 0;
  virtual std::map<std::string, Uid> list_tagged(const std::string& key) = 0;
  virtual std::vector<Uid> list_untagged(const std::string& key) = 0;
  // M11, M12, M13, M14
  virtual void fork(const std::string& key, const std::string& ref, const std::string& new_branch) = 0;
  virtual void fork(const std::string& key, const Uid& ref, const std::string& new_branch) = 0;
  virtual void rename(const std::string& key, const std::string& branch, const std::string& new_name) = 0;
  virtual void remove(const std::string& key, const std::string& branch) = 0;
  // M15, M16, M17
  virtual std::vector<TrackEntry> track(const std::string& key, const std::string& branch, std::uint64_t lo,
                                        std::uint64_t hi) = 0;
  virtual std::vector<TrackEntry> track(const std::string& key, const Uid& uid, std::uint64_t lo, std::uint64_t hi) = 0;
  virtual std::optional<Uid> lca(const std::string& key, const Uid& a, const Uid& b) = 0;

  virtual VersionDiff diff(const Uid& a, const Uid& b) = 0;
  /// Loads a version re-hashing it and `depth` ancestors (and their trees
  /// when `deep`). Throws TamperDetected.
  virtual FObject verify(const Uid& uid, std::uint64_t depth, bool deep) = 0;

  // ---- conveniences ---------------------------------------------------------

  FObject get(const std::string& key) { return get(key, default_branch()); }
  Uid put(const std::string& key, const Value& value) { return put(key, default_branch(), value); }

  Value make_blob(ByteView data, const std::string& key = {}) {
    return Value::tree(build_blob(store_for(key), chunker(), data));
  }
  Value make_list(const std::vector<Bytes>& items, const std::string& key = {}) {
    return Value::tree(build_list(store_for(key), chunker(), items));
  }
  Value make_set(const std::vector<Bytes>& items, const std::string& key = {}) {
    return Value::tree(build_set(store_for(key), chunker(), items));
  }
  Value make_map(const FlatMap& entries, const std::string& key = {}) {
    return Value::tree(build_map(store_for(key), chunker(), entries));
  }

  Bytes read_blob(const FObject& o) { return forkstore::read_blob(store_for(o.key), o.tree()); }
  std::vector<Bytes> read_list(const FObject& o) { return forkstore::read_list(store_for(o.key), o.tree()); }
  std::vector<Bytes> read_set(const FObject& o) { return forkstore::read_set(store_for(o.key), o.tree()); }
  FlatMap read_map(const FObject& o) { return forkstore::read_map(store_for(o.key), o.tree()); }
};

/// Buffers edits of one chunkable value. Intermediate trees stay in memory;
/// `finish` writes only the chunks of the final tree.
class TreeEditor {
 public:
  TreeEditor(ChunkStore& store, const ChunkerConfig& cfg, const Value& start)
      : staging_(store), cfg_(cfg), tree_(start.as_tree()) {}

  TreeEditor(Database& db, const FObject& o, const std::string& key = {})
      : TreeEditor(db.store_for(key.empty() ? o.key : key), db.chunker(), o.value()) {}

  const PosTree& tree() const { return tree_; }
  std::uint64_t size() const { return tree_size(staging_, tree_); }

  // Blob
  TreeEditor& blob_insert(std::uint64_t pos, ByteView bytes) { return set(blob_splice(staging_, cfg_, tree_, pos, 0, bytes)); }
  TreeEditor& blob_remove(std::uint64_t pos, std::uint64_t n) { return set(blob_splice(staging_, cfg_, tree_, pos, n, {})); }
  TreeEditor& blob_replace(std::uint64_t pos, std::uint64_t n, ByteView bytes) {
    return set(blob_splice(staging_, cfg_, tree_, pos, n, bytes));
  }
  TreeEditor& blob_append(ByteView bytes) { return blob_insert(size(), bytes); }
  Bytes blob_read(std::uint64_t pos, std::uint64_t n) const { return read_blob_range(staging_, tree_, pos, n); }

  // List
  TreeEditor& list_insert(std::uint64_t pos, const std::vector<Bytes>& items) {
    return set(list_splice(staging_, cfg_, tree_, pos, 0, items));
  }
  TreeEditor& list_remove(std::uint64_t pos, std::uint64_t n) { return set(list_splice(staging_, cfg_, tree_, pos, n, {})); }
  TreeEditor& list_replace(std::uint64_t pos, const Bytes& item) {
    return set(list_splice(staging_, cfg_, tree_, pos, 1, {item}));
  }
  TreeEditor& list_append(const std::vector<Bytes>& items) { return list_insert(size(), items); }
  Bytes list_get(std::uint64_t pos) const { return forkstore::list_get(staging_, tree_, pos); }

  // Map / Set
  TreeEditor& map_put(ByteView k, ByteView v) { return set(forkstore::map_put(staging_, cfg_, tree_, k, v)); }
  TreeEditor& map_remove(ByteView k) { return set(forkstore::map_remove(staging_, cfg_, tree_, k)); }
  std::optional<Bytes> map_get(ByteView k) const { return forkstore::map_get(staging_, tree_, k); }
  TreeEditor& set_insert(ByteView k) { return set(forkstore::set_insert(staging_, cfg_, tree_, k)); }
  TreeEditor& set_remove(ByteView k) { return set(forkstore::set_remove(staging_, cfg_, tree_, k)); }
  bool set_contains(ByteView k) const { return forkstore::set_contains(staging_, tree_, k); }

  std::size_t staged_chunks() const { return staging_.pending_count(); }

  /// Persists the current tree and returns it as a value.
  Value finish() {
    staging_.flush({tree_.root});
    return Value::tree(tree_);
  }

 private:
  TreeEditor& set(PosTree t) {
    tree_ = t;
    return *this;
  }

  StagingChunkStore staging_;
  ChunkerConfig cfg_;
  PosTree tree_;
};

}  // namespace forkstore
