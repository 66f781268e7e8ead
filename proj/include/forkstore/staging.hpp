#pragma once

#include <functional>
#include <mutex>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "forkstore/chunk_store.hpp"
#include "forkstore/pos_node.hpp"

namespace forkstore {

/// Write buffer in front of another store. Chunks written while editing stay
/// here; `flush` copies only what is reachable from the given roots, so
/// intermediate versions of a batch of edits never reach the backing store.
class StagingChunkStore final : public ChunkStore {
 public:
  explicit StagingChunkStore(ChunkStore& base) : base_(base) {}

  DigestAlgorithm digest() const override { return base_.digest(); }

  Cid put(const Chunk& chunk) override {
    Cid cid = compute_cid(chunk, base_.digest());
    std::lock_guard lock(mu_);
    if (!pending_.count(cid) && !base_.contains(cid)) pending_.emplace(cid, chunk);
    return cid;
  }

  Chunk get(const Cid& cid, bool verify = false) const override {
    {
      std::lock_guard lock(mu_);
      auto it = pending_.find(cid);
      if (it != pending_.end()) {
        if (verify) verify_chunk_or_throw(it->second, cid, base_.digest());
        return it->second;
      }
    }
    return base_.get(cid, verify);
  }

  bool contains(const Cid& cid) const override {
    {
      std::lock_guard lock(mu_);
      if (pending_.count(cid)) return true;
    }
    return base_.contains(cid);
  }

  ChunkStoreStats stats() const override { return base_.stats(); }

  std::size_t pending_count() const {
    std::lock_guard lock(mu_);
    return pending_.size();
  }

  /// Persists the staged chunks reachable from `roots` (children before
  /// parents) and drops everything else.
  void flush(const std::vector<Cid>& roots) {
    std::lock_guard lock(mu_);
    std::unordered_set<Cid, CidHash> seen;
    std::function<void(const Cid&)> walk = [&](const Cid& cid) {
      auto it = pending_.find(cid);
      if (it == pending_.end() || !seen.insert(cid).second) return;
      for (const Cid& c : index_children(it->second)) walk(c);
      base_.put(it->second);
    };
    for (const Cid& r : roots) walk(r);
    pending_.clear();
  }

  void flush_all() {
    std::lock_guard lock(mu_);
    for (const auto& [cid, chunk] : pending_) base_.put(chunk);
    pending_.clear();
  }

  void discard() {
    std::lock_guard lock(mu_);
    pending_.clear();
  }

  ChunkStore& base() { return base_; }

 private:
  ChunkStore& base_;
  mutable std::mutex mu_;
  std::unordered_map<Cid, Chunk, CidHash> pending_;
};

}  // namespace forkstore
