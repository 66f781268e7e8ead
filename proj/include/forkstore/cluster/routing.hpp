#pragma once

#include <cstdint>
#include <list>
#include <mutex>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forkstore/chunk_store.hpp"

namespace forkstore::cluster {

/// Key to servlet: SHA-256 of the key, low 64 bits, mod N.
inline std::uint32_t route_key(std::string_view key, std::uint32_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "routing table is empty");
  if (n == 1) return 0;
  return static_cast<std::uint32_t>(digest_of(as_view(key)).low64() % n);
}

/// Chunk to store. Meta chunks stay on the origin servlet's store; others go
/// by the high 64 bits of the cid. The low bits are avoided because index
/// node boundaries are chosen by exactly those bits, so every index chunk
/// would share a residue.
inline std::uint32_t route_chunk(const Cid& cid, std::uint32_t origin, bool is_meta, std::uint32_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "routing table is empty");
  if (is_meta || n == 1) return is_meta ? origin : 0;
  return static_cast<std::uint32_t>(cid.high64() % n);
}

/// Bounded LRU of chunks fetched from other stores.
class ChunkCache {
 public:
  explicit ChunkCache(std::size_t capacity) : capacity_(capacity) {}

  bool get(const Cid& cid, Chunk& out) {
    if (capacity_ == 0) return false;
    std::lock_guard g(mu_);
    auto it = index_.find(cid);
    if (it == index_.end()) return false;
    order_.splice(order_.begin(), order_, it->second);
    out = it->second->second;
    ++hits_;
    return true;
  }

  void put(const Cid& cid, const Chunk& c) {
    if (capacity_ == 0) return;
    std::lock_guard g(mu_);
    if (index_.count(cid)) return;
    order_.emplace_front(cid, c);
    index_[cid] = order_.begin();
    if (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }

  std::uint64_t hits() const { return hits_; }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::list<std::pair<Cid, Chunk>> order_;
  std::unordered_map<Cid, std::list<std::pair<Cid, Chunk>>::iterator, CidHash> index_;
  std::uint64_t hits_ = 0;
};

/// A servlet's (or client's) view of the partitioned chunk layer.
///
/// Two-layer mode writes non-meta chunks to the store their cid selects. In
/// one-layer mode every chunk stays on `local`, which is how the skew
/// comparison models placing a whole key on its owning servlet. Reads try the
/// routed store first and fall back to the local one, then to the rest.
class RoutedChunkStore final : public ChunkStore {
 public:
  RoutedChunkStore(std::vector<ChunkStorePtr> stores, std::uint32_t local, bool one_layer = false,
                   std::size_t cache_chunks = 0)
      : stores_(std::move(stores)), local_(local), one_layer_(one_layer), cache_(cache_chunks) {
    if (stores_.empty()) throw Error(ErrorCode::InvalidArgument, "no chunk stores");
    if (local_ >= stores_.size()) throw Error(ErrorCode::InvalidArgument, "local store id out of range");
  }

  DigestAlgorithm digest() const override { return stores_[0]->digest(); }

  std::uint32_t target(const Cid& cid, ChunkType type) const {
    if (one_layer_) return local_;
    return route_chunk(cid, local_, type == ChunkType::Meta, size());
  }

  Cid put(const Chunk& chunk) override {
    const Cid cid = cid_of(chunk);
    stores_[target(cid, chunk.type)]->put(chunk);
    return cid;
  }

  Chunk get(const Cid& cid, bool verify = false) const override {
    const std::uint32_t primary = one_layer_ ? local_ : route_chunk(cid, local_, false, size());
    Chunk c;
    if (!verify && primary != local_ && cache_.get(cid, c)) return c;
    for (std::uint32_t id : probe_order(primary)) {
      try {
        c = stores_[id]->get(cid, verify);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NotFound) continue;
        throw;
      }
      if (id != local_) cache_.put(cid, c);
      return c;
    }
    throw Error(ErrorCode::NotFound, "chunk " + cid.hex() + " not found on any store");
  }

  bool contains(const Cid& cid) const override {
    const std::uint32_t primary = one_layer_ ? local_ : route_chunk(cid, local_, false, size());
    for (std::uint32_t id : probe_order(primary))
      if (stores_[id]->contains(cid)) return true;
    return false;
  }

  /// Stats of the local store only; the others report for themselves.
  ChunkStoreStats stats() const override { return stores_[local_]->stats(); }

  std::uint32_t size() const { return static_cast<std::uint32_t>(stores_.size()); }
  std::uint32_t local() const { return local_; }
  bool one_layer() const { return one_layer_; }
  const ChunkStorePtr& store(std::uint32_t i) const { return stores_.at(i); }
  std::uint64_t cache_hits() const { return cache_.hits(); }

 private:
  std::vector<std::uint32_t> probe_order(std::uint32_t primary) const {
    std::vector<std::uint32_t> order{primary};
    if (local_ != primary) order.push_back(local_);
    for (std::uint32_t i = 0; i < size(); ++i)
      if (i != primary && i != local_) order.push_back(i);
    return order;
  }

  std::vector<ChunkStorePtr> stores_;
  std::uint32_t local_;
  bool one_layer_;
  mutable ChunkCache cache_;
};

}  // namespace forkstore::cluster
