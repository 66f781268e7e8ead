#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "forkstore/chunk.hpp"
#include "forkstore/digest.hpp"
#include "forkstore/error.hpp"

namespace forkstore {

struct ChunkStoreStats {
  std::uint64_t unique_chunk_count = 0;
  std::uint64_t total_payload_bytes = 0;
  std::uint64_t log_file_bytes = 0;
  std::uint64_t dedup_hit_count = 0;
  std::array<std::uint64_t, kChunkTypeCount> chunks_by_type{};
  std::array<std::uint64_t, kChunkTypeCount> payload_bytes_by_type{};

  std::uint64_t non_meta_payload_bytes() const {
    return total_payload_bytes - payload_bytes_by_type[static_cast<std::size_t>(ChunkType::Meta)];
  }

  void account(const Chunk& c) {
    ++unique_chunk_count;
    total_payload_bytes += c.payload.size();
    ++chunks_by_type[static_cast<std::size_t>(c.type)];
    payload_bytes_by_type[static_cast<std::size_t>(c.type)] += c.payload.size();
  }
};

/// Content-addressed chunk storage with a key-value interface (key = cid).
///
/// Implementations must be safe for concurrent readers alongside one writer at a
/// time; values returned are copies and may be shared freely.
class ChunkStore {
 public:
  virtual ~ChunkStore() = default;

  virtual DigestAlgorithm digest() const = 0;

  /// Stores the chunk unless an identical one exists. Idempotent.
  virtual Cid put(const Chunk& chunk) = 0;

  /// Throws NotFound for unknown cids; with `verify`, TamperDetected when the
  /// stored bytes no longer hash to `cid`.
  virtual Chunk get(const Cid& cid, bool verify = false) const = 0;

  virtual bool contains(const Cid& cid) const = 0;

  virtual ChunkStoreStats stats() const = 0;

  Cid put(ChunkType type, Bytes payload) { return put(Chunk{type, std::move(payload)}); }

  Cid cid_of(const Chunk& c) const { return compute_cid(c, digest()); }
};

using ChunkStorePtr = std::shared_ptr<ChunkStore>;

inline void verify_chunk_or_throw(const Chunk& c, const Cid& expected, DigestAlgorithm algo) {
  if (compute_cid(c, algo) != expected)
    throw Error(ErrorCode::TamperDetected, "chunk " + expected.hex() + " does not match its digest");
}

/// Volatile store. Useful for tests, benchmarks and client-side staging.
class MemoryChunkStore final : public ChunkStore {
 public:
  explicit MemoryChunkStore(DigestAlgorithm algo = DigestAlgorithm::Sha256) : algo_(algo) {}

  DigestAlgorithm digest() const override { return algo_; }

  Cid put(const Chunk& chunk) override {
    Cid cid = compute_cid(chunk, algo_);
    std::unique_lock lock(mu_);
    auto [it, inserted] = chunks_.try_emplace(cid, chunk);
    if (inserted) {
      stats_.account(chunk);
      order_.push_back(cid);
    } else {
      ++stats_.dedup_hit_count;
    }
    return cid;
  }

  Chunk get(const Cid& cid, bool verify = false) const override {
    Chunk c;
    {
      std::shared_lock lock(mu_);
      auto it = chunks_.find(cid);
      if (it == chunks_.end()) throw Error(ErrorCode::NotFound, "chunk " + cid.hex() + " not found");
      c = it->second;
    }
    if (verify) verify_chunk_or_throw(c, cid, algo_);
    return c;
  }

  bool contains(const Cid& cid) const override {
    std::shared_lock lock(mu_);
    return chunks_.count(cid) != 0;
  }

  ChunkStoreStats stats() const override {
    std::shared_lock lock(mu_);
    ChunkStoreStats s = stats_;
    s.log_file_bytes = 0;
    return s;
  }

  /// Chunks in insertion order.
  void scan(const std::function<void(const Cid&, const Chunk&)>& fn) const {
    std::shared_lock lock(mu_);
    for (const auto& cid : order_) fn(cid, chunks_.at(cid));
  }

  /// Overwrites stored bytes in place, bypassing content addressing. Test hook
  /// for simulating corruption.
  void overwrite_for_testing(const Cid& cid, Chunk replacement) {
    std::unique_lock lock(mu_);
    chunks_.at(cid) = std::move(replacement);
  }

 private:
  DigestAlgorithm algo_;
  mutable std::shared_mutex mu_;
  std::unordered_map<Cid, Chunk, CidHash> chunks_;
  std::vector<Cid> order_;
  ChunkStoreStats stats_;
};

/// Decorator that counts traffic to the wrapped store.
class CountingChunkStore final : public ChunkStore {
 public:
  explicit CountingChunkStore(ChunkStorePtr inner) : inner_(std::move(inner)) {}

  DigestAlgorithm digest() const override { return inner_->digest(); }

  Cid put(const Chunk& chunk) override {
    ++puts_;
    Cid cid = compute_cid(chunk, inner_->digest());
    if (!inner_->contains(cid)) {
      ++new_chunks_;
      new_bytes_ += chunk.payload.size();
    }
    inner_->put(chunk);
    return cid;
  }

  Chunk get(const Cid& cid, bool verify = false) const override {
    ++gets_;
    return inner_->get(cid, verify);
  }

  bool contains(const Cid& cid) const override { return inner_->contains(cid); }
  ChunkStoreStats stats() const override { return inner_->stats(); }

  std::uint64_t gets() const { return gets_; }
  std::uint64_t puts() const { return puts_; }
  std::uint64_t new_chunks() const { return new_chunks_; }
  std::uint64_t new_bytes() const { return new_bytes_; }

  void reset() {
    gets_ = 0;
    puts_ = 0;
    new_chunks_ = 0;
    new_bytes_ = 0;
  }

  const ChunkStorePtr& inner() const { return inner_; }

 private:
  ChunkStorePtr inner_;
  mutable std::atomic<std::uint64_t> gets_{0};
  std::atomic<std::uint64_t> puts_{0};
  std::atomic<std::uint64_t> new_chunks_{0};
  std::atomic<std::uint64_t> new_bytes_{0};
};

}  // namespace forkstore
