#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <vector>

#include "forkstore/cluster/wire.hpp"

namespace forkstore::cluster {

/// Carries one request frame to a node and returns its response frame.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::uint32_t nodes() const = 0;
  virtual Bytes call(std::uint32_t node, const Bytes& request_frame) = 0;

  /// Sends `payload` under `op` and returns the response body. Servlet
  /// errors are rethrown as their original class.
  Bytes request(std::uint32_t node, Op op, const Bytes& payload) {
    const std::uint64_t id = next_id_.fetch_add(1) + 1;
    Bytes raw = call(node, encode_frame(Frame{static_cast<std::uint8_t>(op), id, payload}));
    Frame resp = decode_frame(raw);
    if (resp.request_id != id) throw Error(ErrorCode::Transport, "response id does not match the request");
    if (resp.opcode != (static_cast<std::uint8_t>(op) | kResponseBit))
      throw Error(ErrorCode::Transport, "response opcode does not match the request");
    return unwrap_response(resp.payload);
  }

 private:
  std::atomic<std::uint64_t> next_id_{0};
};

using FrameHandler = std::function<Bytes(const Bytes&)>;

/// Calls node handlers directly. Frames are still encoded and decoded, so the
/// wire format is exercised exactly as over a socket.
class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(std::vector<FrameHandler> handlers) : handlers_(std::move(handlers)) {}
  std::uint32_t nodes() const override { return static_cast<std::uint32_t>(handlers_.size()); }
  Bytes call(std::uint32_t node, const Bytes& frame) override {
    if (node >= handlers_.size()) throw Error(ErrorCode::Transport, "no node " + std::to_string(node));
    return handlers_[node](frame);
  }

 private:
  std::vector<FrameHandler> handlers_;
};

/// A node's chunk store reached through GetChunk/PutChunk. Verification
/// re-hashes on the caller's side, so a store cannot vouch for itself.
class RemoteChunkStore final : public ChunkStore {
 public:
  RemoteChunkStore(std::shared_ptr<Transport> t, std::uint32_t node, DigestAlgorithm algo)
      : t_(std::move(t)), node_(node), algo_(algo) {}

  DigestAlgorithm digest() const override { return algo_; }

  Cid put(const Chunk& c) override {
    ByteWriter w;
    put_chunk(w, c);
    Bytes body = t_->request(node_, Op::PutChunk, std::move(w).take());
    ByteReader r(body);
    return get_uid(r);
  }

  Chunk get(const Cid& cid, bool verify = false) const override {
    ByteWriter w;
    put_uid(w, cid);
    Bytes body = t_->request(node_, Op::GetChunk, std::move(w).take());
    ByteReader r(body);
    Chunk c = get_chunk(r);
    ++fetches_;
    if (verify) verify_chunk_or_throw(c, cid, algo_);
    return c;
  }

  bool contains(const Cid& cid) const override {
    ByteWriter w;
    put_uid(w, cid);
    Bytes body = t_->request(node_, Op::HasChunk, std::move(w).take());
    return !body.empty() && body[0] != 0;
  }

  ChunkStoreStats stats() const override {
    Bytes body = t_->request(node_, Op::Stats, {});
    ByteReader r(body);
    return get_stats(r);
  }

  std::uint64_t fetches() const { return fetches_; }

 private:
  std::shared_ptr<Transport> t_;
  std::uint32_t node_;
  DigestAlgorithm algo_;
  mutable std::atomic<std::uint64_t> fetches_{0};
};

}  // namespace forkstore::cluster
