#pragma once

#include <memory>
#include <vector>

#include "forkstore/cluster/routing.hpp"
#include "forkstore/cluster/transport.hpp"
#include "forkstore/engine.hpp"

namespace forkstore::cluster {

/// One partition: an Engine whose chunk writes are spread over all stores,
/// co-hosted with store `id`. Meta chunks and the branch tables stay here.
class Servlet {
 public:
  /// `stores[id]` is this node's own store; the others may be remote.
  Servlet(std::uint32_t id, std::vector<ChunkStorePtr> stores, std::unique_ptr<BranchManager> branches,
          EngineConfig cfg, bool one_layer = false, std::size_t cache_chunks = 0)
      : id_(id), local_(stores.at(id)), cfg_(cfg) {
    auto routed = std::make_shared<RoutedChunkStore>(std::move(stores), id, one_layer, cache_chunks);
    routed_ = routed.get();
    engine_ = std::make_unique<Engine>(std::move(routed), std::move(branches), std::move(cfg));
  }

  std::uint32_t id() const { return id_; }
  Engine& engine() { return *engine_; }
  const ChunkStorePtr& local_store() const { return local_; }
  const RoutedChunkStore& routed() const { return *routed_; }

  /// Decodes a request frame, executes it and encodes the response frame.
  /// Never throws for request-level failures; they become error responses.
  Bytes handle_frame(const Bytes& raw) {
    Frame req;
    try {
      req = decode_frame(raw);
    } catch (const Error& e) {
      return encode_frame(Frame{kResponseBit, 0, error_payload(e)});
    }
    Frame resp{static_cast<std::uint8_t>(req.opcode | kResponseBit), req.request_id, {}};
    try {
      if (!valid_op(req.opcode))
        throw Error(ErrorCode::UnknownOpcode, "unknown opcode " + std::to_string(req.opcode));
      resp.payload = ok_payload(execute(static_cast<Op>(req.opcode), req.payload));
    } catch (const Error& e) {
      resp.payload = error_payload(e);
    } catch (const std::exception& e) {
      resp.payload = error_payload(Error(ErrorCode::Io, e.what()));
    }
    return encode_frame(resp);
  }

  Bytes execute(Op op, const Bytes& payload) {
    ByteReader r(payload);
    ByteWriter w;
    Engine& e = *engine_;
    switch (op) {
      case Op::GetBranch: {
        auto key = get_str(r);
        auto branch = get_str(r);
        r.expect_done("request");
        put_object(w, e.get(key, branch));
        break;
      }
      case Op::GetUid: {
        auto key = get_str(r);
        auto uid = get_uid(r);
        r.expect_done("request");
        put_object(w, e.get(key, uid));
        break;
      }
      case Op::PutBranch: {
        auto key = get_str(r);
        auto branch = get_str(r);
        auto value = get_value(r);
        auto guard = get_opt_uid(r);
        Bytes ctx = r.blob_copy();
        r.expect_done("request");
        put_uid(w, e.put(key, branch, value, guard, ctx));
        break;
      }
      case Op::PutUid: {
        auto key = get_str(r);
        auto base = get_opt_uid(r);
        auto value = get_value(r);
        Bytes ctx = r.blob_copy();
        r.expect_done("request");
        put_uid(w, e.put(key, base, value, ctx));
        break;
      }
      case Op::MergeBranch: {
        auto key = get_str(r);
        auto target = get_str(r);
        auto ref = get_str(r);
        auto res = get_resolver(r);
        r.expect_done("request");
        put_uid(w, e.merge(key, target, ref, res));
        break;
      }
      case Op::MergeUid: {
        auto key = get_str(r);
        auto target = get_str(r);
        auto ref = get_uid(r);
        auto res = get_resolver(r);
        r.expect_done("request");
        put_uid(w, e.merge(key, target, ref, res));
        break;
      }
      case Op::MergeMany: {
        auto key = get_str(r);
        std::vector<Uid> uids(r.u32());
        for (auto& u : uids) u = get_uid(r);
        auto res = get_resolver(r);
        r.expect_done("request");
        put_uid(w, e.merge(key, uids, res));
        break;
      }
      case Op::ListKeys: {
        r.expect_done("request");
        auto keys = e.list_keys();
        w.u32(static_cast<std::uint32_t>(keys.size()));
        for (const auto& k : keys) put_str(w, k);
        break;
      }
      case Op::ListTagged: {
        auto key = get_str(r);
        r.expect_done("request");
        auto tb = e.list_tagged(key);
        w.u32(static_cast<std::uint32_t>(tb.size()));
        for (const auto& [name, uid] : tb) {
          put_str(w, name);
          put_uid(w, uid);
        }
        break;
      }
      case Op::ListUntagged: {
        auto key = get_str(r);
        r.expect_done("request");
        auto ub = e.list_untagged(key);
        w.u32(static_cast<std::uint32_t>(ub.size()));
        for (const auto& u : ub) put_uid(w, u);
        break;
      }
      case Op::ForkBranch: {
        auto key = get_str(r);
        auto ref = get_str(r);
        auto name = get_str(r);
        r.expect_done("request");
        e.fork(key, ref, name);
        break;
      }
      case Op::ForkUid: {
        auto key = get_str(r);
        auto ref = get_uid(r);
        auto name = get_str(r);
        r.expect_done("request");
        e.fork(key, ref, name);
        break;
      }
      case Op::Rename: {
        auto key = get_str(r);
        auto from = get_str(r);
        auto to = get_str(r);
        r.expect_done("request");
        e.rename(key, from, to);
        break;
      }
      case Op::Remove: {
        auto key = get_str(r);
        auto branch = get_str(r);
        r.expect_done("request");
        e.remove(key, branch);
        break;
      }
      case Op::TrackBranch: {
        auto key = get_str(r);
        auto branch = get_str(r);
        auto lo = r.u64(), hi = r.u64();
        r.expect_done("request");
        put_track(w, e.track(key, branch, lo, hi));
        break;
      }
      case Op::TrackUid: {
        auto key = get_str(r);
        auto uid = get_uid(r);
        auto lo = r.u64(), hi = r.u64();
        r.expect_done("request");
        put_track(w, e.track(key, uid, lo, hi));
        break;
      }
      case Op::Lca: {
        auto key = get_str(r);
        auto a = get_uid(r);
        auto b = get_uid(r);
        r.expect_done("request");
        put_opt_uid(w, e.lca(key, a, b));
        break;
      }
      // Chunk requests bypass the engine and hit this node's store.
      case Op::GetChunk: {
        auto cid = get_uid(r);
        r.expect_done("request");
        put_chunk(w, local_->get(cid));
        break;
      }
      case Op::PutChunk: {
        Chunk c = get_chunk(r);
        r.expect_done("request");
        put_uid(w, local_->put(c));
        break;
      }
      case Op::HasChunk: {
        auto cid = get_uid(r);
        r.expect_done("request");
        w.u8(local_->contains(cid) ? 1 : 0);
        break;
      }
      case Op::Stats:
        r.expect_done("request");
        put_stats(w, local_->stats());
        break;
      case Op::Hello:
        r.expect_done("request");
        w.u32(id_);
        w.u32(routed_->size());
        w.u8(routed_->one_layer() ? 1 : 0);
        put_str(w, cfg_.to_json().dump());
        break;
    }
    return std::move(w).take();
  }

 private:
  std::uint32_t id_;
  ChunkStorePtr local_;
  EngineConfig cfg_;
  RoutedChunkStore* routed_ = nullptr;
  std::unique_ptr<Engine> engine_;
};

}  // namespace forkstore::cluster
