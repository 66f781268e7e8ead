#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "forkstore/log_chunk_store.hpp"
#include "forkstore/object.hpp"

namespace forkstore {

inline constexpr char kBranchLogMagic[4] = {'F', 'K', 'B', 'B'};
inline constexpr std::string_view kDefaultBranch = "master";

inline void validate_branch_name(std::string_view name) {
  if (name.empty() || name.size() > 255)
    throw Error(ErrorCode::InvalidArgument, "branch name must be 1 to 255 bytes");
  for (unsigned char c : name)
    if (c < 0x20 || c == 0x7f) throw Error(ErrorCode::InvalidArgument, "branch name contains a control character");
}

/// One branch-table mutation. Also the unit of the `branches.log` format.
struct BranchOp {
  enum Code : std::uint8_t { SetTagged = 1, RemoveTagged = 2, AddUntagged = 3, RemoveUntagged = 4 };
  Code code = SetTagged;
  std::string key;
  std::string name;  // tagged ops only
  Uid uid;
};

/// Per-key branch tables: named heads (TB) and untagged heads (UB).
///
/// `branches.log`: magic "FKBB", then frames of [u32 length][ops], each op
/// being key (u32 len), op code u8, name (u32 len), uid (32 bytes). A frame is
/// one atomic batch; a torn final frame is dropped on open.
class BranchManager {
 public:
  BranchManager() = default;

  explicit BranchManager(const fs::path& log_path) { open(log_path); }

  BranchManager(const BranchManager&) = delete;
  BranchManager& operator=(const BranchManager&) = delete;

  /// Serializes mutations of one key.
  std::unique_lock<std::mutex> lock_key(const std::string& key) {
    std::mutex* m;
    {
      std::lock_guard g(locks_mu_);
      auto& slot = key_locks_[key];
      if (!slot) slot = std::make_unique<std::mutex>();
      m = slot.get();
    }
    return std::unique_lock<std::mutex>(*m);
  }

  /// Logs then applies a batch.
  void apply(const std::vector<BranchOp>& ops) {
    if (ops.empty()) return;
    std::unique_lock lock(mu_);
    if (log_.is_open()) {
      ByteWriter body;
      for (const auto& op : ops) {
        body.blob(as_view(op.key));
        body.u8(op.code);
        body.blob(as_view(op.name));
        body.raw(op.uid.view());
      }
      ByteWriter frame;
      frame.u32(static_cast<std::uint32_t>(body.bytes().size()));
      frame.raw(body.bytes());
      log_.write_at(log_end_, frame.bytes().data(), frame.bytes().size());
      log_end_ += frame.bytes().size();
    }
    for (const auto& op : ops) apply_locked(op);
  }

  std::optional<Uid> head(const std::string& key, const std::string& branch) const {
    std::shared_lock lock(mu_);
    auto it = tables_.find(key);
    if (it == tables_.end()) return std::nullopt;
    auto b = it->second.tb.find(branch);
    if (b == it->second.tb.end()) return std::nullopt;
    return b->second;
  }

  std::map<std::string, Uid> tagged(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = tables_.find(key);
    return it == tables_.end() ? std::map<std::string, Uid>{} : it->second.tb;
  }

  std::vector<Uid> untagged(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = tables_.find(key);
    if (it == tables_.end()) return {};
    return {it->second.ub.begin(), it->second.ub.end()};
  }

  bool has_key(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = tables_.find(key);
    return it != tables_.end() && !(it->second.tb.empty() && it->second.ub.empty());
  }

  std::vector<std::string> keys() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, t] : tables_)
      if (!t.tb.empty() || !t.ub.empty()) out.push_back(k);
    return out;
  }

  void sync() {
    std::unique_lock lock(mu_);
    if (log_.is_open()) log_.sync();
  }

  // ---- table operations -------------------------------------------------------

  /// Commits on a named branch, replacing its head. With `guard`, succeeds
  /// only while the head still equals it. The default branch is created on
  /// first use; other branches must exist.
  Version put_tagged(ObjectStore& objects, const std::string& key, const std::string& branch, const Value& value,
                     const std::optional<Uid>& guard, ByteView context, std::string_view default_branch) {
    validate_branch_name(branch);
    auto lock = lock_key(key);
    std::optional<Uid> cur = head(key, branch);
    if (!cur && branch != default_branch)
      throw Error(ErrorCode::BranchNotFound, "branch '" + branch + "' of key '" + key + "' does not exist");
    if (guard && (!cur || *cur != *guard))
      throw Error(ErrorCode::GuardMismatch, "branch head is " + (cur ? cur->hex() : std::string("unset")));
    std::vector<Uid> bases;
    if (cur) bases.push_back(*cur);
    Version v = objects.commit(key, value, bases, context);
    apply({{BranchOp::SetTagged, key, branch, v.uid}});
    return v;
  }

  /// Commits on top of `base` without a branch name. The new version joins
  /// the untagged heads and its base leaves them; re-committing an existing
  /// version leaves the table untouched.
  Version put_untagged(ObjectStore& objects, const std::string& key, const std::optional<Uid>& base, const Value& value,
                       ByteView context) {
    auto lock = lock_key(key);
    std::vector<Uid> bases;
    if (base) bases.push_back(*base);
    bool created = false;
    Version v = objects.commit(key, value, bases, context, &created);
    if (!created) return v;
    std::vector<BranchOp> ops{{BranchOp::AddUntagged, key, "", v.uid}};
    if (base && untagged_contains(key, *base)) ops.push_back({BranchOp::RemoveUntagged, key, "", *base});
    apply(ops);
    return v;
  }

  /// Points `new_branch` at an existing version; writes no chunks.
  void fork(const std::string& key, const Uid& target, const std::string& new_branch) {
    validate_branch_name(new_branch);
    auto lock = lock_key(key);
    if (head(key, new_branch))
      throw Error(ErrorCode::BranchExists, "branch '" + new_branch + "' of key '" + key + "' already exists");
    apply({{BranchOp::SetTagged, key, new_branch, target}});
  }

  void fork_branch(const std::string& key, const std::string& ref, const std::string& new_branch) {
    validate_branch_name(new_branch);
    auto lock = lock_key(key);
    std::optional<Uid> h = head(key, ref);
    if (!h) throw missing(key, ref);
    if (head(key, new_branch))
      throw Error(ErrorCode::BranchExists, "branch '" + new_branch + "' of key '" + key + "' already exists");
    apply({{BranchOp::SetTagged, key, new_branch, *h}});
  }

  void rename(const std::string& key, const std::string& branch, const std::string& new_name) {
    validate_branch_name(new_name);
    auto lock = lock_key(key);
    std::optional<Uid> h = head(key, branch);
    if (!h) throw missing(key, branch);
    if (branch == new_name) return;
    if (head(key, new_name))
      throw Error(ErrorCode::BranchExists, "branch '" + new_name + "' of key '" + key + "' already exists");
    apply({{BranchOp::SetTagged, key, new_name, *h}, {BranchOp::RemoveTagged, key, branch, *h}});
  }

  void remove(const std::string& key, const std::string& branch) {
    auto lock = lock_key(key);
    std::optional<Uid> h = head(key, branch);
    if (!h) throw missing(key, branch);
    apply({{BranchOp::RemoveTagged, key, branch, *h}});
  }

  bool untagged_contains(const std::string& key, const Uid& uid) const {
    std::shared_lock lock(mu_);
    auto it = tables_.find(key);
    return it != tables_.end() && it->second.ub.count(uid) != 0;
  }

  static Error missing(const std::string& key, const std::string& branch) {
    return Error(ErrorCode::BranchNotFound, "branch '" + branch + "' of key '" + key + "' does not exist");
  }

 private:
  struct Table {
    std::map<std::string, Uid> tb;
    std::set<Uid> ub;
  };

  void apply_locked(const BranchOp& op) {
    Table& t = tables_[op.key];
    switch (op.code) {
      case BranchOp::SetTagged: t.tb[op.name] = op.uid; break;
      case BranchOp::RemoveTagged: t.tb.erase(op.name); break;
      case BranchOp::AddUntagged: t.ub.insert(op.uid); break;
      case BranchOp::RemoveUntagged: t.ub.erase(op.uid); break;
      default: throw Error(ErrorCode::Corrupt, "unknown branch op " + std::to_string(op.code));
    }
  }

  void open(const fs::path& path) {
    const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
    log_ = detail::File(path, O_RDWR | O_CREAT);
    if (fresh) {
      log_.write_at(0, reinterpret_cast<const std::uint8_t*>(kBranchLogMagic), 4);
      log_end_ = 4;
      return;
    }
    const std::uint64_t size = log_.size();
    Bytes all(static_cast<std::size_t>(size));
    log_.read_at(0, all.data(), all.size());
    if (size < 4 || !std::equal(all.begin(), all.begin() + 4, kBranchLogMagic))
      throw Error(ErrorCode::Corrupt, path.string() + " is not a branch log");
    std::uint64_t off = 4;
    while (off + 4 <= size) {
      ByteReader lr(ByteView(all).subspan(off, 4));
      const std::uint32_t len = lr.u32();
      if (off + 4 + len > size) break;
      ByteReader r(ByteView(all).subspan(off + 4, len));
      std::vector<BranchOp> ops;
      while (!r.done()) {
        BranchOp op;
        op.key = to_string(r.blob());
        op.code = static_cast<BranchOp::Code>(r.u8());
        op.name = to_string(r.blob());
        op.uid = Cid::from_view(r.raw(Cid::kSize));
        ops.push_back(std::move(op));
      }
      for (const auto& op : ops) apply_locked(op);
      off += 4 + len;
    }
    if (off != size) log_.truncate(off);
    log_end_ = off;
  }

  mutable std::shared_mutex mu_;
  std::map<std::string, Table> tables_;
  std::mutex locks_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_locks_;
  detail::File log_;
  std::uint64_t log_end_ = 0;
};

}  // namespace forkstore
