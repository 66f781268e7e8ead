#include <fstream>

#include "gtest_util.hpp"

using namespace fs_test;

namespace {

struct Fixture {
  MemoryChunkStore chunks;
  ObjectStore objects{chunks};
};

}  // namespace

TEST(BranchManager, TaggedPutsAndGuards) {
  Fixture f;
  BranchManager bm;
  const auto v1 = bm.put_tagged(f.objects, "k", "master", Value::integer(1), std::nullopt, {}, kDefaultBranch);
  EXPECT_EQ(bm.head("k", "master"), v1.uid);
  EXPECT_FS_ERROR(bm.put_tagged(f.objects, "k", "dev", Value::integer(2), std::nullopt, {}, kDefaultBranch),
                  ErrorCode::BranchNotFound);
  const auto v2 = bm.put_tagged(f.objects, "k", "master", Value::integer(2), v1.uid, {}, kDefaultBranch);
  EXPECT_EQ(v2.object.bases, std::vector<Uid>{v1.uid});
  EXPECT_FS_ERROR(bm.put_tagged(f.objects, "k", "master", Value::integer(3), v1.uid, {}, kDefaultBranch),
                  ErrorCode::GuardMismatch);
  EXPECT_EQ(bm.head("k", "master"), v2.uid);
  EXPECT_FS_ERROR(bm.put_tagged(f.objects, "k", "", Value::integer(3), std::nullopt, {}, kDefaultBranch),
                  ErrorCode::InvalidArgument);
}

TEST(BranchManager, ForkRenameRemove) {
  Fixture f;
  BranchManager bm;
  const auto v1 = bm.put_tagged(f.objects, "k", "master", Value::integer(1), std::nullopt, {}, kDefaultBranch);
  bm.fork_branch("k", "master", "dev");
  EXPECT_EQ(bm.head("k", "dev"), v1.uid);
  EXPECT_FS_ERROR(bm.fork_branch("k", "master", "dev"), ErrorCode::BranchExists);
  EXPECT_FS_ERROR(bm.fork_branch("k", "nope", "x"), ErrorCode::BranchNotFound);
  bm.rename("k", "dev", "feature");
  EXPECT_FALSE(bm.head("k", "dev"));
  EXPECT_EQ(bm.head("k", "feature"), v1.uid);
  EXPECT_FS_ERROR(bm.rename("k", "feature", "master"), ErrorCode::BranchExists);
  EXPECT_FS_ERROR(bm.rename("k", "ghost", "x"), ErrorCode::BranchNotFound);
  bm.remove("k", "feature");
  EXPECT_FS_ERROR(bm.remove("k", "feature"), ErrorCode::BranchNotFound);
  EXPECT_EQ(bm.tagged("k").size(), 1u);
  bm.remove("k", "master");
  EXPECT_FALSE(bm.has_key("k"));
  EXPECT_TRUE(bm.keys().empty());
}

TEST(BranchManager, UntaggedHeadsFollowConflicts) {
  // Two writers fork the same version; both results stay heads until merged.
  Fixture f;
  BranchManager bm;
  const auto v1 = bm.put_untagged(f.objects, "x", std::nullopt, Value::integer(10), {});
  EXPECT_EQ(bm.untagged("x"), std::vector<Uid>{v1.uid});
  const auto v2 = bm.put_untagged(f.objects, "x", v1.uid, Value::integer(11), {});
  const auto v3 = bm.put_untagged(f.objects, "x", v1.uid, Value::integer(12), {});
  auto heads = bm.untagged("x");
  std::sort(heads.begin(), heads.end());
  std::vector<Uid> want{v2.uid, v3.uid};
  std::sort(want.begin(), want.end());
  EXPECT_EQ(heads, want);
  // Re-committing identical content is a no-op for the table.
  bm.put_untagged(f.objects, "x", v1.uid, Value::integer(11), {});
  EXPECT_EQ(bm.untagged("x").size(), 2u);
}

TEST(BranchManager, LogReplayAndTornFrame) {
  TempDir d;
  const auto path = d.path() / "branches.log";
  Fixture f;
  Uid v1, v2;
  {
    BranchManager bm(path);
    v1 = bm.put_tagged(f.objects, "k", "master", Value::integer(1), std::nullopt, {}, kDefaultBranch).uid;
    bm.fork_branch("k", "master", "dev");
    v2 = bm.put_tagged(f.objects, "k", "dev", Value::integer(2), std::nullopt, {}, kDefaultBranch).uid;
    bm.rename("k", "dev", "renamed");
    bm.put_untagged(f.objects, "u", std::nullopt, Value::string("s"), {});
    bm.sync();
  }
  const auto good_size = std::filesystem::file_size(path);
  {
    BranchManager bm(path);
    EXPECT_EQ(bm.head("k", "master"), v1);
    EXPECT_EQ(bm.head("k", "renamed"), v2);
    EXPECT_FALSE(bm.head("k", "dev"));
    EXPECT_EQ(bm.untagged("u").size(), 1u);
    bm.remove("k", "master");
  }
  // Tear the last frame: the remove is lost, everything before survives.
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  {
    BranchManager bm(path);
    EXPECT_EQ(bm.head("k", "master"), v1);
    EXPECT_EQ(std::filesystem::file_size(path), good_size);
    bm.remove("k", "master");
  }
  BranchManager bm(path);
  EXPECT_FALSE(bm.head("k", "master"));
}

TEST(BranchManager, RejectsForeignFile) {
  TempDir d;
  const auto path = d.path() / "branches.log";
  std::ofstream(path) << "garbage";
  EXPECT_FS_ERROR(BranchManager bm(path), ErrorCode::Corrupt);
}
