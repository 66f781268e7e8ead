#include <unordered_map>

#include "gtest_util.hpp"

using namespace fs_test;

TEST(Value, PrimitiveRoundTrips) {
  EXPECT_EQ(Value::string("hi").as_string(), "hi");
  EXPECT_EQ(Value::integer(-42).as_integer(), -42);
  EXPECT_EQ(Value::tuple({b("a"), b(""), b("c")}).as_tuple(), (std::vector<Bytes>{b("a"), b(""), b("c")}));
  EXPECT_EQ(string_insert(Value::string("held"), 3, "lo wor").as_string(), "hello word");
  EXPECT_EQ(tuple_insert(Value::tuple({b("x")}), 0, b("w")).as_tuple().front(), b("w"));
  EXPECT_FS_ERROR(Value::string("x").as_integer(), ErrorCode::TypeMismatch);
  EXPECT_FS_ERROR(string_insert(Value::string("x"), 5, "y"), ErrorCode::OutOfRange);
  EXPECT_FS_ERROR(integer_add(Value::integer(INT64_MAX), 1), ErrorCode::Overflow);
  EXPECT_FS_ERROR(integer_multiply(Value::integer(INT64_MIN), -1), ErrorCode::Overflow);
  EXPECT_EQ(parse_value_type("map"), ValueType::Map);
  EXPECT_FS_ERROR(parse_value_type("matrix"), ErrorCode::InvalidArgument);
}

TEST(FObject, MetaChunkRoundTrip) {
  FObject o;
  o.type = ValueType::Tuple;
  o.key = "k";
  o.data = encode_tuple({b("f")});
  o.depth = 7;
  o.bases = {digest_of(b("a")), digest_of(b("b"))};
  o.context = b("ctx");
  EXPECT_EQ(FObject::from_chunk(o.to_chunk()), o);
  Chunk c = o.to_chunk();
  c.payload.push_back(0);
  EXPECT_FS_ERROR(FObject::from_chunk(c), ErrorCode::Corrupt);
  c = o.to_chunk();
  c.payload[0] = 99;
  EXPECT_FS_ERROR(FObject::from_chunk(c), ErrorCode::Corrupt);
  EXPECT_FS_ERROR(FObject::from_chunk(Chunk{ChunkType::Blob, {}}), ErrorCode::TypeMismatch);
}

TEST(ObjectStore, CommitDepthAndUidDeterminism) {
  MemoryChunkStore s;
  ObjectStore os(s);
  const auto v1 = os.commit("k", Value::integer(1), {});
  const auto v2 = os.commit("k", Value::integer(2), {v1.uid});
  const auto v3 = os.commit("k", Value::integer(3), {v1.uid});
  const auto v4 = os.commit("k", Value::integer(5), {v2.uid, v3.uid});
  EXPECT_EQ(v1.object.depth, 0u);
  EXPECT_EQ(v4.object.depth, 2u);
  // Same content and history: same uid, in any store.
  MemoryChunkStore other;
  ObjectStore os2(other);
  EXPECT_EQ(os2.commit("k", Value::integer(1), {}).uid, v1.uid);
  EXPECT_NE(os.commit("k", Value::integer(1), {}, b("note")).uid, v1.uid);
  EXPECT_EQ(os.load(v4.uid).bases, (std::vector<Uid>{v2.uid, v3.uid}));
}

TEST(ObjectStore, CommitValidatesBases) {
  MemoryChunkStore s;
  ObjectStore os(s, 16);
  const auto a = os.commit("a", Value::integer(1), {});
  EXPECT_FS_ERROR(os.commit("b", Value::integer(1), {a.uid}), ErrorCode::KeyMismatch);
  EXPECT_FS_ERROR(os.commit("a", Value::string("x"), {a.uid}), ErrorCode::TypeMismatch);
  EXPECT_FS_ERROR(os.commit("a", Value::integer(1), {digest_of(b("ghost"))}), ErrorCode::NotFound);
  EXPECT_FS_ERROR(os.commit("a", Value::string(std::string(17, 'x')), {}), ErrorCode::InvalidArgument);
  PosTree missing{TreeKind::Blob, digest_of(b("nothing"))};
  EXPECT_FS_ERROR(os.commit("a", Value::tree(missing), {}), ErrorCode::NotFound);
  const Cid blob_cid = s.put(Chunk{ChunkType::Blob, b("x")});
  EXPECT_FS_ERROR(os.load(blob_cid), ErrorCode::NotFound);
}

TEST(ObjectStore, TrackIsBreadthFirstWithInclusiveBounds) {
  MemoryChunkStore s;
  ObjectStore os(s);
  // v0 <- v1 <- v2 <- v4, v0 <- v3 <- v4 (merge)
  const auto v0 = os.commit("k", Value::integer(0), {});
  const auto v1 = os.commit("k", Value::integer(1), {v0.uid});
  const auto v2 = os.commit("k", Value::integer(2), {v1.uid});
  const auto v3 = os.commit("k", Value::integer(3), {v0.uid});
  const auto v4 = os.commit("k", Value::integer(4), {v2.uid, v3.uid});
  auto t = os.track(v4.uid, 0, 10);
  std::vector<std::pair<std::uint64_t, std::int64_t>> got;
  for (const auto& e : t) got.emplace_back(e.distance, e.object.value().as_integer());
  EXPECT_EQ(got, (std::vector<std::pair<std::uint64_t, std::int64_t>>{{0, 4}, {1, 2}, {1, 3}, {2, 1}, {2, 0}}));
  EXPECT_EQ(os.track(v4.uid, 1, 1).size(), 2u);
  EXPECT_TRUE(os.track(v0.uid, 1, 5).empty());
  EXPECT_FS_ERROR(os.track(v4.uid, 3, 1), ErrorCode::InvalidArgument);
}

TEST(ObjectStore, LcaOnVersionGraph) {
  MemoryChunkStore s;
  ObjectStore os(s);
  const auto r = os.commit("k", Value::integer(0), {});
  const auto a1 = os.commit("k", Value::integer(1), {r.uid});
  const auto a2 = os.commit("k", Value::integer(2), {a1.uid});
  const auto b1 = os.commit("k", Value::integer(3), {a1.uid});
  const auto b2 = os.commit("k", Value::integer(4), {b1.uid});
  EXPECT_EQ(os.lca(a2.uid, b2.uid), a1.uid);
  EXPECT_EQ(os.lca(a2.uid, a1.uid), a1.uid);
  EXPECT_EQ(os.lca(b2.uid, b2.uid), b2.uid);
  const auto lone = os.commit("k", Value::integer(9), {});
  EXPECT_FALSE(os.lca(lone.uid, b2.uid));
  const auto other = os.commit("other", Value::integer(0), {});
  EXPECT_FS_ERROR(os.lca(other.uid, r.uid), ErrorCode::KeyMismatch);
}

TEST(DagLca, MatchesAncestorSetOracle) {
  std::mt19937_64 rng(31);
  for (int g = 0; g < 200; ++g) {
    const int n = 2 + static_cast<int>(rng() % 300);
    Dag d = Dag::random(rng, n, 0.05);
    const auto anc = d.ancestors();
    std::unordered_map<Uid, int, CidHash> idx;
    for (int i = 0; i < n; ++i) idx[d.ids[i]] = i;
    for (int q = 0; q < 10; ++q) {
      const int a = static_cast<int>(rng() % n), c = static_cast<int>(rng() % n);
      auto got = dag_lca(
          d.ids[a], d.ids[c], [&](const Uid& u) { return d.depth[idx.at(u)]; },
          [&](const Uid& u) {
            std::vector<Uid> out;
            for (int p : d.bases[idx.at(u)]) out.push_back(d.ids[p]);
            return out;
          });
      const auto lowest = d.lowest_common(anc, a, c);
      if (lowest.empty()) {
        EXPECT_FALSE(got);
        continue;
      }
      ASSERT_TRUE(got);
      const int gi = idx.at(*got);
      // The answer is a lowest common ancestor of maximal depth.
      EXPECT_NE(std::find(lowest.begin(), lowest.end(), gi), lowest.end());
      for (int x : lowest) EXPECT_LE(d.depth[x], d.depth[gi]);
    }
  }
}

TEST(ObjectStore, DiffPrimitivesAndTrees) {
  MemoryChunkStore s;
  ObjectStore os(s);
  const auto a = os.commit("k", Value::string("one"), {});
  const auto c = os.commit("k", Value::string("two"), {a.uid});
  auto d = os.diff(a.uid, c.uid);
  EXPECT_TRUE(d.value_changed);
  EXPECT_EQ(d.after.as_string(), "two");
  EXPECT_TRUE(os.diff(a.uid, a.uid).empty());
  const ChunkerConfig cfg;
  const auto m1 = os.commit("m", Value::tree(build_map(s, cfg, {{b("x"), b("1")}})), {});
  const auto m2 = os.commit("m", Value::tree(build_map(s, cfg, {{b("x"), b("2")}})), {m1.uid});
  auto md = os.diff(m1.uid, m2.uid);
  ASSERT_EQ(md.tree.keys.size(), 1u);
  EXPECT_EQ(md.tree.keys[0].op, DiffOp::Changed);
  EXPECT_FS_ERROR(os.diff(a.uid, m1.uid), ErrorCode::TypeMismatch);
}

TEST(ObjectStore, VerifiedLoadWalksHistory) {
  MemoryChunkStore s;
  ObjectStore os(s);
  const ChunkerConfig cfg = ChunkerConfig::make(64, 256, 4, 16);
  std::mt19937_64 rng(32);
  auto v = os.commit("b", Value::tree(build_blob(s, cfg, random_bytes(rng, 4000))), {});
  const Uid first = v.uid;
  for (int i = 0; i < 5; ++i)
    v = os.commit("b", Value::tree(build_blob(s, cfg, random_bytes(rng, 4000))), {v.uid});
  EXPECT_NO_THROW(os.load_verified(v.uid, 10, true));
  // Corrupt a leaf of the oldest version: shallow checks miss it, deep ones do not.
  const PosTree t0 = os.load(first).tree();
  Cid leaf;
  for_each_node(s, t0, [&](const Node& n, std::uint32_t) {
    if (n.is_leaf()) leaf = n.cid();
  });
  Chunk c = s.get(leaf);
  c.payload.back() ^= 1;
  s.overwrite_for_testing(leaf, c);
  EXPECT_NO_THROW(os.load_verified(v.uid, 10, false));
  EXPECT_NO_THROW(os.load_verified(v.uid, 4, true));
  EXPECT_FS_ERROR(os.load_verified(v.uid, 5, true), ErrorCode::TamperDetected);
  EXPECT_FS_ERROR(os.track(v.uid, 0, 5, true), ErrorCode::TamperDetected);
}
