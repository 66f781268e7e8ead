#include <map>
#include <thread>

#include "gtest_util.hpp"

using namespace fs_test;
using namespace forkstore::cluster;

TEST(Routing, KeysSpreadEvenly) {
  std::vector<int> hits(16, 0);
  for (int i = 0; i < 100000; ++i) ++hits[route_key("key-" + std::to_string(i), 16)];
  for (int h : hits) {
    EXPECT_GT(h, 6250 * 0.9);
    EXPECT_LT(h, 6250 * 1.1);
  }
  EXPECT_EQ(route_key("x", 1), 0u);
  EXPECT_FS_ERROR(route_key("x", 0), ErrorCode::InvalidArgument);
}

TEST(Routing, MetaStaysWithOriginDataUsesHighBits) {
  const Cid c = digest_of(b("chunk"));
  EXPECT_EQ(route_chunk(c, 3, true, 8), 3u);
  EXPECT_EQ(route_chunk(c, 3, false, 8), c.high64() % 8);
  // Data placement is independent of the low bits used by the index pattern.
  std::vector<int> hits(8, 0);
  std::mt19937_64 rng(61);
  int pattern_cids = 0;
  for (int i = 0; i < 200000 && pattern_cids < 4000; ++i) {
    const Cid x = digest_of(random_bytes(rng, 8));
    if ((x.low64() & 127) != 0) continue;
    ++pattern_cids;
    ++hits[route_chunk(x, 0, false, 8)];
  }
  for (int h : hits) EXPECT_GT(h, pattern_cids / 8 * 0.75);
}

TEST(Routing, CacheServesRepeatedRemoteReads) {
  std::vector<ChunkStorePtr> stores{std::make_shared<MemoryChunkStore>(), std::make_shared<MemoryChunkStore>()};
  auto counting = std::make_shared<CountingChunkStore>(stores[1]);
  stores[1] = counting;
  RoutedChunkStore routed(stores, 0, false, 16);
  std::vector<Cid> remote;
  for (int i = 0; remote.size() < 3; ++i) {
    Chunk c{ChunkType::Blob, b("c" + std::to_string(i))};
    const Cid cid = routed.put(c);
    if (routed.target(cid, ChunkType::Blob) == 1) remote.push_back(cid);
  }
  counting->reset();
  for (int rep = 0; rep < 5; ++rep)
    for (const auto& c : remote) routed.get(c);
  EXPECT_EQ(counting->gets(), 3u);
  EXPECT_GE(routed.cache_hits(), 12u);
}

TEST(Wire, FrameRoundTripAndValidation) {
  Frame f{static_cast<std::uint8_t>(Op::PutBranch), 77, b("payload")};
  const Bytes raw = encode_frame(f);
  EXPECT_EQ(raw.size(), kFrameHeader + 7);
  const Frame g = decode_frame(raw);
  EXPECT_EQ(g.opcode, f.opcode);
  EXPECT_EQ(g.request_id, 77u);
  EXPECT_EQ(g.payload, f.payload);
  Bytes bad = raw;
  bad[0] ^= 1;
  EXPECT_FS_ERROR(decode_frame(bad), ErrorCode::Corrupt);
  EXPECT_FS_ERROR(decode_frame(Bytes{1, 0}), ErrorCode::Corrupt);
}

TEST(Wire, FieldCodecsRoundTrip) {
  ByteWriter w;
  FObject o;
  o.type = ValueType::Integer;
  o.key = "k";
  o.data = Value::integer(3).data();
  o.bases = {digest_of(b("p"))};
  Conflict c{ConflictKind::ListRange, ValueType::List, b("key"), 2, 5, {b("b")}, {b("1")}, {}};
  put_object(w, o);
  put_value(w, Value::tuple({b("a")}));
  put_opt_uid(w, std::nullopt);
  put_resolver(w, Resolver::choose(2));
  put_conflicts(w, {c});
  const Bytes buf = std::move(w).take();
  ByteReader r(buf);
  EXPECT_EQ(get_object(r), o);
  EXPECT_EQ(get_value(r).as_tuple(), std::vector<Bytes>{b("a")});
  EXPECT_FALSE(get_opt_uid(r));
  EXPECT_EQ(get_resolver(r).side, 2);
  EXPECT_EQ(get_conflicts(r), std::vector<Conflict>{c});
  EXPECT_TRUE(r.done());
  ByteWriter hw;
  EXPECT_FS_ERROR(put_resolver(hw, Resolver::custom([](const Conflict&) { return std::nullopt; })),
                  ErrorCode::InvalidArgument);
}

TEST(Wire, ErrorsKeepTheirClass) {
  EXPECT_FS_ERROR(unwrap_response(error_payload(Error(ErrorCode::GuardMismatch, "x"))), ErrorCode::GuardMismatch);
  Conflict c;
  c.side1 = {b("l")};
  try {
    unwrap_response(error_payload(MergeConflictError({c})));
    FAIL();
  } catch (const MergeConflictError& e) {
    EXPECT_EQ(e.conflicts(), std::vector<Conflict>{c});
  }
  EXPECT_EQ(unwrap_response(ok_payload(b("body"))), b("body"));
}

TEST(Servlet, UnknownOpcodeAndMalformedRequests) {
  LocalCluster lc(LocalCluster::Options{});
  auto& s = lc.servlet(0);
  Frame resp = decode_frame(s.handle_frame(encode_frame(Frame{99, 5, {}})));
  EXPECT_EQ(resp.opcode, 99 | kResponseBit);
  EXPECT_EQ(resp.request_id, 5u);
  EXPECT_FS_ERROR(unwrap_response(resp.payload), ErrorCode::UnknownOpcode);
  resp = decode_frame(s.handle_frame(encode_frame(Frame{static_cast<std::uint8_t>(Op::GetBranch), 6, b("\x01")})));
  EXPECT_THROW(unwrap_response(resp.payload), Error);
  resp = decode_frame(s.handle_frame(Bytes{3, 0, 0, 0, 1}));
  EXPECT_FS_ERROR(unwrap_response(resp.payload), ErrorCode::Corrupt);
  EXPECT_FS_ERROR(lc.transport()->request(0, static_cast<Op>(23), {}), ErrorCode::UnknownOpcode);
}

TEST(Cluster, MatchesEmbeddedEngine) {
  auto embedded = Engine::in_memory();
  const auto want = conformance_transcript(*embedded);
  for (std::uint32_t n : {1u, 3u, 4u}) {
    for (bool one_layer : {false, true}) {
      LocalCluster::Options o;
      o.nodes = n;
      o.one_layer = one_layer;
      LocalCluster lc(o);
      auto client = lc.client(64);
      EXPECT_EQ(conformance_transcript(*client), want) << n << " nodes, one_layer=" << one_layer;
    }
  }
}

TEST(Cluster, BranchTablesLiveOnTheOwner) {
  LocalCluster lc(LocalCluster::Options{});
  auto client = lc.client();
  for (int i = 0; i < 40; ++i) client->put("key" + std::to_string(i), Value::integer(i));
  for (int i = 0; i < 40; ++i) {
    const std::string k = "key" + std::to_string(i);
    for (std::uint32_t s = 0; s < lc.nodes(); ++s)
      EXPECT_EQ(lc.servlet(s).engine().branches().has_key(k), s == client->owner(k));
  }
  EXPECT_EQ(client->list_keys().size(), 40u);
}

TEST(Cluster, TwoLayerSpreadsBlobChunks) {
  LocalCluster::Options o;
  o.engine.chunker = ChunkerConfig::make(512, 512);
  LocalCluster lc(o);
  auto client = lc.client();
  std::mt19937_64 rng(62);
  const Bytes data = random_bytes(rng, 400000);
  client->put("big", client->make_blob(data));
  for (std::uint32_t s = 0; s < lc.nodes(); ++s)
    EXPECT_GT(lc.store(s)->stats().chunks_by_type[static_cast<int>(ChunkType::Blob)], 50u);
  EXPECT_EQ(client->read_blob(client->get("big")), data);
  EXPECT_NO_THROW(client->verify(client->list_tagged("big")["master"], 0, true));

  LocalCluster::Options o1 = o;
  o1.one_layer = true;
  LocalCluster one(o1);
  auto c1 = one.client();
  c1->put("big", c1->make_blob(data));
  for (std::uint32_t s = 0; s < one.nodes(); ++s)
    EXPECT_EQ(one.store(s)->stats().unique_chunk_count == 0, s != c1->owner("big"));
  EXPECT_EQ(c1->read_blob(c1->get("big")), data);
}

TEST(Cluster, ClientDetectsTamperedRemoteChunk) {
  LocalCluster lc(LocalCluster::Options{});
  auto client = lc.client();
  const Uid u = client->put("k", Value::string("value"));
  const auto owner = client->owner("k");
  auto* mem = dynamic_cast<MemoryChunkStore*>(lc.store(owner).get());
  ASSERT_NE(mem, nullptr);
  Chunk c = mem->get(u);
  c.payload.back() ^= 1;
  mem->overwrite_for_testing(u, c);
  EXPECT_FS_ERROR(client->verify(u, 0, false), ErrorCode::TamperDetected);
}

TEST(Cluster, PersistentNodesRestart) {
  TempDir d;
  LocalCluster::Options o;
  o.dir = d.path();
  std::map<std::string, std::map<std::string, Uid>> tagged;
  std::map<std::string, std::vector<Uid>> untagged;
  {
    LocalCluster lc(o);
    auto client = lc.client();
    conformance_transcript(*client);
    for (const auto& k : client->list_keys()) {
      tagged[k] = client->list_tagged(k);
      untagged[k] = client->list_untagged(k);
    }
  }
  LocalCluster lc(o);
  auto client = lc.client();
  ASSERT_FALSE(tagged.empty());
  for (const auto& [k, t] : tagged) {
    EXPECT_EQ(client->list_tagged(k), t) << k;
    EXPECT_EQ(client->list_untagged(k), untagged[k]) << k;
    for (const auto& [name, uid] : t) EXPECT_NO_THROW(client->verify(uid, 100, true)) << k << "/" << name;
  }
  // Re-putting an existing version changes nothing.
  const std::string k = tagged.begin()->first;
  const Uid head = tagged.begin()->second.begin()->second;
  const FObject o0 = client->get(k, head);
  const auto before = lc.store(client->owner(k))->stats().unique_chunk_count;
  client->put(k, o0.bases.empty() ? std::optional<Uid>{} : std::optional<Uid>{o0.bases[0]}, o0.value(), o0.context);
  EXPECT_EQ(lc.store(client->owner(k))->stats().unique_chunk_count, before);
}

TEST(Config, ParsesAndRejects) {
  auto c = ClusterConfig::from_json(nlohmann::json::parse(
      R"({"nodes":[{"host":"10.0.0.1","port":7401},{"port":7402,"role":"servlet"}],"one_layer":true})"));
  ASSERT_EQ(c.nodes.size(), 2u);
  EXPECT_EQ(c.nodes[0].host, "10.0.0.1");
  EXPECT_EQ(c.nodes[1].host, "127.0.0.1");
  EXPECT_TRUE(c.one_layer);
  EXPECT_FS_ERROR(ClusterConfig::from_json(nlohmann::json::parse(R"({"nodes":[]})")), ErrorCode::InvalidArgument);
  EXPECT_FS_ERROR(ClusterConfig::from_json(nlohmann::json::parse(R"({"nodes":[{"port":1,"role":"master"}]})")),
                  ErrorCode::InvalidArgument);
  EXPECT_FS_ERROR(ClusterConfig::load("/nonexistent/cluster.json"), ErrorCode::Io);
}

TEST(Tcp, TwoNodeClusterOverSockets) {
  TempDir d;
  ClusterConfig cfg;
  cfg.nodes = {{"127.0.0.1", 0}, {"127.0.0.1", 0}};
  // Bind servers first to learn their ports, then wire peers.
  for (auto& n : cfg.nodes) {
    TcpServer s(n, [](const Bytes& f) { return f; });
    n.port = s.port();
  }
  std::vector<std::unique_ptr<TcpNode>> nodes;
  for (std::uint32_t i = 0; i < 2; ++i) {
    nodes.push_back(std::make_unique<TcpNode>(cfg, i, d.path() / ("n" + std::to_string(i))));
    nodes.back()->start();
  }
  auto client = connect_cluster(cfg);
  auto embedded = Engine::in_memory();
  EXPECT_EQ(conformance_transcript(*client), conformance_transcript(*embedded));
  std::mt19937_64 rng(63);
  const Bytes data = random_bytes(rng, 50000);
  for (int i = 0; i < 6; ++i) client->put("k" + std::to_string(i), client->make_blob(data));
  EXPECT_EQ(client->list_keys().size(), embedded->list_keys().size() + 6);
  EXPECT_EQ(client->read_blob(client->get("k3")), data);
  EXPECT_FS_ERROR(client->get("missing"), ErrorCode::KeyNotFound);
  for (auto& n : nodes) n->stop();
  EXPECT_FS_ERROR(client->list_keys(), ErrorCode::Transport);
}
