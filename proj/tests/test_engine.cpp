#include <fstream>
#include <regex>

#include "gtest_util.hpp"

using namespace fs_test;

TEST(Engine, ErrorSurfaceOnEmptyStore) {
  auto db = Engine::in_memory();
  const Uid ghost = digest_of(b("ghost"));
  EXPECT_FS_ERROR(db->get("k"), ErrorCode::KeyNotFound);
  EXPECT_FS_ERROR(db->get("k", ghost), ErrorCode::NotFound);
  EXPECT_FS_ERROR(db->put("", Value::integer(1)), ErrorCode::InvalidArgument);
  EXPECT_FS_ERROR(db->put("k", "dev", Value::integer(1)), ErrorCode::BranchNotFound);
  EXPECT_FS_ERROR(db->put("k", ghost, Value::integer(1)), ErrorCode::NotFound);
  EXPECT_FS_ERROR(db->fork("k", "master", "dev"), ErrorCode::BranchNotFound);
  EXPECT_FS_ERROR(db->track("k", "master", 0, 1), ErrorCode::KeyNotFound);
  EXPECT_TRUE(db->list_keys().empty());
  EXPECT_TRUE(db->list_tagged("k").empty());
  EXPECT_TRUE(db->list_untagged("k").empty());
}

TEST(Engine, ApiMatrix) {
  auto db = Engine::in_memory();
  const Uid s1 = db->put("s", Value::string("v1"));
  EXPECT_EQ(db->get("s").value().as_string(), "v1");
  EXPECT_FS_ERROR(db->get("s", "dev"), ErrorCode::BranchNotFound);
  const Uid i1 = db->put("i", Value::integer(1));
  EXPECT_FS_ERROR(db->get("s", i1), ErrorCode::KeyMismatch);
  EXPECT_FS_ERROR(db->put("s", Value::integer(3)), ErrorCode::TypeMismatch);
  EXPECT_FS_ERROR(db->put("s", i1, Value::string("x")), ErrorCode::KeyMismatch);
  const Uid s2 = db->put("s", "master", Value::string("v2"), s1);
  EXPECT_FS_ERROR(db->put("s", "master", Value::string("v3"), s1), ErrorCode::GuardMismatch);
  db->fork("s", s1, "old");
  EXPECT_EQ(db->get("s", "old").value().as_string(), "v1");
  EXPECT_FS_ERROR(db->fork("s", i1, "bad"), ErrorCode::KeyMismatch);
  db->rename("s", "old", "archive");
  EXPECT_EQ(db->list_tagged("s"), (std::map<std::string, Uid>{{"archive", s1}, {"master", s2}}));
  db->remove("s", "archive");
  EXPECT_EQ(db->list_keys(), (std::vector<std::string>{"i", "s"}));
  auto t = db->track("s", "master", 0, 5);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1].uid, s1);
  EXPECT_EQ(db->track("s", s2, 1, 1).size(), 1u);
  EXPECT_EQ(db->lca("s", s1, s2), s1);
  EXPECT_FS_ERROR(db->lca("s", s1, i1), ErrorCode::KeyMismatch);
  EXPECT_TRUE(db->diff(s1, s2).value_changed);
  EXPECT_EQ(db->verify(s2, 5, true).key, "s");
}

TEST(Engine, BlobForkEditDiffScript) {
  // Fork a document, edit each branch, compare and merge.
  auto db = Engine::in_memory(EngineConfig{{}, ChunkerConfig::make(256, 512)});
  std::string text;
  for (int i = 0; i < 400; ++i) text += "paragraph " + std::to_string(i) + " of the shared document.\n";
  db->put("doc", db->make_blob(as_view(text)));
  db->fork("doc", "master", "draft");
  {
    TreeEditor e(*db, db->get("doc", "draft"));
    e.blob_insert(100, b("INSERTED "));
    db->put("doc", "draft", e.finish());
  }
  {
    TreeEditor e(*db, db->get("doc"));
    e.blob_replace(e.size() - 10, 3, b("END"));
    db->put("doc", e.finish());
  }
  const auto heads = db->list_tagged("doc");
  const VersionDiff d = db->diff(heads.at("master"), heads.at("draft"));
  EXPECT_EQ(d.tree.ranges.size(), 2u);
  const Uid m = db->merge("doc", "master", "draft");
  std::string want = text;
  want.replace(want.size() - 10, 3, "END");
  want.insert(100, "INSERTED ");
  EXPECT_EQ(to_string(db->read_blob(db->get("doc", m))), want);
}

TEST(Engine, CollectionsRoundTrip) {
  auto db = Engine::in_memory();
  std::vector<Bytes> items{b("x"), b(""), b("z")};
  db->put("l", db->make_list(items));
  EXPECT_EQ(db->read_list(db->get("l")), items);
  db->put("set", db->make_set({b("b"), b("a"), b("b")}));
  EXPECT_EQ(db->read_set(db->get("set")), (std::vector<Bytes>{b("a"), b("b")}));
  TreeEditor e(*db, db->get("set"));
  e.set_insert(b("c")).set_remove(b("a"));
  EXPECT_TRUE(e.set_contains(b("c")));
  db->put("set", e.finish());
  EXPECT_EQ(db->read_set(db->get("set")), (std::vector<Bytes>{b("b"), b("c")}));
  db->put("t", Value::tuple({b("1"), b("2")}));
  EXPECT_EQ(db->get("t").value().as_tuple().size(), 2u);
}

TEST(Engine, EditorStagesUntilCommit) {
  auto counting = std::make_shared<CountingChunkStore>(std::make_shared<MemoryChunkStore>());
  Engine db(counting, std::make_unique<BranchManager>(), EngineConfig{});
  FlatMap m;
  for (int i = 0; i < 5000; ++i) m[b("k" + std::to_string(i))] = b("v");
  db.put("m", db.make_map(m));
  TreeEditor e(db, db.get("m"));
  const auto before = counting->stats().unique_chunk_count;
  for (int i = 0; i < 50; ++i) e.map_put(b("k" + std::to_string(i * 97)), b("edited"));
  EXPECT_EQ(counting->stats().unique_chunk_count, before);
  EXPECT_GT(e.staged_chunks(), 0u);
  db.put("m", e.finish());
  EXPECT_GT(counting->stats().unique_chunk_count, before);
  EXPECT_NO_THROW(db.verify(db.list_tagged("m")["master"], 1, true));
}

TEST(Engine, PersistsAcrossReopen) {
  TempDir d;
  Uid head, untagged;
  {
    auto db = Engine::open(d.path());
    db->put("k", Value::string("a"));
    head = db->put("k", Value::string("b"));
    db->fork("k", "master", "dev");
    untagged = db->put("u", std::optional<Uid>{}, Value::integer(4));
    db->put("blob", db->make_blob(b(std::string(100000, 'x'))));
    db->sync();
  }
  auto db = Engine::open(d.path());
  EXPECT_EQ(db->list_tagged("k"), (std::map<std::string, Uid>{{"dev", head}, {"master", head}}));
  EXPECT_EQ(db->list_untagged("u"), std::vector<Uid>{untagged});
  EXPECT_EQ(db->read_blob(db->get("blob")).size(), 100000u);
  EXPECT_EQ(db->track("k", "master", 0, 9).size(), 2u);
}

TEST(Engine, ManifestPinsConfiguration) {
  TempDir d;
  EngineConfig cfg;
  cfg.chunker = ChunkerConfig::make(1024, 2048, 4, 24);
  cfg.digest = DigestAlgorithm::Blake2s256;
  { auto db = Engine::open(d.path(), cfg); }
  auto reopened = Engine::open(d.path());
  EXPECT_EQ(reopened->config().chunker, cfg.chunker);
  EXPECT_EQ(reopened->config().digest, DigestAlgorithm::Blake2s256);
  reopened.reset();
  EXPECT_FS_ERROR(Engine::open(d.path(), EngineConfig{}), ErrorCode::InvalidArgument);
  std::ofstream(d.path() / "manifest.json") << "{not json";
  EXPECT_FS_ERROR(Engine::open(d.path()), ErrorCode::Corrupt);
}

TEST(Engine, SameHistorySameUidsAcrossStores) {
  auto a = Engine::in_memory();
  TempDir d;
  auto c = Engine::open(d.path());
  for (Database* db : {static_cast<Database*>(a.get()), static_cast<Database*>(c.get())}) {
    db->put("k", db->make_map({{b("x"), b("1")}}));
    db->put("k", db->make_map({{b("x"), b("2")}}));
  }
  EXPECT_EQ(a->list_tagged("k"), c->list_tagged("k"));
}

TEST(Tables, CsvParsing) {
  auto rows = parse_csv("a,b\n\"x, y\",\"say \"\"hi\"\"\"\r\n,last\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1], (CsvRow{"x, y", "say \"hi\""}));
  EXPECT_EQ(rows[2], (CsvRow{"", "last"}));
  EXPECT_EQ(parse_csv(write_csv(rows)), rows);
}

TEST(Tables, ImportExportBothLayouts) {
  auto db = Engine::in_memory(EngineConfig{{}, ChunkerConfig::make(256, 512)});
  std::mt19937_64 rng(51);
  std::string csv = "id,name,score\n";
  double total = 0;
  std::vector<std::string> lines;
  for (int i = 0; i < 500; ++i) {
    const int score = static_cast<int>(rng() % 100);
    total += score;
    lines.push_back(std::to_string(1000 + i) + ",\"name, " + std::to_string(i) + "\"," + std::to_string(score));
  }
  for (const auto& l : lines) csv += l + "\n";
  for (auto layout : {TableLayout::Row, TableLayout::Column}) {
    const std::string key = layout == TableLayout::Row ? "rows" : "cols";
    import_table(*db, key, "master", csv, "id", layout);
    const FObject o = db->get(key);
    EXPECT_EQ(parse_csv(export_table(db->chunk_store(), o)), parse_csv(csv));
    const ColumnSum s = sum_column(db->chunk_store(), o, "score");
    EXPECT_EQ(s.rows, 500u);
    EXPECT_DOUBLE_EQ(s.sum, total);
    EXPECT_FS_ERROR(sum_column(db->chunk_store(), o, "name"), ErrorCode::InvalidArgument);
    EXPECT_FS_ERROR(sum_column(db->chunk_store(), o, "nope"), ErrorCode::InvalidArgument);
  }
  db->put("plain", db->make_map({}));
  EXPECT_FS_ERROR(export_table(db->chunk_store(), db->get("plain")), ErrorCode::TypeMismatch);
}

TEST(Tables, RejectsBadInput) {
  auto db = Engine::in_memory();
  EXPECT_FS_ERROR(import_table(*db, "t", "master", "id,a\n1,x\n1,y\n", "id", TableLayout::Row),
                  ErrorCode::InvalidArgument);
  EXPECT_FS_ERROR(import_table(*db, "t", "master", "id,a\n1,x,extra\n", "id", TableLayout::Column),
                  ErrorCode::InvalidArgument);
  EXPECT_FS_ERROR(import_table(*db, "t", "master", "id,a\n1,x\n", "pk", TableLayout::Row), ErrorCode::InvalidArgument);
  EXPECT_FS_ERROR(import_table(*db, "t", "master", "", "id", TableLayout::Row), ErrorCode::InvalidArgument);
  EXPECT_FS_ERROR(parse_layout("diagonal"), ErrorCode::InvalidArgument);
  EXPECT_TRUE(db->list_keys().empty());
}

TEST(Tables, UpdatesShareUnchangedColumns) {
  auto counting = std::make_shared<CountingChunkStore>(std::make_shared<MemoryChunkStore>());
  Engine db(counting, std::make_unique<BranchManager>(), EngineConfig{{}, ChunkerConfig::make(512, 512)});
  std::string csv = "id,a,b\n";
  for (int i = 0; i < 2000; ++i) csv += std::to_string(i) + ",a" + std::to_string(i) + ",b" + std::to_string(i) + "\n";
  import_table(db, "t", "master", csv, "id", TableLayout::Column);
  const auto first = counting->stats().unique_chunk_count;
  const std::string edited = std::regex_replace(csv, std::regex("\n1500,a1500,"), "\n1500,CHANGED,");
  import_table(db, "t", "master", edited, "id", TableLayout::Column);
  // Only column "a", the column map and the version record change.
  EXPECT_LT(counting->stats().unique_chunk_count - first, 12u);
}
