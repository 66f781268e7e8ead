// Import one relation in both layouts on a four-node in-process cluster and
// compare how many chunks a column sum reads.
#include <iostream>

#include "forkstore/forkstore.hpp"

using namespace forkstore;

int main() {
  cluster::LocalCluster::Options opts;
  opts.nodes = 4;
  cluster::LocalCluster lc(opts);
  auto db = lc.client();

  std::string csv = "id,name,score,city\n";
  for (int i = 0; i < 2000; ++i)
    csv += std::to_string(i) + ",user" + std::to_string(i) + "," + std::to_string(i % 97) + ",city" +
           std::to_string(i % 13) + "\n";

  import_table(*db, "by_row", "master", csv, "id", TableLayout::Row);
  import_table(*db, "by_column", "master", csv, "id", TableLayout::Column);

  for (const char* key : {"by_row", "by_column"}) {
    FObject o = db->get(key);
    CountingChunkStore counter(std::shared_ptr<ChunkStore>(&db->store_for(key), [](ChunkStore*) {}));
    ColumnSum s = sum_column(counter, o, "score");
    std::cout << key << ": sum=" << s.sum << " rows=" << s.rows << " chunks read=" << counter.gets()
              << " owner=node " << db->owner(key) << "\n";
  }
}
