// Fork a Blob, edit the copy, and compare the two branches.
#include <iostream>

#include "forkstore/forkstore.hpp"

using namespace forkstore;

int main() {
  auto db = Engine::in_memory();

  std::string text;
  for (int i = 0; i < 2000; ++i) text += "line " + std::to_string(i) + " of the original document\n";
  Uid v1 = db->put("my_key", db->make_blob(as_view(text)));

  db->fork("my_key", "master", "new_branch");

  // Edits are buffered in memory; only the final tree is written.
  TreeEditor ed(*db, db->get("my_key", "new_branch"));
  ed.blob_remove(0, 10).blob_append(as_view(std::string("appended on the branch\n")));
  Uid v2 = db->put("my_key", "new_branch", ed.finish());

  VersionDiff d = db->diff(v1, v2);
  std::cout << "master     " << v1.hex() << "\n"
            << "new_branch " << v2.hex() << "\n"
            << "changed ranges: " << d.tree.ranges.size() << "\n";
  for (const auto& r : d.tree.ranges)
    std::cout << "  [" << r.a_begin << "," << r.a_end << ") -> [" << r.b_begin << "," << r.b_end << ")\n";

  for (const auto& [name, uid] : db->list_tagged("my_key")) std::cout << name << " -> " << uid.short_hex() << "\n";
}
