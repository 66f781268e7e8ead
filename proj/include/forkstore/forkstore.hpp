#pragma once

// Everything a client program needs: the embedded engine, the cluster
// client, table layouts and the benchmark harness.

#include "forkstore/bench.hpp"
#include "forkstore/cluster/client.hpp"
#include "forkstore/cluster/tcp.hpp"
#include "forkstore/database.hpp"
#include "forkstore/engine.hpp"
#include "forkstore/table.hpp"
