#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "specsim/fixtures.hpp"
#include "support.hpp"

using namespace specsim;
using namespace specsim::test;

TEST_CASE("speculative engine retires exactly what the oracle computes") {
  SimConfig cfg;  // default jitter on: timing may wobble, architecture may not
  int checked = 0;
  for (uint64_t seed = 0; seed < 500; ++seed) {
    std::string src = random_program(seed * 2654435761ull + 1);
    OracleCompare r = compare_engines(src, seed, cfg);
    INFO("seed ", seed, ": ", r.detail, "\n", src);
    REQUIRE(r.equal);
    ++checked;
  }
  CHECK(checked == 500);
}

TEST_CASE("oracle equivalence holds under ablated forwarding and plru") {
  SimConfig cfg;
  cfg.stlf_enabled = false;
  cfg.plru = true;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    std::string src = random_program(seed * 40503ull + 77);
    OracleCompare r = compare_engines(src, seed, cfg);
    INFO("seed ", seed, ": ", r.detail);
    REQUIRE(r.equal);
  }
}

TEST_CASE("equivalence also holds on the scenario fixtures") {
  SimConfig cfg;
  for (const char* fixture : {"victim_go_load", "victim_go_store", "victim_vtv",
                              "victim_cfi", "bench_bounds", "bench_canary"}) {
    Program p = assemble(fixture_text(fixture));
    MachineState st = initial_state(p);
    give_stack(st, 0x10000, 1);
    InterpResult oracle = interpret(p, st, 400000);

    MemoryHierarchy hier(cfg, 13);
    int pid = hier.create_process();
    map_machine_pages(hier, pid, p, st);
    PredictorState pred(cfg);
    SpecRunResult spec = run_speculative(p, st, hier, pid, pred, cfg, 400000);
    INFO("fixture ", fixture);
    CHECK(oracle.state == spec.state);
    CHECK(oracle.markers == spec.retired_markers);
  }
}
