#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "specsim/assembler.hpp"
#include "specsim/error.hpp"
#include "specsim/fixtures.hpp"
#include "specsim/rng.hpp"
#include "specsim/sidechan.hpp"

using namespace specsim;

namespace {

struct Lab {
  SimConfig cfg;
  MemoryHierarchy hier;
  AttackerClock clk;
  int A;
  uint64_t huge = 0;

  explicit Lab(uint64_t seed, SimConfig c = {}) : cfg(c), hier(cfg, seed) {
    A = hier.create_process();
    huge = hier.map_pages(A, 512, PageKind::Huge);
  }

  std::pair<uint32_t, uint64_t> congruence(int pid, uint64_t vaddr) {
    uint64_t pa = hier.translate(pid, vaddr);
    uint32_t sets_per_slice =
        (cfg.llc_kib * 1024 / kLineSize / cfg.llc_ways) / cfg.llc_slices;
    return {CacheLevel::slice_hash(pa, cfg.llc_slices), (pa / kLineSize) % sets_per_slice};
  }
};

}  // namespace

TEST_CASE("discovered set equals the brute-force congruence class") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    Lab lab(seed);
    uint64_t page = lab.hier.map_pages(lab.A, 1, PageKind::Normal);
    uint32_t off = uint32_t(substream(seed, 0) % 64) * uint32_t(kLineSize) + 8;
    uint64_t target = page + off;
    EvictionSet es =
        find_eviction_set(lab.hier, lab.A, lab.huge, 512, target, off, lab.clk);
    CHECK(es.verified);
    CHECK(es.addrs.size() == lab.cfg.llc_ways);
    auto want = lab.congruence(lab.A, target);
    for (uint64_t a : es.addrs) CHECK(lab.congruence(lab.A, a) == want);
  }
}

TEST_CASE("every leave-one-out subset fails to evict") {
  Lab lab(11);
  uint64_t page = lab.hier.map_pages(lab.A, 1, PageKind::Normal);
  uint64_t target = page + 0x28;
  EvictionSet es = find_eviction_set(lab.hier, lab.A, lab.huge, 512, target, 0x28, lab.clk);
  for (size_t drop = 0; drop < es.addrs.size(); ++drop) {
    std::vector<uint64_t> sub;
    for (size_t j = 0; j < es.addrs.size(); ++j)
      if (j != drop) sub.push_back(es.addrs[j]);
    CHECK(!eviction_set_evicts(lab.hier, lab.A, sub, lab.A, target, lab.clk,
                               lab.cfg.probe_threshold));
  }
  CHECK(eviction_set_evicts(lab.hier, lab.A, es.addrs, lab.A, target, lab.clk,
                            lab.cfg.probe_threshold));
}

TEST_CASE("a pool smaller than the associativity is rejected") {
  Lab lab(12);
  uint64_t page = lab.hier.map_pages(lab.A, 1, PageKind::Normal);
  try {
    find_eviction_set(lab.hier, lab.A, lab.huge, 8, page + 0x28, 0x28, lab.clk);
    FAIL("expected pool error");
  } catch (const SimError& e) {
    CHECK(e.kind == SimError::Kind::PoolTooSmall);
  }
}

TEST_CASE("hit and miss timing separation dwarfs the jitter amplitude") {
  SimConfig cfg;  // default jitter on
  uint32_t max_hit = cfg.lat_llc + cfg.lat_llc * cfg.jitter_pct / 100;
  uint32_t min_miss = cfg.lat_dram - cfg.lat_dram * cfg.jitter_pct / 100;
  uint32_t amplitude = cfg.lat_llc * cfg.jitter_pct / 100;
  CHECK(min_miss - max_hit >= 10 * amplitude);
  CHECK(max_hit < cfg.probe_threshold);
  CHECK(min_miss > cfg.probe_threshold);
}

TEST_CASE("receive decodes every planted byte exactly, noiselessly") {
  SimConfig cfg;
  cfg.jitter_pct = 0;
  MemoryHierarchy hier(cfg, 5);
  AttackerClock clk;
  int A = hier.create_process();
  ProbeArray probe;
  probe.base = hier.map_pages(A, 16, PageKind::Normal);
  probe.threshold = cfg.probe_threshold;
  for (int b = 0; b < 256; ++b) {
    flush_probe(hier, A, probe, clk);
    hier.access(A, probe.base + uint64_t(b) * probe.stride, 8, AccessKind::Load, clk.now);
    CHECK(flush_reload_receive(hier, A, probe, clk) == b);
  }
}

TEST_CASE("receive returns nothing for silence and for ambiguity") {
  SimConfig cfg;
  MemoryHierarchy hier(cfg, 6);
  AttackerClock clk;
  int A = hier.create_process();
  ProbeArray probe;
  probe.base = hier.map_pages(A, 16, PageKind::Normal);
  probe.threshold = cfg.probe_threshold;

  flush_probe(hier, A, probe, clk);
  CHECK(flush_reload_receive(hier, A, probe, clk) == -1);

  // two elements touched: ambiguous by rule
  flush_probe(hier, A, probe, clk);
  hier.access(A, probe.base + 3 * probe.stride, 8, AccessKind::Load, clk.now);
  hier.access(A, probe.base + 200 * probe.stride, 8, AccessKind::Load, clk.now);
  CHECK(flush_reload_receive(hier, A, probe, clk) == -1);
}

TEST_CASE("probe flush is idempotent and empties all 256 elements") {
  SimConfig cfg;
  cfg.jitter_pct = 0;
  MemoryHierarchy hier(cfg, 7);
  AttackerClock clk;
  int A = hier.create_process();
  ProbeArray probe;
  probe.base = hier.map_pages(A, 16, PageKind::Normal);
  for (uint32_t i = 0; i < 256; ++i)
    hier.access(A, probe.base + i * probe.stride, 8, AccessKind::Load, clk.now);
  flush_probe(hier, A, probe, clk);
  flush_probe(hier, A, probe, clk);
  for (uint32_t i = 0; i < 256; ++i)
    CHECK(hier.access(A, probe.base + i * probe.stride, 8, AccessKind::Load,
                      clk.now + i * 1000)
              .latency >= cfg.lat_dram - cfg.lat_dram * cfg.jitter_pct / 100);
}

TEST_CASE("two-step canary eviction lands on the measured frame, noiselessly") {
  SimConfig cfg;
  cfg.jitter_pct = 0;
  MemoryHierarchy hier(cfg, 8);
  AttackerClock clk;
  int A = hier.create_process();
  uint64_t huge = hier.map_pages(A, 512, PageKind::Huge);
  int B = hier.create_process();
  uint64_t b_pages = hier.map_pages(B, 4, PageKind::Normal);
  uint64_t b_canary = b_pages + 3 * kPageSize + 0x28;
  EvictionSet es =
      find_eviction_set_feedback(hier, A, huge, 512, 0x28, B, b_canary, clk);
  Program victim = assemble(fixture_text("victim_ssp"));
  TwoStepOutcome two = evict_canary_two_step(hier, A, {es}, B, b_canary, victim, clk,
                                             cfg.evict_budget, 0);
  CHECK(two.hit_frame);
  CHECK(two.victim_frame == two.measured_frame);
  // while A loops its set, the victim canary load pays the DRAM latency
  for (uint64_t a : es.addrs) hier.access(A, a, 8, AccessKind::Load, clk.now);
  uint64_t canary = victim.label("global_canary");
  CHECK(hier.access(two.victim_pid, canary, 8, AccessKind::Load, clk.now + 5000).latency ==
        cfg.lat_dram);
}

TEST_CASE("an eviction set for a different offset leaves the canary cached") {
  SimConfig cfg;
  cfg.jitter_pct = 0;
  MemoryHierarchy hier(cfg, 9);
  AttackerClock clk;
  int A = hier.create_process();
  uint64_t huge = hier.map_pages(A, 512, PageKind::Huge);
  uint64_t self = hier.map_pages(A, 1, PageKind::Normal);
  // verified set for offset 0x400; B's canary sits at offset 0x28
  EvictionSet wrong =
      find_eviction_set(hier, A, huge, 512, self + 0x400, 0x400, clk);
  int B = hier.create_process();
  uint64_t b_pages = hier.map_pages(B, 2, PageKind::Normal);
  uint64_t b_canary = b_pages + kPageSize + 0x28;
  Program victim = assemble(fixture_text("victim_ssp"));
  try {
    evict_canary_two_step(hier, A, {wrong}, B, b_canary, victim, clk, 2000, 0);
    FAIL("the wrong-offset set must never trigger the feedback");
  } catch (const SimError& e) {
    CHECK(e.kind == SimError::Kind::BudgetExceeded);
  }
}

TEST_CASE("feedback discovery converges on the foreign line's class") {
  SimConfig cfg;
  MemoryHierarchy hier(cfg, 10);
  AttackerClock clk;
  int A = hier.create_process();
  uint64_t huge = hier.map_pages(A, 512, PageKind::Huge);
  int B = hier.create_process();
  uint64_t bp = hier.map_pages(B, 1, PageKind::Normal);
  EvictionSet es = find_eviction_set_feedback(hier, A, huge, 512, 0x28, B, bp + 0x28, clk);
  CHECK(es.addrs.size() == cfg.llc_ways);
  CHECK(eviction_set_evicts(hier, A, es.addrs, B, bp + 0x28, clk, cfg.probe_threshold));
}
