#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <vector>

#include "specsim/error.hpp"
#include "specsim/memhier.hpp"
#include "specsim/rng.hpp"

using namespace specsim;

namespace {
SimConfig quiet() {
  SimConfig cfg;
  cfg.jitter_pct = 0;
  return cfg;
}
}  // namespace

TEST_CASE("first access misses to DRAM, the second hits L1") {
  MemoryHierarchy hier(quiet(), 1);
  int p = hier.create_process();
  uint64_t v = hier.map_pages(p, 1, PageKind::Normal);
  CHECK(hier.access(p, v, 8, AccessKind::Load, 0).latency == quiet().lat_dram);
  CHECK(hier.access(p, v, 8, AccessKind::Load, 300).latency == quiet().lat_l1);
}

TEST_CASE("W same-set same-slice fills evict a resident line") {
  SimConfig cfg = quiet();
  MemoryHierarchy hier(cfg, 1);
  int p = hier.create_process();
  uint64_t huge = hier.map_pages(p, 512, PageKind::Huge);
  uint64_t extra = hier.map_pages(p, 1, PageKind::Normal);
  Rng rng(42);
  uint32_t sets_per_slice = (cfg.llc_kib * 1024 / kLineSize / cfg.llc_ways) / cfg.llc_slices;
  auto congruence = [&](uint64_t vaddr) {
    uint64_t pa = hier.translate(p, vaddr);
    return std::pair<uint32_t, uint64_t>(CacheLevel::slice_hash(pa, cfg.llc_slices),
                                         (pa / kLineSize) % sets_per_slice);
  };

  int trials = 200;  // random targets, conflict set built by brute force
  for (int t = 0; t < trials; ++t) {
    uint64_t target = extra + rng.below(64) * kLineSize;
    auto want = congruence(target);
    std::vector<uint64_t> conflicts;
    for (uint64_t pg = 0; pg < 512 && conflicts.size() < cfg.llc_ways; ++pg)
      for (uint64_t ln = 0; ln < 64 && conflicts.size() < cfg.llc_ways; ++ln) {
        uint64_t cand = huge + pg * kPageSize + ln * kLineSize;
        if (congruence(cand) == want) conflicts.push_back(cand);
      }
    REQUIRE(conflicts.size() == cfg.llc_ways);
    uint64_t now = uint64_t(t) * 100000;
    hier.access(p, target, 8, AccessKind::Load, now);
    for (uint64_t c : conflicts) now += hier.access(p, c, 8, AccessKind::Load, now).latency;
    CHECK(hier.access(p, target, 8, AccessKind::Load, now + 500).latency ==
          quiet().lat_dram);
  }
}

TEST_CASE("clflush removes the line from every level") {
  MemoryHierarchy hier(quiet(), 1);
  int p = hier.create_process();
  uint64_t v = hier.map_pages(p, 1, PageKind::Normal);
  hier.access(p, v, 8, AccessKind::Load, 0);
  CHECK(hier.any_level_contains(p, v));
  hier.clflush(p, v);
  CHECK(!hier.any_level_contains(p, v));
  CHECK(hier.access(p, v, 8, AccessKind::Load, 500).latency == quiet().lat_dram);
  // idempotent
  hier.clflush(p, v);
  CHECK(!hier.any_level_contains(p, v));
}

TEST_CASE("flushing a shared line makes the other process miss too") {
  MemoryHierarchy hier(quiet(), 1);
  int a = hier.create_process();
  int b = hier.create_process();
  auto [va, vb] = hier.map_shared(a, b, 1);
  hier.access(a, va, 8, AccessKind::Load, 0);
  CHECK(hier.any_level_contains(b, vb));
  hier.clflush(a, va);
  CHECK(hier.access(b, vb, 8, AccessKind::Load, 500).latency == quiet().lat_dram);
}

TEST_CASE("clflush of an unmapped address is an error") {
  MemoryHierarchy hier(quiet(), 1);
  int p = hier.create_process();
  CHECK_THROWS_AS(hier.clflush(p, 0xdead0000), SimError);
}

TEST_CASE("freelist pops in exact reverse push order") {
  MemoryHierarchy hier(quiet(), 1);
  int a = hier.create_process();
  uint64_t v = hier.map_pages(a, 1, PageKind::Normal);
  uint32_t f1 = hier.frame_of(a, page_of(v));
  hier.destroy_process(a);
  int b = hier.create_process();
  uint64_t w = hier.map_pages(b, 1, PageKind::Normal);
  CHECK(hier.frame_of(b, page_of(w)) == f1);  // freed last, reused first
}

TEST_CASE("huge mappings are 512 physically contiguous frames") {
  MemoryHierarchy hier(quiet(), 1);
  int p = hier.create_process();
  uint64_t v = hier.map_pages(p, 512, PageKind::Huge);
  uint32_t base = hier.frame_of(p, page_of(v));
  for (uint32_t i = 0; i < 512; ++i) CHECK(hier.frame_of(p, page_of(v) + i) == base + i);
  CHECK(base % 512 == 0);
}

TEST_CASE("contiguity exhaustion is an error") {
  SimConfig cfg = quiet();
  cfg.frames = 1024;
  MemoryHierarchy hier(cfg, 1);
  int p = hier.create_process();
  hier.map_pages(p, 512, PageKind::Huge);
  // fragment what is left so no aligned run of 512 survives
  hier.map_pages(p, 300, PageKind::Normal);
  CHECK_THROWS_AS(hier.map_pages(p, 512, PageKind::Huge), SimError);
}

TEST_CASE("shared pages read the same frame from both processes") {
  MemoryHierarchy hier(quiet(), 1);
  int a = hier.create_process();
  int b = hier.create_process();
  auto [va, vb] = hier.map_shared(a, b, 2);
  CHECK(hier.frame_of(a, page_of(va)) == hier.frame_of(b, page_of(vb)));
  CHECK(hier.frame_of(a, page_of(va) + 1) == hier.frame_of(b, page_of(vb) + 1));
}

TEST_CASE("exec teardown pushes ascending, respawn reuses the last release first") {
  MemoryHierarchy hier(quiet(), 1);
  int b = hier.create_process();
  uint64_t vb = hier.map_pages(b, 4, PageKind::Normal);
  uint32_t last_frame = hier.frame_of(b, page_of(vb) + 3);  // highest vaddr

  Program image;  // single-page image: one data page at 0x7000
  image.decl_pages = {7};
  int v = hier.exec_respawn(b, image, 0);
  CHECK(hier.frame_of(v, 7) == last_frame);
}

TEST_CASE("with the freelist drained, a respawn lives purely off the old frames") {
  SimConfig cfg = quiet();
  cfg.frames = 16;
  MemoryHierarchy hier(cfg, 1);
  int b = hier.create_process();
  uint64_t vb = hier.map_pages(b, 4, PageKind::Normal);
  int hog = hier.create_process();
  hier.map_pages(hog, 12, PageKind::Normal);  // freelist now empty
  CHECK(hier.free_frames() == 0);
  std::set<uint32_t> old_frames;
  for (int i = 0; i < 4; ++i) old_frames.insert(hier.frame_of(b, page_of(vb) + i));

  Program image;
  image.decl_pages = {7, 8, 9};
  int v = hier.exec_respawn(b, image, 0);
  for (uint64_t pg : image.decl_pages) CHECK(old_frames.count(hier.frame_of(v, pg)));
}

TEST_CASE("identical seeds and actions give identical mappings") {
  for (int round = 0; round < 3; ++round) {
    MemoryHierarchy h1(quiet(), 99), h2(quiet(), 99);
    auto drive = [](MemoryHierarchy& h) {
      int a = h.create_process();
      h.map_pages(a, 3, PageKind::Normal);
      int b = h.create_process();
      uint64_t v = h.map_pages(b, 2, PageKind::Normal);
      h.destroy_process(a);
      uint64_t w = h.map_pages(b, 1, PageKind::Normal);
      return std::tuple(h.frame_of(b, page_of(v)), h.frame_of(b, page_of(w)));
    };
    CHECK(drive(h1) == drive(h2));
  }
}

TEST_CASE("inclusion holds across a mixed access pattern") {
  SimConfig cfg = quiet();
  MemoryHierarchy hier(cfg, 3);
  int p = hier.create_process();
  uint64_t v = hier.map_pages(p, 64, PageKind::Normal);
  Rng rng(17);
  uint64_t now = 0;
  for (int i = 0; i < 5000; ++i) {
    uint64_t addr = v + rng.below(64 * kPageSize - 8);
    now += hier.access(p, addr, 8, AccessKind::Load, now).latency;
    if (i % 512 == 0) CHECK(hier.check_inclusion());
  }
  CHECK(hier.check_inclusion());
}

TEST_CASE("accesses crossing a line touch both lines") {
  MemoryHierarchy hier(quiet(), 1);
  int p = hier.create_process();
  uint64_t v = hier.map_pages(p, 1, PageKind::Normal);
  hier.access(p, v + kLineSize - 4, 8, AccessKind::Load, 0);
  CHECK(hier.any_level_contains(p, v + kLineSize - 4));
  CHECK(hier.any_level_contains(p, v + kLineSize));
}

TEST_CASE("pseudo-LRU is available as the replacement option") {
  SimConfig cfg = quiet();
  cfg.plru = true;
  MemoryHierarchy hier(cfg, 1);
  int p = hier.create_process();
  uint64_t v = hier.map_pages(p, 64, PageKind::Normal);
  uint64_t now = 0;
  for (int i = 0; i < 2000; ++i)
    now += hier.access(p, v + (uint64_t(i) * 272) % (64 * kPageSize - 8), 8,
                       AccessKind::Load, now)
               .latency;
  CHECK(hier.check_inclusion());
}
