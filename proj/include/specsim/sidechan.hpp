#pragma once

#include <cstdint>
#include <vector>

#include "specsim/memhier.hpp"

namespace specsim {

// Attacker addresses congruent (same LLC set and slice) with a chosen page
// offset; exactly associativity-many after minimization.
struct EvictionSet {
  std::vector<uint64_t> addrs;  // attacker virtual addresses
  uint32_t target_offset = 0;   // 0..4095
  bool verified = false;
};

// 256 elements x 256 bytes (4 lines) = 16 pages, shared attacker/victim.
struct ProbeArray {
  uint64_t base = 0;       // receiver's virtual base
  uint64_t victim_base = 0;
  uint32_t stride = 256;
  uint32_t elements = 256;
  uint32_t threshold = 100;  // cycles; below = hit
};

// Shared clock for scripted attacker accesses. Each access advances it by
// the observed latency, which keeps multi-process interleavings on one
// deterministic timeline.
struct AttackerClock {
  uint64_t now = 0;
};

// Liu-style eviction set discovery without physical addresses: candidates are
// every line at `target_offset` inside a hugepage buffer, minimized by
// single-elimination group testing against a planted self-test line.
// Throws PoolTooSmall / VerifyFailed.
EvictionSet find_eviction_set(MemoryHierarchy& hier, int pid, uint64_t huge_base,
                              uint32_t huge_pages, uint64_t self_test_addr,
                              uint32_t target_offset, AttackerClock& clk);

// Partitions the candidate pool into congruence classes, one EvictionSet per
// class, in deterministic discovery order.
std::vector<EvictionSet> enumerate_eviction_sets(MemoryHierarchy& hier, int pid,
                                                 uint64_t huge_base, uint32_t huge_pages,
                                                 uint32_t target_offset, AttackerClock& clk);

// Feedback-driven variant: the probed line belongs to another process (the
// second attacker probing its own canary), so the minimization converges on
// that line's congruence class directly.
EvictionSet find_eviction_set_feedback(MemoryHierarchy& hier, int pid, uint64_t huge_base,
                                       uint32_t huge_pages, uint32_t target_offset,
                                       int target_pid, uint64_t target_addr,
                                       AttackerClock& clk);

bool eviction_set_evicts(MemoryHierarchy& hier, int pid, const std::vector<uint64_t>& addrs,
                         int target_pid, uint64_t target_addr, AttackerClock& clk,
                         uint32_t threshold);

struct TwoStepOutcome {
  bool hit_frame = false;
  int victim_pid = -1;
  uint32_t measured_frame = 0;
  uint32_t victim_frame = 0;
  uint64_t iterations = 0;   // feedback-loop iterations spent
  int evicting_set = -1;     // index into the portfolio that fired
};

// Step 1: attacker A rotates its eviction-set portfolio while attacker B
// probes its own canary until B sees a miss. Step 2: B exec-respawns as the
// victim; reports whether the victim canary page reused the measured frame.
TwoStepOutcome evict_canary_two_step(MemoryHierarchy& hier, int pid_a,
                                     const std::vector<EvictionSet>& portfolio, int pid_b,
                                     uint64_t b_canary_addr, const Program& victim_image,
                                     AttackerClock& clk, uint64_t budget,
                                     uint32_t layout_jitter_pct);

void flush_probe(MemoryHierarchy& hier, int pid, const ProbeArray& probe, AttackerClock& clk);

// Times a load of each element; returns the unique element under threshold,
// or -1 when none or more than one qualifies.
int flush_reload_receive(MemoryHierarchy& hier, int pid, const ProbeArray& probe,
                         AttackerClock& clk);

}  // namespace specsim
