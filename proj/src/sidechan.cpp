#include "specsim/sidechan.hpp"

#include <algorithm>

#include "specsim/error.hpp"

namespace specsim {
namespace {

uint64_t timed_access(MemoryHierarchy& hier, int pid, uint64_t vaddr, AttackerClock& clk) {
  AccessResult r = hier.access(pid, vaddr, 8, AccessKind::Load, clk.now);
  clk.now += r.latency;
  return r.latency;
}

void traverse(MemoryHierarchy& hier, int pid, const std::vector<uint64_t>& addrs,
              AttackerClock& clk) {
  for (uint64_t a : addrs) timed_access(hier, pid, a, clk);
}

// Does `addrs` evict a planted target line? Plant, traverse, re-probe.
bool evicts(MemoryHierarchy& hier, int pid, const std::vector<uint64_t>& addrs,
            int target_pid, uint64_t target, AttackerClock& clk, uint32_t threshold) {
  timed_access(hier, target_pid, target, clk);  // plant
  traverse(hier, pid, addrs, clk);
  return timed_access(hier, target_pid, target, clk) > threshold;
}

std::vector<uint64_t> candidate_pool(uint64_t huge_base, uint32_t huge_pages,
                                     uint32_t target_offset) {
  std::vector<uint64_t> pool;
  pool.reserve(huge_pages);
  for (uint32_t pg = 0; pg < huge_pages; ++pg)
    pool.push_back(huge_base + uint64_t(pg) * kPageSize + target_offset);
  return pool;
}

// Single-elimination greedy reduction: drop a candidate; if the rest still
// evicts the target, keep it dropped.
std::vector<uint64_t> minimize(MemoryHierarchy& hier, int pid, std::vector<uint64_t> set,
                               int target_pid, uint64_t target, AttackerClock& clk,
                               uint32_t threshold) {
  size_t i = 0;
  while (i < set.size()) {
    std::vector<uint64_t> rest;
    rest.reserve(set.size() - 1);
    for (size_t j = 0; j < set.size(); ++j)
      if (j != i) rest.push_back(set[j]);
    if (evicts(hier, pid, rest, target_pid, target, clk, threshold)) {
      set = std::move(rest);  // cand was not needed
    } else {
      ++i;  // cand is load-bearing
    }
  }
  return set;
}

}  // namespace

bool eviction_set_evicts(MemoryHierarchy& hier, int pid, const std::vector<uint64_t>& addrs,
                         int target_pid, uint64_t target_addr, AttackerClock& clk,
                         uint32_t threshold) {
  return evicts(hier, pid, addrs, target_pid, target_addr, clk, threshold);
}

EvictionSet find_eviction_set(MemoryHierarchy& hier, int pid, uint64_t huge_base,
                              uint32_t huge_pages, uint64_t self_test_addr,
                              uint32_t target_offset, AttackerClock& clk) {
  const uint32_t ways = hier.config().llc_ways;
  const uint32_t threshold = hier.config().probe_threshold;
  std::vector<uint64_t> pool = candidate_pool(huge_base, huge_pages, target_offset);
  if (pool.size() < ways)
    fail(SimError::Kind::PoolTooSmall,
         "candidate pool of " + std::to_string(pool.size()) + " lines < " +
             std::to_string(ways) + " ways");
  if (!evicts(hier, pid, pool, pid, self_test_addr, clk, threshold))
    fail(SimError::Kind::VerifyFailed, "full candidate pool does not evict the target");

  EvictionSet out;
  out.addrs = minimize(hier, pid, pool, pid, self_test_addr, clk, threshold);
  out.target_offset = target_offset;
  out.verified = evicts(hier, pid, out.addrs, pid, self_test_addr, clk, threshold);
  if (!out.verified)
    fail(SimError::Kind::VerifyFailed, "minimized set no longer evicts the target");
  return out;
}

EvictionSet find_eviction_set_feedback(MemoryHierarchy& hier, int pid, uint64_t huge_base,
                                       uint32_t huge_pages, uint32_t target_offset,
                                       int target_pid, uint64_t target_addr,
                                       AttackerClock& clk) {
  const uint32_t ways = hier.config().llc_ways;
  const uint32_t threshold = hier.config().probe_threshold;
  std::vector<uint64_t> pool = candidate_pool(huge_base, huge_pages, target_offset);
  if (pool.size() < ways)
    fail(SimError::Kind::PoolTooSmall, "candidate pool smaller than associativity");
  if (!evicts(hier, pid, pool, target_pid, target_addr, clk, threshold))
    fail(SimError::Kind::VerifyFailed, "full candidate pool does not evict the probe line");
  EvictionSet out;
  out.addrs = minimize(hier, pid, pool, target_pid, target_addr, clk, threshold);
  out.target_offset = target_offset;
  out.verified = evicts(hier, pid, out.addrs, target_pid, target_addr, clk, threshold);
  if (!out.verified)
    fail(SimError::Kind::VerifyFailed, "minimized set no longer evicts the probe line");
  return out;
}

std::vector<EvictionSet> enumerate_eviction_sets(MemoryHierarchy& hier, int pid,
                                                 uint64_t huge_base, uint32_t huge_pages,
                                                 uint32_t target_offset, AttackerClock& clk) {
  const uint32_t ways = hier.config().llc_ways;
  const uint32_t threshold = hier.config().probe_threshold;
  std::vector<uint64_t> pool = candidate_pool(huge_base, huge_pages, target_offset);
  std::vector<EvictionSet> out;
  while (pool.size() > ways) {
    // the first remaining candidate is the planted target for its own class
    uint64_t target = pool.front();
    std::vector<uint64_t> rest(pool.begin() + 1, pool.end());
    if (!evicts(hier, pid, rest, pid, target, clk, threshold)) break;
    EvictionSet es;
    es.addrs = minimize(hier, pid, rest, pid, target, clk, threshold);
    es.target_offset = target_offset;
    es.verified = true;
    // remove the class (the set plus its target) from the pool
    std::vector<uint64_t> next;
    for (uint64_t a : pool)
      if (a != target && std::find(es.addrs.begin(), es.addrs.end(), a) == es.addrs.end())
        next.push_back(a);
    pool = std::move(next);
    out.push_back(std::move(es));
  }
  return out;
}

TwoStepOutcome evict_canary_two_step(MemoryHierarchy& hier, int pid_a,
                                     const std::vector<EvictionSet>& portfolio, int pid_b,
                                     uint64_t b_canary_addr, const Program& victim_image,
                                     AttackerClock& clk, uint64_t budget,
                                     uint32_t layout_jitter_pct) {
  const uint32_t threshold = hier.config().probe_threshold;
  TwoStepOutcome out;
  out.measured_frame = hier.frame_of(pid_b, page_of(b_canary_addr));

  // step 1: rotate the portfolio; B probes its own canary and reports back
  if (!portfolio.empty()) {
    bool found = false;
    uint64_t iters = 0;
    timed_access(hier, pid_b, b_canary_addr, clk);  // canary starts cached
    while (!found) {
      for (size_t i = 0; i < portfolio.size(); ++i) {
        if (iters++ >= budget)
          fail(SimError::Kind::BudgetExceeded,
               "feedback loop exceeded " + std::to_string(budget) + " iterations");
        traverse(hier, pid_a, portfolio[i].addrs, clk);
        if (timed_access(hier, pid_b, b_canary_addr, clk) > threshold) {
          out.evicting_set = int(i);
          found = true;
          break;
        }
      }
    }
    out.iterations = iters;
  }

  // step 2: B releases its pages by exec'ing the victim; the victim's first
  // touch reuses B's last-released frame
  out.victim_pid = hier.exec_respawn(pid_b, victim_image, layout_jitter_pct);
  uint64_t canary_vaddr = victim_image.label("global_canary");
  out.victim_frame = hier.frame_of(out.victim_pid, page_of(canary_vaddr));
  out.hit_frame = out.victim_frame == out.measured_frame;
  return out;
}

void flush_probe(MemoryHierarchy& hier, int pid, const ProbeArray& probe,
                 AttackerClock& clk) {
  for (uint32_t i = 0; i < probe.elements; ++i) {
    hier.clflush(pid, probe.base + uint64_t(i) * probe.stride);
    clk.now += 1;
  }
}

int flush_reload_receive(MemoryHierarchy& hier, int pid, const ProbeArray& probe,
                         AttackerClock& clk) {
  int hit = -1;
  for (uint32_t i = 0; i < probe.elements; ++i) {
    uint64_t lat = timed_access(hier, pid, probe.base + uint64_t(i) * probe.stride, clk);
    if (lat <= probe.threshold) {
      if (hit >= 0) return -1;  // two hits: ambiguous, report nothing
      hit = int(i);
    }
  }
  return hit;
}

}  // namespace specsim
