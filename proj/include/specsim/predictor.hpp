#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "specsim/config.hpp"

namespace specsim {

// PHT of 2-bit saturating counters, a direct-mapped BTB and a circular RSB.
// The state survives across runs within a trial (hardware is not reset by
// exec), which is what makes cross-run training work.
struct PredictorState {
  std::vector<uint8_t> pht;  // counters in {0..3}, init 1 (weakly not-taken)
  struct BtbEntry {
    uint64_t pc = 0;
    uint64_t target = 0;
    bool valid = false;
  };
  std::vector<BtbEntry> btb;
  std::vector<uint64_t> rsb;
  uint32_t rsb_top = 0;

  explicit PredictorState(const SimConfig& cfg)
      : pht(cfg.pht_entries, 1), btb(cfg.btb_entries), rsb(cfg.rsb_depth, 0) {}

  uint32_t pht_index(uint64_t pc) const {
    return uint32_t((pc >> 1) ^ (pc >> 13)) & uint32_t(pht.size() - 1);
  }
  bool pht_taken(uint64_t pc) const { return pht[pht_index(pc)] >= 2; }
  void pht_update(uint64_t pc, bool taken) {
    uint8_t& c = pht[pht_index(pc)];
    if (taken && c < 3) ++c;
    if (!taken && c > 0) --c;
  }

  uint32_t btb_index(uint64_t pc) const {
    return uint32_t(pc >> 1) & uint32_t(btb.size() - 1);
  }
  std::optional<uint64_t> btb_lookup(uint64_t pc) const {
    const BtbEntry& e = btb[btb_index(pc)];
    if (e.valid && e.pc == pc) return e.target;
    return std::nullopt;
  }
  void btb_update(uint64_t pc, uint64_t target) {
    btb[btb_index(pc)] = BtbEntry{pc, target, true};
  }

  void rsb_push(uint64_t addr) {
    rsb[rsb_top] = addr;
    rsb_top = (rsb_top + 1) % uint32_t(rsb.size());
  }
  uint64_t rsb_pop() {
    rsb_top = (rsb_top + uint32_t(rsb.size()) - 1) % uint32_t(rsb.size());
    return rsb[rsb_top];  // wraps silently; may be stale or zero
  }
};

}  // namespace specsim
