#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specsim/config.hpp"
#include "specsim/program.hpp"
#include "specsim/scenarios.hpp"

namespace specsim {

// Rewriting passes over DSL programs.
//   lfence_ssp    serializing fence after the canary comparison
//   mask_ret      branchless return-address masking (zeroes the saved return
//                 slot when the canary is corrupt)
//   lfence_bounds serializing fence after a bounds-check compare
//   mask_index    branchless index masking (out-of-bounds index becomes 0)
enum class PassKind : uint8_t { LfenceSsp, MaskRet, LfenceBounds, MaskIndex };

const char* pass_name(PassKind k);
PassKind pass_from_name(const std::string& name);

// Anchor-matched rewrite; idempotent; throws NoAnchor when the program has
// no matching site. Architectural semantics on benign inputs are preserved
// (checked by the fuzz suite).
Program apply_pass(const Program& p, PassKind kind);
std::string apply_pass_text(const std::string& dsl, PassKind kind);

// Re-runs an attack scenario against the mitigated victim.
ScenarioResult verify_kill(const std::string& scenario, PassKind kind, uint64_t trials,
                           uint64_t seed, const SimConfig& cfg);

struct OverheadResult {
  std::string bench;
  uint64_t baseline_cycles = 0;
  uint64_t mitigated_cycles = 0;
  double ratio = 1.0;
};

// Simulated-cycle ratio mitigated/baseline on an in-repo microbenchmark,
// jitter forced off. A pass with no anchor in the bench leaves it unchanged
// (ratio 1.0).
OverheadResult measure_overhead(const std::string& bench, PassKind kind, const SimConfig& cfg);

std::vector<std::string> microbench_names();

}  // namespace specsim
