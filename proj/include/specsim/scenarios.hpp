#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specsim/config.hpp"

namespace specsim {

struct TrialOutcome {
  bool hijacked = false;   // hijack-marker squash count >= 1
  bool evicted = false;    // two-step eviction landed on the measured frame
  bool leaked = false;     // receiver decoded some byte
  bool byte_ok = false;    // decoded byte equals the planted secret
  uint64_t cycles = 0;
};

struct ScenarioResult {
  std::string scenario;
  uint64_t seed = 0;
  std::vector<TrialOutcome> trials;

  uint64_t hijacks() const;
  uint64_t leaks() const;
  uint64_t bytes_ok() const;
  uint64_t evictions() const;
  double hijack_rate() const;
  double leak_rate() const;          // byte_ok / trials
  double conditioned_leak_rate() const;  // byte_ok / evicted
  double mean_cycles() const;
};

// String knob bag; every scenario documents its knobs in docs/scenarios.md.
struct Knobs {
  std::map<std::string, std::string> values;
  bool flag(const std::string& k) const;
  uint64_t num(const std::string& k, uint64_t dflt) const;
  std::string str(const std::string& k, const std::string& dflt) const;
  void set(const std::string& k, const std::string& v) { values[k] = v; }
};

// Registered scenarios: arch_bwd arch_fwd spec_bwd spec_fwd ssp_e2e vtv
// llvm_cfi go_load go_store.
std::vector<std::string> scenario_names();
bool scenario_exists(const std::string& name);

// One trial, fully self-contained (own hierarchy and processes), seeded by
// (seed, trial). Safe to call from multiple threads.
TrialOutcome run_scenario_trial(const std::string& name, uint64_t trial, uint64_t seed,
                                const SimConfig& cfg, const Knobs& knobs);

// Serial reference runner. Kept alongside the parallel one for testing.
ScenarioResult run_trials_serial(const std::string& name, uint64_t trials, uint64_t seed,
                                 const SimConfig& cfg, const Knobs& knobs);

// OpenMP runner; trial outcomes are written by trial index, so the result is
// identical to the serial runner for any thread count.
ScenarioResult run_trials_parallel(const std::string& name, uint64_t trials, uint64_t seed,
                                   const SimConfig& cfg, const Knobs& knobs);

ScenarioResult run_trials(const std::string& name, uint64_t trials, uint64_t seed,
                          const SimConfig& cfg, const Knobs& knobs, bool parallel = true);

// Experiment manifest: plain text naming a scenario, fixtures, knobs, trials
// and seed (see fixtures/manifests/).
struct Manifest {
  std::string scenario;
  uint64_t trials = 100;
  uint64_t seed = 1;
  Knobs knobs;
  std::map<std::string, std::string> config_overrides;
};
Manifest parse_manifest(const std::string& text);

}  // namespace specsim
