#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace specsim {

// All tunables in one place. Parsed from key = value text and from
// SPECSIM_<KEY> environment overrides; see docs/config.md for the list.
struct SimConfig {
  // predictors / window
  uint32_t pht_entries = 4096;
  uint32_t btb_entries = 512;
  uint32_t rsb_depth = 16;
  uint32_t rob_capacity = 224;
  uint32_t spec_depth_max = 8;

  // latencies (cycles)
  uint32_t lat_l1 = 4;
  uint32_t lat_l2 = 12;
  uint32_t lat_llc = 40;
  uint32_t lat_dram = 200;
  uint32_t lat_fwd = 1;          // store-to-load forwarding
  uint32_t redirect_ready = 5;   // fetch redirect when an indirect target resolves by value
  uint32_t mispredict_penalty = 15;

  // cache geometry
  uint32_t l1_kib = 32;
  uint32_t l1_ways = 8;
  uint32_t l2_kib = 256;
  uint32_t l2_ways = 4;
  uint32_t llc_kib = 2048;
  uint32_t llc_ways = 16;
  uint32_t llc_slices = 4;
  bool plru = false;  // default strict LRU

  // physical memory
  uint32_t frames = 8192;

  // noise / experiment knobs
  uint32_t jitter_pct = 10;      // +-jitter on miss latencies; 0 = noiseless
  uint32_t layout_jitter_pct = 30;  // chance an unrelated allocation steals a frame on respawn
  uint64_t seed = 1;
  uint32_t train_runs = 16;
  uint32_t quantum = 500;        // round-robin step, in victim cycles
  uint64_t evict_budget = 100000;
  uint32_t probe_threshold = 100;

  // ablations
  bool stlf_enabled = true;      // store-to-load forwarding on/off
  bool event_log = false;

  void set(const std::string& key, const std::string& value);
  static SimConfig parse(const std::string& text);  // key = value lines, # or ; comments
  static SimConfig load_file(const std::string& path);
  void apply_env();              // SPECSIM_* overrides
};

}  // namespace specsim
