#include "specsim/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "specsim/error.hpp"

namespace specsim {
namespace {

uint64_t parse_num(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t n = std::stoull(v, &pos, 0);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    fail(SimError::Kind::BadConfig, "bad value for " + key + ": '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

void SimConfig::set(const std::string& key, const std::string& value) {
  uint64_t n = 0;
  auto num = [&] { return n = parse_num(key, value); };
  if (key == "pht_entries") pht_entries = uint32_t(num());
  else if (key == "btb_entries") btb_entries = uint32_t(num());
  else if (key == "rsb_depth") rsb_depth = uint32_t(num());
  else if (key == "rob_capacity") rob_capacity = uint32_t(num());
  else if (key == "spec_depth_max") spec_depth_max = uint32_t(num());
  else if (key == "lat_l1") lat_l1 = uint32_t(num());
  else if (key == "lat_l2") lat_l2 = uint32_t(num());
  else if (key == "lat_llc") lat_llc = uint32_t(num());
  else if (key == "lat_dram") lat_dram = uint32_t(num());
  else if (key == "lat_fwd") lat_fwd = uint32_t(num());
  else if (key == "redirect_ready") redirect_ready = uint32_t(num());
  else if (key == "mispredict_penalty") mispredict_penalty = uint32_t(num());
  else if (key == "l1_kib") l1_kib = uint32_t(num());
  else if (key == "l1_ways") l1_ways = uint32_t(num());
  else if (key == "l2_kib") l2_kib = uint32_t(num());
  else if (key == "l2_ways") l2_ways = uint32_t(num());
  else if (key == "llc_kib") llc_kib = uint32_t(num());
  else if (key == "llc_ways") llc_ways = uint32_t(num());
  else if (key == "llc_slices") llc_slices = uint32_t(num());
  else if (key == "replacement") {
    if (value == "lru") plru = false;
    else if (value == "plru") plru = true;
    else fail(SimError::Kind::BadConfig, "replacement must be lru or plru");
  } else if (key == "frames") frames = uint32_t(num());
  else if (key == "jitter_pct") jitter_pct = uint32_t(num());
  else if (key == "layout_jitter_pct") layout_jitter_pct = uint32_t(num());
  else if (key == "seed") seed = num();
  else if (key == "train_runs") train_runs = uint32_t(num());
  else if (key == "quantum") quantum = uint32_t(num());
  else if (key == "evict_budget") evict_budget = num();
  else if (key == "probe_threshold") probe_threshold = uint32_t(num());
  else if (key == "stlf") stlf_enabled = num() != 0;
  else if (key == "event_log") event_log = num() != 0;
  else fail(SimError::Kind::BadConfig, "unknown config key: " + key);
}

SimConfig SimConfig::parse(const std::string& text) {
  SimConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t c = line.find_first_of("#;");
    if (c != std::string::npos) line.resize(c);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(SimError::Kind::BadConfig,
           "config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

SimConfig SimConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(SimError::Kind::BadConfig, "cannot open config file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse(os.str());
}

void SimConfig::apply_env() {
  static const char* keys[] = {
      "pht_entries", "btb_entries", "rsb_depth", "rob_capacity", "spec_depth_max",
      "lat_l1", "lat_l2", "lat_llc", "lat_dram", "lat_fwd", "redirect_ready",
      "mispredict_penalty", "l1_kib", "l1_ways", "l2_kib", "l2_ways", "llc_kib",
      "llc_ways", "llc_slices", "replacement", "frames", "jitter_pct",
      "layout_jitter_pct", "seed", "train_runs", "quantum", "evict_budget",
      "probe_threshold", "stlf", "event_log"};
  for (const char* k : keys) {
    std::string env = "SPECSIM_";
    for (const char* p = k; *p; ++p) env += char(std::toupper(*p));
    if (const char* v = std::getenv(env.c_str())) set(k, v);
  }
}

}  // namespace specsim
