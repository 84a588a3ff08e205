#pragma once

#include <string>
#include <vector>

#include "specsim/scenarios.hpp"

namespace specsim {

// CSV schema, frozen: scenario,trial,hijack,leaked,byte_ok,cycles
std::string result_csv(const ScenarioResult& r);
// "rate 0.943 ci95 [0.927,0.959] trials 1000"
std::string summary_line(const ScenarioResult& r);

struct BinomialCi {
  double rate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};
// Normal-approximation 95% interval.
BinomialCi binomial_ci(uint64_t successes, uint64_t trials);

// Aggregates result CSVs into a per-scenario table; throws BadInput on
// malformed or empty files.
std::string report_from_csv(const std::vector<std::string>& csv_texts);

}  // namespace specsim
