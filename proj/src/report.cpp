#include "specsim/report.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "specsim/error.hpp"

namespace specsim {

BinomialCi binomial_ci(uint64_t successes, uint64_t trials) {
  BinomialCi ci;
  if (trials == 0) return ci;
  double p = double(successes) / double(trials);
  double half = 1.96 * std::sqrt(p * (1.0 - p) / double(trials));
  ci.rate = p;
  ci.lo = std::max(0.0, p - half);
  ci.hi = std::min(1.0, p + half);
  return ci;
}

std::string result_csv(const ScenarioResult& r) {
  std::ostringstream os;
  os << "scenario,trial,hijack,leaked,byte_ok,cycles\n";
  for (size_t i = 0; i < r.trials.size(); ++i) {
    const TrialOutcome& t = r.trials[i];
    os << r.scenario << "," << i << "," << int(t.hijacked) << "," << int(t.leaked) << ","
       << int(t.byte_ok) << "," << t.cycles << "\n";
  }
  return os.str();
}

std::string summary_line(const ScenarioResult& r) {
  BinomialCi hij = binomial_ci(r.hijacks(), r.trials.size());
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "# " << r.scenario << " trials " << r.trials.size() << " hijack_rate " << hij.rate
     << " ci95 [" << hij.lo << "," << hij.hi << "]";
  if (r.leaks() > 0 || r.bytes_ok() > 0) {
    BinomialCi lk = binomial_ci(r.bytes_ok(), r.trials.size());
    os << " leak_rate " << lk.rate << " ci95 [" << lk.lo << "," << lk.hi << "]";
  }
  os.precision(1);
  os << " mean_cycles " << r.mean_cycles();
  return os.str();
}

std::string report_from_csv(const std::vector<std::string>& csv_texts) {
  struct Agg {
    uint64_t trials = 0, hijacks = 0, leaks = 0, byte_ok = 0;
    double cycles = 0;
  };
  std::map<std::string, Agg> by_scenario;

  for (const std::string& text : csv_texts) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line))
      fail(SimError::Kind::BadInput, "empty CSV input");
    if (line.rfind("scenario,", 0) != 0)
      fail(SimError::Kind::BadInput, "malformed CSV header: " + line);
    bool any = false;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (cells.size() != 6)
        fail(SimError::Kind::BadInput, "malformed CSV row: " + line);
      Agg& a = by_scenario[cells[0]];
      a.trials += 1;
      a.hijacks += std::stoull(cells[2]);
      a.leaks += std::stoull(cells[3]);
      a.byte_ok += std::stoull(cells[4]);
      a.cycles += std::stod(cells[5]);
      any = true;
    }
    if (!any) fail(SimError::Kind::BadInput, "CSV has a header but no rows");
  }

  std::ostringstream os;
  os << "scenario            trials  hijack_rate  leak_rate  mean_cycles\n";
  os.setf(std::ios::fixed);
  for (const auto& [name, a] : by_scenario) {
    os.precision(4);
    os << name;
    for (size_t i = name.size(); i < 20; ++i) os << ' ';
    os << a.trials << "  ";
    os << (a.trials ? double(a.hijacks) / a.trials : 0.0) << "       ";
    os << (a.trials ? double(a.byte_ok) / a.trials : 0.0) << "     ";
    os.precision(1);
    os << (a.trials ? a.cycles / a.trials : 0.0) << "\n";
  }
  return os.str();
}

}  // namespace specsim
