#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "specsim/assembler.hpp"
#include "specsim/config.hpp"
#include "specsim/error.hpp"
#include "specsim/fixtures.hpp"
#include "specsim/gadgets.hpp"
#include "specsim/interp.hpp"
#include "specsim/listings.hpp"
#include "specsim/memhier.hpp"
#include "specsim/mitigate.hpp"
#include "specsim/pipeline.hpp"
#include "specsim/report.hpp"
#include "specsim/rng.hpp"
#include "specsim/scenarios.hpp"
#include "specsim/sidechan.hpp"

using namespace specsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUnknown = 2;   // unknown scenario / fixture / pass
constexpr int kExitBadInput = 3;  // usage or config errors
constexpr int kExitInternal = 4;  // invariant violation

struct GlobalOpts {
  std::string config_path;
  uint64_t seed = 1;
  uint64_t trials = 100;
  int jitter = -1;
  bool serial = false;
};

SimConfig load_config(const GlobalOpts& g) {
  SimConfig cfg;
  if (!g.config_path.empty()) cfg = SimConfig::load_file(g.config_path);
  cfg.apply_env();  // SPECSIM_* overrides
  if (g.jitter >= 0) cfg.jitter_pct = uint32_t(g.jitter);
  return cfg;
}

Knobs parse_knobs(const std::vector<std::string>& kvs) {
  static const std::set<std::string> known = {
      "no_flush", "stlf_off", "same_line", "no_evict",  "force_slow",
      "evict_code", "pad",    "secret",    "noiseless", "force_evict",
      "pass"};
  Knobs k;
  for (const std::string& kv : kvs) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      fail(SimError::Kind::BadInput, "knob must be name=value: " + kv);
    std::string name = kv.substr(0, eq);
    if (!known.count(name)) fail(SimError::Kind::BadInput, "unknown knob: " + name);
    k.set(name, kv.substr(eq + 1));
  }
  return k;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(SimError::Kind::BadInput, "cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

int cmd_run(const GlobalOpts& g, const std::string& scenario,
            const std::vector<std::string>& knob_kvs, const std::string& manifest_path) {
  SimConfig cfg = load_config(g);
  std::string name = scenario;
  uint64_t trials = g.trials;
  uint64_t seed = g.seed;
  Knobs knobs = parse_knobs(knob_kvs);
  if (!manifest_path.empty()) {
    Manifest m = parse_manifest(read_file(manifest_path));
    name = m.scenario;
    trials = m.trials;
    seed = m.seed;
    for (const auto& [k, v] : m.knobs.values) knobs.set(k, v);
    for (const auto& [k, v] : m.config_overrides) cfg.set(k, v);
  }
  if (!scenario_exists(name)) {
    std::cerr << "unknown scenario: " << name << "\n";
    return kExitUnknown;
  }
  if (trials == 0) {
    std::cerr << "trials must be positive\n";
    return kExitBadInput;
  }
  ScenarioResult r = run_trials(name, trials, seed, cfg, knobs, !g.serial);
  std::cout << result_csv(r) << summary_line(r) << "\n";
  return kExitOk;
}

int cmd_sweep(const GlobalOpts& g, const std::string& scenario, const std::string& knob,
              const std::string& values_csv, const std::vector<std::string>& knob_kvs) {
  SimConfig base = load_config(g);
  if (!scenario_exists(scenario)) {
    std::cerr << "unknown scenario: " << scenario << "\n";
    return kExitUnknown;
  }
  std::vector<std::string> values;
  std::istringstream vs(values_csv);
  std::string item;
  while (std::getline(vs, item, ',')) values.push_back(item);
  if (values.empty()) {
    std::cerr << "empty value list\n";
    return kExitBadInput;
  }
  Knobs knobs = parse_knobs(knob_kvs);

  bool is_config_key = true;
  try {
    SimConfig probe = base;
    probe.set(knob, values[0]);
  } catch (const SimError&) {
    is_config_key = false;
  }
  if (!is_config_key) {
    static const std::set<std::string> scenario_knobs = {"pad", "secret"};
    if (!scenario_knobs.count(knob)) fail(SimError::Kind::BadInput, "unknown knob: " + knob);
  }

  std::cout << "scenario,knob,value,trials,hijacks,rate\n";
  for (const std::string& v : values) {
    SimConfig cfg = base;
    Knobs k = knobs;
    if (is_config_key) cfg.set(knob, v);
    else k.set(knob, v);
    ScenarioResult r = run_trials(scenario, g.trials, g.seed, cfg, k, !g.serial);
    std::cout << scenario << "," << knob << "," << v << "," << g.trials << ","
              << r.hijacks() << "," << r.hijack_rate() << "\n";
  }
  return kExitOk;
}

int cmd_evict_find(const GlobalOpts& g) {
  SimConfig cfg = load_config(g);
  std::cout << "trial,outcome,cycles\n";
  for (uint64_t t = 0; t < g.trials; ++t) {
    SimConfig c = cfg;
    c.seed = substream(g.seed, t);
    MemoryHierarchy hier(c, c.seed);
    AttackerClock clk;
    int A = hier.create_process();
    uint64_t huge = hier.map_pages(A, 512, PageKind::Huge);
    uint64_t page = hier.map_pages(A, 1, PageKind::Normal);
    uint32_t off = uint32_t(substream(g.seed ^ 0x5eedULL, t) % 64) * uint32_t(kLineSize);
    std::string outcome = "ok";
    try {
      EvictionSet es = find_eviction_set(hier, A, huge, 512, page + off, off, clk);
      if (es.addrs.size() != c.llc_ways) outcome = "wrong_size";
    } catch (const SimError& e) {
      outcome = std::string("error:") + e.what();
    }
    std::cout << t << "," << outcome << "," << clk.now << "\n";
  }
  return kExitOk;
}

int cmd_probe(const GlobalOpts& g, uint64_t byte) {
  SimConfig cfg = load_config(g);
  std::cout << "trial,outcome,cycles\n";
  for (uint64_t t = 0; t < g.trials; ++t) {
    SimConfig c = cfg;
    c.seed = substream(g.seed, t);
    MemoryHierarchy hier(c, c.seed);
    AttackerClock clk;
    int A = hier.create_process();
    ProbeArray probe;
    probe.base = hier.map_pages(A, 16, PageKind::Normal);
    probe.threshold = c.probe_threshold;
    flush_probe(hier, A, probe, clk);
    hier.access(A, probe.base + byte * probe.stride, 8, AccessKind::Load, clk.now);
    int got = flush_reload_receive(hier, A, probe, clk);
    std::cout << t << "," << (got == int(byte) ? "ok" : "miss") << "," << clk.now << "\n";
  }
  return kExitOk;
}

int cmd_gadgets(const GlobalOpts& g, const std::string& which) {
  SimConfig cfg = load_config(g);
  (void)cfg;
  Program victim = assemble(fixture_text(which));
  MachineState st = initial_state(victim);
  give_stack(st, 0x10000, 1);
  st.sp() = 0x10000 - 0x80;
  st.mem.write(victim.label("input_qwords"), 8, 8);
  InterpResult prof = interpret(victim, st, 400000);
  std::set<uint64_t> pages(prof.touched_pages.begin(), prof.touched_pages.end());
  std::vector<Gadget> catalog = gadget_search(victim, pages);
  std::cout << "addr,len,page,body\n";
  for (const Gadget& gd : catalog) {
    std::cout << "0x" << std::hex << gd.addr << std::dec << "," << gd.seq.size() << ",0x"
              << std::hex << gd.page << std::dec << ",\"";
    for (size_t i = 0; i < gd.seq.size(); ++i)
      std::cout << (i ? "; " : "") << format_instruction(gd.seq[i]);
    std::cout << "\"\n";
  }
  RopChain chain = build_chain(catalog, victim.label("secret_data"),
                               victim.label("probe_area"), victim.label("halt_stub"));
  std::cout << "# chain:";
  for (const Gadget& gd : chain.gadgets) std::cout << " 0x" << std::hex << gd.addr;
  std::cout << std::dec << "\n# stack image:";
  for (uint64_t q : chain.stack_image) std::cout << " 0x" << std::hex << q;
  std::cout << std::dec << "\n";
  return kExitOk;
}

int cmd_mitigate(const GlobalOpts&, const std::string& pass, const std::string& input) {
  std::string text;
  if (input.rfind("fixture:", 0) == 0) text = fixture_text(input.substr(8));
  else text = read_file(input);
  std::cout << apply_pass_text(text, pass_from_name(pass));
  return kExitOk;
}

int cmd_bench(const GlobalOpts& g, const std::string& pass) {
  SimConfig cfg = load_config(g);
  std::cout << "bench,pass,baseline_cycles,mitigated_cycles,ratio\n";
  std::vector<PassKind> passes;
  if (pass.empty())
    passes = {PassKind::LfenceBounds, PassKind::MaskIndex, PassKind::LfenceSsp,
              PassKind::MaskRet};
  else
    passes = {pass_from_name(pass)};
  for (const std::string& b : microbench_names())
    for (PassKind k : passes) {
      OverheadResult o = measure_overhead(b, k, cfg);
      std::cout << b << "," << pass_name(k) << "," << o.baseline_cycles << ","
                << o.mitigated_cycles << "," << o.ratio << "\n";
    }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& paths) {
  std::vector<std::string> texts;
  for (const std::string& p : paths) texts.push_back(read_file(p));
  std::cout << report_from_csv(texts);
  return kExitOk;
}

// Per-cycle event trace of one fixture run (the event_log debug interface),
// followed by the LLC occupancy dump.
int cmd_trace(const GlobalOpts& g, const std::string& which) {
  SimConfig cfg = load_config(g);
  std::string text = which.rfind("fixture:", 0) == 0 ? fixture_text(which.substr(8))
                                                     : read_file(which);
  Program p = assemble(text);
  MachineState st = initial_state(p);
  give_stack(st, 0x10000, 1);
  MemoryHierarchy hier(cfg, cfg.seed);
  int pid = hier.create_process();
  map_machine_pages(hier, pid, p, st);
  PredictorState pred(cfg);
  EventLog log;
  SpecRunResult r = run_speculative(p, st, hier, pid, pred, cfg, 400000, 0, &log);
  for (const Event& e : log) std::cout << e.to_string() << "\n";
  std::cout << "# retired " << r.retired << " cycles " << r.cycles << " mispredicts "
            << r.mispredicts << "\n";
  std::cout << "# llc occupancy\n" << hier.dump_llc();
  return kExitOk;
}

int exit_code_for(const SimError& e) {
  switch (e.kind) {
    case SimError::Kind::UnknownListing:
      return kExitUnknown;
    case SimError::Kind::Internal:
      return kExitInternal;
    default:
      return kExitBadInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speculative control-flow hijack laboratory"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are valid after the subcommand too

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key = value config file");
  app.add_option("--seed", g.seed, "experiment seed");
  app.add_option("--trials", g.trials, "trials per experiment");
  app.add_option("--jitter", g.jitter, "override jitter_pct");
  app.add_flag("--serial", g.serial, "disable the parallel trial runner");

  std::string scenario, manifest, knob, values, pass, input, fixture = "victim_ssp";
  std::vector<std::string> knob_kvs, csvs;
  uint64_t probe_byte = 0x41;

  CLI::App* run = app.add_subcommand("run", "run a scenario, emit per-trial CSV");
  run->add_option("scenario", scenario, "scenario name");
  run->add_option("--knob", knob_kvs, "scenario knob name=value");
  run->add_option("--manifest", manifest, "experiment manifest file");

  CLI::App* sweep = app.add_subcommand("sweep", "run a scenario across knob values");
  sweep->add_option("scenario", scenario)->required();
  sweep->add_option("--knob-name", knob, "config key or scenario knob")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--knob", knob_kvs, "fixed scenario knob name=value");

  CLI::App* ev = app.add_subcommand("evict-find", "discover and verify eviction sets");
  CLI::App* pr = app.add_subcommand("probe", "flush+reload round trip");
  pr->add_option("--byte", probe_byte, "byte value to plant");

  CLI::App* ga = app.add_subcommand("gadgets", "scan a victim fixture for gadgets");
  ga->add_option("--fixture", fixture, "victim fixture name");

  CLI::App* mi = app.add_subcommand("mitigate", "rewrite a DSL program");
  mi->add_option("--pass", pass, "lfence_ssp | mask_ret | lfence_bounds | mask_index")
      ->required();
  mi->add_option("input", input, "DSL file path or fixture:<name>")->required();

  CLI::App* be = app.add_subcommand("bench", "mitigation overhead microbenchmarks");
  be->add_option("--pass", pass, "single pass (default: all)");

  CLI::App* re = app.add_subcommand("report", "aggregate result CSVs");
  re->add_option("csvs", csvs, "CSV files")->required();

  std::string trace_input = "fixture:bench_bounds";
  CLI::App* tr = app.add_subcommand("trace", "per-cycle event log of one run");
  tr->add_option("input", trace_input, "DSL file path or fixture:<name>");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (scenario.empty() && manifest.empty()) {
        std::cerr << "run: need a scenario name or --manifest\n";
        return kExitBadInput;
      }
      return cmd_run(g, scenario, knob_kvs, manifest);
    }
    if (sweep->parsed()) return cmd_sweep(g, scenario, knob, values, knob_kvs);
    if (ev->parsed()) return cmd_evict_find(g);
    if (pr->parsed()) return cmd_probe(g, probe_byte);
    if (ga->parsed()) return cmd_gadgets(g, fixture);
    if (mi->parsed()) return cmd_mitigate(g, pass, input);
    if (be->parsed()) return cmd_bench(g, pass);
    if (re->parsed()) return cmd_report(csvs);
    if (tr->parsed()) return cmd_trace(g, trace_input);
  } catch (const SimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
