#include "specsim/scenarios.hpp"

#include <algorithm>
#include <sstream>

#include "specsim/asm_unit.hpp"
#include "specsim/assembler.hpp"
#include "specsim/error.hpp"
#include "specsim/fixtures.hpp"
#include "specsim/gadgets.hpp"
#include "specsim/interp.hpp"
#include "specsim/mitigate.hpp"
#include "specsim/pipeline.hpp"
#include "specsim/rng.hpp"
#include "specsim/sidechan.hpp"

namespace specsim {

uint64_t ScenarioResult::hijacks() const {
  uint64_t n = 0;
  for (const auto& t : trials) n += t.hijacked;
  return n;
}
uint64_t ScenarioResult::leaks() const {
  uint64_t n = 0;
  for (const auto& t : trials) n += t.leaked;
  return n;
}
uint64_t ScenarioResult::bytes_ok() const {
  uint64_t n = 0;
  for (const auto& t : trials) n += t.byte_ok;
  return n;
}
uint64_t ScenarioResult::evictions() const {
  uint64_t n = 0;
  for (const auto& t : trials) n += t.evicted;
  return n;
}
double ScenarioResult::hijack_rate() const {
  return trials.empty() ? 0.0 : double(hijacks()) / double(trials.size());
}
double ScenarioResult::leak_rate() const {
  return trials.empty() ? 0.0 : double(bytes_ok()) / double(trials.size());
}
double ScenarioResult::conditioned_leak_rate() const {
  uint64_t ev = evictions();
  if (ev == 0) return 0.0;
  uint64_t n = 0;
  for (const auto& t : trials) n += (t.evicted && t.byte_ok);
  return double(n) / double(ev);
}
double ScenarioResult::mean_cycles() const {
  if (trials.empty()) return 0.0;
  double s = 0;
  for (const auto& t : trials) s += double(t.cycles);
  return s / double(trials.size());
}

bool Knobs::flag(const std::string& k) const {
  auto it = values.find(k);
  return it != values.end() && it->second != "0" && it->second != "false" &&
         !it->second.empty();
}
uint64_t Knobs::num(const std::string& k, uint64_t dflt) const {
  auto it = values.find(k);
  if (it == values.end()) return dflt;
  return std::stoull(it->second, nullptr, 0);
}
std::string Knobs::str(const std::string& k, const std::string& dflt) const {
  auto it = values.find(k);
  return it == values.end() ? dflt : it->second;
}

namespace {

constexpr uint32_t kHijackMarker = 99;
constexpr uint64_t kFuel = 400000;

// Drops every clflush from a fixture (the no-eviction ablation).
std::string strip_clflush(const std::string& dsl) {
  AsmUnit unit = parse_dsl(dsl);
  for (auto& top : unit.tops) {
    if (top.is_data) continue;
    std::erase_if(top.sec.items, [](const AsmItem& it) {
      return !it.is_label && it.instr.op == Opcode::Clflush;
    });
  }
  return emit_dsl(unit);
}

std::string pad_store_fixture(const std::string& dsl, uint64_t pad_ops) {
  std::string out = dsl;
  std::string filler;
  for (uint64_t i = 0; i < pad_ops; ++i) filler += "    add r9, 1\n";
  size_t pos = out.find("    ; PAD\n");
  if (pos != std::string::npos) out.replace(pos, 10, filler);
  return out;
}

Program prepare_victim(std::string text, const Knobs& knobs) {
  if (knobs.flag("no_flush")) text = strip_clflush(text);
  std::string pass = knobs.str("pass", "");
  if (!pass.empty()) text = apply_pass_text(text, pass_from_name(pass));
  return assemble(text);
}

SimConfig trial_config(const SimConfig& base, uint64_t seed, uint64_t trial,
                       const Knobs& knobs) {
  SimConfig cfg = base;
  cfg.seed = substream(seed, trial);
  if (knobs.flag("stlf_off")) cfg.stlf_enabled = false;
  if (knobs.flag("noiseless")) {
    cfg.jitter_pct = 0;
    cfg.layout_jitter_pct = 0;
  }
  return cfg;
}

struct VictimRun {
  SpecRunResult result;
  bool panicked = false;
};

// Single-process scenario: train the predictors on the benign input, then
// run the attack input once and read the marker counters.
TrialOutcome simple_trial(const std::string& fixture, uint64_t trial, uint64_t seed,
                          const SimConfig& base, const Knobs& knobs,
                          void (*set_input)(MachineState&, const Program&, bool benign)) {
  SimConfig cfg = trial_config(base, seed, trial, knobs);
  Program p = prepare_victim(fixture, knobs);

  MachineState init = initial_state(p);
  give_stack(init, 0x10000, 1);

  MachineState benign = init;
  set_input(benign, p, true);
  MachineState attack = init;
  set_input(attack, p, false);

  MemoryHierarchy hier(cfg, cfg.seed);
  int pid = hier.create_process();
  map_machine_pages(hier, pid, p, init);
  PredictorState pred(cfg);

  uint64_t clock = 0;  // runs share the hierarchy timeline
  for (uint32_t t = 0; t < cfg.train_runs; ++t)
    clock += run_speculative(p, benign, hier, pid, pred, cfg, kFuel, clock).cycles + 1;

  SpecRunResult r = run_speculative(p, attack, hier, pid, pred, cfg, kFuel, clock);
  TrialOutcome out;
  out.hijacked = r.markers.squashed(kHijackMarker) >= 1;
  out.cycles = r.cycles;
  return out;
}

void set_input_arch_bwd(MachineState& st, const Program& p, bool benign) {
  st.mem.write(st.sp(), p.label("legit_return"), 8);
  st.mem.write(p.label("attack_target"),
               benign ? p.label("legit_return") : p.label("hijack_dst"), 8);
}

void set_input_arch_fwd(MachineState& st, const Program& p, bool benign) {
  st.mem.write(st.sp(), 0, 8);
  st.mem.write(p.label("hijacked_target"),
               benign ? p.label("legit_fn") : p.label("hijack_dst"), 8);
}

void set_input_spec_bwd(MachineState& st, const Program& p, bool benign) {
  st.mem.write(st.sp(), p.label("legit_return"), 8);
  st.mem.write(p.label("cond_val"), benign ? 0 : 1, 8);
  st.mem.write(p.label("target"),
               benign ? p.label("legit_return") : p.label("hijack_dst"), 8);
}

void set_input_spec_fwd(MachineState& st, const Program& p, bool benign) {
  st.mem.write(st.sp(), 0, 8);
  st.mem.write(p.label("cond_val"), benign ? 0 : 1, 8);
  st.mem.write(p.label("hijacked_target"),
               benign ? p.label("legit_fn") : p.label("hijack_dst"), 8);
}

void set_input_vtv(MachineState& st, const Program& p, bool benign) {
  st.mem.write(p.label("obj_vptr"),
               benign ? p.label("vtable_good") : p.label("vtable_evil"), 8);
}

void set_input_cfi(MachineState& st, const Program& p, bool benign) {
  st.mem.write(p.label("fnptr"), benign ? p.label("jt0") : p.label("hijack_dst"), 8);
}

void set_input_go_load(MachineState& st, const Program& p, bool benign) {
  uint64_t idx = benign ? 2 : (p.label("fake_iface") - p.label("iface_array")) / 16;
  st.mem.write(p.label("input_index"), idx, 8);
}

void set_input_go_store(MachineState& st, const Program& p, bool benign) {
  uint64_t idx =
      benign ? 2 : (p.label("itab2") + 0x18 - p.label("go_array")) / 8;
  st.mem.write(p.label("input_index"), idx, 8);
  st.mem.write(p.label("input_value"), benign ? 5 : p.label("hijack_dst"), 8);
}

// The LLVM-CFI fixture with the range bound turned into a flushed memory
// operand; the sanity ablation showing the gate tests operand immediacy.
std::string cfi_slow_variant(const std::string& dsl) {
  std::string out = dsl;
  size_t pos = out.find("    cmp r1, 0x40");
  if (pos == std::string::npos)
    fail(SimError::Kind::Internal, "cfi fixture shape changed");
  out.replace(pos, 16, "    clflush [range_limit]\n    lfence\n    cmp r1, [range_limit]");
  return out;
}

TrialOutcome cfi_trial(uint64_t trial, uint64_t seed, const SimConfig& base,
                       const Knobs& knobs) {
  std::string text = fixture_text("victim_cfi");
  if (knobs.flag("force_slow")) text = cfi_slow_variant(text);
  SimConfig cfg = trial_config(base, seed, trial, knobs);
  Program p = assemble(knobs.flag("no_flush") ? strip_clflush(text) : text);

  MachineState init = initial_state(p);
  give_stack(init, 0x10000, 1);
  MachineState benign = init, attack = init;
  set_input_cfi(benign, p, true);
  set_input_cfi(attack, p, false);

  MemoryHierarchy hier(cfg, cfg.seed);
  int pid = hier.create_process();
  map_machine_pages(hier, pid, p, init);
  PredictorState pred(cfg);
  uint64_t clock = 0;
  for (uint32_t t = 0; t < cfg.train_runs; ++t)
    clock += run_speculative(p, benign, hier, pid, pred, cfg, kFuel, clock).cycles + 1;

  if (knobs.flag("evict_code")) {
    // the attacker evicts the page holding the check; fetch just stalls
    for (uint64_t off = 0; off < kPageSize; off += kLineSize)
      hier.clflush(pid, p.label("main") + off);
  }
  SpecRunResult r = run_speculative(p, attack, hier, pid, pred, cfg, kFuel, clock);
  TrialOutcome out;
  out.hijacked = r.markers.squashed(kHijackMarker) >= 1;
  out.cycles = r.cycles;
  return out;
}

// ---- SSP end to end ----

struct SspPayload {
  std::vector<uint8_t> bytes;
  uint64_t qwords = 0;
};

SspPayload build_payload(const Program& victim, const RopChain& chain) {
  // 64 qwords of filler, a corrupted canary, the chain head over the saved
  // return address, then the rest of the stack image
  std::vector<uint64_t> qs;
  for (int i = 0; i < 64; ++i) qs.push_back(0x4a4a4a4a4a4a4a4aull);
  qs.push_back(0xbadbadbadbadbadull);  // canary slot, wrong on purpose
  qs.push_back(chain.gadgets.at(0).addr);
  for (uint64_t q : chain.stack_image) qs.push_back(q);
  SspPayload p;
  p.qwords = qs.size();
  for (uint64_t q : qs)
    for (int b = 0; b < 8; ++b) p.bytes.push_back(uint8_t(q >> (8 * b)));
  (void)victim;
  return p;
}

void write_victim_input(MachineState& st, const Program& p, const std::vector<uint8_t>& bytes,
                        uint64_t qwords) {
  st.mem.write(p.label("input_qwords"), qwords, 8);
  for (size_t i = 0; i < bytes.size(); ++i)
    st.mem.write8(p.label("input_buf") + i, bytes[i]);
}

MachineState ssp_initial(const Program& p, uint64_t secret) {
  MachineState st = initial_state(p);
  give_stack(st, 0x10000, 1);
  st.sp() = 0x10000 - 0x80;  // headroom above the frame for the planted image
  st.mem.write(p.label("secret_data"), secret, 8);
  return st;
}

TrialOutcome ssp_trial(uint64_t trial, uint64_t seed, const SimConfig& base,
                       const Knobs& knobs) {
  SimConfig cfg = trial_config(base, seed, trial, knobs);
  Program victim = prepare_victim(fixture_text("victim_ssp"), knobs);
  const uint64_t secret = knobs.num("secret", 0x41);
  const bool forced = knobs.flag("force_evict");

  MemoryHierarchy hier(cfg, cfg.seed);
  AttackerClock clk;

  // attacker A: hugepage candidate buffer, probe pages, gadget view
  int A = hier.create_process();
  uint64_t huge = hier.map_pages(A, 512, PageKind::Huge);
  uint64_t probe_base_a = hier.map_pages(A, 16, PageKind::Normal);
  ProbeArray probe;
  probe.base = probe_base_a;
  probe.victim_base = victim.label("probe_area");
  probe.threshold = cfg.probe_threshold;

  // attacker B: its canary page is its highest mapping, released last
  int B = hier.create_process();
  uint64_t b_pages = hier.map_pages(B, 4, PageKind::Normal);
  uint64_t b_canary = b_pages + 3 * kPageSize + 0x28;

  // fig. 1 step 1: eviction set for the canary page offset, B's probe as
  // the feedback signal
  EvictionSet canary_set;
  if (!forced)
    canary_set = find_eviction_set_feedback(hier, A, huge, 512, 0x28, B, b_canary, clk);

  // training: fresh victim processes parse benign input; predictor state
  // survives the execs
  PredictorState pred(cfg);
  MachineState benign = ssp_initial(victim, secret);
  write_victim_input(benign, victim, std::vector<uint8_t>(64, 0x11), 8);
  for (uint32_t t = 0; t < cfg.train_runs; ++t) {
    int vp = hier.create_process();
    hier.map_image(vp, victim);
    clk.now += run_speculative(victim, benign, hier, vp, pred, cfg, kFuel, clk.now).cycles + 1;
    hier.destroy_process(vp);
  }

  // gadget discovery from a benign profiling trace
  InterpResult profile = interpret(victim, benign, kFuel);
  std::set<uint64_t> pages(profile.touched_pages.begin(), profile.touched_pages.end());
  std::vector<Gadget> catalog = gadget_search(victim, pages);
  RopChain chain = build_chain(catalog, victim.label("secret_data"),
                               victim.label("probe_area"), victim.label("halt_stub"));

  // step 2: B execs the victim; its canary frame is up for reuse
  TwoStepOutcome two;
  if (forced) {
    two.victim_pid = hier.exec_respawn(B, victim, 0);
    two.hit_frame = true;
  } else {
    std::vector<EvictionSet> portfolio = {canary_set};
    two = evict_canary_two_step(hier, A, portfolio, B, b_canary, victim, clk,
                                cfg.evict_budget, cfg.layout_jitter_pct);
  }
  int vict = two.victim_pid;

  // share the probe pages and the gadget library, warm the gadget lines
  hier.share_into(A, probe.base, 16, vict, victim.label("probe_area"));
  uint64_t gadget_view = hier.map_pages(A, 1, PageKind::Normal);
  hier.share_into(vict, victim.label("lib_touch"), 1, A, gadget_view);
  for (uint64_t off = 0; off < kPageSize; off += kLineSize) {
    AccessResult ar = hier.access(A, gadget_view + off, 8, AccessKind::Load, clk.now);
    clk.now += ar.latency;
  }
  flush_probe(hier, A, probe, clk);

  // the malicious parse: overlong input planting the chain
  SspPayload payload = build_payload(victim, chain);
  MachineState attack = ssp_initial(victim, secret);
  write_victim_input(attack, victim, payload.bytes, payload.qwords);

  // the attacker core runs concurrently: its accesses land on the shared
  // caches at the instant the victim quantum ends, costing the victim nothing
  Pipeline pipe(victim, attack, hier, vict, pred, cfg, kFuel, clk.now);
  while (!pipe.done()) {
    pipe.step_cycles(cfg.quantum);
    uint64_t t = pipe.now();
    if (forced) {
      hier.clflush(vict, victim.label("global_canary"));
    } else {
      for (uint64_t a : canary_set.addrs) hier.access(A, a, 8, AccessKind::Load, t);
    }
    for (uint64_t off = 0; off < kPageSize; off += kLineSize)  // keep gadgets warm
      hier.access(A, gadget_view + off, 8, AccessKind::Load, t);
  }
  SpecRunResult r = pipe.take_result();
  clk.now = pipe.now();

  int byte = flush_reload_receive(hier, A, probe, clk);
  TrialOutcome out;
  out.hijacked = r.markers.squashed(kHijackMarker) >= 1;
  out.evicted = two.hit_frame;
  out.leaked = byte >= 0;
  out.byte_ok = byte == int(secret);
  out.cycles = r.cycles;
  return out;
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"arch_bwd", "arch_fwd", "spec_bwd", "spec_fwd", "ssp_e2e",
          "vtv",      "llvm_cfi", "go_load",  "go_store"};
}

bool scenario_exists(const std::string& name) {
  auto names = scenario_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

TrialOutcome run_scenario_trial(const std::string& name, uint64_t trial, uint64_t seed,
                                const SimConfig& cfg, const Knobs& knobs) {
  if (name == "arch_bwd")
    return simple_trial(fixture_text("arch_bwd"), trial, seed, cfg, knobs,
                        set_input_arch_bwd);
  if (name == "arch_fwd")
    return simple_trial(fixture_text("arch_fwd"), trial, seed, cfg, knobs,
                        set_input_arch_fwd);
  if (name == "spec_bwd")
    return simple_trial(fixture_text("spec_bwd"), trial, seed, cfg, knobs,
                        set_input_spec_bwd);
  if (name == "spec_fwd")
    return simple_trial(fixture_text("spec_fwd"), trial, seed, cfg, knobs,
                        set_input_spec_fwd);
  if (name == "vtv") {
    Knobs k = knobs;
    if (k.flag("no_evict")) k.set("no_flush", "1");
    return simple_trial(fixture_text("victim_vtv"), trial, seed, cfg, k, set_input_vtv);
  }
  if (name == "llvm_cfi") return cfi_trial(trial, seed, cfg, knobs);
  if (name == "go_load") {
    const char* fx = knobs.flag("same_line") ? "victim_go_load_sameline" : "victim_go_load";
    return simple_trial(fixture_text(fx), trial, seed, cfg, knobs, set_input_go_load);
  }
  if (name == "go_store") {
    std::string text = pad_store_fixture(fixture_text("victim_go_store"),
                                         knobs.num("pad", 0));
    return simple_trial(text, trial, seed, cfg, knobs, set_input_go_store);
  }
  if (name == "ssp_e2e") return ssp_trial(trial, seed, cfg, knobs);
  fail(SimError::Kind::BadInput, "unknown scenario: " + name);
}

ScenarioResult run_trials_serial(const std::string& name, uint64_t trials, uint64_t seed,
                                 const SimConfig& cfg, const Knobs& knobs) {
  ScenarioResult r;
  r.scenario = name;
  r.seed = seed;
  r.trials.resize(trials);
  for (uint64_t t = 0; t < trials; ++t)
    r.trials[t] = run_scenario_trial(name, t, seed, cfg, knobs);
  return r;
}

ScenarioResult run_trials_parallel(const std::string& name, uint64_t trials, uint64_t seed,
                                   const SimConfig& cfg, const Knobs& knobs) {
  ScenarioResult r;
  r.scenario = name;
  r.seed = seed;
  r.trials.resize(trials);
#ifdef SPECSIM_OPENMP
  std::exception_ptr first_error;
#pragma omp parallel for schedule(dynamic)
  for (int64_t t = 0; t < int64_t(trials); ++t) {
    try {
      r.trials[size_t(t)] = run_scenario_trial(name, uint64_t(t), seed, cfg, knobs);
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
#else
  for (uint64_t t = 0; t < trials; ++t)
    r.trials[t] = run_scenario_trial(name, t, seed, cfg, knobs);
#endif
  return r;
}

ScenarioResult run_trials(const std::string& name, uint64_t trials, uint64_t seed,
                          const SimConfig& cfg, const Knobs& knobs, bool parallel) {
  return parallel ? run_trials_parallel(name, trials, seed, cfg, knobs)
                  : run_trials_serial(name, trials, seed, cfg, knobs);
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t c = line.find_first_of("#;");
    if (c != std::string::npos) line.resize(c);
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(SimError::Kind::BadInput,
           "manifest line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "scenario") m.scenario = val;
    else if (key == "trials") m.trials = std::stoull(val, nullptr, 0);
    else if (key == "seed") m.seed = std::stoull(val, nullptr, 0);
    else if (key.rfind("knob ", 0) == 0) m.knobs.set(trim(key.substr(5)), val);
    else if (key.rfind("config ", 0) == 0) m.config_overrides[trim(key.substr(7))] = val;
    else fail(SimError::Kind::BadInput, "manifest: unknown key '" + key + "'");
  }
  if (m.scenario.empty())
    fail(SimError::Kind::BadInput, "manifest names no scenario");
  return m;
}

}  // namespace specsim
