#include "specsim/mitigate.hpp"

#include <algorithm>

#include "specsim/asm_unit.hpp"
#include "specsim/assembler.hpp"
#include "specsim/error.hpp"
#include "specsim/fixtures.hpp"
#include "specsim/pipeline.hpp"

namespace specsim {
namespace {

// Scratch registers reserved for inserted sequences; fixtures keep them free.
constexpr uint8_t kScratchA = 12;
constexpr uint8_t kScratchB = 13;
constexpr uint8_t kScratchC = 14;

Instruction make(Opcode op, Operand dst = {}, Operand src = {}) {
  Instruction in;
  in.op = op;
  in.dst = std::move(dst);
  in.src = std::move(src);
  return in;
}

Operand mem_label(const std::string& label) {
  MemRef m;
  m.label = label;
  return Operand::make_mem(m);
}

Operand mem_sp(int64_t disp) {
  MemRef m;
  m.base = uint8_t(kSpReg);
  m.disp = disp;
  return Operand::make_mem(m);
}

bool is_canary_cmp(const AsmItem& it) {
  return !it.is_label && it.instr.op == Opcode::Cmp && it.instr.dst.is_reg() &&
         it.instr.src.is_mem() && !it.instr.src.mem.label.empty();
}

bool reads_reg(const Instruction& in, uint8_t r) {
  auto op_reads = [&](const Operand& o, bool is_dst) {
    if (o.is_reg() && o.reg == r) {
      if (!is_dst) return true;
      // destination registers are reads too for read-modify-write opcodes
      switch (in.op) {
        case Opcode::Sub:
        case Opcode::Sbb:
        case Opcode::Add:
        case Opcode::And:
        case Opcode::Xor:
        case Opcode::Shl:
        case Opcode::Cmp:
        case Opcode::Push:
        case Opcode::CallIndirect:
          return true;
        default:
          return false;
      }
    }
    if (o.is_mem() && ((o.mem.base && *o.mem.base == r) || (o.mem.index && *o.mem.index == r)))
      return true;
    return false;
  };
  return op_reads(in.dst, true) || op_reads(in.src, false);
}

bool writes_reg(const Instruction& in, uint8_t r) {
  switch (in.op) {
    case Opcode::Mov:
    case Opcode::Load:
    case Opcode::Setne:
    case Opcode::Pop:
      return in.dst.is_reg() && in.dst.reg == r;
    case Opcode::Sub:
    case Opcode::Sbb:
    case Opcode::Add:
    case Opcode::And:
    case Opcode::Xor:
    case Opcode::Shl:
      return in.dst.is_reg() && in.dst.reg == r;
    default:
      return false;
  }
}

void substitute_reg(Instruction& in, uint8_t from, uint8_t to) {
  auto fix = [&](Operand& o) {
    if (o.is_reg() && o.reg == from) o.reg = to;
    if (o.is_mem()) {
      if (o.mem.base && *o.mem.base == from) o.mem.base = to;
      if (o.mem.index && *o.mem.index == from) o.mem.index = to;
    }
  };
  fix(in.dst);
  fix(in.src);
}

// Canary epilogue anchor: LOAD rX, [sp+K]; CMP rX, [global]; JE ok.
struct CanarySite {
  AsmSection* sec = nullptr;
  size_t load_idx = 0;
  size_t cmp_idx = 0;
  std::string ok_label;
  int64_t local_disp = 0;      // K in [sp + K]
  std::string canary_label;
};

std::vector<CanarySite> find_canary_sites(AsmUnit& unit) {
  std::vector<CanarySite> sites;
  for (auto& top : unit.tops) {
    if (top.is_data) continue;
    auto& items = top.sec.items;
    for (size_t i = 0; i + 2 < items.size(); ++i) {
      const AsmItem& a = items[i];
      const AsmItem& b = items[i + 1];
      if (a.is_label || b.is_label) continue;
      if (a.instr.op != Opcode::Load || !a.instr.src.is_mem()) continue;
      const MemRef& lm = a.instr.src.mem;
      if (!lm.base || *lm.base != kSpReg || lm.index || !lm.label.empty()) continue;
      if (!is_canary_cmp(b) || b.instr.dst.reg != a.instr.dst.reg) continue;
      // an already-inserted fence may sit between the compare and the branch
      size_t j = i + 2;
      if (!items[j].is_label && items[j].instr.op == Opcode::Lfence) ++j;
      if (j >= items.size() || items[j].is_label || items[j].instr.op != Opcode::Je)
        continue;
      CanarySite s;
      s.sec = &top.sec;
      s.load_idx = i;
      s.cmp_idx = i + 1;
      s.ok_label = items[j].instr.dst.imm_label;
      s.local_disp = lm.disp;
      s.canary_label = b.instr.src.mem.label;
      sites.push_back(s);
    }
  }
  return sites;
}

// Bounds anchor: CMP rI, rL; JAE panic.
struct BoundsSite {
  AsmSection* sec = nullptr;
  size_t cmp_idx = 0;
  size_t jae_idx = 0;
  uint8_t index_reg = 0;
  uint8_t len_reg = 0;
};

std::vector<BoundsSite> find_bounds_sites(AsmUnit& unit) {
  std::vector<BoundsSite> sites;
  for (auto& top : unit.tops) {
    if (top.is_data) continue;
    auto& items = top.sec.items;
    for (size_t i = 0; i + 1 < items.size(); ++i) {
      const AsmItem& a = items[i];
      if (a.is_label) continue;
      if (a.instr.op != Opcode::Cmp || !a.instr.dst.is_reg() || !a.instr.src.is_reg())
        continue;
      size_t j = i + 1;
      if (!items[j].is_label && items[j].instr.op == Opcode::Lfence) ++j;
      if (j >= items.size() || items[j].is_label || items[j].instr.op != Opcode::Jae)
        continue;
      BoundsSite s;
      s.sec = &top.sec;
      s.cmp_idx = i;
      s.jae_idx = j;
      s.index_reg = a.instr.dst.reg;
      s.len_reg = a.instr.src.reg;
      sites.push_back(s);
    }
  }
  return sites;
}

bool lfence_follows(const std::vector<AsmItem>& items, size_t idx) {
  return idx + 1 < items.size() && !items[idx + 1].is_label &&
         items[idx + 1].instr.op == Opcode::Lfence;
}

AsmItem instr_item(Instruction in) {
  AsmItem it;
  it.instr = std::move(in);
  return it;
}

bool apply_lfence_ssp(AsmUnit& unit) {
  auto sites = find_canary_sites(unit);
  if (sites.empty()) fail(SimError::Kind::NoAnchor, "no canary check epilogue found");
  bool changed = false;
  // insert back to front so indexes stay valid
  for (auto it = sites.rbegin(); it != sites.rend(); ++it) {
    if (lfence_follows(it->sec->items, it->cmp_idx)) continue;
    it->sec->items.insert(it->sec->items.begin() + it->cmp_idx + 1,
                          instr_item(make(Opcode::Lfence)));
    changed = true;
  }
  return changed;
}

bool apply_mask_ret(AsmUnit& unit) {
  auto sites = find_canary_sites(unit);
  if (sites.empty()) fail(SimError::Kind::NoAnchor, "no canary check epilogue found");
  bool changed = false;
  for (auto& s : sites) {
    auto& items = s.sec->items;
    // the ok label marks the surviving path; the return slot offset comes
    // from the frame teardown between the label and RET
    size_t ok = items.size();
    for (size_t i = s.cmp_idx; i < items.size(); ++i)
      if (items[i].is_label && items[i].label == s.ok_label) {
        ok = i;
        break;
      }
    if (ok == items.size())
      fail(SimError::Kind::NoAnchor, "canary check target label missing");
    int64_t slot = 0;
    for (size_t i = ok + 1; i < items.size(); ++i) {
      if (items[i].is_label) continue;
      const Instruction& in = items[i].instr;
      if (in.op == Opcode::Add && in.dst.is_reg() && in.dst.reg == kSpReg && in.src.is_imm())
        slot += int64_t(in.src.imm);
      if (in.op == Opcode::Ret) break;
    }
    // already masked?
    if (ok + 1 < items.size() && !items[ok + 1].is_label &&
        items[ok + 1].instr.op == Opcode::Load &&
        items[ok + 1].instr.dst.is_reg() && items[ok + 1].instr.dst.reg == kScratchA)
      continue;

    std::vector<AsmItem> seq;
    seq.push_back(instr_item(make(Opcode::Load, Operand::make_reg(kScratchA),
                                  mem_label(s.canary_label))));
    seq.push_back(instr_item(make(Opcode::Load, Operand::make_reg(kScratchB),
                                  mem_sp(s.local_disp))));
    seq.push_back(instr_item(make(Opcode::Xor, Operand::make_reg(kScratchC),
                                  Operand::make_reg(kScratchC))));
    seq.push_back(instr_item(make(Opcode::Cmp, Operand::make_reg(kScratchA),
                                  Operand::make_reg(kScratchB))));
    seq.push_back(instr_item(make(Opcode::Setne, Operand::make_reg(kScratchC))));
    seq.push_back(instr_item(make(Opcode::Add, Operand::make_reg(kScratchC),
                                  Operand::make_imm(0xffffffffffffffffull))));
    seq.push_back(instr_item(make(Opcode::And, mem_sp(slot), Operand::make_reg(kScratchC))));
    items.insert(items.begin() + ok + 1, seq.begin(), seq.end());
    changed = true;
  }
  return changed;
}

bool apply_lfence_bounds(AsmUnit& unit) {
  auto sites = find_bounds_sites(unit);
  if (sites.empty()) fail(SimError::Kind::NoAnchor, "no bounds check found");
  bool changed = false;
  for (auto it = sites.rbegin(); it != sites.rend(); ++it) {
    if (lfence_follows(it->sec->items, it->cmp_idx)) continue;
    it->sec->items.insert(it->sec->items.begin() + it->cmp_idx + 1,
                          instr_item(make(Opcode::Lfence)));
    changed = true;
  }
  return changed;
}

bool apply_mask_index(AsmUnit& unit) {
  auto sites = find_bounds_sites(unit);
  if (sites.empty()) fail(SimError::Kind::NoAnchor, "no bounds check found");
  bool changed = false;
  for (auto it = sites.rbegin(); it != sites.rend(); ++it) {
    auto& items = it->sec->items;
    size_t jae = it->jae_idx;
    // already masked?
    if (jae + 1 < items.size() && !items[jae + 1].is_label &&
        items[jae + 1].instr.op == Opcode::Mov && items[jae + 1].instr.dst.is_reg() &&
        items[jae + 1].instr.dst.reg == kScratchB)
      continue;

    const uint8_t idx = it->index_reg, len = it->len_reg;
    std::vector<AsmItem> seq;
    seq.push_back(instr_item(make(Opcode::Mov, Operand::make_reg(kScratchB),
                                  Operand::make_reg(idx))));
    seq.push_back(instr_item(make(Opcode::Sub, Operand::make_reg(kScratchB),
                                  Operand::make_reg(len))));
    seq.push_back(instr_item(make(Opcode::Sbb, Operand::make_reg(kScratchC),
                                  Operand::make_reg(kScratchC))));
    seq.push_back(instr_item(make(Opcode::And, Operand::make_reg(kScratchC),
                                  Operand::make_reg(idx))));
    items.insert(items.begin() + jae + 1, seq.begin(), seq.end());
    // rewrite the first subsequent read of the index register
    for (size_t i = jae + 5; i < items.size(); ++i) {
      if (items[i].is_label) continue;
      Instruction& in = items[i].instr;
      if (reads_reg(in, idx)) {
        substitute_reg(in, idx, kScratchC);
        break;
      }
      if (writes_reg(in, idx) || is_control(in.op)) break;
    }
    changed = true;
  }
  return changed;
}

}  // namespace

const char* pass_name(PassKind k) {
  switch (k) {
    case PassKind::LfenceSsp: return "lfence_ssp";
    case PassKind::MaskRet: return "mask_ret";
    case PassKind::LfenceBounds: return "lfence_bounds";
    case PassKind::MaskIndex: return "mask_index";
  }
  return "?";
}

PassKind pass_from_name(const std::string& name) {
  if (name == "lfence_ssp") return PassKind::LfenceSsp;
  if (name == "mask_ret") return PassKind::MaskRet;
  if (name == "lfence_bounds") return PassKind::LfenceBounds;
  if (name == "mask_index") return PassKind::MaskIndex;
  fail(SimError::Kind::BadInput, "unknown pass: " + name);
}

std::string apply_pass_text(const std::string& dsl, PassKind kind) {
  AsmUnit unit = parse_dsl(dsl);
  switch (kind) {
    case PassKind::LfenceSsp: apply_lfence_ssp(unit); break;
    case PassKind::MaskRet: apply_mask_ret(unit); break;
    case PassKind::LfenceBounds: apply_lfence_bounds(unit); break;
    case PassKind::MaskIndex: apply_mask_index(unit); break;
  }
  return emit_dsl(unit);
}

Program apply_pass(const Program& p, PassKind kind) {
  return assemble(apply_pass_text(p.source, kind));
}

ScenarioResult verify_kill(const std::string& scenario, PassKind kind, uint64_t trials,
                           uint64_t seed, const SimConfig& cfg) {
  Knobs knobs;
  knobs.set("pass", pass_name(kind));
  if (scenario == "ssp_e2e") knobs.set("force_evict", "1");  // strongest attacker
  return run_trials(scenario, trials, seed, cfg, knobs);
}

OverheadResult measure_overhead(const std::string& bench, PassKind kind,
                                const SimConfig& cfg) {
  std::string base_text = fixture_text("bench_" + bench);
  std::string mit_text;
  try {
    mit_text = apply_pass_text(base_text, kind);
  } catch (const SimError& e) {
    if (e.kind != SimError::Kind::NoAnchor) throw;
    mit_text = base_text;  // nothing to rewrite: overhead 1.0 by definition
  }

  SimConfig quiet = cfg;
  quiet.jitter_pct = 0;
  auto run_cycles = [&](const std::string& text) {
    Program p = assemble(text);
    MachineState st = initial_state(p);
    give_stack(st, 0x10000, 1);
    MemoryHierarchy hier(quiet, quiet.seed);
    int pid = hier.create_process();
    map_machine_pages(hier, pid, p, st);
    PredictorState pred(quiet);
    return run_speculative(p, st, hier, pid, pred, quiet, 4000000).cycles;
  };

  OverheadResult r;
  r.bench = bench;
  r.baseline_cycles = run_cycles(base_text);
  r.mitigated_cycles = run_cycles(mit_text);
  r.ratio = double(r.mitigated_cycles) / double(r.baseline_cycles);
  return r;
}

std::vector<std::string> microbench_names() { return {"bounds", "canary", "empty"}; }

}  // namespace specsim
