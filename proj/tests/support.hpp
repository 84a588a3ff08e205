#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "specsim/assembler.hpp"
#include "specsim/interp.hpp"
#include "specsim/pipeline.hpp"
#include "specsim/rng.hpp"

namespace specsim::test {

// Random straight-line-plus-forward-branches program generator used by the
// oracle-equivalence fuzz. Programs terminate by construction: branches only
// jump forward, push/pop are balanced, memory stays inside the scratch
// region.
inline std::string random_program(uint64_t seed) {
  Rng rng(seed);
  std::ostringstream os;
  int next_marker = 1;
  int blocks = 3 + int(rng.below(6));

  os << "entry main\n";
  os << "section main @0x1000 pages 4\n";
  os << "main:\n";

  auto reg = [&] { return "r" + std::to_string(rng.below(10)); };
  auto scratch_disp = [&] { return 8 * rng.below(1000); };

  for (int b = 0; b < blocks; ++b) {
    os << "b" << b << ":\n";
    int n = 2 + int(rng.below(7));
    for (int i = 0; i < n; ++i) {
      switch (rng.below(14)) {
        case 0: os << "    mov " << reg() << ", " << rng.below(1 << 20) << "\n"; break;
        case 1: os << "    mov " << reg() << ", " << reg() << "\n"; break;
        case 2: os << "    add " << reg() << ", " << reg() << "\n"; break;
        case 3: os << "    sub " << reg() << ", " << rng.below(1 << 10) << "\n"; break;
        case 4: os << "    xor " << reg() << ", " << reg() << "\n"; break;
        case 5: os << "    and " << reg() << ", " << rng.below(1 << 16) << "\n"; break;
        case 6: os << "    shl " << reg() << ", " << rng.below(9) << "\n"; break;
        case 7: {
          os << "    cmp " << reg() << ", " << reg() << "\n";
          if (rng.below(2)) os << "    sbb " << reg() << ", " << reg() << "\n";
          else os << "    setne " << reg() << "\n";
          break;
        }
        case 8: os << "    mov " << reg() << ", [scratch + " << scratch_disp() << "]\n"; break;
        case 9: os << "    mov [scratch + " << scratch_disp() << "], " << reg() << "\n"; break;
        case 10: {
          std::string idx = reg();
          os << "    and " << idx << ", 0x3f8\n";
          os << "    mov " << reg() << ", [scratch + " << idx << "*1]\n";
          break;
        }
        case 11: os << "    clflush [scratch + " << scratch_disp() << "]\n"; break;
        case 12: os << "    lfence\n"; break;
        case 13: {
          std::string v = reg();
          os << "    push " << v << "\n";
          os << "    add " << v << ", 1\n";
          os << "    pop " << reg() << "\n";
          break;
        }
      }
      if (rng.below(6) == 0) os << "    marker " << next_marker++ << "\n";
    }
    // block terminator
    int target = b + 1 + int(rng.below(uint64_t(blocks - b)));
    switch (rng.below(6)) {
      case 0:
        break;  // fall through
      case 1:
        os << "    cmp " << reg() << ", " << rng.below(64) << "\n";
        os << "    " << (rng.below(2) ? "je" : "jne") << " b" << target << "\n";
        break;
      case 2:
        os << "    cmp " << reg() << ", " << reg() << "\n";
        os << "    " << (rng.below(2) ? "jbe" : "jae") << " b" << target << "\n";
        break;
      case 3:
        os << "    jmp b" << target << "\n";
        break;
      case 4:
        os << "    call leaf" << rng.below(3) << "\n";
        break;
      case 5: {
        std::string t = reg();
        if (rng.below(2)) {
          os << "    mov " << t << ", leaf" << rng.below(3) << "\n";
          os << "    call " << t << "\n";
        } else {
          os << "    push b" << target << "\n";
          os << "    ret\n";
        }
        break;
      }
    }
  }
  os << "b" << blocks << ":\n";
  os << "    halt\n";

  for (int l = 0; l < 3; ++l) {
    os << "leaf" << l << ":\n";
    os << "    add r" << l << ", " << (l + 1) << "\n";
    if (l == 1) os << "    mov r4, [scratch + 16]\n";
    if (l == 2) os << "    marker " << 900 + l << "\n";
    os << "    ret\n";
  }

  os << "data scratch @0x8000 zero 8192\n";
  os << "data stack_area @0xf000 zero 4096\n";
  return os.str();
}

struct OracleCompare {
  bool equal = false;
  std::string detail;
};

// Runs both engines on one program and compares the architectural outcome.
inline OracleCompare compare_engines(const std::string& src, uint64_t seed,
                                     const SimConfig& cfg0) {
  SimConfig cfg = cfg0;
  cfg.seed = seed;
  Program p = assemble(src);
  MachineState init = initial_state(p);
  give_stack(init, 0x10000, 1);

  InterpResult oracle = interpret(p, init, 100000);

  MemoryHierarchy hier(cfg, seed);
  int pid = hier.create_process();
  map_machine_pages(hier, pid, p, init);
  PredictorState pred(cfg);
  SpecRunResult spec = run_speculative(p, init, hier, pid, pred, cfg, 100000);

  OracleCompare r;
  if (!(oracle.state == spec.state)) {
    r.detail = "machine state differs";
    return r;
  }
  if (oracle.markers != spec.retired_markers) {
    r.detail = "retired marker sequence differs";
    return r;
  }
  if (oracle.trace.size() != spec.trace.size()) {
    r.detail = "trace length differs";
    return r;
  }
  r.equal = true;
  return r;
}

}  // namespace specsim::test
