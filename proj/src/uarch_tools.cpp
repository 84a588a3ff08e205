#include <set>
#include <sstream>

#include "specsim/assembler.hpp"
#include "specsim/pipeline.hpp"

namespace specsim {

void map_machine_pages(MemoryHierarchy& hier, int pid, const Program& p,
                       const MachineState& st) {
  hier.map_image(pid, p);
  for (const auto& [pg, bytes] : st.mem.pages()) {
    (void)bytes;
    if (!hier.is_mapped(pid, pg * kPageSize)) hier.map_anon_page(pid, pg);
  }
}

PredictorState train_pht(const Program& p, const MachineState& init, uint32_t trials,
                         const SimConfig& cfg) {
  PredictorState pred(cfg);
  MemoryHierarchy hier(cfg, cfg.seed);
  int pid = hier.create_process();
  map_machine_pages(hier, pid, p, init);
  uint64_t clock = 0;
  for (uint32_t t = 0; t < trials; ++t)
    clock += run_speculative(p, init, hier, pid, pred, cfg, 100000, clock).cycles + 1;
  return pred;
}

// Builds the ret-chain probe program for a given chain length. The stack
// image (gadget addresses, then the terminal marker, then a halt stub) is
// planted in the data section; a prologue warms the stack and gadget lines
// so each speculative return resolves from L1.
static Program chain_program(uint32_t len) {
  std::ostringstream os;
  uint64_t stack_top = 0x20000;
  os << "entry main\n";
  os << "section main @0x1000 pages 2\n";
  os << "main:\n";
  // warm the planted chain lines and the gadget/marker code lines
  uint64_t qwords = len + 2;
  for (uint64_t off = 0; off <= qwords * 8; off += kLineSize)
    os << "    mov r2, [chain + " << off << "]\n";
  // code lines the speculative path will fetch: trigger block, fillers,
  // gadgets, terminal marker
  for (uint64_t off = 0; off <= 0xc0; off += kLineSize)
    os << "    mov r2, [copied + " << off << "]\n";
  for (uint64_t off = 0; off <= len; off += kLineSize)
    os << "    mov r2, [g0 + " << off << "]\n";
  os << "    mov r2, [term]\n";
  // copy the chain onto the stack
  os << "    mov r3, 0\n";
  os << "copy:\n";
  os << "    cmp r3, " << qwords << "\n";
  os << "    jae copied\n";
  os << "    mov r4, [chain + r3*8]\n";
  os << "    mov [sp + r3*8], r4\n";
  os << "    add r3, 1\n";
  os << "    jmp copy\n";
  os << "copied:\n";
  os << "    clflush [trigger]\n";
  os << "    lfence\n";
  os << "    mov r1, [trigger]\n";
  os << "    cmp r1, 0\n";
  os << "    jne out\n";
  os << "    ret\n";
  os << "out:\n";
  os << "    halt\n";
  os << "section gadgets @0x4000 pages 1\n";
  for (uint32_t i = 0; i < len; ++i) {
    os << "g" << i << ":\n";
    os << "    ret\n";
  }
  os << "section landing @0x6000 pages 1\n";
  os << "term:\n";
  os << "    marker 42\n";
  os << "    halt\n";
  os << "exit_stub:\n";
  os << "    halt\n";
  os << "data trigger @0x8000 = qword 1\n";
  os << "data chain @0x9000 = qword ";
  for (uint32_t i = 0; i < len; ++i) os << "g" << i << ", ";
  os << "term, exit_stub\n";
  os << "data stack_area @0x1f000 zero 4096\n";
  (void)stack_top;
  return assemble(os.str());
}

uint32_t max_empty_gadget_depth(const SimConfig& cfg) {
  SimConfig probe_cfg = cfg;
  probe_cfg.jitter_pct = 0;  // calibration is noiseless by definition
  uint32_t best = 0;
  for (uint32_t len = 1; len <= 64; ++len) {
    Program p = chain_program(len);
    MachineState st = initial_state(p);
    give_stack(st, 0x20000, 1);
    st.sp() = 0x20000 - uint64_t(len + 4) * 8;
    MemoryHierarchy hier(probe_cfg, probe_cfg.seed);
    int pid = hier.create_process();
    hier.map_image(pid, p);
    PredictorState pred(probe_cfg);
    SpecRunResult r = run_speculative(p, st, hier, pid, pred, probe_cfg, 100000);
    if (r.markers.squashed(42) >= 1) best = len;
    else if (best > 0) break;  // monotone past the first failure
  }
  return best;
}

}  // namespace specsim
