#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "specsim/machine.hpp"
#include "specsim/program.hpp"

namespace specsim {

struct RetiredInstr {
  uint64_t pc = 0;
  Opcode op = Opcode::Halt;
};

struct InterpResult {
  MachineState state;
  std::vector<RetiredInstr> trace;
  std::vector<uint32_t> markers;       // marker ids in retirement order
  std::vector<uint64_t> touched_pages; // pages of every code fetch, deduped, ascending
};

// Architectural effects of one instruction, shared by the oracle interpreter
// and pipeline retirement. Advances st.pc. Returns the marker id retired by
// this step, or -1.
int64_t arch_step(MachineState& st, const Program& p, const Instruction& in);

// Effective address of a memory operand under the current register file.
uint64_t effective_addr(const MachineState& st, const MemRef& m);

// Architectural (non-speculative) reference interpreter: branches always
// resolve correctly, one instruction per step. The correctness oracle for
// the pipeline. fuel is the maximum number of retired instructions.
InterpResult interpret(const Program& p, MachineState init, uint64_t fuel);

}  // namespace specsim
