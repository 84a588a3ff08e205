#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "specsim/program.hpp"

namespace specsim {

struct Gadget {
  uint64_t addr = 0;
  std::vector<Instruction> seq;  // ends in Ret, length <= 8, no calls/jumps inside
  uint64_t page = 0;
};

enum class GadgetClass : uint8_t { PopReg, LoadSecret, ShiftAdd, Deref };
const char* gadget_class_name(GadgetClass c);

struct RopChain {
  std::vector<Gadget> gadgets;       // execution order
  std::vector<uint64_t> stack_image; // qwords planted above the return slot
  uint64_t secret_addr = 0;
  uint64_t probe_base = 0;
};

// All RET-terminated straight-line sequences of length <= 8 whose bytes lie
// entirely inside `accessed_pages`, deduplicated by start address.
std::vector<Gadget> gadget_search(const Program& p, const std::set<uint64_t>& accessed_pages);

// Classifies a gadget, ignoring markers. reg_in/reg_out carry the class's
// register interface (e.g. PopReg: reg_out = popped register).
struct Classified {
  GadgetClass cls;
  Gadget g;
  uint8_t reg_out = 0;
  uint8_t reg_in = 0;
  uint8_t reg_in2 = 0;
};
std::vector<Classified> classify_gadgets(const std::vector<Gadget>& catalog);

// Builds the 5-gadget flush+reload chain: pop probe base; pop secret address;
// load secret; shift by 8 and add base; deref. Throws Unsatisfiable naming
// the missing class. halt_pad is appended to the stack image so an oracle
// replay of the chain ends cleanly.
RopChain build_chain(const std::vector<Gadget>& catalog, uint64_t secret_addr,
                     uint64_t probe_base, uint64_t halt_pad);

}  // namespace specsim
