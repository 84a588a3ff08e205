#include "specsim/isa.hpp"

namespace specsim {

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::Mov: return "mov";
    case Opcode::Load: return "mov";   // load/store are spelled mov in the DSL
    case Opcode::Store: return "mov";
    case Opcode::Cmp: return "cmp";
    case Opcode::Sub: return "sub";
    case Opcode::Sbb: return "sbb";
    case Opcode::Add: return "add";
    case Opcode::And: return "and";
    case Opcode::Xor: return "xor";
    case Opcode::Shl: return "shl";
    case Opcode::Setne: return "setne";
    case Opcode::Push: return "push";
    case Opcode::Pop: return "pop";
    case Opcode::Jmp: return "jmp";
    case Opcode::Je: return "je";
    case Opcode::Jne: return "jne";
    case Opcode::Jbe: return "jbe";
    case Opcode::Jae: return "jae";
    case Opcode::CallDirect: return "call";
    case Opcode::CallIndirect: return "call";
    case Opcode::Ret: return "ret";
    case Opcode::Clflush: return "clflush";
    case Opcode::Lfence: return "lfence";
    case Opcode::Marker: return "marker";
    case Opcode::Panic: return "panic";
    case Opcode::Halt: return "halt";
  }
  return "?";
}

bool is_cond_branch(Opcode op) {
  return op == Opcode::Je || op == Opcode::Jne || op == Opcode::Jbe || op == Opcode::Jae;
}

bool is_control(Opcode op) {
  return is_cond_branch(op) || op == Opcode::Jmp || op == Opcode::CallDirect ||
         op == Opcode::CallIndirect || op == Opcode::Ret;
}

}  // namespace specsim
