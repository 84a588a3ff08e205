#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

namespace specsim {

// Minimal 26-opcode ISA. 64-bit registers r0..r15, r15 doubles as the stack
// pointer (spelled "sp" in the DSL). Flags: zero, carry, sign.
enum class Opcode : uint8_t {
  Mov,        // mov rD, rS | mov rD, imm
  Load,       // mov rD, [mem]  (the assembler picks Load for mem sources)
  Store,      // mov [mem], rS | mov [mem], imm
  Cmp,        // cmp a, b   a,b in {reg, mem, imm}
  Sub,        // sub dst, src   dst in {reg, mem}
  Sbb,        // sub with borrow
  Add,
  And,
  Xor,
  Shl,        // shl dst, count
  Setne,      // setne rD  -> rD = zf ? 0 : 1
  Push,
  Pop,
  Jmp,        // direct only
  Je,
  Jne,
  Jbe,        // cf || zf
  Jae,        // !cf
  CallDirect,
  CallIndirect,  // call reg | call [mem]
  Ret,
  Clflush,    // clflush [mem]
  Lfence,
  Marker,     // marker <id>; counted even when squashed
  Panic,      // terminal, models __stack_chk_fail / runtime.panicindex
  Halt,       // terminal
};

constexpr int kNumOpcodes = static_cast<int>(Opcode::Halt) + 1;

// Fixed encoded length per opcode so page occupancy and gadget addresses are
// computable without a variable-length decoder. RET is 1 byte so an "empty
// gadget" occupies a single byte, like its x86 counterpart.
constexpr std::array<uint8_t, kNumOpcodes> kOpcodeBytes = {
    3,   // Mov
    4,   // Load
    4,   // Store
    4,   // Cmp
    4,   // Sub
    4,   // Sbb
    4,   // Add
    5,   // And
    3,   // Xor
    4,   // Shl
    3,   // Setne
    2,   // Push
    2,   // Pop
    5,   // Jmp
    6,   // Je
    6,   // Jne
    6,   // Jbe
    6,   // Jae
    5,   // CallDirect
    3,   // CallIndirect
    1,   // Ret
    4,   // Clflush
    3,   // Lfence
    4,   // Marker
    2,   // Panic
    2,   // Halt
};

inline uint8_t opcode_bytes(Opcode op) { return kOpcodeBytes[static_cast<int>(op)]; }

const char* opcode_name(Opcode op);

constexpr int kNumRegs = 16;
constexpr int kSpReg = 15;

// Memory reference: [base + index*scale + disp]. Labels assemble into disp.
struct MemRef {
  std::optional<uint8_t> base;
  std::optional<uint8_t> index;
  uint8_t scale = 1;  // 1, 2, 4 or 8
  int64_t disp = 0;
  std::string label;  // unresolved label name, empty once resolved

  bool operator==(const MemRef&) const = default;
};

struct Operand {
  enum class Kind : uint8_t { None, Reg, Imm, Mem };
  Kind kind = Kind::None;
  uint8_t reg = 0;
  uint64_t imm = 0;
  MemRef mem;
  std::string imm_label;  // label used as an immediate, resolved at assembly

  static Operand make_reg(uint8_t r) {
    Operand o;
    o.kind = Kind::Reg;
    o.reg = r;
    return o;
  }
  static Operand make_imm(uint64_t v) {
    Operand o;
    o.kind = Kind::Imm;
    o.imm = v;
    return o;
  }
  static Operand make_mem(MemRef m) {
    Operand o;
    o.kind = Kind::Mem;
    o.mem = std::move(m);
    return o;
  }

  bool is_reg() const { return kind == Kind::Reg; }
  bool is_imm() const { return kind == Kind::Imm; }
  bool is_mem() const { return kind == Kind::Mem; }
  bool operator==(const Operand&) const = default;
};

struct Instruction {
  Opcode op = Opcode::Halt;
  Operand dst;           // first operand
  Operand src;           // second operand
  uint32_t marker_id = 0;  // Marker only
  uint64_t addr = 0;       // assigned virtual address
  int src_line = 0;        // DSL line, for diagnostics

  uint8_t size() const { return opcode_bytes(op); }
  bool operator==(const Instruction& o) const {
    return op == o.op && dst == o.dst && src == o.src && marker_id == o.marker_id &&
           addr == o.addr;
  }
};

bool is_cond_branch(Opcode op);
bool is_control(Opcode op);

}  // namespace specsim
