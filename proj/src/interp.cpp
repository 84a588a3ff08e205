#include "specsim/interp.hpp"

#include <algorithm>
#include <set>

#include "specsim/error.hpp"

namespace specsim {
namespace {

uint64_t read_operand(const MachineState& st, const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::Reg: return st.regs[o.reg];
    case Operand::Kind::Imm: return o.imm;
    case Operand::Kind::Mem: return st.mem.read(effective_addr(st, o.mem), 8);
    case Operand::Kind::None: break;
  }
  fail(SimError::Kind::Internal, "read of empty operand");
}

void write_operand(MachineState& st, const Operand& o, uint64_t v) {
  if (o.is_reg()) {
    st.regs[o.reg] = v;
  } else if (o.is_mem()) {
    st.mem.write(effective_addr(st, o.mem), v, 8);
  } else {
    fail(SimError::Kind::Internal, "write to non-lvalue operand");
  }
}

void set_flags_sub(Flags& f, uint64_t a, uint64_t b, uint64_t borrow_in = 0) {
  unsigned __int128 rhs = (unsigned __int128)b + borrow_in;
  uint64_t r = a - b - borrow_in;
  f.zf = r == 0;
  f.cf = (unsigned __int128)a < rhs;
  f.sf = int64_t(r) < 0;
}

void set_flags_logic(Flags& f, uint64_t r) {
  f.zf = r == 0;
  f.cf = false;
  f.sf = int64_t(r) < 0;
}

void check_stack_align(const MachineState& st) {
  if (st.sp() % 8 != 0)
    fail(SimError::Kind::MisalignedStack,
         "stack pointer 0x" + SparseMemory::hex(st.sp()) + " is not 8-byte aligned");
}

}  // namespace

uint64_t effective_addr(const MachineState& st, const MemRef& m) {
  uint64_t a = uint64_t(m.disp);
  if (m.base) a += st.regs[*m.base];
  if (m.index) a += st.regs[*m.index] * m.scale;
  return a;
}

int64_t arch_step(MachineState& st, const Program& p, const Instruction& in) {
  uint64_t next = in.addr + in.size();
  int64_t marker = -1;
  switch (in.op) {
    case Opcode::Mov:
      write_operand(st, in.dst, read_operand(st, in.src));
      break;
    case Opcode::Load:
      st.regs[in.dst.reg] = st.mem.read(effective_addr(st, in.src.mem), 8);
      break;
    case Opcode::Store: {
      uint64_t addr = effective_addr(st, in.dst.mem);
      if (!p.page_writable(page_of(addr)))
        fail(SimError::Kind::WriteProtected,
             "store to read-only page at 0x" + SparseMemory::hex(addr));
      st.mem.write(addr, read_operand(st, in.src), 8);
      break;
    }
    case Opcode::Cmp: {
      uint64_t a = read_operand(st, in.dst), b = read_operand(st, in.src);
      set_flags_sub(st.flags, a, b);
      break;
    }
    case Opcode::Sub: {
      uint64_t a = read_operand(st, in.dst), b = read_operand(st, in.src);
      set_flags_sub(st.flags, a, b);
      write_operand(st, in.dst, a - b);
      break;
    }
    case Opcode::Sbb: {
      uint64_t a = read_operand(st, in.dst), b = read_operand(st, in.src);
      uint64_t borrow = st.flags.cf ? 1 : 0;
      set_flags_sub(st.flags, a, b, borrow);
      write_operand(st, in.dst, a - b - borrow);
      break;
    }
    case Opcode::Add: {
      uint64_t a = read_operand(st, in.dst), b = read_operand(st, in.src);
      uint64_t r = a + b;
      st.flags.zf = r == 0;
      st.flags.cf = r < a;
      st.flags.sf = int64_t(r) < 0;
      write_operand(st, in.dst, r);
      break;
    }
    case Opcode::And: {
      uint64_t r = read_operand(st, in.dst) & read_operand(st, in.src);
      set_flags_logic(st.flags, r);
      write_operand(st, in.dst, r);
      break;
    }
    case Opcode::Xor: {
      uint64_t r = read_operand(st, in.dst) ^ read_operand(st, in.src);
      set_flags_logic(st.flags, r);
      write_operand(st, in.dst, r);
      break;
    }
    case Opcode::Shl: {
      uint64_t a = read_operand(st, in.dst);
      uint64_t n = read_operand(st, in.src) & 63;
      uint64_t r = n ? (a << n) : a;
      set_flags_logic(st.flags, r);
      write_operand(st, in.dst, r);
      break;
    }
    case Opcode::Setne:
      st.regs[in.dst.reg] = st.flags.zf ? 0 : 1;
      break;
    case Opcode::Push: {
      check_stack_align(st);
      st.sp() -= 8;
      st.mem.write(st.sp(), read_operand(st, in.src), 8);
      break;
    }
    case Opcode::Pop: {
      check_stack_align(st);
      uint64_t v = st.mem.read(st.sp(), 8);
      st.sp() += 8;
      st.regs[in.dst.reg] = v;  // pop sp: the loaded value wins
      break;
    }
    case Opcode::Jmp:
      next = in.dst.imm;
      break;
    case Opcode::Je:
      if (st.flags.zf) next = in.dst.imm;
      break;
    case Opcode::Jne:
      if (!st.flags.zf) next = in.dst.imm;
      break;
    case Opcode::Jbe:
      if (st.flags.cf || st.flags.zf) next = in.dst.imm;
      break;
    case Opcode::Jae:
      if (!st.flags.cf) next = in.dst.imm;
      break;
    case Opcode::CallDirect:
    case Opcode::CallIndirect: {
      check_stack_align(st);
      uint64_t target = in.op == Opcode::CallDirect ? in.dst.imm : read_operand(st, in.dst);
      st.sp() -= 8;
      st.mem.write(st.sp(), next, 8);
      next = target;
      break;
    }
    case Opcode::Ret: {
      check_stack_align(st);
      next = st.mem.read(st.sp(), 8);
      st.sp() += 8;
      break;
    }
    case Opcode::Clflush:
      effective_addr(st, in.dst.mem);  // address must be computable; no arch effect
      break;
    case Opcode::Lfence:
      break;
    case Opcode::Marker:
      marker = in.marker_id;
      break;
    case Opcode::Panic:
      st.status = RunStatus::Panicked;
      return marker;
    case Opcode::Halt:
      st.status = RunStatus::Halted;
      return marker;
  }
  st.pc = next;
  return marker;
}

InterpResult interpret(const Program& p, MachineState init, uint64_t fuel) {
  if (!p.has_label(p.entry_label))
    fail(SimError::Kind::UnresolvedLabel, "entry label missing");
  if (fuel == 0) fail(SimError::Kind::BadInput, "fuel must be positive");

  InterpResult r;
  r.state = std::move(init);
  std::set<uint64_t> pages;
  uint64_t steps = 0;
  while (r.state.status == RunStatus::Running) {
    if (steps++ >= fuel)
      fail(SimError::Kind::FuelExhausted, "fuel exhausted after " + std::to_string(fuel));
    const Instruction* in = p.at(r.state.pc);
    if (!in)
      fail(SimError::Kind::UnmappedAccess,
           "no instruction at pc 0x" + SparseMemory::hex(r.state.pc));
    pages.insert(page_of(r.state.pc));
    int64_t m = arch_step(r.state, p, *in);
    r.trace.push_back({in->addr, in->op});
    if (m >= 0) r.markers.push_back(uint32_t(m));
  }
  r.touched_pages.assign(pages.begin(), pages.end());
  return r;
}

}  // namespace specsim
