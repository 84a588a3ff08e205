#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "specsim/assembler.hpp"
#include "specsim/error.hpp"
#include "specsim/fixtures.hpp"
#include "specsim/interp.hpp"
#include "specsim/listings.hpp"

using namespace specsim;

namespace {
MachineState ready(const Program& p) {
  MachineState st = initial_state(p);
  give_stack(st, 0x10000, 1);
  return st;
}
}  // namespace

TEST_CASE("mov and halt") {
  Program p = assemble("section s @0x1000\nmain:\n    mov r1, 5\n    halt\n");
  auto r = interpret(p, ready(p), 100);
  CHECK(r.state.regs[1] == 5);
  CHECK(r.state.status == RunStatus::Halted);
  CHECK(r.trace.size() == 2);
}

TEST_CASE("architectural run of the overwrite listing reaches the exit path") {
  Program p = assemble(fixture_text("arch_bwd"));
  MachineState st = ready(p);
  st.mem.write(st.sp(), p.label("legit_return"), 8);
  // attacker overwrote the target: the check fails and no return happens
  st.mem.write(p.label("attack_target"), p.label("hijack_dst"), 8);
  auto r = interpret(p, st, 1000);
  CHECK(r.state.status == RunStatus::Halted);
  CHECK(r.state.pc == p.label("my_exit"));
  CHECK(r.markers.empty());  // never the hijack marker architecturally
}

TEST_CASE("bounds check with index == length takes the panic path") {
  Program p = assemble(fixture_text("go_mask"));
  MachineState st = ready(p);
  st.mem.write(p.label("input_index"), 8, 8);  // == arr_len
  auto r = interpret(p, st, 1000);
  CHECK(r.state.status == RunStatus::Panicked);
}

TEST_CASE("index masking fixture: in-bounds index reads its element") {
  Program p = assemble(fixture_text("go_mask"));
  MachineState st = ready(p);
  st.mem.write(p.label("input_index"), 2, 8);
  auto r = interpret(p, st, 1000);
  CHECK(r.state.status == RunStatus::Halted);
  CHECK(r.state.mem.read(p.label("out_result"), 8) == 12);
}

TEST_CASE("panic and halt are terminal") {
  Program p = assemble("section s @0x1000\nmain:\n    panic\n    mov r1, 1\n    halt\n");
  auto r = interpret(p, ready(p), 100);
  CHECK(r.state.status == RunStatus::Panicked);
  CHECK(r.state.regs[1] == 0);
  CHECK(r.trace.size() == 1);
}

TEST_CASE("fuel exhaustion is an error") {
  Program p = assemble("section s @0x1000\nmain:\n    jmp main\n");
  try {
    interpret(p, ready(p), 100);
    FAIL("expected fuel error");
  } catch (const SimError& e) {
    CHECK(e.kind == SimError::Kind::FuelExhausted);
  }
}

TEST_CASE("unmapped access is an error") {
  Program p = assemble("section s @0x1000\nmain:\n    mov r1, [r2 + 0x900000]\n    halt\n");
  try {
    interpret(p, ready(p), 100);
    FAIL("expected unmapped error");
  } catch (const SimError& e) {
    CHECK(e.kind == SimError::Kind::UnmappedAccess);
  }
}

TEST_CASE("misaligned stack pointer on push is an error") {
  Program p = assemble(
      "section s @0x1000\nmain:\n    sub sp, 4\n    push r1\n    halt\n");
  try {
    interpret(p, ready(p), 100);
    FAIL("expected misaligned stack");
  } catch (const SimError& e) {
    CHECK(e.kind == SimError::Kind::MisalignedStack);
  }
}

TEST_CASE("store to a read-only page is an error") {
  Program p = assemble(
      "section s @0x1000\nmain:\n    mov [tab], r1\n    halt\ndata tab @0x6000 ro = qword 1\n");
  try {
    interpret(p, ready(p), 100);
    FAIL("expected write protection");
  } catch (const SimError& e) {
    CHECK(e.kind == SimError::Kind::WriteProtected);
  }
}

TEST_CASE("pop into the stack pointer pivots to the loaded value") {
  Program p = assemble(R"(section s @0x1000
main:
    push r1
    pop sp
    halt
)");
  MachineState st = ready(p);
  st.regs[1] = 0xff70;
  auto r = interpret(p, st, 100);
  CHECK(r.state.sp() == 0xff70);
}

TEST_CASE("interpretation is a pure function of program, state and fuel") {
  Program p = assemble(fixture_text("bench_bounds"));
  MachineState st = ready(p);
  auto a = interpret(p, st, 100000);
  auto b = interpret(p, st, 100000);
  CHECK(a.state == b.state);
  CHECK(a.trace.size() == b.trace.size());
}

TEST_CASE("flush+reload gadget listing runs straight through") {
  Program p = assemble(encode_listing("fr_gadget"));
  MachineState st = initial_state(p);
  auto r = interpret(p, st, 100);
  CHECK(r.state.status == RunStatus::Halted);
  // r0 walked secret -> scaled offset -> loaded element (zeros in the image)
  CHECK(r.trace.size() == 5);
}
