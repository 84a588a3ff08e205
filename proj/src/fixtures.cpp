#include "specsim/fixtures.hpp"

#include <map>

#include "specsim/error.hpp"

namespace specsim {
namespace {

// Translations of the classic attack snippets into the DSL, plus the full
// scenario victims. r0 is the scratch/return register, sp is r15. Landing
// sites are warmed with data loads up front; calling them instead would
// retire the hijack marker and break the never-reached-architecturally
// invariant.

const char* kArchBwd = R"(; architectural overwrite of a saved return address
entry main
section main @0x1000
main:
    mov r9, [hijack_dst]        ; warm the landing lines
    mov r9, [legit_return]
    mov r0, [sp]                ; copy of ret value
    mov [stored_ret], r0
    mov r0, [attack_target]     ; architectural overwrite (attacker controlled)
    mov [sp], r0
    clflush [stored_ret]        ; evict ret value copy
    lfence
    mov r0, [sp]                ; backward edge integrity check
    cmp r0, [stored_ret]
    jne my_exit
    ret                         ; backward edge hijack
my_exit:
    halt
section hijack @0x3000
hijack_dst:
    marker 99
    halt
section legit @0x4000
legit_return:
    marker 7
    halt
data stored_ret @0x8000 = qword 0
data attack_target @0x9000 = qword hijack_dst
data stack_area @0xf000 zero 4096
)";

const char* kArchFwd = R"(; architectural overwrite of an indirect call target
entry main
section main @0x1000
main:
    mov r9, [hijack_dst]        ; warm the landing lines
    mov r9, [legit_fn]
    mov r0, [orig_target]       ; copy of target value
    mov [stored_target], r0
    mov r0, [hijacked_target]   ; architectural overwrite (attacker controlled)
    mov [target], r0
    clflush [stored_target]     ; evict target value copy
    lfence
    mov r0, [target]            ; forward edge integrity check
    cmp r0, [stored_target]
    jne my_exit
    call [target]               ; forward edge hijack
    halt
my_exit:
    halt
section hijack @0x3000
hijack_dst:
    marker 99
    halt
section legit @0x4000
legit_fn:
    marker 7
    ret
data orig_target @0x7000 = qword legit_fn
data target @0x8000 = qword legit_fn
data stored_target @0x9000 = qword 0
data hijacked_target @0xa000 = qword legit_fn
data stack_area @0xf000 zero 4096
)";

const char* kSpecBwd = R"(; speculative overwrite of the return slot
entry main
section main @0x1000
main:
    mov r9, [hijack_dst]        ; warm the landing lines
    mov r9, [legit_return]
    mov r9, [target]
    clflush [cond_val]          ; speculation trigger
    lfence
    mov r1, [cond_val]
    cmp r1, 0
    jne done
    mov r0, [target]            ; speculative overwrite (attacker controlled)
    mov [sp], r0
    ret                         ; backward edge hijack
done:
    halt
section hijack @0x3000
hijack_dst:
    marker 99
    halt
section legit @0x4000
legit_return:
    marker 7
    halt
data cond_val @0x7000 = qword 0
data target @0x8000 = qword legit_return
data stack_area @0xf000 zero 4096
)";

const char* kSpecFwd = R"(; speculative overwrite of an indirect call target
entry main
section main @0x1000
main:
    mov r9, [hijack_dst]        ; warm the landing lines
    mov r9, [legit_fn]
    mov r9, [hijacked_target]
    clflush [cond_val]          ; speculation trigger
    lfence
    mov r1, [cond_val]
    cmp r1, 0
    jne done
    mov r0, [hijacked_target]   ; speculative overwrite (attacker controlled)
    mov [target], r0
    call [target]               ; forward edge hijack
    halt
done:
    halt
section hijack @0x3000
hijack_dst:
    marker 99
    halt
section legit @0x4000
legit_fn:
    marker 7
    ret
data cond_val @0x7000 = qword 0
data target @0x8000 = qword legit_fn
data hijacked_target @0xa000 = qword legit_fn
data stack_area @0xf000 zero 4096
)";

const char* kSspEpilogue = R"(; stack canary check instrumentation
entry func
section text @0x1000
func:
    sub sp, 0x18
    mov r1, [global_canary]     ; store canary on the stack
    mov [sp + 0x10], r1
    mov r2, [work_input]        ; body
    add r2, 1
    mov [work_output], r2
    mov r1, [sp + 0x10]         ; check for corrupted canary, if yes fail
    cmp r1, [global_canary]
    je exit
    call __stack_chk_fail
exit:
    add sp, 0x18
    ret
__stack_chk_fail:
    panic
data global_canary @0x7028 = qword 0x59524e4143
data work_input @0x8000 = qword 41
data work_output @0x9000 = qword 0
data stack_area @0xf000 zero 4096
)";

const char* kFrGadget = R"(; flush+reload side channel send
entry send
section text @0x1000
send:
    mov r0, [secret]
    shl r0, 8
    add r0, probe_area
    mov r0, [r0]                ; the load caches one probe element
    halt
data secret @0x7000 = qword 0x41
data probe_area @0x10000 zero 65536
)";

const char* kRopChain = R"(; 5-gadget flush+reload chain: pop base, pop source,
; load secret, scale and add, dereference
section gadget_lib @0x5000
lib_touch:
    ret
g_pop_base:
    marker 99
    pop r2
    ret
g_pop_src:
    pop r6
    ret
g_load_secret:
    mov r0, [r6]
    ret
g_shift_add:
    shl r0, 8
    add r0, r2
    ret
g_deref:
    mov r1, [r0]
    ret
g_empty:
    ret
g_pop_other:
    pop r3
    ret
g_wrong_load:
    mov r4, [r3]
    ret
g_pivot:
    push r0
    pop sp
    ret
)";

const char* kMaskRet = R"(; return address masking: the saved return slot is
; zeroed when the canary is corrupt
section mask @0x1000
mask_ret_seq:
    mov r12, [global_canary]
    mov r13, [sp + 0x10]
    xor r14, r14
    cmp r12, r13
    setne r14
    add r14, 0xffffffffffffffff
    and [sp + 0x18], r14
    ret
data global_canary @0x7028 = qword 0x59524e4143
data stack_area @0xf000 zero 4096
)";

const char* kGoMask = R"(; bounds-check index masking: out-of-bounds indexes
; collapse to element 0
entry check
section text @0x1000
check:
    mov r0, [input_index]
    mov r3, [arr_len]
    cmp r0, r3
    jae raise_panic
    mov r13, r0
    sub r13, r3
    sbb r14, r14
    and r14, r0
    mov r5, r14
    shl r5, 4
    mov r6, [arr + r5*1]
    mov [out_result], r6
    halt
raise_panic:
    panic
data input_index @0x6000 = qword 2
data arr_len @0x6100 = qword 8
data arr @0x10000 = qword 10, 0, 11, 0, 12, 0, 13, 0, 14, 0, 15, 0, 16, 0, 17, 0
data out_result @0x7000 = qword 0
data stack_area @0xf000 zero 4096
)";

// End-to-end SSP victim: a length-unchecked copy into a canary-protected
// frame, a gadget library page the victim touches during startup, a shared
// probe area and the secret. The canary page is declared first so a fresh
// exec touches (and so allocates) it first.
const char* kVictimSsp = R"(; canary-protected victim with an unchecked copy
entry main
data global_canary @0x7028 = qword 0x6361666502951413
section main @0x1000
main:
    call lib_touch
    mov r9, [secret_data]       ; the victim handled its secret recently
    call handle_trns
    halt
halt_stub:
    halt
handle_trns:
    sub sp, 0x208
    mov r1, [global_canary]     ; prologue: place the canary
    mov [sp + 0x200], r1
    mov r3, [input_qwords]      ; body: unchecked copy into the frame
    mov r2, 0
copy_loop:
    cmp r2, r3
    jae copy_done
    mov r4, [input_buf + r2*8]
    mov [sp + r2*8], r4
    add r2, 1
    jmp copy_loop
copy_done:
    mov r5, [sp]
    mov [out_result], r5
    mov r1, [sp + 0x200]        ; epilogue: canary check
    cmp r1, [global_canary]
    je epilogue_ok
    call __stack_chk_fail
epilogue_ok:
    add sp, 0x208
    ret
__stack_chk_fail:
    panic
section gadget_lib @0x5000
lib_touch:
    ret
g_pop_base:
    marker 99
    pop r2
    ret
g_pop_src:
    pop r6
    ret
g_load_secret:
    mov r0, [r6]
    ret
g_shift_add:
    shl r0, 8
    add r0, r2
    ret
g_deref:
    mov r1, [r0]
    ret
g_empty:
    ret
g_pop_other:
    pop r3
    ret
g_wrong_load:
    mov r4, [r3]
    ret
g_pivot:
    push r0
    pop sp
    ret
data secret_data @0x8040 = qword 0x41
data input_qwords @0x9000 = qword 8
data input_buf @0xa000 zero 1024
data out_result @0xb000 = qword 0
data probe_area @0x200000 zero 65536
data stack_area @0xf000 zero 4096
)";

const char* kVictimGoLoad = R"(; interface call through an attacker-indexed
; slice: array[index].function()
entry main
section main @0x1000
main:
    mov r9, [hijack_dst]        ; warm landing and planted structures
    mov r9, [good_method]
    mov r9, [fake_iface]
    mov r9, [fake_itab + 0x18]
    mov r0, [input_index]
    clflush [go_slice + 8]      ; array length evicted
    lfence
    mov r2, [go_slice]          ; array base
    mov r3, [go_slice + 8]      ; array length
    cmp r0, r3
    jae bounds_panic
    mov r5, r0
    shl r5, 4                   ; index * sizeof(iface)
    mov r6, [r2 + r5*1]         ; iface.tab
    mov r7, [r6 + 0x18]         ; itab.fun[0]
    call r7
    mov [out_result], r0
    halt
bounds_panic:
    panic
section methods @0x20000
good_method:
    marker 7
    mov r0, 1234
    ret
section hijack @0x563000
hijack_dst:
    marker 99
    halt
data go_slice @0x6038 = qword iface_array, 8, 8
data iface_array @0x10000 = qword good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0
data good_itab @0x11000 ro = qword 0, 0, 0, good_method
data fake_iface @0x561000 = qword fake_itab
data fake_itab @0x562000 = qword 0, 0, 0, hijack_dst
data input_index @0x14000 = qword 2
data out_result @0x15000 = qword 0
data stack_area @0xf000 zero 4096
)";

// Same victim with the slice header line-aligned so base and length share a
// cache line; flushing the length then also flushes the base.
const char* kVictimGoLoadSameLine = R"(; go_load variant: base and length on
; one cache line
entry main
section main @0x1000
main:
    mov r9, [hijack_dst]
    mov r9, [good_method]
    mov r9, [fake_iface]
    mov r9, [fake_itab + 0x18]
    mov r0, [input_index]
    clflush [go_slice + 8]
    lfence
    mov r2, [go_slice]
    mov r3, [go_slice + 8]
    cmp r0, r3
    jae bounds_panic
    mov r5, r0
    shl r5, 4
    mov r6, [r2 + r5*1]
    mov r7, [r6 + 0x18]
    call r7
    mov [out_result], r0
    halt
bounds_panic:
    panic
section methods @0x20000
good_method:
    marker 7
    mov r0, 1234
    ret
section hijack @0x563000
hijack_dst:
    marker 99
    halt
data go_slice @0x6000 = qword iface_array, 8, 8
data iface_array @0x10000 = qword good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0, good_itab, 0
data good_itab @0x11000 ro = qword 0, 0, 0, good_method
data fake_iface @0x561000 = qword fake_itab
data fake_itab @0x562000 = qword 0, 0, 0, hijack_dst
data input_index @0x14000 = qword 2
data out_result @0x15000 = qword 0
data stack_area @0xf000 zero 4096
)";

const char* kVictimGoStore = R"(; out-of-bounds store followed by an interface
; call: array[index] = value; interface.function()
entry main
section main @0x1000
main:
    mov r9, [hijack_dst]        ; warm the landing line
    mov r9, [good_method]
    mov r0, [input_index]
    mov r1, [input_value]
    clflush [arr_len]           ; array length evicted
    lfence
    mov r2, [arr_base]
    mov r3, [arr_len]
    cmp r0, r3
    jae bounds_panic
    mov [r2 + r0*8], r1         ; the store
    ; PAD
    mov r4, [iface2]            ; unrelated interface call follows
    mov r5, [r4 + 0x18]         ; itab.fun[0]
    call r5
    mov [out_result], r0
    halt
bounds_panic:
    panic
section methods @0x20000
good_method:
    marker 7
    mov r0, 77
    ret
section hijack @0x563000
hijack_dst:
    marker 99
    halt
data arr_base @0x6038 = qword go_array
data arr_len @0x6040 = qword 8
data go_array @0x10000 zero 64
data iface2 @0x12000 = qword itab2
data itab2 @0x13000 ro = qword 0, 0, 0, good_method
data input_index @0x14000 = qword 2
data input_value @0x14100 = qword 5
data out_result @0x15000 = qword 0
data stack_area @0xf000 zero 4096
)";

const char* kVictimVtv = R"(; vtable pointer verified against a registry
; before the virtual call
entry main
section main @0x1000
main:
    mov r9, [evil_method]       ; warm both class methods
    mov r9, [good_method]
    mov r9, [vtable_evil]
    mov r1, [obj_vptr]
    clflush [registered_vptr]   ; verifier reference variable evicted
    lfence
    cmp r1, [registered_vptr]   ; vtable verification
    jne vtv_fail
    mov r2, [r1]                ; method from the verified vtable
    call r2
    mov [out_result], r0
    halt
vtv_fail:
    panic
section methods @0x20000
good_method:
    marker 7
    mov r0, 42
    ret
evil_method:
    marker 99
    halt
data obj_vptr @0x6000 = qword vtable_good
data registered_vptr @0x7000 = qword vtable_good
data vtable_good @0x8000 ro = qword good_method
data vtable_evil @0x9000 ro = qword evil_method
data out_result @0x15000 = qword 0
data stack_area @0xf000 zero 4096
)";

const char* kVictimCfi = R"(; jump-table range check against immediates; every
; operand is ready when the check executes
entry main
section main @0x1000
main:
    mov r9, [hijack_dst]        ; warm the would-be landing line
    mov r9, [jt0]
    mov r0, [fnptr]
    mov r1, r0
    sub r1, jt0                 ; distance into the jump table
    cmp r1, 0x40                ; range check, immediate bound
    jae cfi_fail
    call r0
    mov [out_result], r0
    halt
cfi_fail:
    panic
section jump_table @0x8000
jt0:
    marker 7
    mov r0, 7
    ret
section hijack @0x30000
hijack_dst:
    marker 99
    halt
data fnptr @0x6000 = qword jt0
data range_limit @0x7000 = qword 0x40
data out_result @0x15000 = qword 0
data stack_area @0xf000 zero 4096
)";

const char* kBenchBounds = R"(; bounds-check-heavy loop over a 64 KiB array
entry main
section main @0x1000
main:
    mov r0, 0
    mov r7, 0
    mov r3, [arr_len]
loop:
    cmp r0, r3
    jae done
    mov r5, r0
    shl r5, 6
    mov r6, [arr + r5*1]
    add r7, r6
    add r0, 1
    jmp loop
done:
    mov [out_result], r7
    halt
data arr_len @0x6000 = qword 1024
data arr @0x10000 zero 65536
data out_result @0x7000 = qword 0
data stack_area @0xf000 zero 4096
)";

const char* kBenchCanary = R"(; call loop over a canary-protected leaf
entry main
section main @0x1000
main:
    mov r0, 0
    mov r7, 0
    mov r3, 256
loop:
    cmp r0, r3
    jae done
    call leaf
    add r0, 1
    jmp loop
done:
    mov [out_result], r7
    halt
leaf:
    sub sp, 0x18
    mov r1, [global_canary]
    mov [sp + 0x10], r1
    mov r4, [data_a]
    mov r5, [data_b]
    add r7, r4
    add r7, r5
    mov r1, [sp + 0x10]
    cmp r1, [global_canary]
    je leaf_ok
    call __stack_chk_fail
leaf_ok:
    add sp, 0x18
    ret
__stack_chk_fail:
    panic
data global_canary @0x7028 = qword 0x1122334455667788
data data_a @0x8000 = qword 5
data data_b @0x8040 = qword 7
data out_result @0x9000 = qword 0
data stack_area @0xf000 zero 4096
)";

const char* kBenchEmpty = R"(; anchor-free loop
entry main
section main @0x1000
main:
    mov r0, 0
loop:
    add r0, 1
    cmp r0, 256
    jne loop
    mov [out_result], r0
    halt
data out_result @0x7000 = qword 0
data stack_area @0xf000 zero 4096
)";

const std::map<std::string, const char*>& table() {
  static const std::map<std::string, const char*> t = {
      {"arch_bwd", kArchBwd},
      {"arch_fwd", kArchFwd},
      {"spec_bwd", kSpecBwd},
      {"spec_fwd", kSpecFwd},
      {"ssp_epilogue", kSspEpilogue},
      {"fr_gadget", kFrGadget},
      {"rop_chain", kRopChain},
      {"mask_ret", kMaskRet},
      {"go_mask", kGoMask},
      {"victim_ssp", kVictimSsp},
      {"victim_go_load", kVictimGoLoad},
      {"victim_go_load_sameline", kVictimGoLoadSameLine},
      {"victim_go_store", kVictimGoStore},
      {"victim_vtv", kVictimVtv},
      {"victim_cfi", kVictimCfi},
      {"bench_bounds", kBenchBounds},
      {"bench_canary", kBenchCanary},
      {"bench_empty", kBenchEmpty},
  };
  return t;
}

}  // namespace

std::string fixture_text(const std::string& name) {
  auto it = table().find(name);
  if (it == table().end())
    fail(SimError::Kind::UnknownListing, "unknown fixture: " + name);
  return it->second;
}

std::vector<std::string> fixture_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : table()) {
    (void)v;
    out.push_back(k);
  }
  return out;
}

}  // namespace specsim
