#pragma once

#include <string>
#include <vector>

namespace specsim {

// Fixed catalog of bundled DSL translations of the classic attack snippets.
// The returned text is byte-for-byte identical to the matching file under
// fixtures/ (a unit test enforces it).
//
//   arch_bwd      architectural overwrite of a saved return address
//   arch_fwd      architectural overwrite of an indirect-call target
//   spec_bwd      speculative overwrite of the return slot (store->ret)
//   spec_fwd      speculative overwrite of a call target (store->call)
//   ssp_epilogue  canary check prologue/epilogue incl. __stack_chk_fail stub
//   fr_gadget     straight-line flush+reload send gadget
//   rop_chain     5-gadget flush+reload chain and its stack image
//   mask_ret      return-address masking sequence
//   go_mask       bounds-check index masking sequence
std::string encode_listing(const std::string& name);

std::vector<std::string> listing_names();

}  // namespace specsim
