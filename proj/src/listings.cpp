#include "specsim/listings.hpp"

#include <algorithm>

#include "specsim/error.hpp"
#include "specsim/fixtures.hpp"

namespace specsim {

static const char* kCatalog[] = {"arch_bwd", "arch_fwd", "spec_bwd",
                                 "spec_fwd", "ssp_epilogue", "fr_gadget",
                                 "rop_chain", "mask_ret", "go_mask"};

std::string encode_listing(const std::string& name) {
  for (const char* n : kCatalog)
    if (name == n) return fixture_text(name);
  fail(SimError::Kind::UnknownListing, "unknown listing id: " + name);
}

std::vector<std::string> listing_names() {
  return {std::begin(kCatalog), std::end(kCatalog)};
}

}  // namespace specsim
