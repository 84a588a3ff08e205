#pragma once

#include <string>
#include <vector>

namespace specsim {

// Bundled DSL programs and experiment manifests. Each entry mirrors a file
// under fixtures/ byte-for-byte (enforced by a test), so scenarios run the
// same text whether loaded from the repo or from the binary.
std::string fixture_text(const std::string& name);
std::vector<std::string> fixture_names();

}  // namespace specsim
