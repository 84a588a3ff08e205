#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specsim/isa.hpp"
#include "specsim/program.hpp"

namespace specsim {

// Parsed-but-unresolved form of a DSL module. Mitigation passes rewrite this
// representation (labels still symbolic), then re-resolve.
struct AsmItem {
  bool is_label = false;
  std::string label;
  Instruction instr;  // operands may carry unresolved label names
};

struct AsmSection {
  std::string name;
  std::optional<uint64_t> addr;
  uint64_t pages = 1;
  std::vector<AsmItem> items;
};

struct AsmData {
  std::string label;
  std::optional<uint64_t> addr;
  bool writable = true;
  enum class Form : uint8_t { Bytes, Qwords, Zero } form = Form::Bytes;
  std::vector<uint8_t> bytes;
  struct QItem {
    bool is_label = false;
    uint64_t value = 0;
    std::string label;
  };
  std::vector<QItem> qwords;
  uint64_t zero_count = 0;
};

struct AsmUnit {
  std::string entry;
  struct Top {
    bool is_data = false;
    AsmSection sec;
    AsmData data;
  };
  std::vector<Top> tops;

  AsmSection* find_section(const std::string& name);
};

AsmUnit parse_dsl(const std::string& source);
Program resolve(const AsmUnit& unit);
std::string emit_dsl(const AsmUnit& unit);

}  // namespace specsim
