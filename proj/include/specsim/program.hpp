#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specsim/isa.hpp"

namespace specsim {

constexpr uint64_t kPageSize = 4096;
constexpr uint64_t kLineSize = 64;

inline uint64_t page_of(uint64_t addr) { return addr / kPageSize; }
inline uint64_t line_of(uint64_t addr) { return addr / kLineSize; }

struct CodeSection {
  std::string name;
  uint64_t base = 0;
  uint64_t pages = 1;  // declared page span
  std::vector<Instruction> instrs;

  uint64_t end() const {
    uint64_t e = base;
    for (const auto& i : instrs) e = i.addr + i.size();
    return e;
  }
};

struct DataSection {
  std::string label;
  uint64_t base = 0;
  bool writable = true;
  std::vector<uint8_t> bytes;
};

// An assembled program: code and data placed at fixed virtual addresses.
struct Program {
  std::vector<CodeSection> sections;
  std::vector<DataSection> data;
  std::map<std::string, uint64_t> labels;  // label -> virtual address
  std::string entry_label;
  uint64_t entry = 0;
  std::string source;  // canonical DSL emission, reparses to this program

  // image pages in declaration order: the deterministic first-touch order
  // used when a fresh process maps this image
  std::vector<uint64_t> decl_pages;

  // addr -> instruction, built once after assembly
  std::map<uint64_t, const Instruction*> by_addr;

  void index();
  const Instruction* at(uint64_t addr) const {
    auto it = by_addr.find(addr);
    return it == by_addr.end() ? nullptr : it->second;
  }
  bool has_label(const std::string& l) const { return labels.count(l) != 0; }
  uint64_t label(const std::string& l) const { return labels.at(l); }

  // Every virtual page the image occupies (code and data), ascending.
  std::vector<uint64_t> image_pages() const;
  // Pages occupied by code sections only.
  std::vector<uint64_t> code_pages() const;
  bool page_writable(uint64_t page) const;
};

}  // namespace specsim
