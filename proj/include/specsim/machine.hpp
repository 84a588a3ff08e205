#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <map>
#include <vector>

#include "specsim/error.hpp"
#include "specsim/program.hpp"

namespace specsim {

struct Flags {
  bool zf = false;
  bool cf = false;
  bool sf = false;
  bool operator==(const Flags&) const = default;
};

// Sparse byte-addressed memory image, page granular.
class SparseMemory {
 public:
  bool mapped(uint64_t addr) const { return pages_.count(page_of(addr)) != 0; }

  void map_zero(uint64_t page) { pages_.try_emplace(page); }

  uint8_t read8(uint64_t addr) const {
    auto it = pages_.find(page_of(addr));
    if (it == pages_.end())
      fail(SimError::Kind::UnmappedAccess, "unmapped read at 0x" + hex(addr));
    return it->second[addr % kPageSize];
  }
  void write8(uint64_t addr, uint8_t v) {
    auto it = pages_.find(page_of(addr));
    if (it == pages_.end())
      fail(SimError::Kind::UnmappedAccess, "unmapped write at 0x" + hex(addr));
    it->second[addr % kPageSize] = v;
  }

  uint64_t read(uint64_t addr, unsigned width) const {
    uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i) v |= uint64_t(read8(addr + i)) << (8 * i);
    return v;
  }
  void write(uint64_t addr, uint64_t v, unsigned width) {
    for (unsigned i = 0; i < width; ++i) write8(addr + i, uint8_t(v >> (8 * i)));
  }

  // Non-throwing probe used by speculative paths.
  bool readable(uint64_t addr, unsigned width) const {
    return mapped(addr) && mapped(addr + width - 1);
  }

  const std::map<uint64_t, std::array<uint8_t, kPageSize>>& pages() const { return pages_; }

  bool operator==(const SparseMemory&) const = default;

  static std::string hex(uint64_t v);

 private:
  std::map<uint64_t, std::array<uint8_t, kPageSize>> pages_;
};

enum class RunStatus : uint8_t { Running, Halted, Panicked };

struct MachineState {
  std::array<uint64_t, kNumRegs> regs{};
  Flags flags;
  uint64_t pc = 0;
  SparseMemory mem;
  RunStatus status = RunStatus::Running;

  uint64_t& sp() { return regs[kSpReg]; }
  uint64_t sp() const { return regs[kSpReg]; }

  bool operator==(const MachineState&) const = default;
};

// Loads the program image (data bytes, zero pages for code) and positions
// pc at the entry label. The stack is placed by the caller.
MachineState initial_state(const Program& p);

// Maps `pages` pages ending at `top` and sets sp = top - 16, 8-aligned.
void give_stack(MachineState& st, uint64_t top, uint64_t pages);

}  // namespace specsim
