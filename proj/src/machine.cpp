#include "specsim/machine.hpp"

#include <sstream>

namespace specsim {

std::string SparseMemory::hex(uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

MachineState initial_state(const Program& p) {
  MachineState st;
  for (uint64_t pg : p.image_pages()) st.mem.map_zero(pg);
  for (const auto& d : p.data)
    for (size_t i = 0; i < d.bytes.size(); ++i) st.mem.write8(d.base + i, d.bytes[i]);
  st.pc = p.entry;
  return st;
}

void give_stack(MachineState& st, uint64_t top, uint64_t pages) {
  for (uint64_t pg = page_of(top) - pages; pg < page_of(top); ++pg) st.mem.map_zero(pg);
  st.sp() = top - 16;
}

}  // namespace specsim
