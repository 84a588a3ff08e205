#include "specsim/program.hpp"

#include <algorithm>
#include <set>

namespace specsim {

void Program::index() {
  by_addr.clear();
  for (const auto& s : sections)
    for (const auto& in : s.instrs) by_addr[in.addr] = &in;
}

std::vector<uint64_t> Program::image_pages() const {
  std::set<uint64_t> pages;
  for (const auto& s : sections)
    for (uint64_t pg = page_of(s.base); pg < page_of(s.base) + s.pages; ++pg)
      pages.insert(pg);
  for (const auto& d : data) {
    uint64_t end = d.base + (d.bytes.empty() ? 1 : d.bytes.size()) - 1;
    for (uint64_t pg = page_of(d.base); pg <= page_of(end); ++pg) pages.insert(pg);
  }
  return {pages.begin(), pages.end()};
}

std::vector<uint64_t> Program::code_pages() const {
  std::set<uint64_t> pages;
  for (const auto& s : sections)
    for (uint64_t pg = page_of(s.base); pg < page_of(s.base) + s.pages; ++pg)
      pages.insert(pg);
  return {pages.begin(), pages.end()};
}

bool Program::page_writable(uint64_t page) const {
  for (const auto& d : data) {
    uint64_t end = d.base + (d.bytes.empty() ? 1 : d.bytes.size()) - 1;
    if (page >= page_of(d.base) && page <= page_of(end)) return d.writable;
  }
  return true;  // code pages and anonymous pages; stores to code are not modeled
}

}  // namespace specsim
