#include "specsim/memhier.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "specsim/error.hpp"
#include "specsim/machine.hpp"

namespace specsim {

uint32_t FrameFreelist::pop() {
  if (stack_.empty()) fail(SimError::Kind::OutOfFrames, "frame freelist empty");
  uint32_t f = stack_.back();
  stack_.pop_back();
  return f;
}

std::optional<uint32_t> FrameFreelist::take_contiguous(uint32_t count) {
  std::set<uint32_t> free(stack_.begin(), stack_.end());
  for (auto it = free.begin(); it != free.end(); ++it) {
    uint32_t base = *it;
    if (base % count != 0) continue;  // aligned run, hugepage style
    bool ok = true;
    for (uint32_t i = 1; i < count; ++i)
      if (!free.count(base + i)) {
        ok = false;
        break;
      }
    if (!ok) continue;
    std::erase_if(stack_, [&](uint32_t f) { return f >= base && f < base + count; });
    return base;
  }
  return std::nullopt;
}

CacheLevel::CacheLevel(uint32_t total_kib, uint32_t ways, uint32_t slices, bool plru)
    : ways_(ways), slices_(slices), plru_(plru) {
  uint64_t lines = uint64_t(total_kib) * 1024 / kLineSize;
  sets_ = uint32_t(lines / ways);
  if (sets_ == 0 || (sets_ & (sets_ - 1)) != 0)
    fail(SimError::Kind::BadConfig, "cache sets must be a nonzero power of two");
  if (slices_ == 0 || sets_ % slices_ != 0)
    fail(SimError::Kind::BadConfig, "slice count must divide the set count");
  lines_.assign(size_t(sets_) * ways_, Line{});
  plru_bits_.assign(sets_, 0);
}

uint32_t CacheLevel::slice_hash(uint64_t paddr, uint32_t slices) {
  if (slices <= 1) return 0;
  // XOR-fold of physical address bit pairs 6,8,...,20 onto 2 bits.
  uint64_t h = (paddr >> 6) ^ (paddr >> 8) ^ (paddr >> 10) ^ (paddr >> 12) ^
               (paddr >> 14) ^ (paddr >> 16) ^ (paddr >> 18) ^ (paddr >> 20);
  return uint32_t(h) & (slices - 1);
}

uint32_t CacheLevel::set_index(uint64_t paddr_line) const {
  uint32_t sets_per_slice = sets_ / slices_;
  uint32_t slice = slice_hash(paddr_line * kLineSize, slices_);
  return slice * sets_per_slice + uint32_t(paddr_line & (sets_per_slice - 1));
}

bool CacheLevel::contains(uint64_t paddr_line) const {
  uint32_t set = set_index(paddr_line);
  for (uint32_t w = 0; w < ways_; ++w) {
    const Line& l = lines_[size_t(set) * ways_ + w];
    if (l.valid && l.tag == paddr_line) return true;
  }
  return false;
}

void CacheLevel::note_use(uint32_t set, uint32_t way) {
  lines_[size_t(set) * ways_ + way].stamp = ++tick_;
  if (!plru_) return;
  // tree PLRU: each visited node's bit points at the half NOT used
  uint32_t& bits = plru_bits_[set];
  uint32_t node = 1, span = ways_, w = way;
  while (span > 1) {
    uint32_t half = span / 2;
    bool right = w >= half;
    if (right) bits &= ~(1u << node);
    else bits |= (1u << node);
    node = node * 2 + (right ? 1 : 0);
    if (right) w -= half;
    span = half;
  }
}

uint32_t CacheLevel::victim_way(uint32_t set) const {
  for (uint32_t w = 0; w < ways_; ++w)
    if (!lines_[size_t(set) * ways_ + w].valid) return w;
  if (plru_) {
    uint32_t bits = plru_bits_[set];
    uint32_t node = 1, span = ways_, lo = 0;
    while (span > 1) {
      uint32_t half = span / 2;
      bool right = (bits >> node) & 1;  // set bit = right half is colder
      if (right) lo += half;
      node = node * 2 + (right ? 1 : 0);
      span = half;
    }
    return lo;
  }
  uint32_t victim = 0;
  uint64_t oldest = UINT64_MAX;
  for (uint32_t w = 0; w < ways_; ++w) {
    const Line& l = lines_[size_t(set) * ways_ + w];
    if (l.stamp < oldest) {
      oldest = l.stamp;
      victim = w;
    }
  }
  return victim;
}

bool CacheLevel::touch(uint64_t paddr_line) {
  uint32_t set = set_index(paddr_line);
  for (uint32_t w = 0; w < ways_; ++w) {
    Line& l = lines_[size_t(set) * ways_ + w];
    if (l.valid && l.tag == paddr_line) {
      note_use(set, w);
      return true;
    }
  }
  return false;
}

std::optional<uint64_t> CacheLevel::fill(uint64_t paddr_line) {
  uint32_t set = set_index(paddr_line);
  for (uint32_t w = 0; w < ways_; ++w) {
    Line& l = lines_[size_t(set) * ways_ + w];
    if (l.valid && l.tag == paddr_line) {
      note_use(set, w);
      return std::nullopt;
    }
  }
  uint32_t w = victim_way(set);
  Line& l = lines_[size_t(set) * ways_ + w];
  std::optional<uint64_t> evicted;
  if (l.valid) evicted = l.tag;
  l.valid = true;
  l.tag = paddr_line;
  note_use(set, w);
  return evicted;
}

void CacheLevel::invalidate(uint64_t paddr_line) {
  uint32_t set = set_index(paddr_line);
  for (uint32_t w = 0; w < ways_; ++w) {
    Line& l = lines_[size_t(set) * ways_ + w];
    if (l.valid && l.tag == paddr_line) l.valid = false;
  }
}

void CacheLevel::clear() {
  for (auto& l : lines_) l.valid = false;
}

std::vector<uint64_t> CacheLevel::resident_lines() const {
  std::vector<uint64_t> out;
  for (const auto& l : lines_)
    if (l.valid) out.push_back(l.tag);
  return out;
}

std::string CacheLevel::dump_sets() const {
  std::ostringstream os;
  for (uint32_t s = 0; s < sets_; ++s) {
    uint32_t used = 0;
    for (uint32_t w = 0; w < ways_; ++w)
      if (lines_[size_t(s) * ways_ + w].valid) ++used;
    if (!used) continue;
    os << "set " << s << ":";
    for (uint32_t w = 0; w < ways_; ++w) {
      const Line& l = lines_[size_t(s) * ways_ + w];
      if (l.valid) os << " 0x" << std::hex << l.tag * kLineSize << std::dec;
    }
    os << "\n";
  }
  return os.str();
}

MemoryHierarchy::MemoryHierarchy(const SimConfig& cfg, uint64_t seed)
    : cfg_(cfg),
      rng_(seed),
      l1_(cfg.l1_kib, cfg.l1_ways, 1, cfg.plru),
      l2_(cfg.l2_kib, cfg.l2_ways, 1, cfg.plru),
      llc_(cfg.llc_kib, cfg.llc_ways, cfg.llc_slices, cfg.plru) {
  frame_refs_.assign(cfg.frames, 0);
  // frames pushed descending so the first pop returns frame 0
  for (uint32_t f = cfg.frames; f-- > 0;) freelist_.push(f);
}

int MemoryHierarchy::create_process() {
  procs_.emplace_back();
  procs_.back().alive = true;
  return int(procs_.size()) - 1;
}

uint32_t MemoryHierarchy::pop_frame() { return freelist_.pop(); }

void MemoryHierarchy::map_frame(int pid, uint64_t vpage, uint32_t frame) {
  Process& pr = procs_.at(pid);
  auto it = pr.pages.find(vpage);
  if (it != pr.pages.end()) {
    // remap: drop the old frame
    if (--frame_refs_[it->second] == 0) freelist_.push(it->second);
  }
  pr.pages[vpage] = frame;
  ++frame_refs_[frame];
}

void MemoryHierarchy::map_image(int pid, const Program& p) {
  for (uint64_t vpage : p.decl_pages) map_frame(pid, vpage, pop_frame());
}

void MemoryHierarchy::map_anon_page(int pid, uint64_t vpage) {
  map_frame(pid, vpage, pop_frame());
}

uint64_t MemoryHierarchy::map_pages(int pid, uint64_t count, PageKind kind) {
  Process& pr = procs_.at(pid);
  if (kind == PageKind::Huge) {
    if (count % 512 != 0)
      fail(SimError::Kind::BadInput, "huge mappings are multiples of 512 pages");
    uint64_t vbase = pr.anon_next;
    for (uint64_t h = 0; h < count / 512; ++h) {
      auto base = freelist_.take_contiguous(512);
      if (!base)
        fail(SimError::Kind::NoContiguity, "no contiguous 2 MiB frame run available");
      for (uint32_t i = 0; i < 512; ++i)
        map_frame(pid, page_of(pr.anon_next) + h * 512 + i, *base + i);
    }
    pr.anon_next += count * kPageSize;
    return vbase;
  }
  if (freelist_.size() < count) fail(SimError::Kind::OutOfFrames, "out of frames");
  uint64_t vbase = pr.anon_next;
  for (uint64_t i = 0; i < count; ++i) map_frame(pid, page_of(vbase) + i, pop_frame());
  pr.anon_next += count * kPageSize;
  return vbase;
}

std::pair<uint64_t, uint64_t> MemoryHierarchy::map_shared(int pid_a, int pid_b,
                                                          uint64_t count) {
  if (freelist_.size() < count) fail(SimError::Kind::OutOfFrames, "out of frames");
  Process& pa = procs_.at(pid_a);
  Process& pb = procs_.at(pid_b);
  uint64_t va = pa.anon_next, vb = pb.anon_next;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t f = pop_frame();
    map_frame(pid_a, page_of(va) + i, f);
    map_frame(pid_b, page_of(vb) + i, f);
  }
  pa.anon_next += count * kPageSize;
  pb.anon_next += count * kPageSize;
  return {va, vb};
}

void MemoryHierarchy::share_into(int from, uint64_t vbase, uint64_t count, int to,
                                 uint64_t to_vbase) {
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t f = frame_of(from, page_of(vbase) + i);
    map_frame(to, page_of(to_vbase) + i, f);
  }
}

void MemoryHierarchy::destroy_process(int pid) {
  Process& pr = procs_.at(pid);
  if (!pr.alive) return;
  // ascending virtual address: deterministic teardown order
  for (auto& [vpage, frame] : pr.pages)
    if (--frame_refs_[frame] == 0) freelist_.push(frame);
  pr.pages.clear();
  pr.alive = false;
}

bool MemoryHierarchy::is_mapped(int pid, uint64_t vaddr) const {
  const Process& pr = procs_.at(pid);
  return pr.pages.count(page_of(vaddr)) != 0;
}

uint64_t MemoryHierarchy::translate(int pid, uint64_t vaddr) const {
  const Process& pr = procs_.at(pid);
  auto it = pr.pages.find(page_of(vaddr));
  if (it == pr.pages.end())
    fail(SimError::Kind::UnmappedAccess,
         "pid " + std::to_string(pid) + ": unmapped vaddr 0x" + SparseMemory::hex(vaddr));
  return uint64_t(it->second) * kPageSize + vaddr % kPageSize;
}

uint32_t MemoryHierarchy::frame_of(int pid, uint64_t vpage) const {
  const Process& pr = procs_.at(pid);
  auto it = pr.pages.find(vpage);
  if (it == pr.pages.end())
    fail(SimError::Kind::UnmappedAccess, "unmapped vpage in frame_of");
  return it->second;
}

uint32_t MemoryHierarchy::jitter(uint32_t lat) {
  if (cfg_.jitter_pct == 0) return lat;
  int64_t amp = int64_t(lat) * cfg_.jitter_pct / 100;
  if (amp == 0) return lat;
  return uint32_t(int64_t(lat) + rng_.range(-amp, amp));
}

void MemoryHierarchy::fill_all(uint64_t paddr_line) {
  if (auto llc_victim = llc_.fill(paddr_line)) {
    // inclusive LLC: back-invalidate inner levels
    l1_.invalidate(*llc_victim);
    l2_.invalidate(*llc_victim);
  }
  l2_.fill(paddr_line);
  l1_.fill(paddr_line);
}

AccessResult MemoryHierarchy::access_line(uint64_t paddr_line, uint64_t now) {
  if (l1_.touch(paddr_line)) return {cfg_.lat_l1, 1};
  AccessResult r;
  if (l2_.touch(paddr_line)) {
    r = {jitter(cfg_.lat_l2), 2};
  } else if (llc_.touch(paddr_line)) {
    r = {jitter(cfg_.lat_llc), 3};
  } else {
    r = {jitter(cfg_.lat_dram), 4};
  }
  // merge with an in-flight fill of the same line
  auto it = inflight_.find(paddr_line);
  if (it != inflight_.end() && it->second > now) {
    r.latency = uint32_t(it->second - now);
  } else {
    inflight_[paddr_line] = now + r.latency;
  }
  fill_all(paddr_line);
  return r;
}

AccessResult MemoryHierarchy::access(int pid, uint64_t vaddr, unsigned width,
                                     AccessKind kind, uint64_t now) {
  (void)kind;
  uint64_t p0 = translate(pid, vaddr);
  AccessResult r = access_line(line_of(p0), now);
  uint64_t last = vaddr + (width ? width - 1 : 0);
  if (line_of(last) != line_of(vaddr)) {
    uint64_t p1 = translate(pid, last);
    AccessResult r2 = access_line(line_of(p1), now);
    if (r2.latency > r.latency) r = r2;
  }
  return r;
}

void MemoryHierarchy::clflush(int pid, uint64_t vaddr) {
  flush_paddr_line(line_of(translate(pid, vaddr)));
}

void MemoryHierarchy::flush_paddr_line(uint64_t paddr_line) {
  l1_.invalidate(paddr_line);
  l2_.invalidate(paddr_line);
  llc_.invalidate(paddr_line);
  inflight_.erase(paddr_line);
}

bool MemoryHierarchy::l1_contains(int pid, uint64_t vaddr) const {
  return l1_.contains(line_of(translate(pid, vaddr)));
}

bool MemoryHierarchy::any_level_contains(int pid, uint64_t vaddr) const {
  uint64_t line = line_of(translate(pid, vaddr));
  return l1_.contains(line) || l2_.contains(line) || llc_.contains(line);
}

int MemoryHierarchy::exec_respawn(int old_pid, const Program& image,
                                  uint32_t layout_jitter_pct) {
  destroy_process(old_pid);
  int pid = create_process();
  // layout jitter: an unrelated allocation may grab the hot frame first
  if (layout_jitter_pct > 0 && rng_.chance_pct(layout_jitter_pct)) {
    uint32_t stolen = pop_frame();
    map_frame(pid, 0x7ff0000000ull / kPageSize, stolen);  // parked dummy page
  }
  map_image(pid, image);
  return pid;
}

bool MemoryHierarchy::check_inclusion() const {
  for (uint64_t line : l1_.resident_lines())
    if (!llc_.contains(line)) return false;
  for (uint64_t line : l2_.resident_lines())
    if (!llc_.contains(line)) return false;
  return true;
}

std::string MemoryHierarchy::dump_llc() const { return llc_.dump_sets(); }

}  // namespace specsim
