#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "specsim/config.hpp"
#include "specsim/program.hpp"
#include "specsim/rng.hpp"

namespace specsim {

enum class PageKind : uint8_t { Normal, Huge, Shared };
enum class AccessKind : uint8_t { Load, Store, Fetch };

// LIFO stack of free physical frames. Pop order is the exact reverse of push
// order, which is what makes exec-style page reuse deterministic.
class FrameFreelist {
 public:
  void push(uint32_t frame) { stack_.push_back(frame); }
  uint32_t pop();
  size_t size() const { return stack_.size(); }
  // Removes and returns `count` physically contiguous frames aligned to
  // `count`; nullopt when no such run is free.
  std::optional<uint32_t> take_contiguous(uint32_t count);

 private:
  std::vector<uint32_t> stack_;
};

// One set-associative level; tag store only, no data. The LLC variant is
// sliced: the slice id is an XOR-fold of physical address bit pairs
// 6/8/.../20 onto 2 bits (documented in docs/config.md), and each slice has
// sets/slices sets.
class CacheLevel {
 public:
  CacheLevel() = default;
  CacheLevel(uint32_t total_kib, uint32_t ways, uint32_t slices, bool plru);

  bool contains(uint64_t paddr_line) const;
  // Touch on hit (LRU update); returns false on miss.
  bool touch(uint64_t paddr_line);
  // Insert a line; returns the evicted line if a valid one was displaced.
  std::optional<uint64_t> fill(uint64_t paddr_line);
  void invalidate(uint64_t paddr_line);
  void clear();

  uint32_t ways() const { return ways_; }
  uint32_t sets() const { return sets_; }
  uint32_t slices() const { return slices_; }
  uint32_t set_index(uint64_t paddr_line) const;
  static uint32_t slice_hash(uint64_t paddr, uint32_t slices);

  std::vector<uint64_t> resident_lines() const;
  std::string dump_sets() const;  // per-set occupancy listing

 private:
  struct Line {
    uint64_t tag = 0;
    uint64_t stamp = 0;
    bool valid = false;
  };
  uint32_t sets_ = 0;   // total across slices
  uint32_t ways_ = 0;
  uint32_t slices_ = 1;
  bool plru_ = false;
  uint64_t tick_ = 0;
  std::vector<Line> lines_;
  std::vector<uint32_t> plru_bits_;  // per-set tree bits when plru_ is set

  uint32_t victim_way(uint32_t set) const;
  void note_use(uint32_t set, uint32_t way);
};

struct AccessResult {
  uint32_t latency = 0;
  int level = 0;  // 1 = L1, 2 = L2, 3 = LLC, 4 = DRAM
};

// Per-process virtual memory plus the shared physical cache hierarchy.
// Holds tags and page tables only; data lives in each run's MachineState.
class MemoryHierarchy {
 public:
  MemoryHierarchy(const SimConfig& cfg, uint64_t seed);

  int create_process();
  void destroy_process(int pid);  // frames released ascending by vaddr

  // Maps the program image for `pid` page by page in declaration order
  // (the deterministic first-touch order of a fresh exec).
  void map_image(int pid, const Program& p);

  // Anonymous mapping at the process's next free virtual region.
  uint64_t map_pages(int pid, uint64_t count, PageKind kind);
  // Maps one fresh frame at a caller-chosen virtual page.
  void map_anon_page(int pid, uint64_t vpage);
  // Maps `count` fresh frames into both processes; returns {vbase_a, vbase_b}.
  std::pair<uint64_t, uint64_t> map_shared(int pid_a, int pid_b, uint64_t count);
  // Maps an existing range of `from` into `to` at to_vbase (shared frames).
  void share_into(int from, uint64_t vbase, uint64_t count, int to, uint64_t to_vbase);

  bool is_mapped(int pid, uint64_t vaddr) const;
  uint64_t translate(int pid, uint64_t vaddr) const;  // throws if unmapped
  uint32_t frame_of(int pid, uint64_t vpage) const;

  // Timed access; fills all levels on miss, strict inclusion maintained.
  // `now` is the caller's cycle on the shared timeline (in-flight fills are
  // merged, so two accesses to one line miss only once).
  AccessResult access(int pid, uint64_t vaddr, unsigned width, AccessKind kind, uint64_t now);

  void clflush(int pid, uint64_t vaddr);
  void flush_paddr_line(uint64_t paddr_line);
  bool l1_contains(int pid, uint64_t vaddr) const;
  bool any_level_contains(int pid, uint64_t vaddr) const;

  // Tears down `old_pid` (frames pushed ascending by vaddr) and spawns the
  // new image, optionally letting a layout-jitter allocation steal frames
  // first. Returns the new pid.
  int exec_respawn(int old_pid, const Program& image, uint32_t layout_jitter_pct);

  bool check_inclusion() const;  // L1 and L2 subset of LLC
  std::string dump_llc() const;

  size_t free_frames() const { return freelist_.size(); }
  const SimConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

 private:
  struct Process {
    bool alive = false;
    std::map<uint64_t, uint32_t> pages;  // vpage -> frame
    uint64_t anon_next = 0x4000000000ull;  // bump allocator for map_pages
  };

  SimConfig cfg_;
  Rng rng_;
  FrameFreelist freelist_;
  std::vector<uint32_t> frame_refs_;
  std::vector<Process> procs_;
  CacheLevel l1_, l2_, llc_;
  std::unordered_map<uint64_t, uint64_t> inflight_;  // paddr line -> fill completion cycle

  uint32_t pop_frame();
  void map_frame(int pid, uint64_t vpage, uint32_t frame);
  void fill_all(uint64_t paddr_line);
  uint32_t jitter(uint32_t lat);
  AccessResult access_line(uint64_t paddr_line, uint64_t now);
};

}  // namespace specsim
