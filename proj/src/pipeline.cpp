#include "specsim/pipeline.hpp"

#include <algorithm>
#include <cassert>
#include <set>
#include <sstream>

#include "specsim/assembler.hpp"
#include "specsim/error.hpp"

namespace specsim {

std::string Event::to_string() const {
  static const char* names[] = {"fetch", "issue", "complete", "retire", "squash",
                                "redirect", "stall"};
  std::ostringstream os;
  os << cycle << " " << names[int(kind)] << " seq=" << seq << " pc=0x" << std::hex << pc
     << std::dec << " " << opcode_name(op);
  return os.str();
}

namespace {

constexpr int64_t kNoProducer = -1;

struct Src {
  uint8_t reg = 0;
  int64_t producer = kNoProducer;
  uint64_t snapshot = 0;  // value when there is no in-flight producer
};

struct Entry {
  uint64_t seq = 0;
  const Instruction* in = nullptr;
  uint64_t pc = 0;
  uint64_t dispatch_cycle = 0;

  bool squashed = false;
  bool retired = false;
  bool issued = false;
  bool done = false;
  bool faulted = false;  // speculative fault; dependents never wake
  uint64_t complete_cycle = 0;

  // register reads
  Src srcs[3];
  int nsrc = 0;
  int sp_src = -1;      // index into srcs for the stack-pointer read
  int value_src = -1;   // index for the data value (store source / alu rhs)
  int64_t flag_producer = -2;  // -2 none needed, -1 snapshot
  Flags flag_snapshot;

  // writes
  bool writes_reg = false;
  uint8_t dst_reg = 0;
  uint64_t dst_value = 0;
  bool writes_sp = false;
  uint64_t sp_value = 0;
  bool writes_flags = false;
  Flags out_flags;

  // memory
  bool is_load = false;
  bool is_store = false;
  int mem_src0 = 0;        // index of the first address register in srcs
  uint64_t load_addr = 0;  // also the clflush target
  uint64_t store_addr = 0;
  bool store_addr_known = false;
  bool store_value_ready = false;
  uint64_t store_value = 0;
  int64_t wait_store = kNoProducer;  // partial overlap: wait until this seq retires

  // control
  int target_src = -1;  // register slot of an indirect call target
  bool is_ctrl = false;
  bool needs_resolve = false;
  bool resolved = false;
  PredSource pred_source = PredSource::None;
  uint64_t pred_target = 0;
  bool pred_taken = false;
  uint64_t actual_target = 0;
  bool actual_taken = false;

  bool is_lfence = false;
};

uint64_t fallthrough(const Instruction& in) { return in.addr + in.size(); }

}  // namespace

class PipelineImpl {
 public:
  PipelineImpl(const Program& p, MachineState init, MemoryHierarchy& hier, int pid,
               PredictorState& pred, const SimConfig& cfg, uint64_t fuel,
               uint64_t start_cycle, EventLog* log)
      : prog_(p),
        hier_(hier),
        pid_(pid),
        pred_(pred),
        cfg_(cfg),
        fuel_(fuel),
        log_(log),
        now_(start_cycle),
        start_(start_cycle) {
    if (fuel == 0) fail(SimError::Kind::BadInput, "fuel must be positive");
    if (!p.has_label(p.entry_label))
      fail(SimError::Kind::UnresolvedLabel, "entry label missing");
    retired_ = std::move(init);
    fetch_pc_ = retired_.pc;
    result_.state = retired_;  // placeholder until done
  }

  bool step_cycles(uint64_t n) {
    uint64_t limit = now_ + n;
    while (!done_ && now_ < limit) {
      cycle();
      ++now_;
      if (now_ - start_ > (fuel_ + 16) * (uint64_t(cfg_.lat_dram) + 64) + 1000000)
        fail(SimError::Kind::Internal, "pipeline made no progress");
    }
    return done_;
  }

  void skip_to(uint64_t t) {
    if (t > now_) now_ = t;
  }

  bool done() const { return done_; }
  uint64_t now() const { return now_; }

  SpecRunResult take_result() {
    result_.state = retired_;
    result_.cycles = now_ - start_;
    result_.retired = retired_count_;
    std::set<uint64_t> pages(result_.touched_pages.begin(), result_.touched_pages.end());
    result_.touched_pages.assign(pages.begin(), pages.end());
    return std::move(result_);
  }

 private:
  const Program& prog_;
  MemoryHierarchy& hier_;
  int pid_;
  PredictorState& pred_;
  SimConfig cfg_;
  uint64_t fuel_;
  EventLog* log_;

  uint64_t now_;
  uint64_t start_;
  bool done_ = false;

  MachineState retired_;  // authoritative architectural state
  SpecRunResult result_;
  uint64_t retired_count_ = 0;

  std::vector<Entry> rob_;
  size_t head_ = 0;      // oldest not-yet-retired entry
  uint32_t live_ = 0;    // unsquashed, unretired entries
  uint32_t unresolved_ = 0;

  uint64_t fetch_pc_ = 0;
  uint64_t fetch_stall_until_ = 0;
  bool fetch_parked_ = false;
  uint64_t last_ifetch_line_ = UINT64_MAX;

  // register renames: youngest entry writing the register / flags
  int64_t reg_rename_[kNumRegs] = {kNoProducer, kNoProducer, kNoProducer, kNoProducer,
                                   kNoProducer, kNoProducer, kNoProducer, kNoProducer,
                                   kNoProducer, kNoProducer, kNoProducer, kNoProducer,
                                   kNoProducer, kNoProducer, kNoProducer, kNoProducer};
  int64_t flag_rename_ = kNoProducer;

  void logev(Event::Kind k, const Entry& e) {
    if (log_) log_->push_back({now_, k, e.pc, e.seq, e.in->op});
  }

  // ---- value plumbing ----

  uint64_t src_value(const Entry& e, int i) const {
    const Src& s = e.srcs[i];
    if (s.producer == kNoProducer) return s.snapshot;
    const Entry& pe = rob_[size_t(s.producer)];
    return (s.reg == kSpReg && pe.writes_sp) ? pe.sp_value
           : (pe.writes_reg && pe.dst_reg == s.reg) ? pe.dst_value
           : (pe.writes_sp && s.reg == kSpReg)      ? pe.sp_value
                                                    : pe.dst_value;
  }

  bool src_ready(const Entry& e, int i) const {
    const Src& s = e.srcs[i];
    if (s.producer == kNoProducer) return true;
    const Entry& pe = rob_[size_t(s.producer)];
    return pe.done && !pe.faulted;
  }

  bool src_faulted(const Entry& e, int i) const {
    const Src& s = e.srcs[i];
    if (s.producer == kNoProducer) return false;
    const Entry& pe = rob_[size_t(s.producer)];
    return pe.done && pe.faulted;
  }

  Flags flag_value(const Entry& e) const {
    if (e.flag_producer == kNoProducer) return e.flag_snapshot;
    return rob_[size_t(e.flag_producer)].out_flags;
  }

  bool flags_ready(const Entry& e) const {
    if (e.flag_producer < 0) return true;
    const Entry& pe = rob_[size_t(e.flag_producer)];
    return pe.done && !pe.faulted;
  }

  int64_t youngest_reg_writer(uint8_t reg, uint64_t before_seq) const {
    for (int64_t s = int64_t(before_seq) - 1; s >= 0; --s) {
      const Entry& e = rob_[size_t(s)];
      if (e.squashed) continue;
      if ((e.writes_reg && e.dst_reg == reg) || (e.writes_sp && reg == kSpReg)) return s;
    }
    return kNoProducer;
  }

  int64_t youngest_flag_writer(uint64_t before_seq) const {
    for (int64_t s = int64_t(before_seq) - 1; s >= 0; --s) {
      const Entry& e = rob_[size_t(s)];
      if (!e.squashed && e.writes_flags) return s;
    }
    return kNoProducer;
  }

  void add_src(Entry& e, uint8_t reg) {
    Src s;
    s.reg = reg;
    s.producer = reg_rename_[reg];
    if (s.producer == kNoProducer) s.snapshot = retired_.regs[reg];
    e.srcs[e.nsrc++] = s;
  }

  void add_mem_srcs(Entry& e, const MemRef& m) {
    e.mem_src0 = e.nsrc;
    if (m.base) add_src(e, *m.base);
    if (m.index) add_src(e, *m.index);
  }

  uint64_t mem_addr_from_srcs(const Entry& e, const MemRef& m) const {
    uint64_t a = uint64_t(m.disp);
    int i = e.mem_src0;
    if (m.base) a += src_value(e, i++);
    if (m.index) a += src_value(e, i) * m.scale;
    return a;
  }

  // ---- dispatch ----

  bool sp_known_now(uint64_t* sp_out) const {
    int64_t p = reg_rename_[kSpReg];
    if (p == kNoProducer) {
      *sp_out = retired_.regs[kSpReg];
      return true;
    }
    const Entry& pe = rob_[size_t(p)];
    if (pe.done && !pe.faulted) {
      *sp_out = pe.writes_sp ? pe.sp_value : pe.dst_value;
      return true;
    }
    return false;
  }

  bool reg_known_now(uint8_t r, uint64_t* out) const {
    int64_t p = reg_rename_[r];
    if (p == kNoProducer) {
      *out = retired_.regs[r];
      return true;
    }
    const Entry& pe = rob_[size_t(p)];
    if (pe.done && !pe.faulted) {
      *out = (r == kSpReg && pe.writes_sp) ? pe.sp_value : pe.dst_value;
      return true;
    }
    return false;
  }

  // Store-buffer probe used at dispatch: youngest older store fully covering
  // [addr, addr+8) with its value already computed.
  enum class SbProbe { None, Hit, Pending };
  SbProbe sb_probe(uint64_t addr, uint64_t before_seq, uint64_t* value) const {
    for (int64_t s = int64_t(before_seq) - 1; s >= int64_t(head_); --s) {
      const Entry& e = rob_[size_t(s)];
      if (e.squashed || !e.is_store || e.retired) continue;
      if (!e.store_addr_known) return SbProbe::Pending;  // cannot rule out aliasing
      if (e.store_addr == addr) {
        if (e.store_value_ready && e.done) {
          *value = e.store_value;
          return SbProbe::Hit;
        }
        return SbProbe::Pending;
      }
      bool overlap = e.store_addr < addr + 8 && addr < e.store_addr + 8;
      if (overlap) return SbProbe::Pending;
    }
    return SbProbe::None;
  }

  // Resolves an indirect transfer's target at dispatch time, per the
  // value-wins rule: an operand whose value is obtainable now (register
  // ready, store-buffer hit, or L1-resident line) beats BTB/RSB.
  void predict_indirect(Entry& e, bool is_ret) {
    uint64_t delay = 0;
    uint64_t value = 0;
    bool have_value = false;

    const Operand& t = e.in->dst;  // unused operand for ret
    if (is_ret || t.is_mem()) {
      uint64_t addr = 0;
      bool addr_ok = false;
      if (is_ret) {
        addr_ok = sp_known_now(&addr);
      } else {
        // evaluate the memory operand with currently-known registers
        addr = uint64_t(t.mem.disp);
        addr_ok = true;
        uint64_t v;
        if (t.mem.base) {
          if (reg_known_now(*t.mem.base, &v)) addr += v;
          else addr_ok = false;
        }
        if (addr_ok && t.mem.index) {
          if (reg_known_now(*t.mem.index, &v)) addr += v * t.mem.scale;
          else addr_ok = false;
        }
      }
      if (addr_ok) {
        uint64_t sbv = 0;
        switch (sb_probe(addr, e.seq, &sbv)) {
          case SbProbe::Hit:
            value = sbv;
            have_value = true;
            delay = cfg_.lat_fwd + cfg_.redirect_ready;
            break;
          case SbProbe::Pending:
            break;  // a pending store owns the slot: predict via RSB/BTB
          case SbProbe::None:
            if (hier_.is_mapped(pid_, addr) && retired_.mem.readable(addr, 8) &&
                hier_.l1_contains(pid_, addr)) {
              value = retired_.mem.read(addr, 8);
              have_value = true;
              delay = cfg_.lat_l1 + cfg_.redirect_ready;
            }
            break;
        }
      }
    } else if (t.is_reg()) {
      uint64_t v;
      if (reg_known_now(t.reg, &v)) {
        value = v;
        have_value = true;
        delay = cfg_.redirect_ready;
      }
    }

    if (have_value) {
      e.pred_source = PredSource::Value;
      e.pred_target = value;
      fetch_pc_ = value;
      fetch_stall_until_ = std::max(fetch_stall_until_, now_ + delay);
      return;
    }
    if (is_ret) {
      e.pred_source = PredSource::Rsb;
      e.pred_target = pred_.rsb_pop();
      fetch_pc_ = e.pred_target;
      return;
    }
    if (auto btb = pred_.btb_lookup(e.pc)) {
      e.pred_source = PredSource::Btb;
      e.pred_target = *btb;
      fetch_pc_ = *btb;
      return;
    }
    // no prediction available: fetch stalls until the target resolves
    e.pred_source = PredSource::None;
    fetch_parked_ = true;
  }

  void dispatch(const Instruction& in) {
    Entry e;
    e.seq = rob_.size();
    e.in = &in;
    e.pc = in.addr;
    e.dispatch_cycle = now_;

    const Opcode op = in.op;
    auto mem_operand = [&]() -> const MemRef* {
      if (in.dst.is_mem()) return &in.dst.mem;
      if (in.src.is_mem()) return &in.src.mem;
      return nullptr;
    };

    switch (op) {
      case Opcode::Mov:
        if (in.src.is_reg()) add_src(e, in.src.reg);
        e.writes_reg = true;
        e.dst_reg = in.dst.reg;
        break;
      case Opcode::Load:
        add_mem_srcs(e, in.src.mem);
        e.is_load = true;
        e.writes_reg = true;
        e.dst_reg = in.dst.reg;
        break;
      case Opcode::Store:
        add_mem_srcs(e, in.dst.mem);
        if (in.src.is_reg()) {
          e.value_src = e.nsrc;
          add_src(e, in.src.reg);
        } else {
          e.store_value = in.src.imm;
          e.store_value_ready = true;
        }
        e.is_store = true;
        break;
      case Opcode::Cmp:
      case Opcode::Sub:
      case Opcode::Sbb:
      case Opcode::Add:
      case Opcode::And:
      case Opcode::Xor:
      case Opcode::Shl: {
        const MemRef* m = mem_operand();
        if (m) {
          add_mem_srcs(e, *m);
          e.is_load = true;
          if (op != Opcode::Cmp && in.dst.is_mem()) e.is_store = true;
        }
        if (in.dst.is_reg()) add_src(e, in.dst.reg);
        if (in.src.is_reg()) {
          e.value_src = e.nsrc;
          add_src(e, in.src.reg);
        }
        if (op == Opcode::Sbb) {
          e.flag_producer = flag_rename_;
          if (e.flag_producer == kNoProducer) e.flag_snapshot = retired_.flags;
        }
        e.writes_flags = true;
        if (op != Opcode::Cmp && in.dst.is_reg()) {
          e.writes_reg = true;
          e.dst_reg = in.dst.reg;
        }
        break;
      }
      case Opcode::Setne:
        e.flag_producer = flag_rename_;
        if (e.flag_producer == kNoProducer) e.flag_snapshot = retired_.flags;
        e.writes_reg = true;
        e.dst_reg = in.dst.reg;
        break;
      case Opcode::Push:
        e.sp_src = e.nsrc;
        add_src(e, kSpReg);
        if (in.src.is_reg()) {
          e.value_src = e.nsrc;
          add_src(e, in.src.reg);
        } else {
          e.store_value = in.src.imm;
          e.store_value_ready = true;
        }
        e.is_store = true;
        e.writes_sp = true;
        break;
      case Opcode::Pop:
        e.sp_src = e.nsrc;
        add_src(e, kSpReg);
        e.is_load = true;
        if (in.dst.reg == kSpReg) {
          e.writes_sp = true;  // pop into sp: the loaded value wins
        } else {
          e.writes_reg = true;
          e.dst_reg = in.dst.reg;
          e.writes_sp = true;
        }
        break;
      case Opcode::Jmp:
      case Opcode::Je:
      case Opcode::Jne:
      case Opcode::Jbe:
      case Opcode::Jae:
        e.is_ctrl = true;
        if (op != Opcode::Jmp) {
          e.flag_producer = flag_rename_;
          if (e.flag_producer == kNoProducer) e.flag_snapshot = retired_.flags;
          e.needs_resolve = true;
        }
        break;
      case Opcode::CallDirect:
      case Opcode::CallIndirect:
        e.sp_src = e.nsrc;
        add_src(e, kSpReg);
        if (op == Opcode::CallIndirect) {
          if (in.dst.is_reg()) {
            e.target_src = e.nsrc;
            add_src(e, in.dst.reg);
          } else {
            add_mem_srcs(e, in.dst.mem);
            e.is_load = true;
          }
          e.needs_resolve = true;
        }
        e.is_store = true;  // pushes the return address
        e.store_value = fallthrough(in);
        e.store_value_ready = true;
        e.writes_sp = true;
        e.is_ctrl = true;
        break;
      case Opcode::Ret:
        e.sp_src = e.nsrc;
        add_src(e, kSpReg);
        e.is_load = true;
        e.writes_sp = true;
        e.is_ctrl = true;
        e.needs_resolve = true;
        break;
      case Opcode::Clflush:
        add_mem_srcs(e, in.dst.mem);
        break;
      case Opcode::Lfence:
        e.is_lfence = true;
        break;
      case Opcode::Marker:
      case Opcode::Panic:
      case Opcode::Halt:
        break;
    }

    // next fetch address
    switch (op) {
      case Opcode::Jmp:
        fetch_pc_ = in.dst.imm;
        e.pred_source = PredSource::Direct;
        break;
      case Opcode::Je:
      case Opcode::Jne:
      case Opcode::Jbe:
      case Opcode::Jae:
        e.pred_taken = pred_.pht_taken(in.addr);
        e.pred_source = PredSource::Pht;
        e.pred_target = e.pred_taken ? in.dst.imm : fallthrough(in);
        fetch_pc_ = e.pred_target;
        ++unresolved_;
        break;
      case Opcode::CallDirect:
        pred_.rsb_push(fallthrough(in));
        fetch_pc_ = in.dst.imm;
        e.pred_source = PredSource::Direct;
        break;
      case Opcode::CallIndirect:
        pred_.rsb_push(fallthrough(in));
        predict_indirect(e, false);
        ++unresolved_;
        break;
      case Opcode::Ret:
        predict_indirect(e, true);
        ++unresolved_;
        break;
      case Opcode::Panic:
      case Opcode::Halt:
        fetch_parked_ = true;  // nothing sensible follows a terminal
        break;
      default:
        fetch_pc_ = fallthrough(in);
        break;
    }

    if (e.writes_reg) reg_rename_[e.dst_reg] = int64_t(e.seq);
    if (e.writes_sp) reg_rename_[kSpReg] = int64_t(e.seq);
    if (e.writes_flags) flag_rename_ = int64_t(e.seq);

    result_.predictions.push_back({e.pc, e.pred_source, e.pred_target});
    rob_.push_back(std::move(e));
    ++live_;
    logev(Event::Kind::Fetch, rob_.back());
  }

  // ---- issue / execute ----

  bool older_lfence_blocks(const Entry& e) const {
    for (int64_t s = int64_t(e.seq) - 1; s >= int64_t(head_); --s) {
      const Entry& o = rob_[size_t(s)];
      if (!o.squashed && o.is_lfence && !o.done) return true;
    }
    return false;
  }

  bool all_older_done(const Entry& e) const {
    for (int64_t s = int64_t(e.seq) - 1; s >= int64_t(head_); --s) {
      const Entry& o = rob_[size_t(s)];
      if (!o.squashed && !o.done) return false;
    }
    return true;
  }

  // Load disambiguation against older in-window stores. Returns false when
  // the load must keep waiting. On success *fwd_from is the forwarding store
  // seq or kNoProducer for a memory/cache read.
  bool load_may_issue(Entry& e, uint64_t addr, int64_t* fwd_from, uint64_t* fwd_value) {
    for (int64_t s = int64_t(e.seq) - 1; s >= int64_t(head_); --s) {
      const Entry& o = rob_[size_t(s)];
      if (o.squashed || !o.is_store || o.retired) continue;
      if (!o.store_addr_known) return false;  // conservative: no disambiguation guess
      bool overlap = o.store_addr < addr + 8 && addr < o.store_addr + 8;
      if (!overlap) continue;
      if (o.store_addr == addr) {  // full overlap
        if (!cfg_.stlf_enabled) {
          e.wait_store = s;  // ablation: behave like a partial overlap
          return false;
        }
        if (!o.store_value_ready || !o.done) return false;  // wait for the value
        *fwd_from = s;
        *fwd_value = o.store_value;
        return true;
      }
      e.wait_store = s;  // partial overlap: stall until that store retires
      return false;
    }
    *fwd_from = kNoProducer;
    return true;
  }

  void try_issue(Entry& e) {
    if (e.issued || e.squashed) return;

    if (e.is_lfence) {
      if (all_older_done(e)) {
        e.issued = true;
        e.done = true;
        e.complete_cycle = now_;
        logev(Event::Kind::Complete, e);
      }
      return;
    }

    if (older_lfence_blocks(e)) return;

    // register/flag readiness; a faulted producer kills this entry's path
    for (int i = 0; i < e.nsrc; ++i) {
      if (src_faulted(e, i)) {
        e.issued = e.done = e.faulted = true;
        e.complete_cycle = now_;
        return;
      }
      if (!src_ready(e, i)) return;
    }
    if (e.flag_producer >= 0) {
      const Entry& pe = rob_[size_t(e.flag_producer)];
      if (pe.done && pe.faulted) {
        e.issued = e.done = e.faulted = true;
        e.complete_cycle = now_;
        return;
      }
      if (!flags_ready(e)) return;
    }

    // effective addresses (all register sources are ready past this point)
    const Instruction& in = *e.in;
    switch (in.op) {
      case Opcode::Push:
      case Opcode::CallDirect:
        e.store_addr = src_value(e, e.sp_src) - 8;
        e.store_addr_known = true;
        break;
      case Opcode::CallIndirect:
        e.store_addr = src_value(e, e.sp_src) - 8;
        e.store_addr_known = true;
        if (in.dst.is_mem()) e.load_addr = mem_addr_from_srcs(e, in.dst.mem);
        break;
      case Opcode::Pop:
      case Opcode::Ret:
        e.load_addr = src_value(e, e.sp_src);
        break;
      case Opcode::Store:
        e.store_addr = mem_addr_from_srcs(e, in.dst.mem);
        e.store_addr_known = true;
        break;
      default:
        if (in.dst.is_mem()) {
          e.load_addr = mem_addr_from_srcs(e, in.dst.mem);
          if (e.is_store) {
            e.store_addr = e.load_addr;
            e.store_addr_known = true;
          }
        } else if (in.src.is_mem()) {
          e.load_addr = mem_addr_from_srcs(e, in.src.mem);
        }
        break;
    }

    uint64_t lat = 1;
    uint64_t loaded = 0;
    if (e.is_load) {
      if (e.wait_store >= 0) {
        const Entry& ws = rob_[size_t(e.wait_store)];
        if (!ws.retired && !ws.squashed) return;
        e.wait_store = kNoProducer;
      }
      int64_t fwd;
      uint64_t fwd_value = 0;
      if (!load_may_issue(e, e.load_addr, &fwd, &fwd_value)) return;
      if (fwd >= 0) {
        loaded = fwd_value;
        lat = cfg_.lat_fwd;
      } else {
        if (!hier_.is_mapped(pid_, e.load_addr) || !retired_.mem.readable(e.load_addr, 8)) {
          // speculative fault: stops this path, no architectural effect
          e.issued = e.done = e.faulted = true;
          e.complete_cycle = now_;
          logev(Event::Kind::Complete, e);
          return;
        }
        loaded = retired_.mem.read(e.load_addr, 8);
        lat = hier_.access(pid_, e.load_addr, 8, AccessKind::Load, now_).latency;
      }
    }

    compute(e, loaded);
    if (e.is_store && !e.store_value_ready) {
      if (e.is_load) {
        e.store_value = e.dst_value;  // read-modify-write stores its result
      } else if (e.value_src >= 0) {
        e.store_value = src_value(e, e.value_src);
      }
      e.store_value_ready = true;
    }
    if (e.is_load && e.is_store) lat += 1;  // read-modify-write

    e.issued = true;
    e.complete_cycle = now_ + std::max<uint64_t>(lat, 1);
    logev(Event::Kind::IssueStart, e);
  }

  // Computes the entry's results from captured source values. Mirrors
  // arch_step; the oracle-equivalence fuzz pins the two together.
  void compute(Entry& e, uint64_t loaded) {
    const Instruction& in = *e.in;
    auto operand_value = [&](const Operand& o, bool) -> uint64_t {
      if (o.is_imm()) return o.imm;
      if (o.is_mem()) return loaded;
      for (int i = 0; i < e.nsrc; ++i)
        if (e.srcs[i].reg == o.reg) return src_value(e, i);
      fail(SimError::Kind::Internal, "operand register not captured");
    };

    switch (in.op) {
      case Opcode::Mov:
        e.dst_value = operand_value(in.src, false);
        break;
      case Opcode::Load:
        e.dst_value = loaded;
        break;
      case Opcode::Store:
        break;
      case Opcode::Cmp:
      case Opcode::Sub:
      case Opcode::Sbb: {
        uint64_t a = operand_value(in.dst, true);
        uint64_t b = operand_value(in.src, false);
        uint64_t borrow = 0;
        if (in.op == Opcode::Sbb) borrow = flag_value(e).cf ? 1 : 0;
        unsigned __int128 rhs = (unsigned __int128)b + borrow;
        uint64_t r = a - b - borrow;
        e.out_flags.zf = r == 0;
        e.out_flags.cf = (unsigned __int128)a < rhs;
        e.out_flags.sf = int64_t(r) < 0;
        e.dst_value = r;
        break;
      }
      case Opcode::Add: {
        uint64_t a = operand_value(in.dst, true);
        uint64_t b = operand_value(in.src, false);
        uint64_t r = a + b;
        e.out_flags = {r == 0, r < a, int64_t(r) < 0};
        e.dst_value = r;
        break;
      }
      case Opcode::And:
      case Opcode::Xor: {
        uint64_t a = operand_value(in.dst, true);
        uint64_t b = operand_value(in.src, false);
        uint64_t r = in.op == Opcode::And ? (a & b) : (a ^ b);
        e.out_flags = {r == 0, false, int64_t(r) < 0};
        e.dst_value = r;
        break;
      }
      case Opcode::Shl: {
        uint64_t a = operand_value(in.dst, true);
        uint64_t n = operand_value(in.src, false) & 63;
        uint64_t r = n ? (a << n) : a;
        e.out_flags = {r == 0, false, int64_t(r) < 0};
        e.dst_value = r;
        break;
      }
      case Opcode::Setne:
        e.dst_value = flag_value(e).zf ? 0 : 1;
        break;
      case Opcode::Push:
        e.sp_value = src_value(e, e.sp_src) - 8;
        break;
      case Opcode::Pop:
        e.dst_value = loaded;
        e.sp_value = in.dst.reg == kSpReg ? loaded : src_value(e, e.sp_src) + 8;
        break;
      case Opcode::Je:
      case Opcode::Jne:
      case Opcode::Jbe:
      case Opcode::Jae: {
        Flags f = flag_value(e);
        bool taken = false;
        if (in.op == Opcode::Je) taken = f.zf;
        if (in.op == Opcode::Jne) taken = !f.zf;
        if (in.op == Opcode::Jbe) taken = f.cf || f.zf;
        if (in.op == Opcode::Jae) taken = !f.cf;
        e.actual_taken = taken;
        e.actual_target = taken ? in.dst.imm : fallthrough(in);
        break;
      }
      case Opcode::Jmp:
        e.actual_target = in.dst.imm;
        break;
      case Opcode::CallDirect:
      case Opcode::CallIndirect:
        e.actual_target = in.op == Opcode::CallDirect
                              ? in.dst.imm
                              : (in.dst.is_reg() ? operand_value(in.dst, false) : loaded);
        e.sp_value = src_value(e, e.sp_src) - 8;
        break;
      case Opcode::Ret:
        e.actual_target = loaded;
        e.sp_value = src_value(e, e.sp_src) + 8;
        break;
      case Opcode::Clflush:
      case Opcode::Lfence:
      case Opcode::Marker:
      case Opcode::Panic:
      case Opcode::Halt:
        break;
    }
  }

  // ---- resolution / squash ----

  void resolve_control(Entry& e) {
    e.resolved = true;
    if (unresolved_ > 0) --unresolved_;
    bool mispredicted = false;
    uint64_t redirect = 0;
    if (is_cond_branch(e.in->op)) {
      if (e.actual_taken != e.pred_taken) {
        mispredicted = true;
        redirect = e.actual_target;
      }
    } else if (e.needs_resolve) {
      if (e.pred_source == PredSource::None) {
        // fetch was parked waiting for this target
        fetch_pc_ = e.actual_target;
        fetch_parked_ = false;
        fetch_stall_until_ = std::max(fetch_stall_until_, now_ + cfg_.redirect_ready);
        logev(Event::Kind::Redirect, e);
        return;
      }
      if (e.actual_target != e.pred_target) {
        mispredicted = true;
        redirect = e.actual_target;
      }
    }
    if (mispredicted) {
      ++result_.mispredicts;
      squash_younger(e.seq);
      fetch_pc_ = redirect;
      fetch_parked_ = false;
      fetch_stall_until_ = now_ + cfg_.mispredict_penalty;
      last_ifetch_line_ = UINT64_MAX;
      logev(Event::Kind::Redirect, e);
    }
  }

  void squash_younger(uint64_t seq) {
    for (size_t s = rob_.size(); s-- > seq + 1;) {
      Entry& e = rob_[s];
      if (e.squashed || e.retired) continue;
      e.squashed = true;
      --live_;
      ++result_.squashed_instrs;
      if (e.is_ctrl && e.needs_resolve && !e.resolved && unresolved_ > 0) --unresolved_;
      if (e.in->op == Opcode::Marker && e.done && !e.faulted) {
        auto& c = result_.markers.counts[e.in->marker_id];
        ++c.squashed;
      }
      logev(Event::Kind::Squash, e);
    }
    // rebuild renames up to the squash point
    for (int r = 0; r < kNumRegs; ++r)
      if (reg_rename_[r] > int64_t(seq)) reg_rename_[r] = youngest_reg_writer(uint8_t(r), seq + 1);
    if (flag_rename_ > int64_t(seq)) flag_rename_ = youngest_flag_writer(seq + 1);
  }

  // ---- retire ----

  void retire_ready() {
    while (head_ < rob_.size()) {
      Entry& e = rob_[head_];
      if (e.squashed) {
        ++head_;
        continue;
      }
      if (!e.done) break;
      if (retired_.pc != e.pc)
        fail(SimError::Kind::Internal, "retired pc diverged from fetch path");

      int64_t m = arch_step(retired_, prog_, *e.in);  // may throw: architectural error
      result_.trace.push_back({e.in->addr, e.in->op});
      result_.touched_pages.push_back(page_of(e.pc));
      if (m >= 0) {
        result_.retired_markers.push_back(uint32_t(m));
        ++result_.markers.counts[uint32_t(m)].retired;
      }

      if (e.is_ctrl && retired_.status == RunStatus::Running) {
        if (retired_.pc != e.actual_target && e.needs_resolve)
          fail(SimError::Kind::Internal,
               std::string("speculative control outcome diverged: ") +
                   opcode_name(e.in->op) + " at 0x" + SparseMemory::hex(e.pc) +
                   " resolved 0x" + SparseMemory::hex(e.actual_target) +
                   " architectural 0x" + SparseMemory::hex(retired_.pc));
        if (is_cond_branch(e.in->op)) pred_.pht_update(e.pc, e.actual_taken);
        if (e.in->op == Opcode::CallIndirect) pred_.btb_update(e.pc, e.actual_target);
      }
      if (e.is_store) hier_.access(pid_, e.store_addr, 8, AccessKind::Store, now_);
      if (e.in->op == Opcode::Clflush) hier_.clflush(pid_, e.load_addr);

      e.retired = true;
      --live_;
      ++retired_count_;
      logev(Event::Kind::Retire, e);
      ++head_;

      if (retired_.status != RunStatus::Running) {
        squash_younger(e.seq);  // wrong-path leftovers beyond the terminal
        done_ = true;
        return;
      }
      if (retired_count_ >= fuel_)
        fail(SimError::Kind::FuelExhausted,
             "fuel exhausted after " + std::to_string(fuel_));
    }
    if (head_ >= rob_.size() && fetch_parked_ && unresolved_ == 0 && !done_)
      fail(SimError::Kind::UnmappedAccess,
           "no instruction at pc 0x" + SparseMemory::hex(fetch_pc_));
  }

  // ---- fetch ----

  bool lfence_blocks_fetch() const {
    for (size_t s = head_; s < rob_.size(); ++s) {
      const Entry& e = rob_[s];
      if (!e.squashed && !e.retired && e.is_lfence && !e.done) return true;
    }
    return false;
  }

  void fetch() {
    if (done_ || fetch_parked_ || now_ < fetch_stall_until_) return;
    if (live_ >= cfg_.rob_capacity) return;
    if (unresolved_ >= cfg_.spec_depth_max) return;
    if (lfence_blocks_fetch()) return;

    const Instruction* in = prog_.at(fetch_pc_);
    if (!in) {
      if (unresolved_ > 0 || live_ > 0) {
        fetch_parked_ = true;  // dead speculative path; wait for a redirect
        return;
      }
      fail(SimError::Kind::UnmappedAccess,
           "no instruction at pc 0x" + SparseMemory::hex(fetch_pc_));
    }

    uint64_t line = line_of(fetch_pc_);
    if (line != last_ifetch_line_) {
      if (!hier_.is_mapped(pid_, fetch_pc_)) {
        fetch_parked_ = true;  // speculative fetch into an unmapped page
        return;
      }
      last_ifetch_line_ = line;
      AccessResult ar = hier_.access(pid_, fetch_pc_, in->size(), AccessKind::Fetch, now_);
      if (ar.latency > cfg_.lat_l1) {
        fetch_stall_until_ = now_ + ar.latency;
        return;
      }
    }
    dispatch(*in);
  }

  void cycle() {
    // 1. completions and control resolution, oldest first
    for (size_t s = head_; s < rob_.size(); ++s) {
      Entry& e = rob_[s];
      if (e.squashed || e.retired || !e.issued || e.done) continue;
      if (e.complete_cycle > now_) continue;
      e.done = true;
      logev(Event::Kind::Complete, e);
      if (e.is_ctrl && e.needs_resolve && !e.faulted) resolve_control(e);
    }
    // 2. issue
    for (size_t s = head_; s < rob_.size(); ++s) {
      Entry& e = rob_[s];
      if (!e.squashed && !e.retired) try_issue(e);
    }
    // 3. retire
    retire_ready();
    // 4. fetch/dispatch
    fetch();
  }
};

Pipeline::Pipeline(const Program& p, MachineState init, MemoryHierarchy& hier, int pid,
                   PredictorState& pred, const SimConfig& cfg, uint64_t fuel,
                   uint64_t start_cycle, EventLog* log)
    : impl_(new PipelineImpl(p, std::move(init), hier, pid, pred, cfg, fuel, start_cycle,
                             log)) {}
Pipeline::~Pipeline() = default;
Pipeline::Pipeline(Pipeline&&) noexcept = default;

bool Pipeline::step_cycles(uint64_t n) { return impl_->step_cycles(n); }
void Pipeline::skip_to(uint64_t cycle) { impl_->skip_to(cycle); }
bool Pipeline::done() const { return impl_->done(); }
uint64_t Pipeline::now() const { return impl_->now(); }
SpecRunResult Pipeline::take_result() { return impl_->take_result(); }

SpecRunResult run_speculative(const Program& p, MachineState init, MemoryHierarchy& hier,
                              int pid, PredictorState& pred, const SimConfig& cfg,
                              uint64_t fuel, uint64_t start_cycle, EventLog* log) {
  PipelineImpl impl(p, std::move(init), hier, pid, pred, cfg, fuel, start_cycle, log);
  while (!impl.step_cycles(100000)) {
  }
  return impl.take_result();
}

}  // namespace specsim
