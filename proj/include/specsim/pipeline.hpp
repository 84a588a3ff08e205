#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "specsim/config.hpp"
#include "specsim/interp.hpp"
#include "specsim/machine.hpp"
#include "specsim/memhier.hpp"
#include "specsim/predictor.hpp"
#include "specsim/program.hpp"

namespace specsim {

// Where a control transfer's next-fetch address came from.
enum class PredSource : uint8_t { None, Fallthrough, Pht, Btb, Rsb, Value, Direct };

struct MarkerCounters {
  struct Counts {
    uint64_t squashed = 0;  // executed speculatively, then squashed
    uint64_t retired = 0;
  };
  std::map<uint32_t, Counts> counts;

  uint64_t squashed(uint32_t id) const {
    auto it = counts.find(id);
    return it == counts.end() ? 0 : it->second.squashed;
  }
  uint64_t retired(uint32_t id) const {
    auto it = counts.find(id);
    return it == counts.end() ? 0 : it->second.retired;
  }
};

struct Event {
  enum class Kind : uint8_t { Fetch, IssueStart, Complete, Retire, Squash, Redirect, Stall };
  uint64_t cycle = 0;
  Kind kind = Kind::Fetch;
  uint64_t pc = 0;
  uint64_t seq = 0;
  Opcode op = Opcode::Halt;
  std::string to_string() const;
};

using EventLog = std::vector<Event>;

struct PredictionSample {
  uint64_t pc = 0;
  PredSource source = PredSource::None;
  uint64_t target = 0;
};

struct SpecRunResult {
  MachineState state;
  MarkerCounters markers;
  uint64_t cycles = 0;
  uint64_t retired = 0;
  std::vector<RetiredInstr> trace;
  std::vector<uint32_t> retired_markers;
  std::vector<uint64_t> touched_pages;  // code pages of retired instructions
  uint64_t mispredicts = 0;
  uint64_t squashed_instrs = 0;
  std::vector<PredictionSample> predictions;  // per dispatched control transfer
};

class PipelineImpl;

// Speculative out-of-order engine over one program. Staged: in-order fetch
// along the predicted path, dataflow issue inside the reorder window,
// in-order retirement replaying architectural semantics (so the retired
// state equals the oracle interpreter by construction).
class Pipeline {
 public:
  Pipeline(const Program& p, MachineState init, MemoryHierarchy& hier, int pid,
           PredictorState& pred, const SimConfig& cfg, uint64_t fuel,
           uint64_t start_cycle = 0, EventLog* log = nullptr);
  ~Pipeline();
  Pipeline(Pipeline&&) noexcept;

  // Advances up to n cycles; returns true once the run is finished.
  bool step_cycles(uint64_t n);
  // Jumps the clock forward (the run was descheduled while others ran).
  void skip_to(uint64_t cycle);
  bool done() const;
  uint64_t now() const;  // shared-timeline cycle
  SpecRunResult take_result();

 private:
  std::unique_ptr<PipelineImpl> impl_;
};

// Runs to completion. Architectural result is oracle-equivalent to
// interpret(); MarkerCounters additionally count markers reached down
// squashed paths. Throws like interpret() on architectural errors.
SpecRunResult run_speculative(const Program& p, MachineState init, MemoryHierarchy& hier,
                              int pid, PredictorState& pred, const SimConfig& cfg,
                              uint64_t fuel, uint64_t start_cycle = 0,
                              EventLog* log = nullptr);

// Maps everything a run will touch: the image in declaration order, then any
// extra machine-state pages (stacks handed out by give_stack) ascending.
void map_machine_pages(MemoryHierarchy& hier, int pid, const Program& p,
                       const MachineState& st);

// Runs the program's benign path `trials` times (fresh machine state each
// run, persistent predictors), returning the trained predictor state.
PredictorState train_pht(const Program& p, const MachineState& init, uint32_t trials,
                         const SimConfig& cfg);

// Calibration probe: longest chain of ret-only gadgets whose terminal marker
// is still reached inside a DRAM-latency speculation window. 20 with the
// default configuration.
uint32_t max_empty_gadget_depth(const SimConfig& cfg);

}  // namespace specsim
