#pragma once

#include <stdexcept>
#include <string>

namespace specsim {

// Single exception type; `kind` is stable and machine-checkable, `what()` is
// for humans.
struct SimError : std::runtime_error {
  enum class Kind {
    Syntax,
    DuplicateLabel,
    UnresolvedLabel,
    Misaligned,
    UnknownListing,
    FuelExhausted,
    UnmappedAccess,
    MisalignedStack,
    OutOfFrames,
    NoContiguity,
    PoolTooSmall,
    VerifyFailed,
    BudgetExceeded,
    NoAnchor,
    Unsatisfiable,
    BadConfig,
    BadInput,
    WriteProtected,
    Internal,
  };
  Kind kind;
  SimError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

[[noreturn]] inline void fail(SimError::Kind k, const std::string& msg) {
  throw SimError(k, msg);
}

}  // namespace specsim
