#pragma once

#include <string>

#include "specsim/program.hpp"

namespace specsim {

// Assembles the line-oriented DSL (see docs/isa.md) into a Program.
// Address assignment is deterministic: sections and data blobs are laid out
// in declaration order, at their declared address or at the next free page.
// Throws SimError on syntax errors, duplicate/unresolved labels and
// misaligned section addresses.
Program assemble(const std::string& source);

// Canonical DSL emission. assemble(disassemble(p)) is structurally equal
// to p for every program the assembler produces.
std::string disassemble(const Program& p);

// True if both programs have identical sections, data and labels.
bool structurally_equal(const Program& a, const Program& b);

std::string format_operand(const Operand& op);
std::string format_instruction(const Instruction& in);

}  // namespace specsim
