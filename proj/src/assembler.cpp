#include "specsim/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "specsim/asm_unit.hpp"
#include "specsim/error.hpp"

namespace specsim {
namespace {

struct Cursor {
  const std::string& text;
  size_t pos = 0;
  int line = 1;
};

[[noreturn]] void syntax(int line, const std::string& msg) {
  fail(SimError::Kind::Syntax, "line " + std::to_string(line) + ": " + msg);
}

bool ident_start(char c) { return std::isalpha(uint8_t(c)) || c == '_' || c == '.'; }
bool ident_char(char c) { return std::isalnum(uint8_t(c)) || c == '_' || c == '.'; }

struct LineTokens {
  std::vector<std::string> toks;
  int line;

  bool empty() const { return toks.empty(); }
  const std::string& operator[](size_t i) const { return toks[i]; }
  size_t size() const { return toks.size(); }
};

std::vector<LineTokens> tokenize(const std::string& src) {
  std::vector<LineTokens> out;
  std::istringstream is(src);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    size_t c = raw.find(';');
    if (c != std::string::npos) raw.resize(c);
    LineTokens lt;
    lt.line = lineno;
    size_t i = 0;
    while (i < raw.size()) {
      char ch = raw[i];
      if (std::isspace(uint8_t(ch))) {
        ++i;
        continue;
      }
      if (ident_char(ch) || (ch == '-' && i + 1 < raw.size() && std::isdigit(uint8_t(raw[i + 1])))) {
        size_t j = i + 1;
        while (j < raw.size() && ident_char(raw[j])) ++j;
        lt.toks.push_back(raw.substr(i, j - i));
        i = j;
      } else if (ch == '[' || ch == ']' || ch == ',' || ch == '+' || ch == '*' || ch == ':' ||
                 ch == '=' || ch == '@' || ch == '-') {
        lt.toks.push_back(std::string(1, ch));
        ++i;
      } else {
        syntax(lineno, std::string("unexpected character '") + ch + "'");
      }
    }
    if (!lt.toks.empty()) out.push_back(std::move(lt));
  }
  return out;
}

bool is_number(const std::string& t) {
  if (t.empty()) return false;
  size_t i = (t[0] == '-') ? 1 : 0;
  if (i >= t.size()) return false;
  if (t.size() > i + 1 && t[i] == '0' && (t[i + 1] == 'x' || t[i + 1] == 'X')) {
    for (size_t k = i + 2; k < t.size(); ++k)
      if (!std::isxdigit(uint8_t(t[k]))) return false;
    return t.size() > i + 2;
  }
  for (size_t k = i; k < t.size(); ++k)
    if (!std::isdigit(uint8_t(t[k]))) return false;
  return true;
}

uint64_t parse_number(const std::string& t, int line) {
  bool neg = t[0] == '-';
  const std::string body = neg ? t.substr(1) : t;
  uint64_t v = 0;
  try {
    v = std::stoull(body, nullptr, 0);
  } catch (const std::exception&) {
    syntax(line, "bad number '" + t + "'");
  }
  return neg ? uint64_t(-int64_t(v)) : v;
}

std::optional<uint8_t> parse_reg(const std::string& t) {
  if (t == "sp") return kSpReg;
  if (t.size() >= 2 && t[0] == 'r' && std::isdigit(uint8_t(t[1]))) {
    int n = std::atoi(t.c_str() + 1);
    if (n >= 0 && n < kNumRegs && t == "r" + std::to_string(n)) return uint8_t(n);
  }
  return std::nullopt;
}

// Splits a token line into operand token groups at top-level commas.
std::vector<std::vector<std::string>> split_operands(const LineTokens& lt, size_t from) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> cur;
  int depth = 0;
  for (size_t i = from; i < lt.size(); ++i) {
    const std::string& t = lt[i];
    if (t == "[") ++depth;
    if (t == "]") --depth;
    if (t == "," && depth == 0) {
      if (cur.empty()) syntax(lt.line, "empty operand");
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(t);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Operand parse_mem(const std::vector<std::string>& toks, int line) {
  // toks = [ term (+|- term)* ]  with term = reg | reg*scale | number | label
  MemRef m;
  int64_t disp = 0;
  size_t i = 1;  // skip '['
  bool expect_term = true;
  int sign = 1;
  while (i < toks.size() && toks[i] != "]") {
    const std::string& t = toks[i];
    if (t == "+" || t == "-") {
      if (expect_term) syntax(line, "misplaced sign in memory operand");
      sign = (t == "-") ? -1 : 1;
      expect_term = true;
      ++i;
      continue;
    }
    if (!expect_term) syntax(line, "expected + between memory operand terms");
    if (auto r = parse_reg(t)) {
      if (i + 2 < toks.size() && toks[i + 1] == "*") {
        if (!is_number(toks[i + 2])) syntax(line, "bad scale");
        uint64_t sc = parse_number(toks[i + 2], line);
        if (sc != 1 && sc != 2 && sc != 4 && sc != 8)
          syntax(line, "scale must be 1, 2, 4 or 8");
        if (m.index) syntax(line, "two index registers in memory operand");
        if (sign < 0) syntax(line, "negative register term");
        m.index = *r;
        m.scale = uint8_t(sc);
        i += 3;
      } else {
        if (sign < 0) syntax(line, "negative register term");
        if (!m.base) m.base = *r;
        else if (!m.index) {
          m.index = *r;
          m.scale = 1;
        } else
          syntax(line, "too many registers in memory operand");
        ++i;
      }
    } else if (is_number(t)) {
      disp += sign * int64_t(parse_number(t, line));
      ++i;
    } else if (ident_start(t[0])) {
      if (!m.label.empty()) syntax(line, "two labels in memory operand");
      if (sign < 0) syntax(line, "negative label term");
      m.label = t;
      ++i;
    } else {
      syntax(line, "bad memory operand term '" + t + "'");
    }
    expect_term = false;
    sign = 1;
  }
  if (i >= toks.size() || toks[i] != "]") syntax(line, "missing ] in memory operand");
  if (i + 1 != toks.size()) syntax(line, "trailing tokens after memory operand");
  if (expect_term) syntax(line, "empty memory operand");
  m.disp = disp;
  return Operand::make_mem(std::move(m));
}

Operand parse_operand(const std::vector<std::string>& toks, int line) {
  if (toks.empty()) syntax(line, "missing operand");
  if (toks[0] == "[") return parse_mem(toks, line);
  if (toks.size() == 1) {
    const std::string& t = toks[0];
    if (auto r = parse_reg(t)) return Operand::make_reg(*r);
    if (is_number(t)) return Operand::make_imm(parse_number(t, line));
    if (ident_start(t[0])) {
      Operand o = Operand::make_imm(0);
      o.imm_label = t;
      return o;
    }
  }
  if (toks.size() == 2 && toks[0] == "-" && is_number(toks[1]))
    return Operand::make_imm(uint64_t(-int64_t(parse_number(toks[1], line))));
  syntax(line, "bad operand");
}

const std::set<std::string>& mnemonics() {
  static const std::set<std::string> m = {
      "mov",  "load", "store", "cmp",     "sub",    "sbb",    "add",  "and",
      "xor",  "shl",  "setne", "push",    "pop",    "jmp",    "je",   "jne",
      "jbe",  "jae",  "call",  "ret",     "clflush", "lfence", "marker",
      "panic", "halt"};
  return m;
}

Instruction parse_instr(const LineTokens& lt) {
  const std::string& op = lt[0];
  Instruction in;
  in.src_line = lt.line;
  auto ops = split_operands(lt, 1);
  auto want = [&](size_t n) {
    if (ops.size() != n)
      syntax(lt.line, op + " expects " + std::to_string(n) + " operand(s)");
  };
  auto one_mem = [&](const Operand& a, const Operand& b) {
    if (a.is_mem() && b.is_mem()) syntax(lt.line, "at most one memory operand");
  };

  if (op == "mov" || op == "load" || op == "store") {
    want(2);
    Operand a = parse_operand(ops[0], lt.line), b = parse_operand(ops[1], lt.line);
    one_mem(a, b);
    if (a.is_mem()) {
      if (!b.is_reg() && !b.is_imm()) syntax(lt.line, "bad store source");
      in.op = Opcode::Store;
    } else if (b.is_mem()) {
      if (!a.is_reg()) syntax(lt.line, "load destination must be a register");
      in.op = Opcode::Load;
    } else {
      if (!a.is_reg()) syntax(lt.line, "mov destination must be a register");
      in.op = Opcode::Mov;
    }
    in.dst = a;
    in.src = b;
  } else if (op == "cmp" || op == "sub" || op == "sbb" || op == "add" || op == "and" ||
             op == "xor" || op == "shl") {
    want(2);
    Operand a = parse_operand(ops[0], lt.line), b = parse_operand(ops[1], lt.line);
    one_mem(a, b);
    if (op != "cmp" && a.is_imm()) syntax(lt.line, "destination cannot be an immediate");
    static const std::map<std::string, Opcode> alu = {
        {"cmp", Opcode::Cmp}, {"sub", Opcode::Sub}, {"sbb", Opcode::Sbb},
        {"add", Opcode::Add}, {"and", Opcode::And}, {"xor", Opcode::Xor},
        {"shl", Opcode::Shl}};
    in.op = alu.at(op);
    if (op == "shl" && !b.is_imm() && !b.is_reg()) syntax(lt.line, "bad shift count");
    in.dst = a;
    in.src = b;
  } else if (op == "setne") {
    want(1);
    Operand a = parse_operand(ops[0], lt.line);
    if (!a.is_reg()) syntax(lt.line, "setne needs a register");
    in.op = Opcode::Setne;
    in.dst = a;
  } else if (op == "push") {
    want(1);
    in.op = Opcode::Push;
    in.src = parse_operand(ops[0], lt.line);
    if (in.src.is_mem()) syntax(lt.line, "push takes a register or immediate");
  } else if (op == "pop") {
    want(1);
    Operand a = parse_operand(ops[0], lt.line);
    if (!a.is_reg()) syntax(lt.line, "pop needs a register");
    in.op = Opcode::Pop;
    in.dst = a;
  } else if (op == "jmp" || op == "je" || op == "jne" || op == "jbe" || op == "jae") {
    want(1);
    Operand a = parse_operand(ops[0], lt.line);
    if (!a.is_imm() || a.imm_label.empty())
      syntax(lt.line, op + " target must be a label");
    static const std::map<std::string, Opcode> jcc = {{"jmp", Opcode::Jmp},
                                                      {"je", Opcode::Je},
                                                      {"jne", Opcode::Jne},
                                                      {"jbe", Opcode::Jbe},
                                                      {"jae", Opcode::Jae}};
    in.op = jcc.at(op);
    in.dst = a;
  } else if (op == "call") {
    want(1);
    Operand a = parse_operand(ops[0], lt.line);
    if (a.is_imm() && !a.imm_label.empty()) {
      in.op = Opcode::CallDirect;
    } else if (a.is_reg() || a.is_mem()) {
      in.op = Opcode::CallIndirect;  // never an immediate
    } else {
      syntax(lt.line, "call target must be a label, register or memory operand");
    }
    in.dst = a;
  } else if (op == "ret") {
    want(0);
    in.op = Opcode::Ret;
  } else if (op == "clflush") {
    want(1);
    Operand a = parse_operand(ops[0], lt.line);
    if (a.is_imm() && !a.imm_label.empty()) {
      MemRef m;
      m.label = a.imm_label;
      a = Operand::make_mem(m);
    }
    if (!a.is_mem()) syntax(lt.line, "clflush needs a memory operand");
    in.op = Opcode::Clflush;
    in.dst = a;
  } else if (op == "lfence") {
    want(0);
    in.op = Opcode::Lfence;
  } else if (op == "marker") {
    want(1);
    Operand a = parse_operand(ops[0], lt.line);
    if (!a.is_imm() || !a.imm_label.empty()) syntax(lt.line, "marker needs a numeric id");
    in.op = Opcode::Marker;
    in.marker_id = uint32_t(a.imm);
  } else if (op == "panic") {
    want(0);
    in.op = Opcode::Panic;
  } else if (op == "halt") {
    want(0);
    in.op = Opcode::Halt;
  } else {
    syntax(lt.line, "unknown mnemonic '" + op + "'");
  }
  return in;
}

void parse_data(const LineTokens& lt, AsmData& d) {
  // data <label> [@0xADDR] [ro] ( zero N | = qword v,.. | = byte hh.. )
  size_t i = 1;
  if (i >= lt.size() || !ident_start(lt[i][0])) syntax(lt.line, "data needs a label");
  d.label = lt[i++];
  if (i < lt.size() && lt[i] == "@") {
    ++i;
    if (i >= lt.size() || !is_number(lt[i])) syntax(lt.line, "bad data address");
    d.addr = parse_number(lt[i++], lt.line);
  }
  if (i < lt.size() && lt[i] == "ro") {
    d.writable = false;
    ++i;
  }
  if (i < lt.size() && lt[i] == "zero") {
    ++i;
    if (i >= lt.size() || !is_number(lt[i])) syntax(lt.line, "zero needs a byte count");
    d.form = AsmData::Form::Zero;
    d.zero_count = parse_number(lt[i++], lt.line);
    if (i != lt.size()) syntax(lt.line, "trailing tokens after zero count");
    return;
  }
  if (i >= lt.size() || lt[i] != "=") syntax(lt.line, "expected = in data directive");
  ++i;
  if (i >= lt.size()) syntax(lt.line, "empty data value");
  if (lt[i] == "qword") {
    ++i;
    d.form = AsmData::Form::Qwords;
    bool expect = true;
    for (; i < lt.size(); ++i) {
      if (lt[i] == ",") {
        if (expect) syntax(lt.line, "misplaced comma in qword list");
        expect = true;
        continue;
      }
      if (!expect) syntax(lt.line, "missing comma in qword list");
      AsmData::QItem q;
      if (is_number(lt[i])) {
        q.value = parse_number(lt[i], lt.line);
      } else if (ident_start(lt[i][0])) {
        q.is_label = true;
        q.label = lt[i];
      } else {
        syntax(lt.line, "bad qword item '" + lt[i] + "'");
      }
      d.qwords.push_back(std::move(q));
      expect = false;
    }
    if (expect || d.qwords.empty()) syntax(lt.line, "empty qword list");
  } else if (lt[i] == "byte") {
    ++i;
    d.form = AsmData::Form::Bytes;
    for (; i < lt.size(); ++i) {
      if (lt[i] == ",") continue;
      const std::string& t = lt[i];
      if (t.size() != 2 || !std::isxdigit(uint8_t(t[0])) || !std::isxdigit(uint8_t(t[1])))
        syntax(lt.line, "byte items must be two hex digits");
      d.bytes.push_back(uint8_t(std::stoul(t, nullptr, 16)));
    }
    if (d.bytes.empty()) syntax(lt.line, "empty byte list");
  } else {
    syntax(lt.line, "data value must start with qword, byte or zero");
  }
}

}  // namespace

AsmSection* AsmUnit::find_section(const std::string& name) {
  for (auto& t : tops)
    if (!t.is_data && t.sec.name == name) return &t.sec;
  return nullptr;
}

AsmUnit parse_dsl(const std::string& source) {
  AsmUnit unit;
  AsmSection* cur = nullptr;
  for (const LineTokens& lt : tokenize(source)) {
    const std::string& head = lt[0];
    if (head == "entry") {
      if (lt.size() != 2) syntax(lt.line, "entry needs one label");
      unit.entry = lt[1];
    } else if (head == "section") {
      AsmUnit::Top top;
      size_t i = 1;
      if (i >= lt.size() || !ident_start(lt[i][0])) syntax(lt.line, "section needs a name");
      top.sec.name = lt[i++];
      if (i < lt.size() && lt[i] == "@") {
        ++i;
        if (i >= lt.size() || !is_number(lt[i])) syntax(lt.line, "bad section address");
        top.sec.addr = parse_number(lt[i++], lt.line);
      }
      if (i < lt.size() && lt[i] == "pages") {
        ++i;
        if (i >= lt.size() || !is_number(lt[i])) syntax(lt.line, "bad page count");
        top.sec.pages = parse_number(lt[i++], lt.line);
        if (top.sec.pages == 0) syntax(lt.line, "page count must be positive");
      }
      if (i != lt.size()) syntax(lt.line, "trailing tokens after section directive");
      unit.tops.push_back(std::move(top));
      cur = &unit.tops.back().sec;
    } else if (head == "data") {
      AsmUnit::Top top;
      top.is_data = true;
      parse_data(lt, top.data);
      unit.tops.push_back(std::move(top));
    } else if (lt.size() >= 2 && lt[1] == ":" && ident_start(head[0]) &&
               !mnemonics().count(head)) {
      if (lt.size() != 2) syntax(lt.line, "label line must contain only the label");
      if (!cur) syntax(lt.line, "label outside a section");
      AsmItem item;
      item.is_label = true;
      item.label = head;
      cur->items.push_back(std::move(item));
    } else if (mnemonics().count(head)) {
      if (!cur) syntax(lt.line, "instruction outside a section");
      AsmItem item;
      item.instr = parse_instr(lt);
      cur->items.push_back(std::move(item));
    } else {
      syntax(lt.line, "cannot parse line starting with '" + head + "'");
    }
  }
  return unit;
}

namespace {

uint64_t data_size(const AsmData& d) {
  switch (d.form) {
    case AsmData::Form::Bytes: return d.bytes.size();
    case AsmData::Form::Qwords: return d.qwords.size() * 8;
    case AsmData::Form::Zero: return d.zero_count;
  }
  return 0;
}

void resolve_operand(Operand& o, const std::map<std::string, uint64_t>& labels, int line) {
  if (!o.imm_label.empty()) {
    auto it = labels.find(o.imm_label);
    if (it == labels.end())
      fail(SimError::Kind::UnresolvedLabel,
           "line " + std::to_string(line) + ": unresolved label '" + o.imm_label + "'");
    o.imm = it->second;
  }
  if (o.is_mem() && !o.mem.label.empty()) {
    auto it = labels.find(o.mem.label);
    if (it == labels.end())
      fail(SimError::Kind::UnresolvedLabel,
           "line " + std::to_string(line) + ": unresolved label '" + o.mem.label + "'");
    o.mem.disp += int64_t(it->second);
  }
}

}  // namespace

Program resolve(const AsmUnit& unit) {
  Program p;
  uint64_t next_page = 1;  // page 0 stays unmapped
  std::set<uint64_t> taken_pages;
  std::map<std::string, uint64_t> labels;

  auto define = [&](const std::string& name, uint64_t addr, int line) {
    if (labels.count(name))
      fail(SimError::Kind::DuplicateLabel,
           "line " + std::to_string(line) + ": duplicate label '" + name + "'");
    labels[name] = addr;
  };
  std::set<uint64_t> code_pages;
  std::vector<std::pair<uint64_t, uint64_t>> data_ranges;
  auto claim = [&](uint64_t first, uint64_t last, bool is_code, const std::string& what) {
    for (uint64_t pg = first; pg <= last; ++pg) {
      if (code_pages.count(pg) || (is_code && taken_pages.count(pg)))
        fail(SimError::Kind::Misaligned, what + " overlaps an already placed page");
      if (is_code) code_pages.insert(pg);
      if (!taken_pages.count(pg)) {
        taken_pages.insert(pg);
        p.decl_pages.push_back(pg);  // data blobs may share a page
      }
      if (pg >= next_page) next_page = pg + 1;
    }
  };
  auto claim_bytes = [&](uint64_t base, uint64_t size, const std::string& what) {
    for (const auto& [b, e] : data_ranges)
      if (base < e && b < base + size)
        fail(SimError::Kind::Misaligned, what + " overlaps another data blob");
    data_ranges.emplace_back(base, base + size);
  };

  // Pass 1: layout, address assignment, label definitions.
  for (const auto& top : unit.tops) {
    if (top.is_data) {
      const AsmData& d = top.data;
      DataSection ds;
      ds.label = d.label;
      ds.writable = d.writable;
      ds.base = d.addr.value_or(next_page * kPageSize);
      uint64_t size = std::max<uint64_t>(data_size(d), 1);
      claim(page_of(ds.base), page_of(ds.base + size - 1), false, "data " + d.label);
      claim_bytes(ds.base, size, "data " + d.label);
      define(d.label, ds.base, 0);
      p.data.push_back(std::move(ds));
    } else {
      const AsmSection& s = top.sec;
      CodeSection cs;
      cs.name = s.name;
      cs.pages = s.pages;
      cs.base = s.addr.value_or(next_page * kPageSize);
      if (cs.base % kPageSize != 0)
        fail(SimError::Kind::Misaligned,
             "section " + s.name + " address is not page aligned");
      claim(page_of(cs.base), page_of(cs.base) + s.pages - 1, true, "section " + s.name);
      uint64_t pc = cs.base;
      for (const auto& item : s.items) {
        if (item.is_label) {
          define(item.label, pc, 0);
        } else {
          Instruction in = item.instr;
          in.addr = pc;
          pc += in.size();
          cs.instrs.push_back(std::move(in));
        }
      }
      if (pc > cs.base + s.pages * kPageSize)
        fail(SimError::Kind::Misaligned,
             "section " + s.name + " overflows its declared " +
                 std::to_string(s.pages) + " page(s)");
      p.sections.push_back(std::move(cs));
    }
  }

  // Pass 2: operand and data resolution.
  for (auto& s : p.sections)
    for (auto& in : s.instrs) {
      resolve_operand(in.dst, labels, in.src_line);
      resolve_operand(in.src, labels, in.src_line);
    }
  size_t di = 0;
  for (const auto& top : unit.tops) {
    if (!top.is_data) continue;
    const AsmData& d = top.data;
    DataSection& ds = p.data[di++];
    switch (d.form) {
      case AsmData::Form::Bytes: ds.bytes = d.bytes; break;
      case AsmData::Form::Zero: ds.bytes.assign(d.zero_count, 0); break;
      case AsmData::Form::Qwords:
        for (const auto& q : d.qwords) {
          uint64_t v = q.value;
          if (q.is_label) {
            auto it = labels.find(q.label);
            if (it == labels.end())
              fail(SimError::Kind::UnresolvedLabel,
                   "data " + d.label + ": unresolved label '" + q.label + "'");
            v = it->second;
          }
          for (int b = 0; b < 8; ++b) ds.bytes.push_back(uint8_t(v >> (8 * b)));
        }
        break;
    }
  }

  p.labels = std::move(labels);
  if (!unit.entry.empty()) {
    p.entry_label = unit.entry;
    auto it = p.labels.find(unit.entry);
    if (it == p.labels.end())
      fail(SimError::Kind::UnresolvedLabel, "entry label '" + unit.entry + "' not defined");
    p.entry = it->second;
  } else {
    // default: first label of the first section
    for (const auto& top : unit.tops) {
      if (top.is_data) continue;
      for (const auto& item : top.sec.items)
        if (item.is_label) {
          p.entry_label = item.label;
          p.entry = p.labels.at(item.label);
          break;
        }
      break;
    }
    if (p.entry_label.empty())
      fail(SimError::Kind::Syntax, "program has no entry label");
  }
  p.source = emit_dsl(unit);
  p.index();
  return p;
}

namespace {

std::string fmt_num(uint64_t v) {
  if (v < 10) return std::to_string(v);
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::string fmt_signed(int64_t v) {
  if (v < 0) return "- " + fmt_num(uint64_t(-v));
  return "+ " + fmt_num(uint64_t(v));
}

std::string reg_name(uint8_t r) { return r == kSpReg ? "sp" : "r" + std::to_string(r); }

}  // namespace

std::string format_operand(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::None: return "";
    case Operand::Kind::Reg: return reg_name(o.reg);
    case Operand::Kind::Imm:
      if (!o.imm_label.empty()) return o.imm_label;
      return fmt_num(o.imm);
    case Operand::Kind::Mem: {
      std::string s = "[";
      bool first = true;
      auto put = [&](const std::string& term) {
        if (!first) s += " + ";
        s += term;
        first = false;
      };
      if (o.mem.base) put(reg_name(*o.mem.base));
      if (o.mem.index) put(reg_name(*o.mem.index) + "*" + std::to_string(o.mem.scale));
      if (!o.mem.label.empty()) put(o.mem.label);
      if (o.mem.disp != 0 || first) {
        if (first) put(fmt_num(uint64_t(o.mem.disp)));
        else s += " " + fmt_signed(o.mem.disp);
      }
      s += "]";
      return s;
    }
  }
  return "";
}

std::string format_instruction(const Instruction& in) {
  std::string s = opcode_name(in.op);
  if (in.op == Opcode::Marker) return s + " " + std::to_string(in.marker_id);
  std::string a = format_operand(in.dst), b = format_operand(in.src);
  if (!a.empty()) s += " " + a;
  if (!b.empty()) s += a.empty() ? " " + b : ", " + b;
  return s;
}

std::string emit_dsl(const AsmUnit& unit) {
  std::ostringstream os;
  if (!unit.entry.empty()) os << "entry " << unit.entry << "\n";
  for (const auto& top : unit.tops) {
    if (top.is_data) {
      const AsmData& d = top.data;
      os << "data " << d.label;
      if (d.addr) os << " @0x" << std::hex << *d.addr << std::dec;
      if (!d.writable) os << " ro";
      switch (d.form) {
        case AsmData::Form::Zero: os << " zero " << d.zero_count; break;
        case AsmData::Form::Bytes: {
          os << " = byte";
          char buf[4];
          for (uint8_t b : d.bytes) {
            std::snprintf(buf, sizeof buf, " %02x", b);
            os << buf;
          }
          break;
        }
        case AsmData::Form::Qwords: {
          os << " = qword ";
          for (size_t i = 0; i < d.qwords.size(); ++i) {
            if (i) os << ", ";
            const auto& q = d.qwords[i];
            os << (q.is_label ? q.label : fmt_num(q.value));
          }
          break;
        }
      }
      os << "\n";
    } else {
      const AsmSection& s = top.sec;
      os << "section " << s.name;
      if (s.addr) os << " @0x" << std::hex << *s.addr << std::dec;
      if (s.pages != 1) os << " pages " << s.pages;
      os << "\n";
      for (const auto& item : s.items) {
        if (item.is_label) os << item.label << ":\n";
        else os << "    " << format_instruction(item.instr) << "\n";
      }
    }
  }
  return os.str();
}

Program assemble(const std::string& source) { return resolve(parse_dsl(source)); }

std::string disassemble(const Program& p) { return p.source; }

bool structurally_equal(const Program& a, const Program& b) {
  if (a.labels != b.labels || a.entry != b.entry) return false;
  if (a.sections.size() != b.sections.size() || a.data.size() != b.data.size()) return false;
  for (size_t i = 0; i < a.sections.size(); ++i) {
    const auto& x = a.sections[i];
    const auto& y = b.sections[i];
    if (x.name != y.name || x.base != y.base || x.pages != y.pages ||
        !(x.instrs == y.instrs))
      return false;
  }
  for (size_t i = 0; i < a.data.size(); ++i) {
    const auto& x = a.data[i];
    const auto& y = b.data[i];
    if (x.label != y.label || x.base != y.base || x.writable != y.writable ||
        x.bytes != y.bytes)
      return false;
  }
  return true;
}

}  // namespace specsim
