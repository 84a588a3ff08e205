#include "specsim/gadgets.hpp"

#include <algorithm>

#include "specsim/error.hpp"

namespace specsim {

const char* gadget_class_name(GadgetClass c) {
  switch (c) {
    case GadgetClass::PopReg: return "pop-reg";
    case GadgetClass::LoadSecret: return "load-secret";
    case GadgetClass::ShiftAdd: return "shift-add";
    case GadgetClass::Deref: return "deref";
  }
  return "?";
}

std::vector<Gadget> gadget_search(const Program& p, const std::set<uint64_t>& accessed_pages) {
  std::vector<Gadget> out;
  for (const auto& sec : p.sections) {
    for (size_t i = 0; i < sec.instrs.size(); ++i) {
      if (!accessed_pages.count(page_of(sec.instrs[i].addr))) continue;
      // walk forward to a RET within 8 instructions, no control flow inside
      std::vector<Instruction> seq;
      bool ok = false;
      for (size_t j = i; j < sec.instrs.size() && seq.size() < 8; ++j) {
        const Instruction& in = sec.instrs[j];
        if (!accessed_pages.count(page_of(in.addr))) break;
        if (in.op == Opcode::Ret) {
          seq.push_back(in);
          ok = true;
          break;
        }
        if (is_control(in.op) || in.op == Opcode::Halt || in.op == Opcode::Panic) break;
        seq.push_back(in);
      }
      if (!ok) continue;
      Gadget g;
      g.addr = sec.instrs[i].addr;
      g.page = page_of(g.addr);
      g.seq = std::move(seq);
      out.push_back(std::move(g));
    }
  }
  // deduplicate by start address (section scan order may revisit)
  std::sort(out.begin(), out.end(), [](const Gadget& a, const Gadget& b) {
    return a.addr < b.addr;
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Gadget& a, const Gadget& b) { return a.addr == b.addr; }),
            out.end());
  return out;
}

std::vector<Classified> classify_gadgets(const std::vector<Gadget>& catalog) {
  std::vector<Classified> out;
  for (const Gadget& g : catalog) {
    // effective body: markers are transparent, the final RET is implied
    std::vector<const Instruction*> body;
    for (const auto& in : g.seq)
      if (in.op != Opcode::Marker && in.op != Opcode::Ret) body.push_back(&in);

    Classified c;
    c.g = g;
    if (body.size() == 1 && body[0]->op == Opcode::Pop) {
      c.cls = GadgetClass::PopReg;
      c.reg_out = body[0]->dst.reg;
      out.push_back(c);
    } else if (body.size() == 1 && body[0]->op == Opcode::Load &&
               body[0]->src.mem.base && !body[0]->src.mem.index &&
               body[0]->src.mem.disp == 0 && body[0]->src.mem.label.empty()) {
      // load rX, [rY]: secret load when X != Y, terminal dereference when X == Y
      c.reg_out = body[0]->dst.reg;
      c.reg_in = *body[0]->src.mem.base;
      c.cls = GadgetClass::LoadSecret;
      out.push_back(c);
      Classified d = c;
      d.cls = GadgetClass::Deref;
      out.push_back(d);
    } else if (body.size() == 2 && body[0]->op == Opcode::Shl && body[0]->dst.is_reg() &&
               body[0]->src.is_imm() && body[0]->src.imm == 8 &&
               body[1]->op == Opcode::Add && body[1]->dst.is_reg() &&
               body[1]->src.is_reg() && body[1]->dst.reg == body[0]->dst.reg) {
      c.cls = GadgetClass::ShiftAdd;
      c.reg_in = body[0]->dst.reg;   // value being scaled
      c.reg_in2 = body[1]->src.reg;  // base added in
      c.reg_out = body[0]->dst.reg;
      out.push_back(c);
    }
  }
  return out;
}

RopChain build_chain(const std::vector<Gadget>& catalog, uint64_t secret_addr,
                     uint64_t probe_base, uint64_t halt_pad) {
  std::vector<Classified> cls = classify_gadgets(catalog);
  auto pick = [&](GadgetClass want, auto&& pred) -> const Classified* {
    for (const auto& c : cls)
      if (c.cls == want && pred(c)) return &c;
    return nullptr;
  };
  auto missing = [](GadgetClass want) {
    fail(SimError::Kind::Unsatisfiable,
         std::string("no usable gadget of class ") + gadget_class_name(want));
  };

  // load-secret fixes the value register; everything else unifies around it
  const Classified* load = pick(GadgetClass::LoadSecret,
                                [](const Classified& c) { return c.reg_out != c.reg_in; });
  if (!load) missing(GadgetClass::LoadSecret);
  const Classified* pop_src = pick(GadgetClass::PopReg, [&](const Classified& c) {
    return c.reg_out == load->reg_in;
  });
  if (!pop_src) missing(GadgetClass::PopReg);
  const Classified* shift = pick(GadgetClass::ShiftAdd, [&](const Classified& c) {
    return c.reg_in == load->reg_out;
  });
  if (!shift) missing(GadgetClass::ShiftAdd);
  const Classified* pop_base = pick(GadgetClass::PopReg, [&](const Classified& c) {
    return c.reg_out == shift->reg_in2 && c.reg_out != load->reg_in;
  });
  if (!pop_base) missing(GadgetClass::PopReg);
  const Classified* deref = pick(GadgetClass::Deref, [&](const Classified& c) {
    return c.reg_in == shift->reg_out;
  });
  if (!deref) missing(GadgetClass::Deref);

  RopChain chain;
  chain.gadgets = {pop_base->g, pop_src->g, load->g, shift->g, deref->g};
  chain.secret_addr = secret_addr;
  chain.probe_base = probe_base;
  // stack image consumed as: [entry ret] -> pop_base(arg), ret -> pop_src(arg),
  // ret -> load, ret -> shift, ret -> deref, ret -> halt pad
  chain.stack_image = {probe_base,     pop_src->g.addr, secret_addr, load->g.addr,
                       shift->g.addr,  deref->g.addr,   halt_pad};
  return chain;
}

}  // namespace specsim
