#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "specsim/assembler.hpp"
#include "specsim/error.hpp"
#include "specsim/fixtures.hpp"
#include "specsim/gadgets.hpp"
#include "specsim/interp.hpp"
#include "specsim/memhier.hpp"
#include "specsim/pipeline.hpp"

using namespace specsim;

namespace {

Program victim() { return assemble(fixture_text("victim_ssp")); }

std::set<uint64_t> benign_pages(const Program& p) {
  MachineState st = initial_state(p);
  give_stack(st, 0x10000, 1);
  st.sp() = 0x10000 - 0x80;
  st.mem.write(p.label("input_qwords"), 8, 8);
  InterpResult prof = interpret(p, st, 400000);
  return {prof.touched_pages.begin(), prof.touched_pages.end()};
}

}  // namespace

TEST_CASE("the victim trace yields all semantic classes the chain needs") {
  Program p = victim();
  auto catalog = gadget_search(p, benign_pages(p));
  CHECK(catalog.size() >= 10);  // library page holds plenty of ret tails
  auto classified = classify_gadgets(catalog);
  std::set<GadgetClass> classes;
  for (const auto& c : classified) classes.insert(c.cls);
  CHECK(classes.count(GadgetClass::PopReg));
  CHECK(classes.count(GadgetClass::LoadSecret));
  CHECK(classes.count(GadgetClass::ShiftAdd));
  CHECK(classes.count(GadgetClass::Deref));
  for (const auto& g : catalog) {
    CHECK(g.seq.size() <= 8);
    CHECK(g.seq.back().op == Opcode::Ret);
    for (const auto& in : g.seq) CHECK(!(is_control(in.op) && in.op != Opcode::Ret));
  }
}

TEST_CASE("pages outside the trace contribute no gadgets") {
  Program p = victim();
  auto all = gadget_search(p, benign_pages(p));
  std::set<uint64_t> none = benign_pages(p);
  none.erase(page_of(p.label("lib_touch")));
  auto fewer = gadget_search(p, none);
  CHECK(fewer.size() < all.size());
  for (const auto& g : fewer) CHECK(g.page != page_of(p.label("lib_touch")));
}

TEST_CASE("code without ret yields an empty catalog") {
  Program p = assemble("section s @0x1000\nmain:\n    mov r1, 5\n    halt\n");
  std::set<uint64_t> pages = {page_of(0x1000)};
  CHECK(gadget_search(p, pages).empty());
}

TEST_CASE("the shipped victim yields a five-gadget chain") {
  Program p = victim();
  auto catalog = gadget_search(p, benign_pages(p));
  RopChain chain = build_chain(catalog, p.label("secret_data"), p.label("probe_area"),
                               p.label("halt_stub"));
  CHECK(chain.gadgets.size() == 5);
  CHECK(chain.stack_image.size() == 7);
  // every gadget lies in an accessed page
  auto pages = benign_pages(p);
  for (const auto& g : chain.gadgets) CHECK(pages.count(g.page));
  // chain length respects the calibrated window budget
  CHECK(chain.gadgets.size() <= 20);
}

TEST_CASE("an unsatisfiable catalog names the missing class") {
  // only pop gadgets available: the load class is reported missing
  Program p = assemble(R"(section lib @0x5000
a:
    pop r2
    ret
b:
    pop r6
    ret
)");
  std::set<uint64_t> pages = {page_of(0x5000)};
  auto catalog = gadget_search(p, pages);
  try {
    build_chain(catalog, 0x8000, 0x200000, 0x1000);
    FAIL("expected unsatisfiable");
  } catch (const SimError& e) {
    CHECK(e.kind == SimError::Kind::Unsatisfiable);
    CHECK(std::string(e.what()).find("load-secret") != std::string::npos);
  }
}

TEST_CASE("architectural replay of the chain caches exactly the secret's element") {
  Program p = victim();
  auto catalog = gadget_search(p, benign_pages(p));
  const uint64_t secret = 0xa7;
  RopChain chain = build_chain(catalog, p.label("secret_data"), p.label("probe_area"),
                               p.label("halt_stub"));

  // oracle execution on a writable copy: plant the stack image, point the
  // machine at the first gadget, run architecturally
  MachineState st = initial_state(p);
  give_stack(st, 0x10000, 1);
  st.mem.write(p.label("secret_data"), secret, 8);
  uint64_t sp = 0x10000 - 0x100;
  st.sp() = sp;
  for (size_t i = 0; i < chain.stack_image.size(); ++i)
    st.mem.write(sp + i * 8, chain.stack_image[i], 8);
  st.pc = chain.gadgets[0].addr;

  SimConfig cfg;
  cfg.jitter_pct = 0;
  MemoryHierarchy hier(cfg, 1);
  int pid = hier.create_process();
  map_machine_pages(hier, pid, p, st);
  PredictorState pred(cfg);
  SpecRunResult r = run_speculative(p, st, hier, pid, pred, cfg, 1000);
  CHECK(r.state.status == RunStatus::Halted);

  for (uint64_t b = 0; b < 256; ++b) {
    bool cached = hier.any_level_contains(pid, p.label("probe_area") + b * 256);
    CHECK(cached == (b == secret));
  }
}
