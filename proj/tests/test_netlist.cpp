#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "upec/builder.hpp"
#include "upec/netlist.hpp"
#include "upec/netlist_io.hpp"

using namespace upec;

TEST_CASE("single register netlist parses") {
  Circuit c = parse_netlist(
      "module tiny\n"
      "input n1 8\n"
      "reg r1 8 next=n1\n"
      "output r1\n");
  CHECK(c.registers.size() == 1);
  CHECK(c.registers[0].width == 8);
  CHECK(check_well_formed(c).empty());
}

TEST_CASE("width mismatch is diagnosed on the offending cell") {
  Circuit c;
  c.name = "bad";
  c.inputs = {{"a", 8}, {"b", 4}};
  Cell g;
  g.op = CellOp::And;
  g.out = "g1";
  g.args = {"a", "b"};
  c.cells.push_back(g);
  auto diags = check_well_formed(c);
  REQUIRE(!diags.empty());
  bool found = false;
  for (auto& d : diags)
    if (d.kind == Diagnostic::WidthMismatch && d.subject == "g1") found = true;
  CHECK(found);
  CHECK_THROWS_AS(
      parse_netlist("module bad\ninput a 8\ninput b 4\nand g1 = a, b\n"), Error);
}

TEST_CASE("combinational cycle is diagnosed") {
  Circuit c;
  c.name = "loop";
  c.inputs = {{"a", 1}};
  Cell g1;
  g1.op = CellOp::And;
  g1.out = "x";
  g1.args = {"a", "y"};
  Cell g2;
  g2.op = CellOp::Or;
  g2.out = "y";
  g2.args = {"x", "a"};
  c.cells = {g1, g2};
  auto diags = check_well_formed(c);
  bool found = false;
  for (auto& d : diags)
    if (d.kind == Diagnostic::CombinationalCycle) found = true;
  CHECK(found);
}

TEST_CASE("registers break combinational cycles") {
  Circuit c = parse_netlist(
      "module tog\n"
      "reg r 1 next=n\n"
      "not n = r\n"
      "output r\n");
  CHECK(check_well_formed(c).empty());
}

TEST_CASE("print/parse round trip is structural identity") {
  NetBuilder b("rt");
  Wire a = b.input("a", 8);
  Wire r = b.reg("r", 8, VarClass::Architectural, 0x12);
  Wire s = b.add(a, r, "sum");
  b.set_next(r, s);
  b.mem("m", 4, 8, true);
  Wire en = b.one(1);
  b.rport("m", b.slice(s, 3, 0), en, "md");
  b.output(s);
  Circuit c = b.take();
  std::string p1 = print_netlist(c);
  Circuit c2 = parse_netlist(p1);
  CHECK(structurally_equal(c, c2));
  CHECK(print_netlist(c2) == p1);
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parse_netlist("module x\nbogus y z\n");
    FAIL("expected throw");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("classification is total and rejects memory-content annotations") {
  Circuit c = parse_netlist(
      "module m\n"
      "input n 4\n"
      "reg pc 4 next=n class=arch\n"
      "reg buf 4 next=n\n"
      "output pc\n");
  std::map<std::string, VarClass> ann = {
      {"pc", VarClass::Architectural}, {"buf", VarClass::Microarchitectural}};
  auto cls = classify_vars(c, ann);
  CHECK(cls.architectural == std::vector<std::string>{"pc"});
  CHECK(cls.microarchitectural.size() == 2);
  CHECK(cls.by_id.size() == c.registers.size());

  std::map<std::string, VarClass> missing = {{"pc", VarClass::Architectural}};
  CHECK_THROWS_AS(classify_vars(c, missing), Error);

  std::map<std::string, VarClass> bad = ann;
  bad["buf"] = VarClass::MemoryContent;
  CHECK_THROWS_AS(classify_vars(c, bad), Error);
}

TEST_CASE("empty circuit classifies to empty classification") {
  Circuit c;
  c.name = "empty";
  c.finalize();
  auto cls = classify_vars(c, {});
  CHECK(cls.by_id.empty());
  CHECK(cls.architectural.empty());
}

// Property: random register/cell DAGs round-trip through the text format.
TEST_CASE("random circuits round trip") {
  std::mt19937 rng(7);
  for (int iter = 0; iter < 50; iter++) {
    NetBuilder b("rand" + std::to_string(iter));
    std::vector<Wire> pool;
    pool.push_back(b.input("in0", 8));
    pool.push_back(b.input("in1", 8));
    int nregs = 1 + rng() % 3;
    std::vector<Wire> regs;
    for (int i = 0; i < nregs; i++)
      regs.push_back(b.reg("r" + std::to_string(i), 8,
                           (rng() & 1) ? VarClass::Architectural
                                       : VarClass::Microarchitectural,
                           rng() & 0xff));
    for (auto& r : regs) pool.push_back(r);
    int ncells = 1 + rng() % 12;
    for (int i = 0; i < ncells; i++) {
      Wire a = pool[rng() % pool.size()];
      Wire c2 = pool[rng() % pool.size()];
      switch (rng() % 5) {
        case 0: pool.push_back(b.and_(a, c2)); break;
        case 1: pool.push_back(b.xor_(a, c2)); break;
        case 2: pool.push_back(b.add(a, c2)); break;
        case 3: pool.push_back(b.mux(b.slice(a, 0, 0), a, c2)); break;
        case 4: pool.push_back(b.not_(a)); break;
      }
    }
    for (auto& r : regs) b.set_next(r, pool[rng() % pool.size()]);
    b.output(pool.back());
    Circuit c = b.take();
    CHECK(check_well_formed(c).empty());
    Circuit c2 = parse_netlist(print_netlist(c));
    CHECK(structurally_equal(c, c2));
  }
}
