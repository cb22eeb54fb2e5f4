#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "upec/builder.hpp"
#include "upec/netlist_io.hpp"
#include "upec/sim.hpp"

using namespace upec;

TEST_CASE("toggle register") {
  Circuit c = parse_netlist(
      "module tog\nreg r 1 next=n\nnot n = r\noutput r\n");
  SimState s = SimState::reset_state(c);
  CHECK(s.regs["r"] == 0);
  s = step(c, s, {});
  CHECK(s.regs["r"] == 1);
  s = step(c, s, {});
  CHECK(s.regs["r"] == 0);
  CHECK(s.cycle == 2);
}

TEST_CASE("add cell wraps modulo width") {
  NetBuilder b("adder");
  Wire x = b.constant(0x0f, 8);
  Wire y = b.constant(0x01, 8);
  Wire s = b.add(x, y, "sum");
  Wire big = b.add(b.constant(0xff, 8), b.constant(0x02, 8), "wrap");
  Wire r = b.reg("r", 8);
  b.set_next(r, s);
  b.output(s);
  b.output(big);
  Circuit c = b.take();
  auto v = evaluate(c, SimState::reset_state(c), {});
  CHECK(v.at("sum") == 0x10);
  CHECK(v.at("wrap") == 0x01);
}

TEST_CASE("memory write then read, read-before-write in a cycle") {
  Circuit c = parse_netlist(
      "module m\n"
      "input waddr 4\ninput wdata 8\ninput wen 1\ninput raddr 4\n"
      "mem ram 4 8\n"
      "rport ram raddr rdat ren\n"
      "const ren = 0x1:1\n"
      "reg sink 8 next=rdat\n"
      "wport ram waddr wdata wen\n"
      "output rdat\n");
  SimState s = SimState::reset_state(c);
  // Write 0xAB to address 3 while reading address 3: read sees old (0).
  SignalValues probe;
  s = step(c, s, {{"waddr", 3}, {"wdata", 0xab}, {"wen", 1}, {"raddr", 3}}, {}, &probe);
  CHECK(probe.at("rdat") == 0);
  // Next cycle the write is visible.
  s = step(c, s, {{"waddr", 0}, {"wdata", 0}, {"wen", 0}, {"raddr", 3}}, {}, &probe);
  CHECK(probe.at("rdat") == 0xab);
}

TEST_CASE("uninitialized read is zero-filled by default and errors on demand") {
  Circuit c = parse_netlist(
      "module m\n"
      "input raddr 4\n"
      "mem ram 4 8\n"
      "rport ram raddr rdat ren\n"
      "const ren = 0x1:1\n"
      "reg sink 8 next=rdat\n"
      "output rdat\n");
  SimState s = SimState::reset_state(c);
  SignalValues v = evaluate(c, s, {{"raddr", 5}});
  CHECK(v.at("rdat") == 0);
  SimOptions strict;
  strict.error_on_uninitialized_read = true;
  CHECK_THROWS_AS(evaluate(c, s, {{"raddr", 5}}, strict), Error);
}

TEST_CASE("blackboxed memories refuse concrete simulation") {
  Circuit c = parse_netlist(
      "module m\n"
      "input raddr 4\n"
      "mem ram 4 8 blackbox\n"
      "rport ram raddr rdat ren\n"
      "const ren = 0x1:1\n"
      "reg sink 8 next=rdat\n"
      "output rdat\n");
  SimState s;
  s.regs["sink"] = 0;
  CHECK_THROWS_AS(evaluate(c, s, {{"raddr", 0}}), Error);
}

TEST_CASE("determinism: identical runs produce identical traces") {
  Circuit c = parse_netlist(
      "module m\n"
      "input i 8\n"
      "reg a 8 next=n1\n"
      "reg b 8 next=a\n"
      "add n1 = a, i\n"
      "output b\n");
  auto r1 = run_circuit(c, SimState::reset_state(c), {{"i", 3}}, 20);
  auto r2 = run_circuit(c, SimState::reset_state(c), {{"i", 3}}, 20);
  REQUIRE(r1.snapshots.size() == r2.snapshots.size());
  for (size_t i = 0; i < r1.snapshots.size(); i++) {
    CHECK(r1.snapshots[i].regs == r2.snapshots[i].regs);
    CHECK(r1.snapshots[i].mems == r2.snapshots[i].mems);
  }
}

TEST_CASE("memory image round trip") {
  MemImage img = {{0xff00, 0xab}, {0x10, 0x1}};
  MemImage back = parse_mem_image(print_mem_image(img));
  CHECK(back == img);
  CHECK_THROWS_AS(parse_mem_image("zz\n"), Error);
}

TEST_CASE("vcd and text trace export") {
  Circuit c = parse_netlist("module t\nreg r 1 next=n\nnot n = r\noutput r\n");
  auto t = run_circuit(c, SimState::reset_state(c), {}, 3);
  std::string vcd = trace_to_vcd(c, t);
  CHECK(vcd.find("$var wire 1") != std::string::npos);
  CHECK(vcd.find("#3") != std::string::npos);
  std::string txt = trace_to_text(c, t, {"r"});
  CHECK(txt.find("cycle=0 r=0x0") != std::string::npos);
  CHECK(txt.find("cycle=1 r=0x1") != std::string::npos);
}
