#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "upec/isa.hpp"

using namespace upec;

TEST_CASE("li round trips") {
  Program p = assemble("li x1, 0x80\n");
  REQUIRE(p.words.size() == 1);
  Instr i = Instr::decode(p.words[0]);
  CHECK(i.op == Opcode::Li);
  CHECK(i.rd == 1);
  CHECK(i.imm == 0x80);
  CHECK(i.str() == "li x1, 0x80");
}

TEST_CASE("the six-instruction probe sequence assembles verbatim") {
  Program p = assemble(
      "li x1, 0xff07\n"
      "li x2, 0x2000\n"
      "addi x2, x2, 0x2a\n"
      "sw x3, 0(x2)\n"
      "lw x4, 0(x1)\n"
      "lw x5, 0(x4)\n");
  REQUIRE(p.words.size() == 6);
  Instr third = Instr::decode(p.words[2]);
  CHECK(third.op == Opcode::Addi);
  CHECK(third.imm == 0x2a);
  Instr fifth = Instr::decode(p.words[4]);
  CHECK(fifth.op == Opcode::Lw);
  CHECK(fifth.rd == 4);
  CHECK(fifth.rs1 == 1);
}

TEST_CASE("branch labels resolve relative") {
  Program p = assemble(
      "top: addi x1, x1, 1\n"
      "beq x1, x2, done\n"
      "beq x0, x0, top\n"
      "done: halt\n");
  REQUIRE(p.words.size() == 4);
  Instr b1 = Instr::decode(p.words[1]);
  CHECK(b1.op == Opcode::Beq);
  CHECK((int16_t)b1.imm == 1);  // to pc=3 from pc=1: 3-1-1
  Instr b2 = Instr::decode(p.words[2]);
  CHECK((int16_t)b2.imm == -3);
  CHECK(p.symbols.at("done") == 3);
}

TEST_CASE("assembler errors") {
  CHECK_THROWS_AS(assemble("frobnicate x1\n"), AsmError);
  CHECK_THROWS_AS(assemble("li x9, 1\n"), AsmError);
  CHECK_THROWS_AS(assemble("li x1, 0x10000\n"), AsmError);
  CHECK_THROWS_AS(assemble("lw x1, 0 x2\n"), AsmError);
}

TEST_CASE("encode/decode round trip over random instructions") {
  std::mt19937 rng(11);
  for (int i = 0; i < 2000; i++) {
    Instr in;
    in.op = (Opcode)(rng() % 6);
    in.rd = rng() % 8;
    in.rs1 = rng() % 8;
    in.rs2 = rng() % 8;
    in.imm = rng() & 0xffff;
    Instr out = Instr::decode(in.encode());
    CHECK(out.op == in.op);
    CHECK(out.rd == in.rd);
    CHECK(out.rs1 == in.rs1);
    CHECK(out.rs2 == in.rs2);
    CHECK(out.imm == in.imm);
  }
}

TEST_CASE("disassemble emits one mnemonic per word") {
  Program p = assemble("nop\nhalt\n");
  std::string d = disassemble(p);
  CHECK(d == "nop\nhalt\n");
}
