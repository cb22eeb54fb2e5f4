// Toy ISA for the bundled SoC: 8 registers (x0 hardwired to zero), 16-bit
// data/addresses, byte-granular memory. Fixed 32-bit encoding:
//   [31:28] opcode  [27:24] rd  [23:20] rs1  [19:16] rs2  [15:0] imm
// See docs/isa.md for the full manual.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "upec/netlist.hpp"

namespace upec {

enum class Opcode : uint8_t {
  Halt = 0x0,
  Li   = 0x1,  // rd <- imm16
  Addi = 0x2,  // rd <- rs1 + sext8... imm is 16-bit, rd <- rs1 + imm
  Lw   = 0x3,  // rd <- zext(mem[rs1 + imm])
  Sw   = 0x4,  // mem[rs1 + imm] <- low8(rs2)
  Beq  = 0x5,  // if rs1 == rs2: pc <- pc + 1 + simm16
};

struct Instr {
  Opcode op = Opcode::Halt;
  uint8_t rd = 0, rs1 = 0, rs2 = 0;
  uint16_t imm = 0;

  uint32_t encode() const;
  static Instr decode(uint32_t word);
  std::string str() const;
};

struct Program {
  std::vector<uint32_t> words;
  uint64_t entry = 0;
  std::map<std::string, uint64_t> symbols;
};

struct AsmError : Error {
  int line;
  AsmError(const std::string& msg, int line)
      : Error(msg + " at line " + std::to_string(line)), line(line) {}
};

// Assembles the toy assembly dialect:
//   li x1, 0xff00       addi x2, x2, 5      lw x4, 0(x1)
//   sw x3, 0(x2)        beq x1, x2, label   halt      nop
// Labels "name:"; comments '#' and ';'. nop encodes as addi x0, x0, 0.
Program assemble(const std::string& src);
std::string disassemble(const Program& p);

}  // namespace upec
