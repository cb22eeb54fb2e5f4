#include "upec/isa.hpp"

#include <cctype>
#include <sstream>

namespace upec {

uint32_t Instr::encode() const {
  return (uint32_t(op) & 0xF) << 28 | (uint32_t(rd) & 0xF) << 24 |
         (uint32_t(rs1) & 0xF) << 20 | (uint32_t(rs2) & 0xF) << 16 | imm;
}

Instr Instr::decode(uint32_t w) {
  Instr i;
  i.op = Opcode((w >> 28) & 0xF);
  i.rd = (w >> 24) & 0xF;
  i.rs1 = (w >> 20) & 0xF;
  i.rs2 = (w >> 16) & 0xF;
  i.imm = w & 0xFFFF;
  return i;
}

std::string Instr::str() const {
  char buf[64];
  auto r = [](uint8_t n) { return "x" + std::to_string(n); };
  switch (op) {
    case Opcode::Halt: return "halt";
    case Opcode::Li:
      snprintf(buf, sizeof buf, "li x%u, 0x%x", rd, imm);
      return buf;
    case Opcode::Addi:
      if (rd == 0 && rs1 == 0 && imm == 0) return "nop";
      snprintf(buf, sizeof buf, "addi x%u, x%u, 0x%x", rd, rs1, imm);
      return buf;
    case Opcode::Lw:
      snprintf(buf, sizeof buf, "lw x%u, 0x%x(x%u)", rd, imm, rs1);
      return buf;
    case Opcode::Sw:
      snprintf(buf, sizeof buf, "sw x%u, 0x%x(x%u)", rs2, imm, rs1);
      return buf;
    case Opcode::Beq:
      snprintf(buf, sizeof buf, "beq x%u, x%u, %d", rs1, rs2, (int)(int16_t)imm);
      return buf;
  }
  return "halt";
}

namespace {

struct Tok {
  std::vector<std::string> parts;
  int line;
};

uint8_t parse_reg(const std::string& t, int ln) {
  if (t.size() < 2 || t[0] != 'x') throw AsmError("expected register, got '" + t + "'", ln);
  int n;
  try {
    n = std::stoi(t.substr(1));
  } catch (...) {
    throw AsmError("bad register '" + t + "'", ln);
  }
  if (n < 0 || n > 7) throw AsmError("register out of range (x0..x7): '" + t + "'", ln);
  return (uint8_t)n;
}

int64_t parse_imm(const std::string& t, int ln) {
  try {
    size_t used = 0;
    int64_t v = std::stoll(t, &used, 0);
    if (used != t.size()) throw std::invalid_argument("trail");
    return v;
  } catch (...) {
    throw AsmError("bad immediate '" + t + "'", ln);
  }
}

uint16_t check_u16(int64_t v, int ln) {
  if (v < 0 || v > 0xFFFF) throw AsmError("immediate out of range 0..0xffff", ln);
  return (uint16_t)v;
}

uint16_t check_s16(int64_t v, int ln) {
  if (v < -32768 || v > 32767) throw AsmError("branch offset out of range", ln);
  return (uint16_t)(int16_t)v;
}

// mem operand "off(xN)" -> (off, reg)
std::pair<int64_t, uint8_t> parse_mem_operand(const std::string& t, int ln) {
  size_t lp = t.find('(');
  size_t rp = t.find(')');
  if (lp == std::string::npos || rp == std::string::npos || rp < lp)
    throw AsmError("expected offset(reg), got '" + t + "'", ln);
  std::string off = t.substr(0, lp);
  if (off.empty()) off = "0";
  return {parse_imm(off, ln), parse_reg(t.substr(lp + 1, rp - lp - 1), ln)};
}

}  // namespace

Program assemble(const std::string& src) {
  std::istringstream is(src);
  std::string raw;
  int ln = 0;
  std::vector<Tok> toks;
  std::map<std::string, uint64_t> labels;
  uint64_t pc = 0;
  // Pass 1: tokenize and collect labels.
  std::vector<std::pair<Tok, uint64_t>> instrs;
  while (std::getline(is, raw)) {
    ln++;
    for (char stop : {'#', ';'}) {
      size_t p = raw.find(stop);
      if (p != std::string::npos) raw = raw.substr(0, p);
    }
    std::vector<std::string> parts;
    std::string cur;
    for (char c : raw) {
      if (std::isspace((unsigned char)c) || c == ',') {
        if (!cur.empty()) { parts.push_back(cur); cur.clear(); }
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) parts.push_back(cur);
    if (parts.empty()) continue;
    if (parts[0].back() == ':') {
      std::string label = parts[0].substr(0, parts[0].size() - 1);
      if (labels.count(label)) throw AsmError("duplicate label " + label, ln);
      labels[label] = pc;
      parts.erase(parts.begin());
      if (parts.empty()) continue;
    }
    instrs.push_back({{parts, ln}, pc});
    pc++;
  }
  // Pass 2: encode.
  Program prog;
  prog.symbols = labels;
  for (auto& [tok, at] : instrs) {
    auto& p = tok.parts;
    int l = tok.line;
    const std::string& m = p[0];
    auto want = [&](size_t n) {
      if (p.size() != n + 1)
        throw AsmError("'" + m + "' expects " + std::to_string(n) + " operands", l);
    };
    Instr i;
    if (m == "halt") {
      want(0);
      i.op = Opcode::Halt;
    } else if (m == "nop") {
      want(0);
      i.op = Opcode::Addi;
    } else if (m == "li") {
      want(2);
      i.op = Opcode::Li;
      i.rd = parse_reg(p[1], l);
      i.imm = check_u16(parse_imm(p[2], l), l);
    } else if (m == "addi") {
      want(3);
      i.op = Opcode::Addi;
      i.rd = parse_reg(p[1], l);
      i.rs1 = parse_reg(p[2], l);
      i.imm = check_u16(parse_imm(p[3], l), l);
    } else if (m == "lw") {
      want(2);
      i.op = Opcode::Lw;
      i.rd = parse_reg(p[1], l);
      auto [off, base] = parse_mem_operand(p[2], l);
      i.rs1 = base;
      i.imm = check_u16(off, l);
    } else if (m == "sw") {
      want(2);
      i.op = Opcode::Sw;
      i.rs2 = parse_reg(p[1], l);
      auto [off, base] = parse_mem_operand(p[2], l);
      i.rs1 = base;
      i.imm = check_u16(off, l);
    } else if (m == "beq") {
      want(3);
      i.op = Opcode::Beq;
      i.rs1 = parse_reg(p[1], l);
      i.rs2 = parse_reg(p[2], l);
      auto it = labels.find(p[3]);
      int64_t off;
      if (it != labels.end())
        off = (int64_t)it->second - (int64_t)at - 1;
      else
        off = parse_imm(p[3], l);
      i.imm = check_s16(off, l);
    } else {
      throw AsmError("unknown mnemonic '" + m + "'", l);
    }
    prog.words.push_back(i.encode());
  }
  return prog;
}

std::string disassemble(const Program& p) {
  std::ostringstream os;
  for (size_t i = 0; i < p.words.size(); i++)
    os << Instr::decode(p.words[i]).str() << "\n";
  return os.str();
}

}  // namespace upec
