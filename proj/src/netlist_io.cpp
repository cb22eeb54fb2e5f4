#include "upec/netlist_io.hpp"

#include <cctype>
#include <sstream>

namespace upec {

namespace {

struct Cursor {
  const std::string& s;
  size_t pos = 0;
  int line = 1;
  int col() const {
    size_t start = s.rfind('\n', pos == 0 ? 0 : pos - 1);
    return (int)(pos - (start == std::string::npos ? 0 : start + 1)) + 1;
  }
};

struct LineTokens {
  std::vector<std::string> toks;
  int line;
};

bool ident_char(char c) {
  return std::isalnum((unsigned char)c) || c == '_' || c == '.' || c == '=' ||
         c == ':' || c == '-';
}

std::vector<LineTokens> tokenize(const std::string& text) {
  std::vector<LineTokens> lines;
  int line_no = 1;
  size_t i = 0;
  while (i <= text.size()) {
    size_t end = text.find('\n', i);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(i, end - i);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::vector<std::string> toks;
    std::string cur;
    for (char c : line) {
      if (c == ',' || std::isspace((unsigned char)c)) {
        if (!cur.empty()) { toks.push_back(cur); cur.clear(); }
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) toks.push_back(cur);
    if (!toks.empty()) lines.push_back({toks, line_no});
    if (end == text.size()) break;
    i = end + 1;
    line_no++;
  }
  return lines;
}

uint64_t parse_uint(const std::string& t, int line) {
  try {
    size_t used = 0;
    uint64_t v = std::stoull(t, &used, 0);
    if (used != t.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (...) {
    throw ParseError("expected number, got '" + t + "'", line, 1);
  }
}

// 0x<hex>:<width>
std::pair<uint64_t, Width> parse_hexconst(const std::string& t, int line) {
  size_t colon = t.find(':');
  if (colon == std::string::npos || t.rfind("0x", 0) != 0)
    throw ParseError("expected hex constant 0x..:<width>, got '" + t + "'", line, 1);
  uint64_t v = 0;
  try {
    v = std::stoull(t.substr(2, colon - 2), nullptr, 16);
  } catch (...) {
    throw ParseError("bad hex constant '" + t + "'", line, 1);
  }
  uint64_t w = parse_uint(t.substr(colon + 1), line);
  if (w == 0 || w > 64) throw ParseError("constant width out of range in '" + t + "'", line, 1);
  if (mask_width(v, (Width)w) != v)
    throw ParseError("constant value does not fit its width in '" + t + "'", line, 1);
  return {v, (Width)w};
}

std::optional<CellOp> op_from_name(const std::string& n) {
  static const std::map<std::string, CellOp> ops = {
      {"not", CellOp::Not},     {"and", CellOp::And},   {"or", CellOp::Or},
      {"xor", CellOp::Xor},     {"mux", CellOp::Mux},   {"eq", CellOp::Eq},
      {"lt", CellOp::Lt},       {"add", CellOp::Add},   {"sub", CellOp::Sub},
      {"shl", CellOp::Shl},     {"shr", CellOp::Shr},   {"concat", CellOp::Concat},
      {"slice", CellOp::Slice}, {"const", CellOp::Const}};
  auto it = ops.find(n);
  if (it == ops.end()) return std::nullopt;
  return it->second;
}

}  // namespace

Circuit parse_netlist(const std::string& text) {
  Circuit c;
  auto lines = tokenize(text);
  for (auto& lt : lines) {
    auto& t = lt.toks;
    int ln = lt.line;
    const std::string& kw = t[0];
    auto want_at_least = [&](size_t n) {
      if (t.size() < n)
        throw ParseError("'" + kw + "' needs more operands", ln, 1);
    };
    if (kw == "module") {
      want_at_least(2);
      c.name = t[1];
    } else if (kw == "input") {
      want_at_least(3);
      c.inputs.push_back({t[1], (Width)parse_uint(t[2], ln)});
    } else if (kw == "reg") {
      want_at_least(4);
      Register r;
      r.out = t[1];
      r.width = (Width)parse_uint(t[2], ln);
      for (size_t i = 3; i < t.size(); i++) {
        if (t[i].rfind("next=", 0) == 0) r.next = t[i].substr(5);
        else if (t[i].rfind("reset=", 0) == 0) {
          auto [v, w] = parse_hexconst(t[i].substr(6), ln);
          if (w != r.width)
            throw ParseError("reset width differs from register width", ln, 1);
          r.reset_value = v;
        } else if (t[i] == "class=arch") r.cls = VarClass::Architectural;
        else if (t[i] == "class=micro") r.cls = VarClass::Microarchitectural;
        else throw ParseError("bad register attribute '" + t[i] + "'", ln, 1);
      }
      if (r.next.empty()) throw ParseError("register " + r.out + " missing next=", ln, 1);
      c.registers.push_back(std::move(r));
    } else if (kw == "mem") {
      want_at_least(4);
      MemoryArray m;
      m.id = t[1];
      m.addr_width = (Width)parse_uint(t[2], ln);
      m.data_width = (Width)parse_uint(t[3], ln);
      for (size_t i = 4; i < t.size(); i++) {
        if (t[i] == "blackbox") m.blackboxed = true;
        else throw ParseError("bad memory attribute '" + t[i] + "'", ln, 1);
      }
      c.memories.push_back(std::move(m));
    } else if (kw == "rport" || kw == "wport") {
      want_at_least(5);
      bool found = false;
      for (auto& m : c.memories) {
        if (m.id == t[1]) {
          MemPort p{t[2], t[3], t[4]};
          (kw == "rport" ? m.read_ports : m.write_ports).push_back(p);
          found = true;
          break;
        }
      }
      if (!found) throw ParseError("port for unknown memory '" + t[1] + "'", ln, 1);
    } else if (kw == "output") {
      want_at_least(2);
      c.outputs.push_back(t[1]);
    } else if (auto op = op_from_name(kw)) {
      want_at_least(3);
      if (t[2] != "=") throw ParseError("expected '=' after cell id", ln, 1);
      Cell cell;
      cell.op = *op;
      cell.out = t[1];
      std::vector<std::string> rest(t.begin() + 3, t.end());
      switch (*op) {
        case CellOp::Const: {
          if (rest.size() != 1) throw ParseError("const takes one literal", ln, 1);
          auto [v, w] = parse_hexconst(rest[0], ln);
          cell.const_value = v;
          cell.const_width = w;
          break;
        }
        case CellOp::Slice: {
          if (rest.size() != 3) throw ParseError("slice takes sig, hi, lo", ln, 1);
          cell.args = {rest[0]};
          cell.hi = (uint32_t)parse_uint(rest[1], ln);
          cell.lo = (uint32_t)parse_uint(rest[2], ln);
          break;
        }
        case CellOp::Shl:
        case CellOp::Shr: {
          if (rest.size() != 2) throw ParseError("shift takes sig, amount", ln, 1);
          cell.args = {rest[0]};
          cell.shift = (uint32_t)parse_uint(rest[1], ln);
          break;
        }
        default:
          cell.args = rest;
      }
      c.cells.push_back(std::move(cell));
    } else {
      throw ParseError("unknown directive '" + kw + "'", ln, 1);
    }
  }
  c.finalize();
  return c;
}

std::string print_netlist(const Circuit& c) {
  std::ostringstream os;
  char buf[32];
  auto hexconst = [&](uint64_t v, Width w) {
    snprintf(buf, sizeof buf, "0x%llx:%u", (unsigned long long)v, w);
    return std::string(buf);
  };
  os << "module " << c.name << "\n";
  for (auto& i : c.inputs) os << "input " << i.id << " " << i.width << "\n";
  for (auto& r : c.registers) {
    os << "reg " << r.out << " " << r.width << " next=" << r.next;
    if (r.reset_value) os << " reset=" << hexconst(*r.reset_value, r.width);
    if (r.cls == VarClass::Architectural) os << " class=arch";
    os << "\n";
  }
  for (auto& m : c.memories) {
    os << "mem " << m.id << " " << m.addr_width << " " << m.data_width;
    if (m.blackboxed) os << " blackbox";
    os << "\n";
    for (auto& p : m.read_ports)
      os << "rport " << m.id << " " << p.addr << " " << p.data << " " << p.enable << "\n";
    for (auto& p : m.write_ports)
      os << "wport " << m.id << " " << p.addr << " " << p.data << " " << p.enable << "\n";
  }
  for (auto& cell : c.cells) {
    os << cell_op_name(cell.op) << " " << cell.out << " =";
    switch (cell.op) {
      case CellOp::Const:
        os << " " << hexconst(cell.const_value, cell.const_width);
        break;
      case CellOp::Slice:
        os << " " << cell.args[0] << ", " << cell.hi << ", " << cell.lo;
        break;
      case CellOp::Shl:
      case CellOp::Shr:
        os << " " << cell.args[0] << ", " << cell.shift;
        break;
      default:
        for (size_t i = 0; i < cell.args.size(); i++)
          os << (i ? ", " : " ") << cell.args[i];
    }
    os << "\n";
  }
  for (auto& o : c.outputs) os << "output " << o << "\n";
  return os.str();
}

bool structurally_equal(const Circuit& a, const Circuit& b) {
  if (a.name != b.name) return false;
  if (a.inputs.size() != b.inputs.size() || a.registers.size() != b.registers.size() ||
      a.memories.size() != b.memories.size() || a.cells.size() != b.cells.size() ||
      a.outputs.size() != b.outputs.size())
    return false;
  for (size_t i = 0; i < a.inputs.size(); i++)
    if (a.inputs[i].id != b.inputs[i].id || a.inputs[i].width != b.inputs[i].width)
      return false;
  for (size_t i = 0; i < a.registers.size(); i++) {
    auto& x = a.registers[i];
    auto& y = b.registers[i];
    if (x.out != y.out || x.next != y.next || x.width != y.width ||
        x.reset_value != y.reset_value || x.cls != y.cls)
      return false;
  }
  for (size_t i = 0; i < a.memories.size(); i++) {
    auto& x = a.memories[i];
    auto& y = b.memories[i];
    if (x.id != y.id || x.addr_width != y.addr_width || x.data_width != y.data_width ||
        x.blackboxed != y.blackboxed ||
        x.read_ports.size() != y.read_ports.size() ||
        x.write_ports.size() != y.write_ports.size())
      return false;
    for (size_t p = 0; p < x.read_ports.size(); p++) {
      auto& u = x.read_ports[p];
      auto& v = y.read_ports[p];
      if (u.addr != v.addr || u.data != v.data || u.enable != v.enable) return false;
    }
    for (size_t p = 0; p < x.write_ports.size(); p++) {
      auto& u = x.write_ports[p];
      auto& v = y.write_ports[p];
      if (u.addr != v.addr || u.data != v.data || u.enable != v.enable) return false;
    }
  }
  for (size_t i = 0; i < a.cells.size(); i++) {
    auto& x = a.cells[i];
    auto& y = b.cells[i];
    if (x.op != y.op || x.out != y.out || x.args != y.args ||
        x.const_value != y.const_value || x.const_width != y.const_width ||
        x.hi != y.hi || x.lo != y.lo || x.shift != y.shift)
      return false;
  }
  return a.outputs == b.outputs;
}

}  // namespace upec
