#include "upec/sim.hpp"

#include <algorithm>
#include <sstream>

namespace upec {

SimState SimState::reset_state(const Circuit& c) {
  SimState s;
  for (auto& r : c.registers)
    s.regs[r.out] = r.reset_value ? *r.reset_value : 0;
  for (auto& m : c.memories)
    if (!m.blackboxed) s.mems[m.id] = {};
  return s;
}

SignalValues evaluate(const Circuit& c, const SimState& s,
                      const std::map<std::string, uint64_t>& in,
                      const SimOptions& opt) {
  if (!c.finalized) throw Error("evaluate: circuit not finalized");
  for (auto& m : c.memories)
    if (m.blackboxed && !opt.read_overrides)
      throw Error("evaluate: blackboxed memory " + m.id + " cannot be simulated concretely");

  SignalValues v;
  v.reserve(c.widths.size());
  for (auto& i : c.inputs) {
    auto it = in.find(i.id);
    if (it == in.end()) throw Error("evaluate: missing input " + i.id);
    v[i.id] = mask_width(it->second, i.width);
  }
  for (auto& r : c.registers) {
    auto it = s.regs.find(r.out);
    if (it == s.regs.end()) throw Error("evaluate: state missing register " + r.out);
    v[r.out] = mask_width(it->second, r.width);
  }

  for (auto& stepi : c.eval_order) {
    if (stepi.is_cell) {
      const Cell& cell = c.cells[stepi.index];
      auto a = [&](size_t i) { return v.at(cell.args[i]); };
      Width ow = c.width_of(cell.out);
      uint64_t out = 0;
      switch (cell.op) {
        case CellOp::Not: out = ~a(0); break;
        case CellOp::And: out = a(0) & a(1); break;
        case CellOp::Or: out = a(0) | a(1); break;
        case CellOp::Xor: out = a(0) ^ a(1); break;
        case CellOp::Mux: out = a(0) ? a(1) : a(2); break;
        case CellOp::Eq: out = a(0) == a(1); break;
        case CellOp::Lt: out = a(0) < a(1); break;
        case CellOp::Add: out = a(0) + a(1); break;
        case CellOp::Sub: out = a(0) - a(1); break;
        case CellOp::Shl: out = cell.shift >= 64 ? 0 : a(0) << cell.shift; break;
        case CellOp::Shr: out = cell.shift >= 64 ? 0 : a(0) >> cell.shift; break;
        case CellOp::Concat: out = (a(0) << c.width_of(cell.args[1])) | a(1); break;
        case CellOp::Slice: out = a(0) >> cell.lo; break;
        case CellOp::Const: out = cell.const_value; break;
      }
      v[cell.out] = mask_width(out, ow);
    } else {
      const MemoryArray& m = c.memories[stepi.index];
      const MemPort& p = m.read_ports[stepi.port];
      uint64_t en = v.at(p.enable);
      uint64_t addr = v.at(p.addr);
      uint64_t data = 0;
      if (opt.read_overrides && opt.read_overrides->count(p.data)) {
        data = opt.read_overrides->at(p.data);
      } else if (en) {
        auto& img = s.mems.at(m.id);
        auto it = img.find(addr);
        if (it != img.end()) {
          data = it->second;
        } else if (opt.error_on_uninitialized_read) {
          std::ostringstream os;
          os << "read of uninitialized address 0x" << std::hex << addr
             << " in memory " << m.id;
          throw Error(os.str());
        }
      }
      v[p.data] = mask_width(data, m.data_width);
    }
  }
  return v;
}

SimState step(const Circuit& c, const SimState& s,
              const std::map<std::string, uint64_t>& in,
              const SimOptions& opt, SignalValues* probe) {
  SignalValues v = evaluate(c, s, in, opt);
  SimState ns;
  ns.cycle = s.cycle + 1;
  for (auto& r : c.registers)
    ns.regs[r.out] = mask_width(v.at(r.next), r.width);
  ns.mems = s.mems;
  // Writes apply after all reads of the cycle (read-before-write). Later
  // write ports win on address collisions within the same cycle.
  for (auto& m : c.memories) {
    auto it = ns.mems.find(m.id);
    if (it == ns.mems.end()) continue;  // blackboxed under replay overrides
    for (auto& p : m.write_ports)
      if (v.at(p.enable)) it->second[v.at(p.addr)] = v.at(p.data);
  }
  if (probe) *probe = std::move(v);
  return ns;
}

ExecTrace run_circuit(const Circuit& c, SimState initial,
                      const std::map<std::string, uint64_t>& in,
                      uint64_t max_cycles,
                      const std::function<bool(const SignalValues&, const SimState&)>& stop,
                      const std::vector<std::string>& watch,
                      const SimOptions& opt) {
  ExecTrace t;
  t.snapshots.push_back(initial);
  SimState cur = std::move(initial);
  for (uint64_t i = 0; i < max_cycles; i++) {
    SignalValues v;
    SimState next = step(c, cur, in, opt, &v);
    t.inputs.push_back(in);
    if (!watch.empty()) {
      SignalValues w;
      for (auto& s : watch) w[s] = v.at(s);
      t.watched.push_back(std::move(w));
    }
    t.snapshots.push_back(next);
    bool done = stop && stop(v, next);
    cur = std::move(next);
    if (done) {
      t.terminal = TerminalReason::Halt;
      return t;
    }
  }
  t.terminal = TerminalReason::MaxCycles;
  return t;
}

std::string trace_to_text(const Circuit& c, const ExecTrace& t,
                          const std::vector<std::string>& signals) {
  std::ostringstream os;
  for (size_t i = 0; i < t.snapshots.size(); i++) {
    os << "cycle=" << t.snapshots[i].cycle;
    for (auto& sig : signals) {
      auto it = t.snapshots[i].regs.find(sig);
      if (it != t.snapshots[i].regs.end())
        os << " " << sig << "=0x" << std::hex << it->second << std::dec;
    }
    os << "\n";
  }
  return os.str();
}

std::string trace_to_vcd(const Circuit& c, const ExecTrace& t) {
  std::ostringstream os;
  os << "$date today $end\n$timescale 1ns $end\n";
  os << "$scope module " << c.name << " $end\n";
  // Two-character printable identifiers.
  auto code = [](size_t i) {
    std::string s;
    s += (char)('!' + i % 92);
    s += (char)('!' + (i / 92) % 92);
    return s;
  };
  std::vector<std::string> ids;
  for (size_t i = 0; i < c.registers.size(); i++) {
    ids.push_back(code(i));
    os << "$var wire " << c.registers[i].width << " " << ids.back() << " "
       << c.registers[i].out << " $end\n";
  }
  os << "$upscope $end\n$enddefinitions $end\n";
  for (size_t cyc = 0; cyc < t.snapshots.size(); cyc++) {
    os << "#" << cyc << "\n";
    for (size_t i = 0; i < c.registers.size(); i++) {
      uint64_t v = t.snapshots[cyc].regs.at(c.registers[i].out);
      if (cyc > 0 && t.snapshots[cyc - 1].regs.at(c.registers[i].out) == v) continue;
      if (c.registers[i].width == 1) {
        os << (v ? '1' : '0') << ids[i] << "\n";
      } else {
        os << "b";
        for (int b = c.registers[i].width - 1; b >= 0; b--)
          os << ((v >> b) & 1);
        os << " " << ids[i] << "\n";
      }
    }
  }
  return os.str();
}

MemImage parse_mem_image(const std::string& text) {
  MemImage img;
  std::istringstream is(text);
  std::string line;
  int ln = 0;
  while (std::getline(is, line)) {
    ln++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t colon = line.find(':');
    if (colon == std::string::npos) {
      bool blank = true;
      for (char ch : line)
        if (!std::isspace((unsigned char)ch)) blank = false;
      if (blank) continue;
      throw Error("memory image: missing ':' on line " + std::to_string(ln));
    }
    try {
      uint64_t addr = std::stoull(line.substr(0, colon), nullptr, 16);
      uint64_t val = std::stoull(line.substr(colon + 1), nullptr, 16);
      img[addr] = val;
    } catch (...) {
      throw Error("memory image: bad hex on line " + std::to_string(ln));
    }
  }
  return img;
}

std::string print_mem_image(const MemImage& img) {
  std::vector<std::pair<uint64_t, uint64_t>> entries(img.begin(), img.end());
  std::sort(entries.begin(), entries.end());
  std::ostringstream os;
  for (auto& [a, v] : entries)
    os << std::hex << a << ": " << v << "\n" << std::dec;
  return os.str();
}

}  // namespace upec
