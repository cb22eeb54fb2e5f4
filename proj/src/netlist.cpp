#include "upec/netlist.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace upec {

const char* cell_op_name(CellOp op) {
  switch (op) {
    case CellOp::Not: return "not";
    case CellOp::And: return "and";
    case CellOp::Or: return "or";
    case CellOp::Xor: return "xor";
    case CellOp::Mux: return "mux";
    case CellOp::Eq: return "eq";
    case CellOp::Lt: return "lt";
    case CellOp::Add: return "add";
    case CellOp::Sub: return "sub";
    case CellOp::Shl: return "shl";
    case CellOp::Shr: return "shr";
    case CellOp::Concat: return "concat";
    case CellOp::Slice: return "slice";
    case CellOp::Const: return "const";
  }
  return "?";
}

std::string Diagnostic::str() const {
  static const char* names[] = {
      "undriven-signal", "multiple-drivers", "unknown-signal",
      "width-mismatch",  "combinational-cycle", "bad-cell",
      "bad-memory",      "bad-register"};
  std::ostringstream os;
  os << names[kind] << " [" << subject << "]: " << message;
  return os.str();
}

Width Circuit::width_of(const std::string& sig) const {
  auto it = widths.find(sig);
  if (it == widths.end()) throw Error("unknown signal: " + sig);
  return it->second;
}

const Register* Circuit::find_register(const std::string& id) const {
  for (auto& r : registers)
    if (r.out == id) return &r;
  return nullptr;
}

const MemoryArray* Circuit::find_memory(const std::string& id) const {
  for (auto& m : memories)
    if (m.id == id) return &m;
  return nullptr;
}

Width Circuit::cell_out_width(const Cell& c) const {
  auto w = [&](size_t i) { return width_of(c.args.at(i)); };
  switch (c.op) {
    case CellOp::Not:
      if (c.args.size() != 1) throw Error("not: arity 1 expected on " + c.out);
      return w(0);
    case CellOp::And:
    case CellOp::Or:
    case CellOp::Xor:
    case CellOp::Add:
    case CellOp::Sub:
      if (c.args.size() != 2) throw Error(std::string(cell_op_name(c.op)) + ": arity 2 expected on " + c.out);
      if (w(0) != w(1)) throw Error(std::string(cell_op_name(c.op)) + ": operand widths differ on " + c.out);
      return w(0);
    case CellOp::Eq:
    case CellOp::Lt:
      if (c.args.size() != 2) throw Error(std::string(cell_op_name(c.op)) + ": arity 2 expected on " + c.out);
      if (w(0) != w(1)) throw Error(std::string(cell_op_name(c.op)) + ": operand widths differ on " + c.out);
      return 1;
    case CellOp::Mux:
      if (c.args.size() != 3) throw Error("mux: arity 3 expected on " + c.out);
      if (w(0) != 1) throw Error("mux: select must be 1 bit on " + c.out);
      if (w(1) != w(2)) throw Error("mux: branch widths differ on " + c.out);
      return w(1);
    case CellOp::Shl:
    case CellOp::Shr:
      if (c.args.size() != 1) throw Error("shift: arity 1 expected on " + c.out);
      return w(0);
    case CellOp::Concat:
      if (c.args.size() != 2) throw Error("concat: arity 2 expected on " + c.out);
      if (w(0) + w(1) > 64) throw Error("concat: result exceeds 64 bits on " + c.out);
      return w(0) + w(1);
    case CellOp::Slice:
      if (c.args.size() != 1) throw Error("slice: arity 1 expected on " + c.out);
      if (c.hi < c.lo || c.hi >= w(0)) throw Error("slice: bad range on " + c.out);
      return c.hi - c.lo + 1;
    case CellOp::Const:
      if (!c.args.empty()) throw Error("const: no operands expected on " + c.out);
      if (c.const_width == 0 || c.const_width > 64) throw Error("const: bad width on " + c.out);
      return c.const_width;
  }
  throw Error("bad cell op on " + c.out);
}

void Circuit::finalize() {
  widths.clear();
  drivers.clear();
  eval_order.clear();

  auto claim = [&](const std::string& sig, Width w, Driver d) {
    if (w == 0 || w > 64) throw Error("signal " + sig + ": width must be in 1..64");
    auto [it, fresh] = drivers.emplace(sig, d);
    if (!fresh) throw Error("signal " + sig + " has multiple drivers");
    widths[sig] = w;
  };

  for (int i = 0; i < (int)inputs.size(); i++)
    claim(inputs[i].id, inputs[i].width, {Driver::Input, i, -1});
  for (int i = 0; i < (int)registers.size(); i++)
    claim(registers[i].out, registers[i].width, {Driver::RegOut, i, -1});
  for (int i = 0; i < (int)memories.size(); i++)
    for (int p = 0; p < (int)memories[i].read_ports.size(); p++)
      claim(memories[i].read_ports[p].data, memories[i].data_width,
            {Driver::MemRead, i, p});
  // Cell widths can depend on other cells; resolve iteratively.
  std::vector<int> pending(cells.size());
  for (size_t i = 0; i < cells.size(); i++) pending[i] = (int)i;
  while (!pending.empty()) {
    std::vector<int> next;
    bool progress = false;
    for (int ci : pending) {
      const Cell& c = cells[ci];
      bool ready = true;
      for (auto& a : c.args)
        if (!widths.count(a)) { ready = false; break; }
      if (!ready) { next.push_back(ci); continue; }
      claim(c.out, cell_out_width(c), {Driver::CellOut, ci, -1});
      progress = true;
    }
    if (!progress) {
      // Either a reference to a signal that does not exist anywhere, or a
      // width-dependency cycle (which is also a combinational cycle).
      const Cell& c = cells[next.front()];
      for (auto& a : c.args)
        if (!widths.count(a))
          throw Error("cell " + c.out + " references unknown or cyclic signal " + a);
      throw Error("combinational cycle involving cell " + c.out);
    }
    pending = std::move(next);
  }

  // Check references that are pure consumers.
  auto need = [&](const std::string& sig, const std::string& who) {
    if (!widths.count(sig)) throw Error(who + " references unknown signal " + sig);
  };
  for (auto& r : registers) {
    need(r.next, "register " + r.out);
    if (width_of(r.next) != r.width)
      throw Error("register " + r.out + ": next width mismatch");
    if (r.reset_value && mask_width(*r.reset_value, r.width) != *r.reset_value)
      throw Error("register " + r.out + ": reset value wider than register");
  }
  for (auto& m : memories) {
    for (auto& p : m.read_ports) {
      need(p.addr, "mem " + m.id);
      need(p.enable, "mem " + m.id);
      if (width_of(p.addr) != m.addr_width || width_of(p.enable) != 1)
        throw Error("mem " + m.id + ": read port width mismatch");
    }
    for (auto& p : m.write_ports) {
      need(p.addr, "mem " + m.id);
      need(p.data, "mem " + m.id);
      need(p.enable, "mem " + m.id);
      if (width_of(p.addr) != m.addr_width || width_of(p.data) != m.data_width ||
          width_of(p.enable) != 1)
        throw Error("mem " + m.id + ": write port width mismatch");
    }
  }
  for (auto& o : outputs) need(o, "output list");

  // Topological order over combinational nodes (cells + memory read ports).
  // Register outputs and inputs are sources; read-port data depends on the
  // port's addr and enable signals.
  struct Node { bool is_cell; int index; int port; };
  std::vector<Node> nodes;
  std::unordered_map<std::string, int> node_of_sig;  // driven signal -> node
  for (int i = 0; i < (int)cells.size(); i++) {
    node_of_sig[cells[i].out] = (int)nodes.size();
    nodes.push_back({true, i, -1});
  }
  for (int i = 0; i < (int)memories.size(); i++)
    for (int p = 0; p < (int)memories[i].read_ports.size(); p++) {
      node_of_sig[memories[i].read_ports[p].data] = (int)nodes.size();
      nodes.push_back({false, i, p});
    }

  std::vector<std::vector<int>> succ(nodes.size());
  std::vector<int> indeg(nodes.size(), 0);
  auto add_dep = [&](const std::string& src, int dst_node) {
    auto it = node_of_sig.find(src);
    if (it == node_of_sig.end()) return;  // input or register: no edge
    succ[it->second].push_back(dst_node);
    indeg[dst_node]++;
  };
  for (int n = 0; n < (int)nodes.size(); n++) {
    if (nodes[n].is_cell) {
      for (auto& a : cells[nodes[n].index].args) add_dep(a, n);
    } else {
      const MemPort& p = memories[nodes[n].index].read_ports[nodes[n].port];
      add_dep(p.addr, n);
      add_dep(p.enable, n);
    }
  }
  std::vector<int> ready;
  for (int n = 0; n < (int)nodes.size(); n++)
    if (indeg[n] == 0) ready.push_back(n);
  while (!ready.empty()) {
    int n = ready.back();
    ready.pop_back();
    eval_order.push_back({nodes[n].is_cell, nodes[n].index, nodes[n].port});
    for (int s : succ[n])
      if (--indeg[s] == 0) ready.push_back(s);
  }
  if (eval_order.size() != nodes.size()) {
    for (int n = 0; n < (int)nodes.size(); n++)
      if (indeg[n] > 0 && nodes[n].is_cell)
        throw Error("combinational cycle involving cell " + cells[nodes[n].index].out);
    throw Error("combinational cycle through memory read port");
  }
  finalized = true;
}

std::vector<Diagnostic> check_well_formed(const Circuit& c) {
  std::vector<Diagnostic> out;
  Circuit copy = c;
  // Re-run the structural checks one violation at a time: finalize() throws
  // on the first problem, so collect what we can by direct inspection first.
  std::unordered_map<std::string, int> driver_count;
  std::unordered_map<std::string, Width> w;
  auto claim = [&](const std::string& sig, Width wd) {
    driver_count[sig]++;
    if (driver_count[sig] > 1)
      out.push_back({Diagnostic::MultipleDrivers, sig, "signal driven more than once"});
    else
      w[sig] = wd;
  };
  for (auto& i : c.inputs) claim(i.id, i.width);
  for (auto& r : c.registers) claim(r.out, r.width);
  for (auto& m : c.memories)
    for (auto& p : m.read_ports) claim(p.data, m.data_width);

  // Width resolution for cells, tolerant of unresolved operands.
  bool changed = true;
  std::vector<bool> resolved(c.cells.size(), false);
  while (changed) {
    changed = false;
    for (size_t i = 0; i < c.cells.size(); i++) {
      if (resolved[i]) continue;
      const Cell& cell = c.cells[i];
      bool ready = true;
      for (auto& a : cell.args)
        if (!w.count(a)) { ready = false; break; }
      if (!ready) continue;
      Circuit probe;  // cheap: use a scratch circuit exposing width_of
      probe.widths = w;
      try {
        Width ow = probe.cell_out_width(cell);
        claim(cell.out, ow);
      } catch (const Error& e) {
        out.push_back({Diagnostic::WidthMismatch, cell.out, e.what()});
        claim(cell.out, 1);  // keep going with a placeholder
      }
      resolved[i] = true;
      changed = true;
    }
  }
  for (size_t i = 0; i < c.cells.size(); i++) {
    if (!resolved[i]) {
      // Unresolvable operand: either unknown signal or part of a cycle;
      // the cycle check below reports cycles, so report unknowns here.
      for (auto& a : c.cells[i].args)
        if (!driver_count.count(a) && !w.count(a)) {
          bool is_cell_out = false;
          for (auto& c2 : c.cells)
            if (c2.out == a) { is_cell_out = true; break; }
          if (!is_cell_out)
            out.push_back({Diagnostic::UnknownSignal, c.cells[i].out,
                           "operand " + a + " is not driven anywhere"});
        }
    }
  }
  auto known = [&](const std::string& s) {
    if (w.count(s)) return true;
    for (auto& c2 : c.cells)
      if (c2.out == s) return true;
    return false;
  };
  for (auto& r : c.registers) {
    if (!known(r.next))
      out.push_back({Diagnostic::BadRegister, r.out, "next signal " + r.next + " unknown"});
    else if (w.count(r.next) && w[r.next] != r.width)
      out.push_back({Diagnostic::WidthMismatch, r.out, "next width differs from register width"});
    if (r.reset_value && mask_width(*r.reset_value, r.width) != *r.reset_value)
      out.push_back({Diagnostic::BadRegister, r.out, "reset value wider than register"});
  }
  for (auto& m : c.memories) {
    for (auto& p : m.read_ports)
      if (w.count(p.addr) && w[p.addr] != m.addr_width)
        out.push_back({Diagnostic::BadMemory, m.id, "read port addr width mismatch"});
    for (auto& p : m.write_ports) {
      if (w.count(p.addr) && w[p.addr] != m.addr_width)
        out.push_back({Diagnostic::BadMemory, m.id, "write port addr width mismatch"});
      if (w.count(p.data) && w[p.data] != m.data_width)
        out.push_back({Diagnostic::BadMemory, m.id, "write port data width mismatch"});
    }
    if (m.blackboxed && m.id.empty())
      out.push_back({Diagnostic::BadMemory, m.id, "unnamed memory"});
  }
  for (auto& o : c.outputs)
    if (!known(o))
      out.push_back({Diagnostic::UndrivenSignal, o, "output not driven"});

  // Cycle detection: DFS over cells + read ports.
  std::unordered_map<std::string, std::vector<std::string>> deps;
  for (auto& cell : c.cells) deps[cell.out] = cell.args;
  for (auto& m : c.memories)
    for (auto& p : m.read_ports) deps[p.data] = {p.addr, p.enable};
  std::unordered_map<std::string, int> mark;  // 0 unvisited, 1 on stack, 2 done
  std::vector<std::string> stack;
  std::function<bool(const std::string&)> dfs = [&](const std::string& s) -> bool {
    auto it = deps.find(s);
    if (it == deps.end()) return false;
    int& m = mark[s];
    if (m == 2) return false;
    if (m == 1) {
      // Report the cycle as the slice of the stack from s onward.
      std::string msg = "cycle:";
      bool in = false;
      for (auto& e : stack) {
        if (e == s) in = true;
        if (in) msg += " " + e;
      }
      msg += " -> " + s;
      out.push_back({Diagnostic::CombinationalCycle, s, msg});
      return true;
    }
    m = 1;
    stack.push_back(s);
    bool found = false;
    for (auto& a : it->second)
      if (dfs(a)) { found = true; break; }
    stack.pop_back();
    mark[s] = 2;
    return found;
  };
  for (auto& kv : deps)
    if (mark[kv.first] == 0 && dfs(kv.first)) break;  // one cycle report suffices

  return out;
}

VarClassification classify_vars(const Circuit& c,
                                const std::map<std::string, VarClass>& annotations) {
  VarClassification cls;
  std::vector<std::string> missing;
  for (auto& r : c.registers) {
    auto it = annotations.find(r.out);
    if (it == annotations.end()) {
      missing.push_back(r.out);
      continue;
    }
    if (it->second == VarClass::MemoryContent)
      throw Error("register " + r.out + " cannot be classified MemoryContent");
    cls.by_id[r.out] = it->second;
    cls.microarchitectural.push_back(r.out);
    if (it->second == VarClass::Architectural) cls.architectural.push_back(r.out);
  }
  if (!missing.empty()) {
    std::string msg = "missing classification for:";
    for (auto& m : missing) msg += " " + m;
    throw Error(msg);
  }
  for (auto& kv : annotations) {
    if (kv.second == VarClass::Architectural && c.find_memory(kv.first))
      throw Error("memory contents " + kv.first + " cannot be Architectural");
  }
  return cls;
}

}  // namespace upec
