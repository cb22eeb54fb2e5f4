#include "upec/bmc.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "upec/isa.hpp"

namespace upec {

namespace {

uint64_t bits_value(const Solver& s, const std::vector<Lit>& lits) {
  uint64_t v = 0;
  for (size_t i = 0; i < lits.size(); i++) {
    bool bit = s.model_value(var_of(lits[i]));
    if (!positive(lits[i])) bit = !bit;
    if (bit) v |= (uint64_t(1) << i);
  }
  return v;
}

Trace extract_trace(const MiterModel& m, const Formula& f,
                    const std::vector<std::string>& comparable) {
  const Solver& s = *f.solver;
  Trace t;
  t.k = f.k;
  for (int inst = 0; inst < 2; inst++) {
    t.state[inst].resize(f.k + 1);
    t.comb[inst].resize(f.k);
  }
  t.inputs.resize(f.k);
  for (int inst = 0; inst < 2; inst++) {
    for (auto& [key, lits] : f.varmap[inst]) {
      size_t at = key.rfind('@');
      std::string sig = key.substr(0, at);
      int cyc = std::stoi(key.substr(at + 1));
      uint64_t v = bits_value(s, lits);
      if (m.design.circuit.find_register(sig)) {
        t.state[inst][cyc].emplace(sig, v);
        if (cyc < f.k) t.comb[inst][cyc].emplace(sig, v);
      } else if (cyc < f.k) {
        t.comb[inst][cyc].emplace(sig, v);
      }
    }
  }
  for (auto& [key, lits] : f.input_map) {
    size_t at = key.rfind('@');
    t.inputs[std::stoi(key.substr(at + 1))].emplace(key.substr(0, at),
                                                    bits_value(s, lits));
  }
  // Earliest divergence over the commitment set.
  for (int cyc = 1; cyc <= f.k && t.divergence_cycle < 0; cyc++) {
    for (auto& rid : comparable) {
      if (t.state[0][cyc].at(rid) != t.state[1][cyc].at(rid)) {
        t.divergence_cycle = cyc;
        break;
      }
    }
  }
  if (t.divergence_cycle > 0) {
    for (auto& rid : comparable)
      if (t.state[0][t.divergence_cycle].at(rid) !=
          t.state[1][t.divergence_cycle].at(rid))
        t.differing.push_back(rid);
  }
  return t;
}

}  // namespace

std::string replay_counterexample(const MiterModel& m, const Trace& t) {
  const Circuit& c = m.design.circuit;
  for (int inst = 0; inst < 2; inst++) {
    SimState state;
    for (auto& r : c.registers) {
      auto it = t.state[inst][0].find(r.out);
      if (it == t.state[inst][0].end())
        return "IncompleteTrace: missing initial value of " + r.out;
      state.regs[r.out] = it->second;
    }
    for (int cyc = 0; cyc < t.k; cyc++) {
      // Drive blackboxed reads with the solver's chosen values.
      std::unordered_map<std::string, uint64_t> overrides;
      for (auto& mem : c.memories)
        for (auto& p : mem.read_ports) {
          auto it = t.comb[inst][cyc].find(p.data);
          if (it == t.comb[inst][cyc].end())
            return "IncompleteTrace: missing read value " + p.data;
          overrides[p.data] = it->second;
        }
      SimOptions opt;
      opt.read_overrides = &overrides;
      std::map<std::string, uint64_t> in;
      for (auto& i : c.inputs) {
        auto it = t.inputs[cyc].find(i.id);
        if (it == t.inputs[cyc].end())
          return "IncompleteTrace: missing input " + i.id;
        in[i.id] = it->second;
      }
      SignalValues v = evaluate(c, state, in, opt);
      for (auto& [sig, traced] : t.comb[inst][cyc]) {
        auto it = v.find(sig);
        if (it == v.end()) continue;
        if (it->second != traced) {
          std::ostringstream os;
          os << "mismatch at instance " << (inst + 1) << " cycle " << cyc
             << " signal " << sig << ": model 0x" << std::hex << traced
             << " replay 0x" << it->second;
          return os.str();
        }
      }
      SimState next;
      next.cycle = state.cycle + 1;
      for (auto& r : c.registers) next.regs[r.out] = mask_width(v.at(r.next), r.width);
      for (auto& r : c.registers) {
        uint64_t traced = t.state[inst][cyc + 1].at(r.out);
        if (next.regs[r.out] != traced) {
          std::ostringstream os;
          os << "mismatch at instance " << (inst + 1) << " state " << (cyc + 1)
             << " register " << r.out << ": model 0x" << std::hex << traced
             << " replay 0x" << next.regs[r.out];
          return os.str();
        }
      }
      state = std::move(next);
    }
  }
  return "";
}

Verdict check_upec(const MiterModel& m, const ProofObligation& ob, Scenario sc,
                   const ResourceLimits& limits) {
  if (ob.mode != ProofObligation::Bounded)
    throw Error("check_upec: obligation must be Bounded");
  // L-alerts must never be masked: every architectural id is compared.
  for (auto& a : m.architectural)
    if (std::find(ob.comparable.begin(), ob.comparable.end(), a) ==
        ob.comparable.end())
      throw Error("check_upec: comparable set must include architectural id " + a);

  auto t0 = std::chrono::steady_clock::now();
  Formula f = unroll(m, ob, sc);
  f.solver->time_limit_seconds = limits.timeout_seconds;
  f.solver->conflict_limit = limits.conflict_limit;
  auto st = f.solver->solve(f.active_assumptions(m.constraints));
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);

  Verdict v;
  v.k = ob.k;
  v.vars = f.solver->num_vars();
  v.gates = f.num_gates;
  v.clauses = f.solver->stats().learned;  // replaced below
  v.solve_seconds = dt.count();
  if (st == SolveStatus::ResourceLimit) {
    v.kind = Verdict::Inconclusive;
    return v;
  }
  if (st == SolveStatus::Unsat) {
    v.kind = Verdict::UnsatUpTo;
    return v;
  }
  v.kind = Verdict::AlertFound;
  v.trace = extract_trace(m, f, ob.comparable);
  std::string err = replay_counterexample(m, *v.trace);
  if (!err.empty()) throw Error("encoder soundness violation: " + err);
  if (v.trace->divergence_cycle < 0)
    throw Error("NoDivergence: SAT model without comparable divergence");
  return v;
}

PAlertCube cube_from_trace(const MiterModel& m, const Trace& t) {
  PAlertCube cube;
  if (t.divergence_cycle < 0) throw Error("cube_from_trace: no divergence");
  cube.source_cycle = t.divergence_cycle;
  cube.source_k = t.k;
  cube.differing.insert(t.differing.begin(), t.differing.end());
  for (auto& rid : m.comparable_micro) {
    if (cube.differing.count(rid)) continue;
    cube.pinned[rid] = t.state[0][t.divergence_cycle].at(rid);
  }
  return cube;
}

InductionResult induction_check(const MiterModel& m, const PAlertCube& cube,
                                const std::vector<PAlertCube>& known, int k_step,
                                const ResourceLimits& limits) {
  if (cube.differing.empty())
    throw Error("induction_check: cube has an empty differing set");
  for (auto& id : cube.differing)
    if (m.is_architectural(id))
      throw Error("induction_check: architectural id in cube: " + id);

  ProofObligation ob;
  ob.mode = ProofObligation::InductionStep;
  ob.k = k_step;
  ob.base_cube = &cube;
  ob.known_cubes = known;

  auto t0 = std::chrono::steady_clock::now();
  // The cube came from a trace of the same scenario; the scenario assumption
  // is consistent with (and subsumed by) the pinned registers.
  Formula f = unroll(m, ob, Scenario::Cached);
  f.solver->time_limit_seconds = limits.timeout_seconds;
  f.solver->conflict_limit = limits.conflict_limit;
  auto st = f.solver->solve(f.active_assumptions(m.constraints));
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);

  InductionResult r;
  r.solve_seconds = dt.count();
  if (st == SolveStatus::Unsat) {
    r.holds = true;
    return r;
  }
  if (st == SolveStatus::ResourceLimit)
    throw Error("induction_check: resource limit exceeded");
  r.holds = false;
  std::vector<std::string> full = m.comparable_micro;
  r.reaches = extract_trace(m, f, full);
  return r;
}

int find_dmem(const SoCDesign& d, Scenario sc) {
  // Directed measurement of the cache-interface transactions. The window
  // is the longest single memory transaction observable in the scenario.
  auto measure = [&](const std::string& prog, const MachineSetup& setup,
                     const std::string& begin_sig, auto done) -> int {
    MachineSetup s = setup;
    s.program = assemble(prog).words;
    SimState st = make_initial_state(d, s);
    auto t = run_circuit(d.circuit, st, {{"prot_en", 1}}, 100, nullptr,
                         {begin_sig, "serve_any", "pending_active", "accept_write"});
    int start = -1;
    for (size_t i = 0; i < t.watched.size(); i++) {
      if (start < 0 && t.watched[i].at(begin_sig)) start = (int)i;
      if (start >= 0 && done(t.watched, i)) return (int)i - start + 1;
    }
    throw Error("find_dmem: transaction never completed");
  };

  MachineSetup warm;
  warm.warm[0x10] = {0x20, 0, false};  // 0x2010 resident
  int read_hit = measure("li x1, 0x2010\nlw x2, 0(x1)\nhalt\n", warm, "present_read",
                         [](auto& w, size_t i) { return w[i].at("serve_any") != 0; });
  int write_tx = measure("li x1, 0x2010\nsw x2, 0(x1)\nhalt\n", warm, "accept_write",
                         [](auto& w, size_t i) {
                           return i > 0 && w[i - 1].at("pending_active") != 0 &&
                                  w[i].at("pending_active") == 0;
                         }) -
                 1;  // the completion probe fires one cycle after the window
  if (sc == Scenario::Cached) return std::max(read_hit, write_tx);
  int read_miss = measure("li x1, 0x2010\nlw x2, 0(x1)\nhalt\n", MachineSetup{},
                          "present_read",
                          [](auto& w, size_t i) { return w[i].at("serve_any") != 0; });
  return std::max(read_miss, write_tx);
}

std::optional<uint64_t> reachability_diameter(const Circuit& c, uint64_t max_states) {
  uint64_t state_bits = 0;
  for (auto& r : c.registers) state_bits += r.width;
  uint64_t input_bits = 0;
  for (auto& i : c.inputs) input_bits += i.width;
  if (state_bits > 20 || input_bits > 8 || !c.memories.empty()) return std::nullopt;

  auto pack = [&](const SimState& s) {
    uint64_t v = 0;
    int shift = 0;
    for (auto& r : c.registers) {
      v |= s.regs.at(r.out) << shift;
      shift += r.width;
    }
    return v;
  };
  auto unpack = [&](uint64_t v) {
    SimState s;
    int shift = 0;
    for (auto& r : c.registers) {
      s.regs[r.out] = (v >> shift) & ((r.width >= 64 ? ~0ull : (1ull << r.width) - 1));
      shift += r.width;
    }
    return s;
  };

  std::set<uint64_t> seen;
  std::vector<uint64_t> frontier;
  SimState init = SimState::reset_state(c);
  seen.insert(pack(init));
  frontier.push_back(pack(init));
  uint64_t depth = 0;
  while (!frontier.empty()) {
    std::vector<uint64_t> next;
    for (uint64_t sv : frontier) {
      SimState s = unpack(sv);
      for (uint64_t in = 0; in < (1ull << input_bits); in++) {
        std::map<std::string, uint64_t> inputs;
        int shift = 0;
        for (auto& i : c.inputs) {
          inputs[i.id] = (in >> shift) & ((1ull << i.width) - 1);
          shift += i.width;
        }
        SimState ns = step(c, s, inputs);
        uint64_t nv = pack(ns);
        if (seen.insert(nv).second) {
          next.push_back(nv);
          if (seen.size() > max_states) return std::nullopt;
        }
      }
    }
    if (!next.empty()) depth++;
    frontier = std::move(next);
  }
  return depth;
}

}  // namespace upec
