#include <algorithm>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "upec/bmc.hpp"

namespace upec {

const char* scenario_name(Scenario s) {
  return s == Scenario::Cached ? "cached" : "not-cached";
}

namespace {

// Literal-level circuit encoder: Tseitin gates with structural hashing and
// constant folding. TRUE is a dedicated level-0 variable, so constants fold
// through the hash tables like everything else.
class Enc {
 public:
  explicit Enc(Solver& s) : S(s) {
    T = make_lit(S.new_var(), true);
    S.add_unit(T);
  }

  Solver& S;
  Lit T;
  Lit F() const { return neg(T); }
  uint64_t gates = 0;

  Lit fresh() { return make_lit(S.new_var(), true); }

  Lit mk_and(Lit a, Lit b) {
    if (a == F() || b == F()) return F();
    if (a == T) return b;
    if (b == T) return a;
    if (a == b) return a;
    if (a == neg(b)) return F();
    if (a > b) std::swap(a, b);
    uint64_t key = (uint64_t)a << 32 | (uint32_t)b;
    auto it = and_hash_.find(key);
    if (it != and_hash_.end()) return it->second;
    Lit t = fresh();
    S.add_clause({neg(t), a});
    S.add_clause({neg(t), b});
    S.add_clause({t, neg(a), neg(b)});
    and_hash_[key] = t;
    gates++;
    return t;
  }
  Lit mk_or(Lit a, Lit b) { return neg(mk_and(neg(a), neg(b))); }
  Lit mk_xor(Lit a, Lit b) {
    if (a == F()) return b;
    if (b == F()) return a;
    if (a == T) return neg(b);
    if (b == T) return neg(a);
    if (a == b) return F();
    if (a == neg(b)) return T;
    // Normalize polarity: xor(a,b) = xor(a^1,b)^1.
    bool flip = false;
    if (!positive(a)) { a = neg(a); flip = !flip; }
    if (!positive(b)) { b = neg(b); flip = !flip; }
    if (a > b) std::swap(a, b);
    uint64_t key = (uint64_t)a << 32 | (uint32_t)b;
    Lit t;
    auto it = xor_hash_.find(key);
    if (it != xor_hash_.end()) {
      t = it->second;
    } else {
      t = fresh();
      S.add_clause({neg(t), a, b});
      S.add_clause({neg(t), neg(a), neg(b)});
      S.add_clause({t, neg(a), b});
      S.add_clause({t, a, neg(b)});
      xor_hash_[key] = t;
      gates++;
    }
    return flip ? neg(t) : t;
  }
  Lit mk_mux(Lit s, Lit x, Lit y) {  // s ? x : y
    if (s == T) return x;
    if (s == F()) return y;
    if (x == y) return x;
    if (x == T && y == F()) return s;
    if (x == F() && y == T) return neg(s);
    if (x == T) return mk_or(s, y);
    if (x == F()) return mk_and(neg(s), y);
    if (y == T) return mk_or(neg(s), x);
    if (y == F()) return mk_and(s, x);
    if (x == neg(y)) return mk_xor(neg(s), x);
    auto key = std::make_tuple(s, x, y);
    auto it = mux_hash_.find(key);
    if (it != mux_hash_.end()) return it->second;
    Lit t = fresh();
    S.add_clause({neg(s), neg(x), t});
    S.add_clause({neg(s), x, neg(t)});
    S.add_clause({s, neg(y), t});
    S.add_clause({s, y, neg(t)});
    mux_hash_[key] = t;
    gates++;
    return t;
  }
  Lit mk_and_vec(const std::vector<Lit>& ls) {
    Lit acc = T;
    for (Lit l : ls) acc = mk_and(acc, l);
    return acc;
  }
  Lit mk_or_vec(const std::vector<Lit>& ls) {
    Lit acc = F();
    for (Lit l : ls) acc = mk_or(acc, l);
    return acc;
  }
  Lit mk_eq_vec(const std::vector<Lit>& a, const std::vector<Lit>& b) {
    Lit acc = T;
    for (size_t i = 0; i < a.size(); i++) acc = mk_and(acc, neg(mk_xor(a[i], b[i])));
    return acc;
  }
  // Unsigned a < b over equal-width vectors (LSB first).
  Lit mk_ult(const std::vector<Lit>& a, const std::vector<Lit>& b) {
    Lit lt = F();
    for (size_t i = 0; i < a.size(); i++) {
      Lit ai = a[i], bi = b[i];
      Lit eq = neg(mk_xor(ai, bi));
      lt = mk_or(mk_and(neg(ai), bi), mk_and(eq, lt));
    }
    return lt;
  }
  std::vector<Lit> mk_const(uint64_t v, Width w) {
    std::vector<Lit> out(w);
    for (Width i = 0; i < w; i++) out[i] = ((v >> i) & 1) ? T : F();
    return out;
  }
  std::vector<Lit> mk_add(const std::vector<Lit>& a, const std::vector<Lit>& b) {
    std::vector<Lit> out(a.size());
    Lit carry = F();
    for (size_t i = 0; i < a.size(); i++) {
      Lit s = mk_xor(mk_xor(a[i], b[i]), carry);
      Lit c =
          mk_or(mk_and(a[i], b[i]), mk_and(carry, mk_xor(a[i], b[i])));
      out[i] = s;
      carry = c;
    }
    return out;
  }
  std::vector<Lit> mk_sub(const std::vector<Lit>& a, const std::vector<Lit>& b) {
    // a + ~b + 1
    std::vector<Lit> out(a.size());
    Lit carry = T;
    for (size_t i = 0; i < a.size(); i++) {
      Lit bi = neg(b[i]);
      Lit s = mk_xor(mk_xor(a[i], bi), carry);
      Lit c = mk_or(mk_and(a[i], bi), mk_and(carry, mk_xor(a[i], bi)));
      out[i] = s;
      carry = c;
    }
    return out;
  }
  // addr in [base, base+len) for a constant range.
  Lit mk_in_range(const std::vector<Lit>& addr, uint64_t base, uint64_t len) {
    Lit ge = neg(mk_ult(addr, mk_const(base, (Width)addr.size())));
    uint64_t top = base + len;
    Lit lt = (top >= (1ull << addr.size()))
                 ? T
                 : mk_ult(addr, mk_const(top, (Width)addr.size()));
    return mk_and(ge, lt);
  }
  // Conditional equality: cond (plus optional guard literal g, may be 0)
  // implies a == b.
  void imply_eq(Lit g, Lit cond, const std::vector<Lit>& a, const std::vector<Lit>& b) {
    for (size_t i = 0; i < a.size(); i++) {
      std::vector<Lit> c1 = {neg(cond), neg(a[i]), b[i]};
      std::vector<Lit> c2 = {neg(cond), a[i], neg(b[i])};
      if (g) {
        c1.push_back(neg(g));
        c2.push_back(neg(g));
      }
      S.add_clause(c1);
      S.add_clause(c2);
    }
  }

 private:
  std::unordered_map<uint64_t, Lit> and_hash_, xor_hash_;
  std::map<std::tuple<Lit, Lit, Lit>, Lit> mux_hash_;
};

using Bits = std::vector<Lit>;

struct Event {
  int instance;
  int cycle;
  int port;
  Lit en;
  Bits addr_full;
  Bits data;   // read data (fresh) or write data (expression)
  bool is_write;
};

struct ArrayKind {
  bool region_exempt = true;       // secret region excluded from coupling
  bool c4_guarded = false;         // coupling under the C4 assumption literal
};

}  // namespace

std::vector<Lit> Formula::active_assumptions(const ConstraintSet& cs) const {
  std::vector<Lit> out;
  for (auto& [kind, lit] : assumptions)
    if (cs.on(kind)) out.push_back(lit);
  return out;
}

const std::vector<Lit>& Formula::lits_of(int instance, const std::string& sig,
                                         int cycle) const {
  auto& vm = varmap[instance - 1];
  auto it = vm.find(sig + "@" + std::to_string(cycle));
  if (it == vm.end()) throw Error("formula: no mapping for " + sig + "@" +
                                  std::to_string(cycle));
  return it->second;
}

std::string Formula::varmap_json() const {
  std::ostringstream os;
  for (int i = 0; i < 2; i++) {
    for (auto& [key, lits] : varmap[i]) {
      size_t at = key.rfind('@');
      os << "{\"instance\":" << (i + 1) << ",\"signal\":\"" << key.substr(0, at)
         << "\",\"cycle\":" << key.substr(at + 1) << ",\"lits\":[";
      for (size_t b = 0; b < lits.size(); b++)
        os << (b ? "," : "") << lit_to_dimacs(lits[b]);
      os << "]}\n";
    }
  }
  return os.str();
}

Formula unroll(const MiterModel& m, const ProofObligation& ob, Scenario sc) {
  if (ob.k < 1) throw Error("unroll: k must be >= 1");
  const Circuit& c = m.design.circuit;
  if (!c.finalized) throw Error("unroll: circuit not finalized");

  Formula f;
  f.k = ob.k;
  f.solver = std::make_unique<Solver>();
  Enc e(*f.solver);

  auto key = [](const std::string& sig, int cyc) {
    return sig + "@" + std::to_string(cyc);
  };

  bool induction = ob.mode == ProofObligation::InductionStep;
  if (induction && !ob.base_cube) throw Error("unroll: induction needs a base cube");

  std::set<std::string> monitor_regs(m.design.monitor_registers.begin(),
                                     m.design.monitor_registers.end());

  // ---- initial state (cycle 0) ----
  // Both instances share initial-state variables wherever the UPEC property
  // assumes equality at t; that makes the two unrolled cones structurally
  // identical until a divergent memory value enters.
  std::array<std::map<std::string, Bits>, 2> state;
  auto fresh_bits = [&](Width w) {
    Bits b(w);
    for (Width i = 0; i < w; i++) b[i] = e.fresh();
    return b;
  };
  for (auto& r : c.registers) {
    bool per_instance = monitor_regs.count(r.out) ||
                        (induction && ob.base_cube->differing.count(r.out));
    if (per_instance) {
      state[0][r.out] = fresh_bits(r.width);
      state[1][r.out] = fresh_bits(r.width);
    } else {
      Bits b = fresh_bits(r.width);
      state[0][r.out] = b;
      state[1][r.out] = b;
      if (induction) {
        auto it = ob.base_cube->pinned.find(r.out);
        if (it != ob.base_cube->pinned.end()) {
          for (Width i = 0; i < r.width; i++)
            f.solver->add_unit((it->second >> i) & 1 ? b[i] : neg(b[i]));
        }
      }
    }
    f.varmap[0][key(r.out, 0)] = state[0][r.out];
    f.varmap[1][key(r.out, 0)] = state[1][r.out];
  }

  // ---- scenario assumption for the secret's cache line ----
  {
    uint32_t lines = m.design.params.geometry.lines;
    int idx_bits = 0;
    while ((1u << idx_bits) < lines) idx_bits++;
    uint32_t line = m.secret.base & (lines - 1);
    std::string vreg = m.design.cache_valid_prefix + std::to_string(line);
    std::string treg = m.design.cache_tag_prefix + std::to_string(line);
    if (state[0].count(vreg) && state[0].count(treg)) {
      Lit valid = state[0][vreg][0];
      Bits tag = state[0][treg];
      uint64_t want_tag = m.secret.base >> idx_bits;
      if (sc == Scenario::Cached) {
        f.solver->add_unit(valid);
        for (size_t i = 0; i < tag.size(); i++)
          f.solver->add_unit((want_tag >> i) & 1 ? tag[i] : neg(tag[i]));
      } else {
        // not cached: no valid copy under the secret's tag
        Lit tag_eq = e.mk_eq_vec(tag, e.mk_const(want_tag, (Width)tag.size()));
        f.solver->add_clause({neg(valid), neg(tag_eq)});
      }
    }
  }

  // ---- assumption literals for the named constraints ----
  for (auto kind : all_constraints())
    f.assumptions[kind] = e.fresh();

  // ---- unroll transitions ----
  std::map<std::string, std::vector<Event>> events;
  std::map<std::string, const MemoryArray*> arrays;
  for (auto& mem : c.memories) arrays[mem.id] = &mem;

  // Shared input bits per cycle.
  std::vector<std::map<std::string, Bits>> inputs(ob.k);
  for (int cyc = 0; cyc < ob.k; cyc++) {
    for (auto& in : c.inputs) {
      inputs[cyc][in.id] = fresh_bits(in.width);
      f.input_map[key(in.id, cyc)] = inputs[cyc][in.id];
    }
  }

  for (int cyc = 0; cyc < ob.k; cyc++) {
    for (int inst = 0; inst < 2; inst++) {
      std::map<std::string, Bits> vals;
      for (auto& in : c.inputs) vals[in.id] = inputs[cyc][in.id];
      for (auto& r : c.registers) vals[r.out] = state[inst][r.out];

      for (auto& stepi : c.eval_order) {
        if (stepi.is_cell) {
          const Cell& cell = c.cells[stepi.index];
          auto A = [&](size_t i) -> const Bits& { return vals.at(cell.args[i]); };
          Bits out;
          switch (cell.op) {
            case CellOp::Not: {
              out = A(0);
              for (auto& l : out) l = neg(l);
              break;
            }
            case CellOp::And: {
              const Bits &x = A(0), &y = A(1);
              out.resize(x.size());
              for (size_t i = 0; i < x.size(); i++) out[i] = e.mk_and(x[i], y[i]);
              break;
            }
            case CellOp::Or: {
              const Bits &x = A(0), &y = A(1);
              out.resize(x.size());
              for (size_t i = 0; i < x.size(); i++) out[i] = e.mk_or(x[i], y[i]);
              break;
            }
            case CellOp::Xor: {
              const Bits &x = A(0), &y = A(1);
              out.resize(x.size());
              for (size_t i = 0; i < x.size(); i++) out[i] = e.mk_xor(x[i], y[i]);
              break;
            }
            case CellOp::Mux: {
              Lit s = A(0)[0];
              const Bits &x = A(1), &y = A(2);
              out.resize(x.size());
              for (size_t i = 0; i < x.size(); i++) out[i] = e.mk_mux(s, x[i], y[i]);
              break;
            }
            case CellOp::Eq:
              out = {e.mk_eq_vec(A(0), A(1))};
              break;
            case CellOp::Lt:
              out = {e.mk_ult(A(0), A(1))};
              break;
            case CellOp::Add:
              out = e.mk_add(A(0), A(1));
              break;
            case CellOp::Sub:
              out = e.mk_sub(A(0), A(1));
              break;
            case CellOp::Shl: {
              const Bits& x = A(0);
              out.assign(x.size(), e.F());
              for (size_t i = 0; cell.shift + i < x.size(); i++)
                out[cell.shift + i] = x[i];
              break;
            }
            case CellOp::Shr: {
              const Bits& x = A(0);
              out.assign(x.size(), e.F());
              for (size_t i = cell.shift; i < x.size(); i++)
                out[i - cell.shift] = x[i];
              break;
            }
            case CellOp::Concat: {
              const Bits &hi = A(0), &lo = A(1);
              out = lo;
              out.insert(out.end(), hi.begin(), hi.end());
              break;
            }
            case CellOp::Slice: {
              const Bits& x = A(0);
              out.assign(x.begin() + cell.lo, x.begin() + cell.hi + 1);
              break;
            }
            case CellOp::Const:
              out = e.mk_const(cell.const_value, cell.const_width);
              break;
          }
          vals[cell.out] = std::move(out);
        } else {
          const MemoryArray& mem = c.memories[stepi.index];
          const MemPort& p = mem.read_ports[stepi.port];
          Lit en = vals.at(p.enable)[0];
          Bits data;
          if (en == e.F()) {
            data = e.mk_const(0, mem.data_width);
          } else {
            data = fresh_bits(mem.data_width);
            // Disabled ports read as zero (matches the simulator).
            for (auto& d : data) f.solver->add_clause({en, neg(d)});
            Event ev;
            ev.instance = inst;
            ev.cycle = cyc;
            ev.port = stepi.port;
            ev.en = en;
            ev.is_write = false;
            std::string fa_key = mem.id + ".r" + std::to_string(stepi.port);
            auto fa = m.design.port_full_addr.find(fa_key);
            ev.addr_full = fa != m.design.port_full_addr.end() ? vals.at(fa->second)
                                                               : vals.at(p.addr);
            ev.data = data;
            events[mem.id].push_back(std::move(ev));
          }
          vals[p.data] = std::move(data);
        }
      }

      // Write events.
      for (auto& [mem_id, mem] : arrays) {
        for (int wp = 0; wp < (int)mem->write_ports.size(); wp++) {
          const MemPort& p = mem->write_ports[wp];
          Lit en = vals.at(p.enable)[0];
          if (en == e.F()) continue;
          Event ev;
          ev.instance = inst;
          ev.cycle = cyc;
          ev.port = wp;
          ev.en = en;
          ev.is_write = true;
          std::string fa_key = mem_id + ".w" + std::to_string(wp);
          auto fa = m.design.port_full_addr.find(fa_key);
          ev.addr_full = fa != m.design.port_full_addr.end() ? vals.at(fa->second)
                                                             : vals.at(p.addr);
          ev.data = vals.at(p.data);
          events[mem_id].push_back(std::move(ev));
        }
      }

      // Record the transition's signal values and advance the state.
      for (auto& [sig, bits] : vals) f.varmap[inst][key(sig, cyc)] = bits;
      std::map<std::string, Bits> next;
      for (auto& r : c.registers) next[r.out] = vals.at(r.next);
      for (auto& r : c.registers) {
        state[inst][r.out] = next[r.out];
        f.varmap[inst][key(r.out, cyc + 1)] = next[r.out];
      }
    }
  }

  // ---- memory couplings ----
  Lit c4 = f.assumptions[ConstraintKind::EqualityOfNonProtectedMemory];
  for (auto& [mem_id, evs] : events) {
    ArrayKind kind;
    if (mem_id == m.design.instr_memory) kind.region_exempt = false;
    if (mem_id == m.design.cache_data_array) kind.c4_guarded = true;
    if (m.force_equal_secret) kind.region_exempt = false;
    Lit guard = kind.c4_guarded ? c4 : 0;

    std::vector<const Event*> reads, writes;
    for (auto& ev : evs)
      (ev.is_write ? writes : reads).push_back(&ev);

    // Cross-instance same-cycle same-port value coupling.
    for (auto* e1 : reads) {
      if (e1->instance != 0) continue;
      for (auto* e2 : reads) {
        if (e2->instance != 1 || e2->cycle != e1->cycle || e2->port != e1->port)
          continue;
        Lit cond = e.mk_and(e1->en, e2->en);
        cond = e.mk_and(cond, e.mk_eq_vec(e1->addr_full, e2->addr_full));
        if (kind.region_exempt)
          cond = e.mk_and(cond, neg(e.mk_in_range(e1->addr_full, m.secret.base,
                                                  m.secret.length)));
        e.imply_eq(guard, cond, e1->data, e2->data);
      }
    }

    // Within-instance functional consistency: equal address, no intervening
    // write to it, equal data. Reads observe old contents, so intervening
    // writes are those at cycles [c1, c2).
    for (size_t i = 0; i < reads.size(); i++) {
      for (size_t j = i + 1; j < reads.size(); j++) {
        const Event *r1 = reads[i], *r2 = reads[j];
        if (r1->instance != r2->instance) continue;
        if (r1->cycle > r2->cycle) std::swap(r1, r2);
        if (r1->cycle == r2->cycle && r1->port == r2->port) continue;
        Lit cond = e.mk_and(r1->en, r2->en);
        cond = e.mk_and(cond, e.mk_eq_vec(r1->addr_full, r2->addr_full));
        for (auto* w : writes) {
          if (w->instance != r1->instance) continue;
          if (w->cycle < r1->cycle || w->cycle >= r2->cycle) continue;
          Lit hits = e.mk_and(w->en, e.mk_eq_vec(w->addr_full, r1->addr_full));
          cond = e.mk_and(cond, neg(hits));
        }
        e.imply_eq(guard, cond, r1->data, r2->data);
      }
    }
  }

  // ---- named constraints ----
  auto have = [&](const std::string& sig) { return c.has_signal(sig); };

  // secret_data_protected: the protection-enable input is pinned high.
  if (have("prot_en")) {
    Lit s = f.assumptions[ConstraintKind::SecretDataProtected];
    for (int cyc = 0; cyc < ob.k; cyc++)
      f.solver->add_clause({neg(s), inputs[cyc].at("prot_en")[0]});
  }

  // no_ongoing_protected_access: at t only, guarded address buffers lie
  // outside the secret region (both instances share the state-0 literals).
  {
    Lit s = f.assumptions[ConstraintKind::NoOngoingProtectedAccess];
    for (auto& ab : m.design.addr_buffers) {
      bool all_present = true;
      for (auto& g : ab.guards) all_present &= have(g);
      for (auto& a : ab.addr_parts) all_present &= have(a);
      if (!all_present) continue;
      for (int inst = 1; inst <= 2; inst++) {
        Lit g = e.T;
        for (auto& gn : ab.guards) g = e.mk_and(g, f.lits_of(inst, gn, 0)[0]);
        Bits addr;
        for (auto it = ab.addr_parts.rbegin(); it != ab.addr_parts.rend(); ++it) {
          const Bits& part = f.lits_of(inst, *it, 0);
          addr.insert(addr.end(), part.begin(), part.end());
        }
        Lit in_r = e.mk_in_range(addr, m.secret.base, m.secret.length);
        f.solver->add_clause({neg(s), neg(g), neg(in_r)});
      }
    }
  }

  // cache_monitor_valid_io: protocol_ok in every cycle, both instances.
  if (have(m.design.monitor_ok_signal)) {
    Lit s = f.assumptions[ConstraintKind::CacheMonitorValidIO];
    for (int cyc = 0; cyc < ob.k; cyc++)
      for (int inst = 1; inst <= 2; inst++)
        f.solver->add_clause({neg(s), f.lits_of(inst, m.design.monitor_ok_signal, cyc)[0]});
  }

  // secure_system_software: no valid kernel-mode load of the secret at the
  // memory stage, any cycle, either instance.
  if (have("m_valid") && have("m_is_load") && have("m_ea") && have("mode")) {
    Lit s = f.assumptions[ConstraintKind::SecureSystemSoftware];
    for (int cyc = 0; cyc < ob.k; cyc++) {
      for (int inst = 1; inst <= 2; inst++) {
        Lit valid = f.lits_of(inst, "m_valid", cyc)[0];
        Lit is_load = f.lits_of(inst, "m_is_load", cyc)[0];
        Lit kernel = f.lits_of(inst, "mode", cyc)[0];
        Lit in_r = e.mk_in_range(f.lits_of(inst, "m_ea", cyc), m.secret.base,
                                 m.secret.length);
        f.solver->add_clause({neg(s), neg(valid), neg(is_load), neg(kernel), neg(in_r)});
      }
    }
  }

  // ---- negated commitment ----
  std::vector<Lit> divergence;
  if (!induction) {
    for (int cyc = 1; cyc <= ob.k; cyc++) {
      for (auto& rid : ob.comparable) {
        const Bits& a = f.lits_of(1, rid, cyc);
        const Bits& b = f.lits_of(2, rid, cyc);
        for (size_t i = 0; i < a.size(); i++)
          if (a[i] != b[i]) divergence.push_back(e.mk_xor(a[i], b[i]));
      }
    }
  } else {
    // Escape: any architectural difference, or a microarchitectural
    // difference outside the union of the known cubes.
    std::set<std::string> allowed;
    for (auto& cube : ob.known_cubes)
      for (auto& id : cube.differing) allowed.insert(id);
    for (auto& id : ob.base_cube->differing) allowed.insert(id);
    for (int cyc = 1; cyc <= ob.k; cyc++) {
      for (auto& rid : m.comparable_micro) {
        bool arch = m.is_architectural(rid);
        if (!arch && allowed.count(rid)) continue;
        const Bits& a = f.lits_of(1, rid, cyc);
        const Bits& b = f.lits_of(2, rid, cyc);
        for (size_t i = 0; i < a.size(); i++)
          if (a[i] != b[i]) divergence.push_back(e.mk_xor(a[i], b[i]));
      }
    }
  }
  if (divergence.empty()) {
    // Structurally no divergence is representable: assert false.
    f.solver->add_clause({e.F()});
  } else {
    f.solver->add_clause(divergence);
  }

  f.num_gates = e.gates;
  return f;
}

}  // namespace upec
