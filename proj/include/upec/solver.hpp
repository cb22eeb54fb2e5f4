// Conflict-driven clause-learning SAT solver with two watched literals,
// first-UIP learning and clause minimization, VSIDS activities on a binary
// heap, Luby restarts, phase saving and an assumptions interface. DIMACS
// export is bit-exact so external solvers can cross-check any instance.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace upec {

// Literal encoding: variable v (1-based); positive literal = 2*v, negative
// literal = 2*v+1.
using Var = int32_t;
using Lit = int32_t;

inline Lit make_lit(Var v, bool pos) { return pos ? 2 * v : 2 * v + 1; }
inline Lit neg(Lit l) { return l ^ 1; }
inline Var var_of(Lit l) { return l >> 1; }
inline bool positive(Lit l) { return (l & 1) == 0; }
inline int lit_to_dimacs(Lit l) { return positive(l) ? var_of(l) : -var_of(l); }

enum class SolveStatus { Sat, Unsat, ResourceLimit };

struct SolverStats {
  uint64_t conflicts = 0;
  uint64_t decisions = 0;
  uint64_t propagations = 0;
  uint64_t restarts = 0;
  uint64_t learned = 0;
};

class Solver {
 public:
  Var new_var();
  int num_vars() const { return nvars_; }

  // Returns false if the formula became unsatisfiable at level 0.
  bool add_clause(std::vector<Lit> lits);
  void add_unit(Lit l) { add_clause({l}); }

  SolveStatus solve(const std::vector<Lit>& assumptions = {});

  bool model_value(Var v) const;
  const SolverStats& stats() const { return stats_; }

  // Resource caps: 0 = unlimited.
  uint64_t conflict_limit = 0;
  double time_limit_seconds = 0;

  // Bit-exact DIMACS of the problem clauses, assumptions appended as units.
  std::string to_dimacs(const std::vector<Lit>& assumptions = {}) const;

 private:
  struct Clause {
    std::vector<Lit> lits;
    bool learned = false;
    double activity = 0;
  };

  enum : uint8_t { kUndef = 2 };

  int nvars_ = 0;
  std::vector<Clause> clauses_;
  std::vector<Lit> unit_store_;            // problem units (for DIMACS export)
  std::vector<std::vector<int>> watches_;  // lit -> watching clause indices
  std::vector<uint8_t> assign_;
  std::vector<int> level_;
  std::vector<int> reason_;
  std::vector<Lit> trail_;
  std::vector<size_t> trail_lim_;
  size_t qhead_ = 0;
  std::vector<double> activity_;
  double var_inc_ = 1.0;
  std::vector<uint8_t> phase_;
  SolverStats stats_;
  bool ok_ = true;

  // Activity-ordered max-heap of unassigned variables.
  std::vector<Var> heap_;
  std::vector<int> heap_pos_;
  void heap_insert(Var v);
  void heap_update(Var v);
  Var heap_pop();
  void heap_percolate_up(int i);
  void heap_percolate_down(int i);

  bool lit_true(Lit l) const {
    uint8_t a = assign_[var_of(l)];
    return a != kUndef && (a == 1) == positive(l);
  }
  bool lit_false(Lit l) const {
    uint8_t a = assign_[var_of(l)];
    return a != kUndef && (a == 1) != positive(l);
  }
  bool lit_undef(Lit l) const { return assign_[var_of(l)] == kUndef; }

  void enqueue(Lit l, int reason);
  int propagate();
  void analyze(int confl, std::vector<Lit>& out_learnt, int& out_btlevel);
  void backtrack(size_t level);
  void bump_var(Var v);
  Lit pick_branch();
  void attach(int ci);
  void reduce_learned();
  bool locked(int ci) const;
};

struct DimacsProblem {
  int num_vars = 0;
  std::vector<std::vector<int>> clauses;  // signed DIMACS literals
};
DimacsProblem parse_dimacs(const std::string& text);

}  // namespace upec
