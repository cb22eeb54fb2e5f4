#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "upec/solver.hpp"

using namespace upec;

namespace {

// Brute-force satisfiability over up to 20 variables: the independent
// oracle for randomized differential testing.
bool brute_force_sat(int nvars, const std::vector<std::vector<int>>& clauses) {
  for (uint64_t m = 0; m < (1ull << nvars); m++) {
    bool ok = true;
    for (auto& c : clauses) {
      bool sat = false;
      for (int l : c) {
        int v = l > 0 ? l : -l;
        bool val = (m >> (v - 1)) & 1;
        if ((l > 0) == val) { sat = true; break; }
      }
      if (!sat) { ok = false; break; }
    }
    if (ok) return true;
  }
  return false;
}

SolveStatus run(int nvars, const std::vector<std::vector<int>>& clauses,
                Solver* out = nullptr) {
  Solver s;
  for (int i = 0; i < nvars; i++) s.new_var();
  for (auto& c : clauses) {
    std::vector<Lit> lits;
    for (int l : c) lits.push_back(make_lit(std::abs(l), l > 0));
    s.add_clause(lits);
  }
  auto st = s.solve();
  if (out) *out = std::move(s);
  return st;
}

}  // namespace

TEST_CASE("x and not x is unsat") {
  CHECK(run(1, {{1}, {-1}}) == SolveStatus::Unsat);
}

TEST_CASE("(x or y) and not x is sat with y") {
  Solver s;
  Var x = s.new_var();
  Var y = s.new_var();
  s.add_clause({make_lit(x, true), make_lit(y, true)});
  s.add_unit(make_lit(x, false));
  REQUIRE(s.solve() == SolveStatus::Sat);
  CHECK(s.model_value(y) == true);
  CHECK(s.model_value(x) == false);
}

TEST_CASE("models satisfy every clause") {
  std::mt19937 rng(3);
  for (int iter = 0; iter < 300; iter++) {
    int nv = 5 + rng() % 12;
    int nc = 5 + rng() % 50;
    std::vector<std::vector<int>> clauses;
    for (int i = 0; i < nc; i++) {
      std::vector<int> c;
      int len = 1 + rng() % 3;
      for (int j = 0; j < len; j++) {
        int v = 1 + rng() % nv;
        c.push_back((rng() & 1) ? v : -v);
      }
      clauses.push_back(c);
    }
    Solver s;
    auto st = run(nv, clauses, &s);
    bool expect = brute_force_sat(nv, clauses);
    CHECK(st == (expect ? SolveStatus::Sat : SolveStatus::Unsat));
    if (st == SolveStatus::Sat) {
      for (auto& c : clauses) {
        bool sat = false;
        for (int l : c)
          if (s.model_value(std::abs(l)) == (l > 0)) sat = true;
        CHECK(sat);
      }
    }
  }
}

TEST_CASE("assumptions restrict without destroying the instance") {
  Solver s;
  Var x = s.new_var(), y = s.new_var(), z = s.new_var();
  s.add_clause({make_lit(x, false), make_lit(y, true)});   // x -> y
  s.add_clause({make_lit(y, false), make_lit(z, true)});   // y -> z
  CHECK(s.solve({make_lit(x, true), make_lit(z, false)}) == SolveStatus::Unsat);
  CHECK(s.solve({make_lit(x, true)}) == SolveStatus::Sat);
  CHECK(s.model_value(z) == true);
  CHECK(s.solve({make_lit(z, false)}) == SolveStatus::Sat);
  CHECK(s.model_value(x) == false);
  // Same instance still answers unassumed queries.
  CHECK(s.solve() == SolveStatus::Sat);
}

TEST_CASE("assumption-driven unsat over random instances matches brute force") {
  std::mt19937 rng(17);
  for (int iter = 0; iter < 150; iter++) {
    int nv = 4 + rng() % 8;
    std::vector<std::vector<int>> clauses;
    int nc = 3 + rng() % 25;
    for (int i = 0; i < nc; i++) {
      std::vector<int> c;
      int len = 1 + rng() % 3;
      for (int j = 0; j < len; j++) {
        int v = 1 + rng() % nv;
        c.push_back((rng() & 1) ? v : -v);
      }
      clauses.push_back(c);
    }
    int a1 = 1 + rng() % nv;
    int a2 = 1 + rng() % nv;
    std::vector<int> assum = {(rng() & 1) ? a1 : -a1};
    if (a2 != a1) assum.push_back((rng() & 1) ? a2 : -a2);

    Solver s;
    for (int i = 0; i < nv; i++) s.new_var();
    for (auto& c : clauses) {
      std::vector<Lit> lits;
      for (int l : c) lits.push_back(make_lit(std::abs(l), l > 0));
      s.add_clause(lits);
    }
    std::vector<Lit> alits;
    for (int l : assum) alits.push_back(make_lit(std::abs(l), l > 0));
    auto with_units = clauses;
    for (int l : assum) with_units.push_back({l});
    bool expect = brute_force_sat(nv, with_units);
    auto st = s.solve(alits);
    CHECK(st == (expect ? SolveStatus::Sat : SolveStatus::Unsat));
    // Re-query without assumptions must match the plain problem.
    CHECK((s.solve() == SolveStatus::Sat) == brute_force_sat(nv, clauses));
  }
}

TEST_CASE("dimacs export parses back to the same clause set") {
  Solver s;
  for (int i = 0; i < 4; i++) s.new_var();
  s.add_clause({make_lit(1, true), make_lit(2, false)});
  s.add_clause({make_lit(3, true), make_lit(4, true), make_lit(1, false)});
  s.add_unit(make_lit(2, true));
  std::string d = s.to_dimacs({make_lit(4, false)});
  DimacsProblem p = parse_dimacs(d);
  CHECK(p.num_vars == 4);
  CHECK(p.clauses.size() == 4);
  // Satisfiability is preserved.
  bool expect = brute_force_sat(p.num_vars, p.clauses);
  CHECK(expect == true);
}

TEST_CASE("pigeonhole 4 into 3 is unsat") {
  // p(i,j): pigeon i in hole j. Vars 1..12.
  auto v = [](int i, int j) { return 3 * i + j + 1; };
  std::vector<std::vector<int>> clauses;
  for (int i = 0; i < 4; i++)
    clauses.push_back({v(i, 0), v(i, 1), v(i, 2)});
  for (int j = 0; j < 3; j++)
    for (int i1 = 0; i1 < 4; i1++)
      for (int i2 = i1 + 1; i2 < 4; i2++)
        clauses.push_back({-v(i1, j), -v(i2, j)});
  CHECK(run(12, clauses) == SolveStatus::Unsat);
}

TEST_CASE("resource limit reports distinctly") {
  // Hard pigeonhole with a tiny conflict budget.
  auto v = [](int i, int j) { return 9 * i + j + 1; };
  std::vector<std::vector<int>> clauses;
  for (int i = 0; i < 10; i++) {
    std::vector<int> c;
    for (int j = 0; j < 9; j++) c.push_back(v(i, j));
    clauses.push_back(c);
  }
  for (int j = 0; j < 9; j++)
    for (int i1 = 0; i1 < 10; i1++)
      for (int i2 = i1 + 1; i2 < 10; i2++)
        clauses.push_back({-v(i1, j), -v(i2, j)});
  Solver s;
  for (int i = 0; i < 90; i++) s.new_var();
  for (auto& c : clauses) {
    std::vector<Lit> lits;
    for (int l : c) lits.push_back(make_lit(std::abs(l), l > 0));
    s.add_clause(lits);
  }
  s.conflict_limit = 50;
  CHECK(s.solve() == SolveStatus::ResourceLimit);
}
