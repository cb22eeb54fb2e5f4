#include "upec/solver.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <stdexcept>

namespace upec {

Var Solver::new_var() {
  nvars_++;
  assign_.resize(nvars_ + 1, kUndef);
  level_.resize(nvars_ + 1, 0);
  reason_.resize(nvars_ + 1, -1);
  activity_.resize(nvars_ + 1, 0.0);
  phase_.resize(nvars_ + 1, 0);
  heap_pos_.resize(nvars_ + 1, -1);
  watches_.resize(2 * nvars_ + 2);
  heap_insert(nvars_);
  return nvars_;
}

// ---------------- activity heap ----------------

void Solver::heap_percolate_up(int i) {
  Var v = heap_[i];
  while (i > 0) {
    int p = (i - 1) / 2;
    if (activity_[heap_[p]] >= activity_[v]) break;
    heap_[i] = heap_[p];
    heap_pos_[heap_[i]] = i;
    i = p;
  }
  heap_[i] = v;
  heap_pos_[v] = i;
}

void Solver::heap_percolate_down(int i) {
  Var v = heap_[i];
  int n = (int)heap_.size();
  for (;;) {
    int c = 2 * i + 1;
    if (c >= n) break;
    if (c + 1 < n && activity_[heap_[c + 1]] > activity_[heap_[c]]) c++;
    if (activity_[heap_[c]] <= activity_[v]) break;
    heap_[i] = heap_[c];
    heap_pos_[heap_[i]] = i;
    i = c;
  }
  heap_[i] = v;
  heap_pos_[v] = i;
}

void Solver::heap_insert(Var v) {
  if (heap_pos_[v] != -1) return;
  heap_.push_back(v);
  heap_pos_[v] = (int)heap_.size() - 1;
  heap_percolate_up((int)heap_.size() - 1);
}

void Solver::heap_update(Var v) {
  if (heap_pos_[v] != -1) heap_percolate_up(heap_pos_[v]);
}

Var Solver::heap_pop() {
  if (heap_.empty()) return 0;
  Var v = heap_[0];
  heap_pos_[v] = -1;
  Var last = heap_.back();
  heap_.pop_back();
  if (!heap_.empty()) {
    heap_[0] = last;
    heap_pos_[last] = 0;
    heap_percolate_down(0);
  }
  return v;
}

// ---------------- clause management ----------------

void Solver::attach(int ci) {
  watches_[clauses_[ci].lits[0]].push_back(ci);
  watches_[clauses_[ci].lits[1]].push_back(ci);
}

bool Solver::add_clause(std::vector<Lit> lits) {
  if (!ok_) return false;
  std::sort(lits.begin(), lits.end());
  lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
  for (size_t i = 0; i + 1 < lits.size(); i++)
    if (lits[i] == neg(lits[i + 1])) return true;  // tautology
  std::vector<Lit> kept;
  for (Lit l : lits) {
    if (var_of(l) <= 0 || var_of(l) > nvars_)
      throw std::runtime_error("solver: literal for unknown variable");
    if (lit_true(l) && level_[var_of(l)] == 0) return true;
    if (lit_false(l) && level_[var_of(l)] == 0) continue;
    kept.push_back(l);
  }
  if (kept.empty()) {
    ok_ = false;
    return false;
  }
  if (kept.size() == 1) {
    unit_store_.push_back(kept[0]);
    if (lit_undef(kept[0])) {
      enqueue(kept[0], -1);
      if (propagate() != -1) ok_ = false;
    }
    return ok_;
  }
  int ci = (int)clauses_.size();
  clauses_.push_back({std::move(kept), false, 0});
  attach(ci);
  return true;
}

void Solver::enqueue(Lit l, int reason) {
  Var v = var_of(l);
  assign_[v] = positive(l) ? 1 : 0;
  level_[v] = (int)trail_lim_.size();
  reason_[v] = reason;
  trail_.push_back(l);
}

int Solver::propagate() {
  while (qhead_ < trail_.size()) {
    Lit p = trail_[qhead_++];
    stats_.propagations++;
    Lit false_lit = neg(p);
    auto& wl = watches_[false_lit];
    size_t j = 0;
    for (size_t i = 0; i < wl.size(); i++) {
      int ci = wl[i];
      Clause& c = clauses_[ci];
      if (c.lits[0] == false_lit) std::swap(c.lits[0], c.lits[1]);
      if (lit_true(c.lits[0])) {
        wl[j++] = ci;
        continue;
      }
      bool moved = false;
      for (size_t k = 2; k < c.lits.size(); k++) {
        if (!lit_false(c.lits[k])) {
          std::swap(c.lits[1], c.lits[k]);
          watches_[c.lits[1]].push_back(ci);
          moved = true;
          break;
        }
      }
      if (moved) continue;
      wl[j++] = ci;
      if (lit_false(c.lits[0])) {
        for (size_t k = i + 1; k < wl.size(); k++) wl[j++] = wl[k];
        wl.resize(j);
        qhead_ = trail_.size();
        return ci;
      }
      enqueue(c.lits[0], ci);
    }
    wl.resize(j);
  }
  return -1;
}

void Solver::bump_var(Var v) {
  activity_[v] += var_inc_;
  if (activity_[v] > 1e100) {
    for (int i = 1; i <= nvars_; i++) activity_[i] *= 1e-100;
    var_inc_ *= 1e-100;
    // Heap order is preserved under uniform scaling.
  }
  heap_update(v);
}

void Solver::analyze(int confl, std::vector<Lit>& out_learnt, int& out_btlevel) {
  out_learnt.clear();
  out_learnt.push_back(0);
  std::vector<uint8_t> seen(nvars_ + 1, 0);
  int counter = 0;
  Lit p = -1;
  size_t index = trail_.size();
  int cur_level = (int)trail_lim_.size();

  int ci = confl;
  do {
    Clause& c = clauses_[ci];
    if (c.learned) c.activity += 1.0;
    for (size_t i = (p == -1 ? 0 : 1); i < c.lits.size(); i++) {
      Lit q = c.lits[i];
      Var v = var_of(q);
      if (!seen[v] && level_[v] > 0) {
        seen[v] = 1;
        bump_var(v);
        if (level_[v] >= cur_level)
          counter++;
        else
          out_learnt.push_back(q);
      }
    }
    while (!seen[var_of(trail_[index - 1])]) index--;
    index--;
    p = trail_[index];
    seen[var_of(p)] = 0;
    counter--;
    ci = reason_[var_of(p)];
  } while (counter > 0 && ci != -1);
  out_learnt[0] = neg(p);

  // Local clause minimization: a literal is redundant if its reason clause
  // lies entirely inside the learnt clause (plus level-0 facts).
  std::vector<uint8_t> mark(nvars_ + 1, 0);
  for (Lit q : out_learnt) mark[var_of(q)] = 1;
  std::vector<Lit> final_lits;
  final_lits.push_back(out_learnt[0]);
  for (size_t i = 1; i < out_learnt.size(); i++) {
    Lit q = out_learnt[i];
    int r = reason_[var_of(q)];
    bool redundant = r != -1;
    if (r != -1) {
      for (Lit x : clauses_[r].lits) {
        if (var_of(x) == var_of(q)) continue;
        if (!mark[var_of(x)] && level_[var_of(x)] > 0) {
          redundant = false;
          break;
        }
      }
    }
    if (!redundant) final_lits.push_back(q);
  }
  out_learnt = std::move(final_lits);

  out_btlevel = 0;
  if (out_learnt.size() > 1) {
    size_t max_i = 1;
    for (size_t i = 2; i < out_learnt.size(); i++)
      if (level_[var_of(out_learnt[i])] > level_[var_of(out_learnt[max_i])]) max_i = i;
    std::swap(out_learnt[1], out_learnt[max_i]);
    out_btlevel = level_[var_of(out_learnt[1])];
  }
}

void Solver::backtrack(size_t level) {
  while (trail_lim_.size() > level) {
    size_t bound = trail_lim_.back();
    while (trail_.size() > bound) {
      Lit l = trail_.back();
      trail_.pop_back();
      Var v = var_of(l);
      phase_[v] = assign_[v];
      assign_[v] = kUndef;
      reason_[v] = -1;
      heap_insert(v);
    }
    trail_lim_.pop_back();
  }
  if (qhead_ > trail_.size()) qhead_ = trail_.size();
}

Lit Solver::pick_branch() {
  for (;;) {
    Var v = heap_pop();
    if (v == 0) return -1;
    if (assign_[v] == kUndef) return make_lit(v, phase_[v] == 1);
  }
}

bool Solver::locked(int ci) const {
  const Clause& c = clauses_[ci];
  Var v = var_of(c.lits[0]);
  return assign_[v] != kUndef && reason_[v] == ci && lit_true(c.lits[0]);
}

void Solver::reduce_learned() {
  std::vector<int> cand;
  for (int i = 0; i < (int)clauses_.size(); i++)
    if (clauses_[i].learned && !locked(i) && clauses_[i].lits.size() > 2)
      cand.push_back(i);
  if (cand.size() < 4000) return;
  std::nth_element(cand.begin(), cand.begin() + cand.size() / 2, cand.end(),
                   [&](int a, int b) { return clauses_[a].activity > clauses_[b].activity; });
  std::vector<uint8_t> drop(clauses_.size(), 0);
  for (size_t i = cand.size() / 2; i < cand.size(); i++) drop[cand[i]] = 1;
  std::vector<Clause> kept;
  std::vector<int> remap(clauses_.size(), -1);
  for (int i = 0; i < (int)clauses_.size(); i++) {
    if (!drop[i]) {
      remap[i] = (int)kept.size();
      kept.push_back(std::move(clauses_[i]));
    }
  }
  clauses_ = std::move(kept);
  for (auto& w : watches_) w.clear();
  for (int i = 0; i < (int)clauses_.size(); i++) attach(i);
  for (Var v = 1; v <= nvars_; v++)
    if (reason_[v] != -1) reason_[v] = remap[reason_[v]];
}

namespace {
uint64_t luby(uint64_t i) {
  // Value of the Luby sequence at index i (0-based).
  uint64_t k = 1;
  while ((1ull << (k + 1)) <= i + 2) k++;
  while ((1ull << k) - 1 != i + 1) {
    i = i - ((1ull << k) - 1);
    k = 1;
    while ((1ull << (k + 1)) <= i + 2) k++;
  }
  return 1ull << (k - 1);
}
}  // namespace

SolveStatus Solver::solve(const std::vector<Lit>& assumptions) {
  if (!ok_) return SolveStatus::Unsat;
  for (Lit a : assumptions)
    if (var_of(a) <= 0 || var_of(a) > nvars_)
      throw std::runtime_error("solver: assumption for unknown variable");
  auto t0 = std::chrono::steady_clock::now();
  uint64_t conflicts_at_start = stats_.conflicts;
  auto out_of_budget = [&]() {
    if (conflict_limit && stats_.conflicts - conflicts_at_start > conflict_limit)
      return true;
    if (time_limit_seconds > 0) {
      auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
      if (dt.count() > time_limit_seconds) return true;
    }
    return false;
  };

  backtrack(0);
  if (propagate() != -1) {
    ok_ = false;
    return SolveStatus::Unsat;
  }

  uint64_t round = 0;
  uint64_t conflicts_this_round = 0;
  uint64_t budget = 256 * luby(round);

  for (;;) {
    int confl = propagate();
    if (confl != -1) {
      stats_.conflicts++;
      conflicts_this_round++;
      if (trail_lim_.size() <= assumptions.size()) {
        // All open decisions are assumptions: unsatisfiable under them.
        backtrack(0);
        return SolveStatus::Unsat;
      }
      std::vector<Lit> learnt;
      int btlevel = 0;
      analyze(confl, learnt, btlevel);
      backtrack(btlevel);
      if (learnt.size() == 1) {
        if (lit_false(learnt[0])) {
          backtrack(0);
          return SolveStatus::Unsat;
        }
        if (lit_undef(learnt[0])) enqueue(learnt[0], -1);
      } else {
        int ci = (int)clauses_.size();
        clauses_.push_back({learnt, true, 1.0});
        attach(ci);
        stats_.learned++;
        if (lit_undef(learnt[0])) enqueue(learnt[0], ci);
      }
      var_inc_ /= 0.95;
      if (out_of_budget()) {
        backtrack(0);
        return SolveStatus::ResourceLimit;
      }
      if (conflicts_this_round >= budget) {
        stats_.restarts++;
        round++;
        conflicts_this_round = 0;
        budget = 256 * luby(round);
        backtrack(std::min(assumptions.size(), trail_lim_.size()));
        reduce_learned();
      }
      continue;
    }

    if (trail_lim_.size() < assumptions.size()) {
      Lit a = assumptions[trail_lim_.size()];
      if (lit_false(a)) {
        backtrack(0);
        return SolveStatus::Unsat;
      }
      trail_lim_.push_back(trail_.size());
      if (lit_undef(a)) enqueue(a, -1);
      continue;
    }
    Lit d = pick_branch();
    if (d == -1) return SolveStatus::Sat;
    stats_.decisions++;
    trail_lim_.push_back(trail_.size());
    enqueue(d, -1);
    if (out_of_budget()) {
      backtrack(0);
      return SolveStatus::ResourceLimit;
    }
  }
}

bool Solver::model_value(Var v) const {
  if (v <= 0 || v > nvars_) throw std::runtime_error("model_value: bad var");
  return assign_[v] == 1;
}

std::string Solver::to_dimacs(const std::vector<Lit>& assumptions) const {
  std::ostringstream os;
  size_t n = unit_store_.size() + assumptions.size();
  for (auto& c : clauses_)
    if (!c.learned) n++;
  os << "p cnf " << nvars_ << " " << n << "\n";
  for (Lit u : unit_store_) os << lit_to_dimacs(u) << " 0\n";
  for (auto& c : clauses_) {
    if (c.learned) continue;
    for (Lit l : c.lits) os << lit_to_dimacs(l) << " ";
    os << "0\n";
  }
  for (Lit a : assumptions) os << lit_to_dimacs(a) << " 0\n";
  return os.str();
}

DimacsProblem parse_dimacs(const std::string& text) {
  DimacsProblem p;
  std::istringstream is(text);
  std::string line;
  std::vector<int> cur;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == 'c') continue;
    if (line[0] == 'p') {
      std::istringstream hs(line);
      std::string tok;
      hs >> tok >> tok >> p.num_vars;
      continue;
    }
    std::istringstream ls(line);
    int v;
    while (ls >> v) {
      if (v == 0) {
        p.clauses.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(v);
      }
    }
  }
  if (!cur.empty()) p.clauses.push_back(cur);
  return p;
}

}  // namespace upec
