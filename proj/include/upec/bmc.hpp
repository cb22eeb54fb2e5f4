// Bounded unrolling of the miter from a fully symbolic initial state, CNF
// encoding of the interval property, verdict extraction with simulator
// replay, window-length measurement and the induction scheme over P-alert
// cubes.
#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "upec/miter.hpp"
#include "upec/solver.hpp"

namespace upec {

// Divergence signature of a P-alert plus the alert state it came from: the
// non-differing comparable registers are pinned to their trace values (the
// artifact's approximation of the blocking condition), the differing ones
// are left free per instance.
struct PAlertCube {
  std::set<std::string> differing;
  std::map<std::string, uint64_t> pinned;  // register -> value (both instances)
  int source_cycle = -1;
  int source_k = -1;
};

struct ProofObligation {
  std::vector<std::string> comparable;  // commitment set (register ids)
  int k = 4;
  enum Mode { Bounded, InductionStep } mode = Bounded;
  // InductionStep only:
  const PAlertCube* base_cube = nullptr;
  std::vector<PAlertCube> known_cubes;
};

enum class Scenario { Cached, NotCached };
const char* scenario_name(Scenario s);

// A complete valuation of both instances over the window. Register signals
// are indexed by state 0..k; other signals by transition 0..k-1.
struct Trace {
  int k = 0;
  std::array<std::vector<SignalValues>, 2> state;   // [inst][0..k] registers
  std::array<std::vector<SignalValues>, 2> comb;    // [inst][0..k-1] all signals
  std::vector<SignalValues> inputs;                 // shared, [0..k-1]
  int divergence_cycle = -1;                        // earliest state index >=1
  std::vector<std::string> differing;               // register ids at that state
};

struct Formula {
  std::unique_ptr<Solver> solver;
  // Variable map: (instance-1) -> "signal@cycle" -> literals (LSB first).
  std::array<std::map<std::string, std::vector<Lit>>, 2> varmap;
  std::map<std::string, std::vector<Lit>> input_map;  // shared inputs
  std::map<ConstraintKind, Lit> assumptions;
  int k = 0;
  uint64_t num_gates = 0;

  std::vector<Lit> active_assumptions(const ConstraintSet& cs) const;
  const std::vector<Lit>& lits_of(int instance, const std::string& sig, int cycle) const;
  std::string varmap_json() const;  // JSON-lines sidecar for DIMACS export
};

// Unrolls the miter for the obligation; scenario fixes the initial cache
// assumption for the secret's line.
Formula unroll(const MiterModel& m, const ProofObligation& ob, Scenario sc);

struct Verdict {
  enum Kind { UnsatUpTo, AlertFound, Inconclusive } kind = UnsatUpTo;
  int k = 0;
  std::optional<Trace> trace;
  // statistics
  uint64_t vars = 0, clauses = 0, gates = 0;
  double solve_seconds = 0;
};

struct ResourceLimits {
  double timeout_seconds = 600;
  uint64_t conflict_limit = 0;  // 0 = none
};

// Bounded UPEC query: SAT model -> earliest-divergence trace (replayed
// against the simulator before returning).
Verdict check_upec(const MiterModel& m, const ProofObligation& ob, Scenario sc,
                   const ResourceLimits& limits = {});

// Re-evaluates every signal of the trace concretely; returns the first
// mismatch as a human-readable string, or empty if consistent.
std::string replay_counterexample(const MiterModel& m, const Trace& t);

// Window length: the longest single memory transaction in the scenario,
// measured by directed simulation of the cache interface.
int find_dmem(const SoCDesign& d, Scenario sc);

struct InductionResult {
  bool holds = false;
  std::optional<Trace> reaches;
  double solve_seconds = 0;
};

// One k_step window from the cube's pinned state: holds iff every reachable
// divergence stays inside the union of known cubes and never touches an
// architectural register.
InductionResult induction_check(const MiterModel& m, const PAlertCube& cube,
                                const std::vector<PAlertCube>& known, int k_step,
                                const ResourceLimits& limits = {});

PAlertCube cube_from_trace(const MiterModel& m, const Trace& t);

// Brute-force reachability diameter for circuits with at most ~20 state
// bits; exposed for tests only (d_SOC is otherwise unused).
std::optional<uint64_t> reachability_diameter(const Circuit& c, uint64_t max_states = 1 << 20);

}  // namespace upec
