// Deterministic two-valued cycle-accurate simulator for Circuit. Serves as
// the concrete oracle for BMC traces and the execution engine for the
// attack demonstrations.
#pragma once

#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "upec/netlist.hpp"

namespace upec {

using MemImage = std::unordered_map<uint64_t, uint64_t>;

struct SimState {
  std::map<std::string, uint64_t> regs;           // register id -> value
  std::map<std::string, MemImage> mems;           // memory id -> sparse contents
  uint64_t cycle = 0;

  static SimState reset_state(const Circuit& c);
};

struct SimOptions {
  // Reads of never-written addresses: zero-fill (default) or hard error.
  bool error_on_uninitialized_read = false;
  // Forced read-port data values keyed by the port's data signal; lets a
  // trace replay drive blackboxed reads with solver-chosen values.
  const std::unordered_map<std::string, uint64_t>* read_overrides = nullptr;
};

// All combinational signal values for one cycle.
using SignalValues = std::unordered_map<std::string, uint64_t>;

// Evaluates all combinational signals for state s and the given inputs.
SignalValues evaluate(const Circuit& c, const SimState& s,
                      const std::map<std::string, uint64_t>& in,
                      const SimOptions& opt = {});

// One clock edge: evaluate, latch registers, apply memory writes
// (read-before-write within the cycle), increment cycle.
SimState step(const Circuit& c, const SimState& s,
              const std::map<std::string, uint64_t>& in,
              const SimOptions& opt = {}, SignalValues* probe = nullptr);

enum class TerminalReason { MaxCycles, Halt, Trap };

struct ExecTrace {
  std::vector<SimState> snapshots;                      // length = inputs + 1
  std::vector<std::map<std::string, uint64_t>> inputs;  // per-cycle input vectors
  TerminalReason terminal = TerminalReason::MaxCycles;
  // Per-cycle values of watched signals (filled when watch list given).
  std::vector<SignalValues> watched;
};

// Runs up to max_cycles steps with constant inputs; stops early when
// stop(values, next_state) returns true (terminal reason Halt).
ExecTrace run_circuit(const Circuit& c, SimState initial,
                      const std::map<std::string, uint64_t>& in,
                      uint64_t max_cycles,
                      const std::function<bool(const SignalValues&, const SimState&)>& stop = nullptr,
                      const std::vector<std::string>& watch = {},
                      const SimOptions& opt = {});

// --- trace / image file formats ---

// Line-delimited records: cycle=<n> <signal>=<hex> ...
std::string trace_to_text(const Circuit& c, const ExecTrace& t,
                          const std::vector<std::string>& signals);
// Value-change dump for waveform viewers; dumps register values per cycle.
std::string trace_to_vcd(const Circuit& c, const ExecTrace& t);

// Memory image files: "<hexaddr>: <hexvalue>" per line, '#' comments.
MemImage parse_mem_image(const std::string& text);
std::string print_mem_image(const MemImage& img);

}  // namespace upec
