// Synchronous word-level netlist IR: signals, registers, memory arrays and
// combinational cells over a single clock domain. Everything downstream
// (simulator, unroller, miter) operates on this representation.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace upec {

using Width = uint32_t;

inline uint64_t mask_width(uint64_t v, Width w) {
  return w >= 64 ? v : (v & ((uint64_t(1) << w) - 1));
}

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

enum class VarClass { Architectural, Microarchitectural, MemoryContent };

struct Signal {
  std::string id;
  Width width = 1;
};

struct Register {
  std::string out;   // driven signal, also the register's id
  std::string next;  // next-state signal reference
  Width width = 1;
  std::optional<uint64_t> reset_value;
  VarClass cls = VarClass::Microarchitectural;
};

struct MemPort {
  std::string addr;
  std::string data;  // for read ports this is a driven signal
  std::string enable;
};

struct MemoryArray {
  std::string id;
  Width addr_width = 1;
  Width data_width = 1;
  std::vector<MemPort> read_ports;
  std::vector<MemPort> write_ports;
  bool blackboxed = false;
};

enum class CellOp {
  Not, And, Or, Xor, Mux, Eq, Lt, Add, Sub, Shl, Shr, Concat, Slice, Const
};

const char* cell_op_name(CellOp op);

struct Cell {
  CellOp op = CellOp::Const;
  std::string out;
  std::vector<std::string> args;  // signal references
  uint64_t const_value = 0;       // Const
  Width const_width = 0;          // Const
  uint32_t hi = 0, lo = 0;        // Slice
  uint32_t shift = 0;             // Shl/Shr
};

struct Diagnostic {
  enum Kind {
    UndrivenSignal,
    MultipleDrivers,
    UnknownSignal,
    WidthMismatch,
    CombinationalCycle,
    BadCell,
    BadMemory,
    BadRegister,
  };
  Kind kind;
  std::string subject;  // offending cell/register/signal id
  std::string message;
  std::string str() const;
};

// What drives a given signal.
struct Driver {
  enum Kind { None, Input, RegOut, CellOut, MemRead } kind = None;
  int index = -1;  // index into the respective vector
  int port = -1;   // read port index for MemRead
};

struct Circuit {
  std::string name;
  std::vector<Signal> inputs;
  std::vector<Register> registers;
  std::vector<MemoryArray> memories;
  std::vector<Cell> cells;
  std::vector<std::string> outputs;

  // --- derived tables, valid after finalize() ---
  std::unordered_map<std::string, Width> widths;
  std::unordered_map<std::string, Driver> drivers;
  // Combinational evaluation order: sequence of (is_cell, index, port).
  struct EvalStep {
    bool is_cell;
    int index;  // cell index, or memory index
    int port;   // read port for memories
  };
  std::vector<EvalStep> eval_order;
  bool finalized = false;

  Width width_of(const std::string& sig) const;
  bool has_signal(const std::string& sig) const { return widths.count(sig) != 0; }
  const Register* find_register(const std::string& id) const;
  const MemoryArray* find_memory(const std::string& id) const;

  // Builds derived tables; throws Error on structural problems that make the
  // circuit unusable (unknown signals, duplicate drivers, cycles).
  void finalize();

  // Computes the width a cell's output must have; throws on malformed cells.
  Width cell_out_width(const Cell& c) const;
};

// Returns one diagnostic per violated invariant; empty iff well-formed.
// Does not require finalize() to have succeeded.
std::vector<Diagnostic> check_well_formed(const Circuit& c);

struct VarClassification {
  std::map<std::string, VarClass> by_id;
  std::vector<std::string> architectural;     // subset of microarchitectural
  std::vector<std::string> microarchitectural;  // every register id
};

// Classification is total over registers; memory contents may not be
// annotated Architectural.
VarClassification classify_vars(const Circuit& c,
                                const std::map<std::string, VarClass>& annotations);

}  // namespace upec
