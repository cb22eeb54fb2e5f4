// The bundled toy SoC: a 5-stage in-order pipeline (IF/ID/EX/M/WB) with a
// pipelined write-back/write-allocate direct-mapped cache and a range-based
// memory protection unit, built as a flat netlist in three variants.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "upec/isa.hpp"
#include "upec/netlist.hpp"
#include "upec/sim.hpp"

namespace upec {

enum class Variant { Secure, OrcVulnerable, MeltdownStyle };

const char* variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& s);

struct ProtectionRange {
  uint16_t base = 0;
  uint16_t limit = 0;  // inclusive
  bool kernel_only = true;
};

struct ProtectionConfig {
  std::vector<ProtectionRange> ranges;  // non-overlapping; >=1 kernel-only
  static ProtectionConfig default_config();  // one kernel-only range 0xff00..0xffff
};

struct CacheGeometry {
  uint32_t lines = 256;     // power of two
  uint32_t line_bytes = 1;  // fixed at 1 in this artifact
};

// Latency/behaviour knobs. Only the inequality structure matters for the
// attacks; see docs/isa.md for the timing contract.
struct SoCParams {
  CacheGeometry geometry;
  uint32_t hit_latency = 2;          // request cycle + response cycle
  uint32_t miss_penalty = 3;         // main-memory read cycles per refill
  uint32_t pending_write_cycles = 3; // store completion time after acceptance
  uint32_t writeback_cycles = 2;     // dirty-line writeback before a refill
  uint32_t exception_resolution = 2; // extra WB cycles before redirect
  uint16_t handler_pc = 0x0040;      // exception handler stub entry
};

struct SoCDesign {
  Circuit circuit;
  VarClassification classification;
  Variant variant = Variant::Secure;
  ProtectionConfig protection;
  SoCParams params;

  // Memory/port metadata.
  std::string main_memory = "dmem";
  std::string instr_memory = "imem";
  std::string cache_data_array = "cache_data";
  std::string cache_tag_prefix = "cache_tag_";
  std::string cache_valid_prefix = "cache_valid_";
  std::string cache_dirty_prefix = "cache_dirty_";

  // Registers holding addresses of ongoing memory-side transactions. Each
  // entry is guarded by activity bits; the address is the concatenation of
  // the listed parts (high to low).
  struct AddrBuffer {
    std::vector<std::string> guards;
    std::vector<std::string> addr_parts;
  };
  std::vector<AddrBuffer> addr_buffers;

  // Monitor state registers (excluded from soc_state comparisons) and the
  // per-instance protocol-ok flag signal.
  std::vector<std::string> monitor_registers;
  std::string monitor_ok_signal = "mon_protocol_ok";

  // Per read port of blackboxable arrays: the netlist signal carrying the
  // *full* memory address of the access (used by the miter's couplings).
  // Keyed by the port's data signal id.
  std::map<std::string, std::string> port_full_addr;

  // Named probe signals used by tests and the simulator front end.
  std::string retire_valid = "retire_valid";
  std::string retire_pc = "retire_pc";
  std::string retire_halt = "retire_is_halt";
  std::string fault_retire = "retire_fault";
};

// Builds the SoC netlist for the given variant. Throws on bad geometry.
SoCDesign build_minisoc(Variant v,
                        const ProtectionConfig& p = ProtectionConfig::default_config(),
                        const SoCParams& params = {});

// --- program execution on the concrete design ---

struct RunResult {
  ExecTrace trace;
  uint64_t cycles = 0;
  bool hit_max_cycles = false;
};

// Initial memory/cache preparation for simulation.
struct MachineSetup {
  MemImage dmem;                       // main memory bytes
  std::vector<uint32_t> program;       // imem words from entry 0
  // Warm cache lines: line index -> (tag, data byte, dirty).
  struct WarmLine { uint8_t tag; uint8_t data; bool dirty; };
  std::map<uint32_t, WarmLine> warm;
  std::map<std::string, uint64_t> arch_regs;  // initial x1..x7/pc/mode values
};

SimState make_initial_state(const SoCDesign& d, const MachineSetup& setup);

// Runs until halt retires, a fault redirect lands in the handler and the
// handler's first instruction retires, or max_cycles.
RunResult run_program(const SoCDesign& d, const Program& prog, const MemImage& mem,
                      uint64_t max_cycles, const MachineSetup* extra = nullptr);

// --- the Orc attack (Section III of the methodology docs) ---

struct OrcObservation {
  uint32_t guess = 0;
  uint64_t cycles = 0;
};

// Cycle count from sequence start until the handler stub's first instruction
// retires, for one guess. secret_addr must lie in a kernel-only range and
// the secret byte is preloaded in the cache.
uint64_t measure_orc_guess(const SoCDesign& d, uint16_t secret_addr, uint8_t secret_byte,
                           uint8_t guess);

struct AmbiguousTiming : Error {
  AmbiguousTiming() : Error("timing table has no unique outlier") {}
};

struct OrcResult {
  uint8_t recovered = 0;
  std::vector<OrcObservation> table;  // all 256 guesses
  bool flat = false;                  // no outlier among scannable guesses
};

// Scans all guesses and returns the recovered low byte of the secret.
// Throws AmbiguousTiming when the table is flat and no inference applies
// (the expected outcome on the Secure variant).
OrcResult orc_attack(const SoCDesign& d, uint16_t secret_addr, uint8_t secret_byte);

// Retirement record for functional-equivalence checks.
struct Retirement {
  uint64_t pc;
  bool is_halt;
  bool fault;
  std::map<std::string, uint64_t> arch_after;  // x1..x7, mode after retire
};
std::vector<Retirement> retirement_trace(const SoCDesign& d, const ExecTrace& t);

}  // namespace upec
