// The two-instance computational model: one SoC structure instantiated
// twice with shared inputs, memories coupled equal outside the secret
// region, and the assumption set that excludes unreachable-state artifacts.
#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "upec/minisoc.hpp"
#include "upec/netlist.hpp"
#include "upec/sim.hpp"

namespace upec {

struct SecretSpec {
  uint16_t base = 0xff07;
  uint32_t length = 1;
  std::string location_name = "A";
  bool contains(uint64_t addr) const { return addr >= base && addr < base + length; }
};

enum class ConstraintKind {
  SecretDataProtected,
  NoOngoingProtectedAccess,
  CacheMonitorValidIO,
  EqualityOfNonProtectedMemory,
  SecureSystemSoftware,
};
const char* constraint_name(ConstraintKind k);
std::vector<ConstraintKind> all_constraints();

struct ConstraintSet {
  std::map<ConstraintKind, bool> enabled;
  ConstraintSet() {
    for (auto k : all_constraints()) enabled[k] = true;
  }
  bool on(ConstraintKind k) const { return enabled.at(k); }
  void disable(ConstraintKind k) { enabled[k] = false; }
};

// Both instances share the design structure; instance_circuit() materializes
// the renamed copies when the doubled netlist itself is needed.
struct MiterModel {
  SoCDesign design;
  SecretSpec secret;
  ConstraintSet constraints;
  // Comparable state: microarchitectural registers minus monitor state.
  std::vector<std::string> comparable_micro;
  std::vector<std::string> architectural;
  // Vacuity-guard hook: couple memory values equal inside the secret region
  // as well (forces secret1 = secret2).
  bool force_equal_secret = false;

  bool in_secret(uint64_t addr) const { return secret.contains(addr); }
  bool is_architectural(const std::string& id) const;
  Circuit instance_circuit(int instance) const;  // 1 or 2; "i1."/"i2." prefix
};

// Throws if the secret region is not covered by a kernel-only protection
// range of the design.
MiterModel build_miter(const SoCDesign& d, const SecretSpec& s,
                       ConstraintSet cs = ConstraintSet());

// Concrete-trace evaluation of the per-instance constraint conditions, used
// by the reachable-validity fuzz and the spurious-class witnesses.
// at_t applies the t-only condition (ongoing transactions).
bool constraint_holds_concrete(const MiterModel& m, ConstraintKind k,
                               const SimState& state, const SignalValues& vals,
                               bool at_t);

}  // namespace upec
