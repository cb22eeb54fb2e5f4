#include "upec/miter.hpp"

#include <algorithm>

namespace upec {

const char* constraint_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::SecretDataProtected: return "secret-data-protected";
    case ConstraintKind::NoOngoingProtectedAccess: return "no-ongoing-protected-access";
    case ConstraintKind::CacheMonitorValidIO: return "cache-monitor-valid-io";
    case ConstraintKind::EqualityOfNonProtectedMemory: return "equality-of-nonprotected-memory";
    case ConstraintKind::SecureSystemSoftware: return "secure-system-software";
  }
  return "?";
}

std::vector<ConstraintKind> all_constraints() {
  return {ConstraintKind::SecretDataProtected,
          ConstraintKind::NoOngoingProtectedAccess,
          ConstraintKind::CacheMonitorValidIO,
          ConstraintKind::EqualityOfNonProtectedMemory,
          ConstraintKind::SecureSystemSoftware};
}

bool MiterModel::is_architectural(const std::string& id) const {
  return std::find(architectural.begin(), architectural.end(), id) !=
         architectural.end();
}

Circuit MiterModel::instance_circuit(int instance) const {
  std::string prefix = instance == 2 ? "i2." : "i1.";
  Circuit c = design.circuit;
  c.name = prefix + c.name;
  auto ren = [&](std::string& s) { s = prefix + s; };
  for (auto& i : c.inputs) ren(i.id);
  for (auto& r : c.registers) {
    ren(r.out);
    ren(r.next);
  }
  for (auto& m : c.memories) {
    ren(m.id);
    for (auto& p : m.read_ports) { ren(p.addr); ren(p.data); ren(p.enable); }
    for (auto& p : m.write_ports) { ren(p.addr); ren(p.data); ren(p.enable); }
  }
  for (auto& cell : c.cells) {
    ren(cell.out);
    for (auto& a : cell.args) ren(a);
  }
  for (auto& o : c.outputs) ren(o);
  c.finalized = false;
  c.finalize();
  return c;
}

MiterModel build_miter(const SoCDesign& d, const SecretSpec& s, ConstraintSet cs) {
  // The secret region must lie inside a kernel-only protected range.
  bool covered = false;
  for (auto& r : d.protection.ranges) {
    if (!r.kernel_only) continue;
    if (s.base >= r.base && s.base + s.length - 1 <= r.limit) covered = true;
  }
  if (!covered)
    throw Error("secret region is not covered by a kernel-only protection range");
  if (s.length == 0) throw Error("secret region is empty");

  MiterModel m;
  m.design = d;
  m.secret = s;
  m.constraints = std::move(cs);
  m.architectural = d.classification.architectural;
  for (auto& id : d.classification.microarchitectural) {
    if (std::find(d.monitor_registers.begin(), d.monitor_registers.end(), id) !=
        d.monitor_registers.end())
      continue;
    m.comparable_micro.push_back(id);
  }
  return m;
}

bool constraint_holds_concrete(const MiterModel& m, ConstraintKind k,
                               const SimState& state, const SignalValues& vals,
                               bool at_t) {
  const SoCDesign& d = m.design;
  switch (k) {
    case ConstraintKind::SecretDataProtected:
      return vals.at("prot_en") == 1;
    case ConstraintKind::NoOngoingProtectedAccess: {
      if (!at_t) return true;
      bool fsm_active = state.regs.at("fsm_active") != 0;
      bool wb_phase = state.regs.at("fsm_wb_pending") != 0;
      bool pend = state.regs.at("pending_active") != 0;
      if (fsm_active && m.in_secret(state.regs.at("fsm_addr"))) return false;
      if (fsm_active && wb_phase && m.in_secret(state.regs.at("fsm_wb_addr"))) return false;
      if (pend) {
        uint64_t lines = d.params.geometry.lines;
        int idx = 0;
        while ((1u << idx) < lines) idx++;
        uint64_t full =
            (state.regs.at("pending_tag") << idx) | state.regs.at("pending_line");
        if (m.in_secret(full)) return false;
      }
      return true;
    }
    case ConstraintKind::CacheMonitorValidIO:
      return vals.at(d.monitor_ok_signal) == 1;
    case ConstraintKind::EqualityOfNonProtectedMemory:
      // Cross-instance value coupling; a single concrete machine satisfies
      // it by construction (the cache returns its stored contents).
      return true;
    case ConstraintKind::SecureSystemSoftware: {
      bool kernel_load_of_secret = state.regs.at("m_valid") != 0 &&
                                   state.regs.at("m_is_load") != 0 &&
                                   state.regs.at("mode") != 0 &&
                                   m.in_secret(state.regs.at("m_ea"));
      return !kernel_load_of_secret;
    }
  }
  return true;
}

}  // namespace upec
