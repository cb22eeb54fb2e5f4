// Small construction DSL for emitting circuits from C++. Wire handles carry
// the signal name and width; helper ops allocate uniquely named cells.
#pragma once

#include <string>

#include "upec/netlist.hpp"

namespace upec {

struct Wire {
  std::string id;
  Width width = 0;
};

class NetBuilder {
 public:
  explicit NetBuilder(std::string name) { c_.name = std::move(name); }

  Wire input(const std::string& id, Width w) {
    c_.inputs.push_back({id, w});
    return {id, w};
  }
  Wire reg(const std::string& id, Width w,
           VarClass cls = VarClass::Microarchitectural,
           std::optional<uint64_t> reset = std::nullopt) {
    Register r;
    r.out = id;
    r.width = w;
    r.cls = cls;
    r.reset_value = reset;
    r.next = id;  // placeholder; set_next must be called
    c_.registers.push_back(r);
    return {id, w};
  }
  void set_next(const Wire& r, const Wire& next) {
    for (auto& reg : c_.registers)
      if (reg.out == r.id) {
        reg.next = next.id;
        return;
      }
    throw Error("set_next: no register " + r.id);
  }
  MemoryArray& mem(const std::string& id, Width aw, Width dw, bool blackbox = false) {
    c_.memories.push_back({id, aw, dw, {}, {}, blackbox});
    return c_.memories.back();
  }
  Wire rport(const std::string& mem_id, const Wire& addr, const Wire& en,
             const std::string& data_id) {
    for (auto& m : c_.memories)
      if (m.id == mem_id) {
        m.read_ports.push_back({addr.id, data_id, en.id});
        return {data_id, m.data_width};
      }
    throw Error("rport: no memory " + mem_id);
  }
  void wport(const std::string& mem_id, const Wire& addr, const Wire& data, const Wire& en) {
    for (auto& m : c_.memories)
      if (m.id == mem_id) {
        m.write_ports.push_back({addr.id, data.id, en.id});
        return;
      }
    throw Error("wport: no memory " + mem_id);
  }
  void output(const Wire& w) { c_.outputs.push_back(w.id); }

  Wire constant(uint64_t v, Width w, const std::string& id = "") {
    Cell c;
    c.op = CellOp::Const;
    c.out = id.empty() ? fresh("c") : id;
    c.const_value = mask_width(v, w);
    c.const_width = w;
    return emit(c, w);
  }
  Wire not_(const Wire& a, const std::string& id = "") { return unary(CellOp::Not, a, id); }
  Wire and_(const Wire& a, const Wire& b, const std::string& id = "") { return binary(CellOp::And, a, b, id); }
  Wire or_(const Wire& a, const Wire& b, const std::string& id = "") { return binary(CellOp::Or, a, b, id); }
  Wire xor_(const Wire& a, const Wire& b, const std::string& id = "") { return binary(CellOp::Xor, a, b, id); }
  Wire add(const Wire& a, const Wire& b, const std::string& id = "") { return binary(CellOp::Add, a, b, id); }
  Wire sub(const Wire& a, const Wire& b, const std::string& id = "") { return binary(CellOp::Sub, a, b, id); }
  Wire eq(const Wire& a, const Wire& b, const std::string& id = "") { return binary(CellOp::Eq, a, b, id, 1); }
  Wire lt(const Wire& a, const Wire& b, const std::string& id = "") { return binary(CellOp::Lt, a, b, id, 1); }
  Wire mux(const Wire& sel, const Wire& t, const Wire& f, const std::string& id = "") {
    Cell c;
    c.op = CellOp::Mux;
    c.out = id.empty() ? fresh("m") : id;
    c.args = {sel.id, t.id, f.id};
    return emit(c, t.width);
  }
  Wire concat(const Wire& hi, const Wire& lo, const std::string& id = "") {
    Cell c;
    c.op = CellOp::Concat;
    c.out = id.empty() ? fresh("k") : id;
    c.args = {hi.id, lo.id};
    return emit(c, hi.width + lo.width);
  }
  Wire slice(const Wire& a, uint32_t hi, uint32_t lo, const std::string& id = "") {
    Cell c;
    c.op = CellOp::Slice;
    c.out = id.empty() ? fresh("s") : id;
    c.args = {a.id};
    c.hi = hi;
    c.lo = lo;
    return emit(c, hi - lo + 1);
  }
  Wire shl(const Wire& a, uint32_t n, const std::string& id = "") { return shift(CellOp::Shl, a, n, id); }
  Wire shr(const Wire& a, uint32_t n, const std::string& id = "") { return shift(CellOp::Shr, a, n, id); }

  // Conveniences.
  Wire zero(Width w) { return constant(0, w); }
  Wire one(Width w) { return constant(1, w); }
  Wire zext(const Wire& a, Width w, const std::string& id = "") {
    if (a.width == w) return a;
    if (a.width > w) throw Error("zext: shrinking " + a.id);
    return concat(zero(w - a.width), a, id);
  }
  Wire ne(const Wire& a, const Wire& b, const std::string& id = "") {
    return not_(eq(a, b), id);
  }
  Wire and3(const Wire& a, const Wire& b, const Wire& c, const std::string& id = "") {
    return and_(and_(a, b), c, id);
  }
  Wire and4(const Wire& a, const Wire& b, const Wire& c, const Wire& d, const std::string& id = "") {
    return and_(and_(a, b), and_(c, d), id);
  }
  Wire name(const Wire& a, const std::string& id) {
    // Re-emits a under a stable name (an OR with itself would be silly; use
    // concat-free alias via mux on constant 1? cheapest: or with zero).
    return or_(a, zero(a.width), id);
  }

  Circuit&& take() {
    c_.finalize();
    return std::move(c_);
  }
  Circuit& peek() { return c_; }

  std::string fresh(const std::string& stem) {
    return "_" + stem + std::to_string(counter_++);
  }

 private:
  Wire unary(CellOp op, const Wire& a, const std::string& id) {
    Cell c;
    c.op = op;
    c.out = id.empty() ? fresh("n") : id;
    c.args = {a.id};
    return emit(c, a.width);
  }
  Wire binary(CellOp op, const Wire& a, const Wire& b, const std::string& id, Width ow = 0) {
    if (a.width != b.width)
      throw Error(std::string("builder: width mismatch in ") + cell_op_name(op) +
                  " of " + a.id + " and " + b.id);
    Cell c;
    c.op = op;
    c.out = id.empty() ? fresh("g") : id;
    c.args = {a.id, b.id};
    return emit(c, ow ? ow : a.width);
  }
  Wire shift(CellOp op, const Wire& a, uint32_t n, const std::string& id) {
    Cell c;
    c.op = op;
    c.out = id.empty() ? fresh("h") : id;
    c.args = {a.id};
    c.shift = n;
    return emit(c, a.width);
  }
  Wire emit(Cell c, Width w) {
    std::string out = c.out;
    c_.cells.push_back(std::move(c));
    return {out, w};
  }

  Circuit c_;
  uint64_t counter_ = 0;
};

}  // namespace upec
