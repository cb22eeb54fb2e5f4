// Line-oriented textual netlist format, the repo's on-disk design exchange
// format. print_netlist(parse_netlist(x)) is bit-exact for canonical input,
// and parse_netlist(print_netlist(c)) is structurally equal to c.
//
//   module <name>
//   input <id> <width>
//   reg <id> <width> next=<sig> [reset=0x..:<w>] [class=arch|micro]
//   mem <id> <addrw> <dataw> [blackbox]
//   rport <memid> <addr> <data> <en>
//   wport <memid> <addr> <data> <en>
//   const <id> = 0x..:<w>
//   slice <id> = <sig>, <hi>, <lo>
//   shl/shr <id> = <sig>, <amount>
//   <op> <id> = <operands, comma separated>
//   output <sig>
//   # comment
#pragma once

#include <string>

#include "upec/netlist.hpp"

namespace upec {

struct ParseError : Error {
  int line, column;
  ParseError(const std::string& msg, int line, int column)
      : Error(msg + " at line " + std::to_string(line) + ":" + std::to_string(column)),
        line(line), column(column) {}
};

Circuit parse_netlist(const std::string& text);
std::string print_netlist(const Circuit& c);

// Structural equality (field-by-field, order-sensitive).
bool structurally_equal(const Circuit& a, const Circuit& b);

}  // namespace upec
