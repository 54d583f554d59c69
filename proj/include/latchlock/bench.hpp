#pragma once

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "netlist.hpp"

namespace latchlock {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_args(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    auto comma = s.find(',', start);
    out.emplace_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Reads the extended BENCH format. Throws NetlistError with the offending
/// line number for syntax and per-line semantic errors; whole-netlist checks
/// (drivers, cycles) are reported without a line.
inline Netlist parse_bench(std::istream& is, std::string name = "top") {
  using detail::trim;
  Netlist n(std::move(name));

  struct PendingKLatch {
    std::string out, d, k0, k1;
    int line;
  };
  struct Pending {
    CellKind kind;
    std::string out;
    std::vector<std::string> ins;
    int line;
  };
  std::vector<std::variant<Pending, PendingKLatch>> cells;
  std::unordered_map<std::string, int> driver_line;
  int clocks = 0;

  auto claim = [&](const std::string& net, int line) {
    auto [it, fresh] = driver_line.emplace(net, line);
    if (!fresh)
      throw NetlistError("net '" + net + "' already driven (line " + std::to_string(it->second) + ")", line);
  };
  auto ident = [&](const std::string& s, int line) {
    if (!is_identifier(s)) throw NetlistError("invalid identifier '" + s + "'", line);
  };

  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;

    auto open = line.find('(');
    auto close = line.rfind(')');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open || close + 1 != line.size())
      throw NetlistError("syntax error: expected '<decl>(<id>)' or '<out> = <KIND>(...)'", lineno);

    auto eq = line.find('=');
    if (eq == std::string_view::npos || eq > open) {
      auto head = trim(line.substr(0, open));
      auto arg = std::string(trim(line.substr(open + 1, close - open - 1)));
      ident(arg, lineno);
      if (head == "INPUT") {
        claim(arg, lineno);
        n.add_input(arg);
      } else if (head == "OUTPUT") {
        n.add_output(arg);
      } else if (head == "KEYINPUT") {
        claim(arg, lineno);
        n.add_key_input(arg);
      } else if (head == "RESET") {
        if (n.reset_net()) throw NetlistError("only one reset net is supported", lineno);
        claim(arg, lineno);
        n.set_reset(arg);
      } else if (head == "CLOCK") {
        if (++clocks > 1) throw NetlistError("multiple clock domains are not supported", lineno);
      } else {
        throw NetlistError("unknown declaration '" + std::string(head) + "'", lineno);
      }
      continue;
    }

    auto out = std::string(trim(line.substr(0, eq)));
    auto kind_s = trim(line.substr(eq + 1, open - eq - 1));
    ident(out, lineno);
    auto kind = kind_from_name(kind_s);
    if (!kind) throw NetlistError("unknown cell kind '" + std::string(kind_s) + "'", lineno);
    auto args = detail::split_args(line.substr(open + 1, close - open - 1));
    for (const auto& a : args) ident(a, lineno);
    claim(out, lineno);

    if (*kind == CellKind::KLatch) {
      if (args.size() != 3)
        throw NetlistError("arity mismatch: KLATCH takes (data, key0, key1), got " + std::to_string(args.size()), lineno);
      cells.emplace_back(PendingKLatch{out, args[0], args[1], args[2], lineno});
    } else {
      auto [lo, hi] = arity(*kind);
      int got = static_cast<int>(args.size());
      if (got < lo || got > hi)
        throw NetlistError("arity mismatch: " + std::string(kind_name(*kind)) + " with " + std::to_string(got) + " inputs",
                           lineno);
      cells.emplace_back(Pending{*kind, out, args, lineno});
    }
  }

  for (auto& pc : cells) {
    if (auto* p = std::get_if<Pending>(&pc)) {
      for (const auto& i : p->ins)
        if (!driver_line.count(i)) throw NetlistError("undeclared net '" + i + "'", p->line);
      n.add_cell(p->kind, p->out, p->ins);
    } else {
      auto& k = std::get<PendingKLatch>(pc);
      if (!driver_line.count(k.d)) throw NetlistError("undeclared net '" + k.d + "'", k.line);
      int i0 = n.find_net(k.k0) ? n.key_index(*n.find_net(k.k0)) : -1;
      int i1 = n.find_net(k.k1) ? n.key_index(*n.find_net(k.k1)) : -1;
      if (i0 < 0) throw NetlistError("'" + k.k0 + "' is not a KEYINPUT", k.line);
      if (i1 < 0) throw NetlistError("'" + k.k1 + "' is not a KEYINPUT", k.line);
      n.add_cell(CellKind::KLatch, k.out, {k.d}, i0, i1);
    }
  }
  for (NetId o : n.outputs())
    if (!driver_line.count(n.net_name(o))) throw NetlistError("output '" + n.net_name(o) + "' is never driven");

  require_valid(n);
  return n;
}

inline Netlist parse_bench(const std::string& text, std::string name = "top") {
  std::istringstream is(text);
  return parse_bench(is, std::move(name));
}

/// Canonical text form: declarations first (inputs, keys, reset, outputs),
/// then cells in netlist order. Reparsing yields the same netlist.
inline std::string write_bench(const Netlist& n) {
  std::ostringstream os;
  os << "# " << n.name() << "\n";
  os << "# " << n.inputs().size() << " inputs, " << n.outputs().size() << " outputs, " << n.key_inputs().size()
     << " key bits, " << n.num_cells() << " cells\n";
  for (NetId i : n.inputs()) os << "INPUT(" << n.net_name(i) << ")\n";
  for (NetId k : n.key_inputs()) os << "KEYINPUT(" << n.net_name(k) << ")\n";
  if (n.reset_net()) os << "RESET(" << n.net_name(*n.reset_net()) << ")\n";
  for (NetId o : n.outputs()) os << "OUTPUT(" << n.net_name(o) << ")\n";
  for (const auto& c : n.cells()) {
    os << n.net_name(c.output) << " = " << kind_name(c.kind) << "(";
    for (std::size_t i = 0; i < c.inputs.size(); ++i) os << (i ? ", " : "") << n.net_name(c.inputs[i]);
    if (c.kind == CellKind::KLatch)
      os << ", " << n.net_name(n.key_inputs().at(c.key0)) << ", " << n.net_name(n.key_inputs().at(c.key1));
    os << ")\n";
  }
  return os.str();
}

}  // namespace latchlock
