#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace latchlock {

using NetId = std::uint32_t;
using CellId = std::uint32_t;
inline constexpr NetId kNoNet = static_cast<NetId>(-1);

enum class CellKind : std::uint8_t {
  And,
  Nand,
  Or,
  Nor,
  Xor,
  Xnor,
  Not,
  Buf,
  Mux,
  Const0,
  Const1,
  Dff,
  KLatch,
  LatchP,
  LatchN,
};

inline constexpr std::string_view kind_name(CellKind k) {
  switch (k) {
    case CellKind::And: return "AND";
    case CellKind::Nand: return "NAND";
    case CellKind::Or: return "OR";
    case CellKind::Nor: return "NOR";
    case CellKind::Xor: return "XOR";
    case CellKind::Xnor: return "XNOR";
    case CellKind::Not: return "NOT";
    case CellKind::Buf: return "BUF";
    case CellKind::Mux: return "MUX";
    case CellKind::Const0: return "CONST0";
    case CellKind::Const1: return "CONST1";
    case CellKind::Dff: return "DFF";
    case CellKind::KLatch: return "KLATCH";
    case CellKind::LatchP: return "LATCH_P";
    case CellKind::LatchN: return "LATCH_N";
  }
  return "?";
}

inline std::optional<CellKind> kind_from_name(std::string_view s) {
  static constexpr CellKind all[] = {
      CellKind::And,    CellKind::Nand,   CellKind::Or,     CellKind::Nor,    CellKind::Xor,
      CellKind::Xnor,   CellKind::Not,    CellKind::Buf,    CellKind::Mux,    CellKind::Const0,
      CellKind::Const1, CellKind::Dff,    CellKind::KLatch, CellKind::LatchP, CellKind::LatchN};
  for (auto k : all)
    if (kind_name(k) == s) return k;
  if (s == "BUFF") return CellKind::Buf;
  if (s == "INV") return CellKind::Not;
  return std::nullopt;
}

inline constexpr bool is_latch(CellKind k) {
  return k == CellKind::KLatch || k == CellKind::LatchP || k == CellKind::LatchN;
}
inline constexpr bool is_sequential(CellKind k) { return k == CellKind::Dff || is_latch(k); }
inline constexpr bool is_combinational(CellKind k) { return !is_sequential(k); }
inline constexpr bool is_constant(CellKind k) { return k == CellKind::Const0 || k == CellKind::Const1; }

// Allowed data-input count for a kind: {min, max}. KLATCH key references are
// not data inputs.
inline constexpr std::pair<int, int> arity(CellKind k) {
  switch (k) {
    case CellKind::Not:
    case CellKind::Buf:
    case CellKind::Dff:
    case CellKind::KLatch:
    case CellKind::LatchP:
    case CellKind::LatchN: return {1, 1};
    case CellKind::Mux: return {3, 3};
    case CellKind::Const0:
    case CellKind::Const1: return {0, 0};
    default: return {2, 1 << 16};
  }
}

struct Cell {
  CellKind kind = CellKind::Buf;
  std::vector<NetId> inputs;  // MUX: sel, a (sel=0), b (sel=1)
  NetId output = kNoNet;
  std::string name;           // cells are named after their output net
  int key0 = -1;              // KLATCH only: index into Netlist::key_inputs()
  int key1 = -1;
};

struct Diagnostic {
  enum class Kind { MultipleDrivers, Undriven, Arity, KeyIndex, CombinationalCycle, DuplicateName, BadName, Port };
  Kind kind;
  std::string message;
  std::vector<std::string> objects;
};

class NetlistError : public std::runtime_error {
 public:
  explicit NetlistError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!alpha(s[0])) return false;
  return std::all_of(s.begin() + 1, s.end(), [&](char c) { return alpha(c) || digit(c) || c == '.'; });
}

/// Gate-level sequential netlist with a single implicit clock and an implicit
/// active-high reset. Mutation goes through the add_* methods; analyses take
/// the netlist by const reference and rely on the derived indices, which are
/// refreshed by every mutating call.
class Netlist {
 public:
  enum class DriverKind : std::uint8_t { None, Input, Key, Reset, Cell, Multiple };

  Netlist() = default;
  explicit Netlist(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

  NetId net(std::string_view name) {
    auto it = net_index_.find(std::string(name));
    if (it != net_index_.end()) return it->second;
    NetId id = static_cast<NetId>(net_names_.size());
    net_names_.emplace_back(name);
    net_index_.emplace(std::string(name), id);
    drivers_.push_back(DriverKind::None);
    driver_cell_.push_back(-1);
    fanout_.emplace_back();
    return id;
  }
  std::optional<NetId> find_net(std::string_view name) const {
    auto it = net_index_.find(std::string(name));
    if (it == net_index_.end()) return std::nullopt;
    return it->second;
  }
  NetId net_id(std::string_view name) const {
    auto id = find_net(name);
    if (!id) throw NetlistError("unknown net '" + std::string(name) + "'");
    return *id;
  }
  const std::string& net_name(NetId n) const { return net_names_.at(n); }
  std::size_t num_nets() const { return net_names_.size(); }

  NetId add_input(std::string_view name) {
    NetId n = net(name);
    inputs_.push_back(n);
    mark_driver(n, DriverKind::Input, -1);
    return n;
  }
  void add_output(std::string_view name) { outputs_.push_back(net(name)); }
  NetId add_key_input(std::string_view name) {
    NetId n = net(name);
    key_inputs_.push_back(n);
    mark_driver(n, DriverKind::Key, -1);
    return n;
  }
  NetId set_reset(std::string_view name) {
    if (reset_) throw NetlistError("more than one reset net declared");
    NetId n = net(name);
    reset_ = n;
    mark_driver(n, DriverKind::Reset, -1);
    return n;
  }

  CellId add_cell(CellKind kind, std::string_view out, const std::vector<std::string>& ins, int key0 = -1,
                  int key1 = -1) {
    Cell c;
    c.kind = kind;
    c.output = net(out);
    c.name = std::string(out);
    for (const auto& i : ins) c.inputs.push_back(net(i));
    c.key0 = key0;
    c.key1 = key1;
    return push_cell(std::move(c));
  }
  CellId add_cell(Cell c) { return push_cell(std::move(c)); }

  /// Reconnects input `pin` of `cell` to net `to`.
  void rewire(CellId cell, std::size_t pin, NetId to) {
    Cell& c = cells_.at(cell);
    NetId from = c.inputs.at(pin);
    c.inputs[pin] = to;
    auto& fo = fanout_[from];
    if (std::count(c.inputs.begin(), c.inputs.end(), from) == 0) fo.erase(std::remove(fo.begin(), fo.end(), cell), fo.end());
    if (std::find(fanout_[to].begin(), fanout_[to].end(), cell) == fanout_[to].end()) fanout_[to].push_back(cell);
  }

  /// Removes cells in `dead` (output nets stay but become undriven) and
  /// renumbers the remaining cells, preserving order.
  void remove_cells(const std::vector<CellId>& dead) {
    std::vector<bool> kill(cells_.size(), false);
    for (auto c : dead) kill.at(c) = true;
    std::vector<Cell> kept;
    kept.reserve(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (!kill[i]) kept.push_back(std::move(cells_[i]));
    cells_ = std::move(kept);
    reindex();
  }

  void set_outputs(std::vector<NetId> outs) { outputs_ = std::move(outs); }

  const std::vector<NetId>& inputs() const { return inputs_; }
  const std::vector<NetId>& outputs() const { return outputs_; }
  const std::vector<NetId>& key_inputs() const { return key_inputs_; }
  std::optional<NetId> reset_net() const { return reset_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const Cell& cell(CellId c) const { return cells_.at(c); }
  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_keys() const { return key_inputs_.size(); }

  DriverKind driver_kind(NetId n) const { return drivers_.at(n); }
  /// Driving cell of a net, if it is driven by exactly one cell.
  std::optional<CellId> driver(NetId n) const {
    if (drivers_.at(n) != DriverKind::Cell) return std::nullopt;
    return static_cast<CellId>(driver_cell_[n]);
  }
  const std::vector<CellId>& fanout(NetId n) const { return fanout_.at(n); }

  std::optional<CellId> find_cell(std::string_view name) const {
    auto it = cell_index_.find(std::string(name));
    if (it == cell_index_.end()) return std::nullopt;
    return it->second;
  }
  CellId cell_id(std::string_view name) const {
    auto c = find_cell(name);
    if (!c) throw NetlistError("unknown cell '" + std::string(name) + "'");
    return *c;
  }

  int key_index(NetId n) const {
    for (std::size_t i = 0; i < key_inputs_.size(); ++i)
      if (key_inputs_[i] == n) return static_cast<int>(i);
    return -1;
  }

  std::vector<CellId> cells_of(bool (*pred)(CellKind)) const {
    std::vector<CellId> r;
    for (CellId i = 0; i < cells_.size(); ++i)
      if (pred(cells_[i].kind)) r.push_back(i);
    return r;
  }
  std::vector<CellId> latches() const { return cells_of(&is_latch); }
  std::vector<CellId> keyed_latches() const {
    return cells_of([](CellKind k) { return k == CellKind::KLatch; });
  }
  std::vector<CellId> flip_flops() const {
    return cells_of([](CellKind k) { return k == CellKind::Dff; });
  }
  std::vector<CellId> state_elements() const { return cells_of(&is_sequential); }

  bool is_output(NetId n) const { return std::find(outputs_.begin(), outputs_.end(), n) != outputs_.end(); }

  /// Generates a net name with the reserved prefix that is not yet in use.
  std::string fresh_name(std::string_view stem) {
    for (;;) {
      std::string s = "__ll_" + std::string(stem) + "_" + std::to_string(fresh_counter_++);
      if (!net_index_.count(s)) return s;
    }
  }

 private:
  CellId push_cell(Cell c) {
    CellId id = static_cast<CellId>(cells_.size());
    mark_driver(c.output, DriverKind::Cell, static_cast<int>(id));
    for (NetId in : c.inputs) {
      auto& fo = fanout_[in];
      if (fo.empty() || fo.back() != id) fo.push_back(id);
    }
    cell_index_.emplace(c.name, id);
    cells_.push_back(std::move(c));
    return id;
  }

  void mark_driver(NetId n, DriverKind k, int cell) {
    if (drivers_[n] != DriverKind::None) {
      drivers_[n] = DriverKind::Multiple;
      return;
    }
    drivers_[n] = k;
    driver_cell_[n] = cell;
  }

  void reindex() {
    std::fill(drivers_.begin(), drivers_.end(), DriverKind::None);
    std::fill(driver_cell_.begin(), driver_cell_.end(), -1);
    for (auto& f : fanout_) f.clear();
    cell_index_.clear();
    for (NetId n : inputs_) mark_driver(n, DriverKind::Input, -1);
    for (NetId n : key_inputs_) mark_driver(n, DriverKind::Key, -1);
    if (reset_) mark_driver(*reset_, DriverKind::Reset, -1);
    for (CellId id = 0; id < cells_.size(); ++id) {
      const Cell& c = cells_[id];
      mark_driver(c.output, DriverKind::Cell, static_cast<int>(id));
      for (NetId in : c.inputs) {
        auto& fo = fanout_[in];
        if (fo.empty() || fo.back() != id) fo.push_back(id);
      }
      cell_index_.emplace(c.name, id);
    }
  }

  std::string name_;
  std::vector<std::string> net_names_;
  std::unordered_map<std::string, NetId> net_index_;
  std::unordered_map<std::string, CellId> cell_index_;
  std::vector<DriverKind> drivers_;
  std::vector<int> driver_cell_;
  std::vector<std::vector<CellId>> fanout_;
  std::vector<NetId> inputs_, outputs_, key_inputs_;
  std::optional<NetId> reset_;
  std::vector<Cell> cells_;
  std::uint64_t fresh_counter_ = 0;
};

// ---------------------------------------------------------------------------
// Structural analyses
// ---------------------------------------------------------------------------

struct CycleReport {
  std::vector<CellId> cells;
};

using TopoResult = std::variant<std::vector<CellId>, CycleReport>;

namespace detail {

// Kahn ordering over the cells selected by `member`; edges follow data pins
// whose driver is also a member. Leftover cells form (or feed) a cycle; the
// report is trimmed to cells lying on one.
template <typename Member>
TopoResult topo_over(const Netlist& n, Member member) {
  const auto& cells = n.cells();
  std::vector<int> indeg(cells.size(), 0);
  std::vector<bool> in(cells.size(), false);
  for (CellId c = 0; c < cells.size(); ++c) in[c] = member(c);
  for (CellId c = 0; c < cells.size(); ++c) {
    if (!in[c]) continue;
    for (NetId i : cells[c].inputs) {
      auto d = n.driver(i);
      if (d && in[*d]) ++indeg[c];
    }
  }
  std::vector<CellId> order, queue;
  for (CellId c = 0; c < cells.size(); ++c)
    if (in[c] && indeg[c] == 0) queue.push_back(c);
  std::size_t head = 0;
  while (head < queue.size()) {
    CellId c = queue[head++];
    order.push_back(c);
    for (CellId f : n.fanout(cells[c].output)) {
      if (!in[f]) continue;
      for (NetId i : cells[f].inputs)
        if (i == cells[c].output && --indeg[f] == 0) queue.push_back(f);
    }
  }
  std::size_t members = static_cast<std::size_t>(std::count(in.begin(), in.end(), true));
  if (order.size() == members) return order;

  // Peel cells that only feed the cycle, keeping strongly-connected leftovers.
  std::vector<bool> left(cells.size(), false);
  for (CellId c = 0; c < cells.size(); ++c) left[c] = in[c] && indeg[c] > 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (CellId c = 0; c < cells.size(); ++c) {
      if (!left[c]) continue;
      bool feeds = false;
      for (CellId f : n.fanout(cells[c].output))
        if (left[f]) feeds = true;
      if (!feeds) {
        left[c] = false;
        changed = true;
      }
    }
  }
  CycleReport r;
  for (CellId c = 0; c < cells.size(); ++c)
    if (left[c]) r.cells.push_back(c);
  return r;
}

}  // namespace detail

/// Topological order over combinational cells plus the latches in
/// `transparent` (treated as wires). DFFs and other latches are sources.
inline TopoResult topo_order(const Netlist& n, const std::vector<CellId>& transparent) {
  std::vector<bool> t(n.num_cells(), false);
  for (auto c : transparent) t.at(c) = true;
  return detail::topo_over(n, [&](CellId c) { return is_combinational(n.cell(c).kind) || t[c]; });
}

enum class ConeDirection { Fanin, Fanout };

/// Transitive cone from `roots`, stopping at sequential cells (which are
/// included as frontier). Roots are not part of the result unless reached.
inline std::vector<CellId> fan_cones(const Netlist& n, const std::vector<CellId>& roots, ConeDirection dir) {
  std::vector<bool> seen(n.num_cells(), false);
  std::vector<CellId> stack, out;
  auto visit = [&](CellId c) {
    if (seen[c]) return;
    seen[c] = true;
    out.push_back(c);
    if (is_combinational(n.cell(c).kind)) stack.push_back(c);
  };
  auto expand = [&](CellId c) {
    if (dir == ConeDirection::Fanin) {
      for (NetId i : n.cell(c).inputs)
        if (auto d = n.driver(i)) visit(*d);
    } else {
      for (CellId f : n.fanout(n.cell(c).output)) visit(f);
    }
  };
  for (CellId r : roots) expand(r);
  while (!stack.empty()) {
    CellId c = stack.back();
    stack.pop_back();
    expand(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Structural diagnostics; empty iff the netlist is well formed.
inline std::vector<Diagnostic> validate(const Netlist& n) {
  std::vector<Diagnostic> diags;
  using K = Diagnostic::Kind;

  std::vector<int> driver_count(n.num_nets(), 0);
  for (NetId i : n.inputs()) ++driver_count[i];
  for (NetId k : n.key_inputs()) ++driver_count[k];
  if (n.reset_net()) ++driver_count[*n.reset_net()];
  for (const auto& c : n.cells()) ++driver_count[c.output];

  std::vector<bool> used(n.num_nets(), false);
  for (const auto& c : n.cells())
    for (NetId i : c.inputs) used[i] = true;
  for (NetId o : n.outputs()) used[o] = true;

  for (NetId id = 0; id < n.num_nets(); ++id) {
    const auto& nm = n.net_name(id);
    if (!is_identifier(nm)) diags.push_back({K::BadName, "invalid identifier '" + nm + "'", {nm}});
    if (driver_count[id] > 1)
      diags.push_back({K::MultipleDrivers, "net '" + nm + "' has " + std::to_string(driver_count[id]) + " drivers", {nm}});
    else if (driver_count[id] == 0 && used[id])
      diags.push_back({K::Undriven, "net '" + nm + "' is used but has no driver", {nm}});
  }

  std::unordered_map<std::string, int> names;
  for (const auto& c : n.cells()) {
    if (++names[c.name] == 2) diags.push_back({K::DuplicateName, "duplicate cell name '" + c.name + "'", {c.name}});
    auto [lo, hi] = arity(c.kind);
    int got = static_cast<int>(c.inputs.size());
    if (got < lo || got > hi)
      diags.push_back({K::Arity,
                       "cell '" + c.name + "' (" + std::string(kind_name(c.kind)) + ") has " + std::to_string(got) +
                           " inputs",
                       {c.name}});
    int nk = static_cast<int>(n.num_keys());
    if (c.kind == CellKind::KLatch) {
      if (c.key0 < 0 || c.key0 >= nk || c.key1 < 0 || c.key1 >= nk || c.key0 == c.key1)
        diags.push_back({K::KeyIndex, "keyed latch '" + c.name + "' has invalid key references", {c.name}});
    } else if (c.key0 != -1 || c.key1 != -1) {
      diags.push_back({K::KeyIndex, "cell '" + c.name + "' carries key references but is not a KLATCH", {c.name}});
    }
  }

  std::unordered_map<std::string, int> port_names;
  for (NetId o : n.outputs())
    if (++port_names[n.net_name(o)] == 2)
      diags.push_back({K::Port, "output '" + n.net_name(o) + "' declared twice", {n.net_name(o)}});

  // Cycles are only legal through a sequential cell.
  auto topo = detail::topo_over(n, [&](CellId c) { return is_combinational(n.cell(c).kind); });
  if (auto* cyc = std::get_if<CycleReport>(&topo)) {
    Diagnostic d{K::CombinationalCycle, "combinational cycle through nets:", {}};
    for (CellId c : cyc->cells) {
      d.objects.push_back(n.net_name(n.cell(c).output));
      d.message += " " + n.net_name(n.cell(c).output);
    }
    diags.push_back(std::move(d));
  }
  return diags;
}

inline void require_valid(const Netlist& n) {
  auto d = validate(n);
  if (!d.empty()) throw NetlistError(d.front().message);
}

}  // namespace latchlock
