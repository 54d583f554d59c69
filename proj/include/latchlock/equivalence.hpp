#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cnf.hpp"
#include "constraints.hpp"
#include "key.hpp"
#include "netlist.hpp"
#include "paths.hpp"
#include "timing.hpp"

namespace latchlock {

/// Cycle-delay counter for one anchored path or one latch cycle.
struct PathDelayCounter {
  enum class Kind { Path, Cycle } kind = Kind::Path;
  std::vector<int> latches;  // PointGraph latch indices
  std::string label;
};

struct CounterSet {
  PointGraph graph;
  std::vector<PathDelayCounter> counters;
  bool truncated = false;
};

inline CounterSet build_counters(const Netlist& n, std::size_t cap = kDefaultPathCap) {
  CounterSet cs;
  cs.graph = build_point_graph(n, DelayModel{});
  auto paths = enumerate_paths(cs.graph, cap);
  auto cycles = enumerate_cycles(cs.graph, cap);
  cs.truncated = paths.truncated || cycles.truncated;
  for (const auto& p : paths.paths) {
    PathDelayCounter c;
    c.latches = p.latches;
    c.label = cs.graph.launches[p.launch].name + "->" + detail::latch_list(n, cs.graph, p.latches) + "->" +
              cs.graph.captures[p.capture].name;
    cs.counters.push_back(std::move(c));
  }
  for (const auto& cy : cycles.cycles) {
    PathDelayCounter c;
    c.kind = PathDelayCounter::Kind::Cycle;
    c.latches = cy.latches;
    c.label = "cycle " + detail::latch_list(n, cs.graph, cy.latches);
    cs.counters.push_back(std::move(c));
  }
  return cs;
}

struct CounterValue {
  bool broken = false;
  int count = 0;
  bool operator==(const CounterValue&) const = default;
};

/// Phase-string transition count. Paths start and end at a positive-phase
/// anchor. Cycles are walked twice from a positive start so clear latches
/// pick up the phase of their real upstream latch, and the second lap is
/// counted.
inline CounterValue evaluate_counter(const CounterSet& cs, const PathDelayCounter& c, const std::vector<LatchMode>& modes) {
  CounterValue v;
  std::vector<LatchMode> m;
  for (int l : c.latches) {
    m.push_back(modes[cs.graph.latches[l]]);
    if (m.back() == LatchMode::LogicDecoy) v.broken = true;
  }
  auto next_phase = [](LatchMode x, int cur) {
    return x == LatchMode::NegPhase ? 1 : x == LatchMode::PosPhase ? 0 : cur;
  };
  int cur = 0;
  if (c.kind == PathDelayCounter::Kind::Path) {
    for (LatchMode x : m) {
      int nx = next_phase(x, cur);
      v.count += nx != cur;
      cur = nx;
    }
    v.count += cur != 0;
  } else {
    for (LatchMode x : m) cur = next_phase(x, cur);
    for (LatchMode x : m) {
      int nx = next_phase(x, cur);
      v.count += nx != cur;
      cur = nx;
    }
  }
  return v;
}

struct EquivalenceVerdict {
  enum class Witness { None, Path, LatchPhase, Cone };
  bool equivalent = true;
  Witness kind = Witness::None;
  std::size_t index = 0;  // counter index, cell id of the latch, or sink net
  std::string detail;
};

namespace detail {

// Per-key resolved view: clear latches become wires, reset-held latches
// constant 0, state latches free sources shared between keys.
struct ResolvedCopy {
  std::vector<Lit> net;
};

inline bool is_state(LatchMode m) { return is_state_mode(m); }

inline ResolvedCopy resolve_copy(CnfProblem& p, const Netlist& n, const std::vector<LatchMode>& modes,
                                 const KeyVector& key, const std::vector<Lit>& sources) {
  std::vector<CellId> wires;
  for (CellId c : n.latches())
    if (modes[c] == LatchMode::Clear) wires.push_back(c);
  auto r = topo_order(n, wires);
  if (std::holds_alternative<CycleReport>(r)) throw std::invalid_argument("key makes a latch loop transparent");
  ResolvedCopy rc;
  rc.net = sources;
  for (std::size_t i = 0; i < n.key_inputs().size(); ++i)
    rc.net[n.key_inputs()[i]] = key[i] ? CnfProblem::kTrue : CnfProblem::kFalse;
  for (CellId c : n.latches())
    if (modes[c] == LatchMode::LogicDecoy) rc.net[n.cell(c).output] = CnfProblem::kFalse;
  std::vector<Lit> buf;
  for (CellId c : std::get<std::vector<CellId>>(r)) {
    const Cell& cell = n.cell(c);
    if (is_latch(cell.kind)) {
      rc.net[cell.output] = rc.net[cell.inputs[0]];
      continue;
    }
    buf.clear();
    for (NetId i : cell.inputs) buf.push_back(rc.net[i]);
    rc.net[cell.output] = p.gate(cell.kind, buf);
  }
  return rc;
}

// Fresh source variables: inputs, reset, flip-flop and latch outputs.
inline std::vector<Lit> source_vars(CnfProblem& p, const Netlist& n) {
  std::vector<Lit> s(n.num_nets(), 0);
  for (NetId i : n.inputs()) s[i] = p.new_var();
  if (n.reset_net()) s[*n.reset_net()] = p.new_var();
  for (CellId c : n.state_elements()) s[n.cell(c).output] = p.new_var();
  return s;
}

struct Sink {
  NetId net;
  std::string name;
  CellId latch = static_cast<CellId>(-1);  // latch whose data pin this is
};

inline std::vector<Sink> sinks(const Netlist& n) {
  std::vector<Sink> s;
  for (NetId o : n.outputs()) s.push_back({o, "output " + n.net_name(o)});
  for (CellId c : n.flip_flops()) s.push_back({n.cell(c).inputs[0], "flip-flop " + n.cell(c).name});
  for (CellId c : n.latches()) s.push_back({n.cell(c).inputs[0], "latch " + n.cell(c).name, c});
  return s;
}

}  // namespace detail

/// Keys are equivalent when every latch has the same storage role and phase,
/// every counter agrees (or is broken under both keys), and every output and
/// storage-element data function agrees over the resolved netlists.
inline EquivalenceVerdict keys_equivalent(const Netlist& n, const CounterSet& cs, const KeyVector& ka,
                                          const KeyVector& kb) {
  using W = EquivalenceVerdict::Witness;
  auto ma = latch_modes(n, ka), mb = latch_modes(n, kb);
  EquivalenceVerdict v;
  for (CellId c : n.latches()) {
    bool sa = detail::is_state(ma[c]), sb = detail::is_state(mb[c]);
    if (sa != sb || (sa && ma[c] != mb[c])) {
      v = {false, W::LatchPhase, c,
           "latch " + n.cell(c).name + ": " + std::string(mode_name(ma[c])) + " vs " + std::string(mode_name(mb[c]))};
      return v;
    }
  }
  for (std::size_t i = 0; i < cs.counters.size(); ++i) {
    auto va = evaluate_counter(cs, cs.counters[i], ma), vb = evaluate_counter(cs, cs.counters[i], mb);
    if (va.broken && vb.broken) continue;
    if (!(va == vb)) {
      auto show = [](const CounterValue& x) { return x.broken ? std::string("broken") : std::to_string(x.count); };
      v = {false, W::Path, i, cs.counters[i].label + ": " + show(va) + " vs " + show(vb)};
      return v;
    }
  }
  CnfProblem p;
  auto src = detail::source_vars(p, n);
  auto a = detail::resolve_copy(p, n, ma, ka, src);
  auto b = detail::resolve_copy(p, n, mb, kb, src);
  for (const auto& s : detail::sinks(n)) {
    if (s.latch != static_cast<CellId>(-1) && !detail::is_state(ma[s.latch])) continue;
    Lit la = a.net[s.net], lb = b.net[s.net];
    if (la == lb) continue;
    Lit d = p.xor2(la, lb);
    if (d == CnfProblem::kFalse) continue;
    if (p.solve({d}) == sat::Result::Sat) {
      v = {false, W::Cone, s.net, s.name};
      return v;
    }
  }
  return v;
}

namespace detail {

// Binary population count (LSB first) of the given literals.
inline std::vector<Lit> popcount(CnfProblem& p, const std::vector<Lit>& xs) {
  std::vector<Lit> sum;
  for (Lit x : xs) {
    Lit carry = x;
    for (auto& bit : sum) {
      Lit nb = p.xor2(bit, carry);
      carry = p.and2(bit, carry);
      bit = nb;
    }
    if (carry != CnfProblem::kFalse) sum.push_back(carry);
  }
  return sum;
}

inline Lit differ(CnfProblem& p, std::vector<Lit> a, std::vector<Lit> b) {
  std::size_t w = std::max(a.size(), b.size());
  a.resize(w, CnfProblem::kFalse);
  b.resize(w, CnfProblem::kFalse);
  std::vector<Lit> d;
  for (std::size_t i = 0; i < w; ++i) d.push_back(p.xor2(a[i], b[i]));
  return p.or_all(d);
}

struct KeyLits {
  const std::vector<Lit>* keys;
  Lit k0(const Cell& c) const { return (*keys)[c.key0]; }
  Lit k1(const Cell& c) const { return (*keys)[c.key1]; }
};

inline Lit is_state_lit(CnfProblem& p, const Cell& c, const KeyLits& k) {
  if (c.kind != CellKind::KLatch) return CnfProblem::kTrue;
  return p.xor2(k.k0(c), k.k1(c));
}
inline Lit is_neg_lit(CnfProblem& p, const Cell& c, const KeyLits& k) {
  if (c.kind == CellKind::LatchN) return CnfProblem::kTrue;
  if (c.kind == CellKind::LatchP) return CnfProblem::kFalse;
  return p.and2(k.k0(c), -k.k1(c));
}
inline Lit is_reset_lit(CnfProblem& p, const Cell& c, const KeyLits& k) {
  if (c.kind != CellKind::KLatch) return CnfProblem::kFalse;
  return p.and2(-k.k0(c), -k.k1(c));
}
inline Lit is_clear_lit(CnfProblem& p, const Cell& c, const KeyLits& k) {
  if (c.kind != CellKind::KLatch) return CnfProblem::kFalse;
  return p.and2(k.k0(c), k.k1(c));
}

struct CounterLits {
  Lit broken;
  std::vector<Lit> count;
};

inline CounterLits counter_lits(CnfProblem& p, const Netlist& n, const CounterSet& cs, const PathDelayCounter& pc,
                                const KeyLits& k) {
  CounterLits out{CnfProblem::kFalse, {}};
  std::vector<Lit> trans;
  Lit cur = CnfProblem::kFalse;  // negative phase
  auto step = [&](const Cell& c, Lit cur_in) {
    Lit state = is_state_lit(p, c, k);
    return p.mux(state, cur_in, is_neg_lit(p, c, k));
  };
  if (pc.kind == PathDelayCounter::Kind::Cycle)
    for (int l : pc.latches) cur = step(n.cell(cs.graph.latches[l]), cur);
  for (int l : pc.latches) {
    const Cell& c = n.cell(cs.graph.latches[l]);
    out.broken = p.or2(out.broken, is_reset_lit(p, c, k));
    Lit nx = step(c, cur);
    trans.push_back(p.xor2(nx, cur));
    cur = nx;
  }
  if (pc.kind == PathDelayCounter::Kind::Path) trans.push_back(cur);
  out.count = popcount(p, trans);
  return out;
}

}  // namespace detail

/// Literal that is true exactly when the keys given by k0/k1 are classified
/// inequivalent by keys_equivalent. Also forbids, for both keys, latch
/// cycles whose latches are all clear (their resolved logic would be cyclic).
inline Lit build_inequivalence_circuit(CnfProblem& p, const Netlist& n, const CounterSet& cs, const std::vector<Lit>& k0,
                                       const std::vector<Lit>& k1) {
  detail::KeyLits ka{&k0}, kb{&k1};
  std::vector<Lit> diffs;

  for (CellId c : n.keyed_latches()) {
    const Cell& cell = n.cell(c);
    Lit sa = detail::is_state_lit(p, cell, ka), sb = detail::is_state_lit(p, cell, kb);
    diffs.push_back(p.xor2(sa, sb));
    diffs.push_back(p.and2(sa, p.xor2(ka.k1(cell), kb.k1(cell))));
  }

  for (const auto& pc : cs.counters) {
    auto a = detail::counter_lits(p, n, cs, pc, ka);
    auto b = detail::counter_lits(p, n, cs, pc, kb);
    Lit both_live = p.and2(-a.broken, -b.broken);
    diffs.push_back(p.xor2(a.broken, b.broken));
    diffs.push_back(p.and2(both_live, detail::differ(p, a.count, b.count)));
    if (pc.kind == PathDelayCounter::Kind::Cycle) {
      for (const auto* kl : {&ka, &kb}) {
        std::vector<Lit> not_clear;
        for (int l : pc.latches) not_clear.push_back(-detail::is_clear_lit(p, n.cell(cs.graph.latches[l]), *kl));
        p.add_clause(not_clear);
      }
    }
  }

  // Resolved copies with a per-latch key multiplexer; state latch outputs
  // are shared sources.
  auto src = detail::source_vars(p, n);
  auto order = comb_order(n);
  auto copy = [&](const detail::KeyLits& k, const std::vector<Lit>& keys) {
    std::vector<Lit> v = src;
    for (std::size_t i = 0; i < n.key_inputs().size(); ++i) v[n.key_inputs()[i]] = keys[i];
    std::vector<std::pair<CellId, Lit>> pending;
    for (CellId c : n.latches()) {
      const Cell& cell = n.cell(c);
      if (cell.kind != CellKind::KLatch) continue;  // fixed latches always store
      Lit o = p.new_var();
      pending.push_back({c, o});
      v[cell.output] = o;
    }
    std::vector<Lit> buf;
    for (CellId c : order) {
      const Cell& cell = n.cell(c);
      buf.clear();
      for (NetId i : cell.inputs) buf.push_back(v[i]);
      v[cell.output] = p.gate(cell.kind, buf);
    }
    for (auto [c, o] : pending) {
      const Cell& cell = n.cell(c);
      Lit en = p.or2(k.k0(cell), k.k1(cell));
      Lit state = detail::is_state_lit(p, cell, k);
      p.add_equal(o, p.and2(en, p.mux(state, v[cell.inputs[0]], src[cell.output])));
    }
    return v;
  };
  auto va = copy(ka, k0), vb = copy(kb, k1);
  for (const auto& s : detail::sinks(n)) {
    Lit d = p.xor2(va[s.net], vb[s.net]);
    if (s.latch != static_cast<CellId>(-1)) {
      const Cell& cell = n.cell(s.latch);
      d = p.and2(d, p.and2(detail::is_state_lit(p, cell, ka), detail::is_state_lit(p, cell, kb)));
    }
    diffs.push_back(d);
  }
  return p.or_all(diffs);
}

}  // namespace latchlock
