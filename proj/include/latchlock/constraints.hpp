#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "cnf.hpp"
#include "key.hpp"
#include "netlist.hpp"
#include "paths.hpp"
#include "timing.hpp"

namespace latchlock {

/// Small hash-consed Boolean circuit over key bits. Every required node is a
/// constraint on the key; constraints carry a family and a source label.
class KeyCircuit {
 public:
  enum class Op : std::uint8_t { Const, Key, Not, And, Or, Xor };
  struct Node {
    Op op;
    int a = -1, b = -1;
  };
  enum class Family : std::uint8_t { Loop, Timing };
  struct Constraint {
    int node;
    Family family;
    std::string source;
  };

  KeyCircuit() {
    nodes_.push_back({Op::Const, 0, -1});
    nodes_.push_back({Op::Const, 1, -1});
  }
  static constexpr int kFalse = 0, kTrue = 1;

  int constant(bool v) const { return v ? kTrue : kFalse; }
  int key(int i) { return intern({Op::Key, i, -1}); }
  int lnot(int x) {
    if (x == kFalse) return kTrue;
    if (x == kTrue) return kFalse;
    if (nodes_[x].op == Op::Not) return nodes_[x].a;
    return intern({Op::Not, x, -1});
  }
  int land(int x, int y) {
    if (x == kFalse || y == kFalse) return kFalse;
    if (x == kTrue) return y;
    if (y == kTrue || x == y) return x;
    if (x > y) std::swap(x, y);
    return intern({Op::And, x, y});
  }
  int lor(int x, int y) {
    if (x == kTrue || y == kTrue) return kTrue;
    if (x == kFalse) return y;
    if (y == kFalse || x == y) return x;
    if (x > y) std::swap(x, y);
    return intern({Op::Or, x, y});
  }
  int lxor(int x, int y) {
    if (x == kFalse) return y;
    if (y == kFalse) return x;
    if (x == kTrue) return lnot(y);
    if (y == kTrue) return lnot(x);
    if (x == y) return kFalse;
    if (x > y) std::swap(x, y);
    return intern({Op::Xor, x, y});
  }
  int mux(int s, int a, int b) { return lor(land(s, b), land(lnot(s), a)); }  // s ? b : a
  int lor_all(const std::vector<int>& xs) {
    int r = kFalse;
    for (int x : xs) r = lor(r, x);
    return r;
  }
  /// At least `r` (1 or 2) of `xs` are true; sequential counter.
  int at_least(const std::vector<int>& xs, int r) {
    if (r <= 0) return kTrue;
    int s1 = kFalse, s2 = kFalse;
    for (int x : xs) {
      s2 = lor(s2, land(s1, x));
      s1 = lor(s1, x);
    }
    if (r == 1) return s1;
    if (r == 2) return s2;
    throw std::invalid_argument("at_least supports r <= 2");
  }

  void require(int node, Family f, std::string source) {
    if (node == kTrue) return;
    auto key = std::make_pair(node, f);
    if (required_.count(key)) return;
    required_.emplace(key, constraints_.size());
    constraints_.push_back({node, f, std::move(source)});
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  /// True iff every constraint (of the selected families) holds.
  bool satisfied(const KeyVector& k, bool loop = true, bool timing = true) const {
    auto v = eval(k);
    for (const auto& c : constraints_)
      if (selected(c.family, loop, timing) && !v[c.node]) return false;
    return true;
  }
  std::vector<std::uint8_t> eval(const KeyVector& k) const {
    std::vector<std::uint8_t> v(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& nd = nodes_[i];
      switch (nd.op) {
        case Op::Const: v[i] = static_cast<std::uint8_t>(nd.a); break;
        case Op::Key: v[i] = k[nd.a]; break;
        case Op::Not: v[i] = !v[nd.a]; break;
        case Op::And: v[i] = v[nd.a] && v[nd.b]; break;
        case Op::Or: v[i] = v[nd.a] || v[nd.b]; break;
        case Op::Xor: v[i] = v[nd.a] != v[nd.b]; break;
      }
    }
    return v;
  }

  /// Evaluates 64 keys at once; `key_words[i]` holds bit i of each lane.
  void eval_words(const std::vector<std::uint64_t>& key_words, std::vector<std::uint64_t>& v) const {
    v.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& nd = nodes_[i];
      switch (nd.op) {
        case Op::Const: v[i] = nd.a ? ~0ull : 0; break;
        case Op::Key: v[i] = key_words[nd.a]; break;
        case Op::Not: v[i] = ~v[nd.a]; break;
        case Op::And: v[i] = v[nd.a] & v[nd.b]; break;
        case Op::Or: v[i] = v[nd.a] | v[nd.b]; break;
        case Op::Xor: v[i] = v[nd.a] ^ v[nd.b]; break;
      }
    }
  }

  /// Adds the constraints to `p` over the given key literals.
  void encode(CnfProblem& p, const std::vector<Lit>& keys, bool loop = true, bool timing = true) const {
    std::vector<Lit> lit(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& nd = nodes_[i];
      switch (nd.op) {
        case Op::Const: lit[i] = nd.a ? CnfProblem::kTrue : CnfProblem::kFalse; break;
        case Op::Key: lit[i] = keys.at(nd.a); break;
        case Op::Not: lit[i] = -lit[nd.a]; break;
        case Op::And: lit[i] = p.and2(lit[nd.a], lit[nd.b]); break;
        case Op::Or: lit[i] = p.or2(lit[nd.a], lit[nd.b]); break;
        case Op::Xor: lit[i] = p.xor2(lit[nd.a], lit[nd.b]); break;
      }
    }
    for (const auto& c : constraints_)
      if (selected(c.family, loop, timing)) p.add_unit(lit[c.node]);
  }

  static bool selected(Family f, bool loop, bool timing) { return f == Family::Loop ? loop : timing; }

 private:
  int intern(Node nd) {
    auto key = std::make_tuple(static_cast<int>(nd.op), nd.a, nd.b);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(nd);
    index_.emplace(key, id);
    return id;
  }

  std::vector<Node> nodes_;
  std::map<std::tuple<int, int, int>, int> index_;
  std::vector<Constraint> constraints_;
  std::map<std::pair<int, Family>, std::size_t> required_;
};

struct KeyConstraintSet {
  KeyCircuit circuit;
  bool loops_truncated = false;
  bool windows_truncated = false;
  std::size_t cycles = 0, windows = 0;
};

namespace detail {

// Key-circuit node for "latch is transparent in this phase".
inline int transparent_node(KeyCircuit& kc, const Cell& cell, Phase phase) {
  switch (cell.kind) {
    case CellKind::KLatch: return kc.key(phase == Phase::High ? cell.key1 : cell.key0);
    case CellKind::LatchP: return kc.constant(phase == Phase::High);
    case CellKind::LatchN: return kc.constant(phase == Phase::Low);
    default: return kc.constant(false);
  }
}

inline std::string latch_list(const Netlist& n, const PointGraph& g, const std::vector<int>& ls) {
  std::string s;
  for (int l : ls) s += (s.empty() ? "" : ",") + n.cell(g.latches[l]).name;
  return s;
}

}  // namespace detail

/// Per latch cycle and clock phase: not every latch on the cycle may be
/// transparent in that phase (a latch held in reset is never transparent).
inline void gen_loop_constraints(const Netlist& n, KeyConstraintSet& cs, std::size_t cap = kDefaultPathCap) {
  auto g = build_point_graph(n, DelayModel{});
  auto cycles = enumerate_cycles(g, cap);
  cs.loops_truncated = cycles.truncated;
  cs.cycles = cycles.cycles.size();
  auto& kc = cs.circuit;
  for (const auto& cyc : cycles.cycles) {
    std::string names = detail::latch_list(n, g, cyc.latches);
    for (Phase ph : {Phase::High, Phase::Low}) {
      std::vector<int> terms;
      for (int l : cyc.latches) terms.push_back(kc.lnot(detail::transparent_node(kc, n.cell(g.latches[l]), ph)));
      kc.require(kc.lor_all(terms), KeyCircuit::Family::Loop,
                 "cycle " + names + (ph == Phase::High ? " high" : " low"));
    }
  }
}

/// Key-circuit form of resolve_path: negative-phase flag, transition flag and
/// broken flag per path prefix.
struct PathNodes {
  std::vector<int> transition;
  int broken = KeyCircuit::kFalse;
  int transitions_end = KeyCircuit::kFalse;  // phase change into the capture anchor
};

inline PathNodes path_nodes(KeyCircuit& kc, const Netlist& n, const PointGraph& g, const std::vector<int>& latches) {
  PathNodes pn;
  int neg = KeyCircuit::kFalse;
  for (int l : latches) {
    const Cell& cell = n.cell(g.latches[l]);
    int next;
    if (cell.kind == CellKind::KLatch) {
      int k0 = kc.key(cell.key0), k1 = kc.key(cell.key1);
      int state = kc.lxor(k0, k1);
      next = kc.mux(state, neg, k0);
      pn.broken = kc.lor(pn.broken, kc.land(kc.lnot(k0), kc.lnot(k1)));
    } else {
      next = kc.constant(cell.kind == CellKind::LatchN);
    }
    pn.transition.push_back(kc.lxor(next, neg));
    neg = next;
  }
  pn.transitions_end = neg;
  return pn;
}

inline void gen_timing_constraints(const Netlist& n, const DelayModel& dm, const ClockSpec& clk, KeyConstraintSet& cs,
                                   std::size_t cap = kDefaultPathCap) {
  auto ws = enumerate_windows(n, dm, clk, cap);
  cs.windows_truncated = ws.truncated();
  cs.windows = ws.windows.size();
  auto& kc = cs.circuit;
  if (Delay d = longest_plain_edge(ws.graph); d > clk.period)
    kc.require(KeyCircuit::kFalse, KeyCircuit::Family::Timing,
               "latch-free path of " + std::to_string(d) + " exceeds the period");
  std::vector<PathNodes> per_path(ws.paths.paths.size());
  std::vector<bool> built(ws.paths.paths.size(), false);
  for (const auto& w : ws.windows) {
    if (!built[w.path]) {
      per_path[w.path] = path_nodes(kc, n, ws.graph, ws.paths.paths[w.path].latches);
      built[w.path] = true;
    }
    const auto& pn = per_path[w.path];
    std::vector<int> t;
    for (int k = w.first + 1; k < w.last; ++k) t.push_back(pn.transition[k - 1]);
    int ok = kc.lor(pn.broken, kc.at_least(t, w.required));
    const auto& p = ws.paths.paths[w.path];
    kc.require(ok, KeyCircuit::Family::Timing,
               "path " + ws.graph.launches[p.launch].name + "->" + ws.graph.captures[p.capture].name + " points " +
                   std::to_string(w.first) + ".." + std::to_string(w.last) + " needs " + std::to_string(w.required));
  }
}

inline KeyConstraintSet gen_constraints(const Netlist& n, const DelayModel& dm, const ClockSpec& clk,
                                        std::size_t cap = kDefaultPathCap) {
  KeyConstraintSet cs;
  gen_loop_constraints(n, cs, cap);
  gen_timing_constraints(n, dm, clk, cs, cap);
  return cs;
}

struct KeyCounts {
  std::size_t bits = 0;
  std::uint64_t total = 0, loop = 0, timing = 0, both = 0;
};

/// Exact counts of keys satisfying the loop family, the timing family, and
/// both. Enumerates all keys, 64 per word.
inline KeyCounts count_valid_keys(const Netlist& n, const KeyConstraintSet& cs, std::size_t limit = 24) {
  std::size_t bits = n.num_keys();
  if (bits > limit)
    throw std::invalid_argument("key has " + std::to_string(bits) + " bits; exhaustive counting is limited to " +
                                std::to_string(limit) + " (raise the limit or count a smaller lock)");
  KeyCounts kcnt;
  kcnt.bits = bits;
  kcnt.total = std::uint64_t(1) << bits;
  const auto& kc = cs.circuit;
  std::vector<std::uint64_t> words(bits), v;
  std::uint64_t blocks = bits <= 6 ? 1 : (std::uint64_t(1) << (bits - 6));
  std::uint64_t lane_mask = bits >= 6 ? ~0ull : ((std::uint64_t(1) << (std::uint64_t(1) << bits)) - 1);
  static constexpr std::uint64_t pattern[6] = {0xaaaaaaaaaaaaaaaaull, 0xccccccccccccccccull, 0xf0f0f0f0f0f0f0f0ull,
                                               0xff00ff00ff00ff00ull, 0xffff0000ffff0000ull, 0xffffffff00000000ull};
  for (std::uint64_t blk = 0; blk < blocks; ++blk) {
    for (std::size_t i = 0; i < bits; ++i) words[i] = i < 6 ? pattern[i] : (((blk >> (i - 6)) & 1) ? ~0ull : 0);
    kc.eval_words(words, v);
    std::uint64_t loop = lane_mask, timing = lane_mask;
    for (const auto& c : kc.constraints()) {
      if (c.family == KeyCircuit::Family::Loop)
        loop &= v[c.node];
      else
        timing &= v[c.node];
    }
    kcnt.loop += std::popcount(loop);
    kcnt.timing += std::popcount(timing);
    kcnt.both += std::popcount(loop & timing);
  }
  return kcnt;
}

}  // namespace latchlock
