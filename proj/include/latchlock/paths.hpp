#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "netlist.hpp"

namespace latchlock {

using Delay = std::int64_t;  // picoseconds
inline constexpr Delay kNoPath = std::numeric_limits<Delay>::min() / 4;

/// Worst-case propagation delay per cell kind, with per-cell overrides.
struct DelayModel {
  Delay combinational = 10;
  Delay d_latch = 20;
  std::map<CellKind, Delay> per_kind;
  std::map<std::string, Delay> per_cell;

  Delay delay(const Netlist& n, CellId c) const {
    const Cell& cell = n.cell(c);
    if (auto it = per_cell.find(cell.name); it != per_cell.end()) return it->second;
    if (auto it = per_kind.find(cell.kind); it != per_kind.end()) return it->second;
    if (is_latch(cell.kind)) return d_latch;
    if (cell.kind == CellKind::Dff || is_constant(cell.kind)) return 0;
    return combinational;
  }
  void check() const {
    if (d_latch <= 0) throw std::invalid_argument("latch delay must be positive");
    if (combinational < 0) throw std::invalid_argument("delays must be non-negative");
    for (auto& [k, d] : per_kind)
      if (d < 0 || (is_latch(k) && d == 0)) throw std::invalid_argument("invalid delay for " + std::string(kind_name(k)));
    for (auto& [c, d] : per_cell)
      if (d < 0) throw std::invalid_argument("negative delay for cell " + c);
  }
};

/// Longest purely combinational delay from a set of source nets to every net.
/// Sequential cells stop propagation. Unreached nets hold kNoPath.
inline std::vector<Delay> comb_arrival(const Netlist& n, const DelayModel& dm, const std::vector<CellId>& order,
                                       const std::vector<std::pair<NetId, Delay>>& sources) {
  std::vector<Delay> a(n.num_nets(), kNoPath);
  for (auto [net, d] : sources) a[net] = std::max(a[net], d);
  for (CellId c : order) {
    const Cell& cell = n.cell(c);
    Delay best = kNoPath;
    for (NetId i : cell.inputs) best = std::max(best, a[i]);
    if (best == kNoPath) continue;
    a[cell.output] = std::max(a[cell.output], best + dm.delay(n, c));
  }
  return a;
}

inline std::vector<CellId> comb_order(const Netlist& n) {
  auto r = topo_order(n, {});
  if (std::holds_alternative<CycleReport>(r)) throw NetlistError("combinational cycle");
  return std::get<std::vector<CellId>>(r);
}

/// Timing/cycle-delay abstraction of a netlist. Points are launch anchors
/// (primary inputs, flip-flop outputs), latches, and capture anchors
/// (primary outputs, flip-flop data pins). Edges carry the longest
/// combinational delay between points.
struct PointGraph {
  struct Anchor {
    NetId net;
    std::string name;
  };
  struct Edge {
    int to;  // latch index, or -(capture index + 1)
    Delay delay;
  };
  std::vector<Anchor> launches, captures;
  std::vector<CellId> latches;
  std::vector<int> latch_index;            // by cell, -1 if not a latch
  std::vector<Delay> latch_delay;          // feed-through delay per latch
  std::vector<std::vector<Edge>> from_launch, from_latch;

  static int capture_ref(std::size_t i) { return -static_cast<int>(i) - 1; }
  static bool is_capture(int to) { return to < 0; }
  static std::size_t capture_of(int to) { return static_cast<std::size_t>(-to - 1); }
};

inline PointGraph build_point_graph(const Netlist& n, const DelayModel& dm) {
  PointGraph g;
  auto order = comb_order(n);
  for (NetId i : n.inputs()) g.launches.push_back({i, n.net_name(i)});
  for (CellId c : n.flip_flops()) g.launches.push_back({n.cell(c).output, n.cell(c).name});
  for (NetId o : n.outputs()) g.captures.push_back({o, "out:" + n.net_name(o)});
  for (CellId c : n.flip_flops()) g.captures.push_back({n.cell(c).inputs[0], "dff:" + n.cell(c).name});
  g.latch_index.assign(n.num_cells(), -1);
  for (CellId c : n.latches()) {
    g.latch_index[c] = static_cast<int>(g.latches.size());
    g.latches.push_back(c);
    g.latch_delay.push_back(dm.delay(n, c));
  }

  auto edges_from = [&](NetId src) {
    auto a = comb_arrival(n, dm, order, {{src, 0}});
    std::vector<PointGraph::Edge> e;
    for (std::size_t l = 0; l < g.latches.size(); ++l) {
      Delay d = a[n.cell(g.latches[l]).inputs[0]];
      if (d != kNoPath) e.push_back({static_cast<int>(l), d});
    }
    for (std::size_t k = 0; k < g.captures.size(); ++k) {
      Delay d = a[g.captures[k].net];
      if (d != kNoPath) e.push_back({PointGraph::capture_ref(k), d});
    }
    return e;
  };
  for (auto& l : g.launches) g.from_launch.push_back(edges_from(l.net));
  for (CellId c : g.latches) g.from_latch.push_back(edges_from(n.cell(c).output));
  return g;
}

/// One anchor-to-anchor path. positions[k] is the cumulative delay at the
/// data input of latches[k]; end is the delay at the capture point.
struct LatchPath {
  int launch = 0;
  int capture = 0;
  std::vector<int> latches;  // PointGraph latch indices
  std::vector<Delay> positions;
  Delay end = 0;
};

/// Elementary cycle of the latch graph. delays[k] is the combinational delay
/// from latches[k] to latches[k+1] (cyclically).
struct LatchCycle {
  std::vector<int> latches;
  std::vector<Delay> delays;
};

struct PathSet {
  std::vector<LatchPath> paths;
  bool truncated = false;
};
struct CycleSet {
  std::vector<LatchCycle> cycles;
  bool truncated = false;
};

inline constexpr std::size_t kDefaultPathCap = 1000000;

/// Depth-first enumeration of simple anchor-to-anchor paths in a fixed
/// order. Paths without latches are included only when `with_plain` is set.
inline PathSet enumerate_paths(const PointGraph& g, std::size_t cap = kDefaultPathCap, bool with_plain = false) {
  PathSet out;
  std::vector<bool> on(g.latches.size(), false);
  LatchPath cur;
  // returns false once the cap is hit
  auto emit = [&](Delay end, int capture) {
    if (out.paths.size() >= cap) {
      out.truncated = true;
      return false;
    }
    LatchPath p = cur;
    p.end = end;
    p.capture = capture;
    out.paths.push_back(std::move(p));
    return true;
  };
  auto dfs = [&](auto& self, int latch, Delay x) -> bool {
    Delay base = x + g.latch_delay[latch];
    for (const auto& e : g.from_latch[latch]) {
      if (PointGraph::is_capture(e.to)) {
        if (!emit(base + e.delay, static_cast<int>(PointGraph::capture_of(e.to)))) return false;
        continue;
      }
      if (on[e.to]) continue;
      on[e.to] = true;
      cur.latches.push_back(e.to);
      cur.positions.push_back(base + e.delay);
      bool ok = self(self, e.to, base + e.delay);
      cur.latches.pop_back();
      cur.positions.pop_back();
      on[e.to] = false;
      if (!ok) return false;
    }
    return true;
  };
  for (std::size_t s = 0; s < g.launches.size(); ++s) {
    cur = LatchPath{};
    cur.launch = static_cast<int>(s);
    for (const auto& e : g.from_launch[s]) {
      if (PointGraph::is_capture(e.to)) {
        if (with_plain && !emit(e.delay, static_cast<int>(PointGraph::capture_of(e.to)))) return out;
        continue;
      }
      on[e.to] = true;
      cur.latches.push_back(e.to);
      cur.positions.push_back(e.delay);
      bool ok = dfs(dfs, e.to, e.delay);
      cur.latches.pop_back();
      cur.positions.pop_back();
      on[e.to] = false;
      if (!ok) return out;
    }
  }
  return out;
}

/// Elementary cycles, each reported once starting from its smallest latch.
inline CycleSet enumerate_cycles(const PointGraph& g, std::size_t cap = kDefaultPathCap) {
  CycleSet out;
  std::size_t nl = g.latches.size();
  std::vector<std::vector<std::pair<int, Delay>>> adj(nl);
  for (std::size_t l = 0; l < nl; ++l)
    for (const auto& e : g.from_latch[l])
      if (!PointGraph::is_capture(e.to)) adj[l].push_back({e.to, e.delay});

  std::vector<bool> on(nl, false);
  LatchCycle cur;
  for (std::size_t s = 0; s < nl; ++s) {
    int start = static_cast<int>(s);
    // only latches >= start take part, so every cycle is found once
    auto dfs = [&](auto& self, int v) -> bool {
      for (auto [w, d] : adj[v]) {
        if (w < start) continue;
        if (w == start) {
          if (out.cycles.size() >= cap) {
            out.truncated = true;
            return false;
          }
          LatchCycle c = cur;
          c.delays.push_back(d);
          out.cycles.push_back(std::move(c));
          continue;
        }
        if (on[w]) continue;
        on[w] = true;
        cur.latches.push_back(w);
        cur.delays.push_back(d);
        bool ok = self(self, w);
        cur.latches.pop_back();
        cur.delays.pop_back();
        on[w] = false;
        if (!ok) return false;
      }
      return true;
    };
    cur = LatchCycle{};
    cur.latches.push_back(start);
    on[s] = true;
    bool ok = dfs(dfs, start);
    on[s] = false;
    if (!ok) break;
  }
  return out;
}

}  // namespace latchlock
