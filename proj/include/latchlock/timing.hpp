#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "key.hpp"
#include "netlist.hpp"
#include "paths.hpp"

namespace latchlock {

struct ClockSpec {
  Delay period = 0;
  void check() const {
    if (period <= 0) throw std::invalid_argument("clock period must be positive");
  }
};

/// Phase a path carries after each latch: anchors launch and capture in the
/// positive phase, a clear latch passes on its upstream phase, and a latch
/// held in reset breaks the path.
struct ResolvedPath {
  bool broken = false;
  std::vector<std::uint8_t> neg;         // per latch: 1 if resolved negative
  std::vector<std::uint8_t> transition;  // per latch: phase differs from upstream
  int transitions = 0;                   // including the step into the capture anchor
};

inline ResolvedPath resolve_path(const PointGraph& g, const LatchPath& p, const std::vector<LatchMode>& modes) {
  ResolvedPath r;
  std::uint8_t cur = 0;
  for (int l : p.latches) {
    LatchMode m = modes[g.latches[l]];
    if (m == LatchMode::LogicDecoy) r.broken = true;
    std::uint8_t next = m == LatchMode::NegPhase ? 1 : m == LatchMode::PosPhase ? 0 : cur;
    r.transition.push_back(next != cur);
    r.transitions += next != cur;
    r.neg.push_back(next);
    cur = next;
  }
  r.transitions += cur != 0;
  return r;
}

/// Window over one path: points are the launch (0), the latches (1..m) and
/// the capture (m+1). Latches strictly between `first` and `last` are the
/// interior; a non-broken path needs `required` phase transitions there.
struct LatchPathWindow {
  std::size_t path = 0;
  int first = 0, last = 0;
  Delay span = 0;  // distance between the bracketing points
  int required = 1;
  std::vector<int> interior;  // PointGraph latch indices
};

struct WindowSet {
  PointGraph graph;
  PathSet paths;
  std::vector<LatchPathWindow> windows;
  bool truncated() const { return paths.truncated; }
};

namespace detail {
inline Delay point_pos(const LatchPath& p, int i) {
  if (i == 0) return 0;
  if (i <= static_cast<int>(p.latches.size())) return p.positions[i - 1];
  return p.end;
}
// span exceeds `times_two_t / 2`
inline bool exceeds(Delay span, Delay times_two_t) { return 2 * span > times_two_t; }
}  // namespace detail

/// Every minimal span of more than one period (needs one transition) and of
/// more than one and a half periods (needs two) along every path that
/// contains a latch.
inline WindowSet enumerate_windows(const Netlist& n, const DelayModel& dm, const ClockSpec& clk,
                                   std::size_t cap = kDefaultPathCap) {
  WindowSet ws;
  ws.graph = build_point_graph(n, dm);
  ws.paths = enumerate_paths(ws.graph, cap);
  for (std::size_t pi = 0; pi < ws.paths.paths.size(); ++pi) {
    const auto& p = ws.paths.paths[pi];
    int points = static_cast<int>(p.latches.size()) + 2;
    for (int req = 1; req <= 2; ++req) {
      Delay limit2 = req == 1 ? 2 * clk.period : 3 * clk.period;
      for (int i = 0; i + 1 < points; ++i) {
        Delay xi = detail::point_pos(p, i);
        int j = i + 1;
        while (j < points && !detail::exceeds(detail::point_pos(p, j) - xi, limit2)) ++j;
        if (j == points) continue;
        LatchPathWindow w;
        w.path = pi;
        w.first = i;
        w.last = j;
        w.span = detail::point_pos(p, j) - xi;
        w.required = req;
        for (int k = i + 1; k < j; ++k) w.interior.push_back(p.latches[k - 1]);
        ws.windows.push_back(std::move(w));
      }
    }
  }
  return ws;
}

inline bool window_violated(const WindowSet& ws, const LatchPathWindow& w, const std::vector<LatchMode>& modes) {
  const auto& p = ws.paths.paths[w.path];
  auto r = resolve_path(ws.graph, p, modes);
  if (r.broken) return false;
  int count = 0;
  for (int k = w.first + 1; k < w.last; ++k) count += r.transition[k - 1];
  return count < w.required;
}

/// Direct per-key check of one path: consecutive timing events (launch,
/// phase transitions, capture) at most one period apart, and every other
/// event at most one and a half periods apart.
inline bool path_meets_timing(const PointGraph& g, const LatchPath& p, const std::vector<LatchMode>& modes,
                              const ClockSpec& clk) {
  auto r = resolve_path(g, p, modes);
  if (r.broken) return true;
  std::vector<Delay> ev{0};
  for (std::size_t k = 0; k < p.latches.size(); ++k)
    if (r.transition[k]) ev.push_back(p.positions[k]);
  ev.push_back(p.end);
  for (std::size_t i = 1; i < ev.size(); ++i)
    if (ev[i] - ev[i - 1] > clk.period) return false;
  for (std::size_t i = 2; i < ev.size(); ++i)
    if (2 * (ev[i] - ev[i - 2]) > 3 * clk.period) return false;
  return true;
}

/// Longest launch-to-capture edge with no latch in between. Such paths do
/// not depend on the key, so one that exceeds the period fails every key.
inline Delay longest_plain_edge(const PointGraph& g) {
  Delay worst = kNoPath;
  for (const auto& edges : g.from_launch)
    for (const auto& e : edges)
      if (PointGraph::is_capture(e.to)) worst = std::max(worst, e.delay);
  return worst;
}

struct TimingReport {
  bool legal = true;
  bool truncated = false;
  bool plain_violation = false;  // a latch-free path is longer than the period
  std::optional<std::size_t> violating_path;
};

inline TimingReport check_timing(const Netlist& n, const DelayModel& dm, const ClockSpec& clk, const KeyVector& key,
                                 std::size_t cap = kDefaultPathCap) {
  TimingReport rep;
  auto g = build_point_graph(n, dm);
  auto paths = enumerate_paths(g, cap);
  rep.truncated = paths.truncated;
  if (longest_plain_edge(g) > clk.period) {
    rep.legal = false;
    rep.plain_violation = true;
    return rep;
  }
  auto modes = latch_modes(n, key);
  for (std::size_t i = 0; i < paths.paths.size(); ++i)
    if (!path_meets_timing(g, paths.paths[i], modes, clk)) {
      rep.legal = false;
      rep.violating_path = i;
      break;
    }
  return rep;
}

/// Largest distance between consecutive timing events over all paths under
/// `key`; for a flip-flop design this is the combinational critical path.
inline Delay critical_delay(const Netlist& n, const DelayModel& dm, const KeyVector& key,
                            std::size_t cap = kDefaultPathCap) {
  auto g = build_point_graph(n, dm);
  Delay worst = 0;
  for (std::size_t s = 0; s < g.launches.size(); ++s)
    for (const auto& e : g.from_launch[s])
      if (PointGraph::is_capture(e.to)) worst = std::max(worst, e.delay);
  auto paths = enumerate_paths(g, cap);
  auto modes = latch_modes(n, key);
  for (const auto& p : paths.paths) {
    auto r = resolve_path(g, p, modes);
    if (r.broken) continue;
    Delay last = 0;
    for (std::size_t k = 0; k < p.latches.size(); ++k)
      if (r.transition[k]) {
        worst = std::max(worst, p.positions[k] - last);
        last = p.positions[k];
      }
    worst = std::max(worst, p.end - last);
  }
  return worst;
}

/// Period used when none is given: the design's critical delay plus room for
/// four latch feed-through delays.
inline ClockSpec default_clock(const Netlist& original, const DelayModel& dm) {
  return ClockSpec{critical_delay(original, dm, KeyVector(original.num_keys())) + 4 * dm.d_latch};
}

struct SlackReport {
  std::vector<Delay> arrival;  // longest delay since the last timing event; kNoPath if unreached
  std::vector<Delay> slack;    // kNoSlack where no constrained path passes
};
inline constexpr Delay kNoSlack = std::numeric_limits<Delay>::max() / 4;

/// Arrival and slack per net for a fixed key. Arrival restarts at a latch
/// whose phase differs from the incoming one (the transition is a timing
/// event, so only the latch feed-through counts after it). Slack is the
/// period minus the longest event-to-event span through the net.
inline SlackReport arrival_and_slack(const Netlist& n, const DelayModel& dm, const ClockSpec& clk, const KeyVector& key) {
  auto modes = latch_modes(n, key);
  auto order = comb_order(n);
  std::size_t nn = n.num_nets();
  // index: net * 2 + phase (0 positive, 1 negative)
  std::vector<Delay> arr(2 * nn, kNoPath), down(2 * nn, kNoPath);
  for (NetId i : n.inputs()) arr[2 * i] = 0;
  for (CellId c : n.flip_flops()) arr[2 * n.cell(c).output] = 0;
  auto latches = n.latches();
  auto out_phase = [&](LatchMode m, int in) { return m == LatchMode::NegPhase ? 1 : m == LatchMode::PosPhase ? 0 : in; };

  std::size_t limit = 2 * latches.size() + 4;
  bool changed = true;
  std::size_t pass = 0;
  while (changed) {
    if (++pass > limit) throw std::runtime_error("arrival does not converge: latch loop without a phase transition");
    changed = false;
    auto relax = [&](std::size_t idx, Delay v) {
      if (v > arr[idx]) {
        arr[idx] = v;
        changed = true;
      }
    };
    for (CellId c : latches) {
      const Cell& cell = n.cell(c);
      if (modes[c] == LatchMode::LogicDecoy) continue;
      Delay dl = dm.delay(n, c);
      for (int r = 0; r < 2; ++r) {
        Delay a = arr[2 * cell.inputs[0] + r];
        if (a == kNoPath) continue;
        int o = out_phase(modes[c], r);
        relax(2 * cell.output + o, o == r ? a + dl : dl);
      }
    }
    for (CellId c : order) {
      const Cell& cell = n.cell(c);
      Delay d = dm.delay(n, c);
      for (int r = 0; r < 2; ++r) {
        Delay best = kNoPath;
        for (NetId i : cell.inputs) best = std::max(best, arr[2 * i + r]);
        if (best != kNoPath) relax(2 * cell.output + r, best + d);
      }
    }
  }

  for (NetId o : n.outputs()) down[2 * o] = down[2 * o + 1] = 0;
  for (CellId c : n.flip_flops()) {
    NetId d = n.cell(c).inputs[0];
    down[2 * d] = down[2 * d + 1] = 0;
  }
  changed = true;
  pass = 0;
  while (changed) {
    if (++pass > limit) throw std::runtime_error("required time does not converge: latch loop without a phase transition");
    changed = false;
    auto relax = [&](std::size_t idx, Delay v) {
      if (v > down[idx]) {
        down[idx] = v;
        changed = true;
      }
    };
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Cell& cell = n.cell(*it);
      Delay d = dm.delay(n, *it);
      for (int r = 0; r < 2; ++r) {
        Delay after = down[2 * cell.output + r];
        if (after == kNoPath) continue;
        for (NetId i : cell.inputs) relax(2 * i + r, after + d);
      }
    }
    for (CellId c : latches) {
      const Cell& cell = n.cell(c);
      if (modes[c] == LatchMode::LogicDecoy) continue;
      Delay dl = dm.delay(n, c);
      for (int r = 0; r < 2; ++r) {
        int o = out_phase(modes[c], r);
        if (o != r) {
          relax(2 * cell.inputs[0] + r, 0);
        } else if (down[2 * cell.output + o] != kNoPath) {
          relax(2 * cell.inputs[0] + r, down[2 * cell.output + o] + dl);
        }
      }
    }
  }

  SlackReport rep;
  rep.arrival.assign(nn, kNoPath);
  rep.slack.assign(nn, kNoSlack);
  for (NetId i = 0; i < nn; ++i)
    for (int r = 0; r < 2; ++r) {
      Delay a = arr[2 * i + r];
      rep.arrival[i] = std::max(rep.arrival[i], a);
      if (a != kNoPath && down[2 * i + r] != kNoPath)
        rep.slack[i] = std::min(rep.slack[i], clk.period - a - down[2 * i + r]);
    }
  return rep;
}

}  // namespace latchlock
