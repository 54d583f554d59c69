#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "constraints.hpp"
#include "key.hpp"
#include "netlist.hpp"
#include "paths.hpp"
#include "rng.hpp"
#include "sim.hpp"
#include "timing.hpp"

namespace latchlock {

struct LockConfig {
  int key_bits = 8;
  double decoy_ratio = 0.5;
  std::uint64_t seed = 1;
  int group_samples = 8;
  bool retime = true;
  int check_cycles = 200;  // simulation spot check after locking
  int check_seeds = 2;
};

enum class LatchOrigin { Converted, DelayDecoy, LogicDecoy };

inline std::string_view origin_name(LatchOrigin o) {
  switch (o) {
    case LatchOrigin::Converted: return "converted";
    case LatchOrigin::DelayDecoy: return "delay_decoy";
    case LatchOrigin::LogicDecoy: return "logic_decoy";
  }
  return "?";
}

struct ManifestEntry {
  std::string name;
  LatchMode mode;
  LatchOrigin origin;
};

struct ProxyStats {
  std::size_t gates_before = 0, gates_after = 0;
  Delay critical_before = 0, critical_after = 0;
  std::size_t converted = 0, delay_decoys = 0, logic_decoys = 0;
  std::size_t decoys_requested = 0;
  std::size_t retime_moves = 0;
  double decoy_ratio = 0;  // achieved decoys per converted latch
};

struct LockResult {
  Netlist locked;
  KeyVector correct_key;
  std::vector<ManifestEntry> manifest;
  std::vector<std::string> group;  // flip-flops that were converted
  ClockSpec clock;
  ProxyStats stats;
};

class LockError : public std::runtime_error {
 public:
  LockError(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Number of latches the key programs and how many come from flip-flops.
struct LockPlan {
  int latches = 0;
  int flip_flops = 0;
};

inline LockPlan plan_lock(const Netlist& n, const LockConfig& cfg) {
  if (cfg.key_bits < 2 || cfg.key_bits % 2 != 0) throw LockError("plan", "key_bits must be even and >= 2");
  if (cfg.decoy_ratio < 0) throw LockError("plan", "decoy ratio must be non-negative");
  LockPlan p;
  p.latches = cfg.key_bits / 2;
  int ffs = static_cast<int>(n.flip_flops().size());
  if (ffs == 0) throw LockError("plan", "netlist has no flip-flops to convert");
  p.flip_flops = std::max(1, static_cast<int>(std::lround(p.latches / (2.0 * (1.0 + cfg.decoy_ratio)))));
  p.flip_flops = std::min(p.flip_flops, ffs);
  if (2 * p.flip_flops > p.latches)
    throw LockError("plan", std::to_string(cfg.key_bits) + " key bits program " + std::to_string(p.latches) +
                                " latch(es); converting one flip-flop needs 2 latches (4 bits)");
  return p;
}

// ---------------------------------------------------------------------------
// Step I: flip-flop group selection
// ---------------------------------------------------------------------------

struct FlipFlopGraph {
  std::vector<CellId> ffs;
  std::vector<std::vector<int>> weight;  // symmetric, number of paths capped at 16
  std::vector<Delay> fanin_delay;
};

inline FlipFlopGraph build_ff_graph(const Netlist& n, const DelayModel& dm) {
  FlipFlopGraph g;
  g.ffs = n.flip_flops();
  std::size_t k = g.ffs.size();
  g.weight.assign(k, std::vector<int>(k, 0));
  auto order = comb_order(n);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<int> cnt(n.num_nets(), 0);
    cnt[n.cell(g.ffs[i]).output] = 1;
    for (CellId c : order) {
      int s = 0;
      for (NetId in : n.cell(c).inputs) s = std::min(16, s + cnt[in]);
      cnt[n.cell(c).output] = std::min(16, cnt[n.cell(c).output] + s);
    }
    for (std::size_t j = 0; j < k; ++j) {
      int w = cnt[n.cell(g.ffs[j]).inputs[0]];
      g.weight[i][j] = std::min(16, g.weight[i][j] + w);
      if (i != j) g.weight[j][i] = std::min(16, g.weight[j][i] + w);
    }
  }
  std::vector<std::pair<NetId, Delay>> sources;
  for (NetId i : n.inputs()) sources.push_back({i, 0});
  for (CellId c : n.state_elements()) sources.push_back({n.cell(c).output, 0});
  auto arr = comb_arrival(n, dm, order, sources);
  for (CellId c : g.ffs) g.fanin_delay.push_back(std::max<Delay>(0, arr[n.cell(c).inputs[0]]));
  return g;
}

/// Fluid-communities label propagation on the weighted flip-flop graph.
inline std::vector<int> fluid_communities(const FlipFlopGraph& g, int k, Rng& rng) {
  int nv = static_cast<int>(g.ffs.size());
  std::vector<int> label(nv, -1), size(k, 0);
  std::vector<int> nodes(nv);
  for (int i = 0; i < nv; ++i) nodes[i] = i;
  rng.shuffle(nodes);
  for (int c = 0; c < k && c < nv; ++c) {
    label[nodes[c]] = c;
    size[c] = 1;
  }
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    rng.shuffle(nodes);
    for (int v : nodes) {
      std::vector<double> score(k, 0.0);
      bool any = false;
      for (int u = 0; u < nv; ++u) {
        int w = u == v ? 1 : g.weight[v][u];
        if (w == 0 || label[u] < 0) continue;
        score[label[u]] += w / static_cast<double>(size[label[u]]);
        any = true;
      }
      if (!any) continue;
      double best = *std::max_element(score.begin(), score.end());
      std::vector<int> tied;
      for (int c = 0; c < k; ++c)
        if (score[c] >= best - 1e-12) tied.push_back(c);
      if (label[v] >= 0 && std::find(tied.begin(), tied.end(), label[v]) != tied.end()) continue;
      int pick = rng.pick(tied);
      if (label[v] >= 0) --size[label[v]];
      label[v] = pick;
      ++size[pick];
      changed = true;
    }
    if (!changed) break;
  }
  int next = k;
  for (int& l : label)
    if (l < 0) l = next++;
  return label;
}

inline bool group_connected(const FlipFlopGraph& g, const std::vector<int>& grp) {
  if (grp.size() <= 1) return true;
  std::vector<bool> seen(grp.size(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    auto a = stack.back();
    stack.pop_back();
    for (std::size_t b = 0; b < grp.size(); ++b)
      if (!seen[b] && g.weight[grp[a]][grp[b]] > 0) {
        seen[b] = true;
        stack.push_back(b);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool x) { return x; });
}

/// Picks `size` flip-flops: community samples seed greedy growth; connected
/// groups win, then the lowest cumulative fan-in delay, then the most
/// internal paths.
inline std::vector<CellId> select_ff_group(const Netlist& n, std::size_t size, int samples, std::uint64_t seed,
                                           const DelayModel& dm) {
  auto g = build_ff_graph(n, dm);
  std::size_t nv = g.ffs.size();
  if (size > nv) throw LockError("select", "needs " + std::to_string(size) + " flip-flops, netlist has " + std::to_string(nv));
  if (size == nv) return g.ffs;

  struct Candidate {
    std::vector<int> members;
    bool connected;
    Delay fanin;
    int internal;
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.connected != b.connected) return a.connected;
    if (a.fanin != b.fanin) return a.fanin < b.fanin;
    if (a.internal != b.internal) return a.internal > b.internal;
    return a.members < b.members;
  };
  std::optional<Candidate> best;
  int k = std::max(1, static_cast<int>(std::lround(static_cast<double>(nv) / static_cast<double>(size))));
  for (int s = 0; s < std::max(1, samples); ++s) {
    Rng rng(seed + static_cast<std::uint64_t>(s), "select");
    auto label = fluid_communities(g, k, rng);
    std::set<int> labels(label.begin(), label.end());
    for (int c : labels) {
      std::vector<int> members;
      std::vector<bool> in(nv, false);
      auto link = [&](int v) {
        int w = 0;
        for (int m : members) w += g.weight[v][m];
        return w;
      };
      // seed: the community member with the most internal weight
      int seed_node = -1, seed_w = -1;
      for (std::size_t v = 0; v < nv; ++v) {
        if (label[v] != c) continue;
        int w = 0;
        for (std::size_t u = 0; u < nv; ++u)
          if (label[u] == c) w += g.weight[v][u];
        if (w > seed_w || (w == seed_w && g.fanin_delay[v] < g.fanin_delay[seed_node])) {
          seed_node = static_cast<int>(v);
          seed_w = w;
        }
      }
      members.push_back(seed_node);
      in[seed_node] = true;
      while (members.size() < size) {
        int pick = -1;
        std::tuple<int, int, Delay> key{-1, -1, 0};
        for (std::size_t v = 0; v < nv; ++v) {
          if (in[v]) continue;
          std::tuple<int, int, Delay> kv{link(static_cast<int>(v)) > 0, label[v] == c, -g.fanin_delay[v]};
          if (pick < 0 || kv > key || (kv == key && rng.coin())) {
            pick = static_cast<int>(v);
            key = kv;
          }
        }
        members.push_back(pick);
        in[pick] = true;
      }
      std::sort(members.begin(), members.end());
      Candidate cand{members, group_connected(g, members), 0, 0};
      for (int m : members) {
        cand.fanin += g.fanin_delay[m];
        for (int o : members) cand.internal += g.weight[m][o];
      }
      if (!best || better(cand, *best)) best = cand;
    }
  }
  std::vector<CellId> out;
  for (int m : best->members) out.push_back(g.ffs[m]);
  std::sort(out.begin(), out.end());
  return out;
}


// ---------------------------------------------------------------------------
// Steps II-IV: conversion, retiming, decoys, key assignment
// ---------------------------------------------------------------------------

namespace detail {

// Netlist under construction. Every keyed latch gets two fresh key inputs
// when created; keys are renumbered once the final latch set is known.
struct LockWork {
  Netlist n;
  std::map<std::string, LatchMode> mode;
  std::map<std::string, LatchOrigin> origin;
  std::vector<std::string> created;  // keyed latches in creation order
  std::size_t temp_keys = 0;

  CellId add_klatch(const std::string& out, NetId d, LatchMode m, LatchOrigin o) {
    int k0 = static_cast<int>(n.num_keys());
    n.add_key_input("__ll_kt" + std::to_string(temp_keys++));
    n.add_key_input("__ll_kt" + std::to_string(temp_keys++));
    Cell c;
    c.kind = CellKind::KLatch;
    c.output = n.net(out);
    c.name = out;
    c.inputs = {d};
    c.key0 = k0;
    c.key1 = k0 + 1;
    mode[out] = m;
    origin[out] = o;
    created.push_back(out);
    return n.add_cell(std::move(c));
  }

  std::size_t live_latches() const {
    std::size_t k = 0;
    for (const auto& c : n.cells())
      if (c.kind == CellKind::KLatch) ++k;
    return k;
  }

  KeyVector key() const {
    KeyVector k(n.num_keys());
    for (const auto& c : n.cells()) {
      if (c.kind != CellKind::KLatch) continue;
      auto [b0, b1] = encode_mode(mode.at(c.name));
      k.set(c.key0, b0);
      k.set(c.key1, b1);
    }
    return k;
  }

  std::vector<CellId> latches_of(LatchOrigin o) const {
    std::vector<CellId> r;
    for (CellId c = 0; c < n.num_cells(); ++c)
      if (n.cell(c).kind == CellKind::KLatch && origin.at(n.cell(c).name) == o) r.push_back(c);
    return r;
  }
};

inline bool reset_safe(CellKind k) {
  return k == CellKind::And || k == CellKind::Or || k == CellKind::Xor || k == CellKind::Buf || k == CellKind::Mux;
}

inline bool transparent_loop_free(const Netlist& n, const KeyVector& key) {
  auto modes = latch_modes(n, key);
  for (Phase ph : {Phase::High, Phase::Low})
    if (std::holds_alternative<CycleReport>(topo_order(n, transparent_latches(n, modes, ph)))) return false;
  return true;
}

inline bool legal(const LockWork& w, const DelayModel& dm, const ClockSpec& clk) {
  auto key = w.key();
  if (!transparent_loop_free(w.n, key)) return false;
  return check_timing(w.n, dm, clk, key).legal;
}

// Rebuilds the netlist with key inputs __ll_k0.. in latch creation order.
inline std::pair<Netlist, std::vector<std::string>> finalize_keys(const LockWork& w) {
  const Netlist& src = w.n;
  Netlist out(src.name());
  for (NetId i : src.inputs()) out.add_input(src.net_name(i));
  std::vector<std::string> order;
  for (const auto& name : w.created)
    if (auto c = src.find_cell(name); c && src.cell(*c).kind == CellKind::KLatch) order.push_back(name);
  std::map<std::string, int> slot;
  for (std::size_t i = 0; i < order.size(); ++i) {
    slot[order[i]] = static_cast<int>(2 * i);
    out.add_key_input("__ll_k" + std::to_string(2 * i));
    out.add_key_input("__ll_k" + std::to_string(2 * i + 1));
  }
  if (src.reset_net()) out.set_reset(src.net_name(*src.reset_net()));
  for (NetId o : src.outputs()) out.add_output(src.net_name(o));
  for (const auto& c : src.cells()) {
    std::vector<std::string> ins;
    for (NetId i : c.inputs) ins.push_back(src.net_name(i));
    if (c.kind == CellKind::KLatch) {
      int s = slot.at(c.name);
      out.add_cell(CellKind::KLatch, c.name, ins, s, s + 1);
    } else {
      out.add_cell(c.kind, c.name, ins);
    }
  }
  return {std::move(out), order};
}

inline KeyVector ordered_key(const LockWork& w, const std::vector<std::string>& order) {
  KeyVector k(2 * order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto [b0, b1] = encode_mode(w.mode.at(order[i]));
    k.set(2 * i, b0);
    k.set(2 * i + 1, b1);
  }
  return k;
}

inline std::size_t comb_cells(const Netlist& n) {
  return static_cast<std::size_t>(std::count_if(n.cells().begin(), n.cells().end(),
                                                [](const Cell& c) { return is_combinational(c.kind); }));
}

}  // namespace detail

/// Replaces each flip-flop of `group` by a negative-phase master keyed latch
/// feeding a positive-phase slave that keeps the flip-flop's output net.
inline void convert_group(detail::LockWork& w, const std::vector<CellId>& group) {
  struct Ff {
    std::string q, d;
  };
  std::vector<Ff> ffs;
  for (CellId c : group) ffs.push_back({w.n.cell(c).name, w.n.net_name(w.n.cell(c).inputs[0])});
  w.n.remove_cells(group);
  for (const auto& f : ffs) {
    std::string m = w.n.fresh_name("m_" + f.q);
    w.add_klatch(m, w.n.net_id(f.d), LatchMode::NegPhase, LatchOrigin::Converted);
    w.add_klatch(f.q, w.n.net_id(m), LatchMode::PosPhase, LatchOrigin::Converted);
  }
}

/// Converts `group` without any further transformation; the reference for
/// the cycle-delay invariant.
inline Netlist convert_to_latches(const Netlist& n, const std::vector<CellId>& group) {
  detail::LockWork w{n, {}, {}, {}, 0};
  convert_group(w, group);
  return detail::finalize_keys(w).first;
}

namespace detail {

// Master latch moves backwards across the gate driving it: one master per
// distinct gate input, the gate now drives the old master output.
inline bool retime_backward(LockWork& w, CellId m) {
  Netlist& n = w.n;
  const Cell mc = n.cell(m);
  NetId d = mc.inputs[0];
  auto drv = n.driver(d);
  if (!drv) return false;
  const Cell g = n.cell(*drv);
  if (!reset_safe(g.kind) || n.fanout(d).size() != 1 || n.is_output(d)) return false;
  std::vector<NetId> ins;
  for (NetId i : g.inputs) {
    if (n.driver_kind(i) == Netlist::DriverKind::Key || n.driver_kind(i) == Netlist::DriverKind::Reset) return false;
    if (std::find(ins.begin(), ins.end(), i) == ins.end()) ins.push_back(i);
  }
  n.remove_cells({std::min(m, *drv), std::max(m, *drv)});
  std::map<NetId, std::string> latched;
  for (NetId i : ins) {
    std::string name = n.fresh_name("m");
    w.add_klatch(name, i, LatchMode::NegPhase, LatchOrigin::Converted);
    latched[i] = name;
  }
  std::vector<std::string> gins;
  for (NetId i : g.inputs) gins.push_back(latched[i]);
  n.add_cell(g.kind, mc.name, gins);
  w.mode.erase(mc.name);
  w.origin.erase(mc.name);
  return true;
}

// A gate whose inputs all come from positive-phase latches that feed only
// this gate: the latches move forward into one latch after the gate.
inline bool retime_forward(LockWork& w, CellId gate) {
  Netlist& n = w.n;
  const Cell g = n.cell(gate);
  if (!reset_safe(g.kind)) return false;
  std::vector<CellId> ls;
  for (NetId i : g.inputs) {
    auto drv = n.driver(i);
    if (!drv) return false;
    const Cell& lc = n.cell(*drv);
    if (lc.kind != CellKind::KLatch || w.mode.at(lc.name) != LatchMode::PosPhase ||
        w.origin.at(lc.name) != LatchOrigin::Converted)
      return false;
    if (n.fanout(i).size() != 1 || n.is_output(i)) return false;
    if (std::find(ls.begin(), ls.end(), *drv) == ls.end()) ls.push_back(*drv);
  }
  std::map<NetId, NetId> through;
  for (CellId l : ls) through[n.cell(l).output] = n.cell(l).inputs[0];
  std::vector<std::string> gins;
  for (NetId i : g.inputs) gins.push_back(n.net_name(through[i]));
  std::vector<std::string> names;
  for (CellId l : ls) names.push_back(n.cell(l).name);
  std::vector<CellId> dead = ls;
  dead.push_back(gate);
  std::string out = g.name;
  n.remove_cells(dead);
  for (const auto& nm : names) {
    w.mode.erase(nm);
    w.origin.erase(nm);
  }
  std::string mid = n.fresh_name("r");
  n.add_cell(g.kind, mid, gins);
  w.add_klatch(out, n.net_id(mid), LatchMode::PosPhase, LatchOrigin::Converted);
  return true;
}

}  // namespace detail

/// Alternating-phase latch retiming: masters move backwards, then slaves
/// forwards, each move kept only if it stays within the latch budget and
/// timing stays legal. Returns the number of accepted moves.
inline std::size_t retime_latches(detail::LockWork& w, std::size_t budget, const DelayModel& dm, const ClockSpec& clk,
                                  Rng& rng, int rounds = 2) {
  std::size_t moves = 0;
  for (int r = 0; r < rounds; ++r) {
    for (int phase = 0; phase < 2; ++phase) {
      std::vector<std::string> cands;
      for (CellId c = 0; c < w.n.num_cells(); ++c) {
        const Cell& cell = w.n.cell(c);
        if (phase == 0 && cell.kind == CellKind::KLatch && w.mode.at(cell.name) == LatchMode::NegPhase &&
            w.origin.at(cell.name) == LatchOrigin::Converted)
          cands.push_back(cell.name);
        if (phase == 1 && is_combinational(cell.kind)) cands.push_back(cell.name);
      }
      for (const auto& name : cands) {
        auto c = w.n.find_cell(name);
        if (!c || !rng.coin()) continue;
        detail::LockWork saved = w;
        bool moved = phase == 0 ? detail::retime_backward(w, *c) : detail::retime_forward(w, *c);
        if (!moved) continue;
        if (w.live_latches() > budget || !detail::legal(w, dm, clk)) {
          w = std::move(saved);
          continue;
        }
        ++moves;
      }
    }
  }
  return moves;
}

namespace detail {

inline std::vector<NetId> decoy_sites(const LockWork& w) {
  auto group = w.latches_of(LatchOrigin::Converted);
  std::set<CellId> cone;
  for (auto dir : {ConeDirection::Fanin, ConeDirection::Fanout})
    for (CellId c : fan_cones(w.n, group, dir)) cone.insert(c);
  for (CellId c : group) cone.insert(c);
  std::vector<NetId> sites;
  for (CellId c : cone) {
    const Cell& cell = w.n.cell(c);
    if (cell.kind == CellKind::Dff || is_constant(cell.kind)) continue;
    if (w.n.fanout(cell.output).empty()) continue;
    sites.push_back(cell.output);
  }
  return sites;
}

inline void insert_series_latch(LockWork& w, NetId net, LatchMode m, LatchOrigin o, const std::string& stem) {
  std::vector<std::pair<CellId, std::size_t>> pins;
  for (CellId f : w.n.fanout(net)) {
    const auto& ins = w.n.cell(f).inputs;
    for (std::size_t p = 0; p < ins.size(); ++p)
      if (ins[p] == net) pins.push_back({f, p});
  }
  std::string out = w.n.fresh_name(stem);
  w.add_klatch(out, net, m, o);
  NetId q = w.n.net_id(out);
  for (auto [c, p] : pins) w.n.rewire(c, p, q);
}

}  // namespace detail

/// Clear-mode latches in series on nets of the group's fan cones whose slack
/// exceeds the latch delay. Returns how many were inserted.
inline std::size_t insert_delay_decoys(detail::LockWork& w, std::size_t count, const DelayModel& dm,
                                       const ClockSpec& clk, Rng& rng) {
  std::size_t done = 0;
  auto sites = detail::decoy_sites(w);
  std::vector<std::string> names;
  for (NetId s : sites) names.push_back(w.n.net_name(s));
  rng.shuffle(names);
  for (const auto& name : names) {
    if (done == count) break;
    auto key = w.key();
    auto slack = arrival_and_slack(w.n, dm, clk, key).slack;
    NetId net = w.n.net_id(name);
    if (slack[net] == kNoSlack || slack[net] <= dm.d_latch) continue;
    detail::LockWork saved = w;
    detail::insert_series_latch(w, net, LatchMode::Clear, LatchOrigin::DelayDecoy, "dd");
    if (!detail::legal(w, dm, clk)) {
      w = std::move(saved);
      continue;
    }
    ++done;
  }
  return done;
}

/// Reset-held latches fed by small random cones over group latch outputs,
/// merged into a group latch's data input through XOR. Returns how many were
/// inserted.
inline std::size_t insert_logic_decoys(detail::LockWork& w, std::size_t count, const DelayModel& dm,
                                       const ClockSpec& clk, Rng& rng) {
  static constexpr CellKind kinds[] = {CellKind::And, CellKind::Or, CellKind::Xor, CellKind::Nand};
  std::size_t done = 0;
  for (std::size_t attempt = 0; done < count && attempt < 4 * count + 8; ++attempt) {
    auto group = w.latches_of(LatchOrigin::Converted);
    if (group.empty()) break;
    std::vector<std::string> outs;
    for (CellId c : group) outs.push_back(w.n.cell(c).name);
    rng.shuffle(outs);
    std::size_t width = static_cast<std::size_t>(rng.range(2, 4));
    std::vector<std::string> level(outs.begin(), outs.begin() + static_cast<std::ptrdiff_t>(std::min(width, outs.size())));
    while (level.size() < width) level.push_back(rng.pick(outs));

    detail::LockWork saved = w;
    while (level.size() > 1) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
        std::string g = w.n.fresh_name("lc");
        w.n.add_cell(kinds[rng.below(4)], g, {level[i], level[i + 1]});
        next.push_back(g);
      }
      if (level.size() % 2) next.push_back(level.back());
      level = std::move(next);
    }
    std::string z = w.n.fresh_name("ld");
    w.add_klatch(z, w.n.net_id(level[0]), LatchMode::LogicDecoy, LatchOrigin::LogicDecoy);

    auto targets = w.latches_of(LatchOrigin::Converted);
    rng.shuffle(targets);
    bool placed = false;
    for (CellId t : targets) {
      std::string tname = w.n.cell(t).name;
      detail::LockWork before = w;
      CellId tc = w.n.cell_id(tname);
      std::string merged = w.n.fresh_name("lx");
      w.n.add_cell(CellKind::Xor, merged, {w.n.net_name(w.n.cell(tc).inputs[0]), z});
      w.n.rewire(tc, 0, w.n.net_id(merged));
      if (detail::legal(w, dm, clk)) {
        placed = true;
        break;
      }
      w = std::move(before);
    }
    if (!placed) {
      w = std::move(saved);
      continue;
    }
    ++done;
  }
  return done;
}

/// Sequences of outputs from the same random stimulus (reset in the first
/// clock cycle, random inputs afterwards) on two netlists. State elements
/// with the same name start from the same value. Returns the number of
/// mismatching (frame, output, lane) triples over 64 lanes per seed.
inline std::size_t compare_by_simulation(const Netlist& a, const KeyVector& ka, const Netlist& b, const KeyVector& kb,
                                         int cycles, int seeds, std::uint64_t base_seed = 0) {
  if (a.inputs().size() != b.inputs().size() || a.outputs().size() != b.outputs().size())
    throw std::invalid_argument("netlists have different interfaces");
  using W = ParallelSimulator::Word;
  std::size_t mismatches = 0;
  for (int s = 0; s < seeds; ++s) {
    std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
    ParallelSimulator sa(a, ka), sb(b, kb);
    auto init = [&](ParallelSimulator& sim, const Netlist& n) {
      std::vector<W> st;
      for (CellId c : sim.state_cells()) st.push_back(splitmix64(seed ^ hash_name(n.cell(c).name)));
      sim.set_state(st);
    };
    init(sa, a);
    init(sb, b);
    Rng rng(seed, "stimulus");
    std::vector<W> in(a.inputs().size());
    for (int c = 0; c < cycles; ++c) {
      for (auto& x : in) x = rng.next();
      W reset = c == 0 ? ~W{} : 0;
      for (int h = 0; h < 2; ++h) {
        auto oa = sa.step(in, reset), ob = sb.step(in, reset);
        for (std::size_t o = 0; o < oa.size(); ++o) mismatches += static_cast<std::size_t>(std::popcount(oa[o] ^ ob[o]));
      }
    }
  }
  return mismatches;
}

/// Phase-transition counts per (launch, capture) anchor pair over paths that
/// are not broken, plus the counts of unbroken latch cycles.
struct CycleDelaySignature {
  std::map<std::pair<std::string, std::string>, std::set<int>> paths;
  std::set<int> cycles;
  bool operator==(const CycleDelaySignature&) const = default;
};

/// Clear latches become buffers and reset-held latches constant 0, so only
/// storing latches remain as path points.
inline Netlist resolve_transparent(const Netlist& n, const KeyVector& key) {
  auto modes = latch_modes(n, key);
  Netlist out(n.name());
  for (NetId i : n.inputs()) out.add_input(n.net_name(i));
  for (NetId k : n.key_inputs()) out.add_key_input(n.net_name(k));
  if (n.reset_net()) out.set_reset(n.net_name(*n.reset_net()));
  for (NetId o : n.outputs()) out.add_output(n.net_name(o));
  for (CellId c = 0; c < n.num_cells(); ++c) {
    const Cell& cell = n.cell(c);
    std::vector<std::string> ins;
    for (NetId i : cell.inputs) ins.push_back(n.net_name(i));
    if (cell.kind == CellKind::KLatch && modes[c] == LatchMode::Clear) {
      out.add_cell(CellKind::Buf, cell.name, ins);
    } else if (cell.kind == CellKind::KLatch && modes[c] == LatchMode::LogicDecoy) {
      out.add_cell(CellKind::Const0, cell.name, {});
    } else {
      out.add_cell(cell.kind, cell.name, ins, cell.key0, cell.key1);
    }
  }
  return out;
}

inline CycleDelaySignature cycle_delay_signature(const Netlist& locked, const KeyVector& key,
                                                 std::size_t cap = kDefaultPathCap) {
  CycleDelaySignature sig;
  Netlist n = resolve_transparent(locked, key);
  auto g = build_point_graph(n, DelayModel{});
  auto modes = latch_modes(n, key);
  auto paths = enumerate_paths(g, cap, true);
  for (const auto& p : paths.paths) {
    auto r = resolve_path(g, p, modes);
    if (r.broken) continue;
    sig.paths[{g.launches[p.launch].name, g.captures[p.capture].name}].insert(r.transitions);
  }
  for (const auto& c : enumerate_cycles(g, cap).cycles) {
    bool broken = false;
    std::vector<LatchMode> m;
    for (int l : c.latches) {
      m.push_back(modes[g.latches[l]]);
      broken = broken || m.back() == LatchMode::LogicDecoy;
    }
    if (broken) continue;
    auto next = [](LatchMode x, int cur) { return x == LatchMode::NegPhase ? 1 : x == LatchMode::PosPhase ? 0 : cur; };
    int cur = 0, count = 0;
    for (auto x : m) cur = next(x, cur);
    for (auto x : m) {
      int nx = next(x, cur);
      count += nx != cur;
      cur = nx;
    }
    sig.cycles.insert(count);
  }
  return sig;
}

/// Full insertion flow: select a flip-flop group, convert it to keyed
/// latches, retime, add delay and logic decoys, assign keys, and check the
/// result (structure, loops, timing, cycle delays, simulation).
inline LockResult lock(const Netlist& original, const LockConfig& cfg, const DelayModel& dm,
                       std::optional<ClockSpec> clock = std::nullopt) {
  if (original.num_keys() != 0) throw LockError("plan", "netlist is already locked");
  dm.check();
  auto plan = plan_lock(original, cfg);
  ClockSpec clk = clock ? *clock : default_clock(original, dm);
  clk.check();
  if (!check_timing(original, dm, clk, KeyVector()).legal)
    throw LockError("plan", "original design does not meet the clock period");

  LockResult res;
  res.clock = clk;
  auto group = select_ff_group(original, static_cast<std::size_t>(plan.flip_flops), cfg.group_samples, cfg.seed, dm);
  for (CellId c : group) res.group.push_back(original.cell(c).name);

  detail::LockWork w{original, {}, {}, {}, 0};
  convert_group(w, group);
  auto [reference, ref_order] = detail::finalize_keys(w);
  KeyVector reference_key = detail::ordered_key(w, ref_order);
  std::size_t budget = static_cast<std::size_t>(plan.latches);
  if (!detail::legal(w, dm, clk)) throw LockError("convert", "converted design violates timing");

  if (cfg.retime) {
    Rng rng(cfg.seed, "retime");
    res.stats.retime_moves = retime_latches(w, budget, dm, clk, rng);
  }

  std::size_t real = w.live_latches();
  std::size_t decoys = budget - real;
  res.stats.decoys_requested = decoys;
  Rng drng(cfg.seed, "decoys");
  std::size_t want_delay = (decoys + 1) / 2;
  std::size_t got_delay = insert_delay_decoys(w, want_delay, dm, clk, drng);
  std::size_t want_logic = decoys - got_delay;
  std::size_t got_logic = insert_logic_decoys(w, want_logic, dm, clk, drng);
  if (got_delay + got_logic < decoys) {
    // a second pass for delay decoys on whatever slack is left
    got_delay += insert_delay_decoys(w, decoys - got_delay - got_logic, dm, clk, drng);
  }
  if (got_delay + got_logic < decoys)
    throw LockError("decoys", "only " + std::to_string(got_delay + got_logic) + " of " + std::to_string(decoys) +
                                  " decoy latches could be placed");

  auto [locked, order] = detail::finalize_keys(w);
  KeyVector key = detail::ordered_key(w, order);
  for (const auto& name : order) res.manifest.push_back({name, w.mode.at(name), w.origin.at(name)});

  // checks
  auto diags = validate(locked);
  if (!diags.empty()) throw LockError("check", diags.front().message);
  if (static_cast<int>(locked.num_keys()) != cfg.key_bits)
    throw LockError("check", "key has " + std::to_string(locked.num_keys()) + " bits");
  if (!detail::transparent_loop_free(locked, key)) throw LockError("check", "correct key leaves a transparent loop");
  if (!check_timing(locked, dm, clk, key).legal) throw LockError("check", "correct key violates timing");
  if (!(cycle_delay_signature(locked, key) == cycle_delay_signature(reference, reference_key)))
    throw LockError("check", "cycle delays differ from the unretimed conversion");
  if (cfg.check_cycles > 0 &&
      compare_by_simulation(original, KeyVector(), locked, key, cfg.check_cycles, cfg.check_seeds, cfg.seed) != 0)
    throw LockError("check", "locked design differs from the original in simulation");

  res.locked = std::move(locked);
  res.correct_key = key;
  res.stats.gates_before = detail::comb_cells(original);
  res.stats.gates_after = detail::comb_cells(res.locked);
  res.stats.critical_before = critical_delay(original, dm, KeyVector());
  res.stats.critical_after = critical_delay(res.locked, dm, key);
  for (const auto& m : res.manifest) {
    if (m.origin == LatchOrigin::Converted) ++res.stats.converted;
    if (m.origin == LatchOrigin::DelayDecoy) ++res.stats.delay_decoys;
    if (m.origin == LatchOrigin::LogicDecoy) ++res.stats.logic_decoys;
  }
  if (res.stats.converted > 0)
    res.stats.decoy_ratio = static_cast<double>(res.stats.delay_decoys + res.stats.logic_decoys) /
                            static_cast<double>(res.stats.converted);
  return res;
}

}  // namespace latchlock
