#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "key.hpp"
#include "netlist.hpp"
#include "rng.hpp"

namespace latchlock {

inline constexpr std::uint8_t V0 = 0, V1 = 1, VX = 2;

class OscillationError : public std::runtime_error {
 public:
  OscillationError(const std::string& what, std::vector<std::string> loop)
      : std::runtime_error(what), loop_(std::move(loop)) {}
  const std::vector<std::string>& loop() const { return loop_; }

 private:
  std::vector<std::string> loop_;
};

namespace detail {

inline std::uint8_t eval3(CellKind k, std::span<const std::uint8_t> in) {
  auto all_and = [&](bool invert) -> std::uint8_t {
    bool x = false;
    for (auto v : in) {
      if (v == V0) return invert ? V1 : V0;
      if (v == VX) x = true;
    }
    return x ? VX : (invert ? V0 : V1);
  };
  auto all_or = [&](bool invert) -> std::uint8_t {
    bool x = false;
    for (auto v : in) {
      if (v == V1) return invert ? V0 : V1;
      if (v == VX) x = true;
    }
    return x ? VX : (invert ? V1 : V0);
  };
  auto parity = [&](bool invert) -> std::uint8_t {
    std::uint8_t p = 0;
    for (auto v : in) {
      if (v == VX) return VX;
      p ^= v;
    }
    return invert ? std::uint8_t(p ^ 1u) : p;
  };
  switch (k) {
    case CellKind::And: return all_and(false);
    case CellKind::Nand: return all_and(true);
    case CellKind::Or: return all_or(false);
    case CellKind::Nor: return all_or(true);
    case CellKind::Xor: return parity(false);
    case CellKind::Xnor: return parity(true);
    case CellKind::Not: return in[0] == VX ? VX : std::uint8_t(in[0] ^ 1u);
    case CellKind::Buf: return in[0];
    case CellKind::Mux:
      if (in[0] == V0) return in[1];
      if (in[0] == V1) return in[2];
      return in[1] == in[2] ? in[1] : VX;
    case CellKind::Const0: return V0;
    case CellKind::Const1: return V1;
    default: return in.empty() ? VX : in[0];
  }
}

template <typename Word>
Word eval_word(CellKind k, std::span<const Word> in) {
  Word r{};
  switch (k) {
    case CellKind::And:
    case CellKind::Nand:
      r = ~Word{};
      for (auto v : in) r &= v;
      return k == CellKind::Nand ? Word(~r) : r;
    case CellKind::Or:
    case CellKind::Nor:
      for (auto v : in) r |= v;
      return k == CellKind::Nor ? Word(~r) : r;
    case CellKind::Xor:
    case CellKind::Xnor:
      for (auto v : in) r ^= v;
      return k == CellKind::Xnor ? Word(~r) : r;
    case CellKind::Not: return ~in[0];
    case CellKind::Buf: return in[0];
    case CellKind::Mux: return (in[0] & in[2]) | (~in[0] & in[1]);
    case CellKind::Const0: return Word{};
    case CellKind::Const1: return ~Word{};
    default: return in.empty() ? Word{} : in[0];
  }
}

// Evaluation orders for both clock phases under a fixed key, built lazily.
class PhaseOrders {
 public:
  PhaseOrders(const Netlist& n, std::vector<LatchMode> modes) : n_(&n), modes_(std::move(modes)) {}

  const std::vector<CellId>& order(Phase p) {
    auto& slot = orders_[p == Phase::High ? 0 : 1];
    if (!slot) {
      auto r = topo_order(*n_, transparent_latches(*n_, modes_, p));
      if (auto* cyc = std::get_if<CycleReport>(&r)) {
        std::vector<std::string> names;
        std::string msg = std::string("transparent loop in ") + (p == Phase::High ? "high" : "low") + " phase:";
        for (CellId c : cyc->cells) {
          names.push_back(n_->cell(c).name);
          msg += " " + n_->cell(c).name;
        }
        throw OscillationError(msg, names);
      }
      slot = std::move(std::get<std::vector<CellId>>(r));
    }
    return *slot;
  }
  const std::vector<LatchMode>& modes() const { return modes_; }

 private:
  const Netlist* n_;
  std::vector<LatchMode> modes_;
  std::array<std::optional<std::vector<CellId>>, 2> orders_;
};

}  // namespace detail

/// Sequential elements whose held value is forced to 0 while reset is
/// asserted: flip-flops, and keyed latches while opaque. Fixed-phase
/// LATCH_P/LATCH_N cells model reset-free storage.
inline constexpr bool reset_covered(CellKind k) { return k == CellKind::Dff || k == CellKind::KLatch; }

/// Half-cycle functional simulator with three-valued nets.
///
/// Frames alternate High, Low, High, ... starting at High. DFFs load the value
/// their data net had at the end of the preceding Low frame when a High frame
/// begins; latches follow their data while transparent and keep the last
/// value otherwise.
class Simulator {
 public:
  Simulator(const Netlist& n, const KeyVector& key)
      : n_(&n), key_(key), orders_(n, latch_modes(n, key)), values_(n.num_nets(), VX),
        held_(n.num_cells(), VX), pending_(n.num_cells(), VX) {
    state_cells_ = n.state_elements();
  }

  const Netlist& netlist() const { return *n_; }
  const KeyVector& key() const { return key_; }
  std::size_t frame() const { return frame_; }
  const std::vector<CellId>& state_cells() const { return state_cells_; }

  void clear_state() {
    std::fill(held_.begin(), held_.end(), VX);
    std::fill(pending_.begin(), pending_.end(), VX);
    frame_ = 0;
  }
  void randomize_state(std::uint64_t seed) {
    Rng rng(seed, "state");
    clear_state();
    for (CellId c : state_cells_) held_[c] = rng.coin() ? V1 : V0;
  }
  /// Held values, one per state_cells() entry.
  void set_state(std::span<const std::uint8_t> s) {
    if (s.size() != state_cells_.size()) throw std::invalid_argument("state vector size mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) held_[state_cells_[i]] = s[i];
  }
  void set_state_of(CellId c, std::uint8_t v) { held_.at(c) = v; }
  std::vector<std::uint8_t> state() const {
    std::vector<std::uint8_t> s;
    for (CellId c : state_cells_) s.push_back(held_[c]);
    return s;
  }

  Phase next_phase() const { return frame_ % 2 == 0 ? Phase::High : Phase::Low; }

  /// Evaluates one half-cycle and returns the primary output values.
  std::vector<std::uint8_t> step(Phase phase, std::span<const std::uint8_t> inputs, bool reset) {
    if (phase != next_phase()) throw std::logic_error("half-cycle phases must alternate starting with High");
    if (inputs.size() != n_->inputs().size()) throw std::invalid_argument("input vector size mismatch");
    const auto& order = orders_.order(phase);
    const auto& modes = orders_.modes();
    const auto& cells = n_->cells();

    for (std::size_t i = 0; i < inputs.size(); ++i) values_[n_->inputs()[i]] = inputs[i] ? V1 : V0;
    for (std::size_t i = 0; i < n_->key_inputs().size(); ++i) values_[n_->key_inputs()[i]] = key_[i] ? V1 : V0;
    if (n_->reset_net()) values_[*n_->reset_net()] = reset ? V1 : V0;

    for (CellId c : state_cells_) {
      const Cell& cell = cells[c];
      std::uint8_t v;
      if (cell.kind == CellKind::Dff) {
        if (phase == Phase::High && frame_ > 0) held_[c] = pending_[c];
        v = reset ? V0 : held_[c];
      } else if (modes[c] == LatchMode::LogicDecoy) {
        v = V0;
      } else if (transparent_in(modes[c], phase)) {
        continue;
      } else {
        v = (reset && reset_covered(cell.kind)) ? V0 : held_[c];
      }
      values_[cell.output] = v;
    }

    std::array<std::uint8_t, 8> small{};
    std::vector<std::uint8_t> big;
    for (CellId c : order) {
      const Cell& cell = cells[c];
      std::span<const std::uint8_t> in;
      if (cell.inputs.size() <= small.size()) {
        for (std::size_t i = 0; i < cell.inputs.size(); ++i) small[i] = values_[cell.inputs[i]];
        in = std::span<const std::uint8_t>(small.data(), cell.inputs.size());
      } else {
        big.resize(cell.inputs.size());
        for (std::size_t i = 0; i < cell.inputs.size(); ++i) big[i] = values_[cell.inputs[i]];
        in = big;
      }
      values_[cell.output] = is_latch(cell.kind) ? in[0] : detail::eval3(cell.kind, in);
    }

    for (CellId c : state_cells_) {
      const Cell& cell = cells[c];
      if (cell.kind == CellKind::Dff) {
        held_[c] = values_[cell.output];
        pending_[c] = values_[cell.inputs[0]];
      } else {
        held_[c] = values_[cell.output];
      }
    }
    ++frame_;
    std::vector<std::uint8_t> out;
    out.reserve(n_->outputs().size());
    for (NetId o : n_->outputs()) out.push_back(values_[o]);
    return out;
  }

  std::uint8_t value(NetId n) const { return values_.at(n); }
  const std::vector<std::uint8_t>& values() const { return values_; }

 private:
  const Netlist* n_;
  KeyVector key_;
  detail::PhaseOrders orders_;
  std::vector<CellId> state_cells_;
  std::vector<std::uint8_t> values_, held_, pending_;
  std::size_t frame_ = 0;
};

/// 64 independent two-valued simulations in lock step (one per bit lane),
/// sharing netlist and key. Same frame semantics as Simulator.
class ParallelSimulator {
 public:
  using Word = std::uint64_t;

  ParallelSimulator(const Netlist& n, const KeyVector& key)
      : n_(&n), key_(key), orders_(n, latch_modes(n, key)), values_(n.num_nets(), 0), held_(n.num_cells(), 0),
        pending_(n.num_cells(), 0) {
    state_cells_ = n.state_elements();
  }

  const std::vector<CellId>& state_cells() const { return state_cells_; }
  void randomize_state(std::uint64_t seed) {
    Rng rng(seed, "state");
    frame_ = 0;
    for (CellId c : state_cells_) held_[c] = rng.next();
    std::fill(pending_.begin(), pending_.end(), 0);
  }
  void set_state(std::span<const Word> s) {
    frame_ = 0;
    for (std::size_t i = 0; i < s.size(); ++i) held_[state_cells_.at(i)] = s[i];
    std::fill(pending_.begin(), pending_.end(), 0);
  }
  std::vector<Word> state() const {
    std::vector<Word> s;
    for (CellId c : state_cells_) s.push_back(held_[c]);
    return s;
  }
  /// Full snapshot for branching exhaustive searches.
  struct Snapshot {
    std::vector<Word> held, pending;
    std::size_t frame;
  };
  Snapshot snapshot() const { return {held_, pending_, frame_}; }
  void restore(const Snapshot& s) {
    held_ = s.held;
    pending_ = s.pending;
    frame_ = s.frame;
  }

  Phase next_phase() const { return frame_ % 2 == 0 ? Phase::High : Phase::Low; }

  std::vector<Word> step(std::span<const Word> inputs, Word reset) {
    Phase phase = next_phase();
    const auto& order = orders_.order(phase);
    const auto& modes = orders_.modes();
    const auto& cells = n_->cells();
    for (std::size_t i = 0; i < inputs.size(); ++i) values_[n_->inputs()[i]] = inputs[i];
    for (std::size_t i = 0; i < n_->key_inputs().size(); ++i) values_[n_->key_inputs()[i]] = key_[i] ? ~Word{} : 0;
    if (n_->reset_net()) values_[*n_->reset_net()] = reset;

    for (CellId c : state_cells_) {
      const Cell& cell = cells[c];
      Word v;
      if (cell.kind == CellKind::Dff) {
        if (phase == Phase::High && frame_ > 0) held_[c] = pending_[c];
        v = held_[c] & ~reset;
      } else if (modes[c] == LatchMode::LogicDecoy) {
        v = 0;
      } else if (transparent_in(modes[c], phase)) {
        continue;
      } else {
        v = reset_covered(cell.kind) ? (held_[c] & ~reset) : held_[c];
      }
      values_[cell.output] = v;
    }
    std::vector<Word> buf;
    for (CellId c : order) {
      const Cell& cell = cells[c];
      if (is_latch(cell.kind)) {
        values_[cell.output] = values_[cell.inputs[0]];
        continue;
      }
      buf.resize(cell.inputs.size());
      for (std::size_t i = 0; i < cell.inputs.size(); ++i) buf[i] = values_[cell.inputs[i]];
      values_[cell.output] = detail::eval_word<Word>(cell.kind, buf);
    }
    for (CellId c : state_cells_) {
      const Cell& cell = cells[c];
      held_[c] = values_[cell.output];
      if (cell.kind == CellKind::Dff) pending_[c] = values_[cell.inputs[0]];
    }
    ++frame_;
    std::vector<Word> out;
    out.reserve(n_->outputs().size());
    for (NetId o : n_->outputs()) out.push_back(values_[o]);
    return out;
  }

  Word value(NetId n) const { return values_.at(n); }

 private:
  const Netlist* n_;
  KeyVector key_;
  detail::PhaseOrders orders_;
  std::vector<CellId> state_cells_;
  std::vector<Word> values_, held_, pending_;
  std::size_t frame_ = 0;
};

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

struct TraceStep {
  Phase phase = Phase::High;
  std::vector<std::uint8_t> inputs;
  bool reset = false;
  std::vector<std::uint8_t> outputs;
};

struct Trace {
  std::vector<TraceStep> steps;
  std::map<std::string, std::uint8_t> initial_state;  // by state-element name; others drawn from state_seed
  std::uint64_t state_seed = 0;
};

class TraceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Checks step alternation and that inputs only change when a High step starts.
/// `fresh` additionally requires the first step to assert reset.
inline void check_steps(std::span<const TraceStep> steps, bool fresh, Phase first = Phase::High) {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    Phase expect = ((i % 2 == 0) == (first == Phase::High)) ? Phase::High : Phase::Low;
    if (steps[i].phase != expect) throw TraceError("step " + std::to_string(i) + ": phases must alternate");
    if (steps[i].phase == Phase::Low && i > 0 && steps[i].inputs != steps[i - 1].inputs)
      throw TraceError("step " + std::to_string(i) + ": inputs may only change on a High step");
  }
  if (fresh && !steps.empty() && !steps[0].reset) throw TraceError("step 0 must assert reset");
}

/// Runs `trace` from a seeded random initial state and fills in outputs.
inline Trace simulate(const Netlist& n, const KeyVector& key, Trace trace) {
  check_steps(trace.steps, true);
  Simulator sim(n, key);
  sim.randomize_state(trace.state_seed);
  for (const auto& [name, v] : trace.initial_state) {
    auto c = n.find_cell(name);
    if (!c || !is_sequential(n.cell(*c).kind)) throw TraceError("'" + name + "' is not a state element");
    sim.set_state_of(*c, v ? V1 : V0);
  }
  for (auto& s : trace.steps) s.outputs = sim.step(s.phase, s.inputs, s.reset);
  return trace;
}

/// Stateful black-box instance of the unlocked circuit. Successive queries
/// continue one contiguous run; each query covers whole clock cycles, so the
/// session always pauses after a Low half-cycle.
class OracleSession {
 public:
  OracleSession() = default;
  OracleSession(Netlist n, KeyVector correct_key, std::uint64_t state_seed)
      : n_(std::make_shared<Netlist>(std::move(n))), key_(std::move(correct_key)), seed_(state_seed) {
    sim_.emplace(*n_, key_);
    sim_->randomize_state(seed_);
  }

  bool initialized() const { return sim_.has_value(); }
  const Netlist& netlist() const { return *n_; }
  const KeyVector& correct_key() const { return key_; }
  std::uint64_t state_seed() const { return seed_; }
  std::size_t frames() const { return sim_ ? sim_->frame() : 0; }
  std::size_t queries() const { return queries_; }

  std::vector<std::vector<std::uint8_t>> query(std::span<const TraceStep> extension) {
    if (!sim_) throw std::logic_error("oracle session not initialized");
    if (extension.size() % 2 != 0) throw TraceError("oracle queries must cover whole clock cycles");
    check_steps(extension, sim_->frame() == 0);
    std::vector<std::vector<std::uint8_t>> out;
    for (const auto& s : extension) out.push_back(sim_->step(s.phase, s.inputs, s.reset));
    if (!extension.empty()) ++queries_;
    return out;
  }

 private:
  std::shared_ptr<Netlist> n_;
  KeyVector key_;
  std::uint64_t seed_ = 0;
  std::optional<Simulator> sim_;
  std::size_t queries_ = 0;
};

}  // namespace latchlock
