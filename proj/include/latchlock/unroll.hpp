#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cnf.hpp"
#include "key.hpp"
#include "netlist.hpp"

namespace latchlock {

/// Free variables for the initial held value of every state element; other
/// cells get kFalse. Named "<prefix><cell>" when a prefix is given.
inline std::vector<Lit> make_state_vars(CnfProblem& p, const Netlist& n, const std::string& prefix = {}) {
  std::vector<Lit> v(n.num_cells(), CnfProblem::kFalse);
  for (CellId c : n.state_elements()) v[c] = prefix.empty() ? p.new_var() : p.new_var(prefix + n.cell(c).name);
  return v;
}

inline std::vector<Lit> make_key_vars(CnfProblem& p, std::size_t bits, const std::string& prefix = {}) {
  std::vector<Lit> v;
  for (std::size_t i = 0; i < bits; ++i)
    v.push_back(prefix.empty() ? p.new_var() : p.new_var(prefix + "[" + std::to_string(i) + "]"));
  return v;
}

inline std::vector<Lit> key_constants(const KeyVector& k) {
  std::vector<Lit> v;
  for (std::size_t i = 0; i < k.size(); ++i) v.push_back(k[i] ? CnfProblem::kTrue : CnfProblem::kFalse);
  return v;
}

/// Half-cycle time-frame expansion of one circuit copy. Frame f is a High
/// frame iff f is even. Key and initial-state literals are supplied by the
/// caller so several copies can share or separate them.
class Unrolling {
 public:
  Unrolling(CnfProblem& p, const Netlist& n, std::vector<Lit> keys, std::vector<Lit> init)
      : p_(&p), n_(&n), keys_(std::move(keys)), init_(std::move(init)) {
    if (keys_.size() != n.num_keys()) throw std::invalid_argument("key literal count mismatch");
    if (init_.size() != n.num_cells()) throw std::invalid_argument("initial state literal count mismatch");
  }

  const Netlist& netlist() const { return *n_; }
  std::size_t frames() const { return frames_.size(); }
  const std::vector<Lit>& keys() const { return keys_; }
  const std::vector<Lit>& init() const { return init_; }
  Lit net(std::size_t frame, NetId id) const { return frames_.at(frame)[id]; }
  std::vector<Lit> outputs(std::size_t frame) const {
    std::vector<Lit> o;
    for (NetId id : n_->outputs()) o.push_back(frames_.at(frame)[id]);
    return o;
  }

  /// Appends the next half-cycle frame.
  void add_frame(std::span<const Lit> inputs, Lit reset) {
    const Netlist& n = *n_;
    CnfProblem& p = *p_;
    if (inputs.size() != n.inputs().size()) throw std::invalid_argument("input literal count mismatch");
    std::size_t f = frames_.size();
    Phase phase = f % 2 == 0 ? Phase::High : Phase::Low;
    const std::vector<Lit>* prev = f > 0 ? &frames_[f - 1] : nullptr;

    std::vector<Lit> v(n.num_nets(), 0);
    for (std::size_t i = 0; i < inputs.size(); ++i) v[n.inputs()[i]] = inputs[i];
    for (std::size_t i = 0; i < keys_.size(); ++i) v[n.key_inputs()[i]] = keys_[i];
    if (n.reset_net()) v[*n.reset_net()] = reset;

    struct Deferred {
      CellId cell;
      Lit out, en, t, hold;
    };
    std::vector<Deferred> deferred;
    const auto& order = order_for(phase);
    std::vector<bool> wired(n.num_cells(), false);
    for (CellId c : order)
      if (is_latch(n.cell(c).kind)) wired[c] = true;

    for (CellId c : n.state_elements()) {
      const Cell& cell = n.cell(c);
      if (cell.kind == CellKind::Dff) {
        Lit src = f == 0 ? init_[c] : (phase == Phase::High ? (*prev)[cell.inputs[0]] : (*prev)[cell.output]);
        v[cell.output] = p.and2(src, -reset);
        continue;
      }
      if (wired[c]) continue;
      Lit h_prev = f == 0 ? init_[c] : (*prev)[cell.output];
      Lit hold = cell.kind == CellKind::KLatch ? p.and2(h_prev, -reset) : h_prev;
      Lit en, t;
      if (cell.kind == CellKind::KLatch) {
        Lit k0 = keys_[cell.key0], k1 = keys_[cell.key1];
        en = p.or2(k0, k1);
        t = phase == Phase::High ? k1 : k0;
      } else {
        en = CnfProblem::kTrue;
        bool high = cell.kind == CellKind::LatchP;
        t = (phase == Phase::High) == high ? CnfProblem::kTrue : CnfProblem::kFalse;
      }
      if (t == CnfProblem::kFalse) {
        v[cell.output] = p.and2(en, hold);
      } else {
        Lit o = p.new_var();
        v[cell.output] = o;
        deferred.push_back({c, o, en, t, hold});
      }
    }

    std::vector<Lit> buf;
    for (CellId c : order) {
      const Cell& cell = n.cell(c);
      if (is_latch(cell.kind)) {
        v[cell.output] = v[cell.inputs[0]];
        continue;
      }
      buf.clear();
      for (NetId i : cell.inputs) buf.push_back(v[i]);
      v[cell.output] = p.gate(cell.kind, buf);
    }
    for (const auto& d : deferred) {
      Lit data = v[n.cell(d.cell).inputs[0]];
      p.add_equal(d.out, p.and2(d.en, p.mux(d.t, d.hold, data)));
    }
    frames_.push_back(std::move(v));
  }

 private:
  // Latches that are transparent for certain in this phase (constant key
  // literals) are evaluated as wires when that keeps the order acyclic.
  const std::vector<CellId>& order_for(Phase phase) {
    auto& slot = orders_[phase == Phase::High ? 0 : 1];
    if (slot) return *slot;
    std::vector<CellId> wires;
    for (CellId c : n_->latches()) {
      const Cell& cell = n_->cell(c);
      bool on = false;
      if (cell.kind == CellKind::KLatch) {
        Lit k0 = keys_[cell.key0], k1 = keys_[cell.key1];
        Lit t = phase == Phase::High ? k1 : k0;
        on = t == CnfProblem::kTrue;
      } else {
        on = (cell.kind == CellKind::LatchP) == (phase == Phase::High);
      }
      if (on) wires.push_back(c);
    }
    auto r = topo_order(*n_, wires);
    if (auto* o = std::get_if<std::vector<CellId>>(&r)) {
      slot = std::move(*o);
    } else {
      slot = std::get<std::vector<CellId>>(topo_order(*n_, {}));
    }
    return *slot;
  }

  CnfProblem* p_;
  const Netlist* n_;
  std::vector<Lit> keys_, init_;
  std::vector<std::vector<Lit>> frames_;
  std::array<std::optional<std::vector<CellId>>, 2> orders_;
};

/// Two unrolled copies with separate keys K0/K1 and shared inputs, resets and
/// initial state. Frame 0 asserts reset; later resets are free.
class Miter {
 public:
  explicit Miter(const Netlist& n) : n_(&n) {
    k0 = make_key_vars(p, n.num_keys(), "K0");
    k1 = make_key_vars(p, n.num_keys(), "K1");
    init = make_state_vars(p, n, "init.");
    a.emplace(p, n, k0, init);
    b.emplace(p, n, k1, init);
  }
  Miter(const Miter&) = delete;
  Miter& operator=(const Miter&) = delete;

  std::size_t frames() const { return a->frames(); }
  std::size_t cycles() const { return inputs.size(); }

  /// Adds one clock cycle (two frames) with fresh input and reset variables.
  void extend_cycle() {
    std::size_t c = inputs.size();
    std::vector<Lit> in;
    for (NetId i : n_->inputs()) in.push_back(p.new_var(n_->net_name(i) + "@" + std::to_string(c)));
    inputs.push_back(in);
    for (int h = 0; h < 2; ++h) {
      std::size_t f = resets.size();
      Lit r = f == 0 ? CnfProblem::kTrue : p.new_var("reset@" + std::to_string(f));
      resets.push_back(r);
      a->add_frame(in, r);
      b->add_frame(in, r);
      std::vector<Lit> x;
      auto oa = a->outputs(f), ob = b->outputs(f);
      for (std::size_t o = 0; o < oa.size(); ++o) x.push_back(p.xor2(oa[o], ob[o]));
      diff.push_back(p.or_all(x));
    }
  }

  /// Literal that is true iff the copies disagree in some frame >= from.
  Lit differs_from(std::size_t from) {
    std::vector<Lit> d(diff.begin() + static_cast<std::ptrdiff_t>(std::min(from, diff.size())), diff.end());
    return p.or_all(d);
  }

  CnfProblem p;
  std::vector<Lit> k0, k1, init;
  std::vector<std::vector<Lit>> inputs;  // per cycle
  std::vector<Lit> resets;               // per frame
  std::vector<Lit> diff;                 // per frame
  std::optional<Unrolling> a, b;

 private:
  const Netlist* n_;
};

inline std::unique_ptr<Miter> build_miter(const Netlist& n, std::size_t frames) {
  if (frames < 2 || frames % 2 != 0) throw std::invalid_argument("miter depth must be a positive even number of frames");
  auto m = std::make_unique<Miter>(n);
  while (m->frames() < frames) m->extend_cycle();
  return m;
}

}  // namespace latchlock
