#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cnf.hpp"
#include "constraints.hpp"
#include "equivalence.hpp"
#include "key.hpp"
#include "netlist.hpp"
#include "paths.hpp"
#include "sim.hpp"
#include "timing.hpp"
#include "unroll.hpp"

namespace latchlock {

struct AttackBudgets {
  double wall_seconds = 60;
  std::size_t max_depth = 34;       // frames searched past the current trace
  std::int64_t conflicts = -1;      // per solver call, < 0 unlimited
  std::size_t max_iterations = 10000;
};

using StateMap = std::map<std::string, std::uint8_t>;

struct AttackStats {
  std::size_t dis_count = 0;
  std::size_t final_depth = 0;  // frames in the miter at the end
  std::size_t trace_frames = 0;
  double solver_seconds = 0;
  double wall_seconds = 0;
  double validation_seconds = 0;  // part of wall_seconds
  std::uint64_t conflicts = 0;
  bool bounded_termination = false;  // ended because no DIS exists within max_depth
};

enum class AttackStatus { Solved, Timeout, Infeasible };

inline const char* status_name(AttackStatus s) {
  switch (s) {
    case AttackStatus::Solved: return "solved";
    case AttackStatus::Timeout: return "timeout";
    case AttackStatus::Infeasible: return "infeasible";
  }
  return "?";
}

struct KeyPair {
  KeyVector k0, k1;
};

struct AttackResult {
  AttackStatus status = AttackStatus::Timeout;
  KeyVector key;
  StateMap initial_state;
  std::optional<KeyPair> surviving;  // evidence on timeout
  std::vector<TraceStep> trace;
  AttackStats stats;
};

/// One distinguishing input sequence: whole clock cycles appended to the
/// trace, with the solver's reset choice per frame.
struct Dis {
  std::vector<TraceStep> steps;  // outputs unset
  std::size_t depth = 0;         // frames searched when it was found
  KeyVector k0, k1;
  StateMap init;
};

class AttackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline KeyVector model_key(const CnfProblem& p, const std::vector<Lit>& lits) {
  KeyVector k(lits.size());
  for (std::size_t i = 0; i < lits.size(); ++i) k.set(i, p.value(lits[i]));
  return k;
}

inline StateMap model_state(const CnfProblem& p, const Netlist& n, const std::vector<Lit>& init) {
  StateMap m;
  for (CellId c : n.state_elements()) m[n.cell(c).name] = p.value(init[c]);
  return m;
}

inline Trace replay(const Netlist& n, const KeyVector& k, const StateMap& init, std::vector<TraceStep> steps) {
  Trace t;
  t.steps = std::move(steps);
  t.initial_state = init;
  return simulate(n, k, std::move(t));
}

}  // namespace detail

/// Incremental miter for the sequential attack. Both key copies satisfy the
/// loop and timing constraints; the inequivalence circuit sits behind an
/// activation literal so the same problem also answers "does any key agree
/// with the trace".
class AttackSession {
 public:
  AttackSession(const Netlist& locked, const DelayModel& dm, const ClockSpec& clk, AttackBudgets budgets = {})
      : n_(&locked), budgets_(budgets), start_(std::chrono::steady_clock::now()) {
    constraints_ = gen_constraints(locked, dm, clk);
    counters_ = build_counters(locked);
    m_ = std::make_unique<Miter>(locked);
    auto& p = m_->p;
    constraints_.circuit.encode(p, m_->k0);
    constraints_.circuit.encode(p, m_->k1);
    ineq_ = build_inequivalence_circuit(p, locked, counters_, m_->k0, m_->k1);
    active_ = p.new_var("attack.ineq");
    p.add_clause({-active_, ineq_});
    m_->extend_cycle();
  }

  const Netlist& netlist() const { return *n_; }
  const std::vector<TraceStep>& trace() const { return trace_; }
  std::size_t depth() const { return m_->frames(); }
  const KeyConstraintSet& constraints() const { return constraints_; }
  const AttackBudgets& budgets() const { return budgets_; }
  Miter& miter() { return *m_; }
  double solver_seconds() const { return solver_seconds_; }
  bool out_of_time() const { return detail::since(start_) >= budgets_.wall_seconds; }

  /// Searches for a distinguishing sequence past the trace, growing the
  /// unrolling one clock cycle at a time. nullopt with `unknown` set means
  /// the budget ran out; nullopt otherwise means none exists within
  /// max_depth frames.
  std::optional<Dis> find_dis(bool* unknown = nullptr) {
    if (unknown) *unknown = false;
    std::size_t from = trace_.size();
    while (m_->frames() < from + 2) m_->extend_cycle();
    for (;;) {
      Lit act = m_->p.new_var();
      m_->p.add_clause({-act, m_->differs_from(from)});
      auto r = solve({active_, act});
      m_->p.add_unit(-act);  // retire this depth's selector
      if (r == sat::Result::Unknown) {
        if (unknown) *unknown = true;
        return std::nullopt;
      }
      if (r == sat::Result::Sat) return extract_dis(from);
      if (m_->frames() - from >= budgets_.max_depth) return std::nullopt;
      m_->extend_cycle();
    }
  }

  /// Fixes the DIS inputs and the oracle's outputs on both copies.
  void add_io_constraint(const std::vector<TraceStep>& steps) {
    if (steps.size() % 2 != 0) throw AttackError("IO constraints must cover whole clock cycles");
    auto& p = m_->p;
    for (const auto& s : steps) {
      std::size_t f = trace_.size();
      while (m_->frames() <= f) m_->extend_cycle();
      if (s.outputs.size() != n_->outputs().size() || s.inputs.size() != n_->inputs().size())
        throw AttackError("trace step has the wrong width");
      const auto& in = m_->inputs[f / 2];
      for (std::size_t i = 0; i < in.size(); ++i) p.add_unit(s.inputs[i] ? in[i] : -in[i]);
      p.add_unit(s.reset ? m_->resets[f] : -m_->resets[f]);
      auto oa = m_->a->outputs(f), ob = m_->b->outputs(f);
      for (std::size_t o = 0; o < oa.size(); ++o) {
        p.add_unit(s.outputs[o] ? oa[o] : -oa[o]);
        p.add_unit(s.outputs[o] ? ob[o] : -ob[o]);
      }
      trace_.push_back(s);
    }
  }

  /// Terminated iff no two inequivalent, constraint-satisfying keys agree
  /// with the trace (bounded to its length). Otherwise returns a witness.
  struct Termination {
    bool terminated = false;
    bool unknown = false;
    std::optional<KeyPair> witness;
  };
  Termination termination_check() {
    Termination t;
    auto r = solve({active_});
    if (r == sat::Result::Unknown) {
      t.unknown = true;
    } else if (r == sat::Result::Unsat) {
      t.terminated = true;
    } else {
      t.witness = KeyPair{detail::model_key(m_->p, m_->k0), detail::model_key(m_->p, m_->k1)};
    }
    return t;
  }

  /// Any key consistent with the trace and the constraints, with its state.
  std::optional<std::pair<KeyVector, StateMap>> extract() {
    auto r = solve({});
    if (r != sat::Result::Sat) return std::nullopt;
    return std::make_pair(detail::model_key(m_->p, m_->k0), detail::model_state(m_->p, *n_, m_->init));
  }

 private:
  sat::Result solve(std::initializer_list<Lit> assumptions) {
    if (out_of_time()) return sat::Result::Unknown;
    sat::Budget b = sat::Budget::seconds(budgets_.wall_seconds - detail::since(start_));
    b.conflicts = budgets_.conflicts;
    auto t0 = std::chrono::steady_clock::now();
    auto r = m_->p.solve(assumptions, b);
    solver_seconds_ += detail::since(t0);
    return r;
  }

  Dis extract_dis(std::size_t from) {
    auto& p = m_->p;
    Dis d;
    d.depth = m_->frames();
    d.k0 = detail::model_key(p, m_->k0);
    d.k1 = detail::model_key(p, m_->k1);
    d.init = detail::model_state(p, *n_, m_->init);
    std::size_t first = from;
    while (first < m_->frames() && !p.value(m_->diff[first])) ++first;
    if (first == m_->frames()) throw AttackError("model has no differing frame");
    std::size_t end = (first / 2 + 1) * 2;
    std::vector<TraceStep> all = trace_;
    for (std::size_t f = from; f < end; ++f) {
      TraceStep s;
      s.phase = f % 2 == 0 ? Phase::High : Phase::Low;
      for (Lit l : m_->inputs[f / 2]) s.inputs.push_back(p.value(l));
      s.reset = p.value(m_->resets[f]);
      d.steps.push_back(s);
      all.push_back(s);
    }
    // the two model keys must really disagree on the replayed sequence
    auto ta = detail::replay(*n_, d.k0, d.init, all);
    auto tb = detail::replay(*n_, d.k1, d.init, all);
    bool differs = false;
    for (std::size_t f = from; f < end; ++f) differs = differs || ta.steps[f].outputs != tb.steps[f].outputs;
    for (std::size_t f = 0; f < from; ++f)
      if (ta.steps[f].outputs != trace_[f].outputs || tb.steps[f].outputs != trace_[f].outputs)
        throw AttackError("model disagrees with the trace in simulation at frame " + std::to_string(f));
    if (!differs) throw AttackError("distinguishing sequence does not replay in simulation");
    return d;
  }

  const Netlist* n_;
  AttackBudgets budgets_;
  std::chrono::steady_clock::time_point start_;
  KeyConstraintSet constraints_;
  CounterSet counters_;
  std::unique_ptr<Miter> m_;
  Lit ineq_ = 0, active_ = 0;
  std::vector<TraceStep> trace_;
  double solver_seconds_ = 0;
};

struct ValidationResult {
  bool pass = false;
  std::vector<TraceStep> counterexample;  // inputs and resets only
};

/// Bounded check that `candidate` from `state` behaves like the correct key
/// from the same state for every input and reset sequence of `depth` frames
/// (frame 0 in reset).
inline ValidationResult validate_key(const Netlist& locked, const KeyVector& correct, const KeyVector& candidate,
                                     const StateMap& state, std::size_t depth = 32) {
  if (depth < 2 || depth % 2) throw std::invalid_argument("validation depth must be a positive even number");
  Miter m(locked);
  for (std::size_t i = 0; i < locked.num_keys(); ++i) {
    m.p.add_unit(correct[i] ? m.k0[i] : -m.k0[i]);
    m.p.add_unit(candidate[i] ? m.k1[i] : -m.k1[i]);
  }
  for (const auto& [name, v] : state) {
    auto c = locked.find_cell(name);
    if (!c || m.init[*c] == CnfProblem::kFalse) throw std::invalid_argument("'" + name + "' is not a state element");
    m.p.add_unit(v ? m.init[*c] : -m.init[*c]);
  }
  while (m.frames() < depth) m.extend_cycle();
  ValidationResult res;
  Lit d = m.differs_from(0);
  if (m.p.solve({d}) == sat::Result::Unsat) {
    res.pass = true;
    return res;
  }
  for (std::size_t f = 0; f < m.frames(); ++f) {
    TraceStep s;
    s.phase = f % 2 == 0 ? Phase::High : Phase::Low;
    for (Lit l : m.inputs[f / 2]) s.inputs.push_back(m.p.value(l));
    s.reset = m.p.value(m.resets[f]);
    res.counterexample.push_back(s);
  }
  return res;
}

/// Called after each accepted DIS with the session and the extended trace.
using AttackObserver = std::function<void(const AttackSession&, const Dis&)>;

/// Oracle-guided sequential attack: find a DIS, query the oracle on it as a
/// continuation of one contiguous run, constrain both copies with the answer,
/// and stop once no inequivalent pair agrees with the trace (or no DIS exists
/// within the depth bound). The solved key is checked with validate_key
/// against the oracle's key.
inline AttackResult run_attack(const Netlist& locked, const DelayModel& dm, const ClockSpec& clk, OracleSession& oracle,
                               const AttackBudgets& budgets = {}, const AttackObserver& observer = {},
                               std::size_t validation_depth = 32) {
  auto t0 = std::chrono::steady_clock::now();
  AttackResult res;
  AttackSession s(locked, dm, clk, budgets);
  auto finish = [&](AttackStatus st) {
    res.status = st;
    res.trace = s.trace();
    res.stats.final_depth = s.depth();
    res.stats.trace_frames = s.trace().size();
    res.stats.solver_seconds = s.solver_seconds();
    res.stats.wall_seconds = detail::since(t0);
    return res;
  };

  bool bounded = false;
  for (std::size_t it = 0;; ++it) {
    if (it >= budgets.max_iterations || s.out_of_time()) return finish(AttackStatus::Timeout);
    if (!s.trace().empty()) {
      auto t = s.termination_check();
      if (t.unknown) return finish(AttackStatus::Timeout);
      if (t.terminated) break;
      res.surviving = t.witness;
    }
    bool unknown = false;
    auto dis = s.find_dis(&unknown);
    if (unknown) return finish(AttackStatus::Timeout);
    if (!dis) {
      bounded = true;
      break;
    }
    auto outs = oracle.query(dis->steps);
    for (std::size_t i = 0; i < outs.size(); ++i) dis->steps[i].outputs = outs[i];
    s.add_io_constraint(dis->steps);
    ++res.stats.dis_count;
    if (observer) observer(s, *dis);
  }
  res.stats.bounded_termination = bounded;

  auto found = s.extract();
  if (!found) return finish(AttackStatus::Infeasible);
  res.key = found->first;
  res.initial_state = found->second;
  auto tv = std::chrono::steady_clock::now();
  auto v = validate_key(locked, oracle.correct_key(), res.key, res.initial_state, validation_depth);
  res.stats.validation_seconds = detail::since(tv);
  if (!v.pass) throw AttackError("recovered key fails validation at depth " + std::to_string(validation_depth));
  return finish(AttackStatus::Solved);
}

// ---------------------------------------------------------------------------
// Combinational attack with full scan
// ---------------------------------------------------------------------------

/// Flip-flops cut into pseudo-inputs (their outputs) and pseudo-outputs
/// (their data pins), appended after the real ports.
inline Netlist scan_view(const Netlist& n) {
  if (!n.latches().empty()) throw std::invalid_argument("scan view needs a design without latches");
  Netlist v(n.name());
  for (NetId i : n.inputs()) v.add_input(n.net_name(i));
  for (CellId c : n.flip_flops()) v.add_input(n.cell(c).name);
  for (NetId k : n.key_inputs()) v.add_key_input(n.net_name(k));
  if (n.reset_net()) v.set_reset(n.net_name(*n.reset_net()));
  for (NetId o : n.outputs()) v.add_output(n.net_name(o));
  for (CellId c : n.flip_flops()) {
    const std::string& d = n.net_name(n.cell(c).inputs[0]);
    if (!v.is_output(v.net(d))) v.add_output(d);
  }
  for (const auto& c : n.cells()) {
    if (c.kind == CellKind::Dff) continue;
    std::vector<std::string> ins;
    for (NetId i : c.inputs) ins.push_back(n.net_name(i));
    v.add_cell(c.kind, c.name, ins);
  }
  return v;
}

using IoOracle = std::function<std::vector<std::uint8_t>(const std::vector<std::uint8_t>&)>;

struct CombinationalResult {
  bool solved = false;
  KeyVector key;
  std::size_t queries = 0;
};

/// Distinguishing-input loop on a combinational (or scan-view) netlist.
inline CombinationalResult run_combinational_attack(const Netlist& n, const IoOracle& oracle,
                                                    const AttackBudgets& budgets = {}) {
  if (!n.state_elements().empty()) throw std::invalid_argument("combinational attack needs a design without state");
  auto start = std::chrono::steady_clock::now();
  CnfProblem p;
  auto k0 = make_key_vars(p, n.num_keys(), "K0");
  auto k1 = make_key_vars(p, n.num_keys(), "K1");
  std::vector<Lit> none(n.num_cells(), CnfProblem::kFalse);
  std::vector<Lit> x;
  for (NetId i : n.inputs()) x.push_back(p.new_var(n.net_name(i)));
  Unrolling a(p, n, k0, none), b(p, n, k1, none);
  a.add_frame(x, CnfProblem::kFalse);
  b.add_frame(x, CnfProblem::kFalse);
  std::vector<Lit> d;
  auto oa = a.outputs(0), ob = b.outputs(0);
  for (std::size_t o = 0; o < oa.size(); ++o) d.push_back(p.xor2(oa[o], ob[o]));
  Lit act = p.new_var();
  p.add_clause({-act, p.or_all(d)});

  CombinationalResult res;
  for (;;) {
    double left = budgets.wall_seconds - detail::since(start);
    if (left <= 0 || res.queries >= budgets.max_iterations) return res;
    sat::Budget bud = sat::Budget::seconds(left);
    bud.conflicts = budgets.conflicts;
    auto r = p.solve({act}, bud);
    if (r == sat::Result::Unknown) return res;
    if (r == sat::Result::Unsat) break;
    std::vector<std::uint8_t> in;
    for (Lit l : x) in.push_back(p.value(l));
    auto out = oracle(in);
    ++res.queries;
    std::vector<Lit> cin;
    for (auto bit : in) cin.push_back(bit ? CnfProblem::kTrue : CnfProblem::kFalse);
    for (const auto* keys : {&k0, &k1}) {
      Unrolling c(p, n, *keys, none);
      c.add_frame(cin, CnfProblem::kFalse);
      auto o = c.outputs(0);
      for (std::size_t j = 0; j < o.size(); ++j) p.add_unit(out.at(j) ? o[j] : -o[j]);
    }
  }
  if (p.solve({}) != sat::Result::Sat) return res;
  res.solved = true;
  res.key = detail::model_key(p, k0);
  return res;
}

}  // namespace latchlock
