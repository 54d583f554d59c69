#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "netlist.hpp"
#include "sat.hpp"

namespace latchlock {

using sat::Lit;

/// Clause database plus a gate-level builder and an attached incremental
/// solver. Variable 1 is the constant TRUE; gate helpers fold constants and
/// share structurally identical AND/XOR nodes.
class CnfProblem {
 public:
  CnfProblem() {
    num_vars_ = 1;
    clauses_.push_back({kTrue});  // add_clause() would fold it away
  }
  CnfProblem(const CnfProblem&) = delete;
  CnfProblem& operator=(const CnfProblem&) = delete;

  static constexpr Lit kTrue = 1;
  static constexpr Lit kFalse = -1;
  static bool is_const(Lit l) { return l == kTrue || l == kFalse; }

  Lit new_var() { return ++num_vars_; }
  Lit new_var(const std::string& name) {
    Lit v = new_var();
    name_var(name, v);
    return v;
  }
  void name_var(const std::string& name, Lit l) {
    auto [it, fresh] = names_.emplace(name, l);
    if (!fresh) throw std::logic_error("variable name '" + name + "' already used");
  }
  std::optional<Lit> named(const std::string& name) const {
    auto it = names_.find(name);
    if (it == names_.end()) return std::nullopt;
    return it->second;
  }
  const std::map<std::string, Lit>& names() const { return names_; }

  int num_vars() const { return num_vars_; }
  std::size_t num_clauses() const { return clauses_.size(); }
  const std::vector<std::vector<Lit>>& clauses() const { return clauses_; }

  void add_clause(std::vector<Lit> c) {
    std::vector<Lit> out;
    for (Lit l : c) {
      if (l == 0 || std::abs(l) > num_vars_) throw std::out_of_range("clause references unallocated variable");
      if (l == kTrue) return;
      if (l == kFalse) continue;
      out.push_back(l);
    }
    clauses_.push_back(std::move(out));
  }
  void add_clause(std::initializer_list<Lit> c) { add_clause(std::vector<Lit>(c)); }
  void add_unit(Lit l) { add_clause({l}); }
  void add_equal(Lit a, Lit b) {
    if (a == b) return;
    add_clause({-a, b});
    add_clause({a, -b});
  }

  // ---- gate builder ------------------------------------------------------
  Lit and2(Lit a, Lit b) {
    if (a == kFalse || b == kFalse || a == -b) return kFalse;
    if (a == kTrue) return b;
    if (b == kTrue || a == b) return a;
    if (a > b) std::swap(a, b);
    auto key = pack(a, b);
    if (auto it = and_cache_.find(key); it != and_cache_.end()) return it->second;
    Lit o = new_var();
    add_clause({-o, a});
    add_clause({-o, b});
    add_clause({o, -a, -b});
    and_cache_.emplace(key, o);
    return o;
  }
  Lit or2(Lit a, Lit b) { return -and2(-a, -b); }
  Lit xor2(Lit a, Lit b) {
    if (a == kFalse) return b;
    if (b == kFalse) return a;
    if (a == kTrue) return -b;
    if (b == kTrue) return -a;
    if (a == b) return kFalse;
    if (a == -b) return kTrue;
    bool neg = false;
    if (a < 0) a = -a, neg = !neg;
    if (b < 0) b = -b, neg = !neg;
    if (a > b) std::swap(a, b);
    auto key = pack(a, b);
    Lit o;
    if (auto it = xor_cache_.find(key); it != xor_cache_.end()) {
      o = it->second;
    } else {
      o = new_var();
      add_clause({-o, a, b});
      add_clause({-o, -a, -b});
      add_clause({o, -a, b});
      add_clause({o, a, -b});
      xor_cache_.emplace(key, o);
    }
    return neg ? -o : o;
  }
  Lit mux(Lit s, Lit a, Lit b) {  // s ? b : a
    if (s == kTrue) return b;
    if (s == kFalse) return a;
    if (a == b) return a;
    return or2(and2(s, b), and2(-s, a));
  }
  Lit and_all(std::span<const Lit> xs) {
    std::vector<Lit> live;
    for (Lit x : xs) {
      if (x == kFalse) return kFalse;
      if (x != kTrue) live.push_back(x);
    }
    if (live.empty()) return kTrue;
    if (live.size() <= 2) return live.size() == 1 ? live[0] : and2(live[0], live[1]);
    Lit o = new_var();
    std::vector<Lit> big{o};
    for (Lit x : live) {
      add_clause({-o, x});
      big.push_back(-x);
    }
    add_clause(std::move(big));
    return o;
  }
  Lit or_all(std::span<const Lit> xs) {
    std::vector<Lit> neg;
    for (Lit x : xs) neg.push_back(-x);
    return -and_all(neg);
  }
  Lit xor_all(std::span<const Lit> xs) {
    Lit r = kFalse;
    for (Lit x : xs) r = xor2(r, x);
    return r;
  }
  Lit gate(CellKind k, std::span<const Lit> in) {
    switch (k) {
      case CellKind::And: return and_all(in);
      case CellKind::Nand: return -and_all(in);
      case CellKind::Or: return or_all(in);
      case CellKind::Nor: return -or_all(in);
      case CellKind::Xor: return xor_all(in);
      case CellKind::Xnor: return -xor_all(in);
      case CellKind::Not: return -in[0];
      case CellKind::Buf: return in[0];
      case CellKind::Mux: return mux(in[0], in[1], in[2]);
      case CellKind::Const0: return kFalse;
      case CellKind::Const1: return kTrue;
      default: throw std::logic_error("gate(): not a combinational kind");
    }
  }

  // ---- solving -----------------------------------------------------------
  sat::Result solve(std::span<const Lit> assumptions = {}, const sat::Budget& budget = {}) {
    flush();
    auto r = solver_.solve(assumptions, budget);
    if (r == sat::Result::Sat) self_check(assumptions);
    return r;
  }
  sat::Result solve(std::initializer_list<Lit> a, const sat::Budget& b = {}) {
    return solve(std::span<const Lit>(a.begin(), a.size()), b);
  }
  bool value(Lit l) const {
    if (l == kTrue) return true;
    if (l == kFalse) return false;
    return solver_.model_lit(l);
  }
  const sat::Stats& stats() const { return solver_.stats(); }

  std::string dimacs() const {
    std::ostringstream os;
    for (const auto& [name, v] : names_) os << "c " << name << " " << v << "\n";
    os << "p cnf " << num_vars_ << " " << clauses_.size() << "\n";
    for (const auto& c : clauses_) {
      for (Lit l : c) os << l << " ";
      os << "0\n";
    }
    return os.str();
  }

 private:
  static std::uint64_t pack(Lit a, Lit b) {
    return std::uint64_t(static_cast<std::uint32_t>(a)) << 32 | static_cast<std::uint32_t>(b);
  }
  void flush() {
    solver_.ensure_vars(num_vars_);
    for (; flushed_ < clauses_.size(); ++flushed_) {
      const auto& c = clauses_[flushed_];
      solver_.add_clause(std::span<const Lit>(c.data(), c.size()));
    }
  }
  void self_check(std::span<const Lit> assumptions) const {
    for (const auto& c : clauses_) {
      bool sat = false;
      for (Lit l : c)
        if (solver_.model_lit(l)) {
          sat = true;
          break;
        }
      if (!sat) throw std::logic_error("solver model violates a clause");
    }
    for (Lit a : assumptions)
      if (!solver_.model_lit(a)) throw std::logic_error("solver model violates an assumption");
  }

  int num_vars_ = 0;
  std::vector<std::vector<Lit>> clauses_;
  std::map<std::string, Lit> names_;
  std::unordered_map<std::uint64_t, Lit> and_cache_, xor_cache_;
  sat::Solver solver_;
  std::size_t flushed_ = 0;
};

}  // namespace latchlock
