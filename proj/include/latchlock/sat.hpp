#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace latchlock::sat {

/// DIMACS-style literal: +v / -v for variable v >= 1.
using Lit = int;

enum class Result { Sat, Unsat, Unknown };

struct Budget {
  std::int64_t conflicts = -1;  // < 0: unlimited
  std::optional<std::chrono::steady_clock::time_point> deadline;

  static Budget seconds(double s) {
    Budget b;
    b.deadline = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                        std::chrono::duration<double>(s));
    return b;
  }
};

struct Stats {
  std::uint64_t solves = 0, conflicts = 0, decisions = 0, propagations = 0, restarts = 0;
};

/// Conflict-driven clause-learning solver with an assumption interface.
/// Clauses can be added between solve() calls; learnt clauses are kept.
class Solver {
 public:
  int new_var() {
    int v = num_vars_++;
    assigns_.push_back(kUndef);
    level_.push_back(0);
    reason_.push_back(kNoReason);
    activity_.push_back(0.0);
    polarity_.push_back(1);
    seen_.push_back(0);
    heap_index_.push_back(-1);
    watches_.emplace_back();
    watches_.emplace_back();
    heap_insert(v);
    return v + 1;
  }
  void ensure_vars(int n) {
    while (num_vars_ < n) new_var();
  }
  int num_vars() const { return num_vars_; }
  const Stats& stats() const { return stats_; }
  bool okay() const { return ok_; }

  /// Adds a clause at the root level. Returns false once the formula is
  /// known unsatisfiable.
  bool add_clause(std::span<const Lit> dimacs) {
    if (!ok_) return false;
    cancel_until(0);
    std::vector<int> lits;
    lits.reserve(dimacs.size());
    for (Lit l : dimacs) {
      if (l == 0) throw std::invalid_argument("literal 0 in clause");
      ensure_vars(std::abs(l));
      lits.push_back(to_internal(l));
    }
    std::sort(lits.begin(), lits.end());
    std::vector<int> clean;
    int prev = -1;
    for (int l : lits) {
      if (l == prev) continue;
      if (prev >= 0 && l == (prev ^ 1)) return true;  // tautology
      if (value(l) == kTrue) return true;
      if (value(l) != kFalse) clean.push_back(l);
      prev = l;
    }
    if (clean.empty()) return ok_ = false;
    if (clean.size() == 1) {
      enqueue(clean[0], kNoReason);
      if (propagate() != kNoReason) ok_ = false;
      return ok_;
    }
    attach(alloc_clause(std::move(clean), false));
    return true;
  }
  bool add_clause(std::initializer_list<Lit> l) { return add_clause(std::span<const Lit>(l.begin(), l.size())); }

  Result solve(std::span<const Lit> assumptions = {}, const Budget& budget = {}) {
    ++stats_.solves;
    model_.clear();
    conflict_assumptions_.clear();
    if (!ok_) return Result::Unsat;
    assumptions_.clear();
    for (Lit a : assumptions) {
      ensure_vars(std::abs(a));
      assumptions_.push_back(to_internal(a));
    }
    std::int64_t conflicts_at_start = static_cast<std::int64_t>(stats_.conflicts);
    Result r = Result::Unknown;
    for (int restart = 0;; ++restart) {
      double rest = luby(2.0, restart) * 100.0;
      r = search(static_cast<std::int64_t>(rest), budget, conflicts_at_start);
      if (r != Result::Unknown) break;
      if (budget_exhausted(budget, conflicts_at_start)) break;
      ++stats_.restarts;
    }
    if (r == Result::Sat) {
      model_.assign(num_vars_, 0);
      for (int v = 0; v < num_vars_; ++v) model_[v] = assigns_[v] == kTrue;
    }
    cancel_until(0);
    return r;
  }
  Result solve(std::initializer_list<Lit> a, const Budget& b = {}) {
    return solve(std::span<const Lit>(a.begin(), a.size()), b);
  }

  /// Value of variable v (>= 1) in the last model.
  bool model_value(int v) const { return model_.at(v - 1) != 0; }
  bool model_lit(Lit l) const { return l > 0 ? model_value(l) : !model_value(-l); }
  const std::vector<std::uint8_t>& model() const { return model_; }
  /// Subset of assumptions responsible for the last Unsat answer.
  const std::vector<Lit>& conflict_assumptions() const { return conflict_assumptions_; }

 private:
  static constexpr std::int8_t kUndef = -1, kFalse = 0, kTrue = 1;
  static constexpr int kNoReason = -1;

  struct Clause {
    std::vector<int> lits;
    bool learnt = false;
    bool deleted = false;
    double activity = 0.0;
  };
  struct Watcher {
    int cref;
    int blocker;
  };

  static int to_internal(Lit l) { return 2 * (std::abs(l) - 1) + (l < 0 ? 1 : 0); }
  static Lit to_dimacs(int l) { return (l & 1) ? -((l >> 1) + 1) : ((l >> 1) + 1); }
  static int var(int l) { return l >> 1; }

  std::int8_t value(int l) const {
    std::int8_t a = assigns_[var(l)];
    if (a == kUndef) return kUndef;
    return (a == kTrue) != ((l & 1) != 0) ? kTrue : kFalse;
  }
  int decision_level() const { return static_cast<int>(trail_lim_.size()); }

  int alloc_clause(std::vector<int> lits, bool learnt) {
    int cref;
    if (!free_crefs_.empty()) {
      cref = free_crefs_.back();
      free_crefs_.pop_back();
      clauses_[cref] = Clause{std::move(lits), learnt, false, 0.0};
    } else {
      cref = static_cast<int>(clauses_.size());
      clauses_.push_back(Clause{std::move(lits), learnt, false, 0.0});
    }
    if (learnt) learnts_.push_back(cref);
    return cref;
  }
  void attach(int cref) {
    const auto& c = clauses_[cref].lits;
    watches_[c[0] ^ 1].push_back({cref, c[1]});
    watches_[c[1] ^ 1].push_back({cref, c[0]});
  }

  void enqueue(int l, int reason) {
    int v = var(l);
    assigns_[v] = (l & 1) ? kFalse : kTrue;
    level_[v] = decision_level();
    reason_[v] = reason;
    trail_.push_back(l);
  }

  int propagate() {
    int conflict = kNoReason;
    while (qhead_ < trail_.size()) {
      int p = trail_[qhead_++];
      ++stats_.propagations;
      auto& ws = watches_[p];
      std::size_t i = 0, j = 0;
      while (i < ws.size()) {
        Watcher w = ws[i];
        if (value(w.blocker) == kTrue) {
          ws[j++] = ws[i++];
          continue;
        }
        Clause& c = clauses_[w.cref];
        if (c.deleted) {
          ++i;
          continue;
        }
        auto& lits = c.lits;
        int false_lit = p ^ 1;
        if (lits[0] == false_lit) std::swap(lits[0], lits[1]);
        ++i;
        int first = lits[0];
        if (first != w.blocker && value(first) == kTrue) {
          ws[j++] = {w.cref, first};
          continue;
        }
        bool found = false;
        for (std::size_t k = 2; k < lits.size(); ++k) {
          if (value(lits[k]) != kFalse) {
            std::swap(lits[1], lits[k]);
            watches_[lits[1] ^ 1].push_back({w.cref, first});
            found = true;
            break;
          }
        }
        if (found) continue;
        ws[j++] = {w.cref, first};
        if (value(first) == kFalse) {
          conflict = w.cref;
          qhead_ = trail_.size();
          while (i < ws.size()) ws[j++] = ws[i++];
        } else {
          enqueue(first, w.cref);
        }
      }
      ws.resize(j);
      if (conflict != kNoReason) break;
    }
    return conflict;
  }

  void cancel_until(int lvl) {
    if (decision_level() <= lvl) return;
    for (std::size_t c = trail_.size(); c-- > static_cast<std::size_t>(trail_lim_[lvl]);) {
      int v = var(trail_[c]);
      assigns_[v] = kUndef;
      reason_[v] = kNoReason;
      polarity_[v] = (trail_[c] & 1) ? 0 : 1;
      if (heap_index_[v] < 0) heap_insert(v);
    }
    trail_.resize(trail_lim_[lvl]);
    qhead_ = trail_.size();
    trail_lim_.resize(lvl);
  }

  void bump_var(int v) {
    if ((activity_[v] += var_inc_) > 1e100) {
      for (auto& a : activity_) a *= 1e-100;
      var_inc_ *= 1e-100;
    }
    if (heap_index_[v] >= 0) heap_up(heap_index_[v]);
  }
  void bump_clause(Clause& c) {
    if ((c.activity += cla_inc_) > 1e20) {
      for (int cr : learnts_) clauses_[cr].activity *= 1e-20;
      cla_inc_ *= 1e-20;
    }
  }

  void analyze(int confl, std::vector<int>& out, int& bt_level) {
    out.clear();
    out.push_back(-1);
    int path = 0;
    int p = -1;
    std::size_t index = trail_.size();
    do {
      Clause& c = clauses_[confl];
      if (c.learnt) bump_clause(c);
      for (std::size_t k = (p == -1 ? 0 : 1); k < c.lits.size(); ++k) {
        int q = c.lits[k];
        int v = var(q);
        if (!seen_[v] && level_[v] > 0) {
          bump_var(v);
          seen_[v] = 1;
          if (level_[v] >= decision_level())
            ++path;
          else
            out.push_back(q);
        }
      }
      while (!seen_[var(trail_[--index])]) {
      }
      p = trail_[index];
      confl = reason_[var(p)];
      seen_[var(p)] = 0;
      --path;
      if (path > 0 && confl != kNoReason) {
        // keep the reason's asserted literal first
        auto& rl = clauses_[confl].lits;
        if (rl[0] != p) {
          for (std::size_t k = 1; k < rl.size(); ++k)
            if (rl[k] == p) {
              std::swap(rl[0], rl[k]);
              break;
            }
        }
      }
    } while (path > 0);
    out[0] = p ^ 1;

    // Local minimisation: drop literals implied by others in the clause.
    std::vector<int> marked(out.begin() + 1, out.end());
    std::size_t keep = 1;
    for (std::size_t k = 1; k < out.size(); ++k) {
      int v = var(out[k]);
      int r = reason_[v];
      bool redundant = r != kNoReason;
      if (redundant) {
        for (int q : clauses_[r].lits) {
          if (var(q) == v) continue;
          if (!seen_[var(q)] && level_[var(q)] > 0) {
            redundant = false;
            break;
          }
        }
      }
      if (!redundant) out[keep++] = out[k];
    }
    for (int q : marked) seen_[var(q)] = 0;
    out.resize(keep);

    if (out.size() == 1) {
      bt_level = 0;
    } else {
      std::size_t maxi = 1;
      for (std::size_t k = 2; k < out.size(); ++k)
        if (level_[var(out[k])] > level_[var(out[maxi])]) maxi = k;
      std::swap(out[1], out[maxi]);
      bt_level = level_[var(out[1])];
    }
  }

  // Collects the assumptions that imply the negation of `p`.
  void analyze_final(int p) {
    conflict_assumptions_.clear();
    conflict_assumptions_.push_back(to_dimacs(p));
    if (decision_level() == 0) return;
    seen_[var(p)] = 1;
    for (std::size_t i = trail_.size(); i-- > static_cast<std::size_t>(trail_lim_[0]);) {
      int v = var(trail_[i]);
      if (!seen_[v]) continue;
      if (reason_[v] == kNoReason) {
        conflict_assumptions_.push_back(to_dimacs(trail_[i] ^ 1));
      } else {
        for (int q : clauses_[reason_[v]].lits)
          if (level_[var(q)] > 0) seen_[var(q)] = 1;
      }
      seen_[v] = 0;
    }
    seen_[var(p)] = 0;
  }

  void reduce_db() {
    std::vector<int> cand;
    for (int cr : learnts_) {
      Clause& c = clauses_[cr];
      if (c.deleted) continue;
      cand.push_back(cr);
    }
    std::sort(cand.begin(), cand.end(),
              [&](int a, int b) { return clauses_[a].activity < clauses_[b].activity; });
    std::vector<bool> locked(clauses_.size(), false);
    for (int l : trail_) {
      int r = reason_[var(l)];
      if (r != kNoReason) locked[r] = true;
    }
    std::size_t removed = 0, target = cand.size() / 2;
    for (int cr : cand) {
      if (removed >= target) break;
      Clause& c = clauses_[cr];
      if (locked[cr] || c.lits.size() <= 2) continue;
      c.deleted = true;
      ++removed;
    }
    for (auto& ws : watches_)
      ws.erase(std::remove_if(ws.begin(), ws.end(), [&](const Watcher& w) { return clauses_[w.cref].deleted; }),
               ws.end());
    std::vector<int> kept;
    for (int cr : learnts_) {
      if (clauses_[cr].deleted) {
        clauses_[cr].lits.clear();
        clauses_[cr].lits.shrink_to_fit();
        free_crefs_.push_back(cr);
      } else {
        kept.push_back(cr);
      }
    }
    learnts_ = std::move(kept);
  }

  bool budget_exhausted(const Budget& b, std::int64_t start) const {
    if (b.conflicts >= 0 && static_cast<std::int64_t>(stats_.conflicts) - start >= b.conflicts) return true;
    if (b.deadline && std::chrono::steady_clock::now() >= *b.deadline) return true;
    return false;
  }

  Result search(std::int64_t nof_conflicts, const Budget& budget, std::int64_t start) {
    std::int64_t conflicts = 0;
    std::vector<int> learnt;
    for (;;) {
      int confl = propagate();
      if (confl != kNoReason) {
        ++stats_.conflicts;
        ++conflicts;
        if (decision_level() == 0) {
          ok_ = false;
          return Result::Unsat;
        }
        int bt;
        analyze(confl, learnt, bt);
        cancel_until(bt);
        if (learnt.size() == 1) {
          enqueue(learnt[0], kNoReason);
        } else {
          int cr = alloc_clause(learnt, true);
          attach(cr);
          bump_clause(clauses_[cr]);
          enqueue(learnt[0], cr);
        }
        var_inc_ /= 0.95;
        cla_inc_ /= 0.999;
        if ((stats_.conflicts & 255) == 0 && budget_exhausted(budget, start)) {
          cancel_until(0);
          return Result::Unknown;
        }
        continue;
      }
      if (conflicts >= nof_conflicts || budget_exhausted(budget, start)) {
        cancel_until(0);
        return Result::Unknown;
      }
      if (static_cast<double>(learnts_.size()) - static_cast<double>(trail_.size()) >= max_learnts_) {
        reduce_db();
        max_learnts_ *= 1.1;
      }
      int next = -1;
      while (decision_level() < static_cast<int>(assumptions_.size())) {
        int a = assumptions_[decision_level()];
        if (value(a) == kTrue) {
          trail_lim_.push_back(static_cast<int>(trail_.size()));
        } else if (value(a) == kFalse) {
          analyze_final(a ^ 1);
          for (auto& l : conflict_assumptions_) l = -l;
          cancel_until(0);
          return Result::Unsat;
        } else {
          next = a;
          break;
        }
      }
      if (next == -1) {
        ++stats_.decisions;
        int v = pick_branch_var();
        if (v < 0) return Result::Sat;
        next = 2 * v + (polarity_[v] ? 0 : 1);
      }
      trail_lim_.push_back(static_cast<int>(trail_.size()));
      enqueue(next, kNoReason);
    }
  }

  int pick_branch_var() {
    while (!heap_.empty()) {
      int v = heap_pop();
      if (assigns_[v] == kUndef) return v;
    }
    return -1;
  }

  static double luby(double y, int x) {
    int size = 1, seq = 0;
    while (size < x + 1) {
      ++seq;
      size = 2 * size + 1;
    }
    while (size - 1 != x) {
      size = (size - 1) >> 1;
      --seq;
      x = x % size;
    }
    return std::pow(y, seq);
  }

  // Binary max-heap on activity.
  void heap_insert(int v) {
    heap_index_[v] = static_cast<int>(heap_.size());
    heap_.push_back(v);
    heap_up(heap_index_[v]);
  }
  void heap_up(int i) {
    int v = heap_[i];
    while (i > 0) {
      int parent = (i - 1) / 2;
      if (activity_[heap_[parent]] >= activity_[v]) break;
      heap_[i] = heap_[parent];
      heap_index_[heap_[i]] = i;
      i = parent;
    }
    heap_[i] = v;
    heap_index_[v] = i;
  }
  void heap_down(int i) {
    int v = heap_[i];
    int n = static_cast<int>(heap_.size());
    for (;;) {
      int child = 2 * i + 1;
      if (child >= n) break;
      if (child + 1 < n && activity_[heap_[child + 1]] > activity_[heap_[child]]) ++child;
      if (activity_[heap_[child]] <= activity_[v]) break;
      heap_[i] = heap_[child];
      heap_index_[heap_[i]] = i;
      i = child;
    }
    heap_[i] = v;
    heap_index_[v] = i;
  }
  int heap_pop() {
    int top = heap_[0];
    heap_index_[top] = -1;
    int last = heap_.back();
    heap_.pop_back();
    if (!heap_.empty()) {
      heap_[0] = last;
      heap_index_[last] = 0;
      heap_down(0);
    }
    return top;
  }

  int num_vars_ = 0;
  bool ok_ = true;
  std::vector<std::int8_t> assigns_;
  std::vector<int> level_, reason_;
  std::vector<double> activity_;
  std::vector<std::uint8_t> polarity_, seen_;
  std::vector<int> heap_, heap_index_;
  std::vector<std::vector<Watcher>> watches_;
  std::vector<Clause> clauses_;
  std::vector<int> learnts_, free_crefs_;
  std::vector<int> trail_, trail_lim_;
  std::size_t qhead_ = 0;
  std::vector<int> assumptions_;
  std::vector<std::uint8_t> model_;
  std::vector<Lit> conflict_assumptions_;
  double var_inc_ = 1.0, cla_inc_ = 1.0;
  double max_learnts_ = 2000.0;
  Stats stats_;
};

}  // namespace latchlock::sat
