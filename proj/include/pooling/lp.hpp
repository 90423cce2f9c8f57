#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pooling/core.hpp"

// Self-contained dense LP solver: bounded-variable revised simplex with one
// logical column per row (slack for inequalities, fixed-at-zero for
// equalities), so any column set extends to a basis and a solve can warm
// start from a previous vertex. Phase 1 minimizes the total bound violation
// of the basic variables directly instead of seating artificials, which
// makes a start from a nearly feasible basis cost only a handful of pivots.
// The explicit basis inverse is kept up to date by product-form pivots and
// rebuilt from an LU factorization every refactor_every pivots. Pricing is
// most-violated reduced cost with a tolerant smallest-index tie break (so
// bitwise-close inputs take the same pivot path), falling back to Bland's
// rule after a run of degenerate pivots or a stalled stretch. Every solution
// is audited against the row and bound tolerances before it is returned. No
// external solver involved; every subproblem in this project goes through
// here.

namespace pooling::lp {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { LessEq, Equal, GreaterEq };
enum class Status { Optimal, Infeasible, Unbounded };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
  }
  return "?";
}

struct Row {
  std::vector<std::pair<int, double>> coeffs;  // (column, value)
  Relation rel = Relation::LessEq;
  double rhs = 0.0;
};

// Maximization problem. Bounds are optional per side; absent means
// unbounded in that direction.
struct Problem {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<Bound> lower;
  std::vector<Bound> upper;
  std::vector<Row> rows;

  int add_var(double obj, Bound lb, Bound ub) {
    objective.push_back(obj);
    lower.push_back(lb);
    upper.push_back(ub);
    return num_vars++;
  }

  void add_row(Relation rel, double rhs, std::vector<std::pair<int, double>> coeffs) {
    rows.push_back({std::move(coeffs), rel, rhs});
  }
};

struct Options {
  double feas_tol = 1e-8;
  double opt_tol = 1e-9;
  double pivot_floor = 1e-10;    // smaller pivot candidates are rejected
  int refactor_every = 64;       // basis changes between LU refactorizations
  int bland_after = 1000;        // consecutive degenerate pivots before Bland
  bool bland_only = false;       // engage Bland's rule from the first pivot
  long pivot_limit = 0;          // 0 = automatic
};

// A vertex, portable across problems that share a column/row prefix. Column
// ids below num_vars are structural; id num_vars + r means the logical of
// row r. A consumer problem of a different shape simply drops the ids it
// cannot map and completes the basis with its own logicals.
struct BasisSnapshot {
  int num_vars = 0;
  std::vector<int> basic;
  std::vector<uint8_t> states;  // per structural column: 0 lower, 1 upper, 2 free at zero

  bool empty() const { return basic.empty(); }
};

struct Solution {
  Status status = Status::Optimal;
  std::vector<double> x;      // structural variables only
  double objective = 0.0;
  std::vector<double> duals;  // per input row; <= rows >= 0, >= rows <= 0
  long pivots = 0;
  int degenerate_pivots = 0;
  double phase1_infeasibility = 0.0;  // positive iff status == Infeasible
  BasisSnapshot basis;                // reusable as a warm start
};

struct NumericalBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double bound_or(const Bound& b, double fallback) { return b ? *b : fallback; }

class Simplex {
 public:
  Simplex(const Problem& p, const Options& opt) : opt_(opt) {
    m_ = static_cast<int>(p.rows.size());
    nstruct_ = p.num_vars;
    ntotal_ = nstruct_ + m_;
    build_columns(p);
  }

  Solution run(const BasisSnapshot* warm) {
    Solution sol;
    bland_mode_ = opt_.bland_only;
    load_start(warm);
    // Alternate the healing and the optimizing phase. Phase 2 checks its
    // feasibility at every refactor; when a numerical event has pushed a
    // basic through its bounds, it hands back to phase 1 rather than
    // optimize over a fictitious point. A cap on the round trips keeps a
    // genuinely sick problem from bouncing forever.
    bool proven_feasible = false;
    for (int round = 0;; ++round) {
      if (round >= 30) throw NumericalBreakdown("simplex: feasibility keeps slipping away");
      if (max_violation() > feas_threshold()) {
        PhaseEnd end = iterate(/*phase1=*/true);
        if (end == PhaseEnd::PivotLimit)
          throw NumericalBreakdown("simplex: pivot limit exceeded in phase 1");
        double infeas = max_violation();
        if (infeas > feas_threshold()) {
          // Once a feasible point existed, failing to get back to one is a
          // numerical collapse, not a certificate of infeasibility.
          if (proven_feasible)
            throw NumericalBreakdown("simplex: could not recover feasibility");
          sol.status = Status::Infeasible;
          sol.phase1_infeasibility = infeas;
          extract(sol);
          return sol;
        }
      }
      proven_feasible = true;
      compute_duals();
      PhaseEnd end = iterate(/*phase1=*/false);
      if (end == PhaseEnd::PivotLimit)
        throw NumericalBreakdown("simplex: pivot limit exceeded in phase 2");
      if (end == PhaseEnd::LostFeasibility) continue;
      // the claim only stands if the point it was made at checks out
      refactor();
      if (max_violation() > feas_threshold()) continue;
      sol.status = end == PhaseEnd::UnboundedRay ? Status::Unbounded : Status::Optimal;
      break;
    }
    extract(sol);
    if (sol.status == Status::Optimal) audit_point(sol);
    return sol;
  }

 private:
  enum class NState : uint8_t { AtLower, AtUpper, FreeZero, Basic };
  enum class PhaseEnd { Converged, UnboundedRay, PivotLimit, LostFeasibility };

  // Direction components at or below this are treated as exact zeros; it
  // separates noise from honest but unfortunately small coefficients, which
  // stay visible to the ratio test no matter what the pivot floor says.
  static constexpr double kDirTol = 1e-11;

  const Options& opt_;
  int m_ = 0;            // rows
  int nstruct_ = 0;      // structural columns
  int ntotal_ = 0;       // structurals plus one logical per row, fixed for good
  double bscale_ = 0.0;  // |b| scale for feasibility thresholds

  std::vector<std::vector<std::pair<int, double>>> cols_;  // structurals, sparse
  std::vector<double> lb_, ub_;                            // +-inf when absent
  std::vector<double> real_cost_;                          // structurals only
  std::vector<double> b_;

  std::vector<int> basis_;        // row position -> column
  std::vector<int> basis_pos_;    // column -> row position or -1
  std::vector<NState> state_;
  std::vector<double> xb_;        // basic values by row position
  std::vector<int8_t> cls_;       // per row position: -1 below lb, +1 above ub
  std::vector<double> binv_;      // m x m row-major
  std::vector<double> y_;         // duals for the active phase
  std::vector<double> work_col_;  // dense scratch, size m
  std::vector<double> dir_;       // B^-1 a_q

  long pivots_ = 0;
  int pivots_since_refactor_ = 0;
  int consecutive_degenerate_ = 0;
  int degenerate_total_ = 0;
  bool bland_mode_ = false;
  bool bland_locked_ = false;  // stalled once: stay on Bland until the phase ends
  bool phase1_ = false;
  long pivot_limit_ = 0;

  double feas_threshold() const { return opt_.feas_tol * (1.0 + bscale_); }

  // Logical of row i lives at column nstruct_ + i with coefficient +1.
  bool is_logical(int j) const { return j >= nstruct_; }

  template <typename F>
  void for_col(int j, F&& f) const {
    if (is_logical(j)) {
      f(j - nstruct_, 1.0);
      return;
    }
    for (auto [i, a] : cols_[j]) f(i, a);
  }

  void build_columns(const Problem& p) {
    cols_.assign(nstruct_, {});
    lb_.resize(ntotal_);
    ub_.resize(ntotal_);
    real_cost_ = p.objective;
    for (int j = 0; j < nstruct_; ++j) {
      lb_[j] = bound_or(p.lower[j], -kInf);
      ub_[j] = bound_or(p.upper[j], kInf);
      if (lb_[j] > ub_[j]) throw std::invalid_argument("lp: lower bound above upper bound");
    }
    b_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      b_[i] = p.rows[i].rhs;
      bscale_ = std::max(bscale_, std::fabs(b_[i]));
      for (auto [j, v] : p.rows[i].coeffs) {
        if (j < 0 || j >= nstruct_) throw std::invalid_argument("lp: row references bad column");
        cols_[j].push_back({i, v});
      }
      // logical bounds encode the relation: row value + logical = rhs
      int s = nstruct_ + i;
      switch (p.rows[i].rel) {
        case Relation::LessEq: lb_[s] = 0.0, ub_[s] = kInf; break;
        case Relation::GreaterEq: lb_[s] = -kInf, ub_[s] = 0.0; break;
        case Relation::Equal: lb_[s] = 0.0, ub_[s] = 0.0; break;
      }
    }
    pivot_limit_ = opt_.pivot_limit > 0
                       ? opt_.pivot_limit
                       : 20000 + 200L * (static_cast<long>(ntotal_) + m_);
  }

  NState natural_state(int j) const {
    if (std::isfinite(lb_[j])) return NState::AtLower;
    if (std::isfinite(ub_[j])) return NState::AtUpper;
    return NState::FreeZero;
  }

  double nonbasic_value(int j) const {
    switch (state_[j]) {
      case NState::AtLower: return lb_[j];
      case NState::AtUpper: return ub_[j];
      default: return 0.0;
    }
  }

  // Seat a starting basis. Without a snapshot every logical is basic (the
  // basis matrix is the identity); with one, the snapshot's columns are
  // taken as far as they map onto this problem and logicals fill the gaps.
  // Either way the composite phase 1 absorbs whatever infeasibility the
  // seated point carries.
  void load_start(const BasisSnapshot* warm) {
    state_.assign(ntotal_, NState::AtLower);
    for (int j = 0; j < ntotal_; ++j) state_[j] = natural_state(j);

    std::vector<char> in_basis(ntotal_, 0);
    std::vector<int> chosen;
    chosen.reserve(m_);
    if (warm && !warm->empty()) {
      for (int j = 0; j < nstruct_ && j < static_cast<int>(warm->states.size()); ++j) {
        if (j >= warm->num_vars) break;
        switch (warm->states[j]) {
          case 0: state_[j] = std::isfinite(lb_[j]) ? NState::AtLower : natural_state(j); break;
          case 1: state_[j] = std::isfinite(ub_[j]) ? NState::AtUpper : natural_state(j); break;
          default: state_[j] = NState::FreeZero; break;
        }
      }
      for (int id : warm->basic) {
        int j;
        if (id < 0) continue;
        if (id < warm->num_vars)
          j = id;  // structural, shared prefix
        else
          j = nstruct_ + (id - warm->num_vars);  // logical of the same row
        if (id >= warm->num_vars && id - warm->num_vars >= m_) continue;
        if (id < warm->num_vars && id >= nstruct_) continue;
        if (in_basis[j]) continue;
        if (static_cast<int>(chosen.size()) == m_) break;
        in_basis[j] = 1;
        chosen.push_back(j);
      }
    }
    for (int i = 0; i < m_ && static_cast<int>(chosen.size()) < m_; ++i) {
      int s = nstruct_ + i;
      if (in_basis[s]) continue;
      in_basis[s] = 1;
      chosen.push_back(s);
    }

    basis_.assign(m_, -1);
    basis_pos_.assign(ntotal_, -1);
    // seat logicals on their own rows first so the factorization starts as
    // close to triangular as the snapshot allows
    std::vector<char> row_taken(m_, 0);
    std::vector<int> rest;
    for (int j : chosen) {
      if (is_logical(j) && !row_taken[j - nstruct_]) {
        int r = j - nstruct_;
        basis_[r] = j;
        basis_pos_[j] = r;
        row_taken[r] = 1;
      } else {
        rest.push_back(j);
      }
    }
    size_t next = 0;
    for (int i = 0; i < m_; ++i) {
      if (row_taken[i]) continue;
      int j = rest[next++];
      basis_[i] = j;
      basis_pos_[j] = i;
    }
    for (int j : chosen) state_[j] = NState::Basic;

    xb_.assign(m_, 0.0);
    cls_.assign(m_, 0);
    refactor();
  }

  // Worst bound violation among the basics. Nonbasics sit exactly on a
  // bound by construction, so this is the feasibility error of the whole
  // point. The max rather than the sum keeps the measure comparable to the
  // per-row tolerance regardless of problem size.
  double max_violation() const {
    double w = 0.0;
    for (int i = 0; i < m_; ++i) {
      int col = basis_[i];
      w = std::max(w, lb_[col] - xb_[i]);
      w = std::max(w, xb_[i] - ub_[col]);
    }
    return w;
  }

  // Classify the basic values against their bounds; phase 1's objective is
  // minus the total violation, so the classification doubles as the basic
  // cost vector. A small dead band keeps values already at a bound from
  // flapping between sides.
  void classify() {
    double band = 0.1 * feas_threshold();
    for (int i = 0; i < m_; ++i) {
      int col = basis_[i];
      if (xb_[i] < lb_[col] - band)
        cls_[i] = -1;
      else if (xb_[i] > ub_[col] + band)
        cls_[i] = 1;
      else
        cls_[i] = 0;
    }
  }

  // Duals for the active phase. Phase 2 prices the real costs; phase 1
  // prices the violation gradient, which changes with the classification,
  // so its duals are rebuilt every pivot rather than updated.
  void compute_duals() {
    y_.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double cb;
      if (phase1_)
        cb = cls_[i] == 0 ? 0.0 : (cls_[i] < 0 ? 1.0 : -1.0);
      else
        cb = is_logical(basis_[i]) ? 0.0 : real_cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &binv_[static_cast<size_t>(i) * m_];
      for (int k = 0; k < m_; ++k) y_[k] += cb * row[k];
    }
  }

  double phase_cost(int j) const {
    if (phase1_ || is_logical(j)) return 0.0;
    return real_cost_[j];
  }

  double reduced_cost(int j) const {
    double r = phase_cost(j);
    for_col(j, [&](int i, double a) { r -= y_[i] * a; });
    return r;
  }

  // Entering column choice. Returns -1 when price-optimal.
  int price(int* direction) const {
    double best = 0.0;
    int best_j = -1;
    int best_dir = 0;
    for (int j = 0; j < ntotal_; ++j) {
      NState st = state_[j];
      if (st == NState::Basic) continue;
      if (lb_[j] == ub_[j]) continue;  // fixed, nothing to gain
      double r = reduced_cost(j);
      double viol = 0.0;
      int dir = 0;
      if ((st == NState::AtLower || st == NState::FreeZero) && r > opt_.opt_tol) {
        viol = r;
        dir = +1;
      } else if ((st == NState::AtUpper || st == NState::FreeZero) && r < -opt_.opt_tol) {
        viol = -r;
        dir = -1;
      }
      if (dir == 0) continue;
      if (bland_mode_) {
        *direction = dir;
        return j;  // Bland: first improving index
      }
      // Dantzig with a tolerant tie break: keep the earliest index among
      // near-equal scores so the pivot path is stable under last-bit noise.
      if (viol > best + 1e-9 * (1.0 + best)) {
        best = viol;
        best_j = j;
        best_dir = dir;
      }
    }
    *direction = best_dir;
    return best_j;
  }

  void compute_direction(int q) {
    std::fill(work_col_.begin(), work_col_.end(), 0.0);
    for_col(q, [&](int i, double a) { work_col_[i] += a; });
    dir_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      const double* row = &binv_[static_cast<size_t>(i) * m_];
      double s = 0.0;
      for (int k = 0; k < m_; ++k) s += row[k] * work_col_[k];
      dir_[i] = s;
    }
  }

  PhaseEnd iterate(bool phase1) {
    phase1_ = phase1;
    bland_locked_ = opt_.bland_only;
    if (!phase1) cls_.assign(m_, 0);  // phase 2 treats every basic as standard
    work_col_.assign(m_, 0.0);
    double stall_ref = kInf;
    long stall_mark = pivots_;
    while (true) {
      if (phase1) {
        classify();
        double infeas = max_violation();
        if (infeas <= 0.5 * feas_threshold()) {
          phase1_ = false;
          return PhaseEnd::Converged;
        }
        // Degenerate creep can masquerade as progress: Harris-sized steps
        // shrink the infeasibility by amounts that round to nothing while
        // resetting the degeneracy counter. A whole window of pivots moving
        // the violation by less than noise locks in Bland's rule.
        if (pivots_ - stall_mark >= opt_.bland_after) {
          if (infeas > stall_ref - 1e-10 * (1.0 + bscale_)) {
            bland_mode_ = true;
            bland_locked_ = true;
          }
          stall_ref = infeas;
          stall_mark = pivots_;
        }
        compute_duals();
      }
      if (pivots_ >= pivot_limit_) {
        phase1_ = false;
        return PhaseEnd::PivotLimit;
      }
#ifdef POOLING_LP_TRACE
      if (pivots_ % 2000 == 0)
        std::fprintf(stderr, "[lp] phase%d pivots=%ld degen=%d bland=%d infeas=%.3e m=%d n=%d\n",
                     phase1 ? 1 : 2, pivots_, degenerate_total_, (int)bland_mode_,
                     max_violation(), m_, ntotal_);
#endif
      int dir_sign = 0;
      int q = price(&dir_sign);
      if (q < 0) {
        phase1_ = false;
        return PhaseEnd::Converged;
      }
      double rq = reduced_cost(q);
      compute_direction(q);

      // Ratio test, two passes in the Harris fashion. Pass one finds the cap
      // each basic bound permits once relaxed by a hair; pass two takes the
      // strongest pivot among rows whose strict limit fits under that cap.
      // A noise-sized pivot on the nominally binding row loses to a real
      // pivot nearby instead of wrecking the basis, and any row stepped past
      // this way overshoots its bound by at most the relaxation.
      //
      // In Bland mode the relaxation is dropped: the anti-cycling argument
      // needs the exact minimum ratio, and the slop otherwise lets highly
      // degenerate bases churn forever a hair outside their bounds.
      //
      // Basics flagged infeasible by the classification limit the step at
      // the bound they are healing towards (which they reach from outside,
      // so the distance counts from the violated side); moving further away
      // never limits them, the falling total violation does.
      //
      // Both passes consider every row with a genuine direction component;
      // the pivot floor only steers which of them leaves. Filtering rows out
      // of the cap itself would let the cap go infinite while real
      // breakpoints exist, which reads as an unbounded ray that is not one.
      double own_range = ub_[q] - lb_[q];  // inf when either side open
      double relax = bland_mode_ ? 0.0 : 0.1 * feas_threshold();
      double theta_max = std::isfinite(own_range) ? own_range : kInf;
      for (int i = 0; i < m_; ++i) {
        double d = dir_[i];
        if (std::fabs(d) <= kDirTol) continue;
        double rate = -dir_sign * d;  // d(x_Bi)/d(theta)
        int col = basis_[i];
        double slack;
        if (cls_[i] < 0)
          slack = rate > 0.0 ? lb_[col] - xb_[i] : kInf;
        else if (cls_[i] > 0)
          slack = rate < 0.0 ? xb_[i] - ub_[col] : kInf;
        else
          slack = rate < 0.0 ? xb_[i] - lb_[col] : ub_[col] - xb_[i];
        if (!std::isfinite(slack)) continue;
        double capped = (std::max(slack, 0.0) + relax) / std::fabs(rate);
        if (capped < theta_max) theta_max = capped;
      }

      if (theta_max == kInf) {
        phase1_ = false;
        if (phase1)
          throw NumericalBreakdown("simplex: lost the bound on a healing direction");
        return PhaseEnd::UnboundedRay;
      }

      double theta = std::isfinite(own_range) ? own_range : kInf;
      int leave_pos = -1;    // -1 = limited by its own opposite bound
      int leave_to_upper = 0;
      double best_pivot = 0.0;
      bool best_above_floor = false;
      for (int i = 0; i < m_; ++i) {
        double d = dir_[i];
        if (std::fabs(d) <= kDirTol) continue;
        double rate = -dir_sign * d;
        int col = basis_[i];
        double slack;
        int bound_hit;
        if (cls_[i] < 0) {
          // below its lower bound: the crossing happens at that bound
          if (rate <= 0.0 || !std::isfinite(lb_[col])) continue;
          slack = lb_[col] - xb_[i];
          bound_hit = 0;
        } else if (cls_[i] > 0) {
          if (rate >= 0.0 || !std::isfinite(ub_[col])) continue;
          slack = xb_[i] - ub_[col];
          bound_hit = 1;
        } else if (rate < 0.0) {
          if (!std::isfinite(lb_[col])) continue;
          slack = xb_[i] - lb_[col];
          bound_hit = 0;
        } else {
          if (!std::isfinite(ub_[col])) continue;
          slack = ub_[col] - xb_[i];
          bound_hit = 1;
        }
        double limit = std::max(slack, 0.0) / std::fabs(rate);
        if (limit > theta_max) continue;
        bool above_floor = std::fabs(d) > opt_.pivot_floor;
        bool take;
        if (leave_pos < 0)
          take = true;
        else if (bland_mode_)
          // Bland anti-cycling: strictly smaller limit, or lowest basic
          // index among equal ones
          take = limit < theta || (limit == theta && basis_[i] < basis_[leave_pos]);
        else if (above_floor != best_above_floor)
          // a solid pivot beats any floor-sized one regardless of size
          take = above_floor;
        else
          take = std::fabs(d) > best_pivot * (1.0 + 1e-9) ||
                 (std::fabs(d) > best_pivot * (1.0 - 1e-9) && basis_[i] < basis_[leave_pos]);
        if (take) {
          theta = limit;
          leave_pos = i;
          leave_to_upper = bound_hit;
          best_pivot = std::fabs(d);
          best_above_floor = above_floor;
        }
      }
      // No qualifying row means the cap came from the entering bound itself.
      if (leave_pos < 0) theta = own_range;

      // Steps no larger than the ratio-test relaxation are bookkeeping, not
      // progress; counting them as real would let creep outrun the Bland
      // trigger one noise-sized step at a time.
      if (theta <= std::max(1e-11, 2.0 * relax)) {
        ++degenerate_total_;
        if (++consecutive_degenerate_ >= opt_.bland_after) bland_mode_ = true;
      } else {
        consecutive_degenerate_ = 0;
        if (!bland_locked_) bland_mode_ = false;
      }

      if (leave_pos < 0) {
        // bound flip: x_q runs to its opposite bound, basis unchanged
        for (int i = 0; i < m_; ++i) xb_[i] -= dir_sign * theta * dir_[i];
        state_[q] = dir_sign > 0 ? NState::AtUpper : NState::AtLower;
        ++pivots_;
        continue;
      }

      int leaving = basis_[leave_pos];
      double enter_value = nonbasic_value(q) + dir_sign * theta;
      for (int i = 0; i < m_; ++i) xb_[i] -= dir_sign * theta * dir_[i];
      xb_[leave_pos] = enter_value;
      state_[leaving] = leave_to_upper ? NState::AtUpper : NState::AtLower;
      if (!std::isfinite(leave_to_upper ? ub_[leaving] : lb_[leaving]))
        throw NumericalBreakdown("simplex: leaving variable has no bound to rest on");
      state_[q] = NState::Basic;
      basis_[leave_pos] = q;
      basis_pos_[leaving] = -1;
      basis_pos_[q] = leave_pos;

      update_inverse(leave_pos);
      if (!phase1 && rq != 0.0) {
        // duals move by the entering reduced cost along the new inverse row
        const double* row = &binv_[static_cast<size_t>(leave_pos) * m_];
        for (int k = 0; k < m_; ++k) y_[k] += rq * row[k];
      }

      ++pivots_;
      ++pivots_since_refactor_;
      // a pivot under the floor was forced; rebuild the inverse right away
      // before its amplification spreads
      if (!best_above_floor) pivots_since_refactor_ = opt_.refactor_every;
      if (pivots_since_refactor_ >= opt_.refactor_every) {
        refactor();
        if (!phase1) {
          if (max_violation() > feas_threshold()) return PhaseEnd::LostFeasibility;
          compute_duals();
        }
      }
    }
  }

  // Product-form update: fold the pivot column into the explicit inverse.
  void update_inverse(int r) {
    double piv = dir_[r];
    if (std::fabs(piv) <= kDirTol)
      throw NumericalBreakdown("simplex: pivot below floor");
    double* prow = &binv_[static_cast<size_t>(r) * m_];
    double inv_piv = 1.0 / piv;
    for (int k = 0; k < m_; ++k) prow[k] *= inv_piv;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      double f = dir_[i];
      if (f == 0.0) continue;
      double* row = &binv_[static_cast<size_t>(i) * m_];
      for (int k = 0; k < m_; ++k) row[k] -= f * prow[k];
    }
  }

  // Basis repair: the elimination got stuck at position pos, so the column
  // seated there depends numerically on the others. Park it at a bound and
  // seat the logical of a still-unpivoted row instead.
  void replace_dependent_column(int pos, const int* perm, int from) {
#ifdef POOLING_LP_TRACE
    std::fprintf(stderr, "[lp] repair pos=%d pivots=%ld\n", pos, pivots_);
#endif
    int fresh = -1;
    for (int i = from; i < m_; ++i) {
      int cand = nstruct_ + perm[i];
      if (basis_pos_[cand] < 0) {
        fresh = cand;
        break;
      }
    }
    if (fresh < 0) throw NumericalBreakdown("simplex: no logical available for repair");
    int old = basis_[pos];
    basis_pos_[old] = -1;
    state_[old] = natural_state(old);
    state_[fresh] = NState::Basic;
    basis_pos_[fresh] = pos;
    basis_[pos] = fresh;
  }

  void refactor() {
    // LU factorization of the basis with partial pivoting, then materialize
    // the inverse. The acceptance threshold is relative to the basis scale,
    // not to the simplex pivot floor: a basis of honestly small columns
    // factorizes fine, while a truly dependent column gets swapped out for
    // a logical and the factorization restarts.
    std::vector<double> lu;
    std::vector<int> perm(m_);
    for (int attempt = 0;; ++attempt) {
      if (attempt > m_) throw NumericalBreakdown("simplex: basis repair did not converge");
      lu.assign(static_cast<size_t>(m_) * m_, 0.0);
      double scale = 0.0;
      for (int ipos = 0; ipos < m_; ++ipos)
        for_col(basis_[ipos], [&](int i, double a) {
          lu[static_cast<size_t>(i) * m_ + ipos] += a;
          scale = std::max(scale, std::fabs(a));
        });
      double floor = 1e-13 * std::max(1.0, scale);
      for (int i = 0; i < m_; ++i) perm[i] = i;
      int stuck = -1;
      for (int k = 0; k < m_ && stuck < 0; ++k) {
        int piv = k;
        double best = std::fabs(lu[static_cast<size_t>(perm[k]) * m_ + k]);
        for (int i = k + 1; i < m_; ++i) {
          double v = std::fabs(lu[static_cast<size_t>(perm[i]) * m_ + k]);
          if (v > best) {
            best = v;
            piv = i;
          }
        }
        if (best < floor) {
          stuck = k;
          break;
        }
        std::swap(perm[k], perm[piv]);
        double* prow = &lu[static_cast<size_t>(perm[k]) * m_];
        double inv_piv = 1.0 / prow[k];
        for (int i = k + 1; i < m_; ++i) {
          double* row = &lu[static_cast<size_t>(perm[i]) * m_];
          double f = row[k] * inv_piv;
          if (f == 0.0) continue;
          row[k] = f;
          for (int c = k + 1; c < m_; ++c) row[c] -= f * prow[c];
        }
      }
      if (stuck < 0) break;
      replace_dependent_column(stuck, perm.data(), stuck);
    }

    // materialize the inverse column by column: B z = e_r via the permuted
    // factors (unit-diagonal L below, U on and above the diagonal)
    binv_.assign(static_cast<size_t>(m_) * m_, 0.0);
    std::vector<double> fwd(m_), z(m_);
    for (int r = 0; r < m_; ++r) {
      int start = 0;
      while (start < m_ && perm[start] != r) {
        fwd[start] = 0.0;
        ++start;
      }
      for (int i = start; i < m_; ++i) {
        double s = perm[i] == r ? 1.0 : 0.0;
        const double* row = &lu[static_cast<size_t>(perm[i]) * m_];
        for (int k = start; k < i; ++k) s -= row[k] * fwd[k];
        fwd[i] = s;
      }
      for (int i = m_ - 1; i >= 0; --i) {
        double s = fwd[i];
        const double* row = &lu[static_cast<size_t>(perm[i]) * m_];
        for (int k = i + 1; k < m_; ++k) s -= row[k] * z[k];
        z[i] = s / row[i];
      }
      for (int i = 0; i < m_; ++i) binv_[static_cast<size_t>(i) * m_ + r] = z[i];
    }

    recompute_basic_values();
    pivots_since_refactor_ = 0;
  }

  void recompute_basic_values() {
    std::vector<double> rhs = b_;
    for (int j = 0; j < ntotal_; ++j) {
      if (state_[j] == NState::Basic) continue;
      double v = nonbasic_value(j);
      if (v == 0.0) continue;
      for_col(j, [&](int i, double a) { rhs[i] -= a * v; });
    }
    for (int i = 0; i < m_; ++i) {
      const double* row = &binv_[static_cast<size_t>(i) * m_];
      double s = 0.0;
      for (int k = 0; k < m_; ++k) s += row[k] * rhs[k];
      xb_[i] = s;
    }
    for (int i = 0; i < m_; ++i)
      if (!std::isfinite(xb_[i]))
        throw NumericalBreakdown("simplex: basic values are no longer finite");
  }

  void extract(Solution& sol) {
    refactor();  // fresh inverse and exact basic values before reporting
    if (sol.status == Status::Infeasible) {
      phase1_ = true;
      classify();
    } else {
      phase1_ = false;
    }
    compute_duals();
    sol.x.assign(nstruct_, 0.0);
    for (int j = 0; j < nstruct_; ++j)
      sol.x[j] = state_[j] == NState::Basic ? xb_[basis_pos_[j]] : nonbasic_value(j);
    sol.objective = 0.0;
    for (int j = 0; j < nstruct_; ++j) sol.objective += real_cost_[j] * sol.x[j];
    sol.duals = y_;
    sol.pivots = pivots_;
    sol.degenerate_pivots = degenerate_total_;
    if (sol.status == Status::Infeasible) sol.phase1_infeasibility = max_violation();
    sol.basis.num_vars = nstruct_;
    sol.basis.basic = basis_;
    sol.basis.states.assign(nstruct_, 0);
    for (int j = 0; j < nstruct_; ++j)
      sol.basis.states[j] = state_[j] == NState::AtUpper     ? 1
                            : state_[j] == NState::FreeZero ? 2
                                                             : 0;
  }

  // The point the simplex is about to hand back has to satisfy what the
  // tableau claims it satisfies; a drifted inverse can fake optimality with
  // values that violate rows outright (and those points poison everything
  // downstream). Caught here, the caller's conservative retry gets a chance.
  void audit_point(const Solution& sol) const {
    double worst = 0.0;
    for (int j = 0; j < ntotal_; ++j) {
      double v = state_[j] == NState::Basic ? xb_[basis_pos_[j]] : nonbasic_value(j);
      worst = std::max(worst, lb_[j] - v);
      worst = std::max(worst, v - ub_[j]);
    }
    std::vector<double> row_val(m_, 0.0);
    for (int j = 0; j < ntotal_; ++j) {
      double v = state_[j] == NState::Basic ? xb_[basis_pos_[j]] : nonbasic_value(j);
      if (v == 0.0) continue;
      for_col(j, [&](int i, double a) { row_val[i] += a * v; });
    }
    for (int i = 0; i < m_; ++i) worst = std::max(worst, std::fabs(row_val[i] - b_[i]));
    if (!(worst <= 10.0 * feas_threshold()))
      throw NumericalBreakdown("simplex: solution failed the exit audit");
  }
};

}  // namespace detail

inline Solution solve(const Problem& p, const Options& opt = {},
                      const BasisSnapshot* warm = nullptr) {
  try {
    detail::Simplex s(p, opt);
    return s.run(warm);
  } catch (const NumericalBreakdown&) {
    // One retry from scratch, cold and under conservative settings; rethrow
    // when the caller already asked for them.
    if (opt.bland_only && opt.refactor_every <= 4 && opt.pivot_floor >= 1e-8) throw;
    Options safe = opt;
    safe.bland_only = true;
    safe.refactor_every = 4;
    safe.pivot_floor = std::max(opt.pivot_floor, 1e-8);
    safe.pivot_limit = opt.pivot_limit > 0 ? 4 * opt.pivot_limit : 0;
    detail::Simplex s(p, safe);
    return s.run(nullptr);
  }
}

// Solve, then among alternate optima prefer the point with the least L1
// distance to the anchor values. The second stage pins the original
// objective to its optimum (less a sliver covering cross-vertex roundoff)
// and minimizes the distance; columns anchored at a zero lower bound need no
// split variables. On any second-stage hiccup the first-stage solution
// stands. The reported objective is always the first-stage optimum, the
// reported point and basis are the second stage's.
inline Solution solve_near(const Problem& p, const std::vector<std::pair<int, double>>& anchor,
                           const Options& opt = {}, const BasisSnapshot* warm = nullptr) {
  Solution first = solve(p, opt, warm);
  if (first.status != Status::Optimal || anchor.empty()) return first;

  Problem q = p;
  double v = first.objective;
  double vscale = 1.0 + std::fabs(v);
  std::vector<std::pair<int, double>> pin;
  // normalized so the pin row's magnitude does not dominate the feasibility
  // scale of the second stage
  for (int c = 0; c < p.num_vars; ++c)
    if (p.objective[c] != 0.0) pin.emplace_back(c, p.objective[c] / vscale);
  int pin_row = static_cast<int>(q.rows.size());
  q.add_row(Relation::GreaterEq, v / vscale - 1e-11, std::move(pin));
  std::fill(q.objective.begin(), q.objective.end(), 0.0);
  struct Split {
    int col, above, below;
    double tgt;
  };
  std::vector<Split> splits;
  for (auto [c, tgt] : anchor) {
    if (tgt == 0.0 && p.lower[c] && *p.lower[c] == 0.0) {
      q.objective[c] = -1.0;
      continue;
    }
    int above = q.add_var(-1.0, 0.0, std::nullopt);
    int below = q.add_var(-1.0, 0.0, std::nullopt);
    q.add_row(Relation::Equal, tgt, {{c, 1.0}, {above, -1.0}, {below, 1.0}});
    splits.push_back({c, above, below, tgt});
  }

  // The first stage's point is feasible for the second stage by construction
  // (the pin logical rides at a sliver of slack, each anchor row is balanced
  // by one split variable), so seat exactly that vertex and skip phase 1.
  BasisSnapshot start;
  start.num_vars = q.num_vars;
  start.states.assign(q.num_vars, 0);
  std::copy(first.basis.states.begin(), first.basis.states.end(), start.states.begin());
  start.basic.reserve(q.rows.size());
  for (int id : first.basis.basic)
    start.basic.push_back(id < p.num_vars ? id : q.num_vars + (id - p.num_vars));
  start.basic.push_back(q.num_vars + pin_row);
  for (const Split& s : splits)
    start.basic.push_back(first.x[s.col] >= s.tgt ? s.above : s.below);

  Solution second;
  try {
    second = solve(q, opt, &start);
  } catch (const NumericalBreakdown&) {
    return first;
  }
  if (second.status != Status::Optimal) return first;
  first.x.assign(second.x.begin(), second.x.begin() + p.num_vars);
  first.pivots += second.pivots;
  first.degenerate_pivots += second.degenerate_pivots;
  // translate the second stage's basis back into the original shape; split
  // variables and the extra rows' logicals drop out, the loader tops up
  first.basis.num_vars = p.num_vars;
  first.basis.states.assign(second.basis.states.begin(),
                            second.basis.states.begin() + p.num_vars);
  first.basis.basic.clear();
  for (int id : second.basis.basic) {
    if (id < p.num_vars)
      first.basis.basic.push_back(id);
    else if (id >= q.num_vars && id - q.num_vars < static_cast<int>(p.rows.size()))
      first.basis.basic.push_back(p.num_vars + (id - q.num_vars));
  }
  return first;
}

// ---------------------------------------------------------------------------
// Optimality audit: recompute everything the simplex claims from scratch.
// Used by the test suites after every Optimal solve.

struct AuditReport {
  double primal_violation = 0.0;  // worst row/bound breach
  double dual_violation = 0.0;    // worst reduced-cost or dual-sign breach
  double cs_violation = 0.0;      // worst |dual| * |slack| product
  double cs_rel_violation = 0.0;  // same, scaled by 1 / (1 + |rhs|) per row
  double duality_gap = 0.0;       // |primal obj - dual obj|
  double gap_rel = 0.0;           // gap / (1 + |objective|)
};

inline AuditReport audit(const Problem& p, const Solution& sol) {
  AuditReport rep;
  if (sol.status != Status::Optimal) return rep;
  const std::vector<double>& x = sol.x;
  const std::vector<double>& y = sol.duals;

  for (int j = 0; j < p.num_vars; ++j) {
    if (p.lower[j]) rep.primal_violation = std::max(rep.primal_violation, *p.lower[j] - x[j]);
    if (p.upper[j]) rep.primal_violation = std::max(rep.primal_violation, x[j] - *p.upper[j]);
  }
  for (size_t i = 0; i < p.rows.size(); ++i) {
    double lhs = 0.0;
    for (auto [j, a] : p.rows[i].coeffs) lhs += a * x[j];
    double diff = lhs - p.rows[i].rhs;
    double viol = p.rows[i].rel == Relation::LessEq      ? diff
                  : p.rows[i].rel == Relation::GreaterEq ? -diff
                                                         : std::fabs(diff);
    rep.primal_violation = std::max(rep.primal_violation, viol);
    if (p.rows[i].rel == Relation::LessEq)
      rep.dual_violation = std::max(rep.dual_violation, -y[i]);
    else if (p.rows[i].rel == Relation::GreaterEq)
      rep.dual_violation = std::max(rep.dual_violation, y[i]);
    if (p.rows[i].rel != Relation::Equal) {
      double cs = std::fabs(y[i]) * std::fabs(diff);
      rep.cs_violation = std::max(rep.cs_violation, cs);
      rep.cs_rel_violation =
          std::max(rep.cs_rel_violation, cs / (1.0 + std::fabs(p.rows[i].rhs)));
    }
  }

  // reduced costs; dual objective collects the active bound of each column
  double dual_obj = 0.0;
  for (size_t i = 0; i < p.rows.size(); ++i) dual_obj += y[i] * p.rows[i].rhs;
  for (int j = 0; j < p.num_vars; ++j) {
    double r = p.objective[j];
    // column scan: cheap enough for audit purposes
    for (size_t i = 0; i < p.rows.size(); ++i)
      for (auto [col, a] : p.rows[i].coeffs)
        if (col == j) r -= y[i] * a;
    double lb = p.lower[j] ? *p.lower[j] : -kInf;
    double ub = p.upper[j] ? *p.upper[j] : kInf;
    double at_lb = x[j] - lb, at_ub = ub - x[j];
    if (r > 0) {
      // wants to grow: must sit at a finite upper bound
      rep.dual_violation = std::max(rep.dual_violation, std::isfinite(ub) ? 0.0 : r);
      rep.cs_violation = std::max(rep.cs_violation, r * std::max(0.0, at_ub));
      dual_obj += r * (std::isfinite(ub) ? ub : x[j]);
    } else if (r < 0) {
      rep.dual_violation = std::max(rep.dual_violation, std::isfinite(lb) ? 0.0 : -r);
      rep.cs_violation = std::max(rep.cs_violation, -r * std::max(0.0, at_lb));
      dual_obj += r * (std::isfinite(lb) ? lb : x[j]);
    }
  }
  rep.duality_gap = std::fabs(sol.objective - dual_obj);
  rep.gap_rel = rep.duality_gap / (1.0 + std::fabs(sol.objective));
  return rep;
}

// ---------------------------------------------------------------------------
// Plain-text dump (LP-format style) for eyeballing and external cross
// checks. Variable names come from the caller; missing entries fall back to
// x<index>.

inline void write_lp_text(const Problem& p, const std::vector<std::string>& names,
                          std::ostream& out) {
  auto name = [&](int j) {
    return j < static_cast<int>(names.size()) && !names[j].empty() ? names[j]
                                                                   : "x" + std::to_string(j);
  };
  auto term = [&](double v, int j, bool first) {
    std::string s;
    if (v < 0)
      s += first ? "-" : "- ";
    else if (!first)
      s += "+ ";
    double a = std::fabs(v);
    std::ostringstream num;
    num.precision(17);
    num << a;
    s += num.str() + " " + name(j) + " ";
    return s;
  };
  out << "Maximize\n obj: ";
  bool first = true;
  for (int j = 0; j < p.num_vars; ++j) {
    if (p.objective[j] == 0.0) continue;
    out << term(p.objective[j], j, first);
    first = false;
  }
  if (first) out << "0 " << name(0) << " ";
  out << "\nSubject To\n";
  for (size_t i = 0; i < p.rows.size(); ++i) {
    out << " r" << i << ": ";
    first = true;
    for (auto [j, a] : p.rows[i].coeffs) {
      if (a == 0.0) continue;
      out << term(a, j, first);
      first = false;
    }
    if (first) out << "0 " << name(0) << " ";
    const char* rel = p.rows[i].rel == Relation::LessEq      ? "<="
                      : p.rows[i].rel == Relation::GreaterEq ? ">="
                                                             : "=";
    std::ostringstream rhs;
    rhs.precision(17);
    rhs << p.rows[i].rhs;
    out << rel << " " << rhs.str() << "\n";
  }
  out << "Bounds\n";
  for (int j = 0; j < p.num_vars; ++j) {
    std::ostringstream line;
    line.precision(17);
    if (!p.lower[j] && !p.upper[j])
      line << " " << name(j) << " free";
    else if (p.lower[j] && p.upper[j])
      line << " " << *p.lower[j] << " <= " << name(j) << " <= " << *p.upper[j];
    else if (p.lower[j])
      line << " " << name(j) << " >= " << *p.lower[j];
    else
      line << " " << name(j) << " <= " << *p.upper[j];
    out << line.str() << "\n";
  }
  out << "End\n";
}

}  // namespace pooling::lp
