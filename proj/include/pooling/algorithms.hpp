#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pooling/core.hpp"
#include "pooling/formulations.hpp"
#include "pooling/instance.hpp"
#include "pooling/lp.hpp"
#include "pooling/subproblems.hpp"

// The four iterative drivers. All start from an optimal solution of the flow
// relaxation and repeatedly solve one of the linearized subproblems until the
// iterates stop moving, the iteration cap is hit, or an LP solve fails.
//
// Subproblem solves are anchored: among alternate optimal vertices the
// drivers take the one nearest the previous iterate, so an iterate moves only
// as far as the model value asks it to. Without this, ties in the subproblem
// let the solver hop between distant vertices of the same optimal face and
// an otherwise convergent run never settles.

namespace pooling {

struct SolverConfig {
  int t_max = 100;         // subproblem solves per run
  double mu0 = 1.0;        // initial penalty on the lower-bound slack
  double nu0 = 1.0;        // initial penalty on the upper-bound slack
  double delta = 10.0;     // penalty growth factor
  double conv_tol = 1e-8;  // fixed-point tolerance on the iterate step
  double feas_tol = 1e-6;  // certification tolerance on residuals
  double slack_tol = 1e-8; // a slack above this counts as a violation
  double penalty_cap = 1e12;
  lp::Options lp;
};

enum class FailureReason {
  InfeasibleSubproblem,
  UnboundedSubproblem,
  IterationLimit,
  PenaltyCapReached,
};

inline const char* failure_name(FailureReason r) {
  switch (r) {
    case FailureReason::InfeasibleSubproblem: return "infeasible_subproblem";
    case FailureReason::UnboundedSubproblem: return "unbounded_subproblem";
    case FailureReason::IterationLimit: return "iteration_limit";
    case FailureReason::PenaltyCapReached: return "penalty_cap_reached";
  }
  return "?";
}

struct IterationRecord {
  int t = 0;
  lp::Status lp_status = lp::Status::Optimal;
  std::optional<double> objective;  // LP optimum, present iff Optimal
  FlowVector y;                     // empty on failed solves
  QualityVector alpha;
  double max_violation = 0.0;       // projected-model residual at y
  // Penalty runs only: the weights the LP was priced with and its slacks.
  Matrix mu, nu, s_min, s_max;
};

struct RunReport {
  std::string algorithm;
  std::vector<IterationRecord> trace;  // trace[0] is the relaxation solve
  double o0 = 0.0;
  bool converged = false;
  bool feasible = false;
  FlowVector final_y;  // empty when no iterate passed certification
  QualityVector final_alpha;
  double final_objective = 0.0;
  int iterations = 0;  // subproblem solves, excluding the relaxation
  double or_metric = 0.0;
  double wall_time = 0.0;  // seconds
  std::optional<FailureReason> failure_reason;
};

// The flow relaxation could not supply a starting point; the instance itself
// is ill-posed (unbounded profit).
struct RelaxationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InitialPoint {
  FlowVector y0;
  double o0 = 0.0;
  // Vertex of the relaxation, reusable to warm the first subproblem solve:
  // the arc columns and the network rows sit at the same indices there.
  lp::BasisSnapshot basis;
};

namespace detail {

// Solver noise at or below the outflow gate is cleared to an exact zero, so a
// dust arc can never hold a pool open or seed later rows with dust-scale
// coefficients. Flows are nonnegative, hence the one-sided test.
inline void snap_flows(FlowVector& y) {
  for (double& v : y)
    if (v <= kOutflowTol) v = 0.0;
}

inline std::vector<std::pair<int, double>> flow_anchor(const PoolingInstance& inst,
                                                       const FlowVector& y_t) {
  std::vector<std::pair<int, double>> anchor;
  anchor.reserve(inst.num_arcs());
  for (int a = 0; a < inst.num_arcs(); ++a) anchor.emplace_back(a, y_t[a]);
  return anchor;
}

}  // namespace detail

inline InitialPoint initial_point(const PoolingInstance& inst, const lp::Options& opt = {}) {
  BuiltLp mcf = build_mcf(inst);
  lp::Solution sol = lp::solve(mcf.problem, opt);
  if (sol.status != lp::Status::Optimal)
    throw RelaxationError(std::string("flow relaxation is ") + lp::status_name(sol.status));
  double o0 = sol.objective;
  FlowVector y0(sol.x.begin(), sol.x.begin() + inst.num_arcs());
  lp::BasisSnapshot basis = std::move(sol.basis);
  // Among alternate relaxation optima, prefer one that feeds every pool it
  // can: a pool left dry here starts the iteration invisible to the quality
  // rows, and the first linearizations then say nothing about routing
  // through it. The margin under the optimum is solver-tolerance sized, so
  // a trickle into a pool may cost a relative 1e-7 of objective but nothing
  // that the feasibility tolerances downstream would notice.
  if (inst.num_pools > 0) {
    lp::Problem q = mcf.problem;
    std::vector<std::pair<int, double>> pin;
    for (int c = 0; c < q.num_vars; ++c)
      if (q.objective[c] != 0.0) pin.emplace_back(c, q.objective[c]);
    q.add_row(lp::Relation::GreaterEq, o0 - 1e-7 * (1.0 + std::fabs(o0)), std::move(pin));
    std::fill(q.objective.begin(), q.objective.end(), 0.0);
    for (int l = 0; l < inst.num_pools; ++l) {
      int z = q.add_var(1.0, 0.0, 1.0);
      std::vector<std::pair<int, double>> row{{z, 1.0}};
      for (int a : inst.pool_in[l]) row.emplace_back(a, -1.0);
      q.add_row(lp::Relation::LessEq, 0.0, std::move(row));
    }
    try {
      lp::Solution wide = lp::solve(q, opt, &basis);
      if (wide.status == lp::Status::Optimal) {
        y0.assign(wide.x.begin(), wide.x.begin() + inst.num_arcs());
        // back to the relaxation's shape: the helper columns and their rows
        // mean nothing to the subproblems
        int na = mcf.problem.num_vars;
        int nr = static_cast<int>(mcf.problem.rows.size());
        basis.num_vars = na;
        basis.states.assign(wide.basis.states.begin(), wide.basis.states.begin() + na);
        basis.basic.clear();
        for (int id : wide.basis.basic) {
          if (id < na)
            basis.basic.push_back(id);
          else if (id >= wide.basis.num_vars && id - wide.basis.num_vars < nr)
            basis.basic.push_back(na + (id - wide.basis.num_vars));
        }
      }
    } catch (const lp::NumericalBreakdown&) {
      // keep the plain relaxation optimum
    }
  }
  detail::snap_flows(y0);
  return {std::move(y0), o0, std::move(basis)};
}

namespace detail {

inline IterationRecord make_record(const PoolingInstance& inst, int t, const lp::Solution& sol,
                                   FlowVector y, QualityVector alpha) {
  IterationRecord rec;
  rec.t = t;
  rec.lp_status = sol.status;
  if (sol.status == lp::Status::Optimal) {
    rec.objective = sol.objective;
    rec.max_violation = residuals_f(inst, y).max_violation;
  }
  rec.y = std::move(y);
  rec.alpha = std::move(alpha);
  return rec;
}

inline double or_metric_of(const RunReport& rep) {
  double sum = 0.0;
  int n = 0;
  for (const auto& rec : rep.trace) {
    if (!rec.objective) continue;
    if (rep.o0 != 0.0)
      sum += *rec.objective / rep.o0;
    else
      sum += (*rec.objective == 0.0) ? 1.0 : 0.0;
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

// Fill in the final point, certification flag and OR metric. Failed runs
// fall back to the most recent iterate that satisfies the projected model.
inline void finalize(const PoolingInstance& inst, const SolverConfig& cfg, RunReport& rep) {
  int chosen = -1;
  if (rep.converged) {
    chosen = static_cast<int>(rep.trace.size()) - 1;
  } else {
    for (int r = static_cast<int>(rep.trace.size()) - 1; r >= 0; --r) {
      if (rep.trace[r].objective && rep.trace[r].max_violation <= cfg.feas_tol) {
        chosen = r;
        break;
      }
    }
  }
  if (chosen >= 0) {
    const IterationRecord& rec = rep.trace[chosen];
    rep.final_y = rec.y;
    rep.final_alpha = rec.alpha;
    rep.final_objective = objective(inst, rec.y);
    rep.feasible = rec.max_violation <= cfg.feas_tol;
  }
  rep.or_metric = or_metric_of(rep);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::optional<FailureReason> lp_failure(lp::Status s) {
  if (s == lp::Status::Infeasible) return FailureReason::InfeasibleSubproblem;
  if (s == lp::Status::Unbounded) return FailureReason::UnboundedSubproblem;
  return std::nullopt;
}

}  // namespace detail

// Successive linearization of the bilinear model, iterating on (alpha, y)
// pairs with the quality columns kept in the LP.
inline RunReport run_slp(const PoolingInstance& inst, const SolverConfig& cfg = {}) {
  detail::Stopwatch clock;
  RunReport rep;
  rep.algorithm = "slp";
  InitialPoint start = initial_point(inst, cfg.lp);
  rep.o0 = start.o0;
  FlowVector y_t = std::move(start.y0);
  lp::BasisSnapshot warm = std::move(start.basis);
  QualityVector alpha_t = pool_quality(inst, y_t);
  {
    lp::Solution s0;
    s0.status = lp::Status::Optimal;
    s0.objective = rep.o0;
    rep.trace.push_back(detail::make_record(inst, 0, s0, y_t, alpha_t));
  }
  for (int t = 1; t <= cfg.t_max; ++t) {
    BuiltLp sub = build_slp_p(inst, alpha_t, y_t);
    std::vector<std::pair<int, double>> anchor = detail::flow_anchor(inst, y_t);
    for (int l = 0; l < inst.num_pools; ++l)
      for (int k = 0; k < inst.num_attributes; ++k)
        anchor.emplace_back(sub.map.alpha_col(l, k), alpha_t(l, k));
    lp::Solution sol = lp::solve_near(sub.problem, anchor, cfg.lp, &warm);
    ++rep.iterations;
    if (auto fail = detail::lp_failure(sol.status)) {
      rep.failure_reason = fail;
      rep.trace.push_back(detail::make_record(inst, t, sol, {}, {}));
      break;
    }
    warm = std::move(sol.basis);
    FlowVector y_next(sol.x.begin(), sol.x.begin() + inst.num_arcs());
    detail::snap_flows(y_next);
    QualityVector alpha_next(inst.num_pools, inst.num_attributes);
    for (int l = 0; l < inst.num_pools; ++l)
      for (int k = 0; k < inst.num_attributes; ++k)
        alpha_next(l, k) = sol.x[sub.map.alpha_col(l, k)];
    rep.trace.push_back(detail::make_record(inst, t, sol, y_next, alpha_next));
    double step = std::max(linf_diff(y_next, y_t), linf_diff(alpha_next.v, alpha_t.v));
    y_t = std::move(y_next);
    alpha_t = std::move(alpha_next);
    if (step <= cfg.conv_tol) {
      // A fixed point only counts as convergence when the point itself
      // checks out; the iteration can stall on an infeasible plateau.
      rep.converged = rep.trace.back().max_violation <= cfg.feas_tol;
      break;
    }
  }
  if (!rep.converged && !rep.failure_reason && rep.iterations >= cfg.t_max)
    rep.failure_reason = FailureReason::IterationLimit;
  detail::finalize(inst, cfg, rep);
  rep.wall_time = clock.seconds();
  return rep;
}

namespace detail {

// Shared driver for the flow-only linearizations; the two differ only in how
// the subproblem is assembled.
template <typename BuildSub>
RunReport run_flow_iteration(const PoolingInstance& inst, const SolverConfig& cfg,
                             const char* tag, BuildSub&& build_sub) {
  Stopwatch clock;
  RunReport rep;
  rep.algorithm = tag;
  InitialPoint start = initial_point(inst, cfg.lp);
  rep.o0 = start.o0;
  FlowVector y_t = std::move(start.y0);
  lp::BasisSnapshot warm = std::move(start.basis);
  {
    lp::Solution s0;
    s0.status = lp::Status::Optimal;
    s0.objective = rep.o0;
    rep.trace.push_back(make_record(inst, 0, s0, y_t, pool_quality(inst, y_t)));
  }
  for (int t = 1; t <= cfg.t_max; ++t) {
    BuiltLp sub = build_sub(y_t);
    lp::Solution sol = lp::solve_near(sub.problem, flow_anchor(inst, y_t), cfg.lp, &warm);
    ++rep.iterations;
    if (auto fail = lp_failure(sol.status)) {
      rep.failure_reason = fail;
      rep.trace.push_back(make_record(inst, t, sol, {}, {}));
      break;
    }
    warm = std::move(sol.basis);
    FlowVector y_next(sol.x.begin(), sol.x.begin() + inst.num_arcs());
    snap_flows(y_next);
    rep.trace.push_back(make_record(inst, t, sol, y_next, pool_quality(inst, y_next)));
    double step = linf_diff(y_next, y_t);
    y_t = std::move(y_next);
    if (step <= cfg.conv_tol) {
      // Feasibility is part of the certificate; a stalled infeasible
      // iterate does not converge, it merely stops moving.
      rep.converged = rep.trace.back().max_violation <= cfg.feas_tol;
      break;
    }
  }
  if (!rep.converged && !rep.failure_reason && rep.iterations >= cfg.t_max)
    rep.failure_reason = FailureReason::IterationLimit;
  finalize(inst, cfg, rep);
  rep.wall_time = clock.seconds();
  return rep;
}

}  // namespace detail

// Distributed recursion: recompute the pool qualities from the current flows
// and solve the distributed-error subproblem.
inline RunReport run_dr(const PoolingInstance& inst, const SolverConfig& cfg = {}) {
  return detail::run_flow_iteration(inst, cfg, "dr", [&](const FlowVector& y_t) {
    return build_dr(inst, pool_quality(inst, y_t), y_t);
  });
}

// The same iteration with the subproblem assembled from the Taylor expansion.
inline RunReport run_slp_f(const PoolingInstance& inst, const SolverConfig& cfg = {}) {
  return detail::run_flow_iteration(inst, cfg, "slpf",
                                    [&](const FlowVector& y_t) { return build_slp_f(inst, y_t); });
}

// Penalty variant: elastic quality rows, growing the weight of any slack
// that keeps showing up. A parameter grows on its own slack (mu prices and
// reacts to s_min, nu to s_max).
inline RunReport run_pdr(const PoolingInstance& inst, const SolverConfig& cfg = {}) {
  detail::Stopwatch clock;
  RunReport rep;
  rep.algorithm = "pdr";
  InitialPoint start = initial_point(inst, cfg.lp);
  rep.o0 = start.o0;
  FlowVector y_t = std::move(start.y0);
  lp::BasisSnapshot warm = std::move(start.basis);
  PenaltyState pen(inst.num_outputs, inst.num_attributes, cfg.mu0, cfg.nu0);
  {
    lp::Solution s0;
    s0.status = lp::Status::Optimal;
    s0.objective = rep.o0;
    rep.trace.push_back(detail::make_record(inst, 0, s0, y_t, pool_quality(inst, y_t)));
  }
  for (int t = 1; t <= cfg.t_max; ++t) {
    BuiltLp sub = build_pslp(inst, y_t, pen);
    std::vector<std::pair<int, double>> anchor = detail::flow_anchor(inst, y_t);
    for (int j = 0; j < inst.num_outputs; ++j)
      for (int k = 0; k < inst.num_attributes; ++k) {
        anchor.emplace_back(sub.map.smin_col(j, k), 0.0);
        anchor.emplace_back(sub.map.smax_col(j, k), 0.0);
      }
    lp::Solution sol = lp::solve_near(sub.problem, anchor, cfg.lp, &warm);
    ++rep.iterations;
    if (auto fail = detail::lp_failure(sol.status)) {
      rep.failure_reason = fail;  // unbounded only; the LP is never infeasible
      rep.trace.push_back(detail::make_record(inst, t, sol, {}, {}));
      break;
    }
    warm = std::move(sol.basis);
    FlowVector y_next(sol.x.begin(), sol.x.begin() + inst.num_arcs());
    detail::snap_flows(y_next);
    Matrix s_min(inst.num_outputs, inst.num_attributes);
    Matrix s_max(inst.num_outputs, inst.num_attributes);
    double worst_slack = 0.0;
    for (int j = 0; j < inst.num_outputs; ++j)
      for (int k = 0; k < inst.num_attributes; ++k) {
        s_min(j, k) = sol.x[sub.map.smin_col(j, k)];
        s_max(j, k) = sol.x[sub.map.smax_col(j, k)];
        worst_slack = std::max(worst_slack, std::max(s_min(j, k), s_max(j, k)));
      }
    IterationRecord rec = detail::make_record(inst, t, sol, y_next, pool_quality(inst, y_next));
    rec.mu = pen.mu;
    rec.nu = pen.nu;
    rec.s_min = s_min;
    rec.s_max = s_max;
    rep.trace.push_back(std::move(rec));

    double step = linf_diff(y_next, y_t);
    y_t = std::move(y_next);
    if (worst_slack <= cfg.slack_tol && step <= cfg.conv_tol) {
      rep.converged = rep.trace.back().max_violation <= cfg.feas_tol;
      break;
    }
    bool capped = false;
    for (int j = 0; j < inst.num_outputs && !capped; ++j)
      for (int k = 0; k < inst.num_attributes; ++k) {
        if (s_min(j, k) > cfg.slack_tol) {
          if (pen.mu(j, k) >= cfg.penalty_cap) {
            capped = true;
            break;
          }
          pen.mu(j, k) = std::min(cfg.delta * pen.mu(j, k), cfg.penalty_cap);
        }
        if (s_max(j, k) > cfg.slack_tol) {
          if (pen.nu(j, k) >= cfg.penalty_cap) {
            capped = true;
            break;
          }
          pen.nu(j, k) = std::min(cfg.delta * pen.nu(j, k), cfg.penalty_cap);
        }
      }
    if (capped) {
      rep.failure_reason = FailureReason::PenaltyCapReached;
      break;
    }
  }
  if (!rep.converged && !rep.failure_reason && rep.iterations >= cfg.t_max)
    rep.failure_reason = FailureReason::IterationLimit;
  detail::finalize(inst, cfg, rep);
  rep.wall_time = clock.seconds();
  return rep;
}

struct Metrics {
  std::optional<double> gap_percent;  // absent when o* = 0 but o != 0
  double or_metric = 0.0;
};

// Gap against the best known objective, treating runs without a certified
// point as total misses, plus the mean objective ratio of the trace.
inline Metrics compute_metrics(const RunReport& rep, double best_objective) {
  Metrics m;
  m.or_metric = rep.or_metric;
  if (!rep.feasible) {
    m.gap_percent = 100.0;
    return m;
  }
  if (best_objective == 0.0) {
    if (rep.final_objective == 0.0) m.gap_percent = 0.0;
    return m;  // nonzero objective against a zero best: undefined
  }
  m.gap_percent = (best_objective - rep.final_objective) / best_objective * 100.0;
  return m;
}

}  // namespace pooling
