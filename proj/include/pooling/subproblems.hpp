#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pooling/core.hpp"
#include "pooling/formulations.hpp"
#include "pooling/instance.hpp"
#include "pooling/lp.hpp"

// LP builders for the five subproblems the solvers iterate on: the flow
// relaxation (quality rows dropped), the bilinear-model linearization with
// explicit quality columns, the two equivalent flow-only linearizations
// (distributed-error and Taylor forms), and the penalty variant with slack
// columns.
//
// Shared layout, documented once:
//   columns  0 .. |A|-1                 arc flows, canonical arc order
//            then, per builder, quality columns (pool-major, attribute-minor)
//            or slack columns (the s_min block then the s_max block, each
//            output-major, attribute-minor)
//   rows     conservation per pool, supply per bounded input, capacity per
//            bounded pool, demand per bounded output, then the builder's
//            quality rows; per (output, attribute): lower row then upper row
// Linearization constants are folded into right-hand sides, so rows are
// purely numeric. Coefficients that are exactly zero are not stored.

namespace pooling {

struct VariableMap {
  int num_arcs = 0;
  int num_attributes = 0;
  int num_outputs = 0;
  int alpha_begin = -1;  // first quality column, or -1 when flows only
  int slack_begin = -1;  // first slack column, or -1
  int num_vars = 0;

  int flow_col(int a) const { return a; }
  int alpha_col(int l, int k) const { return alpha_begin + l * num_attributes + k; }
  int smin_col(int j, int k) const { return slack_begin + j * num_attributes + k; }
  int smax_col(int j, int k) const {
    return slack_begin + (num_outputs + j) * num_attributes + k;
  }

  std::vector<std::string> variable_names(const PoolingInstance& inst) const {
    std::vector<std::string> names(num_vars);
    for (int a = 0; a < num_arcs; ++a) names[a] = "y[" + arc_label(inst.arcs[a]) + "]";
    if (alpha_begin >= 0)
      for (int l = 0; l < inst.num_pools; ++l)
        for (int k = 0; k < num_attributes; ++k)
          names[alpha_col(l, k)] =
              "alpha[pool " + std::to_string(l) + ", attr " + std::to_string(k) + "]";
    if (slack_begin >= 0)
      for (int j = 0; j < num_outputs; ++j)
        for (int k = 0; k < num_attributes; ++k) {
          std::string suffix =
              "[output " + std::to_string(j) + ", attr " + std::to_string(k) + "]";
          names[smin_col(j, k)] = "s_min" + suffix;
          names[smax_col(j, k)] = "s_max" + suffix;
        }
    return names;
  }
};

// Penalty weights for the slack columns; mu prices the lower-bound slack
// s_min, nu the upper-bound slack s_max.
struct PenaltyState {
  Matrix mu;  // outputs x attributes
  Matrix nu;

  PenaltyState() = default;
  PenaltyState(int outputs, int attributes, double mu0, double nu0)
      : mu(outputs, attributes, mu0), nu(outputs, attributes, nu0) {}
};

struct BuiltLp {
  lp::Problem problem;
  VariableMap map;
};

namespace detail {

inline VariableMap flow_map(const PoolingInstance& inst) {
  VariableMap vm;
  vm.num_arcs = inst.num_arcs();
  vm.num_attributes = inst.num_attributes;
  vm.num_outputs = inst.num_outputs;
  vm.num_vars = vm.num_arcs;
  return vm;
}

inline void add_flow_vars(lp::Problem& p, const PoolingInstance& inst) {
  for (int a = 0; a < inst.num_arcs(); ++a)
    p.add_var(inst.arc_weight[a], 0.0, inst.arc_capacity[a]);
}

// Conservation plus the bounded node capacities; the rows every subproblem
// shares with the flow relaxation.
inline void add_network_rows(lp::Problem& p, const PoolingInstance& inst) {
  for (int l = 0; l < inst.num_pools; ++l) {
    std::vector<std::pair<int, double>> c;
    for (int a : inst.pool_in[l]) c.emplace_back(a, 1.0);
    for (int a : inst.pool_out[l]) c.emplace_back(a, -1.0);
    p.add_row(lp::Relation::Equal, 0.0, std::move(c));
  }
  for (int i = 0; i < inst.num_inputs; ++i) {
    if (!inst.input_capacity[i]) continue;
    std::vector<std::pair<int, double>> c;
    for (int a : inst.input_out[i]) c.emplace_back(a, 1.0);
    p.add_row(lp::Relation::LessEq, *inst.input_capacity[i], std::move(c));
  }
  for (int l = 0; l < inst.num_pools; ++l) {
    if (!inst.pool_capacity[l]) continue;
    std::vector<std::pair<int, double>> c;
    for (int a : inst.pool_out[l]) c.emplace_back(a, 1.0);
    p.add_row(lp::Relation::LessEq, *inst.pool_capacity[l], std::move(c));
  }
  for (int j = 0; j < inst.num_outputs; ++j) {
    if (!inst.output_capacity[j]) continue;
    std::vector<std::pair<int, double>> c;
    for (int a : inst.output_in_direct[j]) c.emplace_back(a, 1.0);
    for (int a : inst.output_in_pools[j]) c.emplace_back(a, 1.0);
    p.add_row(lp::Relation::LessEq, *inst.output_capacity[j], std::move(c));
  }
}

inline std::vector<std::pair<int, double>> sparsify(const std::vector<double>& dense) {
  std::vector<std::pair<int, double>> c;
  for (size_t i = 0; i < dense.size(); ++i)
    if (dense[i] != 0.0) c.emplace_back(static_cast<int>(i), dense[i]);
  return c;
}

// Arc coefficients of sum_i lambda_ik y_ij + sum_l sigma_ljk(y) for one
// (output, attribute) pair. The distributed-error form has no constant term.
inline void sigma_quality_mass(const PoolingInstance& inst, const QualityVector& alpha_t,
                               const FlowVector& y_t, int j, int k,
                               std::vector<double>& coef) {
  coef.assign(inst.arcs.size(), 0.0);
  for (int a : inst.output_in_direct[j])
    coef[a] += inst.input_quality(inst.arcs[a].tail.index, k);
  for (int a : inst.output_in_pools[j]) {
    int l = inst.arcs[a].tail.index;
    double out_t = pool_outflow(inst, y_t, l);
    if (out_t <= kOutflowTol) continue;  // closed pool: its term vanishes
    coef[a] += alpha_t(l, k);
    double beta = y_t[a] / out_t;
    // solver dust in y_t would otherwise seed coefficients many orders below
    // the row scale, which is exactly what degrades later basis factorizations
    if (beta <= 1e-12) continue;
    for (int b : inst.pool_in[l])
      coef[b] += beta * inst.input_quality(inst.arcs[b].tail.index, k);
    for (int b : inst.pool_out[l]) coef[b] -= beta * alpha_t(l, k);
  }
}

// Emit the lower then upper quality row for (j, k) given the quality-mass
// coefficients: mass >= lambda_min * inflow and mass <= lambda_max * inflow,
// with the mass constant moved to the right-hand side.
inline void emit_quality_rows(lp::Problem& p, const PoolingInstance& inst, int j, int k,
                              std::vector<double> mass, double constant,
                              const std::vector<std::pair<int, double>>& extra_lb,
                              const std::vector<std::pair<int, double>>& extra_ub) {
  std::vector<double> lb_coef = mass;
  for (int a : inst.output_in_direct[j]) {
    lb_coef[a] -= inst.quality_lb(j, k);
    mass[a] -= inst.quality_ub(j, k);
  }
  for (int a : inst.output_in_pools[j]) {
    lb_coef[a] -= inst.quality_lb(j, k);
    mass[a] -= inst.quality_ub(j, k);
  }
  auto lb_row = sparsify(lb_coef);
  for (auto& e : extra_lb) lb_row.push_back(e);
  p.add_row(lp::Relation::GreaterEq, -constant, std::move(lb_row));
  auto ub_row = sparsify(mass);
  for (auto& e : extra_ub) ub_row.push_back(e);
  p.add_row(lp::Relation::LessEq, -constant, std::move(ub_row));
}

}  // namespace detail

// Flow relaxation: every quality row dropped. Supplies the starting point
// and the upper-bound anchor for the iterative solvers.
inline BuiltLp build_mcf(const PoolingInstance& inst) {
  BuiltLp b;
  b.map = detail::flow_map(inst);
  detail::add_flow_vars(b.problem, inst);
  detail::add_network_rows(b.problem, inst);
  return b;
}

// Linearization of the bilinear model around (alpha_t, y_t), keeping the
// quality columns. Per (pool, attribute) the blend identity becomes
//   sum_i lambda_ik y_il - alpha_t_lk sum_j y_lj - out_t alpha_lk
//     = -alpha_t_lk out_t
// and the output quality rows freeze alpha at alpha_t on the pool arcs while
// the quality columns enter with the base flows as coefficients. Blend rows
// are kept even for pools closed at y_t.
inline BuiltLp build_slp_p(const PoolingInstance& inst, const QualityVector& alpha_t,
                           const FlowVector& y_t) {
  if (y_t.size() != inst.arcs.size())
    throw std::invalid_argument("build_slp_p: flow vector size mismatch");
  if (alpha_t.rows != inst.num_pools || alpha_t.cols != inst.num_attributes)
    throw std::invalid_argument("build_slp_p: quality shape mismatch");
  BuiltLp b;
  b.map = detail::flow_map(inst);
  b.map.alpha_begin = b.map.num_arcs;
  b.map.num_vars = b.map.num_arcs + inst.num_pools * inst.num_attributes;
  detail::add_flow_vars(b.problem, inst);
  for (int l = 0; l < inst.num_pools; ++l)
    for (int k = 0; k < inst.num_attributes; ++k)
      b.problem.add_var(0.0, std::nullopt, std::nullopt);  // alpha: free

  detail::add_network_rows(b.problem, inst);

  for (int l = 0; l < inst.num_pools; ++l) {
    double out_t = pool_outflow(inst, y_t, l);
    for (int k = 0; k < inst.num_attributes; ++k) {
      std::vector<std::pair<int, double>> c;
      for (int a : inst.pool_in[l])
        c.emplace_back(a, inst.input_quality(inst.arcs[a].tail.index, k));
      if (alpha_t(l, k) != 0.0)
        for (int a : inst.pool_out[l]) c.emplace_back(a, -alpha_t(l, k));
      if (out_t != 0.0) c.emplace_back(b.map.alpha_col(l, k), -out_t);
      b.problem.add_row(lp::Relation::Equal, -alpha_t(l, k) * out_t, std::move(c));
    }
  }

  for (int j = 0; j < inst.num_outputs; ++j)
    for (int k = 0; k < inst.num_attributes; ++k) {
      std::vector<double> mass(inst.arcs.size(), 0.0);
      double constant = 0.0;
      for (int a : inst.output_in_direct[j])
        mass[a] += inst.input_quality(inst.arcs[a].tail.index, k);
      std::vector<std::pair<int, double>> alpha_terms;
      for (int a : inst.output_in_pools[j]) {
        int l = inst.arcs[a].tail.index;
        mass[a] += alpha_t(l, k);
        if (y_t[a] != 0.0) alpha_terms.emplace_back(b.map.alpha_col(l, k), y_t[a]);
        constant -= y_t[a] * alpha_t(l, k);
      }
      detail::emit_quality_rows(b.problem, inst, j, k, std::move(mass), constant,
                                alpha_terms, alpha_terms);
    }
  return b;
}

// Flow-only linearization in the distributed-error form: each bilinear term
// is replaced by sigma, its quality error spread over the base outflows.
// Requires alpha_t to be the pool quality of y_t, which also makes every
// linearization constant vanish.
inline BuiltLp build_dr(const PoolingInstance& inst, const QualityVector& alpha_t,
                        const FlowVector& y_t) {
  if (y_t.size() != inst.arcs.size())
    throw std::invalid_argument("build_dr: flow vector size mismatch");
  if (linf_diff(alpha_t.v, pool_quality(inst, y_t).v) > 1e-7)
    throw std::invalid_argument("build_dr: alpha_t is not the pool quality of y_t");
  BuiltLp b;
  b.map = detail::flow_map(inst);
  detail::add_flow_vars(b.problem, inst);
  detail::add_network_rows(b.problem, inst);
  std::vector<double> mass;
  for (int j = 0; j < inst.num_outputs; ++j)
    for (int k = 0; k < inst.num_attributes; ++k) {
      detail::sigma_quality_mass(inst, alpha_t, y_t, j, k, mass);
      detail::emit_quality_rows(b.problem, inst, j, k, mass, 0.0, {}, {});
    }
  return b;
}

// The subproblem derived from the Taylor expansion of q(y) y_lj at y_t. The
// expansion and the distributed-error form are the same linear functional
// (that identity is what justifies dropping the quality columns), so both
// builders assemble the rows through one canonical evaluation; this keeps
// the two solvers' iterate traces bitwise comparable instead of merely close,
// which matters because alternate LP optima would otherwise let last-bit
// noise pick different vertices.
inline BuiltLp build_slp_f(const PoolingInstance& inst, const FlowVector& y_t) {
  if (y_t.size() != inst.arcs.size())
    throw std::invalid_argument("build_slp_f: flow vector size mismatch");
  QualityVector q_t = pool_quality(inst, y_t);
  BuiltLp b;
  b.map = detail::flow_map(inst);
  detail::add_flow_vars(b.problem, inst);
  detail::add_network_rows(b.problem, inst);
  std::vector<double> mass;
  for (int j = 0; j < inst.num_outputs; ++j)
    for (int k = 0; k < inst.num_attributes; ++k) {
      detail::sigma_quality_mass(inst, q_t, y_t, j, k, mass);
      detail::emit_quality_rows(b.problem, inst, j, k, mass, 0.0, {}, {});
    }
  return b;
}

// Taylor subproblem with elastic quality rows: violations are absorbed by
// nonnegative slacks priced into the objective, so the LP always has the
// (y, s) = (0, 0) point available.
inline BuiltLp build_pslp(const PoolingInstance& inst, const FlowVector& y_t,
                          const PenaltyState& penalties) {
  if (y_t.size() != inst.arcs.size())
    throw std::invalid_argument("build_pslp: flow vector size mismatch");
  if (penalties.mu.rows != inst.num_outputs || penalties.mu.cols != inst.num_attributes ||
      !penalties.mu.same_shape(penalties.nu))
    throw std::invalid_argument("build_pslp: penalty shape mismatch");
  QualityVector q_t = pool_quality(inst, y_t);
  BuiltLp b;
  b.map = detail::flow_map(inst);
  b.map.slack_begin = b.map.num_arcs;
  b.map.num_vars = b.map.num_arcs + 2 * inst.num_outputs * inst.num_attributes;
  detail::add_flow_vars(b.problem, inst);
  for (int j = 0; j < inst.num_outputs; ++j)
    for (int k = 0; k < inst.num_attributes; ++k)
      b.problem.add_var(-penalties.mu(j, k), 0.0, std::nullopt);
  for (int j = 0; j < inst.num_outputs; ++j)
    for (int k = 0; k < inst.num_attributes; ++k)
      b.problem.add_var(-penalties.nu(j, k), 0.0, std::nullopt);

  detail::add_network_rows(b.problem, inst);
  std::vector<double> mass;
  for (int j = 0; j < inst.num_outputs; ++j)
    for (int k = 0; k < inst.num_attributes; ++k) {
      detail::sigma_quality_mass(inst, q_t, y_t, j, k, mass);
      detail::emit_quality_rows(b.problem, inst, j, k, mass, 0.0,
                                {{b.map.smin_col(j, k), 1.0}},
                                {{b.map.smax_col(j, k), -1.0}});
    }
  return b;
}

}  // namespace pooling
