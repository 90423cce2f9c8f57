#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pooling/core.hpp"
#include "pooling/instance.hpp"

// Pure evaluation of the model formulas over flow vectors: objective, pool
// qualities, the sigma/tau linearizations of the bilinear quality terms, and
// constraint residuals for both the bilinear model (flows + quality
// variables) and the projected model (flows only).

namespace pooling {

// Flow per arc, in the instance's canonical arc order.
using FlowVector = std::vector<double>;
// Per (pool, attribute) quality value.
using QualityVector = Matrix;

// A pool whose total outflow is at or below this tolerance counts as closed:
// its quality is 0 by convention and its linearization terms vanish. Shared
// by pool_quality, error_and_beta, sigma and tau so the case split is
// consistent.
inline constexpr double kOutflowTol = 1e-9;

inline double objective(const PoolingInstance& inst, const FlowVector& y) {
  if (y.size() != inst.arcs.size())
    throw std::invalid_argument("objective: flow vector size mismatch");
  double total = 0.0;
  for (size_t a = 0; a < y.size(); ++a) total += inst.arc_weight[a] * y[a];
  return total;
}

inline double pool_outflow(const PoolingInstance& inst, const FlowVector& y, int l) {
  double out = 0.0;
  for (int a : inst.pool_out[l]) out += y[a];
  return out;
}

inline double pool_inflow(const PoolingInstance& inst, const FlowVector& y, int l) {
  double in = 0.0;
  for (int a : inst.pool_in[l]) in += y[a];
  return in;
}

// q(y): flow-weighted average input quality per (pool, attribute); exactly 0
// for closed pools.
inline QualityVector pool_quality(const PoolingInstance& inst, const FlowVector& y) {
  if (y.size() != inst.arcs.size())
    throw std::invalid_argument("pool_quality: flow vector size mismatch");
  QualityVector q(inst.num_pools, inst.num_attributes);
  for (int l = 0; l < inst.num_pools; ++l) {
    double out = pool_outflow(inst, y, l);
    if (out <= kOutflowTol) continue;
    for (int k = 0; k < inst.num_attributes; ++k) {
      double num = 0.0;
      for (int a : inst.pool_in[l])
        num += inst.input_quality(inst.arcs[a].tail.index, k) * y[a];
      q(l, k) = num / out;
    }
  }
  return q;
}

struct ErrorBeta {
  Matrix error;  // R: per (pool, attribute), evaluated at the argument flow
  Matrix beta;   // per (pool, output), from the base flow; rows of a closed
                 // pool are zero, otherwise they sum to 1 over its arcs
};

// R_lk = sum_i lambda_ik y_il - alpha^t_lk sum_j y_lj   (linear in y)
// beta_lj = y^t_lj / sum_r y^t_lr                        (0 if closed at y_t)
inline ErrorBeta error_and_beta(const PoolingInstance& inst, const FlowVector& y,
                                const QualityVector& alpha_t, const FlowVector& y_t) {
  ErrorBeta eb;
  eb.error = Matrix(inst.num_pools, inst.num_attributes);
  eb.beta = Matrix(inst.num_pools, inst.num_outputs);
  for (int l = 0; l < inst.num_pools; ++l) {
    double out = pool_outflow(inst, y, l);
    for (int k = 0; k < inst.num_attributes; ++k) {
      double num = 0.0;
      for (int a : inst.pool_in[l])
        num += inst.input_quality(inst.arcs[a].tail.index, k) * y[a];
      eb.error(l, k) = num - alpha_t(l, k) * out;
    }
    double out_t = pool_outflow(inst, y_t, l);
    if (out_t <= kOutflowTol) continue;
    for (int a : inst.pool_out[l])
      eb.beta(l, inst.arcs[a].head.index) = y_t[a] / out_t;
  }
  return eb;
}

// sigma_ljk(y) = alpha^t_lk y_lj + beta_lj R_lk(y), the distributed-error
// linearization of alpha_lk * y_lj around (alpha_t, y_t). Only valid when
// alpha_t is the quality vector of y_t; checked because the equivalence with
// tau (and the zero constant term the DR rows rely on) both require it.
inline Tensor3 sigma(const PoolingInstance& inst, const FlowVector& y,
                     const QualityVector& alpha_t, const FlowVector& y_t) {
  QualityVector q_t = pool_quality(inst, y_t);
  if (linf_diff(alpha_t.v, q_t.v) > 1e-7)
    throw std::invalid_argument("sigma: alpha_t is not the pool quality of y_t");
  ErrorBeta eb = error_and_beta(inst, y, alpha_t, y_t);
  Tensor3 s(inst.num_pools, inst.num_outputs, inst.num_attributes);
  for (int l = 0; l < inst.num_pools; ++l) {
    if (pool_outflow(inst, y_t, l) <= kOutflowTol) continue;
    for (int a : inst.pool_out[l]) {
      int j = inst.arcs[a].head.index;
      for (int k = 0; k < inst.num_attributes; ++k)
        s(l, j, k) = alpha_t(l, k) * y[a] + eb.beta(l, j) * eb.error(l, k);
    }
  }
  return s;
}

// tau_ljk(y): first-order Taylor expansion of q_lk(y) * y_lj at y_t,
// assembled from the partial derivatives of q (lambda_ik/out on inflow arcs,
// -q/out on outflow arcs). Equal to sigma when alpha_t = q(y_t), but computed
// by a different route, so agreement between the two is a real check.
inline Tensor3 tau(const PoolingInstance& inst, const FlowVector& y, const FlowVector& y_t) {
  QualityVector q_t = pool_quality(inst, y_t);
  Tensor3 tv(inst.num_pools, inst.num_outputs, inst.num_attributes);
  for (int l = 0; l < inst.num_pools; ++l) {
    double out_t = pool_outflow(inst, y_t, l);
    if (out_t <= kOutflowTol) continue;
    for (int k = 0; k < inst.num_attributes; ++k) {
      double dir = 0.0;  // grad q_lk(y_t) . (y - y_t)
      for (int a : inst.pool_in[l])
        dir += inst.input_quality(inst.arcs[a].tail.index, k) / out_t * (y[a] - y_t[a]);
      for (int a : inst.pool_out[l]) dir -= q_t(l, k) / out_t * (y[a] - y_t[a]);
      for (int a : inst.pool_out[l]) {
        int j = inst.arcs[a].head.index;
        tv(l, j, k) = q_t(l, k) * y[a] + y_t[a] * dir;
      }
    }
  }
  return tv;
}

struct ResidualEntry {
  std::string family;  // constraint family tag
  std::string row;     // which node / arc / pair within the family
  double violation;    // nonnegative; equality rows report |lhs - rhs|
};

struct ResidualReport {
  std::vector<ResidualEntry> entries;
  double max_violation = 0.0;

  void add(std::string family, std::string row, double violation) {
    if (violation > max_violation) max_violation = violation;
    entries.push_back({std::move(family), std::move(row), violation});
  }

  double family_max(const std::string& family) const {
    double m = 0.0;
    for (const auto& e : entries)
      if (e.family == family && e.violation > m) m = e.violation;
    return m;
  }
};

namespace detail {

inline void shared_residual_rows(const PoolingInstance& inst, const FlowVector& y,
                                 ResidualReport& rep) {
  for (int l = 0; l < inst.num_pools; ++l) {
    double in = pool_inflow(inst, y, l);
    double out = pool_outflow(inst, y, l);
    rep.add("conservation", node_label({Layer::Pool, l}), std::fabs(in - out));
  }
  for (int i = 0; i < inst.num_inputs; ++i) {
    if (!inst.input_capacity[i]) continue;
    double leaving = 0.0;
    for (int a : inst.input_out[i]) leaving += y[a];
    rep.add("supply", node_label({Layer::Input, i}),
            std::max(0.0, leaving - *inst.input_capacity[i]));
  }
  for (int l = 0; l < inst.num_pools; ++l) {
    if (!inst.pool_capacity[l]) continue;
    rep.add("pool_capacity", node_label({Layer::Pool, l}),
            std::max(0.0, pool_outflow(inst, y, l) - *inst.pool_capacity[l]));
  }
  for (int j = 0; j < inst.num_outputs; ++j) {
    if (!inst.output_capacity[j]) continue;
    double arriving = 0.0;
    for (int a : inst.output_in_direct[j]) arriving += y[a];
    for (int a : inst.output_in_pools[j]) arriving += y[a];
    rep.add("demand", node_label({Layer::Output, j}),
            std::max(0.0, arriving - *inst.output_capacity[j]));
  }
  for (int a = 0; a < inst.num_arcs(); ++a) {
    double v = std::max(0.0, -y[a]);
    if (inst.arc_capacity[a]) v = std::max(v, y[a] - *inst.arc_capacity[a]);
    rep.add("flow_bounds", arc_label(inst.arcs[a]), v);
  }
}

// Output quality rows: lambda^min_jk * inflow <= sum_i lambda_ik y_ij +
// sum_l alpha_lk y_lj <= lambda^max_jk * inflow.
inline void quality_residual_rows(const PoolingInstance& inst, const FlowVector& y,
                                  const QualityVector& alpha, ResidualReport& rep) {
  for (int j = 0; j < inst.num_outputs; ++j) {
    double inflow = 0.0;
    for (int a : inst.output_in_direct[j]) inflow += y[a];
    for (int a : inst.output_in_pools[j]) inflow += y[a];
    for (int k = 0; k < inst.num_attributes; ++k) {
      double lhs = 0.0;
      for (int a : inst.output_in_direct[j])
        lhs += inst.input_quality(inst.arcs[a].tail.index, k) * y[a];
      for (int a : inst.output_in_pools[j])
        lhs += alpha(inst.arcs[a].tail.index, k) * y[a];
      std::string row = node_label({Layer::Output, j}) + " / attribute " + std::to_string(k);
      rep.add("quality_lb", row, std::max(0.0, inst.quality_lb(j, k) * inflow - lhs));
      rep.add("quality_ub", row, std::max(0.0, lhs - inst.quality_ub(j, k) * inflow));
    }
  }
}

}  // namespace detail

// Residuals of the bilinear model at (y, alpha): conservation, the per-pool
// blend identities, node/arc capacities, and output quality bounds.
inline ResidualReport residuals_p(const PoolingInstance& inst, const FlowVector& y,
                                  const QualityVector& alpha) {
  if (y.size() != inst.arcs.size())
    throw std::invalid_argument("residuals_p: flow vector size mismatch");
  if (alpha.rows != inst.num_pools || alpha.cols != inst.num_attributes)
    throw std::invalid_argument("residuals_p: quality shape mismatch");
  ResidualReport rep;
  detail::shared_residual_rows(inst, y, rep);
  for (int l = 0; l < inst.num_pools; ++l) {
    double out = pool_outflow(inst, y, l);
    for (int k = 0; k < inst.num_attributes; ++k) {
      double num = 0.0;
      for (int a : inst.pool_in[l])
        num += inst.input_quality(inst.arcs[a].tail.index, k) * y[a];
      std::string row = node_label({Layer::Pool, l}) + " / attribute " + std::to_string(k);
      rep.add("pool_blend", row, std::fabs(num - alpha(l, k) * out));
    }
  }
  detail::quality_residual_rows(inst, y, alpha, rep);
  return rep;
}

// Residuals of the projected model at y: as residuals_p with alpha = q(y) and
// the blend identities dropped (they hold by construction). Closed pools
// contribute nothing to the quality rows since their q is 0 and their
// outgoing flows are at most kOutflowTol.
inline ResidualReport residuals_f(const PoolingInstance& inst, const FlowVector& y) {
  if (y.size() != inst.arcs.size())
    throw std::invalid_argument("residuals_f: flow vector size mismatch");
  ResidualReport rep;
  detail::shared_residual_rows(inst, y, rep);
  detail::quality_residual_rows(inst, y, pool_quality(inst, y), rep);
  return rep;
}

}  // namespace pooling
