#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pooling/core.hpp"
#include "pooling/formulations.hpp"
#include "pooling/instance.hpp"
#include "pooling/lp.hpp"
#include "pooling/subproblems.hpp"

// Desk-scale global bounds. From above: one LP, the McCormick relaxation of
// every pool-quality product. From below: enumerate pool qualities on a
// grid, solve the flow LP each fixed quality leaves behind, and keep the
// best point that re-certifies against the true model. Gap reporting
// measures the iterative solvers against this pair.

namespace pooling {

struct UnboundedRelaxation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridResult {
  double value = 0.0;  // the zero flow backs every search
  FlowVector flow;
};

struct BoundReport {
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  FlowVector lower_bound_flow;
  int grid_resolution = 0;  // steps per (pool, attribute) axis
};

namespace detail {

// Pool qualities are convex combinations of input qualities, so the range of
// the inputs boxes every alpha.
struct QualityBox {
  std::vector<double> lo, hi;  // per attribute
};

inline QualityBox quality_box(const PoolingInstance& inst) {
  QualityBox box;
  box.lo.assign(inst.num_attributes, 0.0);
  box.hi.assign(inst.num_attributes, 0.0);
  for (int k = 0; k < inst.num_attributes; ++k) {
    for (int i = 0; i < inst.num_inputs; ++i) {
      double q = inst.input_quality(i, k);
      if (i == 0 || q < box.lo[k]) box.lo[k] = q;
      if (i == 0 || q > box.hi[k]) box.hi[k] = q;
    }
  }
  return box;
}

// Tightest cheap upper bound on a pool->output flow: its own arc capacity,
// the pool and output capacities, or the pool's total bounded feed.
inline Bound pool_arc_cap(const PoolingInstance& inst, int a) {
  const Arc& e = inst.arcs[a];
  Bound u;
  auto tighten = [&u](const Bound& c) {
    if (c) u = u ? std::min(*u, *c) : *c;
  };
  tighten(inst.arc_capacity[a]);
  tighten(inst.pool_capacity[e.tail.index]);
  tighten(inst.output_capacity[e.head.index]);
  double feed = 0.0;
  bool bounded = true;
  for (int b : inst.pool_in[e.tail.index]) {
    const Bound& supply = inst.input_capacity[inst.arcs[b].tail.index];
    const Bound& edge = inst.arc_capacity[b];
    if (!supply && !edge) {
      bounded = false;
      break;
    }
    feed += supply && edge ? std::min(*supply, *edge) : (supply ? *supply : *edge);
  }
  if (bounded) tighten(feed);
  return u;
}

}  // namespace detail

// Relax each product alpha_lk * y_lj into a column z boxed by the four
// McCormick planes, with alpha ranging over the input-quality box and y over
// its propagated capacity. Blend and output-quality rows then read z where
// the model reads the product, which makes the whole thing an LP whose value
// can only sit above the true optimum.
inline double mccormick_upper_bound(const PoolingInstance& inst, const lp::Options& opt = {}) {
  detail::QualityBox box = detail::quality_box(inst);
  const int K = inst.num_attributes;

  lp::Problem p;
  detail::add_flow_vars(p, inst);
  int alpha_begin = p.num_vars;
  for (int l = 0; l < inst.num_pools; ++l)
    for (int k = 0; k < K; ++k) p.add_var(0.0, box.lo[k], box.hi[k]);
  auto alpha_col = [&](int l, int k) { return alpha_begin + l * K + k; };

  std::vector<int> zbase(inst.arcs.size(), -1);
  for (int a = 0; a < inst.num_arcs(); ++a) {
    if (inst.arcs[a].tail.layer != Layer::Pool) continue;
    zbase[a] = p.num_vars;
    for (int k = 0; k < K; ++k) p.add_var(0.0, std::nullopt, std::nullopt);
  }

  detail::add_network_rows(p, inst);

  for (int l = 0; l < inst.num_pools; ++l)
    for (int k = 0; k < K; ++k) {
      std::vector<std::pair<int, double>> c;
      for (int b : inst.pool_in[l]) {
        double lam = inst.input_quality(inst.arcs[b].tail.index, k);
        if (lam != 0.0) c.emplace_back(b, lam);
      }
      for (int a : inst.pool_out[l]) c.emplace_back(zbase[a] + k, -1.0);
      p.add_row(lp::Relation::Equal, 0.0, std::move(c));
    }

  for (int j = 0; j < inst.num_outputs; ++j)
    for (int k = 0; k < K; ++k) {
      double lmin = inst.quality_lb(j, k);
      double lmax = inst.quality_ub(j, k);
      std::vector<std::pair<int, double>> lo_row, hi_row;
      for (int a : inst.output_in_direct[j]) {
        double lam = inst.input_quality(inst.arcs[a].tail.index, k);
        if (lam != lmin) lo_row.emplace_back(a, lam - lmin);
        if (lam != lmax) hi_row.emplace_back(a, lam - lmax);
      }
      for (int a : inst.output_in_pools[j]) {
        lo_row.emplace_back(zbase[a] + k, 1.0);
        hi_row.emplace_back(zbase[a] + k, 1.0);
        if (lmin != 0.0) lo_row.emplace_back(a, -lmin);
        if (lmax != 0.0) hi_row.emplace_back(a, -lmax);
      }
      p.add_row(lp::Relation::GreaterEq, 0.0, std::move(lo_row));
      p.add_row(lp::Relation::LessEq, 0.0, std::move(hi_row));
    }

  for (int a = 0; a < inst.num_arcs(); ++a) {
    if (zbase[a] < 0) continue;
    Bound cap = detail::pool_arc_cap(inst, a);
    if (!cap)
      throw UnboundedRelaxation("mccormick: no finite bound on " + arc_label(inst.arcs[a]));
    double yu = *cap;
    int l = inst.arcs[a].tail.index;
    for (int k = 0; k < K; ++k) {
      int z = zbase[a] + k;
      double lo = box.lo[k], hi = box.hi[k];
      auto plane = [&p, z, a](lp::Relation rel, double rhs, double cy, int ac, double ca) {
        std::vector<std::pair<int, double>> c{{z, 1.0}};
        if (cy != 0.0) c.emplace_back(a, cy);
        if (ca != 0.0) c.emplace_back(ac, ca);
        p.add_row(rel, rhs, std::move(c));
      };
      plane(lp::Relation::GreaterEq, 0.0, -lo, 0, 0.0);
      plane(lp::Relation::GreaterEq, -hi * yu, -hi, alpha_col(l, k), -yu);
      plane(lp::Relation::LessEq, 0.0, -hi, 0, 0.0);
      plane(lp::Relation::LessEq, -lo * yu, -lo, alpha_col(l, k), -yu);
    }
  }

  lp::Solution sol = lp::solve(p, opt);
  if (sol.status == lp::Status::Unbounded)
    throw UnboundedRelaxation("mccormick: relaxation is unbounded");
  if (sol.status != lp::Status::Optimal)
    throw std::runtime_error("mccormick: relaxation LP reported infeasible");
  return sol.objective;
}

// Walk a uniform grid over the quality box (endpoints included; a single
// step means the midpoint), solve the flow LP with alpha pinned to the grid
// point, and keep the best optimum that still satisfies the true model after
// alpha is re-derived from the flows. Grid points whose optimum fails that
// re-check are discarded; the zero flow keeps the result a valid lower
// bound. Ties keep the earliest grid point in lexicographic order.
inline GridResult grid_lower_bound(const PoolingInstance& inst, int steps, double budget = 1e6,
                                   const lp::Options& opt = {}) {
  if (steps < 1) throw std::invalid_argument("grid_lower_bound: steps must be positive");
  const int K = inst.num_attributes;
  const int axes = inst.num_pools * K;
  double points = 1.0;
  for (int d = 0; d < axes; ++d) {
    points *= steps;
    if (points > budget)
      throw BudgetExceeded("grid_lower_bound: " + std::to_string(steps) + " steps on " +
                           std::to_string(axes) + " axes exceed the point budget");
  }

  detail::QualityBox box = detail::quality_box(inst);
  GridResult best;
  best.flow.assign(inst.arcs.size(), 0.0);

  QualityVector alpha(inst.num_pools, K);
  std::vector<int> idx(axes, 0);
  std::vector<double> mass;
  for (;;) {
    for (int l = 0; l < inst.num_pools; ++l)
      for (int k = 0; k < K; ++k) {
        int t = idx[l * K + k];
        alpha(l, k) = steps == 1 ? 0.5 * (box.lo[k] + box.hi[k])
                                 : box.lo[k] + t * (box.hi[k] - box.lo[k]) / (steps - 1);
      }

    lp::Problem p;
    detail::add_flow_vars(p, inst);
    detail::add_network_rows(p, inst);
    for (int l = 0; l < inst.num_pools; ++l)
      for (int k = 0; k < K; ++k) {
        std::vector<std::pair<int, double>> c;
        for (int b : inst.pool_in[l]) {
          double lam = inst.input_quality(inst.arcs[b].tail.index, k);
          if (lam != 0.0) c.emplace_back(b, lam);
        }
        if (alpha(l, k) != 0.0)
          for (int a : inst.pool_out[l]) c.emplace_back(a, -alpha(l, k));
        p.add_row(lp::Relation::Equal, 0.0, std::move(c));
      }
    for (int j = 0; j < inst.num_outputs; ++j)
      for (int k = 0; k < K; ++k) {
        mass.assign(inst.arcs.size(), 0.0);
        for (int a : inst.output_in_direct[j])
          mass[a] += inst.input_quality(inst.arcs[a].tail.index, k);
        for (int a : inst.output_in_pools[j]) mass[a] += alpha(inst.arcs[a].tail.index, k);
        detail::emit_quality_rows(p, inst, j, k, mass, 0.0, {}, {});
      }

    lp::Solution sol = lp::solve(p, opt);
    if (sol.status == lp::Status::Optimal && sol.objective > best.value) {
      FlowVector y(sol.x.begin(), sol.x.begin() + inst.num_arcs());
      if (residuals_f(inst, y).max_violation <= 1e-6) {
        best.value = sol.objective;
        best.flow = std::move(y);
      }
    }

    int d = axes - 1;
    while (d >= 0 && ++idx[d] == steps) idx[d--] = 0;
    if (d < 0) break;
  }
  return best;
}

inline BoundReport compute_bounds(const PoolingInstance& inst, int steps, double budget = 1e6,
                                  const lp::Options& opt = {}) {
  BoundReport rep;
  rep.upper_bound = mccormick_upper_bound(inst, opt);
  GridResult g = grid_lower_bound(inst, steps, budget, opt);
  rep.lower_bound = g.value;
  rep.lower_bound_flow = std::move(g.flow);
  rep.grid_resolution = steps;
  return rep;
}

}  // namespace pooling
