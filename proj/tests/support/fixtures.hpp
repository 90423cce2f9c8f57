#pragma once

#include "pooling/instance.hpp"

// Shared hand-built instances with independently derived expected values.
// Every frozen constant below was worked out on paper (vertex enumeration or
// direct algebra) before the solver code existed; they anchor the tests.

namespace testsupport {

using pooling::Arc;
using pooling::Layer;
using pooling::Matrix;
using pooling::PoolingInstance;

// Two inputs (quality 3 at unit cost 1, quality 1 at unit cost 2) feed one
// pool; the pool sells to one output at unit price 5 with blend quality
// capped at 2 and demand capped at 10. Flow variables in canonical arc
// order: a = in0->pool, b = in1->pool, out = pool->out.
//
//   maximize  -a - 2b + 5 out   s.t.  a + b = out, out <= 10,
//                                     (3a + b) / out <= 2 when out > 0.
//
// Without the quality row the vertices of {a+b=out, out<=10, all >= 0} are
// (0,0,0), (10,0,10), (0,10,10) with objectives 0, 40, 30: flow relaxation
// optimum 40. With it, 3a+b <= 2(a+b) forces a <= b, so maximize 4a+3b
// subject to a <= b, a+b <= 10: optimum a = b = 5, objective 35, blend
// exactly 2.
inline PoolingInstance make_tiny1() {
  PoolingInstance inst;
  inst.num_inputs = 2;
  inst.num_pools = 1;
  inst.num_outputs = 1;
  inst.num_attributes = 1;
  auto arc = [&inst](Layer tl, int ti, Layer hl, int hi, double w) {
    inst.arcs.push_back({{tl, ti}, {hl, hi}});
    inst.arc_weight.push_back(w);
    inst.arc_capacity.push_back(std::nullopt);
  };
  arc(Layer::Input, 0, Layer::Pool, 0, -1.0);
  arc(Layer::Input, 1, Layer::Pool, 0, -2.0);
  arc(Layer::Pool, 0, Layer::Output, 0, 5.0);
  inst.input_capacity.assign(2, std::nullopt);
  inst.pool_capacity.assign(1, std::nullopt);
  inst.output_capacity = {10.0};
  inst.input_quality = Matrix(2, 1);
  inst.input_quality(0, 0) = 3.0;
  inst.input_quality(1, 0) = 1.0;
  inst.quality_lb = Matrix(1, 1, 0.0);
  inst.quality_ub = Matrix(1, 1, 2.0);
  inst.finalize();
  return inst;
}

inline constexpr double kTiny1FlowRelaxationOptimum = 40.0;  // vertex (10,0,10)
inline constexpr double kTiny1GlobalOptimum = 35.0;          // a=b=5, out=10
inline constexpr double kTiny1OptimalBlend = 2.0;

// Same network but the blend cap is far above any input quality, so the
// quality rows can never bind and the flow relaxation optimum is the global
// optimum (40 at (10,0,10), which is the unique maximizer of 4a+3b on the
// simplex a+b<=10).
inline PoolingInstance make_tiny1_loose_quality() {
  PoolingInstance inst = make_tiny1();
  inst.quality_ub(0, 0) = 100.0;
  return inst;
}

// TINY1 plus a second pool and a direct input->output arc, for exercising
// adjacency bookkeeping and builders on non-trivial shapes. Pool 1 only
// receives the low-quality input. Direct arc in0->out0 weight 4.
inline PoolingInstance make_two_pools() {
  PoolingInstance inst;
  inst.num_inputs = 2;
  inst.num_pools = 2;
  inst.num_outputs = 1;
  inst.num_attributes = 1;
  auto arc = [&inst](Layer tl, int ti, Layer hl, int hi, double w) {
    inst.arcs.push_back({{tl, ti}, {hl, hi}});
    inst.arc_weight.push_back(w);
    inst.arc_capacity.push_back(std::nullopt);
  };
  arc(Layer::Input, 0, Layer::Pool, 0, -1.0);
  arc(Layer::Input, 1, Layer::Pool, 0, -2.0);
  arc(Layer::Input, 1, Layer::Pool, 1, -2.0);
  arc(Layer::Input, 0, Layer::Output, 0, 4.0);
  arc(Layer::Pool, 0, Layer::Output, 0, 5.0);
  arc(Layer::Pool, 1, Layer::Output, 0, 5.0);
  inst.input_capacity.assign(2, std::nullopt);
  inst.pool_capacity.assign(2, std::nullopt);
  inst.output_capacity = {10.0};
  inst.input_quality = Matrix(2, 1);
  inst.input_quality(0, 0) = 3.0;
  inst.input_quality(1, 0) = 1.0;
  inst.quality_lb = Matrix(1, 1, 0.0);
  inst.quality_ub = Matrix(1, 1, 2.0);
  inst.finalize();
  return inst;
}

// An instance where a dry-pool start permanently seals the pool for the
// bilinear-model linearization. Input 0 (quality 3) sells directly at net
// 4/unit; input 1 (quality 1) can only move through the pool at net -1/unit
// (buy at 2, sell at 1). Demand 10, blend cap 2.
//
// Flow relaxation: the pool route loses money, so every exact optimum ships
// 10 units direct, objective 40, pool closed.
// True optimum: direct flow alone violates the cap (3 > 2); blending yA
// direct with yB through the pool needs 3yA + yB <= 2(yA + yB), i.e.
// yA <= yB. Maximize 4yA - yB on yA + yB <= 10: yA = yB = 5, objective 15.
// Were the iteration started with the pool dry (base quality 0), the
// bilinear blend row would collapse to y_{in1,pool} = 0 and the output row
// to 3yA <= 2yA, freezing that scheme at zero flow for good. The starting
// point therefore spends a tolerance-sized slice of the relaxation optimum
// to push a trickle through the pool, which prices the pool route into the
// first linearization and lets every scheme reach (yA, yB) = (5, 5).
inline PoolingInstance make_blocking() {
  PoolingInstance inst;
  inst.num_inputs = 2;
  inst.num_pools = 1;
  inst.num_outputs = 1;
  inst.num_attributes = 1;
  auto arc = [&inst](Layer tl, int ti, Layer hl, int hi, double w) {
    inst.arcs.push_back({{tl, ti}, {hl, hi}});
    inst.arc_weight.push_back(w);
    inst.arc_capacity.push_back(std::nullopt);
  };
  arc(Layer::Input, 1, Layer::Pool, 0, -2.0);
  arc(Layer::Input, 0, Layer::Output, 0, 4.0);
  arc(Layer::Pool, 0, Layer::Output, 0, 1.0);
  inst.input_capacity.assign(2, std::nullopt);
  inst.pool_capacity.assign(1, std::nullopt);
  inst.output_capacity = {10.0};
  inst.input_quality = Matrix(2, 1);
  inst.input_quality(0, 0) = 3.0;
  inst.input_quality(1, 0) = 1.0;
  inst.quality_lb = Matrix(1, 1, 0.0);
  inst.quality_ub = Matrix(1, 1, 2.0);
  inst.finalize();
  return inst;
}

inline constexpr double kBlockingRelaxationOptimum = 40.0;  // all direct
inline constexpr double kBlockingGlobalOptimum = 15.0;      // yA = yB = 5

}  // namespace testsupport
