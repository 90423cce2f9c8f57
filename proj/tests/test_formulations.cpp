#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pooling/formulations.hpp"
#include "pooling/instance.hpp"
#include "support/fixtures.hpp"

using namespace pooling;
using testsupport::make_tiny1;

namespace {

FlowVector random_flow(const PoolingInstance& inst, SplitMix64& rng, double lo = 0.0,
                       double hi = 10.0) {
  FlowVector y(inst.arcs.size());
  for (auto& v : y) v = rng.uniform_real(lo, hi);
  return y;
}

// Zero every arc leaving the given pool, making it a zero-outflow pool.
void close_pool(const PoolingInstance& inst, FlowVector& y, int l) {
  for (int a : inst.pool_out[l]) y[a] = 0.0;
}

}  // namespace

TEST_CASE("objective sums weighted arc flows") {
  PoolingInstance t1 = make_tiny1();
  FlowVector zero(t1.arcs.size(), 0.0);
  CHECK(objective(t1, zero) == 0.0);

  FlowVector y = {5.0, 5.0, 10.0};
  CHECK_THAT(objective(t1, y), Catch::Matchers::WithinAbs(35.0, 1e-12));

  FlowVector y2 = {10.0, 10.0, 20.0};
  CHECK_THAT(objective(t1, y2), Catch::Matchers::WithinAbs(70.0, 1e-12));
}

TEST_CASE("pool_quality averages input qualities by flow") {
  PoolingInstance t1 = make_tiny1();

  FlowVector zero(t1.arcs.size(), 0.0);
  QualityVector q0 = pool_quality(t1, zero);
  CHECK(q0(0, 0) == 0.0);

  QualityVector q1 = pool_quality(t1, {2.0, 2.0, 4.0});
  CHECK_THAT(q1(0, 0), Catch::Matchers::WithinAbs(2.0, 1e-12));

  QualityVector q2 = pool_quality(t1, {3.0, 1.0, 4.0});
  CHECK_THAT(q2(0, 0), Catch::Matchers::WithinAbs(2.5, 1e-12));
}

TEST_CASE("error term vanishes at the expansion point") {
  PoolingInstance t1 = make_tiny1();
  FlowVector y_t = {3.0, 1.0, 4.0};
  QualityVector alpha_t = pool_quality(t1, y_t);
  ErrorBeta eb = error_and_beta(t1, y_t, alpha_t, y_t);
  CHECK_THAT(eb.error(0, 0), Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(eb.beta(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-12));  // lone outlet
}

TEST_CASE("error term measures the blend imbalance") {
  PoolingInstance t1 = make_tiny1();
  QualityVector alpha_t(1, 1);
  alpha_t(0, 0) = 2.0;
  FlowVector y_t = {2.0, 2.0, 4.0};
  FlowVector y = {4.0, 0.0, 4.0};
  ErrorBeta eb = error_and_beta(t1, y, alpha_t, y_t);
  CHECK_THAT(eb.error(0, 0), Catch::Matchers::WithinAbs(4.0, 1e-12));  // 12 - 8
}

TEST_CASE("beta rows are stochastic for open pools and zero otherwise") {
  for (uint64_t seed : {11ull, 12ull, 13ull}) {
    PoolingInstance inst = generate_instance(SizeGroup::B, seed);
    SplitMix64 rng(seed * 977);
    FlowVector y_t = random_flow(inst, rng, 0.5, 9.5);
    close_pool(inst, y_t, 1);
    QualityVector alpha_t = pool_quality(inst, y_t);
    ErrorBeta eb = error_and_beta(inst, y_t, alpha_t, y_t);
    for (int l = 0; l < inst.num_pools; ++l) {
      double row = 0.0;
      for (int j = 0; j < inst.num_outputs; ++j) row += eb.beta(l, j);
      if (pool_outflow(inst, y_t, l) > kOutflowTol)
        CHECK_THAT(row, Catch::Matchers::WithinAbs(1.0, 1e-12));
      else
        CHECK(row == 0.0);
    }
  }
}

TEST_CASE("sigma reproduces the hand-expanded value") {
  PoolingInstance t1 = make_tiny1();
  QualityVector alpha_t(1, 1);
  alpha_t(0, 0) = 2.0;
  FlowVector y_t = {2.0, 2.0, 4.0};
  FlowVector y = {4.0, 0.0, 4.0};
  Tensor3 s = sigma(t1, y, alpha_t, y_t);
  CHECK_THAT(s(0, 0, 0), Catch::Matchers::WithinAbs(12.0, 1e-12));

  Tensor3 tv = tau(t1, y, y_t);
  CHECK_THAT(tv(0, 0, 0), Catch::Matchers::WithinAbs(12.0, 1e-12));
}

TEST_CASE("sigma and tau are exact at the base point") {
  PoolingInstance inst = generate_instance(SizeGroup::A, 5);
  SplitMix64 rng(404);
  FlowVector y_t = random_flow(inst, rng, 0.5, 9.5);
  QualityVector alpha_t = pool_quality(inst, y_t);
  Tensor3 s = sigma(inst, y_t, alpha_t, y_t);
  Tensor3 tv = tau(inst, y_t, y_t);
  for (int l = 0; l < inst.num_pools; ++l)
    for (int a : inst.pool_out[l]) {
      int j = inst.arcs[a].head.index;
      for (int k = 0; k < inst.num_attributes; ++k) {
        double expect = alpha_t(l, k) * y_t[a];
        CHECK_THAT(s(l, j, k), Catch::Matchers::WithinAbs(expect, 1e-10));
        CHECK_THAT(tv(l, j, k), Catch::Matchers::WithinAbs(expect, 1e-10));
      }
    }
}

TEST_CASE("closed pools produce all-zero linearizations") {
  PoolingInstance t1 = make_tiny1();
  FlowVector y_t = {0.0, 0.0, 0.0};
  QualityVector alpha_t(1, 1);  // q of the zero flow
  FlowVector y = {4.0, 1.0, 5.0};
  Tensor3 s = sigma(t1, y, alpha_t, y_t);
  Tensor3 tv = tau(t1, y, y_t);
  CHECK(s(0, 0, 0) == 0.0);
  CHECK(tv(0, 0, 0) == 0.0);
}

TEST_CASE("sigma rejects a base quality that is not q(y_t)") {
  PoolingInstance t1 = make_tiny1();
  FlowVector y_t = {2.0, 2.0, 4.0};
  QualityVector wrong(1, 1);
  wrong(0, 0) = 2.5;  // q(y_t) = 2
  CHECK_THROWS_AS(sigma(t1, y_t, wrong, y_t), std::invalid_argument);
}

TEST_CASE("sigma equals tau whenever the base quality comes from the base flow") {
  int checked = 0;
  for (SizeGroup g : {SizeGroup::A, SizeGroup::B, SizeGroup::C}) {
    for (uint64_t s = 0; s < 100; ++s) {
      PoolingInstance inst = generate_instance(g, 1000 + s);
      SplitMix64 rng(s * 31 + static_cast<uint64_t>(g));
      FlowVector y_t = random_flow(inst, rng);
      FlowVector y = random_flow(inst, rng);
      // A third of the triples get pools with exactly zero outflow.
      if (s % 3 == 0) {
        close_pool(inst, y_t, 0);
        if (inst.num_pools > 1 && s % 6 == 0) close_pool(inst, y_t, 1);
      }
      QualityVector alpha_t = pool_quality(inst, y_t);
      Tensor3 sg = sigma(inst, y, alpha_t, y_t);
      Tensor3 tv = tau(inst, y, y_t);
      double worst = 0.0;
      for (size_t idx = 0; idx < sg.v.size(); ++idx) {
        double mag = std::max(std::fabs(sg.v[idx]), std::fabs(tv.v[idx]));
        double rel = std::fabs(sg.v[idx] - tv.v[idx]) / (1.0 + mag);
        worst = std::max(worst, rel);
      }
      CHECK(worst <= 1e-9);
      ++checked;
    }
  }
  CHECK(checked == 300);
}

TEST_CASE("bilinear-model residuals at hand points") {
  PoolingInstance t1 = make_tiny1();
  QualityVector alpha(1, 1);
  alpha(0, 0) = 2.0;

  FlowVector zero(3, 0.0);
  QualityVector alpha0(1, 1);
  CHECK(residuals_p(t1, zero, alpha0).max_violation == 0.0);

  ResidualReport ok = residuals_p(t1, {5.0, 5.0, 10.0}, alpha);
  CHECK(ok.max_violation <= 1e-12);

  ResidualReport bad = residuals_p(t1, {6.0, 4.0, 10.0}, alpha);
  CHECK_THAT(bad.family_max("pool_blend"), Catch::Matchers::WithinAbs(2.0, 1e-12));
}

TEST_CASE("projected-model residuals at hand points") {
  PoolingInstance t1 = make_tiny1();

  FlowVector zero(3, 0.0);
  CHECK(residuals_f(t1, zero).max_violation == 0.0);

  CHECK(residuals_f(t1, {5.0, 5.0, 10.0}).max_violation <= 1e-12);

  ResidualReport bad = residuals_f(t1, {8.0, 2.0, 10.0});
  CHECK_THAT(bad.family_max("quality_ub"), Catch::Matchers::WithinAbs(6.0, 1e-12));
  CHECK_THAT(bad.max_violation, Catch::Matchers::WithinAbs(6.0, 1e-12));
}

TEST_CASE("projected residuals agree with bilinear residuals at alpha = q(y)") {
  for (uint64_t seed : {21ull, 22ull, 23ull, 24ull}) {
    PoolingInstance inst = generate_instance(SizeGroup::B, seed);
    SplitMix64 rng(seed);
    FlowVector y = random_flow(inst, rng, 0.5, 9.5);  // all pool outflows positive
    ResidualReport rf = residuals_f(inst, y);
    ResidualReport rp = residuals_p(inst, y, pool_quality(inst, y));
    CHECK(rp.family_max("pool_blend") <= 1e-9);
    for (const char* fam :
         {"conservation", "supply", "pool_capacity", "demand", "flow_bounds", "quality_lb",
          "quality_ub"}) {
      CHECK_THAT(rf.family_max(fam),
                 Catch::Matchers::WithinAbs(rp.family_max(fam), 1e-12));
    }
  }
}

TEST_CASE("tau's coefficients match finite differences of the quality product") {
  const double h = 1e-5;
  int instances = 0;
  for (SizeGroup g : {SizeGroup::A, SizeGroup::B}) {
    for (uint64_t s = 0; s < 5; ++s) {
      PoolingInstance inst = generate_instance(g, 300 + s);
      SplitMix64 rng(s + 7);
      for (int pt = 0; pt < 20; ++pt) {
        // Stay away from the closed-pool kink so both FD evaluations land on
        // the smooth branch.
        FlowVector y_t = random_flow(inst, rng, 0.5, 8.0);
        Tensor3 base = tau(inst, y_t, y_t);
        for (int l = 0; l < inst.num_pools; ++l) {
          std::vector<int> touching = inst.pool_in[l];
          touching.insert(touching.end(), inst.pool_out[l].begin(), inst.pool_out[l].end());
          for (int b : touching) {
            FlowVector bumped = y_t;
            bumped[b] += 1.0;  // tau is linear: unit step reads off the coefficient
            Tensor3 shifted = tau(inst, bumped, y_t);
            FlowVector plus = y_t, minus = y_t;
            plus[b] += h;
            minus[b] -= h;
            QualityVector qp = pool_quality(inst, plus);
            QualityVector qm = pool_quality(inst, minus);
            for (int a : inst.pool_out[l]) {
              int j = inst.arcs[a].head.index;
              for (int k = 0; k < inst.num_attributes; ++k) {
                double coef = shifted(l, j, k) - base(l, j, k);
                double fd = (qp(l, k) * plus[a] - qm(l, k) * minus[a]) / (2.0 * h);
                double rel = std::fabs(coef - fd) / std::max(std::fabs(fd), 1e-6);
                REQUIRE(rel <= 1e-4);
              }
            }
          }
        }
      }
      ++instances;
    }
  }
  CHECK(instances == 10);
}
