#include <catch2/catch_amalgamated.hpp>

#include "pooling/core.hpp"
#include "pooling/lp.hpp"
#include "support/vertex_enum.hpp"

using namespace pooling;
using namespace pooling::lp;

namespace {

// Random boxed LP: n <= 6 vars, <= 6 rows, small integer data so that ties
// and degeneracy show up constantly. All variables are boxed, which keeps
// the vertex oracle sound (compact feasible set).
Problem random_boxed_lp(SplitMix64& rng) {
  Problem p;
  int n = rng.uniform_int(1, 6);
  for (int j = 0; j < n; ++j) {
    double lb = static_cast<double>(rng.uniform_int(-2, 1));
    double ub = lb + static_cast<double>(rng.uniform_int(1, 5));
    p.add_var(static_cast<double>(rng.uniform_int(-3, 4)), lb, ub);
  }
  int rows = rng.uniform_int(0, 6);
  // half the time pick rhs so a random box point is feasible
  std::vector<double> anchor(n);
  for (int j = 0; j < n; ++j)
    anchor[j] = *p.lower[j] + (*p.upper[j] - *p.lower[j]) *
                                  (rng.uniform_int(0, 4) / 4.0);
  for (int r = 0; r < rows; ++r) {
    std::vector<std::pair<int, double>> coeffs;
    double lhs_at_anchor = 0.0;
    for (int j = 0; j < n; ++j) {
      if (rng.uniform_int(0, 9) < 7) {
        double a = static_cast<double>(rng.uniform_int(-2, 3));
        if (a == 0.0) continue;
        coeffs.push_back({j, a});
        lhs_at_anchor += a * anchor[j];
      }
    }
    if (coeffs.empty()) coeffs.push_back({rng.uniform_int(0, n - 1), 1.0});
    int relpick = rng.uniform_int(0, 2);
    Relation rel = relpick == 0   ? Relation::LessEq
                   : relpick == 1 ? Relation::GreaterEq
                                  : Relation::Equal;
    double rhs = rng.uniform_int(0, 1) == 0
                     ? lhs_at_anchor
                     : static_cast<double>(rng.uniform_int(-4, 6));
    p.add_row(rel, rhs, std::move(coeffs));
  }
  return p;
}

}  // namespace

TEST_CASE("single variable at its upper bound") {
  Problem p;
  p.add_var(1.0, 0.0, 1.0);
  Solution s = solve(p);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.x[0] == Catch::Approx(1.0));
  CHECK(s.objective == Catch::Approx(1.0));
}

TEST_CASE("one binding row, two unbounded-above variables") {
  Problem p;
  p.add_var(1.0, 0.0, std::nullopt);
  p.add_var(1.0, 0.0, std::nullopt);
  p.add_row(Relation::LessEq, 2.0, {{0, 1.0}, {1, 1.0}});
  Solution s = solve(p);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.objective == Catch::Approx(2.0));
  CHECK(s.duals[0] >= 0.0);
}

TEST_CASE("contradictory constraints are infeasible") {
  Problem p;
  p.add_var(1.0, 0.0, std::nullopt);
  p.add_row(Relation::LessEq, -1.0, {{0, 1.0}});
  Solution s = solve(p);
  REQUIRE(s.status == Status::Infeasible);
  CHECK(s.phase1_infeasibility > 0.0);
}

TEST_CASE("improving ray is reported unbounded") {
  Problem p;
  p.add_var(1.0, 0.0, std::nullopt);
  Solution s = solve(p);
  REQUIRE(s.status == Status::Unbounded);
}

TEST_CASE("duals carry the maximization sign convention") {
  SECTION("binding <= rows get nonnegative duals") {
    Problem p;
    p.add_var(3.0, 0.0, std::nullopt);
    p.add_var(2.0, 0.0, std::nullopt);
    p.add_row(Relation::LessEq, 4.0, {{0, 1.0}, {1, 1.0}});
    p.add_row(Relation::LessEq, 2.0, {{0, 1.0}});
    Solution s = solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == Catch::Approx(10.0));
    CHECK(s.duals[0] == Catch::Approx(2.0));
    CHECK(s.duals[1] == Catch::Approx(1.0));
  }
  SECTION("binding >= rows get nonpositive duals") {
    Problem p;
    p.add_var(-1.0, 0.0, std::nullopt);
    p.add_row(Relation::GreaterEq, 1.0, {{0, 1.0}});
    Solution s = solve(p);
    REQUIRE(s.status == Status::Optimal);
    CHECK(s.objective == Catch::Approx(-1.0));
    CHECK(s.duals[0] == Catch::Approx(-1.0));
  }
}

TEST_CASE("equality rows and finite boxes") {
  Problem p;
  p.add_var(1.0, 0.0, 2.0);
  p.add_var(2.0, 0.0, 2.0);
  p.add_row(Relation::Equal, 3.0, {{0, 1.0}, {1, 1.0}});
  Solution s = solve(p);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.objective == Catch::Approx(5.0));
  CHECK(s.x[0] == Catch::Approx(1.0));
  CHECK(s.x[1] == Catch::Approx(2.0));
}

TEST_CASE("free variables move in either direction") {
  Problem p;
  int x = p.add_var(0.0, 0.0, std::nullopt);
  int a = p.add_var(-1.0, std::nullopt, std::nullopt);      // free column
  p.add_row(Relation::Equal, 4.0, {{x, 1.0}, {a, -1.0}});   // a = x - 4
  p.add_row(Relation::LessEq, 1.0, {{x, 1.0}});
  // maximize -a => drive a negative: x = 0, a = -4
  Solution s = solve(p);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.x[a] == Catch::Approx(-4.0));
  CHECK(s.objective == Catch::Approx(4.0));
}

TEST_CASE("bound flips reach box corners") {
  Problem p;
  p.add_var(1.0, 0.0, 0.4);
  p.add_var(1.0, 0.0, 0.4);
  p.add_row(Relation::LessEq, 1.0, {{0, 1.0}, {1, 1.0}});
  Solution s = solve(p);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.objective == Catch::Approx(0.8));
}

TEST_CASE("redundant duplicate rows do not break the basis") {
  Problem p;
  p.add_var(1.0, 0.0, 5.0);
  p.add_var(1.0, 0.0, 5.0);
  p.add_row(Relation::Equal, 4.0, {{0, 1.0}, {1, 1.0}});
  p.add_row(Relation::Equal, 4.0, {{0, 1.0}, {1, 1.0}});
  Solution s = solve(p);
  REQUIRE(s.status == Status::Optimal);
  CHECK(s.objective == Catch::Approx(4.0));
}

TEST_CASE("agreement with the vertex oracle on a 200 LP corpus") {
  SplitMix64 rng(0xC0FFEEu);
  int optimal_seen = 0, infeasible_seen = 0;
  for (int t = 0; t < 200; ++t) {
    Problem p = random_boxed_lp(rng);
    testsupport::VertexOracleResult ref = testsupport::enumerate_optimum(p);
    Solution s = solve(p);
    INFO("corpus case " << t);
    if (ref.feasible) {
      REQUIRE(s.status == Status::Optimal);
      REQUIRE(s.objective == Catch::Approx(ref.objective).margin(1e-8));
      AuditReport a = audit(p, s);
      CHECK(a.primal_violation <= 1e-7);
      CHECK(a.dual_violation <= 1e-6);
      CHECK(a.gap_rel <= 1e-7);
      CHECK(a.cs_rel_violation <= 1e-7);
      ++optimal_seen;
    } else {
      REQUIRE(s.status == Status::Infeasible);
      ++infeasible_seen;
    }
  }
  // the corpus must actually exercise both outcomes
  CHECK(optimal_seen >= 100);
  CHECK(infeasible_seen >= 20);
}

TEST_CASE("Bland's rule terminates within the pivot budget") {
  SplitMix64 rng(0xB1A2Du);
  Options opt;
  opt.bland_only = true;
  for (int t = 0; t < 100; ++t) {
    Problem p = random_boxed_lp(rng);
    Solution s = solve(p, opt);
    long budget = 50L * (p.num_vars + static_cast<long>(p.rows.size()));
    INFO("case " << t << " pivots " << s.pivots << " budget " << budget);
    CHECK(s.pivots <= std::max(budget, 50L));
  }
}

TEST_CASE("lp text dump names variables and rows") {
  Problem p;
  p.add_var(5.0, 0.0, 10.0);
  p.add_var(0.0, std::nullopt, std::nullopt);
  p.add_row(Relation::LessEq, 2.0, {{0, 1.0}, {1, -1.0}});
  std::ostringstream os;
  write_lp_text(p, {"flow_a", "alpha_b"}, os);
  std::string text = os.str();
  CHECK(text.find("Maximize") != std::string::npos);
  CHECK(text.find("flow_a") != std::string::npos);
  CHECK(text.find("alpha_b free") != std::string::npos);
  CHECK(text.find("<= 2") != std::string::npos);
}
