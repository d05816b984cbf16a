#include "momentcert/oracle.hpp"

#include <random>

#include <gtest/gtest.h>

#include "momentcert/certificates.hpp"
#include "test_specs.hpp"

namespace momentcert {
namespace {

using testing::corollary3;
using testing::example1;
using testing::example2;

Vector vec(std::initializer_list<double> v) { return to_vector(std::vector<double>(v)); }

TEST(DpValueOriginal, ExampleOne) {
  const auto dp = dp_value_original(example1());
  EXPECT_NEAR(dp.value, -0.25, 1e-2);
  ASSERT_EQ(dp.controls.size(), 20u);
  for (const auto& u : dp.controls) EXPECT_NEAR(u[0], -0.5, 1e-12);
}

TEST(DpValueOriginal, ZeroCost) {
  auto sp = example1();
  sp.c = testing::constant_vector({0.0, 0.0});
  EXPECT_EQ(dp_value_original(sp).value, 0.0);
}

TEST(DpValueOriginal, ExampleTwoPointwiseMinimum) {
  EXPECT_NEAR(dp_value_original(example2()).value, 0.25 + 0.125, 1e-12);
}

TEST(DpValueOriginal, RejectsTwoStates) {
  EXPECT_THROW(dp_value_original(corollary3()), InputError);
}

TEST(DpValueOriginal, RangeWithoutInitialStateIsRejected) {
  DPConfig cfg;
  cfg.state_range = std::make_pair(1.0, 2.0);
  EXPECT_THROW(dp_value_original(example1(), cfg), InputError);
}

TEST(DpValueOriginal, StateDependentCostMatchesRelaxedSolver) {
  // cost x u + u^2 couples state and control.
  auto sp = example1();
  sp.c = [](const Vector& x) { return vec({x[0], 1.0}); };
  sp.x0 = vec({0.5});
  const auto dp = dp_value_original(sp);
  SolverOptions opt;
  opt.starts = 6;
  const auto r = solve_relaxed(sp, 20, opt);
  EXPECT_LE(r.cost, dp.value + 1e-6);
  EXPECT_NEAR(r.cost, dp.value, 1e-2 * (1 + std::abs(dp.value)));
}

TEST(ConstrainedMinOverLambda, ExampleOneSection) {
  const auto r = constrained_min_over_lambda(vec({1, 1}), Matrix(vec({2, 1}).transpose()), vec({1.25}),
                                             ControlBasis::power1d(2), CompactControlSet::interval(-1, 1));
  ASSERT_EQ(r.minimizers.size(), 1u);
  EXPECT_NEAR(r.value, 0.75, 1e-12);
  EXPECT_NEAR(r.minimizers[0].m[0], 0.5, 1e-12);
  EXPECT_NEAR(r.minimizers[0].distance_to_L, 0.0, 1e-12);
}

TEST(ConstrainedMinOverLambda, ExtremeSectionIsSinglePoint) {
  const auto K = CompactControlSet::interval(-1, 1);
  const auto basis = ControlBasis::power1d(2);
  const auto r = constrained_min_over_lambda(vec({1, 1}), Matrix(vec({2, 1}).transpose()), vec({3.0}), basis, K);
  ASSERT_EQ(r.minimizers.size(), 1u);
  EXPECT_LE((r.minimizers[0].m - phi_eval(basis, 1.0)).norm(), 1e-12);
}

TEST(ConstrainedMinOverLambda, FailingPairHasChordMinimizer) {
  const auto K = CompactControlSet::interval(-1, 1);
  const Vector c = vec({2, 1}), q = vec({1, 2});
  ASSERT_EQ(p2_check(c, q, K).verdict, Verdict::fail);
  const auto r = constrained_min_over_lambda(c, Matrix(q.transpose()), vec({2.0}), ControlBasis::power1d(2), K);
  double worst = 0.0;
  for (const auto& m : r.minimizers) worst = std::max(worst, m.distance_to_L);
  EXPECT_GT(worst, 0.1);
}

TEST(ConstrainedMinOverLambda, InfeasibleTargetThrows) {
  EXPECT_THROW(constrained_min_over_lambda(vec({1, 1}), Matrix(vec({2, 1}).transpose()), vec({10.0}),
                                           ControlBasis::power1d(2), CompactControlSet::interval(-1, 1)),
               InfeasibleError);
}

TEST(ConstrainedMinOverLambda, CorollaryThreeMinimizersOnCurve) {
  const auto sp = corollary3();
  const Vector x = vec({0, 0});
  const auto basis = sp.basis;
  for (const auto& u : {vec({0.25, 0.75}), vec({0.5, 0.5}), vec({1.0, 0.0})}) {
    const Vector xi = sp.Q(x) * phi_eval(basis, u);
    const auto r = constrained_min_over_lambda(sp.c(x), sp.Q(x), xi, basis, sp.K);
    EXPECT_TRUE(r.capped);
    for (const auto& m : r.minimizers) EXPECT_LE(m.distance_to_L, 2.0 * r.grid_spacing);
  }
}

TEST(UniqueArgminG, Examples) {
  const auto basis = ControlBasis::power1d(2);
  const auto K = CompactControlSet::interval(-1, 1);
  const auto a = unique_argmin_g(vec({-2, 1}), vec({1, 2}), basis, K, 0.0);
  EXPECT_EQ(a.clusters, 1);
  // g is flat to second order at t = 1, so refined points within 1e-8 tie.
  EXPECT_NEAR(a.points.front(), 1.0, 1e-6);
  EXPECT_EQ(a.points.back(), 1.0);
  const auto b = unique_argmin_g(vec({-2, 1}), vec({1, 2}), basis, K, 1.0);
  EXPECT_EQ(b.clusters, 1);
  EXPECT_NEAR(b.points.front(), 1.0 / 6.0, 1e-6);
  EXPECT_LE(b.diameter_cells, 2.0);
  const auto c = unique_argmin_g(vec({1, 0}), vec({0, 1}), basis, K, 0.0);
  EXPECT_EQ(c.points, std::vector<double>{-1.0});
}

TEST(UniqueArgminG, ConstantFunctionSpansK) {
  const auto r = unique_argmin_g(vec({1, 2}), vec({1, 2}), ControlBasis::power1d(2),
                                 CompactControlSet::interval(-1, 1), -1.0);
  EXPECT_EQ(r.diameter_cells, 2000.0);
}

TEST(UniqueArgminG, FailingPairHasTwoClustersAtWitness) {
  const auto K = CompactControlSet::interval(-1, 1);
  const auto cert = p2_check(vec({2, 1}), vec({1, 2}), K);
  ASSERT_EQ(cert.verdict, Verdict::fail);
  const double eta = cert.witness->values.at("eta")[0];
  const auto r = unique_argmin_g(vec({2, 1}), vec({1, 2}), ControlBasis::power1d(2), K, eta);
  EXPECT_EQ(r.clusters, 2);
}

TEST(OrientorConvexityProbe, ExampleOneIsConvex) {
  const auto r = orientor_convexity_probe(example1(), vec({0}));
  EXPECT_TRUE(r.convex);
  EXPECT_NEAR(r.xi_lower, -1.0, 1e-12);
  EXPECT_NEAR(r.xi_upper, 3.0, 1e-12);
  // On the u2 branch c u + u^2 = xi + (c - q) u, so the lower boundary is
  // xi + ((q - c)/2)(q - sqrt(q^2 + 4 xi)) with q = 2, c = 1.
  for (std::size_t i = 0; i < r.xi.size(); ++i) {
    EXPECT_NEAR(r.boundary[i], r.xi[i] + 0.5 * (2.0 - std::sqrt(4.0 + 4.0 * r.xi[i])), 1e-9);
  }
}

TEST(OrientorConvexityProbe, ParallelCoefficientsGiveLinearBoundary) {
  const auto r = orientor_convexity_probe(example1(2.0, 2.0), vec({0}));
  EXPECT_TRUE(r.convex);
  for (std::size_t i = 0; i < r.xi.size(); ++i) EXPECT_NEAR(r.boundary[i], r.xi[i], 1e-12);
}

TEST(OrientorConvexityProbe, BranchSwitchIsNonconvex) {
  // Example 2 dynamics with q < 0: Q . phi is not monotone on K and the
  // cheapest root switches branch.
  const auto r = orientor_convexity_probe(example2(1.0, -1.5), vec({0}));
  EXPECT_FALSE(r.convex);
  ASSERT_TRUE(r.witness_xi.has_value());
  const auto& v = *r.witness_value;
  EXPECT_LT(v[0] - 2 * v[1] + v[2], -1e-9);
}

TEST(OrientorConvexityProbe, RejectsMultiDimensional) {
  EXPECT_THROW(orientor_convexity_probe(corollary3(), vec({0, 0})), InputError);
}

// For p2-certified pairs every multiplier gives one minimizer cluster.
TEST(DualityLink, CertifiedPairsHaveUniqueMinimizers) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(-2, 2);
  const auto K = CompactControlSet::interval(-1, 1);
  int certified = 0;
  while (certified < 25) {
    const Vector c = vec({U(rng), U(rng)}), q = vec({U(rng), U(rng)});
    if (p2_check(c, q, K).verdict != Verdict::pass) continue;
    ++certified;
    for (double eta : linspace(-10, 10, 41)) {
      const auto r = unique_argmin_g(c, q, ControlBasis::power1d(2), K, eta);
      EXPECT_EQ(r.clusters, 1);
      EXPECT_LE(r.diameter_cells, 2.0);
    }
  }
}

TEST(AssumptionOne, CertifiedExampleMinimizersOnCurve) {
  const auto K = CompactControlSet::interval(-1, 1);
  const auto basis = ControlBasis::power1d(2);
  for (double xi : linspace(-1, 3, 20)) {
    const auto r = constrained_min_over_lambda(vec({1, 1}), Matrix(vec({2, 1}).transpose()), vec({xi}), basis, K);
    for (const auto& m : r.minimizers) EXPECT_LE(m.distance_to_L, r.grid_spacing) << "xi " << xi;
  }
}

}  // namespace
}  // namespace momentcert
