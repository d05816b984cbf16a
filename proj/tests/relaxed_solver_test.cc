#include "momentcert/relaxed_solver.hpp"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "momentcert/oracle.hpp"
#include "test_specs.hpp"

namespace momentcert {
namespace {

using testing::chord_forcing;
using testing::corollary3;
using testing::example1;
using testing::example2;

Vector vec(std::initializer_list<double> v) { return to_vector(std::vector<double>(v)); }

TEST(IntegrateState, ConstantRightHandSide) {
  const auto sp = example1();
  const std::vector<MomentVector> path(20, vec({0.5, 0.25}));
  const auto r = integrate_state(sp, path);
  EXPECT_NEAR(r.states.back()[0], 1.25, 1e-14);
  EXPECT_NEAR(r.times.back(), 1.0, 0.0);
  EXPECT_EQ(r.states.size(), 21u);
}

TEST(IntegrateState, ZeroControlLeavesStateAndCost) {
  auto sp = example1();
  sp.x0 = vec({0.7});
  const auto r = integrate_state(sp, std::vector<MomentVector>(10, phi_eval(sp.basis, 0.0)));
  for (const auto& x : r.states) EXPECT_EQ(x[0], 0.7);
  EXPECT_EQ(r.cost(), 0.0);
}

TEST(IntegrateState, ConstantCostIsIntegratedExactly) {
  const auto sp = example1();
  const auto r = integrate_state(sp, std::vector<MomentVector>(20, vec({-0.5, 0.25})));
  EXPECT_NEAR(r.cost(), -0.25, 1e-14);
}

TEST(IntegrateState, PrefixRestartMatchesFullRun) {
  const auto sp = chord_forcing();
  std::vector<MomentVector> path;
  for (int k = 0; k < 10; ++k) path.push_back(vec({0.1 * k - 0.4, 0.5}));
  const auto full = integrate_state(sp, path);
  path[6] = vec({0.9, 0.85});
  const auto restarted = integrate_state(sp, path, &full, 6);
  const auto fresh = integrate_state(sp, path);
  EXPECT_DOUBLE_EQ(restarted.cost(), fresh.cost());
  EXPECT_DOUBLE_EQ(restarted.states.back()[0], fresh.states.back()[0]);
}

TEST(IntegrateState, BlowUpIsDivergence) {
  auto sp = example1();
  sp.x0 = vec({1.0});
  sp.T = 2.0;
  sp.Q0 = [](const Vector& x) { return Vector(x.array().square()); };
  sp.divergence_bound = 1e6;
  EXPECT_THROW(integrate_state(sp, std::vector<MomentVector>(200, vec({0, 0}))), DivergenceError);
}

TEST(Validate, RejectsBadSpecs) {
  auto sp = example1();
  sp.T = 0.0;
  EXPECT_THROW(validate(sp), InputError);
  sp = example1();
  sp.Q = testing::constant_row({1.0, 2.0, 3.0});
  EXPECT_THROW(validate(sp), DimensionError);
  sp = example1();
  sp.c = [](const Vector& x) { return Vector(Vector::Constant(2, 1.0 / x[0])); };
  EXPECT_THROW(validate(sp), InputError);
}

TEST(EvalDensity, ExampleOneSections) {
  const auto sp = example1();
  const auto a = eval_density(sp, vec({0}), vec({1.25}));
  EXPECT_NEAR(a.value, 0.75, 1e-12);
  EXPECT_NEAR(a.m[0], 0.5, 1e-12);
  EXPECT_NEAR(a.m[1], 0.25, 1e-12);
  const auto b = eval_density(sp, vec({0}), vec({0.0}));
  EXPECT_NEAR(b.value, 0.0, 1e-12);
  EXPECT_NEAR(b.m.norm(), 0.0, 1e-12);
}

TEST(EvalDensity, InfeasibleReportsAttainableRange) {
  const auto sp = example1();
  try {
    eval_density(sp, vec({0}), vec({10.0}));
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NEAR(e.attainable_lower()[0], -1.0, 1e-9);
    EXPECT_NEAR(e.attainable_upper()[0], 3.0, 1e-12);
  }
  EXPECT_THROW(eval_density(example2(), vec({0}), vec({-1.0})), InfeasibleError);
}

TEST(EvalDensity, ClosedFormAgreesWithExhaustiveSearch) {
  for (const auto& sp : {example1(), example1(3.0, 2.0), example1(-2.0, 0.5)}) {
    const Vector c = sp.c(vec({0})), q = sp.Q(vec({0})).row(0).transpose();
    for (double u : linspace(-1, 1, 9)) {
      const double xi = q.dot(phi_eval(sp.basis, u));
      const auto d = eval_density(sp, vec({0}), vec({xi}));
      const auto brute = constrained_min_over_lambda(c, q.transpose(), vec({xi}), sp.basis, sp.K);
      EXPECT_NEAR(d.value, brute.value, 1e-3) << "xi " << xi;
      EXPECT_LE(d.value, brute.value + 1e-9);
    }
  }
}

// eval_density(x, Q(x) phi(u)) never exceeds c(x) . phi(u).
TEST(EvalDensity, NeverAboveClassicalCost) {
  for (const auto& sp : {example1(), example1(3.0, 2.0), example2(), example2(3.0, -1.5), chord_forcing()}) {
    for (double x : {-0.5, 0.0, 0.8}) {
      const Vector xv = vec({x});
      const Vector c = sp.c(xv);
      const Matrix Q = sp.Q(xv);
      for (double u : linspace(sp.K.lower(0), sp.K.upper(0), 101)) {
        const Vector p = phi_eval(sp.basis, u);
        const auto d = eval_density(sp, xv, Q * p);
        EXPECT_LE(d.value, c.dot(p) + 1e-9) << "u " << u;
      }
    }
  }
  const auto cor = corollary3();
  for (const auto& u : control_grid(cor.K, 5)) {
    const Vector p = phi_eval(cor.basis, u);
    const auto d = eval_density(cor, vec({0, 0}), cor.Q(vec({0, 0})) * p);
    EXPECT_LE(d.value, cor.c(vec({0, 0})).dot(p) + 1e-9);
  }
}

SolverOptions quick(int starts = 6) {
  SolverOptions o;
  o.starts = starts;
  return o;
}

TEST(SolveRelaxed, ExampleOneFindsDiracAtMinusHalf) {
  const auto sp = example1();
  SolverOptions opt;
  const auto r = solve_relaxed(sp, 20, opt);
  EXPECT_NEAR(r.cost, -0.25, 1e-3);
  ASSERT_EQ(r.moments.size(), 20u);
  for (std::size_t k = 0; k < r.moments.size(); ++k) {
    EXPECT_LE(r.distance_to_L[k], 1e-4);
    EXPECT_NEAR(r.moments[k][0], -0.5, 1e-2);
  }
  const auto ex = extract_classical(sp, r, 1e-4);
  ASSERT_TRUE(ex.success);
  for (const auto& u : ex.controls) EXPECT_NEAR(u[0], -0.5, 1e-2);
  EXPECT_NEAR(ex.classical_cost, r.cost, 1e-3);
}

TEST(SolveRelaxed, NonnegativeObjectiveReachesZero) {
  // c . m = m2 >= 0 on Lambda and phi(0) = 0.
  auto sp = example1();
  sp.c = testing::constant_vector({0.0, 1.0});
  const auto r = solve_relaxed(sp, 8, quick());
  EXPECT_NEAR(r.cost, 0.0, 1e-8);
  EXPECT_GE(r.cost, -1e-12);
}

TEST(SolveRelaxed, ExampleTwoBelowDynamicProgramming) {
  const auto sp = example2();
  const auto r = solve_relaxed(sp, 20, quick());
  const auto dp = dp_value_original(sp);
  EXPECT_LE(r.cost, dp.value + 1e-6);
  EXPECT_NEAR(r.cost, 0.375, 1e-6);
  EXPECT_TRUE(extract_classical(sp, r, 1e-4).success);
}

TEST(SolveRelaxed, DeterministicAcrossThreadCounts) {
  const auto sp = chord_forcing();
  SolverOptions a = quick(5), b = quick(5);
  a.seed = b.seed = 42;
  a.threads = 1;
  b.threads = 3;
  const auto ra = solve_relaxed(sp, 6, a), rb = solve_relaxed(sp, 6, b);
  EXPECT_EQ(ra.cost, rb.cost);
  EXPECT_EQ(ra.best_start, rb.best_start);
  for (std::size_t k = 0; k < ra.moments.size(); ++k) EXPECT_EQ(ra.moments[k], rb.moments[k]);
}

TEST(SolveRelaxed, SingleAtomRunNeverBeatsRelaxedRun) {
  for (const auto& sp : {example1(), chord_forcing()}) {
    SolverOptions one = quick(4);
    one.atoms_per_step = 1;
    const auto r1 = solve_relaxed(sp, 10, one);
    const auto rr = solve_relaxed(sp, 10, quick(4));
    EXPECT_GE(r1.cost, rr.cost - 1e-6);
    for (const auto& d : r1.distance_to_L) EXPECT_LE(d, 1e-12);
  }
  // With Dirac measures the run is a direct discretization of the classical
  // problem; on Example 1 it meets the grid DP value.
  SolverOptions one = quick(4);
  one.atoms_per_step = 1;
  const auto sp = example1();
  EXPECT_NEAR(solve_relaxed(sp, 20, one).cost, dp_value_original(sp).value, 1e-2);
}

TEST(SolveRelaxed, RelaxationInequalityAgainstRandomControls) {
  for (const auto& sp : {example1(), chord_forcing()}) {
    const auto r = solve_relaxed(sp, 20, quick());
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(sp.K.lower(0), sp.K.upper(0));
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Vector> path(20);
      for (auto& u : path) u = vec({U(rng)});
      EXPECT_LE(r.cost, integrate_classical(sp, path).cost() + 1e-6);
    }
  }
}

TEST(SolveRelaxed, ChordForcingStaysOffTheCurve) {
  const auto sp = chord_forcing();
  const auto r = solve_relaxed(sp, 10, quick());
  EXPECT_NEAR(r.cost, -1.0, 1e-2);
  const auto ex = extract_classical(sp, r, 1e-4);
  EXPECT_FALSE(ex.success);
  // Descent may leave an isolated Dirac step near x = 0 at almost no cost.
  EXPECT_GE(ex.offending_steps.size(), 5u);
}

TEST(SolveRelaxed, RejectsBadArguments) {
  EXPECT_THROW(solve_relaxed(example1(), 0), InputError);
  SolverOptions none;
  none.starts = 0;
  EXPECT_THROW(solve_relaxed(example1(), 5, none), InputError);
}

TrajectoryResult hand_built(const ProblemSpec& sp, const std::vector<MomentVector>& ms) {
  TrajectoryResult t;
  const auto path = integrate_state(sp, ms);
  t.times = path.times;
  t.states = path.states;
  t.cost = path.cost();
  t.moments = ms;
  for (const auto& m : ms) t.distance_to_L.push_back(distance_to_L(sp.basis, sp.K, m));
  return t;
}

TEST(ExtractClassical, ChordMidpointFails) {
  const auto sp = example1();
  const auto ex = extract_classical(sp, hand_built(sp, std::vector<MomentVector>(5, vec({0, 1}))), 1e-4);
  EXPECT_FALSE(ex.success);
  ASSERT_EQ(ex.offending_steps.size(), 5u);
  for (double d : ex.distances) EXPECT_GT(d, 0.6);
}

TEST(ExtractClassical, OnCurveSingleStep) {
  const auto sp = example1();
  const auto ex = extract_classical(sp, hand_built(sp, {phi_eval(sp.basis, 0.3)}), 1e-4);
  ASSERT_TRUE(ex.success);
  EXPECT_NEAR(ex.controls[0][0], 0.3, 1e-12);
}

TEST(TrajectoryCsv, ColumnsAndBlankControls) {
  const auto sp = example1();
  const auto traj = hand_built(sp, std::vector<MomentVector>(2, vec({0, 1})));
  const auto ex = extract_classical(sp, traj);
  std::ostringstream os;
  write_trajectory_csv(os, sp, traj, &ex);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x1,m1,m2,dist_to_L,u");
  std::getline(in, line);
  EXPECT_EQ(line.back(), ',');
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);

  const auto cor = corollary3();
  const auto t2 = hand_built(cor, {phi_eval(cor.basis, vec({0.2, 0.4}))});
  const auto e2 = extract_classical(cor, t2);
  std::ostringstream os2;
  write_trajectory_csv(os2, cor, t2, &e2);
  EXPECT_EQ(os2.str().substr(0, os2.str().find('\n')), "t,x1,x2,m1,m2,m3,m4,dist_to_L,u1,u2");
}

}  // namespace
}  // namespace momentcert
