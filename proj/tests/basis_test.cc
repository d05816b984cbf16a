#include "momentcert/basis.hpp"

#include <random>

#include <gtest/gtest.h>

#include "momentcert/measure.hpp"

namespace momentcert {
namespace {

Vector vec(std::initializer_list<double> v) { return to_vector(std::vector<double>(v)); }

void expect_vec_near(const Vector& got, const Vector& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (Eigen::Index i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "component " << i;
}

TEST(PhiEval, Power1dAndQuadraticDiag) {
  expect_vec_near(phi_eval(ControlBasis::power1d(2), 0.5), vec({0.5, 0.25}), 0.0);
  expect_vec_near(phi_eval(ControlBasis::power1d(3), 2.0), vec({2, 4, 8}), 0.0);
  expect_vec_near(phi_eval(ControlBasis::quadratic_diag(2), vec({1, 0.5})), vec({1, 0.5, 1, 0.25}), 0.0);
}

TEST(PhiEval, DimensionMismatchThrows) {
  EXPECT_THROW(phi_eval(ControlBasis::quadratic_diag(2), vec({1.0})), DimensionError);
  EXPECT_THROW(phi_eval(ControlBasis::power1d(2), vec({1.0, 2.0})), DimensionError);
}

TEST(BasisConstruction, RejectsUnsupportedDegree) {
  EXPECT_THROW(ControlBasis::power1d(4), InputError);
  EXPECT_THROW(ControlBasis::quadratic_diag(0), InputError);
  EXPECT_EQ(ControlBasis::quadratic_diag(3).moment_dim(), 6);
  EXPECT_EQ(ControlBasis::power1d(3).constraint_dim(), 2);
}

TEST(PsiEval, Examples) {
  expect_vec_near(psi_eval(ControlBasis::quadratic_diag(2), vec({1, 0.5, 1, 0.25})), vec({0, 0}), 0.0);
  expect_vec_near(psi_eval(ControlBasis::quadratic_diag(2), vec({0, 0, 1, 1})), vec({-1, -1}), 0.0);
  expect_vec_near(psi_eval(ControlBasis::power1d(3), vec({2, 4, 8})), vec({0, 0}), 0.0);
  EXPECT_THROW(psi_eval(ControlBasis::power1d(3), vec({2, 4})), DimensionError);
}

TEST(PsiGrad, Examples) {
  Matrix g1 = psi_grad(ControlBasis::quadratic_diag(1), vec({0.5, 0.25}));
  EXPECT_EQ(g1.rows(), 1);
  EXPECT_DOUBLE_EQ(g1(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g1(0, 1), -1.0);

  Matrix g2 = psi_grad(ControlBasis::quadratic_diag(2), vec({1, 2, 7, 9}));
  Matrix want2(2, 4);
  want2 << 2, 0, -1, 0, 0, 4, 0, -1;
  EXPECT_TRUE(g2.isApprox(want2));

  Matrix g3 = psi_grad(ControlBasis::power1d(3), vec({1, 5, 6}));
  Matrix want3(2, 3);
  want3 << 2, -1, 0, 3, 0, -1;
  EXPECT_TRUE(g3.isApprox(want3));
}

TEST(PsiGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (const auto& basis : {ControlBasis::power1d(2), ControlBasis::power1d(3), ControlBasis::quadratic_diag(3)}) {
    for (int trial = 0; trial < 20; ++trial) {
      Vector m(basis.moment_dim());
      for (auto& v : m) v = U(rng);
      const Matrix G = psi_grad(basis, m);
      EXPECT_EQ(G.rows(), basis.constraint_dim());
      Eigen::FullPivLU<Matrix> lu(G);
      EXPECT_EQ(lu.rank(), basis.constraint_dim());
      for (int j = 0; j < basis.moment_dim(); ++j) {
        const double h = 1e-6;
        Vector mp = m, mm = m;
        mp[j] += h;
        mm[j] -= h;
        const Vector fd = (psi_eval(basis, mp) - psi_eval(basis, mm)) / (2 * h);
        for (int i = 0; i < basis.constraint_dim(); ++i) EXPECT_NEAR(G(i, j), fd[i], 1e-7);
      }
    }
  }
}

// Psi vanishes on the curve and each component is convex along the grid of
// moment coordinates it depends on.
TEST(PsiInvariants, VanishesOnCurveAndConvex) {
  struct Case {
    ControlBasis basis;
    CompactControlSet K;
  };
  const std::vector<Case> cases = {
      {ControlBasis::power1d(2), CompactControlSet::interval(-1, 1)},
      {ControlBasis::power1d(3), CompactControlSet::interval(0.5, 2)},
      {ControlBasis::quadratic_diag(2), CompactControlSet::box({0, 0}, {1, 1})},
  };
  for (const auto& c : cases) {
    for (const auto& u : control_grid(c.K, c.K.dim() == 1 ? 101 : 11)) {
      const Vector psi = psi_eval(c.basis, phi_eval(c.basis, u));
      EXPECT_LE(psi.cwiseAbs().maxCoeff(), 1e-12);
    }
    ASSERT_TRUE(psi_convex_on(c.basis, c.K));
    // Second differences along the first moment coordinate over K.
    const auto grid = linspace(c.K.lower(0), c.K.upper(0), 101);
    const double h = grid[1] - grid[0];
    for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
      Vector m0 = Vector::Zero(c.basis.moment_dim()), mm = m0, mp = m0;
      m0[0] = grid[k];
      mm[0] = grid[k - 1];
      mp[0] = grid[k + 1];
      const Vector d2 = (psi_eval(c.basis, mp) - 2 * psi_eval(c.basis, m0) + psi_eval(c.basis, mm)) / (h * h);
      EXPECT_GE(d2.minCoeff(), -1e-9);
    }
  }
  EXPECT_FALSE(psi_convex_on(ControlBasis::power1d(3), CompactControlSet::interval(-1, 1)));
}

TEST(CompactControlSet, RejectsBadBounds) {
  EXPECT_THROW(CompactControlSet::interval(1, 1), InputError);
  EXPECT_THROW(CompactControlSet::interval(2, 1), InputError);
  EXPECT_THROW(CompactControlSet::box({0, 0}, {1}), InputError);
  const auto K = CompactControlSet::box({0, -1}, {1, 1});
  EXPECT_TRUE(K.contains(vec({0.5, 0})));
  EXPECT_FALSE(K.contains(vec({1.5, 0})));
  EXPECT_NEAR(K.diameter(), std::sqrt(5.0), 1e-15);
}

TEST(MomentsOf, Examples) {
  const auto p2 = ControlBasis::power1d(2);
  const auto p3 = ControlBasis::power1d(3);
  DiscreteMeasure sym{{vec({-1}), vec({1})}, {0.5, 0.5}};
  expect_vec_near(moments_of(p2, sym), vec({0, 1}), 1e-15);
  expect_vec_near(moments_of(p2, DiscreteMeasure::dirac(0.3)), phi_eval(p2, 0.3), 0.0);
  DiscreteMeasure two{{vec({0.5}), vec({1.5})}, {0.5, 0.5}};
  expect_vec_near(moments_of(p3, two), vec({1, 1.25, 1.75}), 1e-15);
}

TEST(MomentsOf, RejectsInvalidWeights) {
  const auto p2 = ControlBasis::power1d(2);
  DiscreteMeasure bad{{vec({-1}), vec({1})}, {0.5, 0.6}};
  EXPECT_THROW(moments_of(p2, bad), InvalidMeasureError);
  DiscreteMeasure neg{{vec({-1}), vec({1})}, {1.5, -0.5}};
  EXPECT_THROW(moments_of(p2, neg), InvalidMeasureError);
}

TEST(ReduceCaratheodory, KeepsMomentsWithAtMostSPlusOneAtoms) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (const auto& basis : {ControlBasis::power1d(2), ControlBasis::power1d(3), ControlBasis::quadratic_diag(2)}) {
    for (int trial = 0; trial < 25; ++trial) {
      DiscreteMeasure mu;
      double total = 0;
      for (int j = 0; j < 12; ++j) {
        Vector u(basis.control_dim());
        for (auto& v : u) v = U(rng);
        mu.atoms.push_back(u);
        mu.weights.push_back(0.1 + std::abs(U(rng)));
        total += mu.weights.back();
      }
      for (auto& w : mu.weights) w /= total;
      const Vector before = moments_of(basis, mu);
      const auto red = reduce_caratheodory(basis, mu);
      EXPECT_LE(static_cast<int>(red.size()), basis.moment_dim() + 1);
      EXPECT_LE((moments_of(basis, red) - before).norm(), 1e-12);
    }
  }
}

}  // namespace
}  // namespace momentcert
