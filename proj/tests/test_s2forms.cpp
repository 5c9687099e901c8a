#include <gtest/gtest.h>

#include "nltheat/s2forms.hpp"
#include "test_util.hpp"

using namespace nlt;

namespace {

double tr(const Mat& A) { return std::real(A.trace()); }

std::vector<double> eigenvalues(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
  RVec v = es.eigenvalues();
  return std::vector<double>(v.data(), v.data() + v.size());
}

// multiset from closed-form levels
std::vector<double> expand(const std::vector<std::pair<double, int>>& levels) {
  std::vector<double> out;
  for (auto& [v, k] : levels) out.insert(out.end(), k, v);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(S2Forms, XTraces) {
  std::mt19937_64 rng(1);
  for (int m = 2; m <= 7; ++m) {
    auto X = x_basis(m, quad::random_gaussian(m, rng));
    EXPECT_NEAR(tr(X[0]), m, 1e-12);
    EXPECT_NEAR(tr(X[1]), 0.5 * (m + 1), 1e-12);
    for (int k = 2; k < 5; ++k) EXPECT_NEAR(tr(X[k]), 1.0, 1e-12);
  }
}

TEST(S2Forms, SelectedProducts) {
  std::mt19937_64 rng(2);
  for (int m = 2; m <= 6; ++m) {
    auto X = x_basis(m, quad::random_unit(m, rng));
    EXPECT_LT(max_abs(X[2] * X[3] - m * X[4]), 1e-12);
    EXPECT_LT(max_abs(X[1] * X[1] - 0.5 * (X[1] + X[4])), 1e-12);
    EXPECT_LT(max_abs(X[2].adjoint() - X[3]), 1e-14);
    EXPECT_LT(max_abs(X[0] * X[0] - m * X[0]), 1e-12);
  }
  EXPECT_THROW(x_basis(3, RVec::Zero(3)), InputError);
}

TEST(S2Forms, ProductTableHoldsForAllDimensions) {
  for (int m = 2; m <= 8; ++m) EXPECT_LT(table1_check(m, 6, 10 + m).max_residual, 1e-12) << m;
}

TEST(S2Forms, YAlgebra) {
  std::mt19937_64 rng(3);
  for (int m = 2; m <= 8; ++m) {
    auto X = x_basis(m, quad::random_unit(m, rng));
    EXPECT_LT(y_algebra_residual(m, X), 1e-12) << m;
  }
}

TEST(S2Forms, TraceFreeProjectors) {
  std::mt19937_64 rng(4);
  for (int m = 3; m <= 8; ++m) {
    RVec xi = quad::random_gaussian(m, rng);
    auto p = s20_projectors_s2(m, xi);
    EXPECT_NEAR(tr(p.Pi1), 0.5 * (m + 1) * (m - 2), 1e-10);
    EXPECT_NEAR(tr(p.Pi2), m - 1, 1e-10);
    EXPECT_NEAR(tr(p.Pi3), 1.0, 1e-10);
    std::array<Mat, 3> P{p.Pi1, p.Pi2, p.Pi3};
    auto y = y_algebra(m, x_basis(m, xi));
    for (int i = 0; i < 3; ++i) {
      EXPECT_LT(max_abs(P[i] * P[i] - P[i]), 1e-12);
      EXPECT_LT(max_abs(P[i] - P[i].adjoint()), 1e-12);
      for (int k = i + 1; k < 3; ++k) EXPECT_LT(max_abs(P[i] * P[k]), 1e-12);
    }
    EXPECT_LT(max_abs(P[0] + P[1] + P[2] - y.P), 1e-12);
    auto q = s20_projectors(m, xi);
    EXPECT_EQ(q.Pi1.rows(), s2_dim(m) - 1);
    EXPECT_LT(max_abs(q.Pi1 + q.Pi2 + q.Pi3 - identity(s2_dim(m) - 1)), 1e-12);
  }
  EXPECT_THROW(s20_projectors(2, testutil::unit(2, 0)), InputError);
}

TEST(S2Forms, TraceFreeEigenvalues) {
  auto e = s20_eigenvalues({4, 1.0, 0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(e.mu1, 1.0);
  EXPECT_DOUBLE_EQ(e.mu2, 2.0);
  EXPECT_DOUBLE_EQ(e.mu3, 2.5);
  EXPECT_TRUE(e.positive);
  auto n = s20_eigenvalues({4, 1.0, 0.3, -0.9, 0.7});
  EXPECT_FALSE(n.positive);
  EXPECT_NEAR(n.mu3, 1.0 - 1.35, 1e-15);
  // numerical spectrum of the compressed symbol
  std::mt19937_64 rng(5);
  for (int m = 3; m <= 6; ++m) {
    S2SymbolParams p{m, 1.3, 0.4, 0.45, -0.2};
    auto c = s20_eigenvalues(p);
    auto ev = eigenvalues(eval_symbol(s20_symbol(p), quad::random_unit(m, rng)));
    auto ex = expand({{c.mu1, (m + 1) * (m - 2) / 2}, {c.mu2, m - 1}, {c.mu3, 1}});
    ASSERT_EQ(ev.size(), ex.size());
    for (size_t k = 0; k < ev.size(); ++k) EXPECT_NEAR(ev[k], ex[k], 1e-12);
  }
}

TEST(S2Forms, FactoredCaseHasNoMixing) {
  // kappa = 0 when alpha3 = -2 alpha2 / m
  const int m = 4;
  S2SymbolParams p{m, 1.0, 0.2, 0.6, -2.0 * 0.6 / m};
  auto f = s2_full_spectrum(p);
  EXPECT_NEAR(f.kappa_sym, 0.0, 1e-15);
  std::mt19937_64 rng(6);
  RVec xi = quad::random_unit(m, rng);
  auto r = s2_full_projectors(p, xi);
  auto pr = s20_projectors_s2(m, xi);
  auto y = y_algebra(m, x_basis(m, xi));
  // mu3 > q_sym here, so Z3 picks the Pi3 line
  ASSERT_GT(f.mu3, f.q_sym);
  EXPECT_LT(max_abs(r.Z3 - pr.Pi3), 1e-12);
  EXPECT_LT(max_abs(r.Z4 - (identity(y.P.rows()) - y.P)), 1e-12);
  EXPECT_NEAR(f.nu3, f.mu3, 1e-12);
  EXPECT_NEAR(f.nu4, f.q_sym, 1e-12);
}

TEST(S2Forms, MixingOperators) {
  std::mt19937_64 rng(7);
  for (int m = 2; m <= 6; ++m) {
    S2SymbolParams p{m, 1.0, 0.1, 0.2, 0.05};
    RVec xi = quad::random_unit(m, rng);
    auto r = s2_full_projectors(p, xi);
    auto pr = s20_projectors_s2(m, xi);
    auto y = y_algebra(m, x_basis(m, xi));
    const Mat IP = identity(y.P.rows()) - y.P;
    EXPECT_LT(max_abs(r.T * r.T), 1e-12);
    EXPECT_LT(max_abs(r.Tstar * r.Tstar), 1e-12);
    EXPECT_LT(max_abs(r.Tstar * r.T - IP), 1e-12);
    EXPECT_LT(max_abs(r.T * r.Tstar - pr.Pi3), 1e-12);
    EXPECT_LT(max_abs(r.Z3 + r.Z4 - pr.Pi3 - IP), 1e-12);
    EXPECT_LT(max_abs(r.Z3 * r.Z3 - r.Z3), 1e-12);
    EXPECT_LT(max_abs(r.Z3 * r.Z4), 1e-12);
    EXPECT_NEAR(tr(r.Z3), 1.0, 1e-12);
    EXPECT_NEAR(tr(r.Z4), 1.0, 1e-12);
  }
}

TEST(S2Forms, FullSpectrumMatchesDecomposition) {
  S2SymbolParams p{4, 1.0, 0.1, 0.2, 0.05};
  auto f = s2_full_spectrum(p);
  auto D = spectral_decompose(s2_symbol(p));
  ASSERT_EQ(D.s, 4);
  auto ex = expand({{f.mu1, 5}, {f.mu2, 3}, {f.nu3, 1}, {f.nu4, 1}});
  std::vector<double> got;
  for (int i = 0; i < D.s; ++i) got.insert(got.end(), D.mult[i], D.mu[i]);
  for (size_t k = 0; k < ex.size(); ++k) EXPECT_NEAR(got[k], ex[k], 1e-10);
}

TEST(S2Forms, SymbolReconstructedFromProjectors) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  int checked = 0;
  while (checked < 20) {
    const int m = 2 + checked % 5;
    S2SymbolParams p{m, 1.0, u(rng), u(rng), u(rng)};
    auto f = s2_full_spectrum(p);
    if (!f.positive) continue;
    RVec xi = quad::random_unit(m, rng);
    auto r = s2_full_projectors(p, xi);
    Mat A = eval_symbol(s2_symbol(p), xi);
    Mat rec = f.mu1 * r.Pi1 + f.mu2 * r.Pi2 + f.nu3 * r.Z3 + f.nu4 * r.Z4;
    EXPECT_LT(max_abs(A - rec), 1e-12);
    // numeric spectrum (independent of the closed form projectors)
    auto ev = eigenvalues(A);
    auto ex = expand({{f.mu1, (m + 1) * (m - 2) / 2}, {f.mu2, m - 1}, {f.nu3, 1}, {f.nu4, 1}});
    for (size_t k = 0; k < ev.size(); ++k) EXPECT_NEAR(ev[k], ex[k], 1e-12);
    EXPECT_GT(ev.front(), 0.0);
    ++checked;
  }
}

TEST(S2Forms, PositivityFlagMatchesNumerics) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int n = 0; n < 200; ++n) {
    const int m = 3 + n % 3;
    S2SymbolParams p{m, 1.0, u(rng), u(rng), u(rng)};
    auto f = s2_full_spectrum(p);
    double lo = eigenvalues(eval_symbol(s2_symbol(p), testutil::unit(m, 0))).front();
    if (std::abs(lo) < 1e-9) continue;
    EXPECT_EQ(f.positive, lo > 0.0) << p.alpha1 << " " << p.alpha2 << " " << p.alpha3;
  }
}
