#include <gtest/gtest.h>

#include "nltheat/s2forms.hpp"
#include "nltheat/symbol.hpp"
#include "test_util.hpp"

using namespace nlt;

namespace {

SpectralData s20_m4() { return spectral_decompose(s20_symbol({4, 1.0, 0.0, 1.0, 0.0})); }

std::vector<double> sorted_eigenvalues(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
  RVec v = es.eigenvalues();
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

TEST(Symbol, LaplaceSymbolIsIdentityOnUnitVectors) {
  auto S = laplace_symbol(3, 4);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 5; ++k) EXPECT_LT(max_abs(eval_symbol(S, quad::random_unit(3, rng)) - identity(4)), 1e-15);
}

TEST(Symbol, S20EigenvaluesAlongFirstAxis) {
  auto S = s20_symbol({4, 1.0, 0.0, 1.0, 0.0});
  auto ev = sorted_eigenvalues(eval_symbol(S, testutil::unit(4, 0)));
  ASSERT_EQ(ev.size(), 9u);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(ev[k], 1.0, 1e-13);
  for (int k = 5; k < 8; ++k) EXPECT_NEAR(ev[k], 2.0, 1e-13);
  EXPECT_NEAR(ev[8], 2.5, 1e-13);
}

TEST(Symbol, TwoHomogeneity) {
  std::mt19937_64 rng(2);
  auto S = s20_symbol({4, 1.0, 0.0, 1.0, 0.0});
  RVec xi = quad::random_gaussian(4, rng);
  EXPECT_LT(max_abs(eval_symbol(S, 2.0 * xi) - 4.0 * eval_symbol(S, xi)), 1e-13);
}

TEST(Symbol, SymbolInvariants) {
  auto c = check_symbol(s20_symbol({5, 1.0, 0.0, 0.7, 0.0}));
  EXPECT_EQ(c.block_symmetry, 0.0);
  EXPECT_LT(c.hermiticity, 1e-14);
  EXPECT_GT(c.min_eigenvalue, 0.0);
}

TEST(Symbol, LaplaceDecomposition) {
  auto D = spectral_decompose(laplace_symbol(3, 4));
  EXPECT_EQ(D.s, 1);
  EXPECT_NEAR(D.mu[0], 1.0, 1e-14);
  EXPECT_EQ(D.mult[0], 4);
  std::mt19937_64 rng(3);
  EXPECT_LT(max_abs(projector_at(D, quad::random_gaussian(3, rng), 0) - identity(4)), 0.0 + 1e-15);
}

TEST(Symbol, S20Decomposition) {
  auto D = s20_m4();
  ASSERT_EQ(D.s, 3);
  EXPECT_NEAR(D.mu[0], 1.0, 1e-12);
  EXPECT_NEAR(D.mu[1], 2.0, 1e-12);
  EXPECT_NEAR(D.mu[2], 2.5, 1e-12);
  EXPECT_EQ(D.mult, (std::vector<int>{5, 3, 1}));
  EXPECT_LE(D.spread, 1e-8);
}

TEST(Symbol, FullS2DecompositionMatchesClosedForm) {
  // alpha = (1, 0, 1, 0), m = 4: nu4 = rho - omega lands on mu1 = 1, so three levels remain
  S2SymbolParams p{4, 1.0, 0.0, 1.0, 0.0};
  auto f = s2_full_spectrum(p);
  EXPECT_NEAR(f.nu3, 3.0, 1e-14);
  EXPECT_NEAR(f.nu4, 1.0, 1e-14);
  auto D = spectral_decompose(s2_symbol(p));
  ASSERT_EQ(D.s, 3);
  EXPECT_EQ(D.mult, (std::vector<int>{6, 3, 1}));
  EXPECT_NEAR(D.mu[0], f.mu1, 1e-10);
  EXPECT_NEAR(D.mu[1], f.mu2, 1e-10);
  EXPECT_NEAR(D.mu[2], f.nu3, 1e-10);
  // generic parameters give four distinct levels
  S2SymbolParams g{4, 1.0, 0.1, 0.2, 0.05};
  auto fg = s2_full_spectrum(g);
  auto Dg = spectral_decompose(s2_symbol(g));
  ASSERT_EQ(Dg.s, 4);
  std::vector<std::pair<double, int>> cf{{fg.mu1, 5}, {fg.mu2, 3}, {fg.nu3, 1}, {fg.nu4, 1}};
  std::sort(cf.begin(), cf.end());
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(Dg.mu[i], cf[i].first, 1e-10);
    EXPECT_EQ(Dg.mult[i], cf[i].second);
  }
}

TEST(Symbol, ProjectorAxiomsAtRandomDirections) {
  for (auto D : {s20_m4(), spectral_decompose(s2_symbol({3, 1.0, 0.1, 0.2, 0.05}))}) {
    std::mt19937_64 rng(4);
    double worst = 0.0;
    for (int n = 0; n < 100; ++n) {
      RVec xi = quad::random_unit(D.m, rng);
      auto P = projectors_at(D, xi);
      Mat sum = Mat::Zero(D.d, D.d);
      for (int i = 0; i < D.s; ++i) {
        worst = std::max(worst, max_abs(P[i] * P[i] - P[i]));
        worst = std::max(worst, std::abs(std::real(P[i].trace()) - D.mult[i]));
        for (int k = 0; k < D.s; ++k)
          if (k != i) worst = std::max(worst, max_abs(P[i] * P[k]));
        sum += P[i];
      }
      worst = std::max(worst, max_abs(sum - identity(D.d)));
    }
    EXPECT_LT(worst, 1e-10);
  }
}

TEST(Symbol, ProjectorHomogeneityAndResolution) {
  auto D = s20_m4();
  std::mt19937_64 rng(5);
  for (int n = 0; n < 10; ++n) {
    RVec xi = quad::random_gaussian(4, rng);
    Mat A = eval_symbol(D.symbol, xi) / xi.squaredNorm(), rec = Mat::Zero(D.d, D.d);
    for (int i = 0; i < D.s; ++i) {
      EXPECT_LT(max_abs(projector_at(D, 2.0 * xi, i) - projector_at(D, xi, i)), 1e-13);
      rec += D.mu[i] * projector_at(D, xi, i);
    }
    EXPECT_LT(max_abs(rec - A), 1e-12);
  }
  EXPECT_THROW(projector_at(D, RVec::Zero(4), 0), InputError);
}

TEST(Symbol, VandermondeCoefficients) {
  auto c1 = vandermonde_c({3.0});
  EXPECT_DOUBLE_EQ(c1(0, 0), 1.0);
  auto c2 = vandermonde_c({1.0, 2.0});
  Eigen::Matrix2d expect;
  expect << 2.0, -1.0, -1.0, 1.0;
  EXPECT_LT((c2 - expect).cwiseAbs().maxCoeff(), 1e-15);
  std::vector<double> mu{0.7, 1.3, 2.2, 3.9, 5.0};
  auto c = vandermonde_c(mu);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += c(i, k) * std::pow(mu[j], k);
      EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-12);
    }
  EXPECT_THROW(vandermonde_c({1.0, 1.0}), DegenerateGap);
}

TEST(Symbol, VandermondeReconstructsProjectors) {
  auto D = s20_m4();
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    RVec xi = quad::random_unit(4, rng);
    for (int i = 0; i < D.s; ++i) worst = std::max(worst, max_abs(projector_via_c(D, xi, i) - projector_at(D, xi, i)));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(Symbol, ANConstants) {
  auto L = spectral_decompose(laplace_symbol(3, 2));
  for (int n = 0; n <= 4; ++n) {
    auto c = a_n_constant(L, n);
    EXPECT_NEAR(c.tensor_route, 2.0, 1e-12);
    EXPECT_NEAR(c.eigen_route, 2.0, 1e-12);
  }
  auto D = s20_m4();
  EXPECT_DOUBLE_EQ(a_n_constant(D, 0).tensor_route, 9.0);
  auto c1 = a_n_constant(D, 1);
  EXPECT_NEAR(c1.eigen_route, 13.5, 1e-11);
  EXPECT_NEAR(c1.tensor_route, 13.5, 1e-10);
  for (int n = 2; n <= 4; ++n) {
    auto c = a_n_constant(D, n);
    EXPECT_LT(std::abs(c.diff), 1e-10 * c.eigen_route) << n;
  }
  EXPECT_THROW(a_n_constant(D, 5), RankOverflow);
}

TEST(Symbol, HarmonicComponentsLaplace) {
  auto D = spectral_decompose(laplace_symbol(3, 2));
  auto h = harmonic_components(D, 0);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h[0].degree, 0);
  EXPECT_LT(max_abs(h[0].tensor.entries[0] - identity(2)), 1e-15);
}

TEST(Symbol, HarmonicComponentIdentities) {
  for (auto D : {s20_m4(), spectral_decompose(s2_symbol({3, 1.0, 0.1, 0.2, 0.05}))}) {
    std::vector<std::vector<HarmonicComponent>> H;
    for (int i = 0; i < D.s; ++i) H.push_back(harmonic_components(D, i));
    const int ncomp = D.s;
    // sum_i mu_i Pi_{i(0)} = (1/m) g_{mu nu} a^{mu nu}
    Mat b0 = Mat::Zero(D.d, D.d);
    for (int i = 0; i < D.s; ++i) b0 += D.mu[i] * H[i][0].tensor.entries[0];
    EXPECT_LT(max_abs(b0 - D.symbol.abar() / D.m), 1e-10);
    // higher harmonics of A(xi-hat) vanish
    for (int n = 2; n < ncomp; ++n) {
      double worst = 0.0;
      for (size_t e = 0; e < H[0][n].tensor.entries.size(); ++e) {
        Mat s = Mat::Zero(D.d, D.d);
        for (int i = 0; i < D.s; ++i) s += D.mu[i] * H[i][n].tensor.entries[e];
        worst = std::max(worst, max_abs(s));
      }
      EXPECT_LT(worst, 1e-10) << n;
    }
    // trace-free in every pair, and pointwise reconstruction
    std::mt19937_64 rng(7);
    for (int i = 0; i < D.s; ++i) {
      for (int n = 1; n < ncomp; ++n) {
        EXPECT_EQ(H[i][n].degree, 2 * n);
        auto tr = partial_trace(H[i][n].tensor);
        for (auto& e : tr.entries) EXPECT_LT(max_abs(e), 1e-10);
      }
      for (int k = 0; k < 20; ++k) {
        RVec xi = quad::random_unit(D.m, rng);
        Mat rec = Mat::Zero(D.d, D.d);
        for (auto& c : H[i]) rec += c.poly.eval(xi);
        EXPECT_LT(max_abs(rec - projector_at(D, xi, i)), 1e-10);
      }
    }
  }
}

TEST(Symbol, ErrorsOutsideTheClass) {
  std::mt19937_64 rng(8);
  auto S = laplace_symbol(3, 3);
  auto b = testutil::random_blocks(3, 3, rng);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) S.a[i][j] += 0.05 * b[i][j];
  EXPECT_THROW(spectral_decompose(S), NonInvariantSymbol);
  EXPECT_THROW(spectral_decompose(s20_symbol({4, 1.0, 0.0, -0.9, 0.0})), NotPositive);
  EXPECT_THROW(spectral_decompose(s20_symbol({4, 1.0, 0.0, 4e-6, 0.0})), DegenerateGap);
  // inside the clustering tolerance the levels merge into a Laplace-like symbol
  auto merged = spectral_decompose(s20_symbol({4, 1.0, 0.0, 1e-8, 0.0}));
  EXPECT_EQ(merged.s, 1);
}
