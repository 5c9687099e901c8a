#include <gtest/gtest.h>

#include "nltheat/heatcoef.hpp"
#include "nltheat/s2forms.hpp"
#include "nltheat/torus.hpp"
#include "test_util.hpp"

using namespace nlt;

namespace {

TorusSpec laplace_torus(int m, int d, double L = 2.0 * M_PI) {
  TorusSpec T;
  T.m = m;
  T.L = L;
  T.symbol = laplace_symbol(m, d);
  return T;
}

struct FitCheck {
  double A0_err, A1_err;
};

FitCheck fit_against_theory(const TorusSpec& T) {
  auto D = spectral_decompose(T.symbol);
  auto rep = torus_fit(T, default_torus_grid(D.mu_max(), T.L));
  const double A0 = A0_global(D), A1 = std::real((a0_coefficient(D) * torus_potential(T)).trace());
  return {std::abs(rep.fit.A0 - A0) / A0, std::abs(rep.fit.A1 - A1) / std::max(std::abs(A1), 1e-300)};
}

}  // namespace

TEST(Torus, CircleThetaFunction) {
  auto T = laplace_torus(1, 1);
  double direct = 0.0;
  for (int n = -40; n <= 40; ++n) direct += std::exp(-double(n) * n);
  EXPECT_NEAR(torus_heat_trace(T, 1.0), direct, 1e-14);
  EXPECT_NEAR(direct, 1.7726372048266521, 1e-13);
}

TEST(Torus, LargeTimeLimitIsFiberDimension) {
  auto T = laplace_torus(2, 3);
  EXPECT_NEAR(torus_heat_trace(T, 40.0), 3.0, 1e-14);
}

TEST(Torus, ScalingOfSideAndTime) {
  auto D = spectral_decompose(s20_symbol({3, 1.0, 0.0, 0.5, 0.0}));
  TorusSpec a;
  a.m = 3;
  a.L = 2.0;
  a.symbol = D.symbol;
  TorusSpec b = a;
  b.L = 6.0;
  EXPECT_NEAR(torus_heat_trace(a, 0.01), torus_heat_trace(b, 0.09), 1e-10 * torus_heat_trace(a, 0.01));
}

TEST(Torus, MonotoneInTime) {
  auto T = laplace_torus(2, 1);
  T.symbol = s2_symbol({2, 1.0, 0.1, 0.2, 0.05});
  T.q = 0.3 * identity(3);
  double prev = INFINITY;
  for (double t = 0.01; t < 1.0; t *= 1.5) {
    const double v = torus_heat_trace(T, t);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Torus, Guards) {
  auto T = laplace_torus(2, 1);
  EXPECT_THROW(torus_heat_trace(T, 0.0), InputError);
  EXPECT_THROW(torus_heat_trace(T, -1.0), InputError);
  T.cutoff = 2;
  EXPECT_THROW(torus_heat_trace(T, 1e-3), InputError);
  T.cutoff = required_cutoff(T, 1e-3);
  EXPECT_NO_THROW(torus_heat_trace(T, 1e-3));
  auto bad = laplace_torus(2, 1);
  bad.symbol.a[0][0] *= -1.0;
  EXPECT_THROW(torus_heat_trace(bad, 0.1), NotPositive);
  EXPECT_THROW(fit_asymptotics({{0.1, 1.0}, {0.2, 1.0}}, 2, 1.0), InputError);
}

TEST(Torus, LaplaceFit) {
  auto T = laplace_torus(2, 1);
  auto rep = torus_fit(T, default_torus_grid(1.0, T.L));
  EXPECT_NEAR(rep.fit.A0, 1.0, 1e-10);
  EXPECT_NEAR(rep.fit.A1, 0.0, 1e-8);
  EXPECT_FALSE(rep.fit.ill_conditioned);
}

TEST(Torus, ScalarPotentialShiftsA1) {
  auto T = laplace_torus(2, 2);
  T.q = 0.7 * identity(2);
  auto rep = torus_fit(T, default_torus_grid(1.0, T.L));
  EXPECT_NEAR(rep.fit.A0, 2.0, 1e-5);
  EXPECT_NEAR(rep.fit.A1, 2.0 * 0.7, 2e-3);
}

TEST(Torus, TwoTorusFullS2) {
  TorusSpec T;
  T.m = 2;
  T.symbol = s2_symbol({2, 1.0, 0.1, 0.2, 0.05});
  T.q = 0.3 * identity(3);
  auto c = fit_against_theory(T);
  EXPECT_LT(c.A0_err, 0.005);
  EXPECT_LT(c.A1_err, 0.02);
}

TEST(Torus, ThreeTorusTraceFree) {
  TorusSpec T;
  T.m = 3;
  T.symbol = s20_symbol({3, 1.0, 0.0, 1.0, 0.0});
  T.q = 0.3 * identity(5);
  auto c = fit_against_theory(T);
  EXPECT_LT(c.A0_err, 0.005);
  EXPECT_LT(c.A1_err, 0.02);
}

TEST(Torus, NonScalarPotential) {
  TorusSpec T;
  T.m = 2;
  T.symbol = s2_symbol({2, 1.0, 0.1, 0.2, 0.05});
  std::mt19937_64 rng(3);
  T.q = 0.5 * identity(3) + 0.1 * testutil::random_hermitian(3, rng);
  auto c = fit_against_theory(T);
  EXPECT_LT(c.A0_err, 0.005);
  EXPECT_LT(c.A1_err, 0.02);
}
