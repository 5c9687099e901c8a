#pragma once

#include <vector>

#include "nltheat/bundle.hpp"
#include "nltheat/gavg.hpp"
#include "nltheat/quadrature.hpp"
#include "nltheat/symbol.hpp"

namespace nlt {

// M_n(p; a, b) = int_0^1 w^n (b + (a-b) w)^{-p} dw, a, b > 0
inline double weighted_power_moment(int n, double p, double a, double b) {
  const double delta = a - b;
  if (std::abs(delta) <= 0.25 * b) {
    // binomial series in delta/b; terms decay at least like 4^{-j}
    const double x = delta / b;
    double coef = 1.0, xp = 1.0, sum = 0.0;
    for (int j = 0; j < 2000; ++j) {
      const double term = coef * xp / (n + j + 1);
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum) && j > 2) break;
      coef *= (-p - j) / (j + 1);
      xp *= x;
    }
    return sum * std::pow(b, -p);
  }
  // u = b + delta w: M = delta^{-(n+1)} sum_j C(n,j) (-b)^{n-j} int_b^a u^{j-p} du
  double acc = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double e = j - p + 1.0;
    const double I = std::abs(e) < 1e-14 ? std::log(a / b) : (std::pow(a, e) - std::pow(b, e)) / e;
    acc += binom(n, j) * std::pow(-b, n - j) * I;
  }
  return acc / std::pow(delta, n + 1);
}

inline double kappa(int i, int k, const std::vector<double>& mu, int m) {
  if (i == k || mu[i] == mu[k]) return 0.0;
  const double p = 0.5 * (m + 2);
  return weighted_power_moment(1, p, mu[i], mu[k]) - weighted_power_moment(1, p, mu[k], mu[i]);
}

inline double rho(int i, int k, const std::vector<double>& mu, int m) {
  const double p = 0.5 * (m + 4);
  if (i == k) return std::pow(mu[i], -p) / 6.0;
  return weighted_power_moment(1, p, mu[i], mu[k]) - weighted_power_moment(2, p, mu[i], mu[k]);
}

inline double gamma_coef(int i, int k, const std::vector<double>& mu, int m) {
  const double p = 0.5 * (m + 4);
  if (i == k) return std::pow(mu[i], -p) / 6.0;
  return 0.5 * weighted_power_moment(2, p, mu[i], mu[k]);
}

inline double sigma_coef(int i, int k, const std::vector<double>& mu, int m) {
  if (i == k) return 0.0;
  return rho(i, k, mu, m) - gamma_coef(i, k, mu, m);
}

// --- defining integrals by adaptive quadrature ------------------------------------

namespace oracle {

inline double kappa(double mi, double mk, int m, double tol = 1e-13) {
  const double p = 0.5 * (m + 2);
  return quad::integrate(
      [&](double t) { return t * (std::pow(mi * t + mk * (1 - t), -p) - std::pow(mk * t + mi * (1 - t), -p)); }, 0.0,
      1.0, tol);
}

inline double gamma_coef(double mi, double mk, int m, double tol = 1e-13) {
  const double p = 0.5 * (m + 4);
  return quad::integrate([&](double t) { return 0.5 * t * t * std::pow(t * mi + (1 - t) * mk, -p); }, 0.0, 1.0, tol);
}

// literal nested integral over tau in [0,1], s1 in [0,1-tau], s2 in [0,tau]
inline double rho(double mi, double mk, int m, double tol = 1e-12) {
  const double p = 0.5 * (m + 4);
  auto f = [&](double tau, double s1, double s2) {
    const double w = tau - s2 + s1;
    return std::pow(w * mi + (1 - w) * mk, -p);
  };
  return quad::integrate(
      [&](double tau) {
        if (1.0 - tau <= 0.0 || tau <= 0.0) return 0.0;
        return quad::integrate(
            [&](double s1) {
              return quad::integrate([&](double s2) { return f(tau, s1, s2); }, 0.0, tau, tol, nullptr, 10);
            },
            0.0, 1.0 - tau, tol, nullptr, 10);
      },
      0.0, 1.0, tol, nullptr, 10);
}

}  // namespace oracle

// closed forms as printed (m >= 3); reported for comparison only
namespace printed {

inline double kappa(double mi, double mk, int m) {
  const double h = 0.5 * m, D = mi - mk;
  return -gamma_ratio(h - 1, h + 1) / 2.0 *
         (m * (std::pow(mi, -h) + std::pow(mk, -h)) / D + 2.0 * (std::pow(mi, 1 - h) - std::pow(mk, 1 - h)) / (D * D));
}

inline double rho(double mi, double mk, int m) {
  const double h = 0.5 * m, D = mi - mk;
  return gamma_ratio(h - 1, h + 2) / (D * D) *
         ((m - 4) * (std::pow(mi, -h) + std::pow(mk, -h)) + 2.0 * (std::pow(mi, 1 - h) - std::pow(mk, 1 - h)) / D);
}

inline double gamma_coef(double mi, double mk, int m) {
  const double h = 0.5 * m, D = mi - mk;
  return gamma_ratio(h - 1, h + 2) / (8.0 * D) *
         (-m * (m - 2) * std::pow(mi, -h - 1) - 4.0 * (m - 2) * std::pow(mi, -h) / D -
          8.0 * (std::pow(mi, 1 - h) - std::pow(mk, 1 - h)) / (D * D));
}

inline double sigma(double mi, double mk, int m) {
  const double h = 0.5 * m, D = mi - mk;
  return gamma_ratio(h - 1, h + 2) / 8.0 *
         (24.0 * (std::pow(mi, 1 - h) - std::pow(mk, 1 - h)) / (D * D * D) +
          8.0 * (m - 4) * (std::pow(mi, -h) + std::pow(mk, -h)) / (D * D) + 4.0 * (m - 2) * std::pow(mi, -h) / (D * D) +
          m * (m - 2) * std::pow(mi, -h - 1) / D);
}

}  // namespace printed

struct CoefTables {
  Eigen::MatrixXd kappa, rho, gamma, sigma;
};

inline CoefTables coefficient_tables(const std::vector<double>& mu, int m) {
  const int s = static_cast<int>(mu.size());
  CoefTables t;
  t.kappa = t.rho = t.gamma = t.sigma = Eigen::MatrixXd::Zero(s, s);
  for (int i = 0; i < s; ++i)
    for (int k = 0; k < s; ++k) {
      t.kappa(i, k) = kappa(i, k, mu, m);
      t.rho(i, k) = rho(i, k, mu, m);
      t.gamma(i, k) = gamma_coef(i, k, mu, m);
      t.sigma(i, k) = sigma_coef(i, k, mu, m);
    }
  return t;
}

// --- heat invariants ---------------------------------------------------------------

inline Mat a0_coefficient(const SpectralData& D, const std::vector<Mat>& avgPi) {
  Mat a0 = Mat::Zero(D.d, D.d);
  for (int i = 0; i < D.s; ++i) a0 += std::pow(D.mu[i], -0.5 * D.m) * avgPi[i];
  return a0;
}

inline Mat a0_coefficient(const SpectralData& D) {
  ExactAverager av(D);
  std::vector<Mat> P;
  for (int i = 0; i < D.s; ++i) P.push_back(av.projector(i));
  return a0_coefficient(D, P);
}

// per unit volume times volume
inline double A0_global(const SpectralData& D, double volume = 1.0) {
  double s = 0.0;
  for (int i = 0; i < D.s; ++i) s += D.mult[i] * std::pow(D.mu[i], -0.5 * D.m);
  return s * volume;
}

struct BetaResult {
  double value = 0.0;
  double term_abar = 0.0;  // -(1/6m) sum mu^{-m/2} tr(<Pi> abar)
  double term_J = 0.0;     // kappa/sigma weighted tr <Pi J Pi J>
  double term_T = 0.0;     // generator term
};

inline BetaResult beta_from_averages(const SpectralData& D, const AvgSet& S) {
  const int m = D.m, s = D.s;
  if (m < 2) throw InputError("beta needs m >= 2");
  const CoefTables t = coefficient_tables(D.mu, m);
  const Mat abar = D.symbol.abar();
  BetaResult b;
  for (int i = 0; i < s; ++i) b.term_abar -= std::pow(D.mu[i], -0.5 * m) * std::real((S.avgPi[i] * abar).trace()) / (6.0 * m);
  for (int i = 0; i < s; ++i)
    for (int k = 0; k < s; ++k) {
      if (i == k) continue;
      b.term_J += (t.kappa(i, k) * (3.0 * m - 2) + 4.0 * (m + 2) * D.mu[i] * t.sigma(i, k)) *
                  std::real(S.avgPJPJ[i][k].trace()) / (12.0 * (m - 1));
      if (S.has_T) b.term_T -= t.kappa(i, k) * std::real(S.avgPJPJ_T[i][k].trace()) / (2.0 * (m - 1));
    }
  b.value = b.term_abar + b.term_J + b.term_T;
  return b;
}

inline BetaResult beta_constant(const SpectralData& D, const FiberBundle& B) {
  if (!B.has_generators() && D.s > 1) throw InputError("beta needs the bundle generators");
  return beta_from_averages(D, ExactAverager(D).all(&B));
}

struct BetaDualPath {
  BetaResult exact, quadrature;
  double diff = 0.0;
};

inline BetaDualPath beta_dual_path(const SpectralData& D, const FiberBundle& B) {
  BetaDualPath r;
  r.exact = beta_constant(D, B);
  r.quadrature = beta_from_averages(D, quadrature_averages(D, &B));
  r.diff = r.exact.value - r.quadrature.value;
  return r;
}

inline double A1_global(const Mat& a0, const Mat& q, double beta, double R_scalar, double volume = 1.0) {
  return volume * (std::real((a0 * q).trace()) + beta * R_scalar);
}

struct HeatInvariants {
  Mat a0;
  double A0_per_volume = 0.0, A0 = 0.0;
  BetaResult beta;
  double A1 = 0.0;
  CoefTables tables;
};

inline HeatInvariants heat_invariants(const SpectralData& D, const FiberBundle& B, double volume = 1.0,
                                      double R_scalar = 0.0) {
  HeatInvariants h;
  ExactAverager av(D);
  AvgSet S = av.all(&B);
  h.a0 = a0_coefficient(D, S.avgPi);
  h.A0_per_volume = A0_global(D, 1.0);
  h.A0 = h.A0_per_volume * volume;
  h.beta = beta_from_averages(D, S);
  h.tables = coefficient_tables(D.mu, D.m);
  Mat q = B.q ? *B.q : Mat::Zero(D.d, D.d);
  h.A1 = A1_global(h.a0, q, h.beta.value, R_scalar, volume);
  return h;
}

}  // namespace nlt
