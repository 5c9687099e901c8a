#pragma once

#include <array>
#include <string>
#include <vector>

#include "nltheat/bundle.hpp"
#include "nltheat/symbol.hpp"

namespace nlt {

struct S2SymbolParams {
  int m = 0;
  double alpha0 = 1.0, alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
};

using XBasis = std::array<Mat, 5>;

// X_1..X_5 on S^2(R^m) at direction xi (orthonormal basis of bundle.hpp)
inline XBasis x_basis(int m, const RVec& xi_in) {
  const double n = xi_in.norm();
  if (n == 0.0) throw InputError("x_basis needs xi != 0");
  const Eigen::VectorXd x = xi_in / n;
  const Eigen::MatrixXd Id = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd xx = x * x.transpose();
  XBasis X;
  X[0] = s2_operator(m, [&](const Eigen::MatrixXd& p) -> Eigen::MatrixXd { return p.trace() * Id; });
  X[1] = s2_operator(m, [&](const Eigen::MatrixXd& p) -> Eigen::MatrixXd {
    Eigen::VectorXd px = p * x;
    return 0.5 * (x * px.transpose() + px * x.transpose());
  });
  X[2] = s2_operator(m, [&](const Eigen::MatrixXd& p) -> Eigen::MatrixXd { return p.trace() * xx; });
  X[3] = s2_operator(m, [&](const Eigen::MatrixXd& p) -> Eigen::MatrixXd { return x.dot(p * x) * Id; });
  X[4] = s2_operator(m, [&](const Eigen::MatrixXd& p) -> Eigen::MatrixXd { return x.dot(p * x) * xx; });
  return X;
}

// products X_i X_j = sum_k coef * X_k (row = left factor)
struct TableEntry {
  std::array<double, 5> coef{};
};

inline std::array<std::array<TableEntry, 5>, 5> table1(int m) {
  std::array<std::array<TableEntry, 5>, 5> t{};
  auto set = [&](int i, int j, int k, double c) { t[i][j].coef[k] += c; };
  const double M = m;
  // X1 row
  set(0, 0, 0, M), set(0, 1, 3, 1), set(0, 2, 0, 1), set(0, 3, 3, M), set(0, 4, 3, 1);
  // X2 row
  set(1, 0, 2, 1), set(1, 1, 1, 0.5), set(1, 1, 4, 0.5), set(1, 2, 2, 1), set(1, 3, 4, 1), set(1, 4, 4, 1);
  // X3 row
  set(2, 0, 2, M), set(2, 1, 4, 1), set(2, 2, 2, 1), set(2, 3, 4, M), set(2, 4, 4, 1);
  // X4 row
  set(3, 0, 0, 1), set(3, 1, 3, 1), set(3, 2, 0, 1), set(3, 3, 3, 1), set(3, 4, 3, 1);
  // X5 row
  set(4, 0, 2, 1), set(4, 1, 4, 1), set(4, 2, 2, 1), set(4, 3, 4, 1), set(4, 4, 4, 1);
  return t;
}

struct Table1Report {
  std::array<std::array<double, 5>, 5> residual{};
  double max_residual = 0.0;
};

inline Table1Report table1_check(int m, int n_dirs = 10, std::uint64_t seed = 11) {
  if (m < 2) throw InputError("table check needs m >= 2");
  Table1Report r;
  auto t = table1(m);
  std::mt19937_64 rng(seed);
  for (int n = 0; n < n_dirs; ++n) {
    XBasis X = x_basis(m, quad::random_unit(m, rng));
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        Mat rhs = Mat::Zero(X[0].rows(), X[0].cols());
        for (int k = 0; k < 5; ++k) rhs += t[i][j].coef[k] * X[k];
        double e = max_abs(X[i] * X[j] - rhs);
        r.residual[i][j] = std::max(r.residual[i][j], e);
        r.max_residual = std::max(r.max_residual, e);
      }
  }
  return r;
}

struct YAlgebra {
  Mat P, Y2, Y5;
};

inline YAlgebra y_algebra(int m, const XBasis& X) {
  const int d = static_cast<int>(X[0].rows());
  const double M = m;
  YAlgebra y;
  y.P = identity(d) - X[0] / M;
  y.Y2 = X[1] - (X[2] + X[3]) / M + X[0] / (M * M);
  y.Y5 = X[4] - (X[2] + X[3]) / M + X[0] / (M * M);
  return y;
}

// max residual of P^2 = P, P X1 = X1 P = P X4 = X3 P = 0, Y2 Y5 = Y5 Y2 = Y5^2 = (m-1)/m Y5,
// Y2^2 = Y2/2 + (m-2)/(2m) Y5
inline double y_algebra_residual(int m, const XBasis& X) {
  const double M = m;
  auto y = y_algebra(m, X);
  const Mat c = (M - 1) / M * y.Y5;
  return std::max({max_abs(y.P * y.P - y.P), max_abs(y.P * X[0]), max_abs(X[0] * y.P), max_abs(y.P * X[3]),
                   max_abs(X[2] * y.P), max_abs(y.Y2 * y.Y5 - c), max_abs(y.Y5 * y.Y2 - c), max_abs(y.Y5 * y.Y5 - c),
                   max_abs(y.Y2 * y.Y2 - 0.5 * y.Y2 - (M - 2) / (2 * M) * y.Y5)});
}

struct S20Projectors {
  Mat Pi1, Pi2, Pi3;  // on S^2, vanishing on the trace part
};

inline S20Projectors s20_projectors_s2(int m, const RVec& xi) {
  if (m < 2) throw InputError("projectors need m >= 2");
  auto y = y_algebra(m, x_basis(m, xi));
  const double M = m;
  S20Projectors p;
  p.Pi2 = 2.0 * (y.Y2 - y.Y5);
  p.Pi3 = M / (M - 1) * y.Y5;
  p.Pi1 = y.P - 2.0 * y.Y2 + (M - 2) / (M - 1) * y.Y5;
  return p;
}

// the same projectors in the orthonormal trace-free frame of make_s20_bundle
inline S20Projectors s20_projectors(int m, const RVec& xi) {
  if (m < 3) throw InputError("S2_0 projectors need m >= 3");
  auto p = s20_projectors_s2(m, xi);
  Mat V = s20_embedding(m);
  return {V.adjoint() * p.Pi1 * V, V.adjoint() * p.Pi2 * V, V.adjoint() * p.Pi3 * V};
}

struct S20Eigen {
  double mu1 = 0, mu2 = 0, mu3 = 0;
  bool positive = false;
};

inline S20Eigen s20_eigenvalues(const S2SymbolParams& a) {
  const double M = a.m;
  S20Eigen e;
  e.mu1 = a.alpha0;
  e.mu2 = a.alpha0 + a.alpha2;
  e.mu3 = a.alpha0 + 2.0 * (M - 1) * a.alpha2 / M;
  e.positive = a.alpha0 > 0 && M * a.alpha0 + 2.0 * (M - 1) * a.alpha2 > 0 && e.mu2 > 0;
  return e;
}

struct S2Full {
  double mu1 = 0, mu2 = 0, mu3 = 0;
  double kappa_sym = 0, q_sym = 0, rho = 0, omega = 0, theta = 0, cos_theta = 1, sin_theta = 0;
  double nu3 = 0, nu4 = 0;
  bool positive = false;
  bool degenerate = false;  // omega == 0
};

inline S2Full s2_full_spectrum(const S2SymbolParams& a) {
  const double M = a.m;
  auto e = s20_eigenvalues(a);
  S2Full f;
  f.mu1 = e.mu1;
  f.mu2 = e.mu2;
  f.mu3 = e.mu3;
  f.kappa_sym = std::sqrt(M - 1) * (2.0 * a.alpha2 / M + a.alpha3);
  f.q_sym = a.alpha0 + M * a.alpha1 + 2.0 * a.alpha2 / M + 2.0 * a.alpha3;
  f.rho = 0.5 * (f.mu3 + f.q_sym);
  const double h = 0.5 * (f.mu3 - f.q_sym);
  f.omega = std::sqrt(f.kappa_sym * f.kappa_sym + h * h);
  f.nu3 = f.rho + f.omega;
  f.nu4 = f.rho - f.omega;
  if (f.omega == 0.0) {
    f.degenerate = true;
    f.theta = 0.0;
    f.cos_theta = 1.0;
    f.sin_theta = 0.0;
  } else {
    f.cos_theta = h / f.omega;
    f.sin_theta = f.kappa_sym / f.omega;
    f.theta = std::atan2(f.sin_theta, f.cos_theta);
  }
  f.positive = a.alpha0 > 0 && f.mu2 > 0 && f.mu3 > 0 && f.q_sym > 0 &&
               f.kappa_sym * f.kappa_sym < f.q_sym * f.mu3;
  return f;
}

struct S2FullProjectors {
  Mat Pi1, Pi2, Z3, Z4, T, Tstar;
};

inline S2FullProjectors s2_full_projectors(const S2SymbolParams& a, const RVec& xi) {
  const int m = a.m;
  const double M = m;
  XBasis X = x_basis(m, xi);
  auto y = y_algebra(m, X);
  auto pr = s20_projectors_s2(m, xi);
  auto f = s2_full_spectrum(a);
  const int d = static_cast<int>(X[0].rows());
  S2FullProjectors r;
  r.Pi1 = pr.Pi1;
  r.Pi2 = pr.Pi2;
  r.T = (X[2] - X[0] / M) / std::sqrt(M - 1);
  r.Tstar = (X[3] - X[0] / M) / std::sqrt(M - 1);
  const Mat IP = identity(d) - y.P;
  const double c = f.cos_theta, s = f.sin_theta;
  r.Z3 = 0.5 * (1 + c) * pr.Pi3 + 0.5 * s * (r.T + r.Tstar) + 0.5 * (1 - c) * IP;
  r.Z4 = 0.5 * (1 - c) * pr.Pi3 - 0.5 * s * (r.T + r.Tstar) + 0.5 * (1 + c) * IP;
  return r;
}

// A(xi) = |xi|^2 (alpha0 I + alpha1 X1 + 2 alpha2 X2 + alpha3 (X3 + X4)) as a leading symbol on S^2
inline LeadingSymbol s2_symbol(const S2SymbolParams& a) {
  const int m = a.m;
  auto Aq = [&](const RVec& xi) -> Mat {
    const Eigen::VectorXd x = xi;
    const double n2 = x.squaredNorm();
    const Eigen::MatrixXd Id = Eigen::MatrixXd::Identity(m, m);
    return s2_operator(m, [&](const Eigen::MatrixXd& p) -> Eigen::MatrixXd {
      Eigen::VectorXd px = p * x;
      return a.alpha0 * n2 * p + a.alpha1 * n2 * p.trace() * Id + a.alpha2 * (x * px.transpose() + px * x.transpose()) +
             a.alpha3 * (p.trace() * x * x.transpose() + x.dot(px) * Id);
    });
  };
  LeadingSymbol S(m, s2_dim(m));
  for (int i = 0; i < m; ++i) {
    RVec e = RVec::Zero(m);
    e(i) = 1.0;
    S.a[i][i] = Aq(e);
    for (int j = i + 1; j < m; ++j) {
      RVec p = RVec::Zero(m), q = RVec::Zero(m);
      p(i) = 1, p(j) = 1;
      q(i) = 1, q(j) = -1;
      S.a[i][j] = S.a[j][i] = 0.25 * (Aq(p) - Aq(q));
    }
  }
  return S;
}

// compression to the trace-free subbundle (alpha1, alpha3 drop out)
inline LeadingSymbol s20_symbol(const S2SymbolParams& a) {
  if (a.m < 3) throw InputError("S2_0 symbol needs m >= 3");
  LeadingSymbol full = s2_symbol(a);
  Mat V = s20_embedding(a.m);
  LeadingSymbol S(a.m, static_cast<int>(V.cols()));
  for (int i = 0; i < a.m; ++i)
    for (int j = 0; j < a.m; ++j) S.a[i][j] = V.adjoint() * full.a[i][j] * V;
  return S;
}

}  // namespace nlt
