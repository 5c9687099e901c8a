#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nlt {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// direction-dependent spectrum: the symbol is outside the constant-eigenvalue class
struct NonInvariantSymbol : error {
  using error::error;
};

// two eigenvalues closer than the declared gap
struct DegenerateGap : error {
  using error::error;
};

struct NotPositive : error {
  using error::error;
};

struct RankOverflow : error {
  using error::error;
};

struct InputError : error {
  using error::error;
};

inline double lgamma_ratio(double a, double b) { return std::lgamma(a) - std::lgamma(b); }

// Gamma(a)/Gamma(b) for positive arguments
inline double gamma_ratio(double a, double b) { return std::exp(lgamma_ratio(a, b)); }

// (2n-1)!! with (-1)!! = 1
inline double double_factorial_odd(int n) {
  double r = 1.0;
  for (int k = 2 * n - 1; k > 1; k -= 2) r *= k;
  return r;
}

// sphere average normalisation Gamma(m/2)/Gamma(m/2+n) = 1/((m/2)(m/2+1)...(m/2+n-1))
inline double sphere_factor(int m, int n) { return gamma_ratio(0.5 * m, 0.5 * m + n); }

inline Mat identity(int d) { return Mat::Identity(d, d); }

inline double max_abs(const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

inline double rel_diff(double a, double b) {
  double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

inline double rel_diff(const Mat& a, const Mat& b) {
  double s = std::max(max_abs(a), max_abs(b));
  return s == 0.0 ? 0.0 : max_abs(a - b) / s;
}

inline bool is_real(const Mat& a, double tol = 0.0) { return a.imag().cwiseAbs().maxCoeff() <= tol; }

}  // namespace nlt
