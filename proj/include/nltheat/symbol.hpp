#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "nltheat/bundle.hpp"
#include "nltheat/quadrature.hpp"
#include "nltheat/symten.hpp"

namespace nlt {

using Blocks = std::vector<std::vector<Mat>>;

struct LeadingSymbol {
  int m = 0, d = 0;
  Blocks a;  // a[mu][nu], d x d

  LeadingSymbol() = default;
  LeadingSymbol(int m_, int d_) : m(m_), d(d_), a(m_, std::vector<Mat>(m_, Mat::Zero(d_, d_))) {}

  // g^{mu nu} a_{mu nu}
  Mat abar() const {
    Mat s = Mat::Zero(d, d);
    for (int i = 0; i < m; ++i) s += a[i][i];
    return s;
  }
};

inline LeadingSymbol laplace_symbol(int m, int d) {
  LeadingSymbol S(m, d);
  for (int i = 0; i < m; ++i) S.a[i][i] = identity(d);
  return S;
}

inline Mat eval_symbol(const LeadingSymbol& S, const RVec& xi) {
  Mat A = Mat::Zero(S.d, S.d);
  for (int i = 0; i < S.m; ++i)
    for (int j = 0; j < S.m; ++j) A += (xi(i) * xi(j)) * S.a[i][j];
  return A;
}

// J^alpha(xi) = a^{alpha beta} xi_beta
inline Mat eval_current(const LeadingSymbol& S, const RVec& xi, int alpha) {
  Mat J = Mat::Zero(S.d, S.d);
  for (int j = 0; j < S.m; ++j) J += xi(j) * S.a[alpha][j];
  return J;
}

// X -> s X s^{-1} on every block (H-orthonormal frame change)
inline LeadingSymbol transform_symbol(const LeadingSymbol& S, const Mat& s, const Mat& si) {
  LeadingSymbol r = S;
  for (auto& row : r.a)
    for (auto& b : row) b = s * b * si;
  return r;
}

struct SymbolCheck {
  double block_symmetry = 0.0;
  double hermiticity = 0.0;
  double min_eigenvalue = 0.0;
};

inline std::vector<RVec> sample_directions(int m, int n_random, std::uint64_t seed) {
  std::vector<RVec> dirs;
  for (int i = 0; i < m; ++i) {
    RVec e = RVec::Zero(m);
    e(i) = 1.0;
    dirs.push_back(e);
  }
  for (int i = 0; i < m; ++i) {
    RVec e = RVec::Zero(m);
    e(i) += 1.0;
    e((i + 1) % m) += 1.0;
    dirs.push_back(e / e.norm());
  }
  std::mt19937_64 rng(seed);
  for (int k = 0; k < n_random; ++k) dirs.push_back(quad::random_unit(m, rng));
  return dirs;
}

inline SymbolCheck check_symbol(const LeadingSymbol& S, int n_random = 64, std::uint64_t seed = 7) {
  SymbolCheck c;
  for (int i = 0; i < S.m; ++i)
    for (int j = 0; j < S.m; ++j) {
      c.block_symmetry = std::max(c.block_symmetry, max_abs(S.a[i][j] - S.a[j][i]));
      c.hermiticity = std::max(c.hermiticity, max_abs(S.a[i][j] - S.a[i][j].adjoint()));
    }
  c.min_eigenvalue = INFINITY;
  for (auto& xi : sample_directions(S.m, n_random, seed)) {
    Mat A = eval_symbol(S, xi);
    Mat Ah = 0.5 * (A + A.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(Ah, Eigen::EigenvaluesOnly);
    c.min_eigenvalue = std::min(c.min_eigenvalue, es.eigenvalues().minCoeff());
  }
  return c;
}

// --- spectral data -------------------------------------------------------------

struct SpectralOptions {
  double rel_tol = 1e-6;  // eigenvalue clustering tolerance
  int n_random = 64;
  std::uint64_t seed = 20240611;
};

struct SpectralData {
  int m = 0, d = 0, s = 0;
  std::vector<double> mu;
  std::vector<int> mult;
  Eigen::MatrixXd c;  // c(i, k): Pi_i = sum_k c_ik A^k (k from 0)
  LeadingSymbol symbol;
  double spread = 0.0;  // max per-cluster spread over directions, relative to mu_max
  double mu_max() const { return mu.back(); }
};

// row i: coefficients of prod_{j != i} (x - mu_j)/(mu_i - mu_j) in ascending powers
inline Eigen::MatrixXd vandermonde_c(const std::vector<double>& mu, double gap_tol = 1e-12) {
  const int s = static_cast<int>(mu.size());
  double scale = 0.0;
  for (double v : mu) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < s; ++i)
    for (int j = i + 1; j < s; ++j)
      if (std::abs(mu[i] - mu[j]) <= gap_tol * scale)
        throw DegenerateGap("eigenvalues " + std::to_string(mu[i]) + " and " + std::to_string(mu[j]) + " collide");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(s, s);
  for (int i = 0; i < s; ++i) {
    std::vector<double> p{1.0};
    double den = 1.0;
    for (int j = 0; j < s; ++j) {
      if (j == i) continue;
      std::vector<double> q(p.size() + 1, 0.0);
      for (size_t k = 0; k < p.size(); ++k) {
        q[k + 1] += p[k];
        q[k] -= mu[j] * p[k];
      }
      p = q;
      den *= mu[i] - mu[j];
    }
    for (int k = 0; k < s; ++k) c(i, k) = p[k] / den;
  }
  return c;
}

namespace detail {

struct Clusters {
  std::vector<double> means;
  std::vector<int> sizes;
  std::vector<double> widths;
  double min_gap_rel = INFINITY;
};

inline Clusters cluster_sorted(const RVec& ev, double tol) {
  Clusters c;
  const double scale = ev.cwiseAbs().maxCoeff();
  int start = 0;
  const int n = static_cast<int>(ev.size());
  for (int j = 1; j <= n; ++j) {
    if (j == n || ev(j) - ev(j - 1) > tol * scale) {
      double sum = 0.0;
      for (int k = start; k < j; ++k) sum += ev(k);
      c.means.push_back(sum / (j - start));
      c.sizes.push_back(j - start);
      c.widths.push_back(ev(j - 1) - ev(start));
      if (j < n) c.min_gap_rel = std::min(c.min_gap_rel, (ev(j) - ev(j - 1)) / scale);
      start = j;
    }
  }
  return c;
}

}  // namespace detail

inline SpectralData spectral_decompose(const LeadingSymbol& S, const SpectralOptions& opt = {}) {
  auto dirs = sample_directions(S.m, opt.n_random, opt.seed);
  std::vector<detail::Clusters> per;
  for (auto& xi : dirs) {
    Mat A = eval_symbol(S, xi);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.adjoint()), Eigen::EigenvaluesOnly);
    RVec ev = es.eigenvalues();
    if (ev.minCoeff() <= 0.0) throw NotPositive("leading symbol is not positive definite");
    per.push_back(detail::cluster_sorted(ev, opt.rel_tol));
    if (per.back().min_gap_rel <= 10.0 * opt.rel_tol)
      throw DegenerateGap("eigenvalue gap comparable to the clustering tolerance");
  }
  const auto& ref = per.front();
  SpectralData D;
  D.m = S.m;
  D.d = S.d;
  D.s = static_cast<int>(ref.sizes.size());
  D.mult = ref.sizes;
  D.mu.assign(D.s, 0.0);
  std::vector<double> lo(D.s, INFINITY), hi(D.s, -INFINITY);
  double width = 0.0;
  for (auto& c : per) {
    if (c.sizes != ref.sizes) throw NonInvariantSymbol("eigenvalue multiplicities depend on the direction");
    for (int i = 0; i < D.s; ++i) {
      D.mu[i] += c.means[i] / per.size();
      lo[i] = std::min(lo[i], c.means[i]);
      hi[i] = std::max(hi[i], c.means[i]);
      width = std::max(width, c.widths[i]);
    }
  }
  for (int i = 0; i < D.s; ++i) D.spread = std::max(D.spread, hi[i] - lo[i]);
  D.spread = std::max(D.spread, width) / D.mu.back();
  if (D.spread > opt.rel_tol) throw NonInvariantSymbol("eigenvalues depend on the direction (relative spread " +
                                                       std::to_string(D.spread) + ")");
  D.c = vandermonde_c(D.mu);
  D.symbol = S;
  return D;
}

inline Mat unit_symbol(const SpectralData& D, const RVec& xi) {
  const double n2 = xi.squaredNorm();
  if (n2 == 0.0) throw InputError("projector evaluated at xi = 0");
  return eval_symbol(D.symbol, xi) / n2;
}

// Lagrange product prod_{j != i} (A(xi-hat) - mu_j)/(mu_i - mu_j)
inline Mat projector_at(const SpectralData& D, const RVec& xi, int i) {
  Mat A = unit_symbol(D, xi);
  Mat P = identity(D.d);
  for (int j = 0; j < D.s; ++j) {
    if (j == i) continue;
    P = P * (A - D.mu[j] * identity(D.d)) / (D.mu[i] - D.mu[j]);
  }
  return P;
}

inline std::vector<Mat> projectors_at(const SpectralData& D, const RVec& xi) {
  std::vector<Mat> P;
  for (int i = 0; i < D.s; ++i) P.push_back(projector_at(D, xi, i));
  return P;
}

// sum_k c_ik A(xi-hat)^k
inline Mat projector_via_c(const SpectralData& D, const RVec& xi, int i) {
  Mat A = unit_symbol(D, xi), Ak = identity(D.d), P = Mat::Zero(D.d, D.d);
  for (int k = 0; k < D.s; ++k) {
    P += D.c(i, k) * Ak;
    Ak = Ak * A;
  }
  return P;
}

struct ANConstant {
  double tensor_route = 0.0;  // sphere-normalised trace of the symmetrised power
  double eigen_route = 0.0;   // sum_i d_i mu_i^n
  double diff = 0.0;
};

inline double tr_g_sym_power_scale(int m, int n) {
  // Gamma(m/2)/Gamma(m/2+n) (2n)!/(2^{2n} n!)
  return sphere_factor(m, n) * double_factorial_odd(n) * std::ldexp(1.0, -n);
}

inline ANConstant a_n_constant(const SpectralData& D, int n, int cap = kDefaultRankCap) {
  ANConstant r;
  for (int i = 0; i < D.s; ++i) r.eigen_route += D.mult[i] * std::pow(D.mu[i], n);
  if (n == 0) {
    r.tensor_route = D.d;
  } else {
    EndoSymTensor a = endo_tensor(D.symbol.a);
    Mat t = total_trace(sym_power(a, n, cap));
    r.tensor_route = tr_g_sym_power_scale(D.m, n) * t.trace().real();
  }
  r.diff = r.tensor_route - r.eigen_route;
  return r;
}

// --- polynomial forms of projectors ----------------------------------------------

// A(xi)^k as polynomials, k = 0..kmax
inline std::vector<MatPoly> symbol_powers(const LeadingSymbol& S, int kmax) {
  std::vector<MatPoly> P{MatPoly::constant(S.m, identity(S.d))};
  MatPoly A = MatPoly::quadratic(S.a);
  for (int k = 1; k <= kmax; ++k) P.push_back(P.back() * A);
  return P;
}

// homogeneous degree-2(s-1) polynomial equal to Pi_i on the unit sphere
inline MatPoly projector_poly(const SpectralData& D, int i, const std::vector<MatPoly>& powers) {
  MatPoly p(D.m, D.d);
  for (int k = 0; k < D.s; ++k) {
    if (D.c(i, k) == 0.0) continue;
    p = p + powers[k] * MatPoly::norm_power(D.m, D.d, D.s - 1 - k) * cplx(D.c(i, k));
  }
  return p;
}

inline MatPoly projector_poly(const SpectralData& D, int i) { return projector_poly(D, i, symbol_powers(D.symbol, D.s - 1)); }

struct HarmonicComponent {
  int degree = 0;  // 2n
  MatPoly poly;    // harmonic homogeneous polynomial
  EndoSymTensor tensor;
};

inline double multinomial(const std::vector<int>& sorted_idx) {
  double r = 1.0;
  int n = 0, run = 0;
  for (size_t k = 0; k < sorted_idx.size(); ++k) {
    ++n;
    run = (k > 0 && sorted_idx[k] == sorted_idx[k - 1]) ? run + 1 : 1;
    r = r * n / run;
  }
  return r;
}

inline EndoSymTensor poly_to_tensor(const MatPoly& p, int degree, int cap = kDefaultRankCap) {
  check_rank(degree, cap);
  EndoSymTensor T(p.m, degree, Mat::Zero(p.d, p.d));
  size_t k = 0;
  for_each_sorted_tuple(p.m, degree, [&](const std::vector<int>& I) {
    MonoKey key = 0;
    for (int v : I) key += mono_var(v);
    auto it = p.terms.find(key);
    if (it != p.terms.end()) T.entries[k] = it->second / multinomial(I);
    ++k;
  });
  return T;
}

// Pi_i = sum_n Pi_{i(2n)} xi...xi/|xi|^{2n} with trace-free Pi_{i(2n)}, n = 0..s-1
inline std::vector<HarmonicComponent> harmonic_components(const SpectralData& D, int i, int cap = kDefaultRankCap) {
  const int N = 2 * (D.s - 1);
  check_rank(N, cap);
  const int m = D.m;
  MatPoly p = projector_poly(D, i);
  const int J = N / 2;
  // Delta^k p
  std::vector<MatPoly> lap{p};
  for (int k = 1; k <= J; ++k) lap.push_back(lap.back().laplacian());
  auto nj = [&](int j) { return N - 2 * j; };
  auto Dcoef = [&](int j, int k) {
    double r = 1.0;
    for (int q = 0; q < k; ++q) r *= 2.0 * (j - q) * (2.0 * (j - q) + m - 2 + 2 * nj(j));
    return r;
  };
  std::vector<MatPoly> h(J + 1);
  for (int k = J; k >= 0; --k) {
    MatPoly acc = lap[k];
    for (int j = k + 1; j <= J; ++j) acc = acc - MatPoly::norm_power(m, D.d, j - k) * h[j] * cplx(Dcoef(j, k));
    h[k] = acc * cplx(1.0 / Dcoef(k, k));
  }
  std::vector<HarmonicComponent> out;
  for (int k = J; k >= 0; --k) {
    HarmonicComponent c;
    c.degree = nj(k);
    c.poly = h[k];
    if (c.poly.terms.empty()) c.poly = MatPoly::constant(m, Mat::Zero(D.d, D.d)) * cplx(0.0);
    c.tensor = poly_to_tensor(h[k], c.degree, cap);
    out.push_back(c);
  }
  return out;
}

}  // namespace nlt
