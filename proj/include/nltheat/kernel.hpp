#pragma once

#include <map>
#include <utility>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

#include "nltheat/quadrature.hpp"
#include "nltheat/symbol.hpp"
#include "nltheat/symten.hpp"

namespace nlt {

struct PhiOptions {
  double z_switch = 2.0;  // series for |z| <= z_switch, integral representation beyond
};

// e^y - sum_{k<n} y^k/k!
inline double exp_tail(int n, double y) {
  if (std::abs(y) <= 1.0) {
    double term = 1.0;
    for (int k = 1; k <= n; ++k) term *= y / k;
    double sum = 0.0, comp = 0.0;
    for (int k = n; k < n + 60; ++k) {
      double t = sum + term;
      comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
      sum = t;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      term *= y / (k + 1);
    }
    return sum + comp;
  }
  double poly = 0.0, term = 1.0;
  for (int k = 0; k < n; ++k) {
    poly += term;
    term *= y / (k + 1);
  }
  return std::exp(y) - poly;
}

// tail series sum_{l>=L} Gamma(m/2-n+l)/(Gamma(m/2+l) l!) z^l with compensated summation;
// L = n gives Phi_n, smaller L gives its derivatives
inline double phi_tail_series(int n, int m, int L, double z) {
  if (z == 0.0) return L == 0 ? std::exp(std::lgamma(0.5 * m - n) - std::lgamma(0.5 * m)) : 0.0;
  const double h = 0.5 * m;
  double lf = 0.0;
  for (int k = 2; k <= L; ++k) lf += std::log(double(k));
  double term = std::exp(std::lgamma(h - n + L) - std::lgamma(h + L) - lf) * std::pow(z, L);
  double sum = 0.0, comp = 0.0;
  for (int k = L; k < L + 4000; ++k) {
    double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
    if (std::abs(term) < 1e-18 * std::abs(sum) && k > L + 2) break;
    term *= (h - n + k) / ((h + k) * (k + 1)) * z;
  }
  return sum + comp;
}

// (1/(n-1)!) int_0^1 u^{m/2-n-1} (1-u)^{n-1} e_L(z u) du, with u = v^2
inline double phi_tail_integral(int n, int m, int L, double z) {
  double fact = 1.0;
  for (int k = 2; k < n; ++k) fact *= k;
  auto f = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double u = v * v;
    return 2.0 * std::pow(v, m - 2 * n - 1) * std::pow(1.0 - u, n - 1) * exp_tail(L, z * u);
  };
  // the integrand varies on the scale v ~ 1/sqrt|z|; split there geometrically
  double acc = 0.0, lo = 0.0;
  double hi = std::min(1.0, 1.0 / std::sqrt(std::max(std::abs(z), 1.0)));
  while (true) {
    acc += quad::integrate(f, lo, hi, 1e-14, nullptr, 12);
    if (hi >= 1.0) break;
    lo = hi;
    hi = std::min(1.0, 2.0 * hi);
  }
  return acc / fact;
}

inline double phi_series(int n, int m, double z) { return n == 0 ? std::exp(z) : phi_tail_series(n, m, n, z); }
inline double phi_integral(int n, int m, double z) { return n == 0 ? std::exp(z) : phi_tail_integral(n, m, n, z); }

inline double phi_n(int n, int m, double z, const PhiOptions& opt = {}) {
  if (n < 0) throw InputError("phi_n needs n >= 0");
  if (n == 0) return std::exp(z);
  return std::abs(z) <= opt.z_switch ? phi_series(n, m, z) : phi_integral(n, m, z);
}

// j-th z-derivative: the tail series in dimension m + 2j starting at order max(n - j, 0)
inline double phi_n_derivative(int n, int m, int j, double z, const PhiOptions& opt = {}) {
  if (n == 0) return std::exp(z);
  const int L = std::max(n - j, 0);
  return std::abs(z) <= opt.z_switch ? phi_tail_series(n, m + 2 * j, L, z) : phi_tail_integral(n, m + 2 * j, L, z);
}

// F_0^K applied to a radial profile h(|x|^2): sum of M * x^mono * h^{(deriv)}(|x|^2)
struct RadialTermSum {
  int m = 0, d = 0;
  std::map<std::pair<MonoKey, int>, Mat> terms;

  static RadialTermSum unit(int m, int d) {
    RadialTermSum r;
    r.m = m;
    r.d = d;
    r.terms[{0, 0}] = identity(d);
    return r;
  }

  void add(MonoKey k, int j, const Mat& M) {
    auto it = terms.find({k, j});
    if (it == terms.end())
      terms.emplace(std::make_pair(k, j), M);
    else
      it->second += M;
  }

  // d/dx_mu with scalar coefficients
  RadialTermSum derivative(int mu) const {
    RadialTermSum r;
    r.m = m;
    r.d = d;
    for (auto& [key, M] : terms) {
      auto [k, j] = key;
      int e = mono_exp(k, mu);
      if (e > 0) r.add(k - mono_var(mu), j, M * double(e));
      r.add(k + mono_var(mu), j + 1, M * 2.0);
    }
    return r;
  }

  // a^{mu nu} d_mu d_nu, blocks multiplied from the left
  RadialTermSum apply_F0(const Blocks& a) const {
    RadialTermSum r;
    r.m = m;
    r.d = d;
    for (int nu = 0; nu < m; ++nu) {
      RadialTermSum dn = derivative(nu);
      for (int mu = 0; mu < m; ++mu) {
        RadialTermSum dd = dn.derivative(mu);
        for (auto& [key, M] : dd.terms) r.add(key.first, key.second, a[mu][nu] * M);
      }
    }
    return r;
  }

  // h_derivs[j] = h^{(j)}(|x|^2)
  Mat evaluate(const RVec& x, const std::vector<double>& h_derivs) const {
    Mat acc = Mat::Zero(d, d);
    for (auto& [key, M] : terms) {
      double v = h_derivs.at(key.second);
      for (int j = 0; j < m; ++j) v *= std::pow(x(j), mono_exp(key.first, j));
      acc += v * M;
    }
    return acc;
  }

  int max_deriv() const {
    int r = 0;
    for (auto& [key, M] : terms) r = std::max(r, key.second);
    return r;
  }
};

class LeadingKernel {
 public:
  explicit LeadingKernel(const SpectralData& D, PhiOptions opt = {}) : D_(D), opt_(opt) {
    if (D.s > 5) throw RankOverflow("F0 powers capped at s <= 5");
    powers_.push_back(RadialTermSum::unit(D.m, D.d));
    for (int k = 1; k < D.s; ++k) powers_.push_back(powers_.back().apply_F0(D.symbol.a));
  }

  // U_0(t | x, y) with r = x - y; F_0 powers carry (-t mu_i)^K
  Mat offdiag(double t, const RVec& r) const {
    if (t <= 0.0) throw InputError("heat kernel needs t > 0");
    const int m = D_.m;
    const double r2 = r.squaredNorm();
    Mat U = Mat::Zero(D_.d, D_.d);
    for (int i = 0; i < D_.s; ++i) {
      const double c = t * D_.mu[i];
      const double pref = std::pow(4.0 * M_PI * c, -0.5 * m);
      const double z = -r2 / (4.0 * c);
      for (int K = 0; K < D_.s; ++K) {
        if (D_.c(i, K) == 0.0) continue;
        const auto& P = powers_[K];
        std::vector<double> hd(P.max_deriv() + 1);
        for (int j = 0; j < static_cast<int>(hd.size()); ++j) {
          double v = phi_n_derivative(K, m, j, z, opt_);
          if (!std::isfinite(v)) throw error("Phi evaluation failed at z = " + std::to_string(z));
          hd[j] = std::pow(-1.0 / (4.0 * c), j) * v;
        }
        U += pref * D_.c(i, K) * std::pow(-c, K) * P.evaluate(r, hd);
      }
    }
    return U;
  }

 private:
  const SpectralData& D_;
  PhiOptions opt_;
  std::vector<RadialTermSum> powers_;
};

inline Mat heat_kernel_offdiag(const SpectralData& D, double t, const RVec& r) { return LeadingKernel(D).offdiag(t, r); }

inline double heat_trace_offdiag(const SpectralData& D, double t, double r) {
  double s = 0.0;
  for (int i = 0; i < D.s; ++i)
    s += D.mult[i] * std::pow(4.0 * M_PI * t * D.mu[i], -0.5 * D.m) * std::exp(-r * r / (4.0 * t * D.mu[i]));
  return s;
}

// trace of the leading resolvent kernel at real lambda < 0
inline double resolvent_trace(const SpectralData& D, double lambda, double r) {
  if (!(lambda < 0.0)) throw InputError("resolvent trace needs lambda < 0");
  if (r <= 0.0 && D.m >= 2) throw InputError("resolvent trace is singular at r = 0");
  const int m = D.m;
  const double nu = 0.5 * (m - 2);
  double s = 0.0;
  for (int i = 0; i < D.s; ++i) {
    const double mu = D.mu[i];
    s += D.mult[i] * std::pow(2.0 * M_PI * mu, -0.5 * m) * std::pow(-lambda * mu / (r * r), 0.5 * nu) *
         boost::math::cyl_bessel_k(nu, std::sqrt(-lambda / mu) * r);
  }
  return s;
}

// int_0^inf e^{t lambda} tr U_0(t, r) dt
inline double resolvent_trace_laplace(const SpectralData& D, double lambda, double r) {
  return quad::integrate([&](double t) { return t <= 0.0 ? 0.0 : std::exp(t * lambda) * heat_trace_offdiag(D, t, r); },
                         0.0, std::numeric_limits<double>::infinity(), 1e-12);
}

// brute-force Fourier integral of exp(-t A(xi)) in polar coordinates: product sphere rule over
// directions, one eigendecomposition per direction, radial integral per eigenvalue
inline Mat fourier_oracle(const SpectralData& D, double t, const RVec& x, int sphere_order = 48, int radial_nodes = 240) {
  const int m = D.m, d = D.d;
  if (m > 3) throw InputError("Fourier oracle limited to m <= 3");
  if (t <= 0.0) throw InputError("Fourier oracle needs t > 0");
  const quad::SphereRule sph = quad::sphere_product_rule(m, sphere_order);
  const quad::Rule1D gl = quad::gauss_legendre(radial_nodes);
  const double smax = 10.0;
  std::vector<double> s_node(radial_nodes), s_w(radial_nodes);
  for (int k = 0; k < radial_nodes; ++k) {
    s_node[k] = 0.5 * smax * (gl.x[k] + 1.0);
    s_w[k] = 0.5 * smax * gl.w[k] * std::pow(s_node[k], m - 1) * std::exp(-s_node[k] * s_node[k]);
  }
  // int_0^inf s^{m-1} e^{-s^2} e^{i s b} ds
  auto radial = [&](double b) {
    cplx acc = 0.0;
    for (int k = 0; k < radial_nodes; ++k) acc += s_w[k] * std::exp(cplx(0.0, s_node[k] * b));
    return acc;
  };
  const double area = 2.0 * std::pow(M_PI, 0.5 * m) / std::tgamma(0.5 * m);
  Mat acc = Mat::Zero(d, d);
  for (size_t q = 0; q < sph.weights.size(); ++q) {
    const RVec w = sph.nodes[q];
    Mat A = eval_symbol(D.symbol, w);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.adjoint()));
    for (int k = 0; k < d; ++k) {
      const double lam = es.eigenvalues()(k);
      const double sc = std::sqrt(t * lam);
      const cplx f = sph.weights[q] * std::pow(sc, -m) * radial(w.dot(x) / sc);
      auto v = es.eigenvectors().col(k);
      acc += f * (v * v.adjoint());
    }
  }
  return area * std::pow(2.0 * M_PI, -m) * acc;
}

}  // namespace nlt
