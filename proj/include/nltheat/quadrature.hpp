#pragma once

#include <functional>
#include <random>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nltheat/common.hpp"

namespace nlt::quad {

struct Rule1D {
  std::vector<double> x, w;
};

// Golub-Welsch from the Jacobi matrix of a symmetric weight (zero diagonal)
// offdiag_sq[k] = b_{k+1}; weights scaled to sum to mu0
inline Rule1D golub_welsch(const std::vector<double>& offdiag_sq, double mu0) {
  const int n = static_cast<int>(offdiag_sq.size()) + 1;
  RVec diag = RVec::Zero(n), sub(n - 1);
  for (int k = 0; k < n - 1; ++k) sub(k) = std::sqrt(offdiag_sq[k]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    r.x[i] = es.eigenvalues()(i);
    double v = es.eigenvectors()(0, i);
    r.w[i] = mu0 * v * v;
  }
  return r;
}

inline Rule1D gauss_legendre(int n) {
  std::vector<double> b;
  for (int k = 1; k < n; ++k) b.push_back(double(k) * k / ((2.0 * k - 1) * (2.0 * k + 1)));
  return golub_welsch(b, 2.0);
}

// weight exp(-x^2) on the real line
inline Rule1D gauss_hermite(int n) {
  std::vector<double> b;
  for (int k = 1; k < n; ++k) b.push_back(0.5 * k);
  return golub_welsch(b, std::sqrt(M_PI));
}

// weight (1-t^2)^a on [-1,1], a > -1/2; weights normalised to 1
inline Rule1D gauss_gegenbauer(int n, double a) {
  std::vector<double> b;
  for (int k = 1; k < n; ++k) {
    double s = 2.0 * k + 2.0 * a;
    b.push_back(4.0 * k * (k + a) * (k + a) * (k + 2.0 * a) / (s * s * (s + 1.0) * (s - 1.0)));
  }
  return golub_welsch(b, 1.0);
}

struct SphereRule {
  int m = 0;
  std::vector<RVec> nodes;
  std::vector<double> weights;  // sum to 1
};

// product rule on S^{m-1}, exact for polynomials of degree < 2*order
inline SphereRule sphere_product_rule(int m, int order) {
  SphereRule r;
  r.m = m;
  if (m < 1) throw InputError("sphere rule needs m >= 1");
  if (m == 1) {
    for (double s : {-1.0, 1.0}) {
      RVec v(1);
      v(0) = s;
      r.nodes.push_back(v);
      r.weights.push_back(0.5);
    }
    return r;
  }
  if (m == 2) {
    const int n = 2 * order;
    for (int j = 0; j < n; ++j) {
      double ph = (2.0 * M_PI * (j + 0.5)) / n;
      RVec v(2);
      v << std::cos(ph), std::sin(ph);
      r.nodes.push_back(v);
      r.weights.push_back(1.0 / n);
    }
    return r;
  }
  Rule1D t = (m == 3) ? gauss_legendre(order) : gauss_gegenbauer(order, 0.5 * (m - 3));
  if (m == 3)
    for (auto& w : t.w) w *= 0.5;
  SphereRule sub = sphere_product_rule(m - 1, order);
  for (size_t i = 0; i < t.x.size(); ++i) {
    double c = std::sqrt(std::max(0.0, 1.0 - t.x[i] * t.x[i]));
    for (size_t j = 0; j < sub.nodes.size(); ++j) {
      RVec v(m);
      v(0) = t.x[i];
      v.tail(m - 1) = c * sub.nodes[j];
      r.nodes.push_back(v);
      r.weights.push_back(t.w[i] * sub.weights[j]);
    }
  }
  return r;
}

inline RVec random_unit(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  RVec v(m);
  do {
    for (int i = 0; i < m; ++i) v(i) = nd(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

inline RVec random_gaussian(int m, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  RVec v(m);
  for (int i = 0; i < m; ++i) v(i) = nd(rng);
  return v;
}

// adaptive Gauss-Kronrod on [a,b] (infinite limits allowed)
template <class F>
double integrate(F f, double a, double b, double tol = 1e-13, double* err = nullptr, unsigned depth = 20) {
  double e = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, depth, tol, &e);
  if (err) *err = e;
  return v;
}

}  // namespace nlt::quad
