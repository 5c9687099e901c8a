#pragma once

#include <optional>
#include <vector>

#include "nltheat/gavg.hpp"
#include "nltheat/kernel.hpp"
#include "nltheat/symbol.hpp"

namespace nlt {

// straight ray from x' (start) to x (end); world function and its gradient at x
struct RayFrame {
  RVec x_start, x_end;
  double sigma = 0.0;
  RVec sigma_mu;
  RVec direction;

  RayFrame() = default;
  RayFrame(const RVec& xs, const RVec& xe) : x_start(xs), x_end(xe) {
    if (xs.size() != xe.size()) throw InputError("ray endpoints differ in dimension");
    sigma_mu = xe - xs;
    sigma = 0.5 * sigma_mu.squaredNorm();
    if (sigma <= 0.0) throw InputError("degenerate ray (x = x')");
    direction = sigma_mu.normalized();
  }

  // the same ray evaluated at x' + s (x - x')
  RayFrame at(double s) const { return RayFrame(x_start, x_start + s * sigma_mu); }
};

struct NCheck {
  Mat direct, projector_form;
  double diff = 0.0;
};

inline NCheck N_endomorphism(const SpectralData& D, const RayFrame& ray, int i) {
  const double mi = D.mu[i];
  NCheck r;
  r.direct = (ray.sigma * identity(D.d) - eval_symbol(D.symbol, ray.sigma_mu) / (2.0 * mi)) / (2.0 * mi);
  auto P = projectors_at(D, ray.sigma_mu);
  r.projector_form = Mat::Zero(D.d, D.d);
  for (int k = 0; k < D.s; ++k)
    if (k != i) r.projector_form += ray.sigma / (2.0 * mi * mi) * (mi - D.mu[k]) * P[k];
  r.diff = max_abs(r.direct - r.projector_form);
  return r;
}

// D_v A = 2 a^{mu nu} xi_mu v_nu
inline Mat symbol_directional_derivative(const LeadingSymbol& S, const RVec& xi, const RVec& v) {
  Mat dA = Mat::Zero(S.d, S.d);
  for (int nu = 0; nu < S.m; ++nu) dA += 2.0 * v(nu) * eval_current(S, xi, nu);
  return dA;
}

// first-order eigenprojection perturbation of Pi_i(xi) along v
inline Mat projector_derivative(const SpectralData& D, const RVec& xi, int i, const RVec& v) {
  const double n2 = xi.squaredNorm();
  if (n2 == 0.0) throw InputError("projector derivative at xi = 0");
  auto P = projectors_at(D, xi);
  const Mat dA = symbol_directional_derivative(D.symbol, xi, v);
  Mat r = Mat::Zero(D.d, D.d);
  for (int k = 0; k < D.s; ++k) {
    if (k == i) continue;
    const double gap = D.mu[i] - D.mu[k];
    if (std::abs(gap) <= 1e-14 * D.mu_max()) throw DegenerateGap("coincident eigenvalues in projector derivative");
    r += (P[k] * dA * P[i] + P[i] * dA * P[k]) / (gap * n2);
  }
  return r;
}

inline Mat projector_derivative_fd(const SpectralData& D, const RVec& xi, int i, const RVec& v, double h = 1e-5) {
  return (projector_at(D, xi + h * v, i) - projector_at(D, xi - h * v, i)) / (2.0 * h);
}

// sum_{mu nu} a^{mu nu} sigma_mu d_nu P_i, with d_nu acting on P_i(x - x')
inline Mat current_projector_gradient(const SpectralData& D, const RayFrame& ray, int i) {
  Mat acc = Mat::Zero(D.d, D.d);
  for (int nu = 0; nu < D.m; ++nu) {
    RVec e = RVec::Zero(D.m);
    e(nu) = 1.0;
    acc += eval_current(D.symbol, ray.sigma_mu, nu) * projector_derivative(D, ray.sigma_mu, i, e);
  }
  return acc;
}

// flat space: sigma_{mu nu} = g_{mu nu}
inline Mat K_endomorphism(const SpectralData& D, const RayFrame& ray, int i) {
  const double mi = D.mu[i];
  const Mat P = projector_at(D, ray.sigma_mu, i);
  const Mat inner = 2.0 * current_projector_gradient(D, ray, i) + D.symbol.abar() - D.m * mi * identity(D.d);
  return P * inner * P / (2.0 * mi);
}

// psi with its spatial gradient and t d/dt at the ray endpoint
struct TransportField {
  Mat psi;
  std::vector<Mat> grad;
  Mat t_dt;
};

// psi = P_i(x - x') B with B constant
inline TransportField projected_constant(const SpectralData& D, const RayFrame& ray, int i, const Mat& B) {
  TransportField f;
  f.psi = projector_at(D, ray.sigma_mu, i) * B;
  for (int nu = 0; nu < D.m; ++nu) {
    RVec e = RVec::Zero(D.m);
    e(nu) = 1.0;
    f.grad.push_back(projector_derivative(D, ray.sigma_mu, i, e) * B);
  }
  f.t_dt = Mat::Zero(D.d, D.d);
  return f;
}

// L_i psi in flat space (Delta = 1)
inline Mat apply_L(const SpectralData& D, const RayFrame& ray, int i, const TransportField& f) {
  const double mi = D.mu[i];
  Mat r = f.t_dt - 0.5 * D.m * f.psi + D.symbol.abar() * f.psi / (2.0 * mi);
  for (int nu = 0; nu < D.m; ++nu) r += eval_current(D.symbol, ray.sigma_mu, nu) * f.grad[nu] / mi;
  return r;
}

struct ChiStep {
  Mat chi;
  Mat L_psi;
  double range_residual = 0.0;     // |P_i chi|
  double recursion_residual = 0.0; // max_n |(sigma/2mu_i^2)(mu_i-mu_n) P_n chi + P_n L_i psi|
};

inline ChiStep chi_step(const SpectralData& D, const RayFrame& ray, int i, const TransportField& psi) {
  const double mi = D.mu[i];
  auto P = projectors_at(D, ray.sigma_mu);
  ChiStep r;
  r.L_psi = apply_L(D, ray, i, psi);
  r.chi = Mat::Zero(D.d, D.d);
  for (int n = 0; n < D.s; ++n) {
    if (n == i) continue;
    if (std::abs(mi - D.mu[n]) <= 1e-14 * D.mu_max()) throw DegenerateGap("coincident eigenvalues in chi step");
    r.chi += mi * mi / (mi - D.mu[n]) * P[n] * r.L_psi;
  }
  r.chi *= -2.0 / ray.sigma;
  r.range_residual = max_abs(P[i] * r.chi);
  for (int n = 0; n < D.s; ++n) {
    if (n == i) continue;
    Mat lhs = ray.sigma / (2.0 * mi * mi) * (mi - D.mu[n]) * P[n] * r.chi;
    r.recursion_residual = std::max(r.recursion_residual, max_abs(lhs + P[n] * r.L_psi));
  }
  return r;
}

inline ChiStep chi_step(const SpectralData& D, const RayFrame& ray, int i, const Mat& B) {
  return chi_step(D, ray, i, projected_constant(D, ray, i, B));
}

// S_i = sigma/(2 t mu_i): (1/mu_i) dS/dt + |grad S|^2, relative to the size of either term
inline double hamilton_jacobi_residual(double mu_i, double t, const RVec& x, const RVec& xp) {
  const RVec dx = x - xp;
  const double sigma = 0.5 * dx.squaredNorm();
  const double dSdt = -sigma / (2.0 * t * t * mu_i);
  const RVec gradS = dx / (2.0 * t * mu_i);
  const double lhs = dSdt / mu_i + gradS.squaredNorm();
  const double scale = std::max(std::abs(dSdt / mu_i), 1e-300);
  return std::abs(lhs) / scale;
}

// only defined when K_i vanishes; otherwise the tau-integral diverges along a flat ray
struct Psi0Result {
  double K_norm = 0.0;
  bool convergent = false;
  std::optional<Mat> psi0;
};

inline Psi0Result psi0_leading(const SpectralData& D, const RayFrame& ray, int i, const Mat& avg_Pi_i, double tol = 1e-10) {
  Psi0Result r;
  r.K_norm = max_abs(K_endomorphism(D, ray, i));
  r.convergent = r.K_norm <= tol;
  if (r.convergent) r.psi0 = avg_Pi_i;
  return r;
}

struct AnsatzRow {
  double t = 0.0;
  double exact_trace = 0.0, ansatz_trace = 0.0;
  double exact_exponent = 0.0, ansatz_exponent = 0.0;  // -t log(trace)
  double matrix_diff = 0.0;
};

struct ExponentFit {
  double constant = 0.0;  // limit of -t log tr U_0
  double target = 0.0;    // sigma/(2 mu_max)
  double rel_err = 0.0;
};

struct AnsatzReport {
  std::vector<AnsatzRow> rows;
  ExponentFit fit;
  double initial_condition_diff = 0.0;  // sum_i <Pi_i> vs identity
};

inline std::vector<Mat> avg_projectors(const SpectralData& D) {
  ExactAverager av(D);
  std::vector<Mat> P;
  for (int i = 0; i < D.s; ++i) P.push_back(av.projector(i));
  return P;
}

inline Mat polarized_ansatz(const SpectralData& D, const std::vector<Mat>& avgPi, double t, double sigma) {
  Mat U = Mat::Zero(D.d, D.d);
  for (int i = 0; i < D.s; ++i)
    U += std::pow(4.0 * M_PI * t * D.mu[i], -0.5 * D.m) * std::exp(-sigma / (2.0 * t * D.mu[i])) * avgPi[i];
  return U;
}

// least squares of -t log tr U_0 on {1, t log t, t}
inline ExponentFit fit_trace_exponent(const SpectralData& D, double sigma, double t_lo = 1e-3, double t_hi = 1e-2,
                                      int n = 16) {
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  const double r = std::sqrt(2.0 * sigma);
  for (int k = 0; k < n; ++k) {
    const double t = t_lo * std::pow(t_hi / t_lo, double(k) / (n - 1));
    X(k, 0) = 1.0;
    X(k, 1) = t * std::log(t);
    X(k, 2) = t;
    // log of the trace, factoring out the slowest-decaying channel
    const int s = D.s;
    double lead = 0.5 * D.m * std::log(4.0 * M_PI * t * D.mu[s - 1]) + r * r / (4.0 * t * D.mu[s - 1]);
    double rest = 0.0;
    for (int i = 0; i < s; ++i)
      rest += D.mult[i] * std::exp(-0.5 * D.m * std::log(4.0 * M_PI * t * D.mu[i]) - r * r / (4.0 * t * D.mu[i]) + lead);
    y(k) = -t * (std::log(rest) - lead);
  }
  Eigen::VectorXd c = X.colPivHouseholderQr().solve(y);
  ExponentFit f;
  f.constant = c(0);
  f.target = sigma / (2.0 * D.mu_max());
  f.rel_err = std::abs(f.constant - f.target) / f.target;
  return f;
}

inline AnsatzReport polarized_ansatz_compare(const SpectralData& D, const std::vector<double>& ts, const RayFrame& ray) {
  AnsatzReport rep;
  const auto avgPi = avg_projectors(D);
  Mat sum = Mat::Zero(D.d, D.d);
  for (auto& P : avgPi) sum += P;
  rep.initial_condition_diff = max_abs(sum - identity(D.d));
  LeadingKernel K(D);
  for (double t : ts) {
    AnsatzRow row;
    row.t = t;
    Mat U = K.offdiag(t, ray.sigma_mu);
    Mat V = polarized_ansatz(D, avgPi, t, ray.sigma);
    row.exact_trace = std::real(U.trace());
    row.ansatz_trace = std::real(V.trace());
    row.exact_exponent = -t * std::log(row.exact_trace);
    row.ansatz_exponent = -t * std::log(row.ansatz_trace);
    row.matrix_diff = max_abs(U - V);
    rep.rows.push_back(row);
  }
  rep.fit = fit_trace_exponent(D, ray.sigma);
  return rep;
}

}  // namespace nlt
