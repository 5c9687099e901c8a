#pragma once

#include <vector>

#include "nltheat/symbol.hpp"

namespace nlt {

struct TorusSpec {
  int m = 0;
  double L = 2.0 * M_PI;
  LeadingSymbol symbol;
  Mat q;          // d x d Hermitian, empty means zero
  int cutoff = 0; // lattice radius; 0 selects it from the tail bound

  double volume() const { return std::pow(L, m); }
};

inline Mat torus_potential(const TorusSpec& T) { return T.q.size() ? T.q : Mat::Zero(T.symbol.d, T.symbol.d); }

// smallest eigenvalue of A(xi-hat) over sampled directions, with a safety margin
inline double symbol_lower_bound(const LeadingSymbol& S) {
  double lo = INFINITY;
  for (auto& xi : sample_directions(S.m, 256, 5)) {
    Mat A = eval_symbol(S, xi);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.adjoint()), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()(0));
  }
  if (!(lo > 0.0)) throw NotPositive("torus symbol is not positive definite");
  return 0.9 * lo;
}

// bound on sum_{|n| > N} d e^{-t(mu_min (2 pi |n|/L)^2 + q_min)} using shell counts inside cubes
inline double torus_tail_bound(const TorusSpec& T, double t, int N) {
  const double mu = symbol_lower_bound(T.symbol);
  Eigen::SelfAdjointEigenSolver<Mat> es(torus_potential(T), Eigen::EigenvaluesOnly);
  const double qmin = es.eigenvalues()(0);
  double tail = 0.0;
  for (int k = N + 1; k < N + 100000; ++k) {
    const double shell = std::pow(2.0 * k + 3.0, T.m) - std::pow(2.0 * k - 1.0, T.m);
    const double term = T.symbol.d * shell * std::exp(-t * (mu * std::pow(2.0 * M_PI * k / T.L, 2) + qmin));
    tail += term;
    if (term < 1e-30 * std::max(tail, 1e-300) || term < 1e-40) break;
  }
  return tail;
}

inline int required_cutoff(const TorusSpec& T, double t_min, double tol = 1e-14) {
  int N = 1;
  while (torus_tail_bound(T, t_min, N) >= tol) {
    N = static_cast<int>(std::ceil(N * 1.25)) + 1;
    if (N > 100000) throw InputError("torus cutoff exceeds 1e5; raise t_min");
  }
  return N;
}

// sum over |n| <= N of tr exp(-t [A(2 pi n/L) + q]) for every t; n and -n share a spectrum
inline std::vector<double> torus_heat_traces(const TorusSpec& T, const std::vector<double>& ts) {
  for (double t : ts)
    if (!(t > 0.0)) throw InputError("torus heat trace needs t > 0");
  if (ts.empty()) return {};
  const int m = T.m, d = T.symbol.d;
  const double t_min = *std::min_element(ts.begin(), ts.end());
  const int need = required_cutoff(T, t_min);
  const int N = T.cutoff > 0 ? T.cutoff : need;
  if (N < need)
    throw InputError("torus cutoff " + std::to_string(N) + " violates the tail bound; need " + std::to_string(need));
  const Mat q = torus_potential(T);
  const bool real = is_real(q) && [&] {
    for (auto& row : T.symbol.a)
      for (auto& b : row)
        if (!is_real(b)) return false;
    return true;
  }();
  std::vector<Eigen::MatrixXd> ar;
  if (real)
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) ar.push_back(T.symbol.a[a][b].real());
  const Eigen::MatrixXd qr = q.real();
  std::vector<long double> acc(ts.size(), 0.0L);
  std::vector<int> n(m, -N);
  const double k0 = 2.0 * M_PI / T.L;
  const long long N2 = static_cast<long long>(N) * N;
  RVec xi(m);
  while (true) {
    long long r2 = 0;
    for (int j = 0; j < m; ++j) r2 += static_cast<long long>(n[j]) * n[j];
    // keep n = 0 and the half-space whose first nonzero coordinate is positive
    int first = 0;
    for (int j = 0; j < m; ++j)
      if (n[j] != 0) {
        first = n[j];
        break;
      }
    if (r2 <= N2 && first >= 0) {
      const double weight = first == 0 ? 1.0 : 2.0;
      for (int j = 0; j < m; ++j) xi(j) = k0 * n[j];
      RVec ev;
      if (real) {
        Eigen::MatrixXd A = qr;
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) A += xi(a) * xi(b) * ar[a * m + b];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
        ev = es.eigenvalues();
      } else {
        Mat A = eval_symbol(T.symbol, xi) + q;
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.adjoint()), Eigen::EigenvaluesOnly);
        ev = es.eigenvalues();
      }
      for (size_t k = 0; k < ts.size(); ++k) {
        double s = 0.0;
        for (int e = 0; e < d; ++e) s += std::exp(-ts[k] * ev(e));
        acc[k] += weight * s;
      }
    }
    int j = m - 1;
    while (j >= 0 && n[j] == N) n[j--] = -N;
    if (j < 0) break;
    ++n[j];
  }
  return std::vector<double>(acc.begin(), acc.end());
}

inline double torus_heat_trace(const TorusSpec& T, double t) { return torus_heat_traces(T, {t}).front(); }

struct AsymptoticFit {
  double A0 = 0.0, A1 = 0.0, A2_nuisance = 0.0;
  double residual = 0.0;  // rms of the fit in the normalised variable
  double condition = 0.0;
  bool ill_conditioned = false;
};

// trace (4 pi t)^{m/2} / vol = A0 - t A1 + c t^2, all per unit volume
inline AsymptoticFit fit_asymptotics(const std::vector<std::pair<double, double>>& samples, int m, double volume,
                                     bool nuisance = true) {
  const int n = static_cast<int>(samples.size());
  const int p = nuisance ? 3 : 2;
  if (n < p) throw InputError("not enough samples for the asymptotic fit");
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (int k = 0; k < n; ++k) {
    const double t = samples[k].first;
    X(k, 0) = 1.0;
    X(k, 1) = -t;
    if (nuisance) X(k, 2) = t * t;
    y(k) = samples[k].second * std::pow(4.0 * M_PI * t, 0.5 * m) / volume;
  }
  // column scaling before the conditioning estimate
  Eigen::VectorXd scale = X.colwise().norm().transpose();
  Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  AsymptoticFit f;
  f.condition = svd.singularValues()(0) / svd.singularValues()(p - 1);
  f.ill_conditioned = f.condition > 1e10;
  Eigen::VectorXd c = svd.solve(y).cwiseQuotient(scale);
  f.A0 = c(0);
  f.A1 = c(1);
  if (nuisance) f.A2_nuisance = c(2);
  f.residual = std::sqrt((X * c - y).squaredNorm() / n);
  return f;
}

struct TorusGrid {
  std::vector<double> t;
};

// 12 geometric points in [t_max/4, t_max] with t_max mu_max (2 pi/L)^2 = 0.05
inline TorusGrid default_torus_grid(double mu_max, double L, int n = 12, double scale = 0.05) {
  const double k2 = std::pow(2.0 * M_PI / L, 2);
  const double t_max = scale / (mu_max * k2);
  const double t_min = 0.25 * t_max;
  TorusGrid g;
  for (int k = 0; k < n; ++k) g.t.push_back(t_min * std::pow(t_max / t_min, double(k) / (n - 1)));
  return g;
}

struct TorusRow {
  double t = 0.0, trace = 0.0, model = 0.0, residual = 0.0;
};

struct TorusFitReport {
  std::vector<TorusRow> rows;
  AsymptoticFit fit;
  int cutoff = 0;
};

inline TorusFitReport torus_fit(const TorusSpec& T, const TorusGrid& grid) {
  TorusFitReport rep;
  rep.cutoff = T.cutoff > 0 ? T.cutoff : required_cutoff(T, *std::min_element(grid.t.begin(), grid.t.end()));
  auto tr = torus_heat_traces(T, grid.t);
  std::vector<std::pair<double, double>> samples;
  for (size_t k = 0; k < tr.size(); ++k) samples.emplace_back(grid.t[k], tr[k]);
  rep.fit = fit_asymptotics(samples, T.m, T.volume());
  for (size_t k = 0; k < tr.size(); ++k) {
    const double t = grid.t[k];
    TorusRow row;
    row.t = t;
    row.trace = tr[k];
    row.model = (rep.fit.A0 - t * rep.fit.A1 + t * t * rep.fit.A2_nuisance) * T.volume() * std::pow(4.0 * M_PI * t, -0.5 * T.m);
    row.residual = row.trace - row.model;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace nlt
