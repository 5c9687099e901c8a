#pragma once

#include <functional>
#include <random>
#include <vector>

#include "nltheat/bundle.hpp"
#include "nltheat/quadrature.hpp"
#include "nltheat/symbol.hpp"
#include "nltheat/symten.hpp"

namespace nlt {

using MatGrid = std::vector<std::vector<Mat>>;

struct AvgSet {
  std::vector<Mat> avgPi;
  MatGrid avgPJPJ;    // sum over alpha of <Pi_i J^alpha Pi_k J_alpha>
  MatGrid avgPJPJ_T;  // sum over nu, alpha of [<J^nu Pi_i J^alpha Pi_k> + <Pi_i J^alpha Pi_k J^nu>] T_[nu alpha]
  bool has_T = false;
};

// T_[nu alpha] in terms of the stored generators
inline Mat t_bracket(const FiberBundle& B, int nu, int alpha) { return 0.5 * B.T(nu, alpha); }

// exact sphere averages via the pairing sum over monomials
class ExactAverager {
 public:
  explicit ExactAverager(const SpectralData& D) : D_(D) {
    powers_ = symbol_powers(D.symbol, std::max(D.s - 1, 0));
    for (int i = 0; i < D.s; ++i) proj_.push_back(projector_poly(D, i, powers_));
    for (int a = 0; a < D.m; ++a) cur_.push_back(MatPoly::linear_row(D.symbol.a, a));
    pj_.assign(D.s, {});
    for (int i = 0; i < D.s; ++i)
      for (int a = 0; a < D.m; ++a) pj_[i].push_back(proj_[i] * cur_[a]);
    jp_.assign(D.m, {});
    for (int a = 0; a < D.m; ++a)
      for (int i = 0; i < D.s; ++i) jp_[a].push_back(cur_[a] * proj_[i]);
  }

  // <A(xi-hat)^k> as an ordered chain
  Mat symbol_power_average(int k) const {
    if (k == 0) return identity(D_.d);
    std::vector<ChainLink> chain(k);
    for (auto& l : chain) l.blocks = &D_.symbol.a;
    return chain_average(chain, D_.m, D_.d, 0)[0];
  }

  Mat projector(int i) const {
    Mat r = Mat::Zero(D_.d, D_.d);
    for (int k = 0; k < D_.s; ++k) r += D_.c(i, k) * symbol_power_average(k);
    return r;
  }

  Mat pjpj(int i, int k) const {
    Mat r = Mat::Zero(D_.d, D_.d);
    for (int a = 0; a < D_.m; ++a) r += average_product(pj_[i][a], pj_[k][a]);
    return r;
  }

  // <Pi_i J^alpha Pi_k J^beta>
  Mat pjpj_resolved(int i, int k, int alpha, int beta) const { return average_product(pj_[i][alpha], pj_[k][beta]); }

  Mat pjpj_T(const FiberBundle& B, int i, int k) const {
    if (!B.has_generators()) throw InputError("T-contracted average needs bundle generators");
    Mat r = Mat::Zero(D_.d, D_.d);
    for (int nu = 0; nu < D_.m; ++nu)
      for (int a = 0; a < D_.m; ++a) {
        if (nu == a) continue;
        Mat s = average_product(jp_[nu][i], jp_[a][k]);
        s += average_product(pj_[i][a], pj_[k][nu]);
        r += s * t_bracket(B, nu, a);
      }
    return r;
  }

  AvgSet all(const FiberBundle* B = nullptr) const {
    AvgSet S;
    for (int i = 0; i < D_.s; ++i) S.avgPi.push_back(projector(i));
    S.avgPJPJ.assign(D_.s, std::vector<Mat>(D_.s));
    for (int i = 0; i < D_.s; ++i)
      for (int k = 0; k < D_.s; ++k) S.avgPJPJ[i][k] = pjpj(i, k);
    if (B && B->has_generators()) {
      S.has_T = true;
      S.avgPJPJ_T.assign(D_.s, std::vector<Mat>(D_.s));
      for (int i = 0; i < D_.s; ++i)
        for (int k = 0; k < D_.s; ++k) S.avgPJPJ_T[i][k] = pjpj_T(*B, i, k);
    }
    return S;
  }

 private:
  const SpectralData& D_;
  std::vector<MatPoly> powers_, proj_, cur_;
  std::vector<std::vector<MatPoly>> pj_, jp_;  // Pi_i J^a and J^a Pi_i
};

inline Mat avg_projector(const SpectralData& D, int i) { return ExactAverager(D).projector(i); }
inline Mat avg_PJPJ(const SpectralData& D, int i, int k) { return ExactAverager(D).pjpj(i, k); }
inline Mat avg_PJPJ_T(const SpectralData& D, const FiberBundle& B, int i, int k) {
  return ExactAverager(D).pjpj_T(B, i, k);
}

// the same projector average through the symmetrised power tensors and their total traces
inline Mat avg_projector_tensor_route(const SpectralData& D, int i, int cap = kDefaultRankCap) {
  if (D.s > 5) throw RankOverflow("tensor route supports s <= 5");
  EndoSymTensor a = endo_tensor(D.symbol.a);
  Mat r = D.c(i, 0) * identity(D.d);
  for (int k = 1; k < D.s; ++k) r += D.c(i, k) * tr_g_sym_power_scale(D.m, k) * total_trace(sym_power(a, k, cap));
  return r;
}

// --- quadrature oracles -----------------------------------------------------------

struct QuadResult {
  Mat mean;
  Mat stderr_;  // entrywise standard error (zero for deterministic rules)
  long n = 0;
};

enum class SphereMethod { Auto, Product, MonteCarlo };

struct SphereQuadOptions {
  SphereMethod method = SphereMethod::Auto;
  int order = 12;        // product rule: exact below degree 2*order
  long samples = 200000;  // Monte Carlo evaluations (antithetic pairs count twice)
  std::uint64_t seed = 99;
};

inline QuadResult sphere_quadrature_avg(int m, const std::function<Mat(const RVec&)>& f,
                                        const SphereQuadOptions& opt = {}) {
  SphereMethod meth = opt.method;
  if (meth == SphereMethod::Auto) meth = m <= 3 ? SphereMethod::Product : SphereMethod::MonteCarlo;
  QuadResult r;
  if (meth == SphereMethod::Product) {
    auto rule = quad::sphere_product_rule(m, opt.order);
    for (size_t j = 0; j < rule.nodes.size(); ++j) {
      Mat v = f(rule.nodes[j]);
      if (j == 0) r.mean = Mat::Zero(v.rows(), v.cols());
      r.mean += rule.weights[j] * v;
    }
    r.stderr_ = Mat::Zero(r.mean.rows(), r.mean.cols());
    r.n = static_cast<long>(rule.nodes.size());
    return r;
  }
  std::mt19937_64 rng(opt.seed);
  const long pairs = std::max<long>(1, opt.samples / 2);
  Eigen::MatrixXd sre, sim, qre, qim;
  for (long p = 0; p < pairs; ++p) {
    RVec x = quad::random_unit(m, rng);
    Mat v = 0.5 * (f(x) + f(-x));
    if (p == 0) {
      r.mean = Mat::Zero(v.rows(), v.cols());
      sre = qre = sim = qim = Eigen::MatrixXd::Zero(v.rows(), v.cols());
    }
    sre += v.real();
    sim += v.imag();
    qre += v.real().cwiseAbs2();
    qim += v.imag().cwiseAbs2();
  }
  const double n = static_cast<double>(pairs);
  Eigen::MatrixXd mre = sre / n, mim = sim / n;
  r.mean = mre.cast<cplx>() + cplx(0, 1) * mim.cast<cplx>();
  Eigen::MatrixXd vre = (qre / n - mre.cwiseAbs2()).cwiseMax(0.0) / (n - 1);
  Eigen::MatrixXd vim = (qim / n - mim.cwiseAbs2()).cwiseMax(0.0) / (n - 1);
  r.stderr_ = (vre + vim).cwiseSqrt().cast<cplx>();
  r.n = 2 * pairs;
  return r;
}

// pointwise evaluation of all average integrands on a deterministic sphere rule
inline AvgSet quadrature_averages(const SpectralData& D, const FiberBundle* B, const quad::SphereRule& rule) {
  const int s = D.s, m = D.m, d = D.d;
  AvgSet S;
  S.avgPi.assign(s, Mat::Zero(d, d));
  S.avgPJPJ.assign(s, std::vector<Mat>(s, Mat::Zero(d, d)));
  const bool withT = B && B->has_generators();
  S.has_T = withT;
  if (withT) S.avgPJPJ_T.assign(s, std::vector<Mat>(s, Mat::Zero(d, d)));
  std::vector<Mat> Tb;
  if (withT)
    for (int nu = 0; nu < m; ++nu)
      for (int a = 0; a < m; ++a) Tb.push_back(t_bracket(*B, nu, a));
  for (size_t n = 0; n < rule.nodes.size(); ++n) {
    const RVec& x = rule.nodes[n];
    const double w = rule.weights[n];
    auto P = projectors_at(D, x);
    std::vector<Mat> J;
    for (int a = 0; a < m; ++a) J.push_back(eval_current(D.symbol, x, a));
    for (int i = 0; i < s; ++i) {
      S.avgPi[i] += w * P[i];
      for (int k = 0; k < s; ++k)
        for (int a = 0; a < m; ++a) {
          Mat PJPk = P[i] * J[a] * P[k];
          S.avgPJPJ[i][k] += w * (PJPk * J[a]);
          if (withT)
            for (int nu = 0; nu < m; ++nu) {
              if (nu == a) continue;
              S.avgPJPJ_T[i][k] += w * ((J[nu] * PJPk + PJPk * J[nu]) * Tb[nu * m + a]);
            }
        }
    }
  }
  return S;
}

inline int averaging_degree(const SpectralData& D) { return 4 * (D.s - 1) + 2; }

inline AvgSet quadrature_averages(const SpectralData& D, const FiberBundle* B, int order = 0) {
  if (order <= 0) order = averaging_degree(D) / 2 + 1;
  return quadrature_averages(D, B, quad::sphere_product_rule(D.m, order));
}

// Monte Carlo estimates of scalar functionals of the averages, with standard errors.
// Functionals: tr(W <Pi_i>), tr <Pi_i J Pi_k J>, tr(W <Pi_i J Pi_k J>), tr of the T-contracted average.
struct MCFunctionals {
  Eigen::VectorXd mean, stderr_;
  std::vector<std::string> names;
  long n = 0;
};

namespace detail {

template <class Scalar>
MCFunctionals mc_functionals_impl(const SpectralData& D, const FiberBundle* B, const Mat& Wc, long samples,
                                  std::uint64_t seed) {
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  auto conv = [](const Mat& a) -> M {
    if constexpr (std::is_same_v<Scalar, double>)
      return a.real();
    else
      return a;
  };
  const int s = D.s, m = D.m, d = D.d;
  std::vector<std::vector<M>> a(m, std::vector<M>(m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a[i][j] = conv(D.symbol.a[i][j]);
  const M W = conv(Wc);
  const bool withT = B && B->has_generators();
  std::vector<M> Tb;
  if (withT)
    for (int nu = 0; nu < m; ++nu)
      for (int al = 0; al < m; ++al) Tb.push_back(conv(t_bracket(*B, nu, al)));
  MCFunctionals R;
  for (int i = 0; i < s; ++i) R.names.push_back("tr(W<Pi_" + std::to_string(i + 1) + ">)");
  for (int i = 0; i < s; ++i)
    for (int k = 0; k < s; ++k) {
      R.names.push_back("tr<PJPJ>_" + std::to_string(i + 1) + std::to_string(k + 1));
      R.names.push_back("tr(W<PJPJ>)_" + std::to_string(i + 1) + std::to_string(k + 1));
      if (withT) R.names.push_back("tr<PJPJ_T>_" + std::to_string(i + 1) + std::to_string(k + 1));
    }
  const int nf = static_cast<int>(R.names.size());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(nf), sq = Eigen::VectorXd::Zero(nf), val(nf), pv(nf);
  std::mt19937_64 rng(seed);
  const long pairs = std::max<long>(1, samples / 2);
  const M I = M::Identity(d, d);
  std::vector<M> P(s), J(m), PJ(s * m), WPJ(s * m), Z(m), PZ(s * m);
  for (long p = 0; p < pairs; ++p) {
    RVec x0 = quad::random_unit(m, rng);
    pv.setZero();
    for (int sign = 0; sign < 2; ++sign) {
      RVec x = sign ? RVec(-x0) : x0;
      M A = M::Zero(d, d);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) A += (x(i) * x(j)) * a[i][j];
      for (int i = 0; i < s; ++i) {
        P[i] = I;
        for (int j = 0; j < s; ++j)
          if (j != i) P[i] = P[i] * ((A - D.mu[j] * I) / (D.mu[i] - D.mu[j]));
      }
      for (int al = 0; al < m; ++al) {
        J[al] = M::Zero(d, d);
        for (int b = 0; b < m; ++b) J[al] += x(b) * a[al][b];
      }
      for (int i = 0; i < s; ++i)
        for (int al = 0; al < m; ++al) {
          PJ[i * m + al] = P[i] * J[al];
          WPJ[i * m + al] = W * PJ[i * m + al];
        }
      if (withT) {
        for (int al = 0; al < m; ++al) {
          Z[al] = M::Zero(d, d);
          for (int nu = 0; nu < m; ++nu) {
            if (nu == al) continue;
            Z[al] += Tb[nu * m + al] * J[nu] + J[nu] * Tb[nu * m + al];
          }
        }
        for (int k = 0; k < s; ++k)
          for (int al = 0; al < m; ++al) PZ[k * m + al] = P[k] * Z[al];
      }
      int f = 0;
      for (int i = 0; i < s; ++i) val(f++) = std::real((W.transpose().array() * P[i].array()).sum());
      for (int i = 0; i < s; ++i)
        for (int k = 0; k < s; ++k) {
          double t1 = 0, t2 = 0, t3 = 0;
          for (int al = 0; al < m; ++al) {
            const M& X = PJ[i * m + al];
            const M& Y = PJ[k * m + al];
            t1 += std::real((X.transpose().array() * Y.array()).sum());
            t2 += std::real((WPJ[i * m + al].transpose().array() * Y.array()).sum());
            if (withT) t3 += std::real((X.transpose().array() * PZ[k * m + al].array()).sum());
          }
          val(f++) = t1;
          val(f++) = t2;
          if (withT) val(f++) = t3;
        }
      pv += 0.5 * val;
    }
    sum += pv;
    sq += pv.cwiseAbs2();
  }
  const double n = static_cast<double>(pairs);
  R.mean = sum / n;
  R.stderr_ = ((sq / n - R.mean.cwiseAbs2()).cwiseMax(0.0) / (n - 1)).cwiseSqrt();
  R.n = 2 * pairs;
  return R;
}

}  // namespace detail

inline MCFunctionals mc_average_functionals(const SpectralData& D, const FiberBundle* B, const Mat& W, long samples,
                                            std::uint64_t seed) {
  bool real = is_real(W);
  for (auto& row : D.symbol.a)
    for (auto& b : row) real = real && is_real(b);
  if (B)
    for (auto& T : B->generators) real = real && is_real(T);
  if (real) return detail::mc_functionals_impl<double>(D, B, W, samples, seed);
  return detail::mc_functionals_impl<cplx>(D, B, W, samples, seed);
}

// the same functionals from an exact AvgSet, in the same order
inline Eigen::VectorXd functionals_of(const AvgSet& S, const Mat& W) {
  const int s = static_cast<int>(S.avgPi.size());
  std::vector<double> v;
  for (int i = 0; i < s; ++i) v.push_back(std::real((W * S.avgPi[i]).trace()));
  for (int i = 0; i < s; ++i)
    for (int k = 0; k < s; ++k) {
      v.push_back(std::real(S.avgPJPJ[i][k].trace()));
      v.push_back(std::real((W * S.avgPJPJ[i][k]).trace()));
      if (S.has_T) v.push_back(std::real(S.avgPJPJ_T[i][k].trace()));
    }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

}  // namespace nlt
