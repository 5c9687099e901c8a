#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nltheat/common.hpp"

namespace nlt {

inline int pair_index(int m, int a, int b) {
  // a < b; row-major over the strict upper triangle
  return a * m - a * (a + 1) / 2 + (b - a - 1);
}

struct FiberBundle {
  int m = 0, d = 0;
  std::string kind = "custom";
  Mat H;                        // fiber metric
  std::vector<Mat> generators;  // T^{ab}, a < b, indexed by pair_index; empty => none supplied
  std::optional<Mat> q;

  bool has_generators() const { return !generators.empty(); }

  // T^{ab} with T^{ba} = -T^{ab}, T^{aa} = 0
  Mat T(int a, int b) const {
    if (!has_generators()) throw InputError("bundle carries no so(m) generators");
    if (a == b) return Mat::Zero(d, d);
    if (a < b) return generators[pair_index(m, a, b)];
    return -generators[pair_index(m, b, a)];
  }
};

// --- symmetric two-tensors ------------------------------------------------------

// orthonormal basis of S^2(R^m) for the pairing phi_{mu nu} psi^{mu nu}:
// E_ii, then (E_ij + E_ji)/sqrt2 for i < j, ordered by (i, j) with i <= j
inline std::vector<Eigen::MatrixXd> s2_basis(int m) {
  std::vector<Eigen::MatrixXd> b;
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, m);
      if (i == j)
        e(i, i) = 1.0;
      else
        e(i, j) = e(j, i) = M_SQRT1_2;
      b.push_back(e);
    }
  return b;
}

inline int s2_dim(int m) { return m * (m + 1) / 2; }

// matrix of a linear map on symmetric m x m matrices in the orthonormal basis
template <class F>
Mat s2_operator(int m, F&& action) {
  auto basis = s2_basis(m);
  const int d = static_cast<int>(basis.size());
  Mat M(d, d);
  for (int k = 0; k < d; ++k) {
    Eigen::MatrixXd img = action(basis[k]);
    for (int j = 0; j < d; ++j) M(j, k) = (basis[j].array() * img.array()).sum();
  }
  return M;
}

// isometric embedding S^2_0 -> S^2 (columns: orthonormal trace-free basis in S^2 coordinates)
inline Mat s20_embedding(int m) {
  auto basis = s2_basis(m);
  const int D = static_cast<int>(basis.size());
  std::vector<Eigen::MatrixXd> tf;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, m);
      e(i, j) = e(j, i) = M_SQRT1_2;
      tf.push_back(e);
    }
  for (int k = 1; k < m; ++k) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, m);
    const double s = 1.0 / std::sqrt(double(k) * (k + 1));
    for (int i = 0; i < k; ++i) e(i, i) = s;
    e(k, k) = -k * s;
    tf.push_back(e);
  }
  Mat V(D, static_cast<int>(tf.size()));
  for (size_t c = 0; c < tf.size(); ++c)
    for (int r = 0; r < D; ++r) V(r, static_cast<int>(c)) = (basis[r].array() * tf[c].array()).sum();
  return V;
}

inline Eigen::MatrixXd rotation_generator(int m, int a, int b) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
  L(a, b) = 1.0;
  L(b, a) = -1.0;
  return L;
}

inline FiberBundle make_s2_bundle(int m) {
  if (m < 2) throw InputError("S2 bundle needs m >= 2");
  FiberBundle B;
  B.m = m;
  B.d = s2_dim(m);
  B.kind = "s2";
  B.H = identity(B.d);
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      Eigen::MatrixXd L = rotation_generator(m, a, b);
      B.generators.push_back(s2_operator(m, [&](const Eigen::MatrixXd& phi) -> Eigen::MatrixXd {
        return L * phi + phi * L.transpose();
      }));
    }
  return B;
}

inline FiberBundle make_s20_bundle(int m) {
  if (m < 3) throw InputError("S2_0 bundle needs m >= 3");
  FiberBundle full = make_s2_bundle(m);
  Mat V = s20_embedding(m);
  FiberBundle B;
  B.m = m;
  B.d = static_cast<int>(V.cols());
  B.kind = "s20";
  B.H = identity(B.d);
  for (auto& T : full.generators) B.generators.push_back(V.adjoint() * T * V);
  return B;
}

// trivial-connection bundle; generators optional
inline FiberBundle make_laplace_bundle(int m, int d, std::vector<Mat> generators = {}) {
  FiberBundle B;
  B.m = m;
  B.d = d;
  B.kind = "laplace";
  B.H = identity(d);
  if (!generators.empty() && static_cast<int>(generators.size()) != m * (m - 1) / 2)
    throw InputError("expected m(m-1)/2 generators");
  B.generators = std::move(generators);
  return B;
}

inline std::vector<Mat> zero_generators(int m, int d) {
  return std::vector<Mat>(m * (m - 1) / 2, Mat::Zero(d, d));
}

struct BundleCheck {
  double anti_adjoint = 0.0;  // max |T^dag H + H T|
  double commutator = 0.0;    // max so(m) relation residual
  double q_hermitian = 0.0;
  double metric = 0.0;  // H Hermitian positive: |H - H^dag|, -min eig if not positive
  bool ok(double tol) const {
    return anti_adjoint <= tol && commutator <= tol && q_hermitian <= tol && metric <= tol;
  }
};

inline BundleCheck check_bundle(const FiberBundle& B) {
  BundleCheck c;
  c.metric = max_abs(B.H - B.H.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(B.H);
  if (es.eigenvalues().minCoeff() <= 0.0) c.metric = std::max(c.metric, 1.0 - es.eigenvalues().minCoeff());
  if (B.q) c.q_hermitian = max_abs(B.H * *B.q - (B.H * *B.q).adjoint());
  if (!B.has_generators()) return c;
  const int m = B.m;
  for (auto& T : B.generators) c.anti_adjoint = std::max(c.anti_adjoint, max_abs(T.adjoint() * B.H + B.H * T));
  auto g = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      for (int cc = 0; cc < m; ++cc)
        for (int dd = cc + 1; dd < m; ++dd) {
          Mat lhs = B.T(a, b) * B.T(cc, dd) - B.T(cc, dd) * B.T(a, b);
          Mat rhs = g(b, cc) * B.T(a, dd) - g(a, cc) * B.T(b, dd) - g(b, dd) * B.T(a, cc) + g(a, dd) * B.T(b, cc);
          c.commutator = std::max(c.commutator, max_abs(lhs - rhs));
        }
  return c;
}

// hard validation used on load
inline void validate_bundle(const FiberBundle& B, double tol = 1e-10) {
  if (B.d < 1 || B.m < 1) throw InputError("bundle dimensions must be positive");
  if (B.H.rows() != B.d || B.H.cols() != B.d) throw InputError("fiber metric has wrong shape");
  if (B.has_generators() && static_cast<int>(B.generators.size()) != B.m * (B.m - 1) / 2)
    throw InputError("expected m(m-1)/2 generators");
  for (auto& T : B.generators)
    if (T.rows() != B.d || T.cols() != B.d) throw InputError("generator has wrong shape");
  auto c = check_bundle(B);
  if (!c.ok(tol))
    throw InputError("bundle invariants violated: anti-adjointness " + std::to_string(c.anti_adjoint) +
                     ", so(m) relations " + std::to_string(c.commutator) + ", q hermiticity " +
                     std::to_string(c.q_hermitian) + ", metric " + std::to_string(c.metric));
}

// H^{1/2} and H^{-1/2}
inline std::pair<Mat, Mat> metric_roots(const Mat& H) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  RVec ev = es.eigenvalues();
  Mat U = es.eigenvectors();
  Mat s = U * ev.cwiseSqrt().asDiagonal() * U.adjoint();
  Mat si = U * ev.cwiseSqrt().cwiseInverse().asDiagonal() * U.adjoint();
  return {s, si};
}

// change to an H-orthonormal fiber frame: X -> H^{1/2} X H^{-1/2}
inline FiberBundle orthonormalize(const FiberBundle& B) {
  auto [s, si] = metric_roots(B.H);
  FiberBundle r = B;
  r.H = identity(B.d);
  for (auto& T : r.generators) T = s * T * si;
  if (r.q) r.q = s * *r.q * si;
  return r;
}

}  // namespace nlt
