#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "nltheat/common.hpp"

namespace nlt {

inline constexpr int kDefaultRankCap = 8;

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline size_t binom_count(int n, int k) { return static_cast<size_t>(std::llround(binom(n, k))); }

// --- multi-indices -----------------------------------------------------------

// number of non-decreasing tuples of length r over [0,m)
inline size_t sorted_tuple_count(int m, int r) { return binom_count(m + r - 1, r); }

// lexicographic rank of a sorted tuple
inline size_t sorted_tuple_rank(int m, const std::vector<int>& idx) {
  const int r = static_cast<int>(idx.size());
  size_t k = 0;
  int prev = 0;
  for (int p = 0; p < r; ++p) {
    const int rest = r - p - 1;
    for (int v = prev; v < idx[p]; ++v) k += binom_count(m - v + rest - 1, rest);
    prev = idx[p];
  }
  return k;
}

// calls f(tuple) for every sorted tuple in lexicographic order
template <class F>
void for_each_sorted_tuple(int m, int r, F&& f) {
  std::vector<int> t(r, 0);
  if (r == 0) {
    f(t);
    return;
  }
  while (true) {
    f(t);
    int p = r - 1;
    while (p >= 0 && t[p] == m - 1) --p;
    if (p < 0) return;
    ++t[p];
    for (int q = p + 1; q < r; ++q) t[q] = t[p];
  }
}

// every perfect matching of {0,...,n-1} (n even), as a list of pairs
template <class F>
void for_each_matching(int n, F&& f) {
  std::vector<std::pair<int, int>> pairs;
  std::vector<bool> used(n, false);
  std::function<void()> rec = [&]() {
    int first = -1;
    for (int i = 0; i < n; ++i)
      if (!used[i]) {
        first = i;
        break;
      }
    if (first < 0) {
      f(static_cast<const std::vector<std::pair<int, int>>&>(pairs));
      return;
    }
    used[first] = true;
    for (int j = first + 1; j < n; ++j) {
      if (used[j]) continue;
      used[j] = true;
      pairs.emplace_back(first, j);
      rec();
      pairs.pop_back();
      used[j] = false;
    }
    used[first] = false;
  };
  if (n % 2 == 0) rec();
}

// --- SymTensor ---------------------------------------------------------------

template <class T>
struct SymTensor {
  int dim = 0;
  int rank = 0;
  std::vector<T> entries;  // one per sorted multi-index

  SymTensor() = default;
  SymTensor(int m, int r, const T& zero) : dim(m), rank(r), entries(sorted_tuple_count(m, r), zero) {}

  const T& at(std::vector<int> idx) const {
    std::sort(idx.begin(), idx.end());
    return entries[sorted_tuple_rank(dim, idx)];
  }
  T& at(std::vector<int> idx) {
    std::sort(idx.begin(), idx.end());
    return entries[sorted_tuple_rank(dim, idx)];
  }
};

using RealSymTensor = SymTensor<double>;
using EndoSymTensor = SymTensor<Mat>;

inline void check_rank(int r, int cap) {
  if (r > cap) throw RankOverflow("symmetric tensor rank " + std::to_string(r) + " exceeds cap " + std::to_string(cap));
}

inline RealSymTensor metric_tensor(int m) {
  RealSymTensor g(m, 2, 0.0);
  for (int i = 0; i < m; ++i) g.at({i, i}) = 1.0;
  return g;
}

// rank-2 endomorphism-valued tensor from the m x m block array
inline EndoSymTensor endo_tensor(const std::vector<std::vector<Mat>>& blocks) {
  const int m = static_cast<int>(blocks.size());
  const int d = static_cast<int>(blocks[0][0].rows());
  EndoSymTensor a(m, 2, Mat::Zero(d, d));
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) a.at({i, j}) = blocks[i][j];
  return a;
}

inline RealSymTensor sym_power(const RealSymTensor& base, int n, int cap = kDefaultRankCap) {
  if (base.rank != 2) throw InputError("sym_power needs a rank-2 base");
  check_rank(2 * n, cap);
  const int m = base.dim;
  RealSymTensor out(m, 2 * n, 0.0);
  const double norm = 1.0 / double_factorial_odd(n);
  size_t k = 0;
  for_each_sorted_tuple(m, 2 * n, [&](const std::vector<int>& I) {
    double acc = 0.0;
    for_each_matching(2 * n, [&](const std::vector<std::pair<int, int>>& pm) {
      double p = 1.0;
      for (auto [a, b] : pm) p *= base.at({I[a], I[b]});
      acc += p;
    });
    out.entries[k++] = acc * norm;
  });
  return out;
}

// endomorphism-valued power: average over all index orderings of the ordered factor product.
// a is symmetric, so arrangements are enumerated with each factor's index pair sorted and
// weighted by the number of raw orderings they stand for.
inline EndoSymTensor sym_power(const EndoSymTensor& base, int n, int cap = kDefaultRankCap) {
  if (base.rank != 2) throw InputError("sym_power needs a rank-2 base");
  check_rank(2 * n, cap);
  const int m = base.dim;
  const int d = static_cast<int>(base.entries[0].rows());
  EndoSymTensor out(m, 2 * n, Mat::Zero(d, d));
  size_t k = 0;
  for_each_sorted_tuple(m, 2 * n, [&](const std::vector<int>& I) {
    Mat acc = Mat::Zero(d, d);
    double wsum = 0.0;
    std::vector<int> p(I);
    do {
      bool sorted_pairs = true;
      int distinct = 0;
      for (int f = 0; f < n; ++f) {
        if (p[2 * f] > p[2 * f + 1]) sorted_pairs = false;
        if (p[2 * f] != p[2 * f + 1]) ++distinct;
      }
      if (!sorted_pairs) continue;
      const double w = std::ldexp(1.0, distinct);
      Mat prod = Mat::Identity(d, d);
      for (int f = 0; f < n; ++f) prod = prod * base.entries[sorted_tuple_rank(m, {p[2 * f], p[2 * f + 1]})];
      acc += w * prod;
      wsum += w;
    } while (std::next_permutation(p.begin(), p.end()));
    out.entries[k++] = acc / wsum;
  });
  return out;
}

template <class T>
T total_trace(const SymTensor<T>& P) {
  if (P.rank % 2) throw InputError("total_trace of odd rank tensor");
  const int n = P.rank / 2, m = P.dim;
  T acc = P.entries[0] * 0.0;
  std::vector<int> mu(n, 0), idx(2 * n);
  const size_t total = static_cast<size_t>(std::pow(m, n));
  for (size_t c = 0; c < total; ++c) {
    size_t r = c;
    for (int j = 0; j < n; ++j) {
      mu[j] = static_cast<int>(r % m);
      r /= m;
      idx[2 * j] = idx[2 * j + 1] = mu[j];
    }
    acc = acc + P.at(idx);
  }
  return acc;
}

// one contraction of the first index pair: rank 2n -> 2n-2
template <class T>
SymTensor<T> partial_trace(const SymTensor<T>& P) {
  if (P.rank < 2) throw InputError("partial_trace needs rank >= 2");
  SymTensor<T> out(P.dim, P.rank - 2, P.entries[0] * 0.0);
  size_t k = 0;
  for_each_sorted_tuple(P.dim, P.rank - 2, [&](const std::vector<int>& I) {
    T acc = P.entries[0] * 0.0;
    std::vector<int> full(I);
    full.push_back(0);
    full.push_back(0);
    for (int mu = 0; mu < P.dim; ++mu) {
      full[P.rank - 2] = full[P.rank - 1] = mu;
      acc = acc + P.at(full);
    }
    out.entries[k++] = acc;
  });
  return out;
}

// <xi_{mu1} ... xi_{mu2n}> for the Gaussian with <xi_mu xi_nu> = g/2
inline RealSymTensor gaussian_moment(int m, int n, int cap = kDefaultRankCap) {
  check_rank(2 * n, cap);
  RealSymTensor out(m, 2 * n, 0.0);
  const double scale = std::ldexp(1.0, -n);
  size_t k = 0;
  for_each_sorted_tuple(m, 2 * n, [&](const std::vector<int>& I) {
    double acc = 0.0;
    for_each_matching(2 * n, [&](const std::vector<std::pair<int, int>>& pm) {
      bool ok = true;
      for (auto [a, b] : pm) ok = ok && I[a] == I[b];
      acc += ok ? 1.0 : 0.0;
    });
    out.entries[k++] = acc * scale;
  });
  return out;
}

// <xi_{mu1} ... xi_{mu2n}> over the unit sphere
inline RealSymTensor sphere_moment(int m, int n, int cap = kDefaultRankCap) {
  RealSymTensor g = gaussian_moment(m, n, cap);
  const double f = sphere_factor(m, n);
  for (auto& e : g.entries) e *= f;
  return g;
}

// --- homogeneous polynomials with matrix coefficients -------------------------

// exponent vector packed 5 bits per variable (m <= 12, degree per variable <= 31)
using MonoKey = std::uint64_t;

inline int mono_exp(MonoKey k, int j) { return static_cast<int>((k >> (5 * j)) & 31u); }
inline MonoKey mono_var(int j) { return MonoKey(1) << (5 * j); }

inline int mono_degree(MonoKey k, int m) {
  int s = 0;
  for (int j = 0; j < m; ++j) s += mono_exp(k, j);
  return s;
}

inline MonoKey mono_parity(MonoKey k) {
  MonoKey mask = 0;
  for (int j = 0; j < 12; ++j) mask |= MonoKey(mono_exp(k, j) & 1) << j;
  return mask;
}

// Gaussian moment of a monomial, <xi_mu xi_nu> = delta/2
inline double mono_gaussian(MonoKey k, int m) {
  double r = 1.0;
  for (int j = 0; j < m; ++j) {
    int e = mono_exp(k, j);
    if (e & 1) return 0.0;
    r *= double_factorial_odd(e / 2) * std::ldexp(1.0, -e / 2);
  }
  return r;
}

inline double mono_sphere(MonoKey k, int m) {
  double g = mono_gaussian(k, m);
  return g == 0.0 ? 0.0 : g * sphere_factor(m, mono_degree(k, m) / 2);
}

inline int poly_degree_cap() { return 24; }

struct MatPoly {
  int m = 0, d = 0;
  std::map<MonoKey, Mat> terms;

  MatPoly() = default;
  MatPoly(int m_, int d_) : m(m_), d(d_) {
    if (m > 12) throw InputError("polynomial engine supports m <= 12");
  }

  static MatPoly constant(int m, const Mat& c) {
    MatPoly p(m, static_cast<int>(c.rows()));
    p.terms[0] = c;
    return p;
  }

  // A(xi) = a^{mu nu} xi_mu xi_nu
  static MatPoly quadratic(const std::vector<std::vector<Mat>>& a) {
    const int m = static_cast<int>(a.size());
    MatPoly p(m, static_cast<int>(a[0][0].rows()));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) p.add_term(mono_var(i) + mono_var(j), a[i][j]);
    return p;
  }

  // J^alpha(xi) = a^{alpha beta} xi_beta
  static MatPoly linear_row(const std::vector<std::vector<Mat>>& a, int alpha) {
    const int m = static_cast<int>(a.size());
    MatPoly p(m, static_cast<int>(a[0][0].rows()));
    for (int j = 0; j < m; ++j) p.add_term(mono_var(j), a[alpha][j]);
    return p;
  }

  // |xi|^{2k} times the identity
  static MatPoly norm_power(int m, int d, int k) {
    MatPoly r = constant(m, Mat::Identity(d, d));
    MatPoly q(m, d);
    for (int j = 0; j < m; ++j) q.add_term(2 * mono_var(j), Mat::Identity(d, d));
    for (int i = 0; i < k; ++i) r = r * q;
    return r;
  }

  void add_term(MonoKey k, const Mat& c) {
    auto it = terms.find(k);
    if (it == terms.end())
      terms.emplace(k, c);
    else
      it->second += c;
  }

  int degree() const { return terms.empty() ? 0 : mono_degree(terms.begin()->first, m); }

  MatPoly operator+(const MatPoly& o) const {
    MatPoly r = *this;
    for (auto& [k, c] : o.terms) r.add_term(k, c);
    return r;
  }
  MatPoly operator-(const MatPoly& o) const { return *this + o * cplx(-1.0); }
  MatPoly operator*(cplx s) const {
    MatPoly r = *this;
    for (auto& [k, c] : r.terms) c *= s;
    return r;
  }
  // ordered product: coefficients multiply as (this) * (o)
  MatPoly operator*(const MatPoly& o) const {
    MatPoly r(m, d);
    for (auto& [k1, c1] : terms)
      for (auto& [k2, c2] : o.terms) {
        if (mono_degree(k1, m) + mono_degree(k2, m) > poly_degree_cap())
          throw RankOverflow("polynomial degree exceeds cap");
        r.add_term(k1 + k2, c1 * c2);
      }
    return r;
  }

  Mat eval(const RVec& x) const {
    Mat acc = Mat::Zero(d, d);
    for (auto& [k, c] : terms) {
      double v = 1.0;
      for (int j = 0; j < m; ++j) v *= std::pow(x(j), mono_exp(k, j));
      acc += v * c;
    }
    return acc;
  }

  MatPoly derivative(int j) const {
    MatPoly r(m, d);
    for (auto& [k, c] : terms) {
      int e = mono_exp(k, j);
      if (e > 0) r.add_term(k - mono_var(j), c * double(e));
    }
    return r;
  }

  MatPoly laplacian() const {
    MatPoly r(m, d);
    for (int j = 0; j < m; ++j) {
      for (auto& [k, c] : terms) {
        int e = mono_exp(k, j);
        if (e > 1) r.add_term(k - 2 * mono_var(j), c * double(e * (e - 1)));
      }
    }
    return r;
  }

  // sphere average of the restriction to |xi| = 1
  Mat sphere_average() const {
    Mat acc = Mat::Zero(d, d);
    for (auto& [k, c] : terms) {
      double w = mono_sphere(k, m);
      if (w != 0.0) acc += w * c;
    }
    return acc;
  }
};

// sphere average of the ordered product L(xi) R(xi); pairs only parity-compatible monomials
inline Mat average_product(const MatPoly& L, const MatPoly& R) {
  const int m = L.m, d = L.d;
  std::map<MonoKey, std::vector<std::pair<MonoKey, const Mat*>>> by_parity;
  for (auto& [k, c] : R.terms) by_parity[mono_parity(k)].emplace_back(k, &c);
  Mat acc = Mat::Zero(d, d), S(d, d);
  for (auto& [k1, c1] : L.terms) {
    auto it = by_parity.find(mono_parity(k1));
    if (it == by_parity.end()) continue;
    S.setZero();
    bool any = false;
    for (auto& [k2, c2] : it->second) {
      double w = mono_sphere(k1 + k2, m);
      if (w != 0.0) {
        S += w * (*c2);
        any = true;
      }
    }
    if (any) acc += c1 * S;
  }
  return acc;
}

// --- chain averages ----------------------------------------------------------

// one factor of an ordered chain: a^{s0 s1} where a slot is either contracted with
// xi-hat (kHat) or carries a free index label; blocks == nullptr means a constant matrix
struct ChainLink {
  static constexpr int kHat = -1;
  const std::vector<std::vector<Mat>>* blocks = nullptr;
  int slot0 = kHat, slot1 = kHat;
  Mat constant;
};

namespace detail {

inline MatPoly link_poly(const ChainLink& l, int m, int d, const std::vector<int>& free_vals) {
  if (!l.blocks) return MatPoly::constant(m, l.constant);
  const auto& a = *l.blocks;
  MatPoly p(m, d);
  auto rng = [&](int slot) -> std::vector<int> {
    if (slot == ChainLink::kHat) {
      std::vector<int> v(m);
      std::iota(v.begin(), v.end(), 0);
      return v;
    }
    return {free_vals[slot]};
  };
  for (int i : rng(l.slot0))
    for (int j : rng(l.slot1)) {
      MonoKey k = 0;
      if (l.slot0 == ChainLink::kHat) k += mono_var(i);
      if (l.slot1 == ChainLink::kHat) k += mono_var(j);
      p.add_term(k, a[i][j]);
    }
  return p;
}

inline int hat_count(const std::vector<ChainLink>& chain) {
  int n = 0;
  for (auto& l : chain)
    if (l.blocks) n += (l.slot0 == ChainLink::kHat) + (l.slot1 == ChainLink::kHat);
  return n;
}

}  // namespace detail

// <chain> over the unit sphere; result indexed by the free labels in row-major order
// (label 0 slowest). Odd number of xi-hat slots gives zeros.
inline std::vector<Mat> chain_average(const std::vector<ChainLink>& chain, int m, int d, int n_free) {
  const size_t count = static_cast<size_t>(std::pow(m, n_free));
  std::vector<Mat> out(count, Mat::Zero(d, d));
  if (chain.empty() || detail::hat_count(chain) % 2) return out;
  std::vector<int> fv(n_free);
  for (size_t c = 0; c < count; ++c) {
    size_t r = c;
    for (int f = n_free - 1; f >= 0; --f) {
      fv[f] = static_cast<int>(r % m);
      r /= m;
    }
    MatPoly left = detail::link_poly(chain[0], m, d, fv);
    for (size_t j = 1; j + 1 < chain.size(); ++j) left = left * detail::link_poly(chain[j], m, d, fv);
    if (chain.size() == 1)
      out[c] = left.sphere_average();
    else
      out[c] = average_product(left, detail::link_poly(chain.back(), m, d, fv));
  }
  return out;
}

// literal route: sphere moment as an explicit sum over perfect matchings of the xi-hat slots
inline std::vector<Mat> chain_average_matchings(const std::vector<ChainLink>& chain, int m, int d, int n_free,
                                                int cap = kDefaultRankCap) {
  const int nh = detail::hat_count(chain);
  check_rank(nh, cap);
  const size_t count = static_cast<size_t>(std::pow(m, n_free));
  std::vector<Mat> out(count, Mat::Zero(d, d));
  if (nh % 2) return out;
  const int npair = nh / 2;
  const double scale = sphere_factor(m, npair) * std::ldexp(1.0, -npair);
  // slot -> position among xi-hat slots
  std::vector<std::pair<int, int>> hat_pos(chain.size(), {-1, -1});
  int h = 0;
  for (size_t j = 0; j < chain.size(); ++j) {
    if (!chain[j].blocks) continue;
    if (chain[j].slot0 == ChainLink::kHat) hat_pos[j].first = h++;
    if (chain[j].slot1 == ChainLink::kHat) hat_pos[j].second = h++;
  }
  std::vector<int> fv(n_free), hv(nh), pv(npair);
  for (size_t c = 0; c < count; ++c) {
    size_t r = c;
    for (int f = n_free - 1; f >= 0; --f) {
      fv[f] = static_cast<int>(r % m);
      r /= m;
    }
    Mat acc = Mat::Zero(d, d);
    for_each_matching(nh, [&](const std::vector<std::pair<int, int>>& pm) {
      const size_t total = static_cast<size_t>(std::pow(m, npair));
      for (size_t e = 0; e < total; ++e) {
        size_t q = e;
        for (int p = 0; p < npair; ++p) {
          pv[p] = static_cast<int>(q % m);
          q /= m;
          hv[pm[p].first] = hv[pm[p].second] = pv[p];
        }
        Mat prod = Mat::Identity(d, d);
        for (size_t j = 0; j < chain.size(); ++j) {
          const auto& l = chain[j];
          if (!l.blocks) {
            prod = prod * l.constant;
            continue;
          }
          int i0 = l.slot0 == ChainLink::kHat ? hv[hat_pos[j].first] : fv[l.slot0];
          int i1 = l.slot1 == ChainLink::kHat ? hv[hat_pos[j].second] : fv[l.slot1];
          prod = prod * (*l.blocks)[i0][i1];
        }
        acc += prod;
      }
    });
    out[c] = acc * scale;
  }
  return out;
}

}  // namespace nlt
