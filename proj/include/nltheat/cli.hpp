#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "json.hpp"
#include "nltheat/bundle.hpp"
#include "nltheat/gavg.hpp"
#include "nltheat/heatcoef.hpp"
#include "nltheat/kernel.hpp"
#include "nltheat/s2forms.hpp"
#include "nltheat/semiclass.hpp"
#include "nltheat/symbol.hpp"
#include "nltheat/toml.hpp"
#include "nltheat/torus.hpp"

namespace nlt::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> t{"spectrum", "coeffs", "kernel", "s2", "semiclass", "verify"};
  return t;
}

// --- config loading ------------------------------------------------------------------

inline json parse_config_text(const std::string& text, bool as_json) {
  if (as_json) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  return TomlReader::parse(text);
}

inline json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const bool as_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return parse_config_text(ss.str(), as_json);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// --- typed access --------------------------------------------------------------------

inline const json& section(const json& cfg, const char* name) {
  static const json empty = json::object();
  if (!cfg.contains(name)) return empty;
  if (!cfg.at(name).is_object()) throw InputError(std::string("config section '") + name + "' must be a table");
  return cfg.at(name);
}

template <class T>
T get_or(const json& sec, const char* key, T def) {
  if (!sec.contains(key)) return def;
  try {
    return sec.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("config key '") + key + "' has the wrong type");
  }
}

inline double as_number(const json& v, const std::string& what) {
  if (!v.is_number()) throw InputError(what + " must be a number");
  return v.get<double>();
}

inline Eigen::MatrixXd real_matrix(const json& v, const std::string& what) {
  if (!v.is_array() || v.empty() || !v[0].is_array()) throw InputError(what + " must be a nested array");
  const int r = static_cast<int>(v.size()), c = static_cast<int>(v[0].size());
  Eigen::MatrixXd M(r, c);
  for (int i = 0; i < r; ++i) {
    if (!v[i].is_array() || static_cast<int>(v[i].size()) != c) throw InputError(what + " has ragged rows");
    for (int j = 0; j < c; ++j) M(i, j) = as_number(v[i][j], what);
  }
  return M;
}

// nested array, or {re = ..., im = ...}
inline Mat read_matrix(const json& v, const std::string& what) {
  if (v.is_object()) {
    if (!v.contains("re")) throw InputError(what + " needs a 're' part");
    Eigen::MatrixXd re = real_matrix(v.at("re"), what + ".re");
    Eigen::MatrixXd im = v.contains("im") ? real_matrix(v.at("im"), what + ".im") : Eigen::MatrixXd::Zero(re.rows(), re.cols());
    if (im.rows() != re.rows() || im.cols() != re.cols()) throw InputError(what + " re/im shapes differ");
    return re.cast<cplx>() + cplx(0, 1) * im.cast<cplx>();
  }
  return real_matrix(v, what).cast<cplx>();
}

inline void expect_shape(const Mat& M, int r, int c, const std::string& what) {
  if (M.rows() != r || M.cols() != c)
    throw InputError(what + " has shape " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()) + ", expected " +
                     std::to_string(r) + "x" + std::to_string(c));
}

inline json matrix_json(const Mat& M, double zero_tol = 0.0) {
  auto rows = [&](const Eigen::MatrixXd& X) {
    json a = json::array();
    for (int i = 0; i < X.rows(); ++i) {
      json r = json::array();
      for (int j = 0; j < X.cols(); ++j) r.push_back(X(i, j));
      a.push_back(r);
    }
    return a;
  };
  if (is_real(M, zero_tol)) return rows(M.real());
  return json{{"re", rows(M.real())}, {"im", rows(M.imag())}};
}

inline json matrix_json(const Eigen::MatrixXd& M) { return matrix_json(Mat(M.cast<cplx>())); }

// --- problem assembly ----------------------------------------------------------------

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

struct Problem {
  std::string kind;
  int m = 0;
  FiberBundle bundle;
  LeadingSymbol symbol;
  std::optional<S2SymbolParams> alphas;
  Mat q;
  SpectralOptions spec_opt;
  std::uint64_t seed = 20240611;
};

inline Problem build_problem(const json& cfg, const RunOptions& opt) {
  Problem P;
  const json& b = section(cfg, "bundle");
  const json& sy = section(cfg, "symbol");
  const json& nu = section(cfg, "numeric");
  P.kind = get_or<std::string>(b, "kind", "");
  if (P.kind.empty()) throw InputError("bundle.kind is required (s2 | s20 | laplace | custom)");
  if (!b.contains("m")) throw InputError("bundle.m is required");
  P.m = get_or<int>(b, "m", 0);
  if (P.m < 1 || P.m > 12) throw InputError("bundle.m must be in [1, 12]");
  const int m = P.m;

  P.seed = opt.seed ? *opt.seed : get_or<std::uint64_t>(nu, "seed", 20240611);
  P.spec_opt.rel_tol = opt.tol ? *opt.tol : get_or<double>(nu, "rel_tol", 1e-6);
  P.spec_opt.n_random = get_or<int>(nu, "directions", 64);
  P.spec_opt.seed = P.seed;
  if (!(P.spec_opt.rel_tol > 0.0)) throw InputError("tolerance must be positive");

  auto read_alphas = [&]() {
    if (!sy.contains("alpha")) throw InputError("symbol.alpha is required for kind " + P.kind);
    const json& a = sy.at("alpha");
    if (!a.is_array() || a.size() < 1 || a.size() > 4) throw InputError("symbol.alpha must list 1 to 4 numbers");
    S2SymbolParams p;
    p.m = m;
    double* dst[4] = {&p.alpha0, &p.alpha1, &p.alpha2, &p.alpha3};
    if (P.kind == "s20" && a.size() == 2) {
      p.alpha0 = as_number(a[0], "alpha");
      p.alpha2 = as_number(a[1], "alpha");
      p.alpha1 = p.alpha3 = 0.0;
    } else {
      p.alpha1 = p.alpha2 = p.alpha3 = 0.0;
      for (size_t k = 0; k < a.size(); ++k) *dst[k] = as_number(a[k], "alpha");
    }
    return p;
  };

  if (P.kind == "s2") {
    P.bundle = make_s2_bundle(m);
    P.alphas = read_alphas();
    P.symbol = s2_symbol(*P.alphas);
  } else if (P.kind == "s20") {
    P.bundle = make_s20_bundle(m);
    P.alphas = read_alphas();
    P.symbol = s20_symbol(*P.alphas);
  } else if (P.kind == "laplace" || P.kind == "custom") {
    int d = get_or<int>(b, "d", 0);
    std::vector<Mat> gens;
    if (b.contains("generators")) {
      const json& g = b.at("generators");
      if (!g.is_array()) throw InputError("bundle.generators must be an array of matrices");
      for (size_t k = 0; k < g.size(); ++k) gens.push_back(read_matrix(g[k], "bundle.generators[" + std::to_string(k) + "]"));
      if (d == 0 && !gens.empty()) d = static_cast<int>(gens[0].rows());
    }
    if (P.kind == "custom" && !sy.contains("blocks")) throw InputError("custom bundles need symbol.blocks");
    if (sy.contains("blocks")) {
      const json& bl = sy.at("blocks");
      if (!bl.is_array() || static_cast<int>(bl.size()) != m) throw InputError("symbol.blocks must be an m x m array of matrices");
      if (d == 0) {
        if (!bl[0].is_array() || bl[0].empty()) throw InputError("symbol.blocks must be an m x m array of matrices");
        d = static_cast<int>(read_matrix(bl[0][0], "symbol.blocks[0][0]").rows());
      }
    }
    if (d < 1) throw InputError("bundle.d is required");
    P.bundle = make_laplace_bundle(m, d);
    P.bundle.kind = P.kind;
    for (size_t k = 0; k < gens.size(); ++k) expect_shape(gens[k], d, d, "bundle.generators[" + std::to_string(k) + "]");
    if (!gens.empty() && static_cast<int>(gens.size()) != m * (m - 1) / 2)
      throw InputError("bundle.generators needs m(m-1)/2 = " + std::to_string(m * (m - 1) / 2) + " matrices");
    P.bundle.generators = gens;
    if (b.contains("metric")) {
      P.bundle.H = read_matrix(b.at("metric"), "bundle.metric");
      expect_shape(P.bundle.H, d, d, "bundle.metric");
    }
    if (sy.contains("blocks")) {
      const json& bl = sy.at("blocks");
      P.symbol = LeadingSymbol(m, d);
      for (int i = 0; i < m; ++i) {
        if (!bl[i].is_array() || static_cast<int>(bl[i].size()) != m)
          throw InputError("symbol.blocks must be an m x m array of matrices");
        for (int j = 0; j < m; ++j) {
          const std::string w = "symbol.blocks[" + std::to_string(i) + "][" + std::to_string(j) + "]";
          P.symbol.a[i][j] = read_matrix(bl[i][j], w);
          expect_shape(P.symbol.a[i][j], d, d, w);
        }
      }
    } else {
      P.symbol = laplace_symbol(m, d);
      const double sc = get_or<double>(sy, "scale", 1.0);
      for (int i = 0; i < m; ++i) P.symbol.a[i][i] *= sc;
    }
  } else {
    throw InputError("unknown bundle.kind '" + P.kind + "'");
  }

  const int d = P.bundle.d;
  const json& pot = section(cfg, "potential");
  if (pot.contains("q")) {
    const json& qv = pot.at("q");
    if (qv.is_number())
      P.q = qv.get<double>() * identity(d);
    else {
      P.q = read_matrix(qv, "potential.q");
      expect_shape(P.q, d, d, "potential.q");
    }
  } else {
    P.q = Mat::Zero(d, d);
  }
  P.bundle.q = P.q;
  validate_bundle(P.bundle);

  // move everything into an H-orthonormal frame
  if (max_abs(P.bundle.H - identity(d)) > 0.0) {
    auto [s, si] = metric_roots(P.bundle.H);
    P.symbol = transform_symbol(P.symbol, s, si);
    P.bundle = orthonormalize(P.bundle);
    P.q = *P.bundle.q;
  }
  auto sc = check_symbol(P.symbol, 64, P.seed);
  if (sc.block_symmetry > 1e-10) throw InputError("symbol blocks are not symmetric in (mu, nu)");
  if (sc.hermiticity > 1e-10) throw InputError("symbol blocks are not Hermitian in the fiber metric");
  if (max_abs(P.q - P.q.adjoint()) > 1e-10) throw InputError("potential q is not Hermitian");
  return P;
}

// --- report --------------------------------------------------------------------------

struct Check {
  std::string name;
  std::string identity;
  double value = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct Report {
  json manifest, results, diagnostics;
  std::vector<Check> checks;
  std::map<std::string, std::string> tables;  // file name -> CSV
  std::vector<std::string> warnings;

  void check(const std::string& name, const std::string& identity, double value, double tol) {
    checks.push_back({name, identity, value, tol, std::isfinite(value) && value <= tol});
  }
  bool pass() const {
    for (auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  json to_json() const {
    json cj = json::array();
    json failed = json::array();
    for (auto& c : checks) {
      cj.push_back({{"name", c.name}, {"identity", c.identity}, {"value", c.value}, {"tol", c.tol}, {"pass", c.pass}});
      if (!c.pass) failed.push_back({{"name", c.name}, {"identity", c.identity}});
    }
    json d = diagnostics.is_null() ? json::object() : diagnostics;
    d["checks"] = cj;
    d["failed"] = failed;
    d["warnings"] = warnings;
    return {{"manifest", manifest}, {"results", results}, {"diagnostics", d}, {"pass", pass()}};
  }
};

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) : cols_(header.size()) { row_strings(header); }
  void row(const std::vector<double>& v) {
    std::vector<std::string> s;
    for (double x : v) s.push_back(std::isfinite(x) ? fmt(x) : "");
    row_strings(s);
  }
  std::string str() const { return out_.str(); }

 private:
  void row_strings(const std::vector<std::string>& v) {
    if (v.size() != cols_) throw error("CSV row width mismatch");
    for (size_t k = 0; k < v.size(); ++k) out_ << (k ? "," : "") << v[k];
    out_ << "\n";
  }
  size_t cols_;
  std::ostringstream out_;
};

inline std::vector<double> number_list(const json& sec, const char* key, std::vector<double> def) {
  if (!sec.contains(key)) return def;
  const json& a = sec.at(key);
  if (!a.is_array()) throw InputError(std::string("'") + key + "' must be an array");
  std::vector<double> v;
  for (auto& x : a) v.push_back(as_number(x, key));
  return v;
}

inline json spectral_json(const SpectralData& D) {
  return {{"m", D.m}, {"d", D.d}, {"s", D.s}, {"mu", D.mu}, {"multiplicity", D.mult}, {"c", matrix_json(D.c)},
          {"direction_spread", D.spread}};
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// --- tasks ----------------------------------------------------------------------------

inline void task_spectrum(const Problem& P, const SpectralData& D, Report& R) {
  R.results["spectrum"] = spectral_json(D);
  // a_(n) identity via the symmetrised tensor route
  json an = json::array();
  const int nmax = std::min(4, kDefaultRankCap / 2);
  for (int n = 1; n <= nmax; ++n) {
    if (std::pow(double(D.m), 2 * n) * D.d * D.d > 4e7) break;
    auto c = a_n_constant(D, n);
    an.push_back({{"n", n}, {"tensor_route", c.tensor_route}, {"eigen_route", c.eigen_route}});
    R.check("a_n identity n=" + std::to_string(n), "sum_i d_i mu_i^n equals the normalised total trace of the symmetrised power of a",
            std::abs(c.diff) / std::max(1.0, std::abs(c.eigen_route)), 1e-10);
  }
  R.results["a_n"] = an;
  ExactAverager av(D);
  Mat sum = Mat::Zero(D.d, D.d);
  json tr = json::array();
  for (int i = 0; i < D.s; ++i) {
    Mat Pi = av.projector(i);
    sum += Pi;
    tr.push_back(std::real(Pi.trace()));
    R.check("tr <Pi_" + std::to_string(i + 1) + ">", "trace of the averaged projector equals the multiplicity",
            std::abs(std::real(Pi.trace()) - D.mult[i]), 1e-10);
  }
  R.results["avg_projector_traces"] = tr;
  R.check("sum <Pi_i> = I", "averaged projectors resolve the identity", max_abs(sum - identity(D.d)), 1e-10);
  double lag = 0.0, resolve = 0.0;
  for (auto& xi : sample_directions(D.m, 16, P.seed)) {
    Mat A = unit_symbol(D, xi), rec = Mat::Zero(D.d, D.d);
    for (int i = 0; i < D.s; ++i) {
      Mat Pi = projector_at(D, xi, i);
      lag = std::max(lag, max_abs(Pi - projector_via_c(D, xi, i)));
      rec += D.mu[i] * Pi;
    }
    resolve = std::max(resolve, max_abs(rec - A));
  }
  R.check("Vandermonde projector expansion", "Pi_i = sum_k c_ik A^k agrees with the Lagrange product", lag, 1e-10);
  R.check("spectral resolution", "A(xi-hat) = sum_i mu_i Pi_i(xi)", resolve, 1e-10);
  if (P.alphas && P.kind == "s20") {
    auto e = s20_eigenvalues(*P.alphas);
    std::vector<double> cf{e.mu1, e.mu2, e.mu3};
    std::sort(cf.begin(), cf.end());
    double diff = 0.0;
    if (static_cast<int>(cf.size()) == D.s)
      for (int i = 0; i < D.s; ++i) diff = std::max(diff, std::abs(cf[i] - D.mu[i]));
    else
      diff = INFINITY;
    R.check("closed-form S2_0 eigenvalues", "mu = alpha0, alpha0 + alpha2, alpha0 + 2(m-1)alpha2/m", diff, 1e-10);
  }
}

inline void task_coeffs(const Problem& P, const SpectralData& D, const json& cfg, Report& R) {
  const json& nu = section(cfg, "numeric");
  const double vol = get_or<double>(nu, "volume", 1.0);
  const double Rs = get_or<double>(nu, "curvature", 0.0);
  if (!P.bundle.has_generators() && D.s > 1)
    throw InputError("coeffs needs bundle.generators when the symbol has more than one eigenvalue");
  R.results["spectrum"] = spectral_json(D);
  HeatInvariants h = heat_invariants(D, P.bundle, vol, Rs);
  R.results["a0"] = matrix_json(h.a0, 1e-15);
  R.results["tr_a0"] = std::real(h.a0.trace());
  R.results["A0_per_volume"] = h.A0_per_volume;
  R.results["A0"] = h.A0;
  R.results["beta"] = {{"value", h.beta.value}, {"term_abar", h.beta.term_abar}, {"term_J", h.beta.term_J}, {"term_T", h.beta.term_T}};
  R.results["A1"] = h.A1;
  R.results["volume"] = vol;
  R.results["curvature"] = Rs;
  R.results["tables"] = {{"kappa", matrix_json(h.tables.kappa)}, {"rho", matrix_json(h.tables.rho)},
                         {"gamma", matrix_json(h.tables.gamma)}, {"sigma", matrix_json(h.tables.sigma)}};
  R.check("tr a0 = sum d_i mu_i^{-m/2}", "trace of a0 from the eigenvalue formula",
          rel_err(std::real(h.a0.trace()), h.A0_per_volume), 1e-10);

  // dual path for beta
  if (D.s > 1 || P.bundle.has_generators()) {
    auto dual = beta_dual_path(D, P.bundle);
    R.diagnostics["beta_quadrature"] = dual.quadrature.value;
    R.check("beta dual path", "exact pairing averages agree with sphere quadrature in the beta formula",
            std::abs(dual.diff) / std::max(1.0, std::abs(dual.exact.value)), 1e-8);
  }
  if (D.s == 1 && std::abs(D.mu[0] - 1.0) < 1e-12) {
    R.check("Laplace reduction beta", "beta = -d/6 for a = g I", std::abs(h.beta.value + D.d / 6.0), 1e-10);
    R.check("Laplace reduction a0", "a0 = I for a = g I", max_abs(h.a0 - identity(D.d)), 1e-10);
  }

  // coefficient integrals against adaptive quadrature, and printed closed forms for comparison
  json pairs = json::array();
  double worst = 0.0;
  for (int i = 0; i < D.s; ++i)
    for (int k = 0; k < D.s; ++k) {
      if (i == k) continue;
      const double mi = D.mu[i], mk = D.mu[k];
      const double ok = oracle::kappa(mi, mk, D.m), og = oracle::gamma_coef(mi, mk, D.m), orr = oracle::rho(mi, mk, D.m);
      const double e = std::max({rel_err(h.tables.kappa(i, k), ok), rel_err(h.tables.gamma(i, k), og),
                                 rel_err(h.tables.rho(i, k), orr)});
      worst = std::max(worst, e);
      json pj = {{"i", i + 1}, {"k", k + 1}, {"kappa", h.tables.kappa(i, k)}, {"kappa_quadrature", ok},
                 {"gamma", h.tables.gamma(i, k)}, {"gamma_quadrature", og}, {"rho", h.tables.rho(i, k)},
                 {"rho_quadrature", orr}};
      if (D.m >= 3) {
        const double pk = printed::kappa(mi, mk, D.m), pr = printed::rho(mi, mk, D.m), pg = printed::gamma_coef(mi, mk, D.m);
        pj["printed_kappa"] = pk;
        pj["printed_rho"] = pr;
        pj["printed_gamma"] = pg;
        auto flag = [&](const char* n, double pv, double ov) {
          if (rel_err(pv, ov) > 1e-6)
            R.warnings.push_back(std::string("printed closed form for ") + n + " disagrees with its defining integral at (" +
                                 std::to_string(i + 1) + "," + std::to_string(k + 1) + "): " + fmt(pv) + " vs " + fmt(ov));
        };
        flag("kappa", pk, ok);
        flag("rho", pr, orr);
        flag("gamma", pg, og);
      }
      pairs.push_back(pj);
    }
  R.diagnostics["coefficient_integrals"] = pairs;
  if (D.s > 1)
    R.check("kappa/gamma/rho vs quadrature", "closed forms equal the defining simplex integrals", worst, 1e-8);
  double diag = 0.0;
  for (int i = 0; i < D.s; ++i) diag = std::max({diag, std::abs(h.tables.kappa(i, i)), std::abs(h.tables.sigma(i, i))});
  R.check("kappa_ii = sigma_ii = 0", "diagonal coefficients vanish", diag, 0.0);
}

inline void task_kernel(const Problem& P, const SpectralData& D, const json& cfg, Report& R) {
  const json& kc = section(cfg, "kernel");
  const std::vector<double> ts = number_list(kc, "t", {0.1});
  std::vector<RVec> rs;
  if (kc.contains("r")) {
    for (auto& v : kc.at("r")) {
      if (!v.is_array() || static_cast<int>(v.size()) != D.m) throw InputError("kernel.r entries must have m components");
      RVec r(D.m);
      for (int j = 0; j < D.m; ++j) r(j) = as_number(v[j], "kernel.r");
      rs.push_back(r);
    }
  } else {
    rs.push_back(RVec::Zero(D.m));
    RVec r = RVec::Zero(D.m);
    r(0) = 0.3;
    rs.push_back(r);
  }
  const bool oracle = get_or<bool>(kc, "oracle", D.m <= 3) && D.m <= 3;
  for (double t : ts)
    if (!(t > 0.0)) throw InputError("kernel.t values must be positive");
  LeadingKernel K(D);
  const Mat a0 = a0_coefficient(D);
  std::vector<std::string> header{"t"};
  for (int j = 0; j < D.m; ++j) header.push_back("r" + std::to_string(j));
  for (int a = 0; a < D.d; ++a)
    for (int b = 0; b < D.d; ++b) {
      header.push_back("U" + std::to_string(a) + "_" + std::to_string(b) + "_re");
      header.push_back("U" + std::to_string(a) + "_" + std::to_string(b) + "_im");
    }
  header.insert(header.end(), {"trace", "trace_formula", "oracle_rel"});
  Csv csv(header);
  double tr_err = 0.0, or_err = 0.0, diag_err = 0.0, herm = 0.0;
  bool any_oracle = false, any_diag = false;
  for (double t : ts)
    for (auto& r : rs) {
      Mat U = K.offdiag(t, r);
      const double tf = heat_trace_offdiag(D, t, r.norm());
      tr_err = std::max(tr_err, std::abs(std::real(U.trace()) - tf) / std::abs(tf));
      herm = std::max(herm, max_abs(U.adjoint() - K.offdiag(t, -r)) / max_abs(U));
      double orel = NAN;
      if (oracle && r.squaredNorm() / (4.0 * t * D.mu.front()) <= 16.0) {
        orel = rel_diff(U, fourier_oracle(D, t, r));
        or_err = std::max(or_err, orel);
        any_oracle = true;
      }
      if (r.squaredNorm() == 0.0) {
        diag_err = std::max(diag_err, rel_diff(U, std::pow(4.0 * M_PI * t, -0.5 * D.m) * a0));
        any_diag = true;
      }
      std::vector<double> row{t};
      for (int j = 0; j < D.m; ++j) row.push_back(r(j));
      for (int a = 0; a < D.d; ++a)
        for (int b = 0; b < D.d; ++b) {
          row.push_back(U(a, b).real());
          row.push_back(U(a, b).imag());
        }
      row.insert(row.end(), {std::real(U.trace()), tf, orel});
      csv.row(row);
    }
  R.tables["kernel.csv"] = csv.str();
  R.check("tr U_0 = weighted Gaussians", "trace of the off-diagonal kernel is sum_i d_i (4 pi t mu_i)^{-m/2} exp(-r^2/4t mu_i)",
          tr_err, 1e-10);
  R.check("U_0 Hermiticity", "U_0(r)^dagger = U_0(-r)", herm, 1e-10);
  if (any_oracle) R.check("U_0 vs Fourier quadrature", "U_0 equals the Fourier integral of exp(-t A(xi))", or_err, 1e-4);
  if (any_diag) R.check("U_0 diagonal limit", "U_0(t|x,x) = (4 pi t)^{-m/2} a0", diag_err, 1e-10);

  const std::vector<double> lams = number_list(kc, "lambda", {-1.0});
  Csv rc({"lambda", "r", "bessel", "laplace_transform", "rel_diff"});
  double rerr = 0.0;
  for (double lam : lams)
    for (auto& r : rs) {
      if (r.norm() == 0.0) continue;
      const double bv = resolvent_trace(D, lam, r.norm());
      const double lv = resolvent_trace_laplace(D, lam, r.norm());
      const double e = std::abs(bv - lv) / std::abs(bv);
      rerr = std::max(rerr, e);
      rc.row({lam, r.norm(), bv, lv, e});
    }
  R.tables["resolvent.csv"] = rc.str();
  R.check("resolvent trace vs Laplace transform", "Bessel-K resolvent trace is the Laplace transform of the heat trace", rerr, 1e-5);
  R.results["kernel"] = {{"points", ts.size() * rs.size()}, {"max_trace_rel_err", tr_err}, {"max_oracle_rel_err", any_oracle ? json(or_err) : json(nullptr)},
                         {"max_resolvent_rel_err", rerr}};
  (void)P;
}

inline void task_s2(const Problem& P, const SpectralData& D, Report& R) {
  if (!P.alphas) throw InputError("task s2 needs bundle.kind = s2 or s20");
  const S2SymbolParams& a = *P.alphas;
  const int m = a.m;
  const double M = m;
  auto tab = table1_check(m, 10, P.seed);
  R.check("Table of X products", "X_i X_j = sum_k c_ijk X_k for all 25 products", tab.max_residual, 1e-12);
  std::mt19937_64 rng(P.seed);
  double xtr = 0.0, yalg = 0.0, ptr = 0.0, pidem = 0.0, eig = 0.0, zc = 0.0;
  const double xt_expect[5] = {M, 0.5 * (M + 1), 1.0, 1.0, 1.0};
  const double pt_expect[3] = {0.5 * (M + 1) * (M - 2), M - 1, 1.0};
  auto f = s2_full_spectrum(a);
  auto e20 = s20_eigenvalues(a);
  LeadingSymbol full = s2_symbol(a);
  for (int n = 0; n < 10; ++n) {
    RVec xi = quad::random_unit(m, rng);
    auto X = x_basis(m, xi);
    for (int k = 0; k < 5; ++k) xtr = std::max(xtr, std::abs(std::real(X[k].trace()) - xt_expect[k]));
    auto y = y_algebra(m, X);
    yalg = std::max({yalg, y_algebra_residual(m, X)});
    auto pr = s20_projectors_s2(m, xi);
    const Mat* Ps[3] = {&pr.Pi1, &pr.Pi2, &pr.Pi3};
    for (int k = 0; k < 3; ++k) {
      ptr = std::max(ptr, std::abs(std::real(Ps[k]->trace()) - pt_expect[k]));
      pidem = std::max(pidem, max_abs(*Ps[k] * *Ps[k] - *Ps[k]));
      for (int l = k + 1; l < 3; ++l) pidem = std::max(pidem, max_abs(*Ps[k] * *Ps[l]));
    }
    pidem = std::max(pidem, max_abs(pr.Pi1 + pr.Pi2 + pr.Pi3 - y.P));
    Mat A = eval_symbol(full, xi);
    auto fp = s2_full_projectors(a, xi);
    const Mat IP = identity(A.rows()) - y.P;
    zc = std::max({zc, max_abs(fp.Z3 + fp.Z4 - pr.Pi3 - IP), max_abs(fp.Z3 * fp.Z4), max_abs(fp.Z3 * fp.Z3 - fp.Z3),
                   max_abs(fp.Z4 * fp.Z4 - fp.Z4)});
    eig = std::max(eig, max_abs(A - (f.mu1 * fp.Pi1 + f.mu2 * fp.Pi2 + f.nu3 * fp.Z3 + f.nu4 * fp.Z4)));
  }
  R.check("X traces", "tr X = (m, (m+1)/2, 1, 1, 1)", xtr, 1e-12);
  R.check("Y algebra", "P, Y2, Y5 relations", yalg, 1e-12);
  R.check("Pi traces", "tr Pi = ((m+1)(m-2)/2, m-1, 1)", ptr, 1e-12);
  R.check("Pi projector algebra", "Pi_k idempotent, mutually orthogonal, summing to P", pidem, 1e-12);
  R.check("Z3/Z4 complementarity", "Z3 + Z4 = Pi3 + (I - P), Z3 Z4 = 0", zc, 1e-12);
  R.check("full S2 spectral resolution", "A = mu1 Pi1 + mu2 Pi2 + nu3 Z3 + nu4 Z4", eig, 1e-12);
  R.results["s20"] = {{"mu1", e20.mu1}, {"mu2", e20.mu2}, {"mu3", e20.mu3}, {"positive", e20.positive},
                      {"projector_traces", {pt_expect[0], pt_expect[1], pt_expect[2]}}};
  if (P.kind == "s2")
    R.results["s2"] = {{"mu1", f.mu1}, {"mu2", f.mu2}, {"mu3", f.mu3}, {"kappa", f.kappa_sym}, {"q", f.q_sym},
                       {"rho", f.rho}, {"omega", f.omega}, {"theta", f.theta}, {"nu3", f.nu3}, {"nu4", f.nu4},
                       {"positive", f.positive}, {"degenerate", f.degenerate}};
  // closed form against the numerical decomposition
  std::vector<std::pair<double, int>> cf;
  auto add = [&](double v, int mult) {
    if (mult <= 0) return;
    for (auto& p : cf)
      if (std::abs(p.first - v) <= 1e-9 * std::max(1.0, std::abs(v))) {
        p.second += mult;
        return;
      }
    cf.emplace_back(v, mult);
  };
  if (P.kind == "s20") {
    add(e20.mu1, (m + 1) * (m - 2) / 2);
    add(e20.mu2, m - 1);
    add(e20.mu3, 1);
  } else {
    add(f.mu1, (m + 1) * (m - 2) / 2);
    add(f.mu2, m - 1);
    add(f.nu3, 1);
    add(f.nu4, 1);
  }
  std::sort(cf.begin(), cf.end());
  double diff = 0.0;
  if (static_cast<int>(cf.size()) != D.s)
    diff = INFINITY;
  else
    for (int i = 0; i < D.s; ++i)
      diff = std::max(diff, std::abs(cf[i].first - D.mu[i]) + (cf[i].second == D.mult[i] ? 0.0 : INFINITY));
  R.check("closed-form vs numerical spectrum", "eigenvalues and multiplicities from the alpha formulas", diff, 1e-10);
}

inline void task_semiclass(const Problem& P, const SpectralData& D, const json& cfg, Report& R) {
  const json& sc = section(cfg, "semiclass");
  const int n_rays = get_or<int>(sc, "rays", 20);
  std::mt19937_64 rng(P.seed);
  double nd = 0.0, pn = 0.0, pdf = 0.0, chi_r = 0.0, chi_rng = 0.0, kconst = 0.0, pconst = 0.0, hj = 0.0;
  std::vector<double> kmax(D.s, 0.0);
  for (int n = 0; n < n_rays; ++n) {
    RVec xs = quad::random_gaussian(D.m, rng), xe = quad::random_gaussian(D.m, rng);
    RayFrame ray(xs, xe);
    auto Ps = projectors_at(D, ray.sigma_mu);
    auto Ph = projectors_at(D, ray.at(0.37).sigma_mu);
    for (int i = 0; i < D.s; ++i) {
      auto N = N_endomorphism(D, ray, i);
      nd = std::max(nd, N.diff / std::max(1.0, max_abs(N.direct)));
      pn = std::max({pn, max_abs(Ps[i] * N.direct), max_abs(N.direct * Ps[i])});
      RVec v = quad::random_gaussian(D.m, rng);
      Mat an = projector_derivative(D, ray.sigma_mu, i, v), fd = projector_derivative_fd(D, ray.sigma_mu, i, v);
      if (max_abs(fd) > 1e-8) pdf = std::max(pdf, rel_diff(an, fd));
      Mat K = K_endomorphism(D, ray, i);
      kmax[i] = std::max(kmax[i], max_abs(K));
      kconst = std::max(kconst, max_abs(K - K_endomorphism(D, ray.at(0.37), i)));
      pconst = std::max(pconst, max_abs(Ps[i] - Ph[i]));
      Mat B = Mat::Random(D.d, D.d);
      auto c = chi_step(D, ray, i, B);
      chi_r = std::max(chi_r, c.recursion_residual / std::max(1.0, max_abs(c.L_psi)));
      chi_rng = std::max(chi_rng, c.range_residual / std::max(1.0, max_abs(c.chi)));
      const double t = std::exp(std::uniform_real_distribution<double>(std::log(1e-3), 0.0)(rng));
      hj = std::max(hj, hamilton_jacobi_residual(D.mu[i], t, xe, xs));
    }
  }
  R.check("N_i two forms", "N_i = (1/2mu_i)(sigma - a sigma sigma/2mu_i) = sum_k (sigma/2mu_i^2)(mu_i - mu_k) P_k", nd, 1e-12);
  R.check("P_i N_i = N_i P_i = 0", "N_i annihilates its own eigenspace", pn, 1e-12);
  R.check("projector derivative", "eigenprojection perturbation matches central differences", pdf, 1e-6);
  R.check("K_i constant along ray", "K_i is 0-homogeneous in x - x'", kconst, 1e-10);
  R.check("P_i constant along ray", "D commutes with the projections", pconst, 1e-12);
  R.check("chi step recursion", "(sigma/2mu_i^2)(mu_i - mu_n) P_n chi = -P_n L_i psi", chi_r, 1e-10);
  R.check("chi range", "(I - P_i) chi = chi", chi_rng, 1e-10);
  R.check("Hamilton-Jacobi", "S_i = sigma/(2 t mu_i) solves (1/mu_i) dS/dt + |grad S|^2 = 0", hj, 1e-12);
  json kj = json::array();
  json psi = json::array();
  ExactAverager av(D);
  RVec x0 = RVec::Zero(D.m), dir = quad::random_unit(D.m, rng);
  const double len = get_or<double>(sc, "ray_length", 2.0);
  RayFrame ray(x0, len * dir);
  for (int i = 0; i < D.s; ++i) {
    kj.push_back(kmax[i]);
    auto p0 = psi0_leading(D, ray, i, av.projector(i));
    json e = {{"i", i + 1}, {"K_norm", p0.K_norm}, {"convergent", p0.convergent}};
    if (p0.psi0)
      e["psi0"] = matrix_json(*p0.psi0, 1e-15);
    else
      R.warnings.push_back("K_" + std::to_string(i + 1) + " = " + fmt(p0.K_norm) +
                           " is nonzero; the transport integral over dtau/tau diverges along a flat ray");
    psi.push_back(e);
  }
  R.results["K_norm_max"] = kj;
  R.results["psi0"] = psi;
  const std::vector<double> ts = number_list(sc, "t", {1e-3, 3e-3, 1e-2, 3e-2, 0.1});
  auto rep = polarized_ansatz_compare(D, ts, ray);
  Csv csv({"t", "exact_trace", "ansatz_trace", "exact_exponent", "ansatz_exponent", "matrix_diff"});
  for (auto& r : rep.rows) csv.row({r.t, r.exact_trace, r.ansatz_trace, r.exact_exponent, r.ansatz_exponent, r.matrix_diff});
  R.tables["semiclass.csv"] = csv.str();
  R.results["exponent_fit"] = {{"constant", rep.fit.constant}, {"sigma_over_2mu_max", rep.fit.target}, {"rel_err", rep.fit.rel_err},
                               {"ray_length", len}};
  R.check("trace exponent", "-t log tr U_0 tends to sigma/(2 mu_max)", rep.fit.rel_err, 0.01);
  R.check("initial condition", "sum_i <Pi_i> = I for the ansatz amplitudes", rep.initial_condition_diff, 1e-10);
}

inline void task_verify(const Problem& P, const SpectralData& D, const json& cfg, Report& R) {
  if (D.m > 3) throw InputError("torus verification is limited to m <= 3");
  const json& vc = section(cfg, "verify");
  TorusSpec T;
  T.m = D.m;
  T.L = get_or<double>(vc, "L", 2.0 * M_PI);
  T.symbol = D.symbol;
  T.q = P.q;
  T.cutoff = get_or<int>(vc, "cutoff", 0);
  if (!(T.L > 0.0)) throw InputError("verify.L must be positive");
  auto grid = default_torus_grid(D.mu_max(), T.L, get_or<int>(vc, "points", 12), get_or<double>(vc, "scale", 0.05));
  auto rep = torus_fit(T, grid);
  Csv csv({"t", "trace", "model", "residual"});
  for (auto& r : rep.rows) csv.row({r.t, r.trace, r.model, r.residual});
  R.tables["torus.csv"] = csv.str();
  const double A0 = A0_global(D, 1.0);
  const double A1 = std::real((a0_coefficient(D) * T.q).trace());
  const double a0_tol = get_or<double>(vc, "a0_tol", 0.005), a1_tol = get_or<double>(vc, "a1_tol", 0.02);
  R.results["torus"] = {{"L", T.L}, {"cutoff", rep.cutoff}, {"A0_fit", rep.fit.A0}, {"A0_expected", A0}, {"A1_fit", rep.fit.A1},
                        {"A1_expected", A1}, {"fit_residual", rep.fit.residual}, {"condition", rep.fit.condition}};
  if (rep.fit.ill_conditioned) R.warnings.push_back("asymptotic fit is ill-conditioned");
  R.check("torus A0", "fitted A0/vol equals sum_i d_i mu_i^{-m/2}", std::abs(rep.fit.A0 - A0) / A0, a0_tol);
  const double a1_err = std::abs(A1) > 1e-12 ? std::abs(rep.fit.A1 - A1) / std::abs(A1) : std::abs(rep.fit.A1) / A0;
  R.check("torus A1", "fitted A1/vol equals tr(a0 q) at zero curvature", a1_err, a1_tol);
}

inline Report run(const json& cfg, const std::string& task_in, const RunOptions& opt = {}) {
  if (!cfg.is_object()) throw InputError("config must be a table");
  std::string task = task_in;
  if (task.empty()) task = get_or<std::string>(section(cfg, "task"), "name", "");
  if (std::find(task_names().begin(), task_names().end(), task) == task_names().end())
    throw InputError("unknown task '" + task + "'");
  Problem P = build_problem(cfg, opt);
  Report R;
  R.manifest = {{"tool", "nltheat"},
                {"version", kVersion},
                {"task", task},
                {"config_hash", "fnv1a64:" + hex64(fnv1a64(cfg.dump()))},
                {"seed", P.seed},
                {"rel_tol", P.spec_opt.rel_tol},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION)},
                {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000)}};
  R.results = json::object();
  R.diagnostics = json::object();
  R.results["bundle"] = {{"kind", P.kind}, {"m", P.m}, {"d", P.bundle.d}, {"generators", P.bundle.has_generators()}};
  SpectralData D = spectral_decompose(P.symbol, P.spec_opt);
  if (task == "spectrum") task_spectrum(P, D, R);
  if (task == "coeffs") task_coeffs(P, D, cfg, R);
  if (task == "kernel") task_kernel(P, D, cfg, R);
  if (task == "s2") task_s2(P, D, R);
  if (task == "semiclass") task_semiclass(P, D, cfg, R);
  if (task == "verify") task_verify(P, D, cfg, R);
  return R;
}

}  // namespace nlt::cli
