#pragma once
// Low-rank plus sparse recovery: instances, incoherence, dual certificates
// (golfing + Neumann series), sampling experiments and an ADMM matrix solver.

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tnn/errors.hpp"
#include "tnn/parallel.hpp"
#include "tnn/rng.hpp"
#include "tnn/spectral.hpp"
#include "tnn/subdiff.hpp"
#include "tnn/subspace.hpp"
#include "tnn/tensor.hpp"
#include "tnn/verdict.hpp"

namespace tnn {

enum class FactorStyle { Gaussian, Incoherent };

inline FactorStyle parse_factor_style(const std::string& s) {
  if (s == "gaussian") return FactorStyle::Gaussian;
  if (s == "incoherent") return FactorStyle::Incoherent;
  throw ParameterError("unknown factor style '" + s + "'");
}

inline const char* to_string(FactorStyle s) { return s == FactorStyle::Gaussian ? "gaussian" : "incoherent"; }

struct InstanceConfig {
  Shape shape;
  std::size_t r = 1;
  double rho = 0.05;
  std::size_t m = 0;  // 0: ceil(2 ln n_max)
  FactorStyle style = FactorStyle::Gaussian;
  double mag_lo = 0.5;
  double mag_hi = 2.0;
  std::uint64_t seed = 0;
};

struct RpcaInstance {
  DenseTensor L;
  DenseTensor S;
  DenseTensor E;
  EntrySupport support;
  double rho = 0.0;
  std::size_t r = 0;
  FactorStyle style = FactorStyle::Gaussian;
  std::vector<EntrySupport> batch_masks;  // I(S_j); support is their intersection
  std::uint64_t seed = 0;

  const Shape& shape() const { return L.shape(); }
  std::size_t m() const { return batch_masks.size(); }
  double phi() const { return std::pow(rho, 1.0 / static_cast<double>(std::max<std::size_t>(m(), 1))); }
};

inline std::size_t default_batches(const Shape& shape) {
  return static_cast<std::size_t>(std::ceil(2.0 * std::log(max_dim(shape))));
}

inline double default_lambda(const Shape& shape) { return 1.0 / std::sqrt(max_dim(shape)); }

namespace detail {

inline Matrix factor_block(Rng& rng, std::size_t n, std::size_t r, FactorStyle style) {
  const auto N = static_cast<Eigen::Index>(n), R = static_cast<Eigen::Index>(r);
  if (style == FactorStyle::Gaussian) return gaussian_matrix(rng, N, R);
  // sign frame, orthonormalized: rows stay close to sqrt(r/n) in norm
  Matrix f(N, R);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < R; ++j) f(i, j) = (rng() & 1u) ? 1.0 : -1.0;
  if (r == 1) return f / std::sqrt(static_cast<double>(n));
  Eigen::HouseholderQR<Matrix> qr(f);
  return qr.householderQ() * Matrix::Identity(N, R);
}

}  // namespace detail

inline RpcaInstance generate_instance(const InstanceConfig& cfg) {
  if (cfg.shape.empty()) throw ParameterError("instance needs a shape");
  for (auto n : cfg.shape)
    if (n == 0) throw ParameterError("instance dimensions must be positive");
  if (cfg.r < 1 || cfg.r > *std::min_element(cfg.shape.begin(), cfg.shape.end()))
    throw ParameterError("rank must be in [1, min dimension]");
  if (!(cfg.rho >= 0.0 && cfg.rho < 1.0)) throw ParameterError("rho must lie in [0, 1)");
  if (!(cfg.mag_lo > 0.0 && cfg.mag_lo <= cfg.mag_hi)) throw ParameterError("bad magnitude range");
  const std::size_t m = cfg.m == 0 ? default_batches(cfg.shape) : cfg.m;
  if (m < 1) throw ParameterError("need at least one batch");

  RpcaInstance inst;
  inst.rho = cfg.rho;
  inst.r = cfg.r;
  inst.style = cfg.style;
  inst.seed = cfg.seed;
  const Shape& shape = cfg.shape;
  const std::size_t d = shape.size();

  Rng frng = make_stream(cfg.seed, 1);
  std::vector<Matrix> blocks;
  for (std::size_t k = 0; k < d; ++k) blocks.push_back(detail::factor_block(frng, shape[k], cfg.r, cfg.style));
  inst.L = DenseTensor(shape);
  for (std::size_t i = 0; i < cfg.r; ++i) {
    std::vector<Vector> f;
    for (std::size_t k = 0; k < d; ++k) f.push_back(blocks[k].col(static_cast<Eigen::Index>(i)));
    inst.L += outer_atom(f);
  }

  const std::size_t N = shape_size(shape);
  const double phi = std::pow(cfg.rho, 1.0 / static_cast<double>(m));
  std::vector<char> in(N, 1);
  for (std::size_t j = 0; j < m; ++j) {
    Rng mrng = make_stream(cfg.seed, 100 + j);
    std::vector<std::size_t> offs;
    for (std::size_t i = 0; i < N; ++i)
      if (uniform(mrng, 0.0, 1.0) < phi) offs.push_back(i);
      else in[i] = 0;
    inst.batch_masks.push_back(EntrySupport::from_offsets(shape, offs));
  }
  std::vector<std::size_t> sup;
  for (std::size_t i = 0; i < N; ++i)
    if (in[i]) sup.push_back(i);
  inst.support = EntrySupport::from_offsets(shape, sup);

  Rng srng = make_stream(cfg.seed, 2);
  inst.S = DenseTensor(shape);
  inst.E = DenseTensor(shape);
  for (auto o : sup) {
    const double mag = uniform(srng, cfg.mag_lo, cfg.mag_hi);
    const double sgn = (srng() & 1u) ? 1.0 : -1.0;
    inst.S[o] = sgn * mag;
    inst.E[o] = sgn;
  }
  return inst;
}

// ---------------------------------------------------------------------------
// The low-rank side: L = everything except the all-complement basic subspace.

inline ModeFamily rpca_family(const DenseTensor& l, double rank_tol = 1e-10) { return family_from_tensor(l, rank_tol); }

inline DenseTensor project_L(const ModeFamily& f, const DenseTensor& x) {
  return x - project(SubspaceSelector::basic(ModeSet::all(x.order())), f, x);
}

inline DenseTensor project_Lperp(const ModeFamily& f, const DenseTensor& x) {
  return project(SubspaceSelector::basic(ModeSet::all(x.order())), f, x);
}

inline ChainStep L_step(const ModeFamily& f, std::size_t d) {
  return projector_step(SubspaceSelector::basic(ModeSet::all(d)), f, true);
}

/// Orthonormal basis of L as columns over row-major offsets.
inline Matrix L_basis(const ModeFamily& f) {
  const std::size_t d = f.modes.size();
  const Shape shape = f.shape();
  const std::size_t N = shape_size(shape);
  std::vector<Matrix> in(d), out(d);
  for (std::size_t k = 0; k < d; ++k) {
    in[k] = f.modes[k].basis();
    out[k] = f.modes[k].complement().basis();
  }
  std::vector<Matrix> parts;
  Eigen::Index cols = 0;
  for (std::uint32_t mask = 0; mask + 1 < (1u << d); ++mask) {
    Matrix acc = Matrix::Ones(1, 1);
    for (std::size_t k = 0; k < d; ++k) {
      const Matrix& b = ((mask >> k) & 1u) ? out[k] : in[k];
      Matrix next(acc.rows() * b.rows(), acc.cols() * b.cols());
      for (Eigen::Index i = 0; i < acc.rows(); ++i)
        for (Eigen::Index j = 0; j < acc.cols(); ++j)
          next.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = acc(i, j) * b;
      acc = std::move(next);
    }
    if (acc.cols() > 0) {
      cols += acc.cols();
      parts.push_back(std::move(acc));
    }
  }
  Matrix q(static_cast<Eigen::Index>(N), cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    q.middleCols(c, p.cols()) = p;
    c += p.cols();
  }
  return q;
}

/// ||p_L diag(w) p_L|| through the explicit basis.
inline double L_sandwich_norm(const Matrix& q, const Vector& w) {
  if (q.cols() == 0) return 0.0;
  const Matrix g = q.transpose() * w.asDiagonal() * q;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  return std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff()));
}

// ---------------------------------------------------------------------------

struct IncoherenceProfile {
  std::vector<std::size_t> r;
  std::vector<double> u;
  std::size_t r0 = 0;
  double u0 = 0.0;
  double z_inf = 0.0;
  bool z_fallback = false;
  double theta0 = 1.0;
  // lhs, rhs of: max u_k <= u0, r0 <= theta0 (1-rho) n_1/(u0 ln^2 n_d), z_inf <= sqrt(...)
  std::vector<std::pair<double, double>> assumption;
};

inline IncoherenceProfile incoherence_profile(const DenseTensor& l, double theta0 = 1.0, double rho = 0.0,
                                              double rank_tol = 1e-10, std::uint64_t seed = 0) {
  if (norm2(l) == 0.0) throw PreconditionError("incoherence needs a nonzero L");
  IncoherenceProfile p;
  p.theta0 = theta0;
  const ModeFamily f = family_from_tensor(l, rank_tol);
  const std::size_t d = l.order();
  for (std::size_t k = 0; k < d; ++k) {
    const Matrix& b = f.modes[k].basis();
    const double n = static_cast<double>(l.dim(k));
    const std::size_t rk = static_cast<std::size_t>(b.cols());
    p.r.push_back(rk);
    p.u.push_back(rk == 0 ? 0.0 : n / static_cast<double>(rk) * b.rowwise().squaredNorm().maxCoeff());
  }
  p.r0 = *std::max_element(p.r.begin(), p.r.end());
  p.u0 = *std::max_element(p.u.begin(), p.u.end());
  const auto zw = find_z_witness(l, seed);
  p.z_inf = norm_inf(zw.z);
  p.z_fallback = zw.fallback;
  const double n1 = *std::min_element(l.shape().begin(), l.shape().end());
  const double nd = max_dim(l.shape());
  const double ln = std::log(nd);
  p.assumption.emplace_back(p.u0, p.u0);
  p.assumption.emplace_back(static_cast<double>(p.r0), theta0 * (1.0 - rho) * n1 / (p.u0 * ln * ln));
  const double pw = std::max(2.0 * static_cast<double>(d) - 5.0, 0.0);
  p.assumption.emplace_back(p.z_inf, std::sqrt(p.u0 * static_cast<double>(p.r0) / (n1 * nd * std::pow(ln, pw))));
  return p;
}

// ---------------------------------------------------------------------------
// Golfing: Z_j = Z_{j-1} - (1-phi)^{-1} p_{I^perp(S_j)}(p_L(Z_{j-1}) - Z)

struct GolfingState {
  DenseTensor Z;
  std::vector<DenseTensor> iterates;  // Z_0 .. Z_m
  double phi = 0.0;
  std::size_t m = 0;
  std::vector<double> residual_fro;  // ||p_L(Z_j) - Z||_2, j = 0..m
  std::vector<double> residual_inf;
};

inline GolfingState golfing_certificate(const RpcaInstance& inst, const DenseTensor& z, const ModeFamily& f) {
  if (inst.batch_masks.empty()) throw PreconditionError("golfing needs batch masks");
  z.require_same_shape(inst.L);
  GolfingState g;
  g.Z = z;
  g.m = inst.m();
  g.phi = inst.phi();
  const double scale = 1.0 / (1.0 - g.phi);
  DenseTensor cur(z.shape());
  g.iterates.push_back(cur);
  DenseTensor res = project_L(f, cur) - z;
  g.residual_fro.push_back(norm2(res));
  g.residual_inf.push_back(norm_inf(res));
  for (const auto& mask : inst.batch_masks) {
    DenseTensor step = support_project(mask, res, true);
    step *= scale;
    cur -= step;
    g.iterates.push_back(cur);
    res = project_L(f, cur) - z;
    g.residual_fro.push_back(norm2(res));
    g.residual_inf.push_back(norm_inf(res));
  }
  return g;
}

struct NeumannResult {
  DenseTensor D2;
  double delta = 0.0;
  std::size_t terms = 0;
  double tail = 0.0;        // ||p_I(D2) - lambda E||_2, exactly lambda ||w_{K+1}||
  double tail_bound = 0.0;  // lambda ||w_{K+1}|| delta / (1 - delta) for the untruncated remainder
};

inline NeumannResult neumann_certificate(const RpcaInstance& inst, const ModeFamily& f, double lambda,
                                         double tol = 1e-12, std::size_t k_max = 200) {
  const std::size_t d = inst.L.order();
  NeumannResult r;
  const std::vector<ChainStep> h{support_step(inst.support), L_step(f, d), support_step(inst.support)};
  r.delta = inst.support.count() == 0 ? 0.0 : operator_norm_chain(h, inst.shape());
  if (r.delta >= 1.0) throw CertificateInfeasible("Neumann series diverges: delta = " + std::to_string(r.delta));
  DenseTensor w = inst.E;
  DenseTensor acc(inst.shape());
  const double stop = tol * (1.0 - r.delta) / lambda;
  std::size_t k = 0;
  while (true) {
    acc += w;
    w = apply_chain(h, w);
    ++k;
    if (norm2(w) <= stop || k >= k_max) break;
  }
  r.terms = k;
  r.D2 = project_Lperp(f, acc);
  r.D2 *= lambda;
  r.tail = lambda * norm2(w);
  r.tail_bound = r.delta < 1.0 ? r.tail * r.delta / (1.0 - r.delta) : std::numeric_limits<double>::infinity();
  return r;
}

// ---------------------------------------------------------------------------

struct CertificateCondition {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool certified = true;
  Verdict verdict = Verdict::Inconclusive;
};

struct CertifyConfig {
  double lambda = 0.0;  // 0: 1/sqrt(n_max)
  double neumann_tol = 1e-12;
  std::size_t neumann_kmax = 200;
  std::uint64_t seed = 0;
};

struct CertificateReport {
  double lambda = 0.0;
  std::vector<CertificateCondition> conditions;
  Verdict verdict = Verdict::Inconclusive;
  bool neumann_feasible = true;
  double delta = 0.0;
  std::size_t neumann_terms = 0;
  double neumann_tail = 0.0;
  double d1_on_support = 0.0;  // max |D1| over the support, zero by construction
  GolfingState golf;
  DenseTensor D1, D2, D;
  DenseTensor Z;
  bool z_fallback = false;

  const CertificateCondition& condition(const std::string& n) const {
    for (const auto& c : conditions)
      if (c.name == n) return c;
    throw LookupError("no condition '" + n + "'");
  }
};

namespace detail {

// min over modes of the largest singular value of the unfolding
inline double unfolding_bound(const DenseTensor& x) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < x.order(); ++k) {
    const Matrix m = mode_matricize(x, k);
    Eigen::JacobiSVD<Matrix> svd(m);
    best = std::min(best, svd.singularValues().size() ? svd.singularValues()[0] : 0.0);
  }
  return best;
}

inline CertificateCondition below(std::string name, double value, double thr, bool strict) {
  CertificateCondition c{std::move(name), value, thr, true, Verdict::Fail};
  if (strict ? value < thr : value <= thr) c.verdict = Verdict::Pass;
  return c;
}

}  // namespace detail

inline CertificateReport certify(const RpcaInstance& inst, const CertifyConfig& cfg = {}) {
  CertificateReport rep;
  const std::size_t d = inst.L.order();
  rep.lambda = cfg.lambda > 0.0 ? cfg.lambda : default_lambda(inst.shape());
  const double lam = rep.lambda;
  const ModeFamily f = rpca_family(inst.L);

  const auto zw = find_z_witness(inst.L, cfg.seed);
  rep.Z = zw.z;
  rep.z_fallback = zw.fallback;
  rep.golf = golfing_certificate(inst, zw.z, f);
  rep.D1 = rep.golf.iterates.back();
  rep.d1_on_support = norm_inf(support_project(inst.support, rep.D1));

  const std::vector<ChainStep> lp{L_step(f, d), support_step(inst.support)};
  const double lpi = inst.support.count() == 0 ? 0.0 : operator_norm_chain(lp, inst.shape());

  try {
    const auto nr = neumann_certificate(inst, f, lam, cfg.neumann_tol, cfg.neumann_kmax);
    rep.D2 = nr.D2;
    rep.delta = nr.delta;
    rep.neumann_terms = nr.terms;
    rep.neumann_tail = nr.tail;
  } catch (const CertificateInfeasible&) {
    rep.neumann_feasible = false;
    rep.delta = lpi * lpi;
    rep.D2 = DenseTensor(inst.shape());
  }
  rep.D = rep.D1 + rep.D2;

  rep.conditions.push_back(detail::below("dist_pL_D_Z", norm2(project_L(f, rep.D) - rep.Z), lam / 8, false));

  const DenseTensor perp = project_Lperp(f, rep.D);
  CertificateCondition sig{"sigma_pLperp_D", 0.0, 0.5, false, Verdict::Inconclusive};
  {
    SpectralOptions so;
    so.seed = cfg.seed;
    const auto sr = spectral_norm(perp, so);
    const double upper = std::min(sr.certified_upper.value_or(std::numeric_limits<double>::infinity()),
                                  detail::unfolding_bound(perp));
    sig.value = sr.value;
    if (sr.value >= 0.5)
      sig.verdict = Verdict::Fail;
    else if (upper < 0.5) {
      sig.verdict = Verdict::Pass;
      sig.certified = true;
      sig.value = upper;
    }
  }
  rep.conditions.push_back(sig);

  auto c3 = detail::below("support_identity", norm2(support_project(inst.support, rep.D) - lam * inst.E), lam / 8,
                          false);
  if (!rep.neumann_feasible) c3.verdict = Verdict::Fail;
  rep.conditions.push_back(c3);
  rep.conditions.push_back(
      detail::below("offsupport_inf", norm_inf(support_project(inst.support, rep.D, true)), lam / 2, true));
  rep.conditions.push_back(detail::below("pL_pI_norm", lpi, 0.5, true));

  bool any_fail = false, all_pass = true;
  for (const auto& c : rep.conditions) {
    any_fail = any_fail || c.verdict == Verdict::Fail;
    all_pass = all_pass && c.verdict == Verdict::Pass;
  }
  rep.verdict = any_fail ? Verdict::Fail : all_pass ? Verdict::Pass : Verdict::Inconclusive;
  return rep;
}

// ---------------------------------------------------------------------------
// Sampling experiments.

struct ConcentrationRecord {
  double deviation = 0.0;   // ||p_L (I - q^{-1} p_I) p_L||
  double leak = 0.0;        // ||p_L p_{I^perp}||
  double sign_sigma = 0.0;  // ||E||_sigma of a fresh sign tensor, multi-start value
  bool sign_certified = false;
};

struct ConcentrationSummary {
  std::vector<ConcentrationRecord> records;
  double q = 0.0;
  double sign_rho = 0.0;
  double u0 = 0.0;
  std::vector<std::size_t> r;
  // reference shapes for display: sqrt(1 - q + q eps) at eps = 0 and sqrt(sum n_k)/sqrt(-ln rho)
  double leak_envelope = 0.0;
  double sign_shape = 0.0;

  double quantile(double ConcentrationRecord::*field, double p) const {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.*field);
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  }
};

inline ConcentrationSummary concentration_trial(const DenseTensor& l, double q, int trials, std::uint64_t seed,
                                                double sign_rho = -1.0) {
  if (!(q > 0.0 && q <= 1.0)) throw ParameterError("q must lie in (0, 1]");
  if (trials < 1) throw ParameterError("need at least one trial");
  if (sign_rho < 0.0) sign_rho = std::max(1.0 - q, 1e-3);
  if (sign_rho > 1.0) throw ParameterError("sign density must lie in [0, 1]");
  ConcentrationSummary out;
  out.q = q;
  out.sign_rho = sign_rho;
  const ModeFamily f = family_from_tensor(l);
  const Matrix qb = L_basis(f);
  const auto prof = incoherence_profile(l, 1.0, 0.0, 1e-10, seed);
  out.u0 = prof.u0;
  out.r = prof.r;
  out.leak_envelope = std::sqrt(1.0 - q);
  double sum_n = 0.0;
  for (auto n : l.shape()) sum_n += static_cast<double>(n);
  out.sign_shape = sign_rho < 1.0 ? std::sqrt(sum_n) / std::sqrt(-std::log(sign_rho)) : 0.0;

  const std::size_t N = l.size();
  out.records.resize(static_cast<std::size_t>(trials));
  parallel_for(out.records.size(), [&](std::size_t i) {
    Rng rng = make_stream(seed, 500 + i);
    Vector keep(static_cast<Eigen::Index>(N));
    for (std::size_t j = 0; j < N; ++j) keep[static_cast<Eigen::Index>(j)] = uniform(rng, 0.0, 1.0) < q ? 1.0 : 0.0;
    ConcentrationRecord rec;
    rec.deviation = L_sandwich_norm(qb, Vector::Ones(keep.size()) - keep / q);
    rec.leak = std::sqrt(L_sandwich_norm(qb, Vector::Ones(keep.size()) - keep));
    DenseTensor e(l.shape());
    for (std::size_t j = 0; j < N; ++j)
      if (uniform(rng, 0.0, 1.0) < sign_rho) e[j] = (rng() & 1u) ? 1.0 : -1.0;
    if (e.order() <= 2 || certifiable_shape(e.shape())) {
      SpectralOptions so;
      so.seed = seed + i;
      const auto sr = spectral_norm(e, so);
      rec.sign_sigma = sr.value;
      rec.sign_certified = sr.certified_upper.has_value();
    } else {
      SpectralOptions so;
      so.seed = seed + i;
      so.starts = 8;
      rec.sign_sigma = norm2(e) == 0.0 ? 0.0 : spectral_hopm(e, so).value;
    }
    out.records[i] = rec;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Matrix case: min ||L||_* + lambda ||S||_1 s.t. L + S = M.

struct AdmmOptions {
  double mu = 0.0;  // 0: n1 n2 / (4 ||M||_1)
  double tol = 1e-9;
  int max_iter = 20000;
};

struct MatrixRpcaResult {
  Matrix L, S, Y;
  int iterations = 0;
  std::vector<double> residuals;  // ||M - L - S||_F / ||M||_F per iteration
  double mu = 0.0;
};

struct RpcaConvergenceError : ConvergenceError {
  MatrixRpcaResult last;
  RpcaConvergenceError(const std::string& what, MatrixRpcaResult r)
      : ConvergenceError(what, r.residuals.empty() ? 0.0 : r.residuals.back()), last(std::move(r)) {}
};

inline MatrixRpcaResult solve_matrix_rpca(const Matrix& M, double lambda, const AdmmOptions& opt = {}) {
  if (!M.allFinite()) throw ParameterError("matrix has non-finite entries");
  if (lambda <= 0.0) throw ParameterError("lambda must be positive");
  MatrixRpcaResult r;
  const double l1 = M.cwiseAbs().sum();
  const double mnorm = M.norm();
  r.L = Matrix::Zero(M.rows(), M.cols());
  r.S = r.L;
  r.Y = r.L;
  if (mnorm == 0.0) return r;
  r.mu = opt.mu > 0.0 ? opt.mu : static_cast<double>(M.rows() * M.cols()) / (4.0 * l1);
  const double mu = r.mu;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Eigen::JacobiSVD<Matrix> svd(M - r.S + r.Y / mu, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector s = (svd.singularValues().array() - 1.0 / mu).max(0.0).matrix();
    r.L = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    const Matrix a = M - r.L + r.Y / mu;
    const double th = lambda / mu;
    r.S = a.unaryExpr([th](double v) { return v > th ? v - th : (v < -th ? v + th : 0.0); });
    const Matrix res = M - r.L - r.S;
    r.Y += mu * res;
    r.iterations = it;
    r.residuals.push_back(res.norm() / mnorm);
    if (r.residuals.back() <= opt.tol) return r;
  }
  throw RpcaConvergenceError("ADMM did not reach the residual tolerance", std::move(r));
}

struct MatrixOptimality {
  double feasibility = 0.0;     // ||M - L - S||_F / ||M||_F
  double tangent_error = 0.0;   // ||P_T(Y) - U V^T||_max
  double dual_sigma = 0.0;      // ||Y||_2, needs <= 1
  double sign_error = 0.0;      // max over supp(S) |Y - lambda sign(S)|
  double off_support = 0.0;     // max over supp(S)^c |Y| / lambda, needs <= 1
};

/// Optimality residuals using the ADMM multiplier as the dual certificate.
inline MatrixOptimality matrix_optimality(const Matrix& M, const MatrixRpcaResult& r, double lambda,
                                          double rank_tol = 1e-6, double support_tol = 1e-8) {
  MatrixOptimality o;
  o.feasibility = (M - r.L - r.S).norm() / std::max(M.norm(), 1e-300);
  Eigen::JacobiSVD<Matrix> svd(r.L, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::Index k = 0;
  while (k < sv.size() && sv[k] > rank_tol * std::max(sv.size() ? sv[0] : 0.0, 1e-300)) ++k;
  const Matrix U = svd.matrixU().leftCols(k), V = svd.matrixV().leftCols(k);
  const Matrix pu = U * U.transpose(), pv = V * V.transpose();
  const Matrix pty = pu * r.Y + r.Y * pv - pu * r.Y * pv;
  o.tangent_error = k ? (pty - U * V.transpose()).cwiseAbs().maxCoeff() : 0.0;
  Eigen::JacobiSVD<Matrix> ys(r.Y);
  o.dual_sigma = ys.singularValues()[0];
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      const double s = r.S(i, j);
      if (std::abs(s) > support_tol)
        o.sign_error = std::max(o.sign_error, std::abs(r.Y(i, j) - lambda * (s > 0 ? 1.0 : -1.0)));
      else
        o.off_support = std::max(o.off_support, std::abs(r.Y(i, j)) / lambda);
    }
  return o;
}

inline Matrix as_matrix(const DenseTensor& t) {
  if (t.order() != 2) throw DimensionError("expected an order-2 tensor");
  return mode_matricize(t, 0);
}

inline DenseTensor from_matrix(const Matrix& m) {
  return mode_dematricize(m, 0, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
}

}  // namespace tnn
