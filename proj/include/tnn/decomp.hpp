#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "nuclear.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "subspace.hpp"
#include "tensor.hpp"
#include "verdict.hpp"

namespace tnn {

struct DecompReport {
  enum class Mode { Spectral, Nuclear, LowerBound, Weak };
  Mode mode = Mode::Spectral;
  // named measurements, in insertion order
  std::vector<std::pair<std::string, double>> values;
  double discrepancy = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<std::pair<std::string, double>> tolerances;

  double value(const std::string& key) const {
    for (const auto& [k, v] : values)
      if (k == key) return v;
    throw LookupError("no value named " + key);
  }
};

inline const char* to_string(DecompReport::Mode m) {
  switch (m) {
    case DecompReport::Mode::Spectral: return "spectral";
    case DecompReport::Mode::Nuclear: return "nuclear";
    case DecompReport::Mode::LowerBound: return "lower_bound";
    case DecompReport::Mode::Weak: return "weak";
  }
  return "?";
}

struct DecompPair {
  ModeFamily family;
  DenseTensor t;
  DenseTensor s;
};

/// Family with seeded orthonormal bases of the given ranks.
inline ModeFamily random_family(const Shape& shape, const std::vector<std::size_t>& ranks, std::uint64_t seed) {
  if (ranks.size() != shape.size()) throw ParameterError("need one rank per mode");
  ModeFamily f;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (ranks[k] > shape[k]) throw ParameterError("rank exceeds mode dimension in mode " + std::to_string(k + 1));
    if (ranks[k] == 0) {
      f.modes.push_back(ModeSubspace::zero(shape[k]));
      continue;
    }
    Rng rng = make_stream(seed, 1000 + k);
    const Matrix g = gaussian_matrix(rng, static_cast<Eigen::Index>(shape[k]), static_cast<Eigen::Index>(ranks[k]));
    Eigen::HouseholderQR<Matrix> qr(g);
    const Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
    f.modes.push_back(ModeSubspace::from_orthonormal(q));
  }
  return f;
}

inline DenseTensor gaussian_tensor(const Shape& shape, std::uint64_t seed, std::uint64_t stream) {
  Rng rng = make_stream(seed, stream);
  return from_vector(shape, gaussian_vector(rng, static_cast<Eigen::Index>(shape_size(shape))));
}

namespace detail {

template <class Proj>
DenseTensor nonzero_sample(const Shape& shape, std::uint64_t seed, std::uint64_t stream, Proj proj) {
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    DenseTensor x = proj(gaussian_tensor(shape, seed, stream + 7919 * attempt));
    if (norm2(x) > 1e-12) return x;
  }
  throw ParameterError("subspace is zero for these ranks");
}

inline bool inside(const DenseTensor& x, const DenseTensor& px) {
  return norm2(px - x) <= 1e-10 * std::max(1.0, norm2(x));
}

}  // namespace detail

/// T in U_I and S in U^I for a seeded family.
inline DecompPair sample_pair(const Shape& shape, const std::vector<std::size_t>& ranks, ModeSet I, std::uint64_t seed) {
  if (I.empty()) throw ParameterError("index set I must be nonempty");
  if (!I.subset_of(ModeSet::all(shape.size()))) throw ParameterError("I has a mode beyond the order");
  for (std::size_t k = 0; k < shape.size(); ++k)
    if (I.contains(k) && (ranks.at(k) == 0 || ranks.at(k) >= shape[k]))
      throw ParameterError("mode " + std::to_string(k + 1) + " in I needs 0 < rank < dimension");
  DecompPair p;
  p.family = random_family(shape, ranks, seed);
  const auto lower = SubspaceSelector::lower(I);
  const auto upper = SubspaceSelector::upper(I);
  p.t = detail::nonzero_sample(shape, seed, 1, [&](const DenseTensor& g) { return project(lower, p.family, g); });
  p.s = detail::nonzero_sample(shape, seed, 2, [&](const DenseTensor& g) { return project(upper, p.family, g); });
  return p;
}

/// T in T((V_k)) and S in the direct sum of T^I over |I| >= 2.
inline DecompPair sample_weak_pair(const Shape& shape, const std::vector<std::size_t>& ranks, std::uint64_t seed) {
  DecompPair p;
  p.family = random_family(shape, ranks, seed);
  const auto core = SubspaceSelector::basic({});
  const auto high = SubspaceSelector::direct_sum(sets_by_size(shape.size(), 2, shape.size()));
  p.t = detail::nonzero_sample(shape, seed, 1, [&](const DenseTensor& g) { return project(core, p.family, g); });
  p.s = detail::nonzero_sample(shape, seed, 2, [&](const DenseTensor& g) { return project(high, p.family, g); });
  return p;
}

struct DecompOptions {
  std::uint64_t seed = 0;
  double spectral_tol = 1e-6;
  double nuclear_slack = 1e-3;
  double gap_budget = 1e-2;
  double bound_slack = 1e-6;
};

namespace detail {

inline void require_pair(const DenseTensor& t, const DenseTensor& s, const ModeFamily& f, ModeSet I) {
  t.require_same_shape(s);
  f.require_shape(t.shape());
  if (I.size() < 2) throw PreconditionError("decomposability needs |I| >= 2");
  if (!inside(t, project(SubspaceSelector::lower(I), f, t))) throw PreconditionError("T is not in U_I");
  if (!inside(s, project(SubspaceSelector::upper(I), f, s))) throw PreconditionError("S is not in U^I");
}

inline NuclearSandwich sandwich(const DenseTensor& x, std::uint64_t seed) {
  NuclearOptions o;
  o.seed = seed;
  // suite margins are far above this resolution
  o.tol = 1e-7;
  o.certify.max_cells = 50000;
  return nuclear_sandwich(x, o);
}

}  // namespace detail

/// ||T+S||_sigma = max(||T||_sigma, ||S||_sigma).
inline DecompReport check_spectral_decomp(const DenseTensor& t, const DenseTensor& s, const ModeFamily& f, ModeSet I,
                                          const DecompOptions& opt = {}) {
  detail::require_pair(t, s, f, I);
  DecompReport r;
  r.mode = DecompReport::Mode::Spectral;
  SpectralOptions so;
  so.seed = opt.seed;
  CertifyOptions co;
  co.rel_gap = 1e-9;
  const auto a = spectral_norm(t, so, co);
  const auto b = spectral_norm(s, so, co);
  const auto c = spectral_norm(t + s, so, co);
  r.values = {{"sigma_T", a.value}, {"sigma_S", b.value}, {"sigma_TS", c.value}};
  if (a.certified_upper && b.certified_upper && c.certified_upper) {
    r.values.emplace_back("sigma_T_upper", *a.certified_upper);
    r.values.emplace_back("sigma_S_upper", *b.certified_upper);
    r.values.emplace_back("sigma_TS_upper", *c.certified_upper);
  }
  r.discrepancy = std::abs(c.value - std::max(a.value, b.value));
  r.tolerances = {{"discrepancy", opt.spectral_tol}};
  r.verdict = r.discrepancy <= opt.spectral_tol ? Verdict::Pass : Verdict::Fail;
  return r;
}

/// ||T+S||_* = ||T||_* + ||S||_*, judged on sandwich midpoints.
inline DecompReport check_nuclear_decomp(const DenseTensor& t, const DenseTensor& s, const ModeFamily& f, ModeSet I,
                                         const DecompOptions& opt = {}) {
  detail::require_pair(t, s, f, I);
  DecompReport r;
  r.mode = DecompReport::Mode::Nuclear;
  const auto a = detail::sandwich(t, opt.seed);
  const auto b = detail::sandwich(s, opt.seed);
  const auto c = detail::sandwich(t + s, opt.seed);
  r.values = {{"T_lower", a.lower}, {"T_upper", a.upper}, {"S_lower", b.lower},
              {"S_upper", b.upper}, {"TS_lower", c.lower}, {"TS_upper", c.upper}};
  r.discrepancy = std::abs(c.mid() - a.mid() - b.mid());
  const double half_gaps = 0.5 * (a.gap() + b.gap() + c.gap());
  r.values.emplace_back("half_gaps", half_gaps);
  r.tolerances = {{"slack", opt.nuclear_slack}, {"gap_budget", opt.gap_budget}};
  if (r.discrepancy > half_gaps + opt.nuclear_slack)
    r.verdict = Verdict::Fail;
  else if (half_gaps > opt.gap_budget)
    r.verdict = Verdict::Inconclusive;
  else
    r.verdict = Verdict::Pass;
  return r;
}

/// upper(||T||_*) >= lower(||p_{U_I} T||_*) + lower(||p_{U^I} T||_*).
inline DecompReport check_nuclear_lower_bound(const DenseTensor& t, const ModeFamily& f, ModeSet I,
                                              const DecompOptions& opt = {}) {
  f.require_shape(t.shape());
  if (I.size() < 2) throw PreconditionError("lower bound check needs |I| >= 2");
  DecompReport r;
  r.mode = DecompReport::Mode::LowerBound;
  const DenseTensor t1 = project(SubspaceSelector::lower(I), f, t);
  const DenseTensor t2 = project(SubspaceSelector::upper(I), f, t);
  const auto a = detail::sandwich(t, opt.seed);
  const auto b = detail::sandwich(t1, opt.seed);
  const auto c = detail::sandwich(t2, opt.seed);
  r.values = {{"T_lower", a.lower},   {"T_upper", a.upper},   {"lowerpart_lower", b.lower},
              {"lowerpart_upper", b.upper}, {"upperpart_lower", c.lower}, {"upperpart_upper", c.upper}};
  const double slack = a.upper - (b.lower + c.lower);
  r.values.emplace_back("slack", slack);
  r.discrepancy = std::max(0.0, -slack);
  r.tolerances = {{"slack", opt.bound_slack}};
  const bool certified = a.witness_certified && b.witness_certified && c.witness_certified;
  if (slack >= -opt.bound_slack)
    r.verdict = Verdict::Pass;
  else
    r.verdict = certified ? Verdict::Fail : Verdict::Inconclusive;
  return r;
}

/// upper(||T+S||_*) >= lower(||T||_*) + alpha lower(||S||_*), alpha = 2/(d(d-1)) by default.
inline DecompReport check_weak_decomp(const DenseTensor& t, const DenseTensor& s, const ModeFamily& f,
                                      double alpha = -1.0, const DecompOptions& opt = {}) {
  t.require_same_shape(s);
  f.require_shape(t.shape());
  const std::size_t d = t.order();
  if (alpha < 0.0) alpha = 2.0 / static_cast<double>(d * (d - 1));
  if (!detail::inside(t, project(SubspaceSelector::basic({}), f, t))) throw PreconditionError("T is not in T((V_k))");
  const auto high = SubspaceSelector::direct_sum(sets_by_size(d, 2, d));
  if (!detail::inside(s, project(high, f, s))) throw PreconditionError("S is not in the sum of T^I with |I| >= 2");
  DecompReport r;
  r.mode = DecompReport::Mode::Weak;
  const auto a = detail::sandwich(t, opt.seed);
  const auto b = detail::sandwich(s, opt.seed);
  const auto c = detail::sandwich(t + s, opt.seed);
  r.values = {{"T_lower", a.lower}, {"T_upper", a.upper}, {"S_lower", b.lower}, {"S_upper", b.upper},
              {"TS_lower", c.lower}, {"TS_upper", c.upper}, {"alpha", alpha},
              {"mid_margin", c.mid() - a.mid() - alpha * b.mid()}};
  const double slack = c.upper - a.lower - alpha * b.lower;
  r.values.emplace_back("slack", slack);
  r.discrepancy = std::max(0.0, -slack);
  r.tolerances = {{"slack", opt.bound_slack}};
  const bool certified = a.witness_certified && b.witness_certified && c.witness_certified;
  if (slack >= -opt.bound_slack)
    r.verdict = Verdict::Pass;
  else
    r.verdict = certified ? Verdict::Fail : Verdict::Inconclusive;
  return r;
}

struct SuiteTrial {
  std::size_t index = 0;
  Shape shape;
  ModeSet set;
  std::uint64_t seed = 0;
  DecompReport report;
};

struct SuiteSummary {
  std::vector<SuiteTrial> trials;
  std::size_t passed = 0, failed = 0, inconclusive = 0;
  double max_discrepancy = 0.0;
};

struct SuiteSpec {
  DecompReport::Mode mode = DecompReport::Mode::Spectral;
  std::vector<Shape> shapes{{2, 2, 2}};  // trial i uses shapes[i % size]
  std::vector<std::size_t> rank = {};   // per mode; empty means 1 everywhere
  ModeSet set = ModeSet::of({1, 2});
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  double alpha = -1.0;
};

inline SuiteSummary run_decomp_suite(const SuiteSpec& spec) {
  SuiteSummary out;
  out.trials.resize(spec.trials);
  parallel_for(spec.trials, [&](std::size_t i) {
    SuiteTrial& tr = out.trials[i];
    tr.index = i;
    tr.shape = spec.shapes[i % spec.shapes.size()];
    tr.set = spec.set;
    tr.seed = splitmix64(spec.seed * 0x100000001B3ull + i);
    std::vector<std::size_t> ranks = spec.rank;
    if (ranks.size() != tr.shape.size()) ranks.assign(tr.shape.size(), 1);
    DecompOptions o;
    o.seed = tr.seed;
    switch (spec.mode) {
      case DecompReport::Mode::Spectral: {
        const auto p = sample_pair(tr.shape, ranks, tr.set, tr.seed);
        tr.report = check_spectral_decomp(p.t, p.s, p.family, tr.set, o);
        break;
      }
      case DecompReport::Mode::Nuclear: {
        const auto p = sample_pair(tr.shape, ranks, tr.set, tr.seed);
        tr.report = check_nuclear_decomp(p.t, p.s, p.family, tr.set, o);
        break;
      }
      case DecompReport::Mode::LowerBound: {
        const ModeFamily f = random_family(tr.shape, ranks, tr.seed);
        tr.report = check_nuclear_lower_bound(gaussian_tensor(tr.shape, tr.seed, 3), f, tr.set, o);
        break;
      }
      case DecompReport::Mode::Weak: {
        const auto p = sample_weak_pair(tr.shape, ranks, tr.seed);
        tr.report = check_weak_decomp(p.t, p.s, p.family, spec.alpha, o);
        break;
      }
    }
  });
  for (const auto& tr : out.trials) {
    switch (tr.report.verdict) {
      case Verdict::Pass: ++out.passed; break;
      case Verdict::Fail: ++out.failed; break;
      case Verdict::Inconclusive: ++out.inconclusive; break;
    }
    out.max_discrepancy = std::max(out.max_discrepancy, tr.report.discrepancy);
  }
  return out;
}

}  // namespace tnn
