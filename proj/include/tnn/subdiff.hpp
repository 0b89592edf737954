#pragma once
// Subgradients of the nuclear norm: membership tests, Z(T) witnesses,
// inclusion families, radius probing, small sphere programs and the example gallery.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tnn/decomp.hpp"
#include "tnn/errors.hpp"
#include "tnn/nuclear.hpp"
#include "tnn/parallel.hpp"
#include "tnn/rng.hpp"
#include "tnn/spectral.hpp"
#include "tnn/subspace.hpp"
#include "tnn/tensor.hpp"
#include "tnn/verdict.hpp"

namespace tnn {

// ---------------------------------------------------------------------------
// Spectral intervals decided against a threshold.

struct SpectralInterval {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  bool certified = false;
  long cells = 0;
};

struct IntervalOptions {
  std::uint64_t seed = 0;
  std::optional<NetSpec> net;
  // cell budgets tried in order while the interval straddles the threshold
  std::vector<long> budgets{200000, 3000000};
};

/// Bounds on ||G||_sigma, refined until they land on one side of `threshold`
/// or the budgets run out. `resolution` sets the relative gap the search aims for.
inline SpectralInterval spectral_interval(const DenseTensor& g, double threshold, double resolution,
                                          const IntervalOptions& opt = {}) {
  SpectralInterval out;
  if (g.order() <= 2) {
    SpectralOptions so;
    so.seed = opt.seed;
    const auto r = spectral_norm(g, so);
    out.lower = r.certified_lower;
    out.upper = *r.certified_upper;
    out.certified = true;
    return out;
  }
  if (opt.net) {
    const auto nb = spectral_net_bounds(g, *opt.net);
    out.lower = nb.lower;
    out.upper = nb.upper;
    out.certified = true;
    if (out.upper <= threshold || out.lower > threshold) return out;
  }
  SpectralOptions so;
  so.seed = opt.seed;
  so.starts = 16;
  const auto h = spectral_hopm(g, so);
  out.lower = std::max(out.lower, h.value);
  if (out.lower > threshold || !certifiable_shape(g.shape())) return out;
  double gap = std::max(resolution, 1e-12);
  for (long budget : opt.budgets) {
    CertifyOptions c;
    c.seed = opt.seed;
    c.max_cells = budget;
    c.rel_gap = gap;
    const auto cb = spectral_certified(g, c);
    out.cells += cb.cells;
    out.lower = std::max(out.lower, cb.lower);
    out.upper = std::min(out.upper, std::max(cb.upper, out.lower));
    out.certified = true;
    if (out.upper <= threshold || out.lower > threshold) break;
    gap *= 0.1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Membership in the subdifferential of the nuclear norm at T.

struct SubgradientReport {
  double pairing = 0.0;
  double nuclear_lower = 0.0;
  double nuclear_upper = 0.0;
  double sigma_lower = 0.0;
  double sigma_upper = std::numeric_limits<double>::infinity();
  bool sigma_certified = false;
  double tol = 0.0;
  double pairing_slack = 0.0;  // pairing - lower(||T||_*)
  double sigma_slack = 0.0;    // 1 - upper(||G||_sigma)
  Verdict verdict = Verdict::Inconclusive;
};

struct SubgradientOptions {
  double tol = 1e-3;
  std::uint64_t seed = 0;
  std::optional<NetSpec> net;
};

inline SubgradientReport is_subgradient(const DenseTensor& g, const DenseTensor& t, const NuclearSandwich& sw,
                                        const SubgradientOptions& opt = {}) {
  g.require_same_shape(t);
  SubgradientReport r;
  r.tol = opt.tol;
  r.pairing = inner(g, t);
  r.nuclear_lower = sw.lower;
  r.nuclear_upper = sw.upper;
  IntervalOptions io;
  io.seed = opt.seed;
  io.net = opt.net;
  const auto si = spectral_interval(g, 1.0 + opt.tol, opt.tol / 4, io);
  r.sigma_lower = si.lower;
  r.sigma_upper = si.upper;
  r.sigma_certified = si.certified;
  r.pairing_slack = r.pairing - sw.lower;
  r.sigma_slack = 1.0 - si.upper;
  const double ptol = opt.tol * std::max(1.0, sw.lower);
  if (r.pairing < sw.lower - sw.gap() - ptol || si.lower > 1.0 + opt.tol)
    r.verdict = Verdict::Fail;
  else if (r.pairing >= sw.lower - ptol && si.certified && si.upper <= 1.0 + opt.tol)
    r.verdict = Verdict::Pass;
  else
    r.verdict = Verdict::Inconclusive;
  return r;
}

inline SubgradientReport is_subgradient(const DenseTensor& g, const DenseTensor& t,
                                        const SubgradientOptions& opt = {}) {
  g.require_same_shape(t);
  if (norm2(t) == 0.0) throw PreconditionError("subgradient check needs a nonzero T");
  NuclearOptions no;
  no.seed = opt.seed;
  return is_subgradient(g, t, nuclear_sandwich(t, no), opt);
}

// ---------------------------------------------------------------------------
// Z(T) = {Z in T(T) : <Z,T> = ||T||_*, ||Z||_sigma = 1}

struct ZWitness {
  DenseTensor z;
  double pairing = 0.0;
  double spectral_upper = 0.0;
  bool certified = false;
  bool fallback = false;
};

namespace detail {

inline DenseTensor to_core(const DenseTensor& x, const ModeFamily& f) {
  DenseTensor c = x;
  for (std::size_t k = 0; k < f.modes.size(); ++k) c = mode_product(c, k, f.modes[k].basis().transpose());
  return c;
}

}  // namespace detail

inline ZWitness find_z_witness(const DenseTensor& t, const NuclearSandwich& sw, std::uint64_t seed = 0) {
  if (norm2(t) == 0.0) throw PreconditionError("Z witness needs a nonzero T");
  const ModeFamily fam = family_from_tensor(t);
  ZWitness w;
  const DenseTensor z0 = project(SubspaceSelector::basic(ModeSet{}), fam, sw.dual_witness);
  // orthonormal bases leave the spectral norm unchanged on T(T)
  const DenseTensor core = detail::to_core(z0, fam);
  double up = 0.0;
  if (norm2(core) > 0.0) {
    SpectralOptions so;
    so.seed = seed;
    CertifyOptions co;
    co.seed = seed;
    const auto r = spectral_norm(core, so, co);
    up = r.certified_upper ? *r.certified_upper : r.value;
    w.certified = r.certified_upper.has_value();
  }
  if (up > 0.0) {
    w.z = z0;
    w.z *= 1.0 / up;
    w.pairing = inner(w.z, t);
    w.spectral_upper = 1.0;
  }
  if (up <= 0.0 || w.pairing < sw.lower * (1.0 - 1e-6)) {
    SpectralOptions so;
    so.seed = seed;
    const auto r = spectral_norm(t, so);
    const double ts = r.certified_upper ? *r.certified_upper : r.value;
    w.z = t;
    w.z *= 1.0 / ts;
    w.pairing = inner(w.z, t);
    w.spectral_upper = 1.0;
    w.certified = r.certified_upper.has_value();
    w.fallback = true;
  }
  return w;
}

inline ZWitness find_z_witness(const DenseTensor& t, std::uint64_t seed = 0) {
  NuclearOptions no;
  no.seed = seed;
  return find_z_witness(t, nuclear_sandwich(t, no), seed);
}

struct ZMembershipReport {
  double residual = 0.0;
  double pairing = 0.0;
  double nuclear_lower = 0.0;
  double nuclear_upper = 0.0;
  double sigma_lower = 0.0;
  double sigma_upper = 0.0;
  Verdict verdict = Verdict::Inconclusive;
};

inline ZMembershipReport z_membership(const DenseTensor& z, const DenseTensor& t, double tol = 1e-3,
                                      std::uint64_t seed = 0) {
  z.require_same_shape(t);
  ZMembershipReport r;
  const ModeFamily fam = family_from_tensor(t);
  r.residual = norm2(z - project(SubspaceSelector::basic(ModeSet{}), fam, z));
  NuclearOptions no;
  no.seed = seed;
  const auto sw = nuclear_sandwich(t, no);
  r.nuclear_lower = sw.lower;
  r.nuclear_upper = sw.upper;
  r.pairing = inner(z, t);
  IntervalOptions io;
  io.seed = seed;
  const auto si = spectral_interval(z, 1.0 + tol, tol / 4, io);
  r.sigma_lower = si.lower;
  r.sigma_upper = si.upper;
  const double ptol = tol * std::max(1.0, sw.lower);
  const bool bad = r.residual > tol || r.pairing < sw.lower - ptol || r.pairing > sw.upper + ptol ||
                   si.lower > 1.0 + tol || (si.certified && si.upper < 1.0 - tol);
  if (bad)
    r.verdict = Verdict::Fail;
  else if (si.certified && si.upper <= 1.0 + tol && si.lower >= 1.0 - tol)
    r.verdict = Verdict::Pass;
  else
    r.verdict = Verdict::Inconclusive;
  return r;
}

// ---------------------------------------------------------------------------
// Inclusion families Z + X inside the subdifferential.

enum class InclusionFamily { D1, D2, DI, Dfull };

inline const char* to_string(InclusionFamily f) {
  switch (f) {
    case InclusionFamily::D1: return "D1";
    case InclusionFamily::D2: return "D2";
    case InclusionFamily::DI: return "DI";
    case InclusionFamily::Dfull: return "D";
  }
  return "?";
}

struct InclusionPart {
  double weight = 1.0;
  ModeSet set;  // |set| = 2
  DenseTensor x;
};

struct InclusionRequest {
  InclusionFamily family = InclusionFamily::D2;
  ModeSet set;                    // DI only
  DenseTensor x;                  // D1, D2, DI
  std::vector<InclusionPart> parts;  // Dfull: convex combination
};

struct InclusionMember {
  DenseTensor g;
  double x_sigma_upper = 0.0;
  double radius = 0.0;
  SubgradientReport report;
};

namespace detail {

inline void require_in(const SubspaceSelector& sel, const ModeFamily& fam, const DenseTensor& x, const std::string& rule) {
  const double res = norm2(x - project(sel, fam, x));
  if (res > 1e-10 * std::max(1.0, norm2(x)))
    throw PreconditionError(rule + ": X is not in " + sel.to_string() + " (residual " + std::to_string(res) + ")");
}

inline double require_radius(const DenseTensor& x, double radius, const std::string& rule, std::uint64_t seed) {
  IntervalOptions io;
  io.seed = seed;
  const auto si = spectral_interval(x, radius * (1.0 + 1e-8) + 1e-12, 1e-9, io);
  if (si.lower > radius * (1.0 + 1e-8) + 1e-12)
    throw PreconditionError(rule + ": ||X||_sigma >= " + std::to_string(si.lower) + " exceeds radius " +
                            std::to_string(radius));
  return si.upper;
}

inline SubspaceSelector upper_sum(std::size_t d) { return SubspaceSelector::direct_sum(sets_by_size(d, 2, d)); }

}  // namespace detail

inline InclusionMember build_inclusion_member(const DenseTensor& t, const DenseTensor& z, const InclusionRequest& req,
                                              const SubgradientOptions& opt = {}) {
  z.require_same_shape(t);
  const std::size_t d = t.order();
  const ModeFamily fam = family_from_tensor(t);
  InclusionMember m;
  DenseTensor x(t.shape());
  switch (req.family) {
    case InclusionFamily::D1:
    case InclusionFamily::D2: {
      const bool one = req.family == InclusionFamily::D1;
      const std::string rule = one ? "D1" : "D2";
      if (one && d != 3) throw PreconditionError("D1 is defined for order 3 only");
      if (d < 3) throw PreconditionError(rule + " needs order >= 3");
      req.x.require_same_shape(t);
      detail::require_in(detail::upper_sum(d), fam, req.x, rule);
      m.radius = one ? 0.5 : 2.0 / (double(d) * double(d - 1));
      m.x_sigma_upper = detail::require_radius(req.x, m.radius, rule, opt.seed);
      x = req.x;
      break;
    }
    case InclusionFamily::DI: {
      if (req.set.size() < 2 || !req.set.subset_of(ModeSet::all(d)))
        throw PreconditionError("DI needs an index set of size >= 2 within the order");
      req.x.require_same_shape(t);
      detail::require_in(SubspaceSelector::upper(req.set), fam, req.x, "DI");
      m.radius = 1.0;
      m.x_sigma_upper = detail::require_radius(req.x, 1.0, "DI", opt.seed);
      x = req.x;
      break;
    }
    case InclusionFamily::Dfull: {
      if (req.parts.empty()) throw PreconditionError("D needs at least one component");
      double wsum = 0.0;
      for (const auto& p : req.parts) {
        if (p.weight < 0.0) throw PreconditionError("D: negative convex weight");
        if (p.set.size() != 2 || !p.set.subset_of(ModeSet::all(d)))
          throw PreconditionError("D: components need |I| = 2");
        p.x.require_same_shape(t);
        detail::require_in(SubspaceSelector::upper(p.set), fam, p.x, "D");
        m.x_sigma_upper = std::max(m.x_sigma_upper, detail::require_radius(p.x, 1.0, "D", opt.seed));
        wsum += p.weight;
        DenseTensor px = p.x;
        px *= p.weight;
        x += px;
      }
      if (std::abs(wsum - 1.0) > 1e-12) throw PreconditionError("D: convex weights must sum to 1");
      m.radius = 1.0;
      break;
    }
  }
  m.g = z + x;
  m.report = is_subgradient(m.g, t, opt);
  return m;
}

// ---------------------------------------------------------------------------
// Examples with closed-form answers.

struct GalleryEntry {
  std::string name;
  double t = 0.0;
  DenseTensor T;
  DenseTensor Z;
  std::optional<DenseTensor> X;
  std::optional<DenseTensor> Y;
  std::map<std::string, double> oracle;
};

namespace detail {

inline DenseTensor e_outer(const Shape& shape, std::initializer_list<std::size_t> idx, double v = 1.0) {
  std::vector<Vector> f;
  std::size_t k = 0;
  for (auto i : idx) f.push_back(basis_vector(shape[k++], i));
  return outer_atom(f, v);
}

inline DenseTensor yuan3_x(double t) {
  const Shape s{2, 2, 2};
  return e_outer(s, {0, 1, 1}, t) + e_outer(s, {1, 0, 1}, t) + e_outer(s, {1, 1, 0}, t);
}

inline double yuan3_zx(double t) {
  if (t >= -1.0 && t <= 0.5) return 1.0;
  return 2.0 * std::sqrt(t * t * t / (3.0 * t - 1.0));
}

}  // namespace detail

inline std::vector<std::string> gallery_names() {
  return {"notsingle", "oneperp", "yuan3", "yuan33", "yuan4", "limitation"};
}

inline GalleryEntry gallery(const std::string& name, double t = 0.0) {
  using detail::e_outer;
  if (!std::isfinite(t)) throw ParameterError("gallery parameter must be finite");
  GalleryEntry g;
  g.name = name;
  g.t = t;
  if (name == "notsingle") {
    const Shape s{3, 3, 3};
    g.T = e_outer(s, {0, 0, 0}) + e_outer(s, {1, 1, 1}) + e_outer(s, {2, 2, 2});
    g.Z = g.T + e_outer(s, {0, 1, 2}, t);
    g.oracle["sigma_Z"] = std::max(1.0, std::abs(t));
    g.oracle["nuclear_T"] = 3.0;
  } else if (name == "oneperp") {
    const Shape s{2, 2, 3};
    g.T = e_outer(s, {0, 0, 0}) + e_outer(s, {1, 1, 1});
    g.Z = g.T;
    g.X = e_outer(s, {0, 1, 2}, t);
    g.Y = e_outer(s, {0, 0, 2}, t);
    if (std::abs(t) <= 1.0) g.oracle["sigma_ZX"] = 1.0;
    g.oracle["sigma_ZY"] = std::sqrt(1.0 + t * t);
    g.oracle["nuclear_T"] = 2.0;
  } else if (name == "yuan3" || name == "yuan33") {
    const Shape s{2, 2, 2};
    g.T = e_outer(s, {0, 0, 0});
    g.Z = g.T;
    g.X = detail::yuan3_x(t);
    g.oracle["sigma_X"] = 2.0 * std::abs(t) / std::sqrt(3.0);
    g.oracle["sigma_ZX"] = detail::yuan3_zx(t);
    g.oracle["nuclear_T"] = 1.0;
    if (name == "yuan33") {
      g.Y = e_outer(s, {0, 0, 0}, -t);
      g.oracle["sigma_XY"] = std::abs(t);
    }
  } else if (name == "yuan4") {
    const Shape s{2, 2, 2, 2};
    g.T = e_outer(s, {0, 0, 0, 0});
    g.Z = g.T;
    DenseTensor x(s);
    for (auto idx : {std::array<std::size_t, 4>{0, 0, 1, 1}, {0, 1, 0, 1}, {0, 1, 1, 0}, {1, 0, 0, 1}, {1, 0, 1, 0},
                     {1, 1, 0, 0}})
      x += e_outer(s, {idx[0], idx[1], idx[2], idx[3]}, t);
    g.X = x;
    g.oracle["sigma_X"] = 1.5 * std::abs(t);
    g.oracle["subgradient"] = (t >= -(1.0 + std::sqrt(2.0)) / 3.0 && t <= 1.0 / 3.0) ? 1.0 : 0.0;
    g.oracle["nuclear_T"] = 1.0;
  } else if (name == "limitation") {
    const Shape s{2, 2, 2};
    g.T = e_outer(s, {0, 0, 0});
    g.Z = g.T;
    g.X = e_outer(s, {0, 1, 1}) + e_outer(s, {1, 0, 1}) + e_outer(s, {1, 1, 0}) + e_outer(s, {1, 1, 1});
    g.oracle["nuclear_T"] = 1.0;
    // numerical references, not closed forms
    g.oracle["nuclear_S_approx"] = 3.162;
    g.oracle["nuclear_TS_approx"] = 3.078;
  } else {
    throw LookupError("unknown gallery entry '" + name + "'");
  }
  return g;
}

// ---------------------------------------------------------------------------
// Radius probing along random and gallery directions.

struct TauWitness {
  std::string source;
  DenseTensor t;
  DenseTensor z;
  DenseTensor x;
  double x_sigma = 0.0;       // ||X||_sigma
  double value_lower = 0.0;   // bounds on ||Z + X||_sigma
  double value_upper = 0.0;
};

struct TauEstimate {
  SubspaceSelector selector;
  std::size_t d = 0;
  Shape dims;
  double feasible_max = 0.0;
  double infeasible_min = std::numeric_limits<double>::infinity();
  int trials = 0;
  int directions = 0;
  std::optional<TauWitness> feasible_witness;
  std::optional<TauWitness> infeasible_witness;
  std::vector<std::string> notes;
};

struct TauOptions {
  double bisect_tol = 1e-4;
  double feas_tol = 1e-4;  // ||Z+X|| <= 1 + feas_tol counts as feasible
  double s_max = 2.0;
  bool gallery_directions = true;
};

namespace detail {

struct Direction {
  std::string source;
  DenseTensor t, z, u;  // ||u||_sigma = 1
};

struct DirectionResult {
  bool bracketed = true;
  std::optional<TauWitness> feasible, infeasible;
};

inline DirectionResult bisect_direction(const Direction& dir, const TauOptions& opt, std::uint64_t seed) {
  IntervalOptions io;
  io.seed = seed;
  io.budgets = {200000, 1000000};
  const double thr = 1.0 + opt.feas_tol;
  auto eval = [&](double s) {
    DenseTensor x = dir.u;
    x *= s;
    return std::make_pair(x, spectral_interval(dir.z + x, thr, opt.feas_tol / 10, io));
  };
  auto witness = [&](double s, const DenseTensor& x, const SpectralInterval& si) {
    return TauWitness{dir.source, dir.t, dir.z, x, s, si.lower, si.upper};
  };
  DirectionResult res;
  auto [x0, s0] = eval(0.0);
  if (!(s0.certified && s0.upper <= thr)) {
    res.bracketed = false;
    return res;
  }
  res.feasible = witness(0.0, x0, s0);
  auto [xh, sh] = eval(opt.s_max);
  if (sh.certified && sh.upper <= thr) {
    res.bracketed = false;
    return res;
  }
  if (sh.lower > thr) res.infeasible = witness(opt.s_max, xh, sh);
  double lo = 0.0, hi = opt.s_max;
  while (hi - lo > opt.bisect_tol) {
    const double mid = 0.5 * (lo + hi);
    auto [xm, sm] = eval(mid);
    if (sm.certified && sm.upper <= thr) {
      lo = mid;
      res.feasible = witness(mid, xm, sm);
    } else {
      hi = mid;
      if (sm.lower > thr) res.infeasible = witness(mid, xm, sm);
    }
  }
  return res;
}

inline std::optional<DenseTensor> unit_direction(DenseTensor u, std::uint64_t seed) {
  if (norm2(u) < 1e-12) return std::nullopt;
  u *= 1.0 / norm2(u);
  SpectralOptions so;
  so.seed = seed;
  const auto r = spectral_norm(u, so);
  const double v = r.certified_upper ? 0.5 * (r.value + *r.certified_upper) : r.value;
  if (v <= 0.0) return std::nullopt;
  u *= 1.0 / v;
  return u;
}

inline std::vector<Direction> gallery_directions(const SubspaceSelector& sel, const Shape& shape, std::uint64_t seed) {
  std::vector<std::pair<std::string, GalleryEntry>> cands;
  const double a4 = (1.0 + std::sqrt(2.0)) / 3.0;
  if (shape == Shape{2, 2, 2}) {
    cands.emplace_back("yuan3 t=-1", gallery("yuan3", -1.0));
    cands.emplace_back("yuan3 t=0.5", gallery("yuan3", 0.5));
  } else if (shape == Shape{2, 2, 2, 2}) {
    cands.emplace_back("yuan4 t=-(1+sqrt2)/3", gallery("yuan4", -a4));
    cands.emplace_back("yuan4 t=1/3", gallery("yuan4", 1.0 / 3.0));
  } else if (shape == Shape{2, 2, 3}) {
    auto g = gallery("oneperp", 1.0);
    cands.emplace_back("oneperp X", g);
    auto h = g;
    h.X = g.Y;
    cands.emplace_back("oneperp Y", h);
  }
  std::vector<Direction> out;
  for (auto& [label, g] : cands) {
    const ModeFamily fam = family_from_tensor(g.T);
    const DenseTensor& x = *g.X;
    if (norm2(x - project(sel, fam, x)) > 1e-10 * norm2(x)) continue;
    auto u = unit_direction(x, seed);
    if (!u) continue;
    out.push_back({"gallery " + label + " Z=T", g.T, g.Z, *u});
    const auto zw = find_z_witness(g.T, seed);
    if (norm2(zw.z - g.Z) > 1e-8) out.push_back({"gallery " + label + " Z=witness", g.T, zw.z, *u});
  }
  return out;
}

}  // namespace detail

inline TauEstimate probe_tau(const SubspaceSelector& sel, const Shape& shape, int trials, std::uint64_t seed,
                             const TauOptions& opt = {}) {
  if (trials < 1) throw ParameterError("probe_tau needs trials >= 1");
  if (shape.size() < 2) throw DimensionError("probe_tau needs order >= 2");
  sel.validate(shape.size());
  if (sel.kind == SubspaceSelector::Kind::LowerU ||
      (sel.kind == SubspaceSelector::Kind::Basic && sel.set.empty()) ||
      (sel.kind == SubspaceSelector::Kind::DirectSum &&
       std::any_of(sel.sets.begin(), sel.sets.end(), [](ModeSet s) { return s.empty(); })))
    throw PreconditionError("selector must be orthogonal to T(T)");
  if (!certifiable_shape(shape)) throw ParameterError("probe_tau needs a shape the spectral certifier accepts");
  for (auto n : shape)
    if (n < 2) throw DimensionError("probe_tau needs every dimension >= 2");

  TauEstimate est;
  est.selector = sel;
  est.d = shape.size();
  est.dims = shape;
  est.trials = trials;

  std::vector<detail::Direction> dirs;
  if (opt.gallery_directions) dirs = detail::gallery_directions(sel, shape, seed);
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t s = splitmix64(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(i));
    Rng rng = make_stream(s, 0);
    std::vector<Vector> f;
    DenseTensor t(shape);
    const std::size_t rank = (i % 2 == 1 && *std::min_element(shape.begin(), shape.end()) >= 3) ? 2 : 1;
    for (std::size_t r = 0; r < rank; ++r) {
      f.clear();
      for (auto n : shape) f.push_back(unit_vector(rng, static_cast<Eigen::Index>(n)));
      t += outer_atom(f, uniform(rng, 1.0, 2.0));
    }
    const auto zw = find_z_witness(t, s);
    const ModeFamily fam = family_from_tensor(t);
    auto u = detail::unit_direction(project(sel, fam, gaussian_tensor(shape, s, 7)), s);
    if (!u) {
      est.notes.push_back("trial " + std::to_string(i) + ": selector subspace is trivial, skipped");
      continue;
    }
    dirs.push_back({"random trial " + std::to_string(i), t, zw.z, *u});
  }
  est.directions = static_cast<int>(dirs.size());

  std::vector<detail::DirectionResult> results(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t i) { results[i] = detail::bisect_direction(dirs[i], opt, seed + i); });
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const auto& r = results[i];
    if (!r.bracketed) {
      est.notes.push_back(dirs[i].source + ": bisection not bracketed, skipped");
      continue;
    }
    if (r.feasible && r.feasible->x_sigma > est.feasible_max) {
      est.feasible_max = r.feasible->x_sigma;
      est.feasible_witness = r.feasible;
    }
    if (r.infeasible && r.infeasible->x_sigma < est.infeasible_min) {
      est.infeasible_min = r.infeasible->x_sigma;
      est.infeasible_witness = r.infeasible;
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Programs over products of nonnegative quarter circles: maximize f subject to
// f <= 1 + c, where f is a sum of monomials and c a single coupling monomial.

struct SphereMonomial {
  double coef = 1.0;
  std::vector<std::pair<int, int>> factors;  // (variable, component 0/1)
};

struct SphereProgram {
  std::string name;
  int vars = 3;
  std::vector<SphereMonomial> objective;
  SphereMonomial coupling;

  void validate() const {
    if (vars < 1 || vars > 6) throw ParameterError("sphere program needs 1..6 variables");
    auto check = [&](const SphereMonomial& m) {
      std::vector<int> seen;
      for (auto [v, c] : m.factors) {
        if (v < 0 || v >= vars || (c != 0 && c != 1)) throw IndexError("sphere monomial index out of range");
        if (std::find(seen.begin(), seen.end(), v) != seen.end())
          throw ParameterError("sphere monomial repeats a variable");
        seen.push_back(v);
      }
    };
    for (const auto& m : objective) check(m);
    check(coupling);
  }
};

// grid points for the angles other than the one solved in closed form
inline constexpr double kSphereGridBudget = 2e6;

inline std::vector<std::string> sphere_program_names() { return {"opt-b1", "opt-b2", "opt-d4-a", "opt-d4-b"}; }

inline SphereProgram sphere_program(const std::string& name) {
  // variables x, y, z, w = 0, 1, 2, 3; component 0 is a_1, 1 is a_2
  SphereProgram p;
  p.name = name;
  if (name == "opt-b1") {
    p.vars = 3;
    p.objective = {{1, {{0, 0}, {1, 1}, {2, 1}}}, {1, {{0, 1}}}};
    p.coupling = {1, {{0, 0}, {1, 0}, {2, 0}}};
  } else if (name == "opt-b2") {
    p.vars = 3;
    p.objective = {{1, {{0, 0}, {1, 0}, {2, 1}}}, {1, {{0, 0}, {1, 1}}}, {1, {{0, 1}}}};
    p.coupling = {1, {{0, 0}, {1, 0}, {2, 0}}};
  } else if (name == "opt-d4-a") {
    p.vars = 4;
    p.objective = {{1, {{0, 0}, {1, 0}, {2, 1}, {3, 1}}}, {1, {{0, 0}, {1, 1}}}, {1, {{0, 1}}}};
    p.coupling = {1, {{0, 0}, {1, 0}, {2, 0}, {3, 0}}};
  } else if (name == "opt-d4-b") {
    p.vars = 4;
    p.objective = {{1, {{0, 0}, {1, 0}, {2, 0}, {3, 1}}}, {1, {{0, 0}, {1, 0}, {2, 1}}}, {1, {{0, 0}, {1, 1}}},
                   {1, {{0, 1}}}};
    p.coupling = {1, {{0, 0}, {1, 0}, {2, 0}, {3, 0}}};
  } else {
    throw LookupError("unknown sphere program '" + name + "'");
  }
  return p;
}

namespace detail {

// Coefficients of the program as a function of variable 0 once the others are fixed:
// f = a cos + b sin + c0, coupling = p cos + q sin + q0.
struct Reduced {
  double a = 0, b = 0, c0 = 0, p = 0, q = 0, q0 = 0;
};

inline void accumulate(const SphereMonomial& m, const std::vector<double>& ang, double& a, double& b, double& c0) {
  double v = m.coef;
  int slot = -1;
  for (auto [var, comp] : m.factors) {
    if (var == 0) {
      slot = comp;
      continue;
    }
    v *= comp == 0 ? std::cos(ang[var]) : std::sin(ang[var]);
  }
  (slot == 0 ? a : slot == 1 ? b : c0) += v;
}

// max over theta in [0, pi/2] of a cos + b sin + c0 subject to it being <= 1 + p cos + q sin + q0
inline double solve_arc(const Reduced& r, double* theta_out = nullptr) {
  const double half = std::acos(-1.0) / 2;
  const double ha = r.a - r.p, hb = r.b - r.q, hc = r.c0 - r.q0 - 1.0;
  auto f = [&](double th) { return r.a * std::cos(th) + r.b * std::sin(th) + r.c0; };
  auto ok = [&](double th) { return ha * std::cos(th) + hb * std::sin(th) + hc <= 1e-13; };
  std::vector<double> cand{0.0, half};
  double th = std::atan2(r.b, r.a);
  if (th > 0 && th < half) cand.push_back(th);
  // roots of ha cos + hb sin = -hc
  const double R = std::hypot(ha, hb);
  if (R > 0 && std::abs(hc) <= R) {
    const double phi = std::atan2(hb, ha), del = std::acos(std::clamp(-hc / R, -1.0, 1.0));
    for (double root : {phi + del, phi - del})
      for (int k = -2; k <= 2; ++k) {
        const double x = root + 2 * k * std::acos(-1.0);
        if (x >= 0 && x <= half) cand.push_back(x);
      }
  }
  double best = -std::numeric_limits<double>::infinity();
  for (double c : cand)
    if (ok(c) && f(c) > best) {
      best = f(c);
      if (theta_out) *theta_out = c;
    }
  return best;
}

inline double reduced_value(const SphereProgram& p, const std::vector<double>& ang) {
  Reduced r;
  for (const auto& m : p.objective) accumulate(m, ang, r.a, r.b, r.c0);
  accumulate(p.coupling, ang, r.p, r.q, r.q0);
  return solve_arc(r);
}

}  // namespace detail

struct SphereSolution {
  double value = 0.0;
  std::vector<double> angles;  // theta per variable, a = (cos, sin)
};

inline SphereSolution solve_sphere_program_full(const SphereProgram& p, int grid_density = 2000, int polish_iters = 200) {
  p.validate();
  if (grid_density < 2) throw ParameterError("grid density must be >= 2");
  const double half = std::acos(-1.0) / 2;
  const int outer = p.vars - 1;
  // variable 0 is solved exactly on its arc, the rest go on a capped grid
  int per = grid_density;
  if (outer > 0) per = std::min(grid_density, std::max(2, static_cast<int>(std::pow(kSphereGridBudget, 1.0 / outer))));
  std::size_t total = 1;
  for (int k = 0; k < outer; ++k) total *= static_cast<std::size_t>(per);

  struct Best {
    double v = -std::numeric_limits<double>::infinity();
    std::size_t idx = 0;
  };
  const std::size_t chunks = std::min<std::size_t>(total, 64);
  std::vector<Best> bests(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    std::vector<double> ang(p.vars, 0.0);
    for (std::size_t i = c; i < total; i += chunks) {
      std::size_t rest = i;
      for (int k = 1; k <= outer; ++k) {
        ang[k] = half * static_cast<double>(rest % per) / (per - 1);
        rest /= per;
      }
      const double v = detail::reduced_value(p, ang);
      if (v > bests[c].v) bests[c] = {v, i};
    }
  });
  Best best;
  for (const auto& b : bests)
    if (b.v > best.v || (b.v == best.v && b.idx < best.idx)) best = b;

  std::vector<double> ang(p.vars, 0.0);
  std::size_t rest = best.idx;
  for (int k = 1; k <= outer; ++k) {
    ang[k] = half * static_cast<double>(rest % per) / (per - 1);
    rest /= per;
  }
  double val = best.v;
  // pattern search on the grid angles
  double step = outer > 0 ? half / (per - 1) : 0.0;
  for (int it = 0; it < polish_iters && step > 1e-15; ++it) {
    bool moved = false;
    for (int k = 1; k <= outer; ++k)
      for (double sgn : {1.0, -1.0}) {
        auto trial = ang;
        trial[k] = std::clamp(ang[k] + sgn * step, 0.0, half);
        const double v = detail::reduced_value(p, trial);
        if (v > val) {
          val = v;
          ang = trial;
          moved = true;
        }
      }
    if (!moved) step *= 0.5;
  }
  detail::Reduced r;
  for (const auto& m : p.objective) detail::accumulate(m, ang, r.a, r.b, r.c0);
  detail::accumulate(p.coupling, ang, r.p, r.q, r.q0);
  detail::solve_arc(r, &ang[0]);
  return {val, ang};
}

inline double solve_sphere_program(const SphereProgram& p, int grid_density = 2000, int polish_iters = 200) {
  return solve_sphere_program_full(p, grid_density, polish_iters).value;
}

}  // namespace tnn
