#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "linprog.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "subspace.hpp"
#include "tensor.hpp"

namespace tnn {

struct NuclearOptions {
  double tol = 1e-9;        // pricing stops once ||Z||_sigma <= 1 + tol
  std::size_t max_atoms = 400;
  int max_rounds = 200;
  std::uint64_t seed = 0;
  int starts = 16;
  std::optional<NetSpec> net;  // certify the witness with this net instead
  CertifyOptions certify{};
};

struct NuclearSandwich {
  double lower = 0.0;
  double upper = 0.0;
  NuclearDecomposition decomposition;
  DenseTensor dual_witness;
  double witness_spectral_upper = 1.0;
  bool witness_certified = false;
  bool pricing_converged = true;
  int rounds = 0;

  double gap() const { return upper - lower; }
  double mid() const { return 0.5 * (lower + upper); }
};

namespace detail {

inline void finish_upper(const DenseTensor& t, NuclearSandwich& s) {
  const DenseTensor residual = t - decomposition_sum(s.decomposition);
  CompensatedSum u;
  u.add(s.decomposition.weight_sum());
  u.add(norm1(residual));
  s.upper = u.value();
}

inline NuclearSandwich sandwich_low_order(const DenseTensor& t) {
  NuclearSandwich s;
  s.decomposition.shape = t.shape();
  s.witness_certified = true;
  const double fro = norm2(t);
  if (t.order() == 1) {
    s.dual_witness = DenseTensor(t.shape());
    if (fro > 0.0) {
      s.decomposition.atoms.push_back({fro, {Vector(t.as_vector() / fro)}});
      s.dual_witness = t * (1.0 / fro);
    }
    s.witness_spectral_upper = 1.0;
    s.lower = fro > 0.0 ? inner(t, s.dual_witness) : 0.0;
    finish_upper(t, s);
    return s;
  }
  const Matrix m = mode_matricize(t, 0);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Matrix w = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] <= 1e-14 * std::max(sv[0], 1e-300)) break;
    s.decomposition.atoms.push_back({sv[i], {svd.matrixU().col(i), svd.matrixV().col(i)}});
    w += svd.matrixU().col(i) * svd.matrixV().col(i).transpose();
  }
  s.dual_witness = mode_dematricize(w, 0, t.shape());
  if (s.decomposition.atoms.empty()) {
    s.witness_spectral_upper = 1.0;
  } else {
    Eigen::JacobiSVD<Matrix> wsvd(w);
    s.witness_spectral_upper = wsvd.singularValues()[0] * (1.0 + 64 * std::numeric_limits<double>::epsilon());
  }
  s.lower = inner(t, s.dual_witness) / s.witness_spectral_upper;
  finish_upper(t, s);
  return s;
}

}  // namespace detail

namespace detail {

/// Certified [lower, upper] for ||T||_*. Column generation on
/// min sum|lambda| s.t. sum lambda_i a_i = T over rank-one atoms, seeded with
/// the coordinate atoms so the master problem is always feasible. The master's
/// dual y is the witness Z; new atoms are HOPM local maxima of Z with
/// <Z, a> > 1. lower = <T, Z> / (certified bound on ||Z||_sigma).
inline NuclearSandwich sandwich_generation(const DenseTensor& t, const NuclearOptions& opt) {
  NuclearSandwich s;
  s.decomposition.shape = t.shape();
  const double fro = norm2(t);
  if (fro == 0.0) {
    s.dual_witness = DenseTensor(t.shape());
    s.witness_spectral_upper = 1.0;
    s.witness_certified = true;
    return s;
  }
  const std::size_t n = t.size();
  L1EqualityLp lp(Eigen::Map<const Vector>(t.raw(), static_cast<Eigen::Index>(n)));
  std::vector<std::vector<Vector>> factors(n);  // per LP column
  for (std::size_t j = 0; j < n; ++j) {
    const MultiIndex idx = t.unravel(j);
    for (std::size_t k = 0; k < t.order(); ++k) factors[j].push_back(basis_vector(t.dim(k), idx[k]));
  }
  std::vector<int> born(n, -1);

  // Stabilized pricing: atoms are priced at a blend of the master's dual and
  // the best witness seen so far (the center). The center's value
  // <T, Z_c> / ||Z_c||_sigma (HOPM estimate) is the running lower estimate.
  SpectralOptions so;
  so.starts = opt.starts;
  // a violated atom is enough, converged maximizers are not needed
  so.max_iter = 300;
  auto price = [&](const DenseTensor& y, int round) {
    so.seed = splitmix64(opt.seed ^ (0x9E37ull * static_cast<std::uint64_t>(round + 1)));
    return hopm_all_starts(y, so);
  };
  auto best_of = [](const std::vector<HopmRun>& runs) {
    double b = 0.0;
    for (const auto& r : runs) b = std::max(b, r.value);
    return b;
  };
  DenseTensor center = t;
  double center_value = inner(t, t) / best_of(price(t, -1));
  center *= 1.0 / best_of(price(t, -1));

  auto res = lp.solve();
  s.pricing_converged = false;
  double alpha = 0.5;
  for (int round = 0; round < opt.max_rounds; ++round) {
    s.rounds = round + 1;
    if (res.value - center_value <= opt.tol * res.value) {
      s.pricing_converged = true;
      break;
    }
    const DenseTensor y_lp = from_vector(t.shape(), res.dual);
    const DenseTensor y = alpha * center + (1.0 - alpha) * y_lp;
    const auto runs = price(y, round);
    const double sig = best_of(runs);
    if (sig > 0.0 && inner(t, y) / sig > center_value) {
      center = y * (1.0 / sig);
      center_value = inner(t, y) / sig;
    }
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t r = 0; r < runs.size(); ++r) order.emplace_back(-runs[r].value, r);
    std::sort(order.begin(), order.end());
    std::vector<DenseTensor> added;
    for (const auto& [neg, r] : order) {
      const DenseTensor a = outer_atom(runs[r].xs);
      // violated by the master's dual, not only by the blend
      if (inner(a, y_lp) <= 1.0 + 1e-12) continue;
      bool duplicate = false;
      for (const auto& b : added)
        if (std::abs(inner(a, b)) > 1.0 - 1e-9) duplicate = true;
      if (duplicate) continue;
      added.push_back(a);
      lp.add_column(Eigen::Map<const Vector>(a.raw(), static_cast<Eigen::Index>(n)));
      factors.push_back(runs[r].xs);
      born.push_back(round);
    }
    if (added.empty()) {
      // mis-price: the blend was already feasible, move closer to the master's dual
      alpha *= 0.5;
      if (alpha < 1e-6) {
        // the master's dual itself has no violated atom HOPM can find
        const auto direct = price(y_lp, round + 7919);
        const double sd = best_of(direct);
        if (sd > 0.0 && res.value / sd > center_value) {
          center = y_lp * (1.0 / sd);
          center_value = res.value / sd;
        }
        s.pricing_converged = res.value - center_value <= opt.tol * res.value;
        break;
      }
      continue;
    }
    alpha = std::min(0.5, alpha * 1.5);
    if (lp.columns() > n + opt.max_atoms) {
      // forget the oldest non-basic generated atoms
      const int cutoff = round - 2;
      const auto remap = lp.prune([&](std::size_t j) { return born[j] > cutoff; });
      std::vector<std::vector<Vector>> f2;
      std::vector<int> b2;
      for (std::size_t j = 0; j < remap.size(); ++j)
        if (remap[j] >= 0) {
          f2.push_back(std::move(factors[j]));
          b2.push_back(born[j]);
        }
      factors.swap(f2);
      born.swap(b2);
    }
    res = lp.solve();
  }
  const DenseTensor z = center;

  // decomposition from the master's weights
  for (std::size_t j = 0; j < lp.columns(); ++j) {
    const double w = res.lambda[static_cast<Eigen::Index>(j)];
    if (w != 0.0) s.decomposition.atoms.push_back({w, factors[j]});
  }
  detail::finish_upper(t, s);

  // certify the witness
  double wu = 0.0;
  if (opt.net) {
    wu = spectral_net_bounds(z, *opt.net).upper;
    s.witness_certified = true;
  } else if (certifiable_shape(t.shape())) {
    CertifyOptions c = opt.certify;
    c.seed = opt.seed;
    wu = spectral_certified(z, c).upper;
    s.witness_certified = true;
  } else {
    SpectralOptions so;
    so.starts = std::max(opt.starts, 32);
    so.seed = opt.seed;
    wu = spectral_hopm(z, so).value;
    s.witness_certified = false;
  }
  s.dual_witness = z;
  s.witness_spectral_upper = wu;
  s.lower = wu > 0.0 ? inner(t, z) / wu : 0.0;
  if (s.lower < fro) {
    // T / ||T||_2 is always a witness with ||.||_sigma <= 1
    s.dual_witness = t;
    s.witness_spectral_upper = fro;
    s.witness_certified = true;
    s.lower = inner(t, t) / fro;
  }
  return s;
}

}  // namespace detail

/// Works on the core T x_k B_k^T (B_k an orthonormal basis of sp_k(T)) and
/// lifts atoms and witness back; both norms are unchanged by the embedding.
inline NuclearSandwich nuclear_sandwich(const DenseTensor& t, const NuclearOptions& opt = {}) {
  if (t.order() <= 2) return detail::sandwich_low_order(t);
  const double fro = norm2(t);
  if (fro == 0.0 || opt.net) return detail::sandwich_generation(t, opt);
  const ModeFamily fam = family_from_tensor(t, 1e-13);
  bool reduce = false;
  for (std::size_t k = 0; k < t.order(); ++k) reduce = reduce || fam.modes[k].rank() < t.dim(k);
  if (!reduce) return detail::sandwich_generation(t, opt);

  DenseTensor core = t;
  double embed = 1.0;
  for (std::size_t k = 0; k < t.order(); ++k) {
    const Matrix& b = fam.modes[k].basis();
    core = mode_product(core, k, b.transpose());
    Eigen::JacobiSVD<Matrix> svd(b);
    embed *= svd.singularValues()[0];
  }
  NuclearSandwich c = detail::sandwich_generation(core, opt);
  NuclearSandwich s;
  s.decomposition.shape = t.shape();
  for (const auto& a : c.decomposition.atoms) {
    RankOneAtom lifted{a.weight, {}};
    for (std::size_t k = 0; k < t.order(); ++k) {
      Vector f = fam.modes[k].basis() * a.factors[k];
      const double nf = f.norm();
      lifted.factors.push_back(f / nf);
      lifted.weight *= nf;
    }
    s.decomposition.atoms.push_back(std::move(lifted));
  }
  detail::finish_upper(t, s);
  DenseTensor z = c.dual_witness;
  for (std::size_t k = 0; k < t.order(); ++k) z = mode_product(z, k, fam.modes[k].basis());
  s.dual_witness = z;
  s.witness_spectral_upper = c.witness_spectral_upper * std::max(1.0, embed);
  s.witness_certified = c.witness_certified;
  s.pricing_converged = c.pricing_converged;
  s.rounds = c.rounds;
  s.lower = inner(t, z) / s.witness_spectral_upper;
  if (s.lower < fro) {
    s.dual_witness = t;
    s.witness_spectral_upper = fro;
    s.witness_certified = true;
    s.lower = inner(t, t) / fro;
  }
  return s;
}

struct DualityReport {
  double pairing = 0.0;
  double bound = 0.0;  // upper(||T||_sigma) * upper(||S||_*)
  double slack = 0.0;
  bool holds = false;
};

/// <T, S> <= ||T||_sigma ||S||_* with both factors bounded from above.
inline DualityReport duality_gap_check(const DenseTensor& t, const DenseTensor& s, double spectral_upper_t,
                                       const NuclearSandwich& nuclear_s) {
  t.require_same_shape(s);
  DualityReport r;
  r.pairing = inner(t, s);
  r.bound = spectral_upper_t * nuclear_s.upper;
  r.slack = r.bound - r.pairing;
  r.holds = r.slack >= -1e-12 * std::max(1.0, std::abs(r.bound));
  return r;
}

inline DualityReport duality_gap_check(const DenseTensor& t, const DenseTensor& s, std::uint64_t seed = 0) {
  SpectralOptions so;
  so.seed = seed;
  const auto sr = spectral_norm(t, so);
  NuclearOptions no;
  no.seed = seed;
  const auto ns = nuclear_sandwich(s, no);
  const double up = sr.certified_upper ? *sr.certified_upper : std::numeric_limits<double>::infinity();
  return duality_gap_check(t, s, up, ns);
}

struct RestrictedNormReport {
  double max_maximizer_residual = 0.0;  // max_k ||(I - P_k) x_k|| / ||x_k||
  bool maximizers_inside = false;
  double witness_pairing = 0.0;         // <T, p(Z)>
  double sandwich_lower = 0.0;
  double projected_witness_upper = 0.0;
  double original_witness_upper = 0.0;
  bool witness_projection_ok = false;
  bool passed() const { return maximizers_inside && witness_projection_ok; }
};

/// For T inside T((V_k)): spectral maximizers live in the V_k, and projecting
/// a nuclear witness onto T((V_k)) keeps it a witness.
inline RestrictedNormReport restricted_norm_check(const DenseTensor& t, const ModeFamily& family, std::uint64_t seed = 0) {
  const DenseTensor inside = project(SubspaceSelector::basic({}), family, t);
  if (norm2(inside - t) > 1e-10 * std::max(1.0, norm2(t)))
    throw PreconditionError("restricted_norm_check: tensor is not inside T((V_k))");
  RestrictedNormReport r;
  SpectralOptions so;
  so.seed = seed;
  const auto sr = spectral_hopm(t, so);
  for (std::size_t k = 0; k < t.order(); ++k) {
    const Vector& x = sr.maximizers[k];
    const double res = (family.modes[k].complement_projector() * x).norm() / std::max(x.norm(), 1e-300);
    r.max_maximizer_residual = std::max(r.max_maximizer_residual, res);
  }
  r.maximizers_inside = r.max_maximizer_residual <= 1e-6;

  NuclearOptions no;
  no.seed = seed;
  const auto ns = nuclear_sandwich(t, no);
  const DenseTensor pz = project(SubspaceSelector::basic({}), family, ns.dual_witness);
  r.witness_pairing = inner(t, pz) / ns.witness_spectral_upper;
  r.sandwich_lower = ns.lower;
  r.original_witness_upper = ns.witness_spectral_upper;
  // p(Z) = core x_k B_k with orthonormal B_k, so the core has the same spectral norm
  DenseTensor core = pz;
  bool empty = norm2(pz) == 0.0;
  for (std::size_t k = 0; k < t.order() && !empty; ++k) {
    if (family.modes[k].rank() == 0) empty = true;
    else core = mode_product(core, k, family.modes[k].basis().transpose());
  }
  if (empty) {
    r.projected_witness_upper = 0.0;
  } else if (core.order() <= 2) {
    r.projected_witness_upper = spectral_norm(core).certified_upper.value();
  } else if (certifiable_shape(core.shape())) {
    CertifyOptions c;
    c.seed = seed;
    r.projected_witness_upper = spectral_certified(core, c).upper;
  } else {
    r.projected_witness_upper = spectral_hopm(core, so).value;
  }
  // bounds on both sides carry the certification gap
  const double slack = 1e-8 * std::max(1.0, r.original_witness_upper);
  r.witness_projection_ok = r.witness_pairing >= r.sandwich_lower * (1.0 - 1e-6) &&
                            r.projected_witness_upper <= r.original_witness_upper + slack;
  return r;
}

}  // namespace tnn
