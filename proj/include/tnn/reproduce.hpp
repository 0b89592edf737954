#pragma once
// The fixed experiment list behind `tnn reproduce` and the acceptance binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "tnn/decomp.hpp"
#include "tnn/nuclear.hpp"
#include "tnn/rpca.hpp"
#include "tnn/spectral.hpp"
#include "tnn/subdiff.hpp"
#include "tnn/subspace.hpp"

namespace tnn {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

inline std::string count(std::size_t a, std::size_t b) { return std::to_string(a) + "/" + std::to_string(b); }

inline CriterionResult closed_forms() {
  CriterionResult r{1, "closed-form spectral norms", true, {}, 0.0};
  SpectralOptions so;
  double worst = 0.0;
  auto check = [&](const DenseTensor& x, double expect) {
    worst = std::max(worst, std::abs(spectral_hopm(x, so).value - expect));
  };
  check(*gallery("yuan3", 1.0).X, 2.0 / std::sqrt(3.0));
  check(*gallery("yuan3", 1.0 / 3.0).X, 2.0 / (3.0 * std::sqrt(3.0)));
  for (double t : {-1.0, -0.5, 0.0, 0.5}) {
    const auto g = gallery("yuan3", t);
    check(g.Z + *g.X, 1.0);
  }
  for (double t : {0.6, -1.1}) {
    const auto g = gallery("yuan3", t);
    check(g.Z + *g.X, 2.0 * std::sqrt(t * t * t / (3.0 * t - 1.0)));
  }
  for (double t : {0.0, 0.5, 1.0, 1.5}) check(gallery("notsingle", t).Z, std::max(1.0, std::abs(t)));
  r.pass = worst <= 1e-6;
  r.detail = "max error " + fmt("%.2e", worst);
  return r;
}

inline CriterionResult sphere_programs() {
  CriterionResult r{2, "sphere programs", true, {}, 0.0};
  const double exact[] = {(1.0 + std::sqrt(2.0)) / 2.0, 1.5, (1.0 + std::sqrt(3.0)) / 2.0, 1.6};
  double worst = 0.0;
  std::size_t i = 0;
  for (const auto& n : sphere_program_names()) {
    const double v = solve_sphere_program(sphere_program(n));
    worst = std::max(worst, std::abs(v - exact[i++]));
    r.detail += n + "=" + fmt("%.9f", v) + " ";
  }
  r.pass = worst <= 1e-6;
  r.detail += "max error " + fmt("%.2e", worst);
  return r;
}

inline CriterionResult limitation_example() {
  CriterionResult r{3, "nuclear norm of T+S vs S (orthogonal pair)", true, {}, 0.0};
  const auto g = gallery("limitation");
  const auto a = nuclear_sandwich(g.T);
  const auto b = nuclear_sandwich(*g.X);
  const auto c = nuclear_sandwich(g.T + *g.X);
  const bool ok_t = std::abs(a.lower - 1.0) <= 1e-8 && std::abs(a.upper - 1.0) <= 1e-8;
  const bool ok_ts = std::abs(c.mid() - 3.078) <= 0.02;
  const bool ok_s = std::abs(b.mid() - 3.162) <= 0.02;
  const bool strict = c.mid() < a.mid() + b.mid() && c.mid() < b.mid();
  r.pass = ok_t && ok_ts && ok_s && strict;
  r.detail = "T=[" + fmt("%.10f", a.lower) + "," + fmt("%.10f", a.upper) + "] S=[" + fmt("%.6f", b.lower) + "," +
             fmt("%.6f", b.upper) + "] T+S=[" + fmt("%.6f", c.lower) + "," + fmt("%.6f", c.upper) + "]";
  return r;
}

inline CriterionResult spectral_suite() {
  CriterionResult r{4, "spectral decomposability suite", true, {}, 0.0};
  SuiteSpec s;
  s.mode = DecompReport::Mode::Spectral;
  s.shapes = {{2, 2, 2}, {2, 2, 2, 2}};
  s.set = ModeSet::of({1, 2});
  s.trials = 100;
  s.seed = 1;
  const auto out = run_decomp_suite(s);
  std::size_t ok = 0;
  for (const auto& tr : out.trials) ok += tr.report.discrepancy <= 1e-6;
  r.pass = ok == s.trials;
  r.detail = count(ok, s.trials) + " within 1e-6, max discrepancy " + fmt("%.2e", out.max_discrepancy);
  return r;
}

inline CriterionResult nuclear_suite() {
  CriterionResult r{5, "nuclear decomposability suite", true, {}, 0.0};
  SuiteSpec s;
  s.mode = DecompReport::Mode::Nuclear;
  s.shapes = {{2, 2, 2}};
  s.set = ModeSet::of({1, 2});
  s.trials = 50;
  s.seed = 1;
  const auto out = run_decomp_suite(s);
  r.pass = out.passed >= 48 && out.failed == 0;
  r.detail = "pass " + count(out.passed, s.trials) + ", fail " + std::to_string(out.failed) + ", inconclusive " +
             std::to_string(out.inconclusive);
  return r;
}

inline CriterionResult weak_suite() {
  CriterionResult r{6, "weak decomposability with constant 1/2", true, {}, 0.0};
  SuiteSpec s;
  s.mode = DecompReport::Mode::Weak;
  s.shapes = {{2, 2, 2}};
  s.trials = 100;
  s.seed = 1;
  s.alpha = 0.5;
  const auto out = run_decomp_suite(s);
  std::size_t ok = 0;
  double worst = 1e300;
  for (const auto& tr : out.trials) {
    const double m = tr.report.value("mid_margin");
    worst = std::min(worst, m);
    ok += m >= -1e-3;
  }
  r.pass = ok == s.trials;
  r.detail = count(ok, s.trials) + ", smallest margin " + fmt("%.4f", worst);
  return r;
}

inline CriterionResult membership() {
  CriterionResult r{7, "subdifferential membership", true, {}, 0.0};
  std::size_t right = 0, total = 0;
  auto expect = [&](Verdict got, Verdict want, const std::string& what) {
    ++total;
    if (got == want)
      ++right;
    else
      r.detail += what + ":" + to_string(got) + " ";
  };
  for (double t : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    const auto g = gallery("notsingle", t);
    expect(z_membership(g.Z, g.T).verdict, Verdict::Pass, "Z(" + fmt("%g", t) + ")");
  }
  {
    const auto g = gallery("oneperp", 0.8);
    expect(is_subgradient(g.Z + *g.X, g.T).verdict, Verdict::Pass, "oneperp X(0.8)");
    const auto h = gallery("oneperp", 0.3);
    expect(is_subgradient(h.Z + *h.Y, h.T).verdict, Verdict::Fail, "oneperp Y(0.3)");
  }
  for (double t : {-1.0, 0.5, -1.05, 0.55}) {
    const auto g = gallery("yuan3", t);
    expect(is_subgradient(g.Z + *g.X, g.T).verdict, (t >= -1.0 && t <= 0.5) ? Verdict::Pass : Verdict::Fail,
           "yuan3 " + fmt("%g", t));
  }
  const double a = (1.0 + std::sqrt(2.0)) / 3.0;
  for (double t : {-a + 1e-3, 1.0 / 3.0 - 1e-3, 0.35}) {
    const auto g = gallery("yuan4", t);
    expect(is_subgradient(g.Z + *g.X, g.T).verdict, t < 0.34 ? Verdict::Pass : Verdict::Fail,
           "yuan4 " + fmt("%g", t));
  }
  r.pass = right == total;
  r.detail = count(right, total) + " verdicts as expected " + r.detail;
  return r;
}

inline CriterionResult tau_probes() {
  CriterionResult r{8, "radius probing", true, {}, 0.0};
  const auto e3 = probe_tau(SubspaceSelector::direct_sum(sets_by_size(3, 2, 3)), {2, 2, 2}, 2, 1);
  const auto e4 = probe_tau(SubspaceSelector::direct_sum(sets_by_size(4, 2, 4)), {2, 2, 2, 2}, 1, 1);
  const auto eu = probe_tau(SubspaceSelector::upper(ModeSet::of({1, 2})), {3, 3, 3}, 2, 1);
  const bool a = e3.feasible_max >= 2.0 / std::sqrt(3.0) - 1e-3;
  const bool b = e4.feasible_max >= (1.0 + std::sqrt(2.0)) / 2.0 - 1e-3;
  const bool c = std::abs(eu.feasible_max - 1.0) <= 1e-3;
  r.pass = a && b && c;
  r.detail = "d3 " + fmt("%.6f", e3.feasible_max) + ", d4 " + fmt("%.6f", e4.feasible_max) + ", U^{1,2} " +
             fmt("%.6f", eu.feasible_max);
  return r;
}

inline CriterionResult matrix_rpca() {
  CriterionResult r{9, "matrix robust PCA recovery", true, {}, 0.0};
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    InstanceConfig c;
    c.shape = {40, 40};
    c.r = 2;
    c.rho = 0.05;
    c.m = 1;
    c.seed = seed;
    const auto in = generate_instance(c);
    const Matrix L = as_matrix(in.L);
    const auto sol = solve_matrix_rpca(L + as_matrix(in.S), 1.0 / std::sqrt(40.0));
    const double err = (sol.L - L).norm() / L.norm();
    worst = std::max(worst, err);
    ok += err <= 1e-4;
  }
  r.pass = ok >= 9;
  r.detail = count(ok, 10) + " seeds within 1e-4, worst " + fmt("%.2e", worst);
  return r;
}

// five-condition pass count on seeds 1..10, recorded from the pilot run
inline constexpr std::size_t kFrozenTensorFullPass = 0;

inline CriterionResult tensor_pipeline() {
  CriterionResult r{10, "tensor certificate pipeline", true, {}, 0.0};
  std::size_t exact = 0, small_lpi = 0, monotone = 0, full = 0;
  double lpi_max = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    InstanceConfig c;
    c.shape = {12, 12, 12};
    c.r = 1;
    c.rho = 0.02;
    c.m = 3;
    c.style = FactorStyle::Incoherent;
    c.seed = seed;
    const auto rep = certify(generate_instance(c));
    // p_I(D1) is zero by construction, so the support residual of D is the one of D2
    exact += rep.d1_on_support == 0.0 && rep.neumann_feasible && rep.condition("support_identity").value <= 1e-8;
    const auto& lp = rep.condition("pL_pI_norm");
    small_lpi += lp.verdict == Verdict::Pass;
    lpi_max = std::max(lpi_max, lp.value);
    bool dec = true;
    for (std::size_t j = 1; j < rep.golf.residual_fro.size(); ++j)
      dec = dec && rep.golf.residual_fro[j] < rep.golf.residual_fro[j - 1];
    monotone += dec;
    full += rep.verdict == Verdict::Pass;
  }
  r.pass = exact == 10 && small_lpi >= 8 && monotone == 10;
  r.detail = "exact " + count(exact, 10) + ", ||pL pI||<1/2 " + count(small_lpi, 10) + " (max " +
             fmt("%.4f", lpi_max) + "), golfing decreasing " + count(monotone, 10) + ", five-condition pass " +
             count(full, 10) + " (frozen " + std::to_string(kFrozenTensorFullPass) + ")";
  return r;
}

inline CriterionResult projection_algebra() {
  CriterionResult r{11, "projection algebra", true, {}, 0.0};
  double orth = 0.0, recon = 0.0, adj = 0.0, idem = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng = make_stream(11, i);
    const std::size_t d = 2 + static_cast<std::size_t>(rng() % 3);
    Shape shape;
    std::vector<std::size_t> ranks;
    for (std::size_t k = 0; k < d; ++k) {
      shape.push_back(2 + static_cast<std::size_t>(rng() % 3));
      ranks.push_back(static_cast<std::size_t>(rng() % (shape.back() + 1)));
    }
    const ModeFamily f = random_family(shape, ranks, 1000 + i);
    const DenseTensor t = gaussian_tensor(shape, 1000 + i, 1);
    const DenseTensor u = gaussian_tensor(shape, 1000 + i, 2);
    const auto parts = basic_split(f, t);
    DenseTensor sum(shape);
    for (std::size_t a = 0; a < parts.size(); ++a) {
      sum += parts[a];
      for (std::size_t b = a + 1; b < parts.size(); ++b) orth = std::max(orth, std::abs(inner(parts[a], parts[b])));
    }
    recon = std::max(recon, norm_inf(sum - t));
    std::vector<SubspaceSelector> sels;
    for (std::uint32_t m = 0; m < (1u << d); ++m) sels.push_back(SubspaceSelector::basic(ModeSet{m}));
    const ModeSet I{static_cast<std::uint32_t>(rng() % (1u << d))};
    sels.push_back(SubspaceSelector::upper(I));
    sels.push_back(SubspaceSelector::lower(I));
    sels.push_back(SubspaceSelector::direct_sum(sets_by_size(d, 2, d)));
    for (const auto& s : sels) {
      const DenseTensor pt = project(s, f, t);
      adj = std::max(adj, std::abs(inner(pt, u) - inner(t, project(s, f, u))));
      idem = std::max(idem, norm_inf(project(s, f, pt) - pt));
    }
  }
  r.pass = orth <= 1e-10 && recon <= 1e-12 && adj <= 1e-10 && idem <= 1e-10;
  r.detail = "orthogonality " + fmt("%.1e", orth) + ", reconstruction " + fmt("%.1e", recon) + ", self-adjoint " +
             fmt("%.1e", adj) + ", idempotent " + fmt("%.1e", idem);
  return r;
}

}  // namespace detail

inline std::vector<int> criterion_ids() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}; }

inline CriterionResult run_criterion(int id) {
  static const std::vector<std::function<CriterionResult()>> table{
      detail::closed_forms,  detail::sphere_programs, detail::limitation_example, detail::spectral_suite,
      detail::nuclear_suite, detail::weak_suite,      detail::membership,         detail::tau_probes,
      detail::matrix_rpca,   detail::tensor_pipeline, detail::projection_algebra};
  if (id < 1 || id > static_cast<int>(table.size())) throw ParameterError("no criterion " + std::to_string(id));
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r = table[static_cast<std::size_t>(id - 1)]();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  // runtime limits that belong to the criterion itself
  const double limit = id == 1 ? 5.0 : id == 2 ? 10.0 : (id == 3 || id == 9) ? 60.0 : 0.0;
  if (limit > 0.0 && r.seconds >= limit) {
    r.pass = false;
    r.detail += " (over the " + detail::fmt("%.0f", limit) + " s limit)";
  }
  return r;
}

inline std::string format_result(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "[%s] criterion %2d  %-44s %7.2fs  ", r.pass ? "PASS" : "FAIL", r.id,
                r.title.c_str(), r.seconds);
  return head + r.detail;
}

}  // namespace tnn
