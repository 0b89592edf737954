#include <gtest/gtest.h>

#include <cmath>

#include "tnn/decomp.hpp"
#include "tnn/subdiff.hpp"

using namespace tnn;

namespace {

const double kRoot2 = std::sqrt(2.0);
const double kRoot3 = std::sqrt(3.0);

DenseTensor e3(std::size_t i, std::size_t j, std::size_t k) { return unit_tensor({2, 2, 2}, {i, j, k}); }

// random X in the sum of T^I, |I| >= 2, for V_k = span(e1), scaled to a spectral norm just below r
DenseTensor high_direction(std::uint64_t seed, double r) {
  ModeFamily f;
  for (int k = 0; k < 3; ++k) f.modes.push_back(ModeSubspace::from_orthonormal(basis_vector(2, 0)));
  const auto x = project(SubspaceSelector::direct_sum(sets_by_size(3, 2, 3)), f, gaussian_tensor({2, 2, 2}, seed, 4));
  const auto s = spectral_norm(x);
  return x * (r * 0.999 / *s.certified_upper);
}

}  // namespace

TEST(Gallery, ClosedFormsAgreeWithSolvers) {
  for (double t : {-1.1, -1.0, -0.5, 0.0, 1.0 / 3.0, 0.5, 0.6, 1.0}) {
    const auto g = gallery("yuan3", t);
    EXPECT_NEAR(spectral_symmetric_banach(g.Z + *g.X), g.oracle.at("sigma_ZX"), 1e-8) << t;
    EXPECT_NEAR(spectral_norm(*g.X).value, g.oracle.at("sigma_X"), 1e-8) << t;
  }
  EXPECT_NEAR(gallery("yuan3", 1.0 / 3.0).oracle.at("sigma_X"), 2.0 / (3.0 * kRoot3), 1e-15);
  for (double t : {0.0, 0.5, 1.0, 1.5, -1.2}) {
    const auto g = gallery("notsingle", t);
    EXPECT_NEAR(spectral_norm(g.Z).value, g.oracle.at("sigma_Z"), 1e-8) << t;
  }
  for (double t : {0.3, 0.8}) {
    const auto g = gallery("oneperp", t);
    EXPECT_NEAR(spectral_norm(g.Z + *g.X).value, g.oracle.at("sigma_ZX"), 1e-8);
    EXPECT_NEAR(spectral_norm(g.Z + *g.Y).value, g.oracle.at("sigma_ZY"), 1e-8);
  }
  for (double t : {-0.5, 0.25}) {
    const auto g = gallery("yuan4", t);
    EXPECT_NEAR(spectral_symmetric_banach(*g.X), g.oracle.at("sigma_X"), 1e-8);
    const auto h = gallery("yuan33", t);
    EXPECT_NEAR(spectral_norm(*h.X + *h.Y).value, h.oracle.at("sigma_XY"), 1e-8);
  }
}

TEST(Gallery, NotSingleAtZeroIsTheDiagonal) {
  const auto g = gallery("notsingle", 0.0);
  EXPECT_EQ(g.Z, g.T);
  EXPECT_EQ(norm1(g.T), 3.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g.T({i, i, i}), 1.0);
  EXPECT_THROW(gallery("nope"), LookupError);
  EXPECT_THROW(gallery("yuan3", NAN), ParameterError);
  EXPECT_EQ(gallery_names().size(), 6u);
}

TEST(SpectralInterval, MatrixCaseIsExact) {
  const auto si = spectral_interval(gaussian_tensor({3, 3}, 1, 1), 1.0, 1e-6);
  EXPECT_TRUE(si.certified);
  EXPECT_LE(si.upper - si.lower, 1e-12);
}

TEST(SpectralInterval, DecidesAgainstThreshold) {
  const auto g = gallery("yuan3", 0.5);
  const auto si = spectral_interval(g.Z + *g.X, 1.001, 2.5e-4);
  EXPECT_TRUE(si.certified);
  EXPECT_LE(si.upper, 1.001);
  EXPECT_GE(si.upper, 1.0);
}

TEST(Subgradient, RankOneSelf) {
  const auto t = e3(0, 0, 0);
  EXPECT_EQ(is_subgradient(t, t).verdict, Verdict::Pass);
  EXPECT_EQ(is_subgradient(t * (1.0 / norm2(t)), t).verdict, Verdict::Pass);
}

TEST(Subgradient, OnePerpendicularMode) {
  const auto g = gallery("oneperp", 0.8);
  const auto r = is_subgradient(g.Z + *g.X, g.T);
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_NEAR(r.pairing, 2.0, 1e-12);
  const auto h = gallery("oneperp", 0.3);
  const auto f = is_subgradient(h.Z + *h.Y, h.T);
  EXPECT_EQ(f.verdict, Verdict::Fail);
  EXPECT_NEAR(f.sigma_lower, std::sqrt(1.09), 1e-8);
}

TEST(Subgradient, BeyondTheFullStretch) {
  // ||X(-1)||_sigma = 2/sqrt(3) > 1, yet Z + X(-1) is a subgradient
  const auto g = gallery("yuan3", -1.0);
  EXPECT_GT(spectral_norm(*g.X).value, 1.15);
  EXPECT_EQ(is_subgradient(g.Z + *g.X, g.T).verdict, Verdict::Pass);
  for (double t : {0.55, 0.75, -1.05}) {
    const auto h = gallery("yuan3", t);
    EXPECT_EQ(is_subgradient(h.Z + *h.X, h.T).verdict, Verdict::Fail) << t;
  }
}

TEST(Subgradient, FourthOrderRange) {
  const double lo = -(1.0 + kRoot2) / 3.0;
  for (double t : {lo + 1e-3, 0.0, 1.0 / 3.0 - 1e-3, 1.0 / 3.0}) {
    const auto g = gallery("yuan4", t);
    EXPECT_EQ(is_subgradient(g.Z + *g.X, g.T).verdict, Verdict::Pass) << t;
  }
  for (double t : {0.35, lo - 0.01}) {
    const auto g = gallery("yuan4", t);
    EXPECT_EQ(is_subgradient(g.Z + *g.X, g.T).verdict, Verdict::Fail) << t;
  }
  // just past 1/3 the norm is 1 + 3.9e-4, visible only below the default tol
  const auto g = gallery("yuan4", 0.34);
  SubgradientOptions tight;
  tight.tol = 1e-4;
  EXPECT_EQ(is_subgradient(g.Z + *g.X, g.T, tight).verdict, Verdict::Fail);
  EXPECT_EQ(is_subgradient(g.Z + *g.X, g.T).verdict, Verdict::Pass);
}

TEST(Subgradient, WrongPairingFails) {
  const auto t = e3(0, 0, 0);
  EXPECT_EQ(is_subgradient(e3(1, 1, 1), t).verdict, Verdict::Fail);
  EXPECT_THROW(is_subgradient(e3(0, 0, 0), unit_tensor({2, 2}, {0, 0})), DimensionError);
}

TEST(Subgradient, DefinitionalInequality) {
  // G in the subdifferential: ||Y||_* - ||T||_* >= <G, Y - T> for every Y
  const auto g = gallery("yuan3", -0.5);
  const DenseTensor G = g.Z + *g.X;
  ASSERT_EQ(is_subgradient(G, g.T).verdict, Verdict::Pass);
  const auto st = nuclear_sandwich(g.T);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto y = gaussian_tensor({2, 2, 2}, s, 11);
    const auto sy = nuclear_sandwich(y);
    EXPECT_GE(sy.upper - st.lower, inner(G, y - g.T) - sy.gap() - st.gap() - 1e-6);
  }
}

TEST(ZWitness, Examples) {
  const auto t = e3(0, 0, 0);
  const auto w = find_z_witness(t);
  EXPECT_LT(norm_inf(w.z - t), 1e-8);
  const auto diag = gallery("notsingle").T;
  const auto d = find_z_witness(diag);
  EXPECT_NEAR(d.pairing, 3.0, 1e-6);
  EXPECT_LE(d.spectral_upper, 1.0 + 1e-6);
  EXPECT_NEAR(spectral_norm(d.z).value, 1.0, 1e-6);
}

TEST(ZWitness, MatrixCaseIsPolarFactor) {
  const auto t = gaussian_tensor({3, 3}, 21, 1);
  Eigen::JacobiSVD<Matrix> svd(mode_matricize(t, 0), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix uv = svd.matrixU() * svd.matrixV().transpose();
  const auto w = find_z_witness(t);
  EXPECT_LT((mode_matricize(w.z, 0) - uv).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ZWitness, PassesMembershipOnRandomLowRank) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    Rng rng = make_stream(s, 5);
    const auto t = outer_atom({unit_vector(rng, 3), unit_vector(rng, 3), unit_vector(rng, 3)}, 2.0) +
                   outer_atom({unit_vector(rng, 3), unit_vector(rng, 3), unit_vector(rng, 3)}, 1.0);
    const auto w = find_z_witness(t, s);
    EXPECT_NE(z_membership(w.z, t, 1e-3, s).verdict, Verdict::Fail);
  }
}

TEST(ZMembership, NotSingleton) {
  for (double t : {-1.0, 0.0, 1.0}) {
    const auto g = gallery("notsingle", t);
    EXPECT_EQ(z_membership(g.Z, g.T).verdict, Verdict::Pass) << t;
  }
  const auto bad = gallery("notsingle", 1.2);
  EXPECT_EQ(z_membership(bad.Z, bad.T).verdict, Verdict::Fail);
  const auto a = gallery("notsingle", -1.0), b = gallery("notsingle", 1.0);
  EXPECT_EQ(z_membership(0.5 * a.Z + 0.5 * b.Z, a.T).verdict, Verdict::Pass);
}

TEST(ZMembership, OutsideTheTangentCoreFails) {
  const auto g = gallery("yuan3", 0.3);
  EXPECT_EQ(z_membership(g.Z + *g.X, g.T).verdict, Verdict::Fail);
}

TEST(Inclusion, DIWithUnitRadius) {
  const auto g = gallery("oneperp", 1.0);
  // sp_1(T) and sp_2(T) are full, so nothing with |I| >= 2 survives
  InclusionRequest req;
  req.family = InclusionFamily::DI;
  req.set = ModeSet::of({2, 3});
  req.x = unit_tensor({2, 2, 3}, {0, 1, 2});
  EXPECT_THROW(build_inclusion_member(g.T, g.Z, req), PreconditionError);
  const auto t = e3(0, 0, 0);
  req.set = ModeSet::of({1, 2});
  req.x = e3(1, 1, 0);
  const auto m = build_inclusion_member(t, t, req);
  EXPECT_EQ(m.report.verdict, Verdict::Pass);
  EXPECT_EQ(m.radius, 1.0);
  req.x = 1.01 * e3(1, 1, 0);
  EXPECT_THROW(build_inclusion_member(t, t, req), PreconditionError);
}

TEST(Inclusion, D2RadiusAtOrderThree) {
  const auto g = gallery("yuan3", 0.0);
  InclusionRequest req;
  req.family = InclusionFamily::D2;
  req.x = e3(1, 1, 0) * (1.0 / 3.0);
  const auto m = build_inclusion_member(g.T, g.Z, req);
  EXPECT_NEAR(m.radius, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(m.report.verdict, Verdict::Pass);
}

TEST(Inclusion, D2MembersAreSubgradients) {
  const auto t = e3(0, 0, 0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    InclusionRequest req;
    req.family = InclusionFamily::D2;
    req.x = high_direction(s, 1.0 / 3.0);
    EXPECT_EQ(build_inclusion_member(t, t, req).report.verdict, Verdict::Pass) << s;
  }
}

TEST(Inclusion, D1RejectsTheStretchedDirection) {
  const auto g = gallery("yuan3", -1.0);
  InclusionRequest req;
  req.family = InclusionFamily::D1;
  req.x = *g.X;
  EXPECT_THROW(build_inclusion_member(g.T, g.Z, req), PreconditionError);
  req.x = *gallery("yuan3", 0.4).X;  // 2(0.4)/sqrt3 = 0.46 < 1/2
  EXPECT_EQ(build_inclusion_member(g.T, g.Z, req).report.verdict, Verdict::Pass);
}

TEST(Inclusion, ConvexCombination) {
  const auto t = e3(0, 0, 0);
  InclusionRequest req;
  req.family = InclusionFamily::Dfull;
  req.parts = {{0.5, ModeSet::of({1, 2}), e3(1, 1, 0)}, {0.5, ModeSet::of({2, 3}), e3(0, 1, 1)}};
  EXPECT_EQ(build_inclusion_member(t, t, req).report.verdict, Verdict::Pass);
  req.parts[0].weight = 0.6;
  EXPECT_THROW(build_inclusion_member(t, t, req), PreconditionError);
  req.parts[0].weight = 0.5;
  req.parts[0].set = ModeSet::of({1, 2, 3});
  EXPECT_THROW(build_inclusion_member(t, t, req), PreconditionError);
}

TEST(Inclusion, SubspaceViolationIsRejected) {
  const auto t = e3(0, 0, 0);
  InclusionRequest req;
  req.family = InclusionFamily::D2;
  req.x = 0.1 * e3(1, 0, 0);  // |I| = 1 component
  EXPECT_THROW(build_inclusion_member(t, t, req), PreconditionError);
}

TEST(Inclusion, ConstantOneHalfIsTight) {
  // X + Y has spectral norm |t| but Z + X(0.55) is not a subgradient
  const auto g = gallery("yuan33", 0.55);
  EXPECT_NEAR(spectral_norm(*g.X + *g.Y).value, 0.55, 1e-8);
  EXPECT_EQ(is_subgradient(g.Z + *g.X, g.T).verdict, Verdict::Fail);
}

TEST(Tau, OrderThreeSumReachesTwoOverRoot3) {
  const auto e = probe_tau(SubspaceSelector::direct_sum(sets_by_size(3, 2, 3)), {2, 2, 2}, 1, 1);
  EXPECT_GE(e.feasible_max, 2.0 / kRoot3 - 1e-3);
  ASSERT_TRUE(e.feasible_witness);
  EXPECT_LE(e.feasible_witness->value_upper, 1.0 + 1e-4 + 1e-9);
}

TEST(Tau, SingletonModeCollapses) {
  const auto e = probe_tau(SubspaceSelector::basic(ModeSet::of({3})), {2, 2, 3}, 1, 1);
  EXPECT_LT(e.infeasible_min, 0.05);
}

TEST(Tau, UpperSetIsExactlyOne) {
  const auto e = probe_tau(SubspaceSelector::upper(ModeSet::of({1, 2})), {3, 3, 3}, 2, 1);
  EXPECT_NEAR(e.feasible_max, 1.0, 1e-3);
  EXPECT_GE(e.infeasible_min, 1.0 - 1e-3);
}

TEST(Tau, Preconditions) {
  EXPECT_THROW(probe_tau(SubspaceSelector::lower(ModeSet::of({1})), {2, 2, 2}, 1, 0), PreconditionError);
  EXPECT_THROW(probe_tau(SubspaceSelector::basic({}), {2, 2, 2}, 1, 0), PreconditionError);
  EXPECT_THROW(probe_tau(SubspaceSelector::basic(ModeSet::of({1})), {2, 2, 2}, 0, 0), ParameterError);
  EXPECT_THROW(probe_tau(SubspaceSelector::basic(ModeSet::of({1})), {6, 6, 6}, 1, 0), ParameterError);
}

TEST(Sphere, ProgramValues) {
  EXPECT_NEAR(solve_sphere_program(sphere_program("opt-b1")), (1.0 + kRoot2) / 2.0, 1e-6);
  EXPECT_NEAR(solve_sphere_program(sphere_program("opt-b2")), 1.5, 1e-6);
  EXPECT_NEAR(solve_sphere_program(sphere_program("opt-d4-a")), (1.0 + kRoot3) / 2.0, 1e-6);
  EXPECT_NEAR(solve_sphere_program(sphere_program("opt-d4-b")), 1.6, 1e-6);
  EXPECT_THROW(sphere_program("opt-x"), LookupError);
}

TEST(Sphere, SolutionIsFeasible) {
  const auto p = sphere_program("opt-b2");
  const auto s = solve_sphere_program_full(p);
  ASSERT_EQ(s.angles.size(), 3u);
  auto comp = [&](int v, int c) { return c == 0 ? std::cos(s.angles[v]) : std::sin(s.angles[v]); };
  auto mono = [&](const SphereMonomial& m) {
    double x = m.coef;
    for (auto [v, c] : m.factors) x *= comp(v, c);
    return x;
  };
  double f = 0.0;
  for (const auto& m : p.objective) f += mono(m);
  EXPECT_NEAR(f, s.value, 1e-9);
  EXPECT_LE(f, 1.0 + mono(p.coupling) + 1e-9);
}
