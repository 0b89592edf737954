#include <gtest/gtest.h>

#include <cmath>

#include "tnn/decomp.hpp"
#include "tnn/nuclear.hpp"
#include "tnn/spectral.hpp"
#include "tnn/subdiff.hpp"

using namespace tnn;

namespace {

DenseTensor e3(std::size_t i, std::size_t j, std::size_t k, Shape s = {2, 2, 2}) { return unit_tensor(s, {i, j, k}); }

const DenseTensor kX1 = e3(0, 1, 1) + e3(1, 0, 1) + e3(1, 1, 0);
const double kTwoOverRoot3 = 2.0 / std::sqrt(3.0);

DenseTensor diag3() {
  DenseTensor t({3, 3, 3});
  for (std::size_t i = 0; i < 3; ++i) t({i, i, i}) = 1.0;
  return t;
}

}  // namespace

TEST(SpectralHopm, ClosedForms) {
  EXPECT_NEAR(spectral_hopm(e3(0, 0, 0)).value, 1.0, 1e-12);
  EXPECT_NEAR(spectral_hopm(kX1).value, kTwoOverRoot3, 1e-8);
  DenseTensor z = diag3();
  z({0, 1, 2}) = 0.5;
  EXPECT_NEAR(spectral_hopm(z).value, 1.0, 1e-8);
  const auto zero = spectral_hopm(DenseTensor({2, 3, 2}));
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_EQ(zero.maximizers.size(), 3u);
}

TEST(SpectralHopm, MaximizersAttainValue) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto t = gaussian_tensor({2, 3, 2}, s, 1);
    const auto r = spectral_hopm(t);
    for (const auto& x : r.maximizers) EXPECT_NEAR(x.norm(), 1.0, 1e-12);
    EXPECT_NEAR(contract_all(t, r.maximizers), r.value, 1e-10);
  }
}

TEST(SpectralHopm, TraceIsNondecreasing) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    SpectralOptions o;
    o.record_trace = true;
    o.seed = s;
    const auto r = spectral_hopm(gaussian_tensor({3, 3, 3}, s, 2), o);
    ASSERT_FALSE(r.trace.empty());
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i], r.trace[i - 1] - 1e-12);
  }
}

TEST(SpectralHopm, Deterministic) {
  const auto t = gaussian_tensor({2, 2, 2, 2}, 3, 3);
  SpectralOptions o;
  o.seed = 17;
  const auto a = spectral_hopm(t, o), b = spectral_hopm(t, o);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.maximizers[0], b.maximizers[0]);
}

TEST(SpectralNorm, MatrixCaseIsLargestSingularValue) {
  const auto t = gaussian_tensor({3, 4}, 1, 1);
  const double sv = Eigen::JacobiSVD<Matrix>(mode_matricize(t, 0)).singularValues()[0];
  const auto r = spectral_norm(t);
  EXPECT_NEAR(r.value, sv, 1e-12);
  ASSERT_TRUE(r.certified_upper);
  EXPECT_GE(*r.certified_upper, sv);
  EXPECT_NEAR(spectral_norm(DenseTensor({3}, {3, 0, 4})).value, 5.0, 1e-15);
}

TEST(SpectralNorm, CertifiedIntervalBracketsHopm) {
  for (const Shape& shape : {Shape{2, 2, 2}, Shape{2, 2, 2, 2}, Shape{3, 3, 3}, Shape{2, 3, 4}}) {
    for (std::uint64_t s = 0; s < 4; ++s) {
      const auto t = gaussian_tensor(shape, s, 5);
      const auto r = spectral_norm(t);
      ASSERT_TRUE(r.certified_upper) << shape_string(shape);
      EXPECT_GE(*r.certified_upper, r.value);
      EXPECT_LE(*r.certified_upper - r.certified_lower, 1e-6 * r.value) << shape_string(shape);
      EXPECT_GE(r.certified_lower, norm_inf(t) - 1e-10);
      EXPECT_LE(r.value, norm2(t) + 1e-12);
    }
  }
}

TEST(SpectralNorm, NotCertifiedBeyondSizeLimits) {
  EXPECT_FALSE(certifiable_shape({6, 6, 6}));
  EXPECT_TRUE(certifiable_shape({5, 5, 2}));
  const auto r = spectral_norm(gaussian_tensor({6, 2, 2}, 0, 0));
  EXPECT_FALSE(r.certified_upper);
}

TEST(SpectralNorm, ScaleEquivariant) {
  const auto t = gaussian_tensor({2, 2, 3}, 4, 4);
  const auto a = spectral_norm(t), b = spectral_norm(3.5 * t);
  EXPECT_NEAR(b.value / a.value, 3.5, 1e-10);
  EXPECT_NEAR(*b.certified_upper / *a.certified_upper, 3.5, 1e-7);
}

TEST(NetBounds, Examples) {
  const auto unit = spectral_net_bounds(e3(0, 0, 0), make_net({2, 2, 2}, 1.0 / 6.0));
  EXPECT_LE(unit.upper, 2.0);
  EXPECT_LE(unit.lower, 1.0);
  EXPECT_GE(unit.upper, 1.0);
  const auto zero = spectral_net_bounds(DenseTensor({2, 2, 2}), make_net({2, 2, 2}, 0.1));
  EXPECT_EQ(zero.lower, 0.0);
  EXPECT_EQ(zero.upper, 0.0);
  const auto x = spectral_net_bounds(kX1, make_net({2, 2, 2}, 0.02));
  EXPECT_LE(x.lower, kTwoOverRoot3 + 1e-12);
  EXPECT_GE(x.upper, kTwoOverRoot3);
  EXPECT_LE(x.upper - x.lower, 0.075);
}

TEST(NetBounds, RefinementNeverWidens) {
  const auto t = gaussian_tensor({2, 2, 2}, 8, 8);
  double last = 1e300;
  for (double eps : {0.1, 0.05, 0.02}) {
    const auto b = spectral_net_bounds(t, make_net(t.shape(), eps));
    EXPECT_LE(b.upper - b.lower, last);
    last = b.upper - b.lower;
  }
}

TEST(NetBounds, Errors) {
  EXPECT_THROW(make_net({2, 2}, 0.0), ParameterError);
  EXPECT_THROW(make_net({5, 2}, 0.1), ParameterError);
  EXPECT_THROW(spectral_net_bounds(kX1, make_net({2, 2, 2}, 0.4)), ParameterError);
  EXPECT_THROW(spectral_net_bounds(kX1, make_net({2, 2}, 0.1)), DimensionError);
}

TEST(SymmetricBanach, Examples) {
  const auto g = gallery("yuan3", -1.0);
  EXPECT_NEAR(spectral_symmetric_banach(g.Z + *g.X), 1.0, 1e-8);
  const double t = 0.6;
  const auto h = gallery("yuan3", t);
  EXPECT_NEAR(spectral_symmetric_banach(h.Z + *h.X), 2.0 * std::sqrt(t * t * t / (3.0 * t - 1.0)), 1e-8);
  EXPECT_NEAR(spectral_symmetric_banach(e3(0, 0, 0) + e3(1, 1, 1)), 1.0, 1e-8);
  EXPECT_THROW(spectral_symmetric_banach(e3(0, 0, 1)), PreconditionError);
}

TEST(Nuclear, RankOneIsExact) {
  const auto s = nuclear_sandwich(e3(0, 0, 0));
  EXPECT_NEAR(s.lower, 1.0, 1e-8);
  EXPECT_NEAR(s.upper, 1.0, 1e-8);
  Rng rng = make_stream(2, 2);
  const auto atom = outer_atom({unit_vector(rng, 2), unit_vector(rng, 3), unit_vector(rng, 2)}, 2.5);
  const auto a = nuclear_sandwich(atom);
  EXPECT_NEAR(a.lower, 2.5, 1e-8);
  EXPECT_NEAR(a.upper, 2.5, 1e-8);
}

TEST(Nuclear, DiagonalCube) {
  const auto s = nuclear_sandwich(diag3());
  EXPECT_LE(s.lower, 3.0 + 1e-8);
  EXPECT_GE(s.upper, 3.0 - 1e-8);
  EXPECT_LE(s.gap(), 0.05);
}

TEST(Nuclear, OrthogonalPairExample) {
  const auto g = gallery("limitation");
  const auto t = nuclear_sandwich(g.T), s = nuclear_sandwich(*g.X), ts = nuclear_sandwich(g.T + *g.X);
  EXPECT_NEAR(t.lower, 1.0, 1e-8);
  EXPECT_NEAR(t.upper, 1.0, 1e-8);
  EXPECT_NEAR(s.mid(), 3.162, 0.02);
  EXPECT_NEAR(ts.mid(), 3.078, 0.02);
  // ||T+S||_* < ||S||_* even though T is orthogonal to S
  EXPECT_LT(ts.upper, s.lower);
}

TEST(Nuclear, MatrixCaseIsSumOfSingularValues) {
  const auto t = gaussian_tensor({3, 4}, 6, 6);
  const double want = Eigen::JacobiSVD<Matrix>(mode_matricize(t, 0)).singularValues().sum();
  const auto s = nuclear_sandwich(t);
  EXPECT_NEAR(s.lower, want, 1e-10);
  EXPECT_NEAR(s.upper, want, 1e-10);
}

TEST(Nuclear, DecompositionReproducesTensor) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto t = gaussian_tensor({2, 2, 2}, s, 9);
    const auto r = nuclear_sandwich(t);
    EXPECT_LT(norm_inf(decomposition_sum(r.decomposition) - t), 1e-9);
    EXPECT_GE(r.decomposition.weight_sum(), r.upper - 1e-9);
    EXPECT_LE(r.lower, r.upper + 1e-12);
  }
}

TEST(Nuclear, TrivialChainAndScaling) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto t = gaussian_tensor({2, 3, 2}, s, 10);
    const auto r = nuclear_sandwich(t);
    EXPECT_LE(r.upper, norm1(t) + 1e-10);
    EXPECT_GE(r.lower, norm2(t) - 1e-10);
    const auto r2 = nuclear_sandwich(2.0 * t);
    EXPECT_NEAR(r2.mid() / r.mid(), 2.0, 1e-6);
  }
  const auto zero = nuclear_sandwich(DenseTensor({2, 2, 2}));
  EXPECT_EQ(zero.lower, 0.0);
  EXPECT_EQ(zero.upper, 0.0);
}

TEST(Nuclear, GallerySoundness) {
  const auto t = gallery("notsingle").T;
  const auto s = nuclear_sandwich(t);
  EXPECT_LE(s.lower, 3.0 + 1e-8);
  EXPECT_GE(s.upper, 3.0 - 1e-8);
  for (const auto& [name, tt] : {std::pair{"yuan3", -1.0}, std::pair{"yuan33", 0.5}, std::pair{"oneperp", 0.0}}) {
    const auto g = gallery(name, tt);
    if (!g.oracle.count("nuclear_T")) continue;
    const auto r = nuclear_sandwich(g.T);
    EXPECT_LE(r.lower, g.oracle.at("nuclear_T") + 1e-8) << name;
    EXPECT_GE(r.upper, g.oracle.at("nuclear_T") - 1e-8) << name;
  }
}

TEST(Duality, Cases) {
  const auto a = e3(0, 0, 0);
  const auto eq = duality_gap_check(a, a);
  EXPECT_TRUE(eq.holds);
  EXPECT_NEAR(eq.pairing, 1.0, 1e-15);
  EXPECT_NEAR(eq.slack, 0.0, 1e-8);
  const auto orth = duality_gap_check(a, e3(1, 1, 1));
  EXPECT_TRUE(orth.holds);
  EXPECT_EQ(orth.pairing, 0.0);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto r = duality_gap_check(gaussian_tensor({2, 2, 2}, s, 1), gaussian_tensor({2, 2, 2}, s, 2), s);
    EXPECT_TRUE(r.holds);
    EXPECT_GE(r.slack, 0.0);
  }
}

TEST(Restricted, UnitAtomMaximizersAreBasisVectors) {
  ModeFamily f;
  for (int k = 0; k < 3; ++k) f.modes.push_back(ModeSubspace::from_orthonormal(basis_vector(2, 0)));
  const auto r = restricted_norm_check(e3(0, 0, 0), f);
  EXPECT_TRUE(r.passed());
  const auto sr = spectral_hopm(e3(0, 0, 0));
  for (const auto& x : sr.maximizers) EXPECT_NEAR(std::abs(x[0]), 1.0, 1e-10);
  EXPECT_THROW(restricted_norm_check(e3(1, 0, 0), f), PreconditionError);
}

TEST(Restricted, ProjectionNeverIncreasesSpectralNorm) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Shape shape{3, 3, 2};
    const auto f = random_family(shape, {2, 1 + s % 2, 1}, s);
    const auto t = gaussian_tensor(shape, s, 3);
    const auto p = project(SubspaceSelector::basic({}), f, t);
    const auto pt = spectral_norm(p), tt = spectral_norm(t);
    EXPECT_LE(pt.certified_lower, *tt.certified_upper + 1e-10);
  }
}

TEST(Restricted, RankTwoInTwoDimFamily) {
  const Shape shape{3, 3, 3};
  const auto f = random_family(shape, {2, 2, 2}, 77);
  Rng rng = make_stream(77, 1);
  DenseTensor t(shape);
  for (int a = 0; a < 2; ++a)
    t += outer_atom({f.modes[0].basis() * gaussian_vector(rng, 2), f.modes[1].basis() * gaussian_vector(rng, 2),
                     f.modes[2].basis() * gaussian_vector(rng, 2)});
  const auto r = restricted_norm_check(t, f, 1);
  EXPECT_TRUE(r.maximizers_inside);
  EXPECT_TRUE(r.witness_projection_ok);
}
