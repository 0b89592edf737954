#include <gtest/gtest.h>

#include <cmath>

#include "tnn/decomp.hpp"
#include "tnn/subdiff.hpp"

using namespace tnn;

namespace {

DenseTensor e3(std::size_t i, std::size_t j, std::size_t k) { return unit_tensor({2, 2, 2}, {i, j, k}); }

ModeFamily span_e1(std::size_t d) {
  ModeFamily f;
  for (std::size_t k = 0; k < d; ++k) f.modes.push_back(ModeSubspace::from_orthonormal(basis_vector(2, 0)));
  return f;
}

const ModeSet kI12 = ModeSet::of({1, 2});

}  // namespace

TEST(SamplePair, MembershipOrthogonalityReproducibility) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = sample_pair({2, 2, 2}, {1, 1, 1}, kI12, s);
    EXPECT_LT(norm_inf(project(SubspaceSelector::lower(kI12), p.family, p.t) - p.t), 1e-12);
    EXPECT_LT(norm_inf(project(SubspaceSelector::upper(kI12), p.family, p.s) - p.s), 1e-12);
    EXPECT_NEAR(inner(p.t, p.s), 0.0, 1e-12);
    EXPECT_GT(norm2(p.t), 0.0);
    EXPECT_GT(norm2(p.s), 0.0);
    // sp_1(T), sp_2(T) inside V_1, V_2
    const auto spans = family_from_tensor(p.t);
    for (std::size_t k = 0; k < 2; ++k)
      for (Eigen::Index c = 0; c < spans.modes[k].basis().cols(); ++c)
        EXPECT_TRUE(p.family.modes[k].contains(spans.modes[k].basis().col(c), 1e-8));
    const auto q = sample_pair({2, 2, 2}, {1, 1, 1}, kI12, s);
    EXPECT_EQ(p.t, q.t);
    EXPECT_EQ(p.s, q.s);
  }
}

TEST(SpectralDecomp, DiagonalPair) {
  const auto r = check_spectral_decomp(e3(0, 0, 0), e3(1, 1, 1), span_e1(3), ModeSet::all(3));
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_NEAR(r.value("sigma_TS"), 1.0, 1e-10);
  EXPECT_LE(r.discrepancy, 1e-10);
}

TEST(SpectralDecomp, ScaledPair) {
  const auto p = sample_pair({2, 2, 2}, {1, 1, 1}, kI12, 4);
  const auto r = check_spectral_decomp(2.0 * p.t, p.s, p.family, kI12);
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_NEAR(r.value("sigma_TS"), std::max(r.value("sigma_T"), r.value("sigma_S")), 1e-6);
}

TEST(SpectralDecomp, SuiteHundredTrialsD3) {
  SuiteSpec s;
  s.mode = DecompReport::Mode::Spectral;
  s.shapes = {{2, 2, 2}};
  s.trials = 100;
  s.seed = 3;
  const auto out = run_decomp_suite(s);
  EXPECT_EQ(out.passed, 100u);
  EXPECT_LE(out.max_discrepancy, 1e-6);
}

TEST(SpectralDecomp, RejectsPairsOutsideTheSubspaces) {
  EXPECT_THROW(check_spectral_decomp(e3(1, 0, 0), e3(1, 1, 1), span_e1(3), kI12), PreconditionError);
}

TEST(NuclearDecomp, MatrixBlockDiagonal) {
  DenseTensor t({4, 4}), s({4, 4});
  const auto a = gaussian_tensor({2, 2}, 1, 1), b = gaussian_tensor({2, 2}, 1, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      t({i, j}) = a({i, j});
      s({i + 2, j + 2}) = b({i, j});
    }
  ModeFamily f;
  for (int k = 0; k < 2; ++k) {
    Matrix basis = Matrix::Zero(4, 2);
    basis(0, 0) = basis(1, 1) = 1.0;
    f.modes.push_back(ModeSubspace::from_orthonormal(basis));
  }
  const auto r = check_nuclear_decomp(t, s, f, ModeSet::all(2));
  EXPECT_EQ(r.verdict, Verdict::Pass);
  const auto sv = [](const DenseTensor& x) { return Eigen::JacobiSVD<Matrix>(mode_matricize(x, 0)).singularValues().sum(); };
  EXPECT_NEAR(r.value("TS_lower"), sv(t) + sv(s), 1e-10);
  EXPECT_NEAR(r.value("TS_upper"), sv(t) + sv(s), 1e-10);
}

TEST(NuclearDecomp, DiagonalPairAddsUp) {
  const auto r = check_nuclear_decomp(e3(0, 0, 0), e3(1, 1, 1), span_e1(3), ModeSet::all(3));
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_NEAR(r.value("TS_lower"), 2.0, 1e-6);
  EXPECT_NEAR(r.value("TS_upper"), 2.0, 1e-6);
}

TEST(NuclearDecomp, SuiteTenTrials) {
  SuiteSpec s;
  s.mode = DecompReport::Mode::Nuclear;
  s.trials = 10;
  s.seed = 5;
  const auto out = run_decomp_suite(s);
  EXPECT_EQ(out.failed, 0u);
  EXPECT_GE(out.passed, 9u);
}

TEST(NuclearDecomp, LargerSetImpliesSmallerSet) {
  // a pair valid for I2 = [3] is also valid for I1 = {1,2}, and both pass
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto p = sample_pair({2, 2, 2}, {1, 1, 1}, ModeSet::all(3), 50 + s);
    const auto big = check_nuclear_decomp(p.t, p.s, p.family, ModeSet::all(3));
    const auto small = check_nuclear_decomp(p.t, p.s, p.family, kI12);
    EXPECT_EQ(big.verdict, Verdict::Pass);
    EXPECT_EQ(small.verdict, Verdict::Pass);
  }
}

TEST(LowerBound, ExactSplitReducesToEquality) {
  const auto p = sample_pair({2, 2, 2}, {1, 1, 1}, kI12, 9);
  const auto r = check_nuclear_lower_bound(p.t + p.s, p.family, kI12);
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_NEAR(r.value("slack"), 0.0, 1e-5);
}

TEST(LowerBound, ThirdComponentGivesStrictSlack) {
  const Shape shape{2, 2, 2};
  const auto f = random_family(shape, {1, 1, 1}, 12);
  const auto t = gaussian_tensor(shape, 12, 3);
  const auto r = check_nuclear_lower_bound(t, f, kI12);
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_GT(r.value("slack"), 1e-3);
}

TEST(LowerBound, MatrixInstanceWithExactNorms) {
  const auto f = random_family({4, 4}, {2, 2}, 14);
  const auto t = gaussian_tensor({4, 4}, 14, 1);
  const auto r = check_nuclear_lower_bound(t, f, ModeSet::all(2));
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_NEAR(r.value("T_lower"), r.value("T_upper"), 1e-10);
  EXPECT_THROW(check_nuclear_lower_bound(t, f, ModeSet::of({1})), PreconditionError);
}

TEST(LowerBound, SuiteRuns) {
  SuiteSpec s;
  s.mode = DecompReport::Mode::LowerBound;
  s.trials = 4;
  s.seed = 2;
  EXPECT_EQ(run_decomp_suite(s).passed, 4u);
}

TEST(Weak, OrthogonalPairExample) {
  const auto g = gallery("limitation");
  const auto r = check_weak_decomp(g.T, *g.X, span_e1(3), 0.5);
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_GE(r.value("mid_margin"), 3.078 - 2.581 - 0.03);
}

TEST(Weak, ZeroSIsEquality) {
  const auto r = check_weak_decomp(e3(0, 0, 0), DenseTensor({2, 2, 2}), span_e1(3));
  EXPECT_EQ(r.verdict, Verdict::Pass);
  EXPECT_NEAR(r.value("mid_margin"), 0.0, 1e-8);
  EXPECT_NEAR(r.value("alpha"), 1.0 / 3.0, 1e-15);
}

TEST(Weak, Preconditions) {
  EXPECT_THROW(check_weak_decomp(e3(1, 0, 0), e3(1, 1, 1), span_e1(3)), PreconditionError);
  EXPECT_THROW(check_weak_decomp(e3(0, 0, 0), e3(1, 0, 0), span_e1(3)), PreconditionError);
}

TEST(Weak, SuiteTenTrials) {
  SuiteSpec s;
  s.mode = DecompReport::Mode::Weak;
  s.trials = 10;
  s.seed = 7;
  s.alpha = 0.5;
  const auto out = run_decomp_suite(s);
  EXPECT_EQ(out.passed, 10u);
  for (const auto& tr : out.trials) EXPECT_GE(tr.report.value("mid_margin"), -1e-3);
}

TEST(Weak, OneDisjointModeIsNotEnough) {
  // T = e1 e1, S = eps e1 e2: ||T+S||_* = sqrt(1+eps^2) falls below 1 + eps/2
  for (double eps : {0.1, 0.01}) {
    const DenseTensor t = unit_tensor({2, 2}, {0, 0});
    const DenseTensor s = unit_tensor({2, 2}, {0, 1}, eps);
    const auto a = nuclear_sandwich(t), b = nuclear_sandwich(s), c = nuclear_sandwich(t + s);
    EXPECT_NEAR(c.mid(), std::sqrt(1.0 + eps * eps), 1e-10);
    EXPECT_LT(c.mid(), a.mid() + 0.5 * b.mid());
  }
}

TEST(Weak, SumCanDropBelowTheHighPart) {
  const auto g = gallery("limitation");
  const auto s = nuclear_sandwich(*g.X), ts = nuclear_sandwich(g.T + *g.X);
  EXPECT_LT(ts.upper, s.lower + 0.5 * (s.gap() + ts.gap()));
}

TEST(Suite, TrialsCycleShapesAndAreDeterministic) {
  SuiteSpec s;
  s.shapes = {{2, 2, 2}, {2, 2, 2, 2}};
  s.trials = 4;
  s.seed = 1;
  const auto a = run_decomp_suite(s), b = run_decomp_suite(s);
  EXPECT_EQ(a.trials[1].shape, (Shape{2, 2, 2, 2}));
  EXPECT_EQ(a.trials[2].shape, (Shape{2, 2, 2}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.trials[i].report.discrepancy, b.trials[i].report.discrepancy);
}
