#include <gtest/gtest.h>

#include <cmath>

#include "tnn/decomp.hpp"
#include "tnn/subspace.hpp"

using namespace tnn;

namespace {

DenseTensor e3(std::size_t i, std::size_t j, std::size_t k, Shape s = {2, 2, 2}) { return unit_tensor(s, {i, j, k}); }

ModeFamily span_e1(std::size_t d, std::size_t n = 2) {
  ModeFamily f;
  for (std::size_t k = 0; k < d; ++k) f.modes.push_back(ModeSubspace::from_orthonormal(basis_vector(n, 0)));
  return f;
}

// Kronecker product of the per-mode matrices, matching row-major offsets
Matrix kron_all(const std::vector<Matrix>& ms) {
  Matrix out = Matrix::Ones(1, 1);
  for (const auto& m : ms) {
    Matrix next(out.rows() * m.rows(), out.cols() * m.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j) next.block(i * m.rows(), j * m.cols(), m.rows(), m.cols()) = out(i, j) * m;
    out = next;
  }
  return out;
}

std::vector<SubspaceSelector> all_selectors(std::size_t d) {
  std::vector<SubspaceSelector> out;
  for (std::uint32_t b = 0; b < (1u << d); ++b) {
    out.push_back(SubspaceSelector::basic(ModeSet{b}));
    out.push_back(SubspaceSelector::upper(ModeSet{b}));
    out.push_back(SubspaceSelector::lower(ModeSet{b}));
  }
  out.push_back(SubspaceSelector::direct_sum(sets_by_size(d, 2, d)));
  out.push_back(SubspaceSelector::direct_sum(sets_by_size(d, 0, 1)));
  return out;
}

}  // namespace

TEST(ModeSubspace, ComplementExamples) {
  const auto v = ModeSubspace::from_orthonormal(basis_vector(2, 0));
  const auto c = v.complement();
  ASSERT_EQ(c.rank(), 1u);
  EXPECT_NEAR(std::abs(c.basis()(1, 0)), 1.0, 1e-15);
  EXPECT_EQ(ModeSubspace::full(3).complement().rank(), 0u);
  EXPECT_EQ(ModeSubspace::zero(3).complement().rank(), 3u);
  const ModeFamily f = random_family({5}, {3}, 4);
  const auto& p = f.modes[0];
  const auto pc = p.complement();
  EXPECT_EQ(pc.rank(), 2u);
  EXPECT_LT((p.projector() + pc.projector() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(ModeSubspace::from_orthonormal(Matrix::Ones(2, 1)), ParameterError);
}

TEST(FamilyFromTensor, Examples) {
  auto f = family_from_tensor(e3(0, 0, 0, {3, 3, 3}));
  for (const auto& m : f.modes) {
    ASSERT_EQ(m.rank(), 1u);
    EXPECT_TRUE(m.contains(basis_vector(3, 0)));
  }
  const DenseTensor t = e3(0, 0, 0, {2, 2, 3}) + e3(1, 1, 1, {2, 2, 3});
  f = family_from_tensor(t);
  EXPECT_EQ(f.ranks(), (std::vector<std::size_t>{2, 2, 2}));
  EXPECT_FALSE(f.modes[2].contains(basis_vector(3, 2)));
  // two atoms with independent factors
  Rng rng = make_stream(9, 0);
  DenseTensor r({3, 4, 3});
  for (int a = 0; a < 2; ++a) r += outer_atom({gaussian_vector(rng, 3), gaussian_vector(rng, 4), gaussian_vector(rng, 3)});
  EXPECT_EQ(family_from_tensor(r).ranks(), (std::vector<std::size_t>{2, 2, 2}));
}

TEST(ModeSet, ParseAndPrint) {
  EXPECT_EQ(parse_mode_set("1,3").bits, 5u);
  EXPECT_EQ(ModeSet::of({1, 3}).to_string(), "1,3");
  EXPECT_EQ(ModeSet::all(3).size(), 3u);
  EXPECT_TRUE(ModeSet::of({2}).subset_of(ModeSet::of({1, 2})));
  EXPECT_THROW(parse_mode_set("0"), ParameterError);
  EXPECT_THROW(parse_mode_set("x"), ParameterError);
  EXPECT_EQ(sets_by_size(4, 2, 4).size(), 11u);
}

TEST(Selector, ParseRoundTrip) {
  for (const auto& s : all_selectors(3)) {
    const auto back = parse_selector(s.to_string());
    EXPECT_EQ(back.to_string(), s.to_string());
  }
  EXPECT_THROW(parse_selector("basic"), ParameterError);
  EXPECT_THROW(parse_selector("nope:1"), ParameterError);
  EXPECT_THROW(parse_selector("sum:1,2"), ParameterError);
  EXPECT_THROW(SubspaceSelector::direct_sum({ModeSet::of({1}), ModeSet::of({1})}), ParameterError);
  EXPECT_THROW(SubspaceSelector::basic(ModeSet::of({4})).validate(3), IndexError);
}

TEST(Project, FixesTensorAndKillsFullComplement) {
  const ModeFamily f0 = random_family({2, 3, 2}, {1, 2, 1}, 3);
  Rng rng = make_stream(3, 3);
  const DenseTensor T = outer_atom({f0.modes[0].basis().col(0), f0.modes[1].basis() * gaussian_vector(rng, 2),
                                    f0.modes[2].basis().col(0)});
  const auto f = family_from_tensor(T);
  EXPECT_LT(norm_inf(project(SubspaceSelector::basic({}), f, T) - T), 1e-14);
  EXPECT_LT(norm_inf(project(SubspaceSelector::basic(ModeSet::all(3)), f, T)), 1e-14);
}

TEST(Project, BasicComponentsSumToTensor) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Shape shape{2, 3, 2};
    const auto f = random_family(shape, {1, 2, 1}, s);
    const auto t = gaussian_tensor(shape, s, 1);
    DenseTensor sum(shape);
    for (std::uint32_t b = 0; b < 8; ++b) sum += project(SubspaceSelector::basic(ModeSet{b}), f, t);
    EXPECT_LT(norm_inf(sum - t), 1e-12);
  }
}

TEST(Project, UpperAndLowerAreSumsOfBasics) {
  const Shape shape{2, 3, 2, 2};
  const auto f = random_family(shape, {1, 1, 2, 1}, 6);
  const auto t = gaussian_tensor(shape, 6, 1);
  for (std::uint32_t i = 0; i < 16; ++i) {
    const ModeSet I{i};
    DenseTensor up(shape), lo(shape);
    for (std::uint32_t j = 0; j < 16; ++j) {
      const ModeSet J{j};
      const auto p = project(SubspaceSelector::basic(J), f, t);
      if (I.subset_of(J)) up += p;
      if ((I.bits & J.bits) == 0) lo += p;
    }
    EXPECT_LT(norm_inf(project(SubspaceSelector::upper(I), f, t) - up), 1e-12);
    EXPECT_LT(norm_inf(project(SubspaceSelector::lower(I), f, t) - lo), 1e-12);
  }
}

TEST(Project, SelfAdjointIdempotentAndContained) {
  for (std::uint64_t s = 0; s < 8; ++s) {
    const Shape shape{2, 3, 2};
    const auto f = random_family(shape, {s % 3 == 0 ? 0u : 1u, 2, 1}, 20 + s);
    const auto a = gaussian_tensor(shape, s, 1), b = gaussian_tensor(shape, s, 2);
    const auto pt = project(SubspaceSelector::basic({}), f, a);
    for (const auto& sel : all_selectors(3)) {
      const auto pa = project(sel, f, a);
      EXPECT_NEAR(inner(pa, b), inner(a, project(sel, f, b)), 1e-10) << sel.to_string();
      EXPECT_LT(norm_inf(project(sel, f, pa) - pa), 1e-12) << sel.to_string();
      if (sel.kind == SubspaceSelector::Kind::LowerU) EXPECT_LT(norm_inf(project(sel, f, pt) - pt), 1e-12);
    }
  }
}

TEST(Project, MembershipMeansModeSpansInside) {
  const Shape shape{3, 3, 2};
  const auto f = random_family(shape, {2, 1, 1}, 30);
  Rng rng = make_stream(30, 1);
  DenseTensor inside(shape);
  for (int a = 0; a < 2; ++a)
    inside += outer_atom({f.modes[0].basis() * gaussian_vector(rng, 2), f.modes[1].basis().col(0), f.modes[2].basis().col(0)});
  const auto outside = gaussian_tensor(shape, 30, 2);
  for (const auto& t : {inside, outside}) {
    const bool in_T = norm2(project(SubspaceSelector::basic({}), f, t) - t) <= 1e-10 * norm2(t);
    const auto spans = family_from_tensor(t);
    bool spans_inside = true;
    for (std::size_t k = 0; k < 3; ++k)
      for (Eigen::Index c = 0; c < spans.modes[k].basis().cols(); ++c)
        spans_inside = spans_inside && f.modes[k].contains(spans.modes[k].basis().col(c));
    EXPECT_EQ(in_T, spans_inside);
  }
  EXPECT_THROW(project(SubspaceSelector::basic({}), f, gaussian_tensor({2, 2, 2}, 0, 0)), DimensionError);
}

TEST(BasicSplit, InsideHasOnlyEmptyComponent) {
  const auto f = span_e1(3);
  const auto parts = basic_split(f, 2.0 * e3(0, 0, 0));
  EXPECT_EQ(parts.size(), 8u);
  EXPECT_EQ(norm_inf(parts[0] - 2.0 * e3(0, 0, 0)), 0.0);
  for (std::size_t b = 1; b < 8; ++b) EXPECT_EQ(norm_inf(parts[b]), 0.0);
}

TEST(BasicSplit, OrthogonalPairExample) {
  const DenseTensor T = e3(0, 0, 0);
  const DenseTensor S = e3(0, 1, 1) + e3(1, 0, 1) + e3(1, 1, 0) + e3(1, 1, 1);
  const auto parts = basic_split(span_e1(3), T + S);
  EXPECT_EQ(parts[0], T);
  DenseTensor high({2, 2, 2});
  for (std::uint32_t b = 0; b < 8; ++b) {
    if (ModeSet{b}.size() >= 2)
      high += parts[b];
    else if (b != 0)
      EXPECT_EQ(norm_inf(parts[b]), 0.0);
  }
  EXPECT_EQ(high, S);
}

TEST(BasicSplit, Pythagoras) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Shape shape{3, 2, 2, 2};
    const auto f = random_family(shape, {2, 1, 1, 0}, s);
    const auto t = gaussian_tensor(shape, s, 1);
    double sq = 0.0;
    for (const auto& p : basic_split(f, t)) sq += inner(p, p);
    EXPECT_NEAR(sq, inner(t, t), 1e-10);
  }
}

TEST(Support, ProjectExamples) {
  const Shape s{2, 2, 2};
  const auto t = e3(0, 0, 0) + e3(1, 1, 1);
  EXPECT_EQ(norm_inf(support_project(EntrySupport(s), t)), 0.0);
  EXPECT_EQ(support_project(EntrySupport::full(s), t), t);
  EXPECT_EQ(support_project(EntrySupport::from_indices(s, {{0, 0, 0}}), t), e3(0, 0, 0));
  EXPECT_EQ(support_project(EntrySupport::from_indices(s, {{0, 0, 0}}), t, true), e3(1, 1, 1));
}

TEST(Support, SetOperations) {
  const Shape s{2, 3};
  const auto a = EntrySupport::from_offsets(s, {0, 2, 4});
  const auto b = EntrySupport::from_offsets(s, {2, 3});
  EXPECT_EQ(a.intersect(b).offsets(), (std::vector<std::size_t>{2}));
  EXPECT_EQ(a.complement().offsets(), (std::vector<std::size_t>{1, 3, 5}));
  EXPECT_EQ(a.complement().complement(), a);
  EXPECT_EQ(EntrySupport::nonzeros(DenseTensor(s, {1, 0, -2, 0, 3, 0})), a);
  EXPECT_THROW(EntrySupport::from_offsets(s, {6}), IndexError);
  EXPECT_THROW(EntrySupport::from_indices(s, {{2, 0}}), IndexError);
  EXPECT_THROW(a.intersect(EntrySupport({3, 2})), DimensionError);
}

TEST(OperatorNorm, SingleProjectorIsZeroOrOne) {
  const Shape shape{2, 3, 2};
  const auto f = random_family(shape, {1, 2, 1}, 2);
  for (const auto& sel : all_selectors(3)) {
    const double v = operator_norm_chain({projector_step(sel, f)}, shape);
    EXPECT_TRUE(std::abs(v) < 1e-10 || std::abs(v - 1.0) < 1e-10) << sel.to_string() << " " << v;
  }
  const auto zero = ModeFamily{{ModeSubspace::zero(2), ModeSubspace::zero(3), ModeSubspace::zero(2)}};
  EXPECT_NEAR(operator_norm_chain({projector_step(SubspaceSelector::basic({}), zero)}, shape), 0.0, 1e-14);
  EXPECT_NEAR(operator_norm_chain({support_step(EntrySupport::from_offsets(shape, {3}))}, shape), 1.0, 1e-14);
}

TEST(OperatorNorm, OrthogonalRangesGiveZero) {
  const auto f = family_from_tensor(e3(0, 0, 0));
  const auto pL = projector_step(SubspaceSelector::basic(ModeSet::all(3)), f, true);
  const auto sup = support_step(EntrySupport::from_indices({2, 2, 2}, {{1, 1, 1}}));
  EXPECT_NEAR(operator_norm_chain({pL, sup}, {2, 2, 2}), 0.0, 1e-14);
}

TEST(OperatorNorm, MatchesKroneckerOracle) {
  const Shape shape{2, 2, 2};
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto f = random_family(shape, {1, 1, 1}, 40 + s);
    Rng rng = make_stream(40 + s, 9);
    std::vector<std::size_t> offs;
    for (std::size_t o = 0; o < 8; ++o)
      if (uniform(rng, 0, 1) < 0.4) offs.push_back(o);
    const auto sup = EntrySupport::from_offsets(shape, offs);
    // p_L = I - (I-P1)(x)(I-P2)(x)(I-P3)
    std::vector<Matrix> comps;
    for (const auto& m : f.modes) comps.push_back(m.complement_projector());
    const Matrix PL = Matrix::Identity(8, 8) - kron_all(comps);
    Matrix PI = Matrix::Zero(8, 8);
    for (auto o : offs) PI(o, o) = 1.0;
    const double oracle = Eigen::JacobiSVD<Matrix>(PL * PI).singularValues()[0];
    const std::vector<ChainStep> chain{projector_step(SubspaceSelector::basic(ModeSet::all(3)), f, true), support_step(sup)};
    EXPECT_NEAR(operator_norm_chain(chain, shape), oracle, 1e-8);
    ChainNormOptions power;
    power.dense_cutoff = 0;
    power.tol = 1e-14;
    EXPECT_NEAR(operator_norm_chain(chain, shape, power), oracle, 1e-6);
  }
}

TEST(OperatorNorm, ChainOrderAndErrors) {
  // apply_chain runs right to left
  const Shape s{2};
  const ChainStep twice{[](const DenseTensor& t) { return 2.0 * t; }, "x2"};
  const ChainStep plus{[](const DenseTensor& t) {
                         DenseTensor o = t;
                         o[0] += 1.0;
                         return o;
                       },
                       "+1"};
  const auto r = apply_chain({twice, plus}, DenseTensor(s));
  EXPECT_EQ(r[0], 2.0);
  EXPECT_THROW(operator_norm_chain({}, s), ParameterError);
  const auto sup = EntrySupport::from_offsets({2, 2}, {0});
  EXPECT_NEAR(operator_norm_chain({affine_support_step(sup, 1.0, -2.0)}, {2, 2}), 1.0, 1e-14);
}
