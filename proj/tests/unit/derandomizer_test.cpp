#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "derand/derandomizer.hpp"
#include "derand/error.hpp"
#include "derand/verifier.hpp"
#include "support/oracles.hpp"
#include "support/spaces.hpp"

namespace derand {
namespace {

using testing::BitSpace;
using testing::PatternProduct;
using testing::PointProduct;
using testing::q;

std::vector<ConstraintSpec> half_window() {
  return {{0, q(1, 2), q(2, 5), Direction::Lower}, {1, q(1, 2), q(3, 5), Direction::Upper}};
}

std::size_t ones(const SampleMultiset& s) {
  std::size_t c = 0;
  for (const auto& w : s.words) c += w[0];
  return c;
}

void expect_trace_consistent(const PotentialTrace& t) {
  ASSERT_EQ(t.steps.size(), t.output_size);
  EXPECT_EQ(t.output_size, t.sizing_m + 1);
  EXPECT_TRUE(t.steps.back().potential.certainly_lt(1));
  for (std::size_t j = 0; j < t.steps.size(); ++j) EXPECT_EQ(t.steps[j].index, j + 1);
  if (!t.counters.empty()) {
    ASSERT_EQ(t.counters.size(), t.output_size);
    for (std::size_t j = 0; j < t.counters.size(); ++j) {
      for (std::size_t i = 0; i < t.counters[j].size(); ++i) {
        const std::uint32_t prev = j == 0 ? 0 : t.counters[j - 1][i];
        EXPECT_LE(t.counters[j][i], j + 1);
        EXPECT_TRUE(t.counters[j][i] == prev || t.counters[j][i] == prev + 1);
      }
    }
    EXPECT_EQ(t.counters.back(), t.final_counters);
  }
  EXPECT_TRUE(check_trace(t).pass) << check_trace(t).witness;
}

TEST(ConstraintSpecTest, MultipliersSitOnTheRightSideOfOne) {
  for (int p = 1; p < 10; ++p) {
    for (int l = 1; l < 10; ++l) {
      if (l == p) continue;
      const ConstraintSpec spec{0, q(p, 10), q(l, 10), l < p ? Direction::Lower : Direction::Upper};
      spec.validate();
      if (spec.direction == Direction::Lower) {
        EXPECT_LT(spec.alpha(), 1);
      } else {
        EXPECT_GT(spec.alpha(), 1);
      }
      // E[gamma alpha^X] = 1 for X ~ Bernoulli(p).
      EXPECT_EQ(spec.gamma() * (1 - spec.p + spec.p * spec.alpha()), 1);
    }
  }
}

TEST(ConstraintSpecTest, RejectsDegenerateOrMisdirectedSpecs) {
  EXPECT_THROW((ConstraintSpec{0, q(0), q(1, 2), Direction::Upper}.validate()), DomainError);
  EXPECT_THROW((ConstraintSpec{0, q(1), q(1, 2), Direction::Lower}.validate()), DomainError);
  EXPECT_THROW((ConstraintSpec{0, q(1, 2), q(3, 5), Direction::Lower}.validate()), DomainError);
  EXPECT_THROW((ConstraintSpec{0, q(1, 2), q(2, 5), Direction::Upper}.validate()), DomainError);
  EXPECT_THROW((ConstraintSpec{0, q(1, 2), q(1, 2), Direction::Upper}.validate()), DomainError);
}

TEST(ConstraintSystemTest, GroupsIdenticalSpecs) {
  std::vector<ConstraintSpec> specs = half_window();
  specs.push_back({7, q(1, 2), q(2, 5), Direction::Lower});
  const ConstraintSystem system(specs);
  EXPECT_EQ(system.size(), 3u);
  ASSERT_EQ(system.classes().size(), 2u);
  EXPECT_EQ(system.class_of(0), system.class_of(2));
  EXPECT_EQ(system.classes()[system.class_of(0)].count, 2u);
  EXPECT_EQ(system.id(2), 7u);
  // Lower: alpha 2/3, gamma 6/5. Upper: alpha 3/2, gamma 4/5.
  EXPECT_EQ(system.tau(), q(3, 2));
}

TEST(EnumeratedTest, BitWindowExample) {
  const BitSpace space(2);
  const auto specs = half_window();
  DerandomizerOptions options;
  options.m = 35;
  const auto result = derandomize_enumerated(space, specs, options);
  ASSERT_EQ(result.sample.size(), 36u);
  EXPECT_GE(ones(result.sample), 15u);
  EXPECT_LE(ones(result.sample), 21u);
  expect_trace_consistent(result.trace);
  EXPECT_EQ(result.trace.method, "enumerated");
}

TEST(EnumeratedTest, AutoSizeMatchesRequiredSampleSize) {
  const BitSpace space(2);
  const auto result = derandomize_enumerated(space, half_window());
  EXPECT_EQ(result.trace.sizing_m, 35u);
  EXPECT_EQ(result.sample.size(), 36u);
}

TEST(EnumeratedTest, RejectsInfeasibleSize) {
  const BitSpace space(2);
  DerandomizerOptions options;
  options.m = 10;
  EXPECT_THROW(derandomize_enumerated(space, half_window(), options), InfeasibleError);
  options.m = 0;
  EXPECT_THROW(derandomize_enumerated(space, half_window(), options), ParameterError);
}

TEST(EnumeratedTest, RejectsDegenerateMean) {
  const BitSpace space(1);
  const std::vector<ConstraintSpec> specs = {{0, q(0), q(1, 2), Direction::Upper}};
  EXPECT_THROW(derandomize_enumerated(space, specs), DomainError);
}

TEST(EnumeratedTest, RejectsSpecCountMismatch) {
  const BitSpace space(3);
  EXPECT_THROW(derandomize_enumerated(space, half_window()), DimensionMismatch);
}

TEST(EnumeratedTest, PointIndicatorsOnTwoBits) {
  const PointProduct product(2, 2);
  const ProductEnumeration space(product);
  std::vector<ConstraintSpec> specs;
  for (std::size_t c = 0; c < 4; ++c) specs.push_back({c, q(1, 4), q(1, 2), Direction::Upper});
  const auto result = derandomize_enumerated(space, specs);
  for (std::size_t c = 0; c < 4; ++c) {
    std::size_t hits = 0;
    for (const auto& w : result.sample.words) hits += product.indicator(c, w);
    EXPECT_LE(2 * hits, result.sample.size()) << "point " << c;
  }
  expect_trace_consistent(result.trace);
}

TEST(EnumeratedTest, MinimizeAndBackendsAllSatisfyConstraints) {
  const PatternProduct product(4, 2, 2);
  const ProductEnumeration space(product);
  const auto specs = testing::two_sided(product.block(), q(1, 4), q(1, 2));
  auto indicator = [&](std::size_t c, const Word& w) { return product.indicator(c, w); };
  for (Backend backend : {Backend::Auto, Backend::Fast, Backend::Multiprecision}) {
    for (bool minimize : {false, true}) {
      DerandomizerOptions options;
      options.backend = backend;
      options.minimize = minimize;
      const auto result = derandomize_enumerated(space, specs, options);
      EXPECT_TRUE(testing::satisfies_all(result.sample.words, specs, indicator))
          << to_string(backend) << " minimize=" << minimize;
      expect_trace_consistent(result.trace);
      if (backend == Backend::Multiprecision) EXPECT_EQ(result.trace.backend, "mpfr");
      if (backend == Backend::Fast) EXPECT_EQ(result.trace.backend, "double");
    }
  }
}

TEST(ConditionalTest, PointIndicatorsOnThreeBits) {
  const PointProduct product(3, 2);
  std::vector<ConstraintSpec> specs;
  for (std::size_t c = 0; c < 8; ++c) specs.push_back({c, q(1, 8), q(1, 4), Direction::Upper});
  const auto result = derandomize_conditional(product, specs);
  for (std::size_t c = 0; c < 8; ++c) {
    std::size_t hits = 0;
    for (const auto& w : result.sample.words) hits += product.indicator(c, w);
    EXPECT_LE(4 * hits, result.sample.size()) << "point " << c;
  }
  EXPECT_EQ(result.trace.method, "conditional");
  EXPECT_EQ(result.trace.coordinate_count, 3u);
  expect_trace_consistent(result.trace);
}

TEST(ConditionalTest, SingleCoordinateAgreesWithEnumeration) {
  const PointProduct product(1, 5, 2);
  const auto specs = testing::two_sided(5, q(1, 5), q(1, 2));
  auto indicator = [&](std::size_t c, const Word& w) { return product.indicator(c, w); };
  const auto conditional = derandomize_conditional(product, specs);
  const auto enumerated = derandomize_enumerated(ProductEnumeration(product), specs);
  EXPECT_TRUE(testing::satisfies_all(conditional.sample.words, specs, indicator));
  EXPECT_TRUE(testing::satisfies_all(enumerated.sample.words, specs, indicator));
  EXPECT_EQ(conditional.sample.size(), enumerated.sample.size());
}

TEST(ConditionalTest, PairwiseSixBits) {
  const PatternProduct product(6, 2, 2);
  ASSERT_EQ(product.block(), 60u);
  const auto specs = testing::two_sided(product.block(), q(1, 4), q(1, 2));
  const auto result = derandomize_conditional(product, specs);
  auto indicator = [&](std::size_t c, const Word& w) { return product.indicator(c, w); };
  EXPECT_TRUE(testing::satisfies_all(result.sample.words, specs, indicator));
  EXPECT_LE(testing::brute_linf(result.sample, 2), q(1, 8));
  EXPECT_TRUE(check_kwise(result.sample, 2, KwiseNorm::Linf, q(1, 8)).pass);
  expect_trace_consistent(result.trace);
}

TEST(ConditionalTest, IsDeterministic) {
  const PatternProduct product(5, 2, 2);
  const auto specs = testing::two_sided(product.block(), q(1, 4), q(1, 2));
  const auto a = derandomize_conditional(product, specs);
  const auto b = derandomize_conditional(product, specs);
  EXPECT_EQ(a.sample.words, b.sample.words);
  EXPECT_EQ(a.trace.digest(), b.trace.digest());
  EXPECT_EQ(a.trace.dump(), b.trace.dump());
}

TEST(ConditionalTest, MartingaleCheckCatchesInconsistentMeans) {
  // Claims mean 1/2 before any coordinate is fixed but 0 on every full word.
  class Broken final : public ProductSpace {
   public:
    std::size_t coordinate_count() const override { return 1; }
    std::uint32_t domain_size(std::size_t) const override { return 2; }
    std::size_t constraint_count() const override { return 1; }
    Fraction conditional_mean(std::size_t, std::span<const Symbol> prefix) const override {
      return prefix.empty() ? Fraction::of(1, 2) : Fraction::zero();
    }
  };
  const Broken space;
  const std::vector<ConstraintSpec> specs = {{0, q(1, 2), q(1, 4), Direction::Lower}};
  DerandomizerOptions options;
  options.check_martingale = true;
  EXPECT_THROW(derandomize_conditional(space, specs, options), ContractViolation);
}

TEST(ConditionalTest, RejectsWrongEmptyPrefixMean) {
  const PointProduct product(2, 2);
  std::vector<ConstraintSpec> specs;
  for (std::size_t c = 0; c < 4; ++c) specs.push_back({c, q(1, 3), q(1, 2), Direction::Upper});
  EXPECT_THROW(derandomize_conditional(product, specs), ContractViolation);
}

TEST(StepCandidateTest, HandArithmeticOnOneMonomial) {
  // p = 1/3, lambda = 1/5 gives gamma = 6/5 and alpha = 1/2.
  const std::vector<ConstraintSpec> specs = {{0, q(1, 3), q(1, 5), Direction::Lower}};
  const ConstraintSystem system(specs);
  ASSERT_EQ(specs[0].gamma(), q(6, 5));
  ASSERT_EQ(specs[0].alpha(), q(1, 2));
  PotentialState state;
  state.step = 0;
  state.m_terms = {numerics::Scalar::exact(q(9, 10))};
  state.counters = {2};
  const std::vector<Fraction> zero = {Fraction::zero()};
  const auto p = step_candidate_potential(state, system, zero);
  EXPECT_TRUE(p.contains(q(27, 100)));
  EXPECT_NEAR(p.midpoint(), 0.27, 1e-30);
}

TEST(StepCandidateTest, UnsatisfiedPickMultipliesByGamma) {
  std::vector<ConstraintSpec> specs = half_window();
  const ConstraintSystem system(specs);
  PotentialState state = initial_state(system, 36);
  state.step = 3;
  state.counters = {1, 2};
  const std::vector<Fraction> zero(2, Fraction::zero());
  const auto after = step_candidate_potential(state, system, zero);
  numerics::Scalar expected;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& c = system.constraint_class(i);
    expected = expected + state.m_terms[i] *
                              numerics::pow(numerics::Scalar::exact(c.gamma), state.step + 1) *
                              numerics::pow(numerics::Scalar::exact(c.alpha), state.counters[i]);
  }
  EXPECT_LT(std::abs(after.midpoint() - expected.midpoint()), 1e-30);
}

TEST(StepCandidateTest, AverageOverSpaceDoesNotExceedCurrentPotential) {
  const PatternProduct product(4, 2);
  std::vector<ConstraintSpec> specs;
  for (std::size_t c = 0; c < product.block(); ++c) {
    specs.push_back({c, q(1, 4), c % 2 ? q(3, 8) : q(1, 8),
                     c % 2 ? Direction::Upper : Direction::Lower});
  }
  const ConstraintSystem system(specs);
  PotentialState state = initial_state(system, 200);
  for (std::size_t i = 0; i < state.counters.size(); ++i) state.counters[i] = i % 3;
  state.step = 4;
  const auto current = state_potential(state, system);
  const ProductEnumeration space(product);
  mpq_class sum = 0;
  for (std::size_t e = 0; e < space.size(); ++e) {
    std::vector<Fraction> means;
    for (std::size_t c = 0; c < specs.size(); ++c) {
      means.push_back(space.evaluate(e, c) ? Fraction::one() : Fraction::zero());
    }
    sum += step_candidate_potential(state, system, means).lo().to_rational();
  }
  const mpq_class average = sum / static_cast<unsigned long>(space.size());
  EXPECT_LE(average, current.hi().to_rational());
  // With the product means the conditional form reproduces the current potential.
  std::vector<Fraction> means(specs.size(), Fraction::of(1, 4));
  EXPECT_NEAR(step_candidate_potential(state, system, means).midpoint(), current.midpoint(),
              1e-25 * current.midpoint());
}

TEST(StepCandidateTest, RejectsWrongLengths) {
  const ConstraintSystem system(half_window());
  PotentialState state = initial_state(system, 36);
  const std::vector<Fraction> one(1, Fraction::zero());
  EXPECT_THROW(step_candidate_potential(state, system, one), DimensionMismatch);
  EXPECT_THROW(initial_state(system, 0), ParameterError);
}

TEST(ProductEnumerationTest, LastCoordinateFastest) {
  const PointProduct product(2, 3);
  const ProductEnumeration space(product);
  ASSERT_EQ(space.size(), 9u);
  EXPECT_EQ(space.word(0), (Word{0, 0}));
  EXPECT_EQ(space.word(1), (Word{0, 1}));
  EXPECT_EQ(space.word(3), (Word{1, 0}));
  for (std::size_t e = 0; e < 9; ++e) {
    for (std::size_t c = 0; c < 9; ++c) {
      EXPECT_EQ(space.evaluate(e, c), product.indicator(c, space.word(e)));
    }
  }
  EXPECT_THROW(ProductEnumeration(product, 8), BudgetExceeded);
}

}  // namespace
}  // namespace derand
