#include <cstdlib>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "derand/constructions.hpp"
#include "derand/error.hpp"
#include "derand/verifier.hpp"
#include "support/oracles.hpp"

namespace derand {
namespace {

using testing::q;

/// Symbol counts of every nonzero codeword, by direct encoding.
std::vector<std::vector<std::size_t>> symbol_counts(const LinearCode& code) {
  std::vector<std::vector<std::size_t>> out;
  const std::uint64_t qq = code.field.order();
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < code.k; ++i) total *= qq;
  for (std::uint64_t x = 1; x < total; ++x) {
    Word u(code.k);
    std::uint64_t y = x;
    for (std::size_t i = 0; i < code.k; ++i, y /= qq) u[i] = static_cast<Symbol>(y % qq);
    std::vector<std::size_t> counts(qq, 0);
    for (Symbol s : code.encode(u)) ++counts[s];
    out.push_back(counts);
  }
  return out;
}

void expect_balanced(const LinearCode& code, const mpq_class& eps) {
  const mpq_class m(static_cast<unsigned long>(code.length()));
  const mpq_class qq(static_cast<unsigned long>(code.field.order()));
  for (const auto& counts : symbol_counts(code)) {
    for (std::size_t xi = 0; xi < counts.size(); ++xi) {
      const mpq_class c(static_cast<unsigned long>(counts[xi]));
      EXPECT_GE(c, (1 - eps) * m / qq) << "symbol " << xi;
      EXPECT_LE(c, (1 + eps) * m / qq) << "symbol " << xi;
    }
  }
}

TEST(BalancedCodeTest, BinarySingleMessage) {
  const auto result = build_balanced_code(2, 1, q(1, 2));
  expect_balanced(result.code, q(1, 2));
  EXPECT_EQ(result.code.length(), result.build.sample.size());
  EXPECT_LE(result.code.length(), result.build.size_bound);
}

TEST(BalancedCodeTest, TernaryDimensionTwo) {
  const auto result = build_balanced_code(3, 2, q(1, 2));
  EXPECT_EQ(symbol_counts(result.code).size(), 8u);
  expect_balanced(result.code, q(1, 2));
  EXPECT_TRUE(check_code_balance(result.code, q(1, 2)).pass);
  // 2 q (q^k - 1) / (q - 1) canonical constraints.
  EXPECT_EQ(result.build.constraint_count, 2u * 3 * 8 / 2);
  EXPECT_EQ(result.code.encode({0, 0}), Word(result.code.length(), 0));
  for (const auto& t : result.build.traces) EXPECT_TRUE(check_trace(t).pass);
}

TEST(BalancedCodeTest, FourElementField) {
  const auto result = build_balanced_code(4, 2, q(1, 2));
  EXPECT_EQ(result.code.field, Field(2, 2));
  expect_balanced(result.code, q(1, 2));
}

TEST(BalancedCodeTest, RejectsBadParameters) {
  EXPECT_THROW(build_balanced_code(6, 2, q(1, 2)), ParameterError);
  EXPECT_THROW(build_balanced_code(2, 0, q(1, 2)), ParameterError);
  EXPECT_THROW(build_balanced_code(2, 2, q(3, 5)), ParameterError);
  EXPECT_THROW(build_balanced_code(2, 2, q(0)), ParameterError);
  BuildOptions tiny;
  tiny.budget = 10;
  EXPECT_THROW(build_balanced_code(3, 3, q(1, 2), tiny), BudgetExceeded);
}

TEST(BalancedCodeTest, ProblemMeansAreConsistent) {
  const auto problem = balanced_code_problem(3, 2, q(1, 2));
  const ProductSpace& space = *problem.space;
  ASSERT_EQ(space.constraint_count(), problem.constraints.size());
  const ProductEnumeration all(space);
  for (std::size_t c = 0; c < problem.constraints.size(); ++c) {
    EXPECT_EQ(space.conditional_mean(c, {}).to_rational(), problem.constraints[c].p);
    std::size_t hits = 0;
    for (std::size_t e = 0; e < all.size(); ++e) hits += all.evaluate(e, c);
    EXPECT_EQ(q(static_cast<long>(hits), static_cast<long>(all.size())), problem.constraints[c].p);
  }
}

TEST(BiasSetTest, SingleCoordinate) {
  const auto result = build_bias_set(1, q(1, 2));
  std::size_t ones = 0;
  for (const auto& w : result.sample.words) ones += w[0];
  const mpq_class frac = q(static_cast<long>(ones), static_cast<long>(result.sample.size()));
  EXPECT_GE(frac, q(1, 4));
  EXPECT_LE(frac, q(3, 4));
}

TEST(BiasSetTest, FourCoordinates) {
  const auto result = build_bias_set(4, q(2, 5));
  EXPECT_EQ(result.sample.word_length, 4u);
  EXPECT_LE(testing::brute_bias(result.sample), q(2, 5));
  EXPECT_EQ(check_bias(result.sample, q(2, 5)).max_deviation, testing::brute_bias(result.sample));
  EXPECT_EQ(result.sample.provenance.construction, "bias");
  EXPECT_FALSE(result.sample.provenance.trace_digest.empty());
}

TEST(BiasSetTest, EnumeratedModeAlsoSatisfiesBound) {
  BuildOptions options;
  options.enumerate = true;
  const auto result = build_bias_set(3, q(1, 2), options);
  EXPECT_LE(testing::brute_bias(result.sample), q(1, 2));
  EXPECT_EQ(result.traces.front().method, "enumerated");
}

TEST(NnReduceTest, FullCubeGivesExactIndependence) {
  const auto reduced = nn_reduce(testing::full_cube(4), 7, 3);
  EXPECT_EQ(reduced.size(), 16u);
  EXPECT_EQ(reduced.word_length, 7u);
  EXPECT_EQ(testing::brute_linf(reduced, 3), 0);
  EXPECT_EQ(testing::brute_linf(reduced, 2), 0);
}

TEST(NnReduceTest, DistanceBoundedByInputBias) {
  const auto bias = build_bias_set(4, q(1, 4));
  const mpq_class input_bias = testing::brute_bias(bias.sample);
  ASSERT_LE(input_bias, q(1, 4));
  const auto reduced = nn_reduce(bias.sample, 7, 3);
  EXPECT_EQ(reduced.size(), bias.sample.size());
  EXPECT_LE(testing::brute_linf(reduced, 3), input_bias);
  // L1 <= 2^{k/2} bias, compared squared to stay rational.
  const mpq_class l1 = testing::brute_l1(reduced, 3);
  EXPECT_LE(l1 * l1, 8 * input_bias * input_bias);
}

TEST(NnReduceTest, SingleWordMapsToSingleWord) {
  SampleMultiset one;
  one.word_length = 4;
  one.words = {{1, 0, 1, 1}};
  const auto reduced = nn_reduce(one, 7, 3);
  ASSERT_EQ(reduced.size(), 1u);
  const auto columns = bch_columns(3, 3);
  for (std::size_t j = 0; j < 7; ++j) {
    unsigned bit = 0;
    for (std::size_t i = 0; i < 4; ++i) bit ^= one.words[0][i] & columns.columns[j][i];
    EXPECT_EQ(reduced.words[0][j], bit) << j;
  }
}

TEST(NnReduceTest, RejectsBadParameters) {
  EXPECT_THROW(nn_reduce(testing::full_cube(4), 8, 3), ParameterError);
  EXPECT_THROW(nn_reduce(testing::full_cube(4), 7, 2), ParameterError);
  SampleMultiset ternary;
  ternary.alphabet = 3;
  ternary.word_length = 4;
  ternary.words = {{0, 1, 2, 0}};
  EXPECT_THROW(nn_reduce(ternary, 3, 3), ParameterError);
}

TEST(PhfTest, KOneIsTrivial) {
  const auto result = build_phf({10, 9, 1, q(1, 2)});
  EXPECT_EQ(check_phf_density(result.sample, 1, q(1, 2)).max_deviation, 0);
}

TEST(PhfTest, DeskInstance) {
  const PhfParams params{10, 37, 2, q(1, 2)};
  EXPECT_EQ(params.h(), 8u);
  const auto result = build_phf(params);
  EXPECT_EQ(result.sample.alphabet, 37u);
  for (const auto& pair : testing::subsets(10, 2)) {
    std::size_t collisions = 0;
    for (const auto& w : result.sample.words) collisions += w[pair[0]] == w[pair[1]];
    EXPECT_LE(8 * collisions, result.sample.size());
    EXPECT_GE(2 * (result.sample.size() - collisions), result.sample.size());
  }
  EXPECT_TRUE(check_phf_density(result.sample, 2, q(1, 2)).pass);
  EXPECT_TRUE(check_pair_collisions(result.sample, q(1, 8)).pass);
}

TEST(PhfTest, CollisionBoundImpliesTripleDensity) {
  const PhfParams params{8, 80, 3, q(9, 10)};
  const auto result = build_phf(params);
  const mpq_class h(static_cast<unsigned long>(params.h()));
  const auto density = check_phf_density(result.sample, 3, q(9, 10));
  EXPECT_LE(density.max_deviation, 3 / h);
  EXPECT_TRUE(density.pass);
}

TEST(PhfTest, RejectsSmallAlphabet) {
  EXPECT_THROW(build_phf({10, 32, 2, q(1, 2)}), ParameterError);
  EXPECT_THROW(build_phf({10, 37, 2, q(1)}), ParameterError);
}

TEST(ComposeTest, IdentityHashReproducesInner) {
  SampleMultiset hash;
  hash.alphabet = 4;
  hash.word_length = 4;
  hash.words = {{0, 1, 2, 3}};
  const auto inner = testing::full_cube(4);
  EXPECT_EQ(compose(hash, inner).words, inner.words);
}

TEST(ComposeTest, TwoCoordinateExample) {
  SampleMultiset hash;
  hash.alphabet = 2;
  hash.word_length = 2;
  hash.words = {{0, 1}};
  SampleMultiset inner;
  inner.word_length = 2;
  inner.words = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  EXPECT_EQ(compose(hash, inner).words, inner.words);
}

TEST(ComposeTest, CountsArePreserved) {
  SampleMultiset hash;
  hash.alphabet = 5;
  hash.word_length = 7;
  hash.words = {{0, 1, 2, 3, 4, 0, 1}, {4, 3, 2, 1, 0, 2, 3}, {1, 2, 3, 4, 0, 4, 0}};
  const auto inner = testing::full_cube(5);
  const auto out = compose(hash, inner);
  ASSERT_EQ(out.size(), hash.size() * inner.size());
  std::map<Word, std::size_t> expected, actual;
  for (const auto& u : hash.words) {
    for (const auto& v : inner.words) {
      Word w;
      for (Symbol s : u) w.push_back(v[s]);
      ++expected[w];
    }
  }
  for (const auto& w : out.words) ++actual[w];
  EXPECT_EQ(actual, expected);
  // Deviation is at most the failure fraction plus the inner distance.
  const auto density = check_phf_density(hash, 2, q(1));
  EXPECT_LE(testing::brute_linf(out, 2), density.max_deviation + testing::brute_linf(inner, 2));
}

TEST(ComposeTest, RejectsDimensionMismatch) {
  SampleMultiset hash;
  hash.alphabet = 5;
  hash.word_length = 2;
  hash.words = {{0, 4}};
  EXPECT_THROW(compose(hash, testing::full_cube(4)), DimensionMismatch);
}

TEST(PolytimeTest, SmallNUsesDirectBuilder) {
  KwiseParams params;
  params.n = 6;
  params.k = 2;
  params.epsilon = q(1, 5);
  ASSERT_GE(polytime_alphabet(params), 6u);
  const auto poly = build_kwise_polytime(params);
  const auto direct = build_kwise_direct(params);
  EXPECT_EQ(poly.sample.words, direct.sample.words);
}

TEST(PolytimeTest, ForcedCompositionIsCloseInL1) {
  KwiseParams params;
  params.n = 20;
  params.k = 2;
  params.epsilon = q(9, 10);
  params.norm = Norm::L1;
  PolytimeOptions options;
  options.force_composition = true;
  const auto result = build_kwise_polytime(params, options);
  ASSERT_EQ(result.traces.size(), 2u);
  EXPECT_LE(result.sample.size(), result.size_bound);
  EXPECT_EQ(result.sample.provenance.params.at("branch"), "composed");
  EXPECT_LE(testing::brute_l1(result.sample, 2), q(9, 10));
  for (const auto& t : result.traces) EXPECT_TRUE(check_trace(t).pass);
}

TEST(PolytimeTest, AlphabetCoversHashHypothesis) {
  KwiseParams params;
  params.n = 100;
  params.k = 2;
  params.epsilon = q(1, 5);
  const std::uint64_t qq = polytime_alphabet(params);
  EXPECT_GE(qq, 1000u);  // (k / eps)^3
  EXPECT_GT(mpq_class(static_cast<unsigned long>(qq)), 16 * 4 / params.epsilon);
}

TEST(BudgetTest, EnvironmentOverride) {
  ::unsetenv("DERAND_BUDGET");
  EXPECT_EQ(budget_from_environment(17), 17u);
  ::setenv("DERAND_BUDGET", "4096", 1);
  EXPECT_EQ(budget_from_environment(17), 4096u);
  ::setenv("DERAND_BUDGET", "lots", 1);
  EXPECT_THROW(budget_from_environment(), ParameterError);
  ::setenv("DERAND_BUDGET", "0", 1);
  EXPECT_THROW(budget_from_environment(), ParameterError);
  ::unsetenv("DERAND_BUDGET");
}

}  // namespace
}  // namespace derand
