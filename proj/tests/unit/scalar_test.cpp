#include <vector>

#include <gtest/gtest.h>

#include "derand/error.hpp"
#include "derand/numerics.hpp"
#include "support/oracles.hpp"

namespace derand::numerics {
namespace {

using testing::Dec50;
using testing::q;

TEST(BigFloatTest, RoundTripsDyadicRationals) {
  EXPECT_EQ(BigFloat::from_double(0.375).to_rational(), q(3, 8));
  EXPECT_EQ(BigFloat::from_double(-5.0).to_rational(), q(-5));
  EXPECT_EQ(BigFloat::from_rational(q(7, 16), Round::Nearest).to_rational(), q(7, 16));
}

TEST(BigFloatTest, DirectedRoundingBracketsThirds) {
  const BigFloat lo = BigFloat::from_rational(q(1, 3), Round::Down);
  const BigFloat hi = BigFloat::from_rational(q(1, 3), Round::Up);
  EXPECT_LT(lo.to_rational(), q(1, 3));
  EXPECT_GT(hi.to_rational(), q(1, 3));
  EXPECT_EQ(lo.precision(), kDefaultBits);
}

TEST(BigFloatTest, ArithmeticRoundsInRequestedDirection) {
  const BigFloat third_lo = div(BigFloat::from_double(1.0), 3, Round::Down);
  const BigFloat third_hi = div(BigFloat::from_double(1.0), 3, Round::Up);
  EXPECT_LT(third_lo, third_hi);
  EXPECT_LE(mul(third_lo, 3, Round::Down), 1.0);
  EXPECT_GE(mul(third_hi, 3, Round::Up), 1.0);
  EXPECT_EQ(add(BigFloat::from_double(0.5), 0.25, Round::Up), 0.75);
}

TEST(ScalarTest, ExactValuesHaveZeroWidth) {
  const Scalar half = Scalar::exact(q(1, 2));
  EXPECT_TRUE(half.is_exact());
  EXPECT_EQ(half.error_bound(), 0.0);
  EXPECT_TRUE(half.contains(q(1, 2)));
  EXPECT_FALSE(half.contains(q(1, 3)));
}

TEST(ScalarTest, ArithmeticEnclosesExactResult) {
  const std::vector<mpq_class> values = {q(1, 3), q(-2, 7), q(5, 11), q(9, 2), q(1, 1000)};
  for (const auto& a : values) {
    for (const auto& b : values) {
      const Scalar x = Scalar::exact(a), y = Scalar::exact(b);
      EXPECT_TRUE((x + y).contains(a + b));
      EXPECT_TRUE((x - y).contains(a - b));
      EXPECT_TRUE((x * y).contains(a * b));
      EXPECT_TRUE((x / y).contains(a / b));
      EXPECT_TRUE((-x).contains(-a));
    }
  }
}

TEST(ScalarTest, TranscendentalsMatchFiftyDigitOracle) {
  for (int i = 1; i <= 25; ++i) {
    const mpq_class x = q(i, 7);
    const Dec50 dx = testing::to_dec(x);
    const Scalar e = exp(Scalar::exact(x));
    const Scalar l = log(Scalar::exact(x));
    const Dec50 slack("1e-36");
    EXPECT_LE(Dec50(e.lower_string(40)), exp(dx) * (1 + slack));
    EXPECT_GE(Dec50(e.upper_string(40)), exp(dx) * (1 - slack));
    EXPECT_LE(Dec50(l.lower_string(40)), log(dx) + slack);
    EXPECT_GE(Dec50(l.upper_string(40)), log(dx) - slack);
  }
}

TEST(ScalarTest, ExpOfLogContainsArgument) {
  for (int i = 1; i <= 10; ++i) {
    const mpq_class x = q(3 * i, 17);
    EXPECT_TRUE(exp(log(Scalar::exact(x))).contains(x));
  }
}

TEST(ScalarTest, PowMatchesRepeatedProduct) {
  EXPECT_TRUE(pow(Scalar::exact(q(1, 2)), 10).contains(q(1, 1024)));
  EXPECT_TRUE(pow(Scalar::exact(q(3, 2)), 0).contains(1));
  const Scalar third = Scalar::exact(q(1, 3));
  mpq_class expected = 1;
  for (int i = 0; i < 7; ++i) expected *= q(1, 3);
  EXPECT_TRUE(pow(third, 7).contains(expected));
}

TEST(ScalarTest, LogRejectsNonPositive) {
  EXPECT_THROW(log(Scalar::exact(0)), DomainError);
  EXPECT_THROW(log(Scalar::exact(q(-1, 2))), DomainError);
  EXPECT_THROW(log(Scalar::from_bounds(-1.0, 1.0)), DomainError);
}

TEST(ScalarTest, HullContainsBothOperands) {
  const Scalar h = hull(Scalar::exact(q(1, 5)), Scalar::exact(q(4, 5)));
  EXPECT_TRUE(h.contains(q(1, 5)));
  EXPECT_TRUE(h.contains(q(1, 2)));
  EXPECT_TRUE(h.contains(q(4, 5)));
  EXPECT_FALSE(h.contains(q(9, 10)));
}

TEST(ScalarTest, CertifiedComparisons) {
  const Scalar x = Scalar::from_bounds(0.25, 0.5);
  EXPECT_TRUE(x.certainly_le(q(1, 2)));
  EXPECT_FALSE(x.certainly_lt(q(1, 2)));
  EXPECT_TRUE(x.certainly_lt(q(3, 4)));
  EXPECT_TRUE(x.certainly_ge(q(1, 4)));
  EXPECT_FALSE(x.certainly_gt(q(1, 4)));
  EXPECT_FALSE(x.certainly_le(q(1, 3)));
  EXPECT_FALSE(x.certainly_ge(q(1, 3)));
}

TEST(ScalarTest, LeWithinDecidesWhenWidthBelowMargin) {
  const Scalar tight = log(Scalar::exact(q(3, 2)));
  ASSERT_LT(tight.error_bound(), 1e-20);
  EXPECT_EQ(tight.le_within(q(1, 2), 1e-20), std::optional<bool>(true));
  EXPECT_EQ(tight.le_within(q(2, 5), 1e-20), std::optional<bool>(false));
  const Scalar wide = Scalar::from_bounds(0.0, 1.0);
  EXPECT_EQ(wide.le_within(q(1, 2), 1e-3), std::nullopt);
}

TEST(ScalarTest, DoubledPrecisionNeverReversesDecidedComparison) {
  for (int i = 1; i <= 40; ++i) {
    const mpq_class x = q(i, 13);
    const mpq_class threshold = q(i * i, 97) - 1;
    const Scalar coarse = log(Scalar::exact(x, 64));
    const Scalar fine = log(Scalar::exact(x, 128));
    const mpq_class target = threshold;
    if (coarse.certainly_le(target)) EXPECT_TRUE(fine.certainly_le(target)) << i;
    if (coarse.certainly_gt(target)) EXPECT_TRUE(fine.certainly_gt(target)) << i;
    EXPECT_LE(coarse.lo(), fine.lo());
    EXPECT_GE(coarse.hi(), fine.hi());
  }
}

TEST(ScalarTest, RenderingUsesRequestedDigits) {
  const Scalar third = Scalar::exact(q(1, 3));
  EXPECT_EQ(third.to_string(5), "0.33333");
  EXPECT_EQ(third.upper_string(3), "0.334");
  EXPECT_EQ(third.lower_string(3), "0.333");
}

}  // namespace
}  // namespace derand::numerics
