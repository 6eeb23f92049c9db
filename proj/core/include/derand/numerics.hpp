#pragma once

// Exact and interval arithmetic plus the information-theoretic formulas that
// size every construction.
//
// Rationals are GMP rationals. Real quantities (logs, exponentials) are closed
// intervals with MPFR endpoints rounded outward, so every comparison made on
// them is either certified or reported as undecided.

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <gmpxx.h>
#include <mpfr.h>

namespace derand {

using Rational = mpq_class;

/// Parses "3/10", "0.3", "-2", "1e-3" into an exact rational.
Rational parse_rational(std::string_view text);

/// Always "num/den", even for integers ("3/1").
std::string to_string(const Rational& value);

inline Rational rational_of(std::uint64_t value) {
  static_assert(sizeof(unsigned long) == sizeof(std::uint64_t), "LP64 data model expected");
  return Rational(mpz_class(static_cast<unsigned long>(value)));
}

/// Small exact rational on machine integers, used where conditional means are
/// produced in hot loops. Always stored reduced with den > 0.
struct Fraction {
  std::int64_t num = 0;
  std::uint64_t den = 1;

  static Fraction of(std::int64_t num, std::uint64_t den);
  static constexpr Fraction zero() { return {0, 1}; }
  static constexpr Fraction one() { return {1, 1}; }

  Rational to_rational() const;
  bool is_zero() const { return num == 0; }
  bool is_one() const { return num >= 0 && static_cast<std::uint64_t>(num) == den; }

  friend bool operator==(const Fraction& a, const Fraction& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend std::strong_ordering operator<=>(const Fraction& a, const Fraction& b);
  friend Fraction operator-(const Fraction& a, const Fraction& b);
  friend Fraction operator+(const Fraction& a, const Fraction& b);
};

namespace numerics {

inline constexpr unsigned kDefaultBits = 128;
inline constexpr std::uint64_t kDefaultSampleCap = std::uint64_t{1} << 40;

enum class Round { Down, Up, Nearest };

/// RAII owner of one MPFR number.
class BigFloat {
 public:
  explicit BigFloat(unsigned bits = kDefaultBits);
  BigFloat(const BigFloat& other);
  BigFloat(BigFloat&& other) noexcept;
  BigFloat& operator=(const BigFloat& other);
  BigFloat& operator=(BigFloat&& other) noexcept;
  ~BigFloat();

  static BigFloat from_double(double value, unsigned bits = kDefaultBits);
  static BigFloat from_rational(const Rational& value, Round round, unsigned bits = kDefaultBits);

  unsigned precision() const;
  double to_double(Round round) const;
  /// The exact binary value as a rational.
  Rational to_rational() const;
  /// Decimal rendering with `digits` significant digits, rounded in `round` direction.
  std::string to_string(int digits, Round round = Round::Nearest) const;
  bool is_zero() const;
  bool is_finite() const;

  mpfr_ptr get() { return value_; }
  mpfr_srcptr get() const { return value_; }

  friend std::partial_ordering operator<=>(const BigFloat& a, const BigFloat& b);
  friend bool operator==(const BigFloat& a, const BigFloat& b);
  friend std::partial_ordering operator<=>(const BigFloat& a, double b);
  friend bool operator==(const BigFloat& a, double b);

 private:
  mpfr_t value_;
  bool live_ = false;
};

BigFloat add(const BigFloat& a, const BigFloat& b, Round round);
BigFloat add(const BigFloat& a, double b, Round round);
BigFloat sub(const BigFloat& a, const BigFloat& b, Round round);
BigFloat mul(const BigFloat& a, const BigFloat& b, Round round);
BigFloat div(const BigFloat& a, const BigFloat& b, Round round);
BigFloat div(const BigFloat& a, std::uint64_t b, Round round);
BigFloat mul(const BigFloat& a, std::uint64_t b, Round round);
const BigFloat& min(const BigFloat& a, const BigFloat& b);
const BigFloat& max(const BigFloat& a, const BigFloat& b);

/// Closed real interval [lo, hi] with outward-rounded MPFR endpoints.
///
/// An exact value is an interval of width zero. Every operation returns an
/// interval that contains the exact result of applying the operation to any
/// points of the operand intervals, so error bounds compose automatically.
class Scalar {
 public:
  explicit Scalar(unsigned bits = kDefaultBits);

  static Scalar exact(const Rational& value, unsigned bits = kDefaultBits);
  static Scalar exact(std::int64_t value, unsigned bits = kDefaultBits);
  static Scalar from_double(double value, unsigned bits = kDefaultBits);
  static Scalar from_bounds(BigFloat lo, BigFloat hi);
  static Scalar from_bounds(double lo, double hi, unsigned bits = kDefaultBits);

  const BigFloat& lo() const { return lo_; }
  const BigFloat& hi() const { return hi_; }
  unsigned precision() const { return lo_.precision(); }

  double lower() const { return lo_.to_double(Round::Down); }
  double upper() const { return hi_.to_double(Round::Up); }
  double midpoint() const;
  /// Upper bound on hi - lo; zero iff exact.
  double error_bound() const;
  bool is_exact() const { return lo_ == hi_; }
  bool contains(const Rational& value) const;

  /// Decides `value <= threshold` allowing slack `margin`: true means
  /// value <= threshold + margin is certified, false means value > threshold
  /// is certified, nullopt means undecided. Decidable whenever error_bound() < margin.
  std::optional<bool> le_within(const Rational& threshold, double margin) const;
  bool certainly_le(const Rational& threshold) const;
  bool certainly_lt(const Rational& threshold) const;
  bool certainly_ge(const Rational& threshold) const;
  bool certainly_gt(const Rational& threshold) const;

  /// Midpoint with `digits` significant digits.
  std::string to_string(int digits = 12) const;
  std::string lower_string(int digits) const { return lo_.to_string(digits, Round::Down); }
  std::string upper_string(int digits) const { return hi_.to_string(digits, Round::Up); }

  Scalar operator-() const;
  friend Scalar operator+(const Scalar& a, const Scalar& b);
  friend Scalar operator-(const Scalar& a, const Scalar& b);
  friend Scalar operator*(const Scalar& a, const Scalar& b);
  friend Scalar operator/(const Scalar& a, const Scalar& b);

 private:
  Scalar(BigFloat lo, BigFloat hi);

  BigFloat lo_;
  BigFloat hi_;
};

Scalar exp(const Scalar& x);
/// Natural log; throws DomainError unless the interval is strictly positive.
Scalar log(const Scalar& x);
Scalar pow(const Scalar& base, std::uint64_t exponent);
Scalar hull(const Scalar& a, const Scalar& b);

struct DivergenceParams {
  Rational lambda;
  Rational p;

  /// Throws DomainError unless 0 < lambda < 1 and 0 < p < 1.
  void validate() const;
};

/// Bernoulli Kullback-Leibler divergence D(lambda || p).
Scalar kl_divergence(const DivergenceParams& params, unsigned bits = kDefaultBits);

/// q-ary entropy H_q(p) = p log_q((q-1)/p) + (1-p) log_q(1/(1-p)).
Scalar q_ary_entropy(const Rational& p, const Rational& q, unsigned bits = kDefaultBits);

/// A divergence shared by `count` constraints.
struct DivergenceClass {
  DivergenceParams params;
  std::uint64_t count = 1;
};

/// Certifies sum_i count_i * exp(-D_i * m) <= 1. Undecidable ties count as false.
bool sample_size_feasible(std::span<const DivergenceClass> classes, std::uint64_t m);

/// Least m >= 1 with sum_i exp(-D_i m) <= 1, found by binary search on the
/// certified inequality. Throws OverflowError if m would exceed `cap`.
std::uint64_t required_sample_size(std::span<const DivergenceClass> classes,
                                   std::uint64_t cap = kDefaultSampleCap);
std::uint64_t required_sample_size(std::span<const DivergenceParams> constraints,
                                   std::uint64_t cap = kDefaultSampleCap);

/// The closed-form sufficient size ceil(max_i ln N / D_i).
std::uint64_t max_divergence_sample_bound(std::span<const DivergenceClass> classes);

/// ceil(3 ln N / min_i p_i eps_i^2), the relative-error sufficient size.
std::uint64_t relative_error_sample_bound(std::uint64_t constraint_count,
                                          const Rational& min_p_eps_squared);

struct PrecisionBudget {
  std::uint64_t error_bits = 0;  // B: potential error below 2^-B
  std::uint64_t mantissa_bits = 0;  // B + 1 + ceil(log2(tau + 1))
};

/// Bits needed so the accumulated potential error stays below mu/(4m)
/// (mu/(4mn) when fixing n coordinates one at a time).
PrecisionBudget precision_budget(std::uint64_t m, std::uint64_t constraint_count, double tau,
                                 double mu, std::uint64_t coordinate_count = 1);

}  // namespace numerics
}  // namespace derand
