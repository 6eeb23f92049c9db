#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "derand/error.hpp"
#include "derand/numerics.hpp"

namespace derand {

namespace {

__extension__ typedef unsigned __int128 u128;
__extension__ typedef __int128 i128;

int ctz128(u128 x) {
  const auto low = static_cast<std::uint64_t>(x);
  return low != 0 ? std::countr_zero(low) : 64 + std::countr_zero(static_cast<std::uint64_t>(x >> 64));
}

// Binary gcd; both arguments nonzero.
u128 gcd128(u128 a, u128 b) {
  const int shift = std::min(ctz128(a), ctz128(b));
  a >>= ctz128(a);
  while (b != 0) {
    b >>= ctz128(b);
    if (a > b) std::swap(a, b);
    b -= a;
  }
  return a << shift;
}

Fraction reduce128(i128 num, u128 den) {
  if (den == 0) throw DomainError("fraction with zero denominator");
  if (num == 0) return Fraction::zero();
  const bool negative = num < 0;
  u128 mag = negative ? static_cast<u128>(-num) : static_cast<u128>(num);
  constexpr u128 kMax64 = std::numeric_limits<std::uint64_t>::max();
  if ((den & (den - 1)) == 0) {
    const int shift = std::min(ctz128(mag), ctz128(den));
    mag >>= shift;
    den >>= shift;
  } else if (mag <= kMax64 && den <= kMax64) {
    const std::uint64_t g =
        std::gcd(static_cast<std::uint64_t>(mag), static_cast<std::uint64_t>(den));
    mag /= g;
    den /= g;
  } else {
    const u128 g = gcd128(mag, den);
    mag /= g;
    den /= g;
  }
  constexpr u128 kMaxNum = static_cast<u128>(std::numeric_limits<std::int64_t>::max());
  if (mag > kMaxNum + (negative ? 1 : 0) || den > kMax64) {
    throw OverflowError("fraction does not fit in 64-bit numerator/denominator");
  }
  const auto m = static_cast<std::uint64_t>(mag);
  return Fraction{negative ? static_cast<std::int64_t>(~m + 1) : static_cast<std::int64_t>(m),
                  static_cast<std::uint64_t>(den)};
}

}  // namespace

Fraction Fraction::of(std::int64_t num, std::uint64_t den) {
  return reduce128(num, den);
}

Rational Fraction::to_rational() const {
  static_assert(sizeof(long) == sizeof(std::int64_t), "LP64 data model expected");
  Rational r(mpz_class(static_cast<long>(num)), mpz_class(static_cast<unsigned long>(den)));
  r.canonicalize();
  return r;
}

std::strong_ordering operator<=>(const Fraction& a, const Fraction& b) {
  const i128 lhs = static_cast<i128>(a.num) * static_cast<i128>(b.den);
  const i128 rhs = static_cast<i128>(b.num) * static_cast<i128>(a.den);
  return lhs <=> rhs;
}

Fraction operator-(const Fraction& a, const Fraction& b) {
  if (a.den == b.den) return reduce128(static_cast<i128>(a.num) - b.num, a.den);
  const i128 num = static_cast<i128>(a.num) * static_cast<i128>(b.den) -
                   static_cast<i128>(b.num) * static_cast<i128>(a.den);
  return reduce128(num, static_cast<u128>(a.den) * b.den);
}

Fraction operator+(const Fraction& a, const Fraction& b) {
  if (a.den == b.den) return reduce128(static_cast<i128>(a.num) + b.num, a.den);
  const i128 num = static_cast<i128>(a.num) * static_cast<i128>(b.den) +
                   static_cast<i128>(b.num) * static_cast<i128>(a.den);
  return reduce128(num, static_cast<u128>(a.den) * b.den);
}

Rational parse_rational(std::string_view text) {
  std::string s(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  if (s.empty()) throw ParseError("empty number");
  try {
    if (s.find('/') != std::string::npos) {
      const auto slash = s.find('/');
      Rational num = parse_rational(s.substr(0, slash));
      Rational den = parse_rational(s.substr(slash + 1));
      if (den == 0) throw ParseError("zero denominator in '" + s + "'");
      Rational r = num / den;
      r.canonicalize();
      return r;
    }
    std::size_t pos = 0;
    bool negative = false;
    if (s[pos] == '+' || s[pos] == '-') {
      negative = s[pos] == '-';
      ++pos;
    }
    std::string digits;
    long scale = 0;
    bool seen_point = false;
    bool seen_digit = false;
    for (; pos < s.size(); ++pos) {
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits.push_back(c);
        seen_digit = true;
        if (seen_point) --scale;
      } else if (c == '.' && !seen_point) {
        seen_point = true;
      } else {
        break;
      }
    }
    if (!seen_digit) throw ParseError("not a number: '" + s + "'");
    if (pos < s.size()) {
      if (s[pos] != 'e' && s[pos] != 'E') throw ParseError("not a number: '" + s + "'");
      const std::string exponent = s.substr(pos + 1);
      if (exponent.empty()) throw ParseError("missing exponent in '" + s + "'");
      std::size_t used = 0;
      const long e = std::stol(exponent, &used);
      if (used != exponent.size()) throw ParseError("bad exponent in '" + s + "'");
      scale += e;
    }
    mpz_class mantissa(digits, 10);
    mpz_class ten_pow;
    mpz_ui_pow_ui(ten_pow.get_mpz_t(), 10, static_cast<unsigned long>(std::labs(scale)));
    Rational r = scale >= 0 ? Rational(mantissa * ten_pow) : Rational(mantissa, ten_pow);
    r.canonicalize();
    return negative ? Rational(-r) : r;
  } catch (const std::invalid_argument&) {
    throw ParseError("not a number: '" + s + "'");
  } catch (const std::out_of_range&) {
    throw ParseError("number out of range: '" + s + "'");
  }
}

std::string to_string(const Rational& value) {
  return value.get_num().get_str() + "/" + value.get_den().get_str();
}

namespace numerics {

namespace {

mpfr_rnd_t to_mpfr(Round round) {
  switch (round) {
    case Round::Down:
      return MPFR_RNDD;
    case Round::Up:
      return MPFR_RNDU;
    case Round::Nearest:
      break;
  }
  return MPFR_RNDN;
}

unsigned joint_precision(const BigFloat& a, const BigFloat& b) {
  return std::max(a.precision(), b.precision());
}

}  // namespace

BigFloat::BigFloat(unsigned bits) {
  mpfr_init2(value_, static_cast<mpfr_prec_t>(std::max(bits, 2u)));
  mpfr_set_zero(value_, 1);
}

BigFloat::BigFloat(const BigFloat& other) {
  mpfr_init2(value_, mpfr_get_prec(other.value_));
  mpfr_set(value_, other.value_, MPFR_RNDN);
}

BigFloat::BigFloat(BigFloat&& other) noexcept {
  mpfr_init2(value_, mpfr_get_prec(other.value_));
  mpfr_swap(value_, other.value_);
}

BigFloat& BigFloat::operator=(const BigFloat& other) {
  if (this != &other) {
    mpfr_set_prec(value_, mpfr_get_prec(other.value_));
    mpfr_set(value_, other.value_, MPFR_RNDN);
  }
  return *this;
}

BigFloat& BigFloat::operator=(BigFloat&& other) noexcept {
  if (this != &other) mpfr_swap(value_, other.value_);
  return *this;
}

BigFloat::~BigFloat() { mpfr_clear(value_); }

BigFloat BigFloat::from_double(double value, unsigned bits) {
  BigFloat r(std::max(bits, 53u));
  mpfr_set_d(r.value_, value, MPFR_RNDN);
  return r;
}

BigFloat BigFloat::from_rational(const Rational& value, Round round, unsigned bits) {
  BigFloat r(bits);
  mpfr_set_q(r.value_, value.get_mpq_t(), to_mpfr(round));
  return r;
}

unsigned BigFloat::precision() const { return static_cast<unsigned>(mpfr_get_prec(value_)); }

double BigFloat::to_double(Round round) const { return mpfr_get_d(value_, to_mpfr(round)); }

Rational BigFloat::to_rational() const {
  if (!is_finite()) throw DomainError("non-finite value has no rational form");
  Rational out;
  mpfr_get_q(out.get_mpq_t(), value_);
  return out;
}

std::string BigFloat::to_string(int digits, Round round) const {
  char* buffer = nullptr;
  const int n = mpfr_asprintf(&buffer, "%.*R*g", digits, to_mpfr(round), value_);
  if (n < 0 || buffer == nullptr) return "nan";
  std::string out(buffer);
  mpfr_free_str(buffer);
  return out;
}

bool BigFloat::is_zero() const { return mpfr_zero_p(value_) != 0; }
bool BigFloat::is_finite() const { return mpfr_number_p(value_) != 0; }

std::partial_ordering operator<=>(const BigFloat& a, const BigFloat& b) {
  if (mpfr_unordered_p(a.value_, b.value_)) return std::partial_ordering::unordered;
  const int c = mpfr_cmp(a.value_, b.value_);
  return c < 0 ? std::partial_ordering::less
               : (c > 0 ? std::partial_ordering::greater : std::partial_ordering::equivalent);
}

bool operator==(const BigFloat& a, const BigFloat& b) { return mpfr_equal_p(a.value_, b.value_); }

std::partial_ordering operator<=>(const BigFloat& a, double b) {
  if (mpfr_nan_p(a.value_) || std::isnan(b)) return std::partial_ordering::unordered;
  const int c = mpfr_cmp_d(a.value_, b);
  return c < 0 ? std::partial_ordering::less
               : (c > 0 ? std::partial_ordering::greater : std::partial_ordering::equivalent);
}

bool operator==(const BigFloat& a, double b) {
  return !mpfr_nan_p(a.value_) && !std::isnan(b) && mpfr_cmp_d(a.value_, b) == 0;
}

BigFloat add(const BigFloat& a, const BigFloat& b, Round round) {
  BigFloat r(joint_precision(a, b));
  mpfr_add(r.get(), a.get(), b.get(), to_mpfr(round));
  return r;
}

BigFloat add(const BigFloat& a, double b, Round round) {
  BigFloat r(std::max(a.precision(), 53u));
  mpfr_add_d(r.get(), a.get(), b, to_mpfr(round));
  return r;
}

BigFloat sub(const BigFloat& a, const BigFloat& b, Round round) {
  BigFloat r(joint_precision(a, b));
  mpfr_sub(r.get(), a.get(), b.get(), to_mpfr(round));
  return r;
}

BigFloat mul(const BigFloat& a, const BigFloat& b, Round round) {
  BigFloat r(joint_precision(a, b));
  mpfr_mul(r.get(), a.get(), b.get(), to_mpfr(round));
  return r;
}

BigFloat div(const BigFloat& a, const BigFloat& b, Round round) {
  BigFloat r(joint_precision(a, b));
  mpfr_div(r.get(), a.get(), b.get(), to_mpfr(round));
  return r;
}

BigFloat div(const BigFloat& a, std::uint64_t b, Round round) {
  BigFloat d(a.precision());
  mpfr_set_uj(d.get(), b, MPFR_RNDN);
  if (mpfr_cmp_ui(d.get(), static_cast<unsigned long>(b)) != 0) {
    throw OverflowError("divisor not representable at this precision");
  }
  return div(a, d, round);
}

BigFloat mul(const BigFloat& a, std::uint64_t b, Round round) {
  BigFloat f(std::max(a.precision(), 64u));
  mpfr_set_uj(f.get(), b, MPFR_RNDN);
  BigFloat r(a.precision());
  mpfr_mul(r.get(), a.get(), f.get(), to_mpfr(round));
  return r;
}

const BigFloat& min(const BigFloat& a, const BigFloat& b) { return (b < a) ? b : a; }
const BigFloat& max(const BigFloat& a, const BigFloat& b) { return (b > a) ? b : a; }

// --- Scalar -----------------------------------------------------------------

Scalar::Scalar(unsigned bits) : lo_(bits), hi_(bits) {}

Scalar::Scalar(BigFloat lo, BigFloat hi) : lo_(std::move(lo)), hi_(std::move(hi)) {}

Scalar Scalar::exact(const Rational& value, unsigned bits) {
  return Scalar(BigFloat::from_rational(value, Round::Down, bits),
                BigFloat::from_rational(value, Round::Up, bits));
}

Scalar Scalar::exact(std::int64_t value, unsigned bits) {
  return exact(Rational(static_cast<long>(value)), bits);
}

Scalar Scalar::from_double(double value, unsigned bits) {
  return Scalar(BigFloat::from_double(value, bits), BigFloat::from_double(value, bits));
}

Scalar Scalar::from_bounds(BigFloat lo, BigFloat hi) {
  if (!(lo <= hi)) throw DomainError("interval with lo > hi");
  return Scalar(std::move(lo), std::move(hi));
}

Scalar Scalar::from_bounds(double lo, double hi, unsigned bits) {
  return from_bounds(BigFloat::from_double(lo, bits), BigFloat::from_double(hi, bits));
}

double Scalar::midpoint() const {
  BigFloat sum = add(lo_, hi_, Round::Nearest);
  mpfr_div_2ui(sum.get(), sum.get(), 1, MPFR_RNDN);
  return sum.to_double(Round::Nearest);
}

double Scalar::error_bound() const { return sub(hi_, lo_, Round::Up).to_double(Round::Up); }

bool Scalar::contains(const Rational& value) const {
  return mpfr_cmp_q(lo_.get(), value.get_mpq_t()) <= 0 &&
         mpfr_cmp_q(hi_.get(), value.get_mpq_t()) >= 0;
}

std::optional<bool> Scalar::le_within(const Rational& threshold, double margin) const {
  BigFloat bound = BigFloat::from_rational(threshold, Round::Down, precision());
  bound = add(bound, margin, Round::Down);
  if (hi_ <= bound) return true;
  if (mpfr_cmp_q(lo_.get(), threshold.get_mpq_t()) > 0) return false;
  return std::nullopt;
}

bool Scalar::certainly_le(const Rational& t) const {
  return mpfr_cmp_q(hi_.get(), t.get_mpq_t()) <= 0;
}
bool Scalar::certainly_lt(const Rational& t) const {
  return mpfr_cmp_q(hi_.get(), t.get_mpq_t()) < 0;
}
bool Scalar::certainly_ge(const Rational& t) const {
  return mpfr_cmp_q(lo_.get(), t.get_mpq_t()) >= 0;
}
bool Scalar::certainly_gt(const Rational& t) const {
  return mpfr_cmp_q(lo_.get(), t.get_mpq_t()) > 0;
}

std::string Scalar::to_string(int digits) const {
  BigFloat sum = add(lo_, hi_, Round::Nearest);
  mpfr_div_2ui(sum.get(), sum.get(), 1, MPFR_RNDN);
  return sum.to_string(digits);
}

Scalar Scalar::operator-() const {
  BigFloat lo(precision());
  BigFloat hi(precision());
  mpfr_neg(lo.get(), hi_.get(), MPFR_RNDD);
  mpfr_neg(hi.get(), lo_.get(), MPFR_RNDU);
  return Scalar(std::move(lo), std::move(hi));
}

Scalar operator+(const Scalar& a, const Scalar& b) {
  return Scalar(add(a.lo_, b.lo_, Round::Down), add(a.hi_, b.hi_, Round::Up));
}

Scalar operator-(const Scalar& a, const Scalar& b) {
  return Scalar(sub(a.lo_, b.hi_, Round::Down), sub(a.hi_, b.lo_, Round::Up));
}

Scalar operator*(const Scalar& a, const Scalar& b) {
  if (a.lo_ >= 0.0 && b.lo_ >= 0.0) {
    return Scalar(mul(a.lo_, b.lo_, Round::Down), mul(a.hi_, b.hi_, Round::Up));
  }
  const BigFloat* as[2] = {&a.lo_, &a.hi_};
  const BigFloat* bs[2] = {&b.lo_, &b.hi_};
  BigFloat lo = mul(a.lo_, b.lo_, Round::Down);
  BigFloat hi = mul(a.lo_, b.lo_, Round::Up);
  for (const BigFloat* x : as) {
    for (const BigFloat* y : bs) {
      BigFloat d = mul(*x, *y, Round::Down);
      BigFloat u = mul(*x, *y, Round::Up);
      if (d < lo) lo = std::move(d);
      if (u > hi) hi = std::move(u);
    }
  }
  return Scalar(std::move(lo), std::move(hi));
}

Scalar operator/(const Scalar& a, const Scalar& b) {
  if (b.lo_ <= 0.0 && b.hi_ >= 0.0) throw DomainError("division by an interval containing zero");
  const BigFloat* as[2] = {&a.lo_, &a.hi_};
  const BigFloat* bs[2] = {&b.lo_, &b.hi_};
  BigFloat lo = div(a.lo_, b.lo_, Round::Down);
  BigFloat hi = div(a.lo_, b.lo_, Round::Up);
  for (const BigFloat* x : as) {
    for (const BigFloat* y : bs) {
      BigFloat d = div(*x, *y, Round::Down);
      BigFloat u = div(*x, *y, Round::Up);
      if (d < lo) lo = std::move(d);
      if (u > hi) hi = std::move(u);
    }
  }
  return Scalar(std::move(lo), std::move(hi));
}

Scalar exp(const Scalar& x) {
  BigFloat lo(x.precision());
  BigFloat hi(x.precision());
  mpfr_exp(lo.get(), x.lo().get(), MPFR_RNDD);
  mpfr_exp(hi.get(), x.hi().get(), MPFR_RNDU);
  return Scalar::from_bounds(std::move(lo), std::move(hi));
}

Scalar log(const Scalar& x) {
  if (!(x.lo() > 0.0)) throw DomainError("log of a non-positive interval");
  BigFloat lo(x.precision());
  BigFloat hi(x.precision());
  mpfr_log(lo.get(), x.lo().get(), MPFR_RNDD);
  mpfr_log(hi.get(), x.hi().get(), MPFR_RNDU);
  return Scalar::from_bounds(std::move(lo), std::move(hi));
}

Scalar pow(const Scalar& base, std::uint64_t exponent) {
  if (base.lo() >= 0.0) {
    BigFloat lo(base.precision());
    BigFloat hi(base.precision());
    mpfr_pow_ui(lo.get(), base.lo().get(), static_cast<unsigned long>(exponent), MPFR_RNDD);
    mpfr_pow_ui(hi.get(), base.hi().get(), static_cast<unsigned long>(exponent), MPFR_RNDU);
    return Scalar::from_bounds(std::move(lo), std::move(hi));
  }
  Scalar result = Scalar::exact(1, base.precision());
  Scalar square = base;
  while (exponent > 0) {
    if (exponent & 1u) result = result * square;
    exponent >>= 1u;
    if (exponent > 0) square = square * square;
  }
  return result;
}

Scalar hull(const Scalar& a, const Scalar& b) {
  return Scalar::from_bounds(min(a.lo(), b.lo()), max(a.hi(), b.hi()));
}

}  // namespace numerics
}  // namespace derand
