#include "derand/algebra.hpp"

#include <array>
#include <bit>
#include <string>

#include "derand/error.hpp"

namespace derand {

namespace {

constexpr std::array<std::uint32_t, 17> kBinaryModuli = {
    0,      0,      0x7,    0xB,    0x13,   0x25,   0x43,   0x83,   0x11D,
    0x211,  0x409,  0x805,  0x1053, 0x201B, 0x4443, 0x8003, 0x1100B};

int degree_of(std::uint32_t poly) { return poly == 0 ? -1 : 31 - std::countl_zero(poly); }

std::uint32_t poly_mod(std::uint32_t a, std::uint32_t b) {
  const int db = degree_of(b);
  for (int da = degree_of(a); da >= db; da = degree_of(a)) a ^= b << (da - db);
  return a;
}

}  // namespace

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d) {
    if (n % d == 0) return false;
  }
  return true;
}

bool is_irreducible_binary(std::uint32_t poly) {
  const int d = degree_of(poly);
  if (d < 1) return false;
  for (std::uint32_t f = 2; degree_of(f) <= d / 2; ++f) {
    if (poly_mod(poly, f) == 0) return false;
  }
  return true;
}

std::uint32_t binary_modulus(unsigned degree) {
  if (degree < 2 || degree >= kBinaryModuli.size()) {
    throw ParameterError("no built-in irreducible polynomial of degree " + std::to_string(degree));
  }
  return kBinaryModuli[degree];
}

Field::Field(std::uint32_t characteristic, unsigned degree) : p_(characteristic), e_(degree) {
  if (characteristic >= (1u << 31) || !is_prime(characteristic)) {
    throw ParameterError("field characteristic must be a prime below 2^31, got " +
                         std::to_string(characteristic));
  }
  if (degree == 0) throw ParameterError("field degree must be at least 1");
  if (degree > 1) {
    if (characteristic != 2) {
      throw ParameterError("extension fields are supported only in characteristic 2");
    }
    modulus_ = binary_modulus(degree);
    if (!is_irreducible_binary(modulus_)) {
      throw ParameterError("table polynomial of degree " + std::to_string(degree) +
                           " is not irreducible");
    }
  }
  order_ = degree == 1 ? characteristic : (std::uint64_t{1} << degree);
}

Field Field::from_order(std::uint64_t order) {
  if (order >= 2 && std::has_single_bit(order)) {
    return Field(2, static_cast<unsigned>(std::countr_zero(order)));
  }
  if (order < (std::uint64_t{1} << 31) && is_prime(order)) {
    return Field(static_cast<std::uint32_t>(order));
  }
  throw ParameterError("unsupported field size " + std::to_string(order) +
                       " (need a prime below 2^31 or a power of two up to 2^16)");
}

Symbol Field::add(Symbol a, Symbol b) const {
  if (e_ > 1 || p_ == 2) return a ^ b;
  const std::uint64_t s = std::uint64_t{a} + b;
  return static_cast<Symbol>(s >= p_ ? s - p_ : s);
}

Symbol Field::neg(Symbol a) const {
  if (e_ > 1 || p_ == 2 || a == 0) return a;
  return p_ - a;
}

Symbol Field::sub(Symbol a, Symbol b) const { return add(a, neg(b)); }

Symbol Field::mul(Symbol a, Symbol b) const {
  if (e_ == 1) return static_cast<Symbol>((std::uint64_t{a} * b) % p_);
  std::uint32_t result = 0;
  std::uint32_t x = a;
  const std::uint32_t top = 1u << e_;
  for (std::uint32_t y = b; y != 0; y >>= 1) {
    if (y & 1u) result ^= x;
    x <<= 1;
    if (x & top) x ^= modulus_;
  }
  return result;
}

Symbol Field::pow(Symbol a, std::uint64_t exponent) const {
  Symbol result = 1;
  Symbol base = a;
  while (exponent > 0) {
    if (exponent & 1u) result = mul(result, base);
    base = mul(base, base);
    exponent >>= 1;
  }
  return result;
}

Symbol Field::inv(Symbol a) const {
  if (a == 0) throw DomainError("zero has no multiplicative inverse");
  return pow(a, order_ - 2);
}

Symbol Field::dot(const Word& a, const Word& b) const {
  if (a.size() != b.size()) {
    throw DimensionMismatch("dot product of lengths " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  Symbol acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc = add(acc, mul(a[i], b[i]));
  return acc;
}

Word LinearCode::encode(const Word& u) const {
  if (u.size() != k) {
    throw DimensionMismatch("message has length " + std::to_string(u.size()) + ", code has k = " +
                            std::to_string(k));
  }
  Word out;
  out.reserve(rows.size());
  for (const Word& row : rows) out.push_back(field.dot(u, row));
  return out;
}

BchColumnSet bch_columns(unsigned t, unsigned k) {
  if (k < 3 || k % 2 == 0) throw ParameterError("k must be odd and at least 3");
  if (t < 1 || t > 16) throw ParameterError("t must lie in [1, 16]");
  if (k - 2 >= (std::uint64_t{1} << t)) throw ParameterError("need k - 2 < 2^t");
  const Field field = Field::from_order(std::uint64_t{1} << t);
  BchColumnSet set;
  set.t = t;
  set.k = k;
  set.m = 1 + static_cast<std::size_t>(t) * (k - 1) / 2;
  const std::uint32_t count = (1u << t) - 1;
  set.columns.reserve(count);
  for (std::uint32_t x = 1; x <= count; ++x) {
    std::vector<std::uint8_t> column;
    column.reserve(set.m);
    column.push_back(1);
    for (unsigned power = 1; power <= k - 2; power += 2) {
      const Symbol value = field.pow(x, power);
      for (unsigned bit = 0; bit < t; ++bit) column.push_back((value >> bit) & 1u);
    }
    set.columns.push_back(std::move(column));
  }
  return set;
}

}  // namespace derand
