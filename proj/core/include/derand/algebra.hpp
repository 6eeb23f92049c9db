#pragma once

// Finite fields, linear codes over them, and the BCH-type column sets used by
// the length reduction for small-bias sets.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "derand/sample.hpp"

namespace derand {

/// GF(p) for a prime p < 2^31, or GF(2^e) for e <= 16.
///
/// Elements are integers in [0, order). In GF(2^e) an element is the bit
/// pattern of a polynomial in x of degree < e (bit i holds the coefficient of
/// x^i), reduced modulo a fixed irreducible polynomial.
class Field {
 public:
  /// Throws ParameterError for non-prime p, e == 0, or an extension outside the table.
  Field(std::uint32_t characteristic, unsigned degree = 1);

  /// The field with `order` elements; order must be a prime or a power of two up to 2^16.
  static Field from_order(std::uint64_t order);

  std::uint32_t characteristic() const { return p_; }
  unsigned degree() const { return e_; }
  std::uint64_t order() const { return order_; }
  /// Defining polynomial for extensions (bit pattern including x^e), 0 for prime fields.
  std::uint32_t modulus() const { return modulus_; }

  bool contains(Symbol a) const { return a < order_; }
  Symbol add(Symbol a, Symbol b) const;
  Symbol sub(Symbol a, Symbol b) const;
  Symbol neg(Symbol a) const;
  Symbol mul(Symbol a, Symbol b) const;
  /// Throws DomainError on zero.
  Symbol inv(Symbol a) const;
  Symbol pow(Symbol a, std::uint64_t exponent) const;
  /// sum_i a_i b_i; throws DimensionMismatch on unequal lengths.
  Symbol dot(const Word& a, const Word& b) const;

  friend bool operator==(const Field& a, const Field& b) {
    return a.p_ == b.p_ && a.e_ == b.e_ && a.modulus_ == b.modulus_;
  }

 private:
  std::uint32_t p_;
  unsigned e_;
  std::uint64_t order_;
  std::uint32_t modulus_ = 0;
};

bool is_prime(std::uint64_t n);

/// Irreducible polynomial of degree e over F_2 from the built-in table (2 <= e <= 16).
std::uint32_t binary_modulus(unsigned degree);

/// True iff `poly` (bit pattern, degree >= 1) has no factor of smaller positive degree over F_2.
bool is_irreducible_binary(std::uint32_t poly);

/// Linear code whose codeword for message u is (<u, s_1>, ..., <u, s_m>).
struct LinearCode {
  Field field{2};
  std::size_t k = 0;
  std::vector<Word> rows;  // s_1, ..., s_m, each of length k

  std::size_t length() const { return rows.size(); }
  /// Throws DimensionMismatch if u has the wrong length.
  Word encode(const Word& u) const;
};

/// Columns (1, x_j, x_j^3, ..., x_j^{k-2}) written in bits, for every nonzero
/// x_j of GF(2^t) in increasing order. Any k of them are linearly independent
/// over F_2.
struct BchColumnSet {
  unsigned t = 0;
  unsigned k = 0;
  std::size_t m = 0;  // 1 + t (k - 1) / 2
  std::vector<std::vector<std::uint8_t>> columns;

  std::size_t size() const { return columns.size(); }
};

/// Throws ParameterError unless k is odd, k >= 3, 1 <= t <= 16 and k - 2 < 2^t.
BchColumnSet bch_columns(unsigned t, unsigned k);

}  // namespace derand
