#pragma once

// Brute-force checks of constructed objects. Every check recomputes its
// quantities from the raw multiset with exact integer counts, so a passing
// exhaustive report is a proof for that multiset.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "derand/algebra.hpp"
#include "derand/derandomizer.hpp"
#include "derand/numerics.hpp"
#include "derand/sample.hpp"

namespace derand {

inline constexpr std::uint64_t kDefaultVerifyBudget = std::uint64_t{1} << 24;

struct VerifyOptions {
  /// Cap on the number of enumerated objects (parities, subsets, messages, tuples).
  std::uint64_t budget = kDefaultVerifyBudget;
  /// Check this many uniformly drawn parities or subsets instead of all of them.
  /// A sampled report is never a proof.
  std::optional<std::uint64_t> sampled;
  std::uint64_t seed = 1;
};

struct VerificationReport {
  std::string property;
  bool pass = false;
  /// Where the worst deviation occurs, e.g. "I={1,3} sigma=01".
  std::string witness;
  Rational max_deviation;
  Rational threshold;
  std::uint64_t enumeration_count = 0;
  bool exhaustive = true;
  /// Secondary quantities in insertion order.
  std::vector<std::pair<std::string, std::string>> extra;

  /// Lookup in `extra`; empty when absent.
  std::string get(const std::string& key) const;
  /// "key=value" lines; rationals as "num/den".
  std::string to_key_value() const;
  /// Aligned two-column table for terminals.
  std::string to_table() const;
};

/// Max over nonempty I of |Pr[sum_{i in I} s_i = 0] - Pr[... = 1]|; pass iff <= eps.
/// Throws ParameterError for a non-binary or empty set and BudgetExceeded when
/// 2^n exceeds the budget (n <= 24 always holds for exhaustive runs).
VerificationReport check_bias(const SampleMultiset& set, const Rational& epsilon,
                              const VerifyOptions& options = {});

enum class KwiseNorm { Linf, L1, Multiplicative };

std::string to_string(KwiseNorm norm);

/// Distance of every k-coordinate restriction from uniform over [alphabet]^k.
/// Linf: max |Pr[s_I = sigma] - a^-k|. L1: max over I of the summed deviations.
/// Multiplicative: max |a^k Pr[s_I = sigma] - 1|. Pass iff the chosen distance <= eps.
/// Extras "linf" and "l1" are always filled, together with the L1 <= a^k Linf cross-check.
VerificationReport check_kwise(const SampleMultiset& set, unsigned k, KwiseNorm norm,
                               const Rational& epsilon, const VerifyOptions& options = {});

/// For every nonzero message u and symbol xi, checks
/// (1 - eps) m / q <= #{i : c(u)_i = xi} <= (1 + eps) m / q. The deviation is
/// max |q count / m - 1|. Extras include the minimum weight and the weight bound
/// (1 - (1 + eps)/q) m it must meet.
VerificationReport check_code_balance(const LinearCode& code, const Rational& epsilon,
                                      const VerifyOptions& options = {});

/// Min over k-subsets of coordinates of the fraction of words taking k distinct
/// values there. Pass iff that density is >= 1 - eps; max_deviation = 1 - density.
VerificationReport check_phf_density(const SampleMultiset& family, unsigned k,
                                     const Rational& epsilon, const VerifyOptions& options = {});

/// Max over pairs i < j of Pr[s_i = s_j]; pass iff <= bound.
VerificationReport check_pair_collisions(const SampleMultiset& family, const Rational& bound,
                                         const VerifyOptions& options = {});

/// Checks a potential trace: one step per output element, each certified
/// bound within the declared slack of the previous one, a final bound below 1,
/// and, when counters are stored, counters consistent with the steps, final
/// counters meeting every target, and a long-double recomputation of each
/// potential inside its enclosure up to rounding.
VerificationReport check_trace(const PotentialTrace& trace);

struct BoundRow {
  std::string label;
  /// Values per column: linf, linf multiplicative, l1. NaN where undefined.
  double linf = 0;
  double multiplicative = 0;
  double l1 = 0;
};

struct LowerBoundReport {
  std::size_t n = 0;
  unsigned k = 0;
  Rational epsilon;
  KwiseNorm norm = KwiseNorm::Linf;
  std::vector<BoundRow> rows;
  /// Expression inside the Omega of the L-infinity lower bound.
  double lb_linf = 0;
  /// Expression inside the Omega of the L1 lower bound.
  double lb_l1 = 0;
  std::optional<std::uint64_t> achieved;
  std::vector<std::string> warnings;

  std::string to_table() const;
  std::string to_key_value() const;
};

/// Evaluates the size expressions (logs base 2, constants dropped) of the
/// upper and lower bounds for almost k-wise independent sets. Out-of-range
/// parameters produce warnings, never errors.
LowerBoundReport lower_bound_report(std::size_t n, unsigned k, const Rational& epsilon,
                                    KwiseNorm norm,
                                    std::optional<std::uint64_t> achieved = std::nullopt);

}  // namespace derand
