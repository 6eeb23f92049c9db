#pragma once

// Concrete objects built with the derandomizer: balanced codes, small-bias
// sets, almost k-wise independent sets, dense perfect hash families and their
// composition.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "derand/algebra.hpp"
#include "derand/derandomizer.hpp"
#include "derand/sample.hpp"

namespace derand {

inline constexpr std::uint64_t kDefaultBudget = std::uint64_t{1} << 24;

/// Value of the DERAND_BUDGET environment variable, or `fallback` when unset.
/// Throws ParameterError on a malformed value.
std::uint64_t budget_from_environment(std::uint64_t fallback = kDefaultBudget);

struct BuildOptions {
  /// Cap on constraints and on sum_j |S_j| per pick.
  std::uint64_t budget = kDefaultBudget;
  /// Scan the whole product space at each pick instead of fixing coordinates.
  bool enumerate = false;
  DerandomizerOptions derandomizer;
};

/// A product space together with the constraint specs it evaluates.
struct ConstraintProblem {
  std::unique_ptr<ProductSpace> space;
  std::vector<ConstraintSpec> constraints;
};

struct BuildResult {
  SampleMultiset sample;
  /// One trace per derandomizer run (two for a composition).
  std::vector<PotentialTrace> traces;
  /// Largest admissible size: required m + 1, or the product for a composition.
  std::uint64_t size_bound = 0;
  std::uint64_t constraint_count = 0;
};

/// Runs the derandomizer on `problem`; the sample's provenance is left for the caller.
BuildResult solve(const ConstraintProblem& problem, const BuildOptions& options = {});

// Balanced codes and small-bias sets.

/// Constraints [<v, w> = xi] over w in F_q^k, for every v of the form
/// (v_1, ..., v_j, 1, 0, ..., 0), every xi and both directions, with targets (1 -+ eps)/q.
ConstraintProblem balanced_code_problem(std::uint64_t q, std::size_t k, const Rational& epsilon,
                                        std::uint64_t budget = kDefaultBudget);

struct CodeBuild {
  LinearCode code;
  BuildResult build;  // sample = generator rows
};

/// Throws ParameterError unless q is a supported field size, k >= 1 and 0 < eps <= 1/2.
CodeBuild build_balanced_code(std::uint64_t q, std::size_t k, const Rational& epsilon,
                              const BuildOptions& options = {});

/// Rows of a balanced binary code of dimension n: every nonempty parity has bias <= eps.
BuildResult build_bias_set(std::size_t n, const Rational& epsilon,
                           const BuildOptions& options = {});

/// Maps each m-bit input word s to (<s, c_1>, ..., <s, c_n>) over F_2 where c_j
/// are the BCH-type columns with t = floor(2(m-1)/(k-1)) using the first
/// 1 + t(k-1)/2 input bits. Throws ParameterError if n > 2^t - 1 or k is not odd.
SampleMultiset nn_reduce(const SampleMultiset& bias_set, std::size_t n, unsigned k);

// Almost k-wise independent sets.

enum class Norm { Linf, L1 };

std::string to_string(Norm norm);

struct KwiseParams {
  std::size_t n = 0;
  unsigned k = 0;
  Rational epsilon;
  Norm norm = Norm::Linf;
  /// Prefix length for the L1 grouping; unset means max(ceil(k - log log n - log d), 0).
  std::optional<unsigned> r;
  double d = 1.0;
  /// Linf only: targets (1 -+ eps)/2^k instead of 1/2^k -+ eps.
  bool multiplicative = false;

  /// Throws ParameterError on k == 0, k > n, eps outside (0,1), and eps >= 2^-k for additive Linf.
  void validate() const;
  /// The prefix length actually used for L1.
  unsigned resolved_r() const;
};

ConstraintProblem kwise_direct_problem(const KwiseParams& params,
                                       std::uint64_t budget = kDefaultBudget);
ConstraintProblem kwise_l1_problem(const KwiseParams& params,
                                   std::uint64_t budget = kDefaultBudget);

/// Indicators [s_I = xi] for every k-subset I and pattern xi, two-sided.
BuildResult build_kwise_direct(const KwiseParams& params, const BuildOptions& options = {});
/// Indicators [s_I in {a} x B] with targets |B|/2^k -+ eps/2^{r+1}; vacuous sides are skipped.
BuildResult build_kwise_l1(const KwiseParams& params, const BuildOptions& options = {});

// Perfect hash families and composition.

struct PhfParams {
  std::size_t n = 0;
  std::uint64_t q = 0;
  unsigned k = 0;
  Rational epsilon;

  /// Throws ParameterError unless k >= 1, 0 < eps < 1 and q > 4k^2/eps.
  void validate() const;
  /// h = ceil(k^2 / eps); pair collisions are held to at most 1/h.
  std::uint64_t h() const;
};

/// Upper constraints Pr[s_i = s_j] <= 1/h over [q]^n for all pairs i < j.
ConstraintProblem phf_problem(const PhfParams& params, std::uint64_t budget = kDefaultBudget);

BuildResult build_phf(const PhfParams& params, const BuildOptions& options = {});

/// {(v_{u_1}, ..., v_{u_n}) : u in phf, v in inner}, u in the outer loop.
/// Throws DimensionMismatch unless inner.word_length == phf.alphabet.
SampleMultiset compose(const SampleMultiset& phf, const SampleMultiset& inner);

struct PolytimeOptions {
  BuildOptions build;
  /// Take the hash-and-compose branch even when n is small.
  bool force_composition = false;
};

/// Direct builder for small n; otherwise a (1 - eps/4)-dense PHF composed with
/// an (eps/4)-almost k-wise inner set on q coordinates.
BuildResult build_kwise_polytime(const KwiseParams& params, const PolytimeOptions& options = {});

/// Alphabet size the composition branch uses for `params`.
std::uint64_t polytime_alphabet(const KwiseParams& params);

}  // namespace derand
