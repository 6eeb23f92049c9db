#pragma once

// Greedy pessimistic-estimator derandomization of Chernoff-plus-union-bound
// arguments.
//
// Given N indicator variables X_i over a finite sample space with known means
// p_i and targets lambda_i, the engine picks s_1, s_2, ... one at a time so
// that the potential
//
//   P_j = sum_i exp(-D(lambda_i || p_i) M) gamma_i^j alpha_i^{Z_{j,i}}
//
// never grows by more than a declared slack, where Z_{j,i} counts how many of
// the first j picks satisfy X_i and M = m + 1 is the output size. A final
// P_M < 1 forces Z_{M,i} >= lambda_i M for lower constraints and
// Z_{M,i} <= lambda_i M for upper ones.
//
// Every acceptance decision is certified with outward-rounded intervals. Runs
// start in double precision and restart with MPFR at increasing precision if a
// step cannot be certified.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "derand/numerics.hpp"
#include "derand/sample.hpp"

namespace derand {

enum class Direction { Lower, Upper };

std::string to_string(Direction direction);

/// One indicator variable: Lower asks for empirical mean >= lambda (lambda < p),
/// Upper for empirical mean <= lambda (lambda > p).
struct ConstraintSpec {
  std::uint64_t id = 0;
  Rational p;
  Rational lambda;
  Direction direction = Direction::Lower;

  /// Throws DomainError on p or lambda outside (0,1) or a target on the wrong side of p.
  void validate() const;
  /// alpha = (1-p) lambda / (p (1-lambda)).
  Rational alpha() const;
  /// gamma = (1-lambda) / (1-p).
  Rational gamma() const;
};

/// Constraints sharing (p, lambda, direction) share multipliers and divergence.
struct ConstraintClass {
  Rational p;
  Rational lambda;
  Direction direction = Direction::Lower;
  Rational alpha;
  Rational gamma;
  std::uint64_t count = 0;
};

class ConstraintSystem {
 public:
  ConstraintSystem() = default;
  explicit ConstraintSystem(std::span<const ConstraintSpec> constraints);

  /// Validates and appends; returns the constraint index.
  std::size_t add(const ConstraintSpec& spec);

  std::size_t size() const { return class_of_.size(); }
  const std::vector<ConstraintClass>& classes() const { return classes_; }
  std::uint32_t class_of(std::size_t constraint) const { return class_of_[constraint]; }
  const std::vector<std::uint32_t>& class_index() const { return class_of_; }
  std::uint64_t id(std::size_t constraint) const { return ids_[constraint]; }
  const ConstraintClass& constraint_class(std::size_t constraint) const {
    return classes_[class_of_[constraint]];
  }

  std::vector<numerics::DivergenceClass> divergence_classes() const;
  /// max over classes of max(alpha, gamma).
  Rational tau() const;

 private:
  std::vector<ConstraintClass> classes_;
  std::vector<std::uint32_t> class_of_;
  std::vector<std::uint64_t> ids_;
};

/// A finite sample space listed element by element under the uniform distribution.
class EnumeratedSpace {
 public:
  virtual ~EnumeratedSpace() = default;

  virtual std::size_t size() const = 0;
  virtual std::size_t constraint_count() const = 0;
  /// X_constraint(element) in {0,1}. Must be deterministic.
  virtual bool evaluate(std::size_t element, std::size_t constraint) const = 0;
  /// Indices of the constraints with X = 1 at `element`, ascending.
  virtual void satisfied(std::size_t element, std::vector<std::uint32_t>& out) const;
  virtual Word word(std::size_t element) const = 0;
  virtual std::uint32_t alphabet() const = 0;
  virtual std::size_t word_length() const = 0;
};

/// S_1 x ... x S_n under the uniform product distribution, described through
/// exact conditional means of each constraint given a prefix of coordinates.
class ProductSpace {
 public:
  virtual ~ProductSpace() = default;

  virtual std::size_t coordinate_count() const = 0;
  virtual std::uint32_t domain_size(std::size_t coordinate) const = 0;
  virtual std::size_t constraint_count() const = 0;
  /// E[X_constraint | x_1..x_j = prefix]. The empty prefix gives p; a full
  /// prefix gives 0 or 1.
  virtual Fraction conditional_mean(std::size_t constraint,
                                    std::span<const Symbol> prefix) const = 0;
  /// Constraints whose conditional mean can change when `coordinate` is fixed.
  /// Defaults to every constraint.
  virtual void dependents(std::size_t coordinate, std::vector<std::uint32_t>& out) const;
};

/// Enumerates a product space in lexicographic order (last coordinate fastest).
class ProductEnumeration final : public EnumeratedSpace {
 public:
  /// Throws BudgetExceeded when the product has more than `max_size` elements.
  explicit ProductEnumeration(const ProductSpace& space, std::uint64_t max_size = 1u << 24);

  std::size_t size() const override { return size_; }
  std::size_t constraint_count() const override { return space_.constraint_count(); }
  bool evaluate(std::size_t element, std::size_t constraint) const override;
  void satisfied(std::size_t element, std::vector<std::uint32_t>& out) const override;
  Word word(std::size_t element) const override;
  std::uint32_t alphabet() const override;
  std::size_t word_length() const override { return space_.coordinate_count(); }

 private:
  const ProductSpace& space_;
  std::size_t size_ = 1;
};

enum class Backend { Auto, Fast, Multiprecision };

std::string to_string(Backend backend);

struct DerandomizerOptions {
  /// Sizing parameter m; the output has m + 1 elements. Unset means the least
  /// feasible m.
  std::optional<std::uint64_t> m;
  /// Pick the candidate with the smallest certified potential instead of the first acceptable one.
  bool minimize = false;
  Backend backend = Backend::Auto;
  /// Highest MPFR precision tried before giving up.
  unsigned max_bits = 1u << 14;
  /// Check E[X | prefix] against the average over the next coordinate at every fixed coordinate.
  bool check_martingale = false;
  /// Per-step counters are stored in the trace while steps * N stays below this.
  std::uint64_t counter_budget = std::uint64_t{1} << 24;
  std::uint64_t m_cap = numerics::kDefaultSampleCap;
};

struct TraceStep {
  std::uint64_t index = 0;  // 1-based pick number
  Word chosen;
  /// Certified enclosure of P_index; hi() is the bound carried to the next step.
  numerics::Scalar potential;
};

struct PotentialTrace {
  std::string method;  // "enumerated" or "conditional"
  std::uint64_t sizing_m = 0;
  std::uint64_t output_size = 0;  // m + 1
  std::uint64_t constraint_count = 0;
  std::uint64_t coordinate_count = 1;
  std::uint32_t alphabet = 2;
  numerics::Scalar mu;  // min(1, min_i D_i)
  Rational tau;
  std::uint64_t precision_budget_bits = 0;  // Delta from the worst-case bound
  std::uint64_t precision_error_bits = 0;   // B
  unsigned precision_bits_used = 0;
  std::string backend;
  /// Allowed growth of the certified potential per pick.
  numerics::BigFloat slack;
  numerics::Scalar initial_potential;
  std::vector<TraceStep> steps;
  /// counters[j][i] = Z_{j+1,i}; empty when over the counter budget.
  std::vector<std::vector<std::uint32_t>> counters;
  std::vector<std::uint32_t> final_counters;
  std::vector<ConstraintClass> classes;
  std::vector<std::uint32_t> class_of;

  /// One line per pick: index, chosen word, certified upper bound (12 significant digits).
  std::string dump() const;
  /// SHA-256 of dump().
  std::string digest() const;
};

struct DerandomizedSample {
  SampleMultiset sample;
  PotentialTrace trace;
};

/// Greedy selection scanning every element of `space` at each pick.
DerandomizedSample derandomize_enumerated(const EnumeratedSpace& space,
                                          std::span<const ConstraintSpec> constraints,
                                          const DerandomizerOptions& options = {});

/// Greedy selection fixing one coordinate at a time through conditional means.
DerandomizedSample derandomize_conditional(const ProductSpace& space,
                                           std::span<const ConstraintSpec> constraints,
                                           const DerandomizerOptions& options = {});

/// Reference state for evaluating candidate potentials directly.
struct PotentialState {
  std::uint64_t step = 0;                   // picks made so far (l)
  std::vector<numerics::Scalar> m_terms;    // exp(-D_i M) per constraint
  std::vector<std::uint64_t> counters;      // Z_{l,i}
};

/// Builds the initial state (step 0, zero counters) for output size `output_size`.
PotentialState initial_state(const ConstraintSystem& system, std::uint64_t output_size,
                             unsigned bits = numerics::kDefaultBits);

/// sum_i m_i gamma_i^{l+1} alpha_i^{Z_i} E[alpha_i^{X_i}] where E[X_i] = means[i].
/// With 0/1 means this is the potential after picking that element; with
/// conditional means it is the conditional expectation of that potential.
numerics::Scalar step_candidate_potential(const PotentialState& state,
                                          const ConstraintSystem& system,
                                          std::span<const Fraction> means,
                                          unsigned bits = numerics::kDefaultBits);

/// sum_i m_i gamma_i^l alpha_i^{Z_i}.
numerics::Scalar state_potential(const PotentialState& state, const ConstraintSystem& system,
                                 unsigned bits = numerics::kDefaultBits);

}  // namespace derand
