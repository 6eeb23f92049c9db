#include "derand/derandomizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <utility>

#include "derand/error.hpp"

namespace derand {

using numerics::BigFloat;
using numerics::Round;
using numerics::Scalar;

namespace {

constexpr double kUnit = 0x1p-53;
constexpr double kTiny = 1e-250;
constexpr unsigned kChainBits = 128;
/// Largest number of (element, satisfied constraint) pairs kept in memory
/// across the picks of an enumerated run.
constexpr std::uint64_t kSatisfiedCacheEntries = std::uint64_t{1} << 26;

// Raised when the active precision cannot certify a pick; the driver restarts
// the run at a higher precision.
struct NeedsPrecision {
  std::string reason;
};

double nearest_double(const Rational& r) {
  return BigFloat::from_rational(r, Round::Nearest, 53).to_double(Round::Nearest);
}

double fraction_to_double(const Fraction& f) {
  return static_cast<double>(f.num) / static_cast<double>(f.den);
}

// Rounding error of a floating dot product of k terms whose products carry
// relative error `rel` against the exact terms.
double dot_error(double abs_sum, std::size_t k, double rel) {
  const double kd = static_cast<double>(k) + 2.0;
  return abs_sum * (kd * kUnit + rel) * (1.0 + 1e-6) +
         kd * 4.0 * std::numeric_limits<double>::denorm_min();
}

BigFloat upper_of(double value, double error) {
  return numerics::add(BigFloat::from_double(value, kChainBits), error, Round::Up);
}

BigFloat lower_of(double value, double error) {
  return numerics::add(BigFloat::from_double(value, kChainBits), -error, Round::Down);
}

// Per-constraint potential terms w_i = exp(-D_i M) gamma_i^l alpha_i^{Z_i}
// together with the step coefficients b_i = w_i gamma_i (alpha_i - 1), so that
// the expected next potential given means e_i is sum_i w_i gamma_i + b_i e_i.
class Terms {
 public:
  virtual ~Terms() = default;
  virtual void prepare_step() = 0;
  /// Upper bound on sum_k b_{idx[k]} diff[k].
  virtual BigFloat delta_upper(std::span<const std::uint32_t> idx,
                               std::span<const Fraction> diff) = 0;
  /// Upper bound on sum_{i in idx} b_i.
  virtual BigFloat satisfied_upper(std::span<const std::uint32_t> idx) = 0;
  /// Lower bound on sum_i b_i p_i.
  virtual BigFloat weighted_mean_lower() = 0;
  virtual void advance(const std::vector<std::uint8_t>& x) = 0;
  virtual Scalar potential() const = 0;
  virtual unsigned bits() const = 0;
  virtual Backend kind() const = 0;
};

class FastTerms final : public Terms {
 public:
  FastTerms(const ConstraintSystem& system, std::span<const Scalar> class_m_terms)
      : class_of_(system.class_index()) {
    const auto& classes = system.classes();
    for (std::size_t c = 0; c < classes.size(); ++c) {
      gamma_.push_back(nearest_double(classes[c].gamma));
      alpha_.push_back(nearest_double(classes[c].alpha));
      alpha_minus_one_.push_back(nearest_double(classes[c].alpha - 1));
      p_.push_back(nearest_double(classes[c].p));
      const Scalar& t = class_m_terms[c];
      const double lo = t.lower();
      if (!(lo > kTiny)) throw NeedsPrecision{"initial term below double range"};
      rel_w_ = std::max(rel_w_, (t.upper() / lo - 1.0) * 1.01 + 2.0 * kUnit);
      initial_.push_back(t.midpoint());
    }
    w_.resize(class_of_.size());
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] = initial_[class_of_[i]];
    b_.resize(w_.size());
  }

  void prepare_step() override {
    for (std::size_t i = 0; i < w_.size(); ++i) {
      const std::uint32_t c = class_of_[i];
      b_[i] = w_[i] * gamma_[c] * alpha_minus_one_[c];
    }
    rel_b_ = (rel_w_ + 4.0 * kUnit) * (1.0 + 1e-9);
    mean_lower_.reset();
  }

  BigFloat delta_upper(std::span<const std::uint32_t> idx,
                       std::span<const Fraction> diff) override {
    double sum = 0.0;
    double abs_sum = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (diff[k].is_zero()) continue;
      const double t = b_[idx[k]] * fraction_to_double(diff[k]);
      sum += t;
      abs_sum += std::fabs(t);
    }
    return upper_of(sum, dot_error(abs_sum, idx.size(), rel_b_ + 4.0 * kUnit));
  }

  BigFloat satisfied_upper(std::span<const std::uint32_t> idx) override {
    double sum = 0.0;
    double abs_sum = 0.0;
    for (std::uint32_t i : idx) {
      sum += b_[i];
      abs_sum += std::fabs(b_[i]);
    }
    return upper_of(sum, dot_error(abs_sum, idx.size(), rel_b_));
  }

  BigFloat weighted_mean_lower() override {
    if (!mean_lower_) {
      double sum = 0.0;
      double abs_sum = 0.0;
      for (std::size_t i = 0; i < b_.size(); ++i) {
        const double t = b_[i] * p_[class_of_[i]];
        sum += t;
        abs_sum += std::fabs(t);
      }
      mean_lower_ = lower_of(sum, dot_error(abs_sum, b_.size(), rel_b_ + 2.0 * kUnit));
    }
    return *mean_lower_;
  }

  void advance(const std::vector<std::uint8_t>& x) override {
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w_.size(); ++i) {
      const std::uint32_t c = class_of_[i];
      double v = w_[i] * gamma_[c];
      if (x[i]) v *= alpha_[c];
      w_[i] = v;
      smallest = std::min(smallest, v);
    }
    rel_w_ = (rel_w_ + 4.0 * kUnit) * (1.0 + 1e-9);
    if (!(smallest > kTiny)) throw NeedsPrecision{"potential term below double range"};
  }

  Scalar potential() const override {
    double sum = 0.0;
    for (double v : w_) sum += v;
    const double err = dot_error(sum, w_.size(), rel_w_);
    BigFloat lo = lower_of(sum, err);
    if (lo < 0.0) lo = BigFloat(kChainBits);
    return Scalar::from_bounds(std::move(lo), upper_of(sum, err));
  }

  unsigned bits() const override { return 53; }
  Backend kind() const override { return Backend::Fast; }

 private:
  std::vector<std::uint32_t> class_of_;
  std::vector<double> gamma_, alpha_, alpha_minus_one_, p_, initial_;
  std::vector<double> w_, b_;
  double rel_w_ = 0.0;
  double rel_b_ = 0.0;
  std::optional<BigFloat> mean_lower_;
};

class MpTerms final : public Terms {
 public:
  MpTerms(const ConstraintSystem& system, std::span<const Scalar> class_m_terms, unsigned bits)
      : bits_(bits), class_of_(system.class_index()) {
    for (const auto& cls : system.classes()) {
      gamma_.push_back(Scalar::exact(cls.gamma, bits));
      alpha_.push_back(Scalar::exact(cls.alpha, bits));
      alpha_minus_one_.push_back(Scalar::exact(Rational(cls.alpha - 1), bits));
      p_.push_back(Scalar::exact(cls.p, bits));
    }
    w_.reserve(class_of_.size());
    for (std::uint32_t c : class_of_) w_.push_back(class_m_terms[c]);
    b_.assign(w_.size(), Scalar(bits));
  }

  void prepare_step() override {
    for (std::size_t i = 0; i < w_.size(); ++i) {
      const std::uint32_t c = class_of_[i];
      b_[i] = w_[i] * gamma_[c] * alpha_minus_one_[c];
    }
    mean_lower_.reset();
  }

  BigFloat delta_upper(std::span<const std::uint32_t> idx,
                       std::span<const Fraction> diff) override {
    Scalar sum(bits_);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (diff[k].is_zero()) continue;
      sum = sum + b_[idx[k]] * fraction(diff[k]);
    }
    return sum.hi();
  }

  BigFloat satisfied_upper(std::span<const std::uint32_t> idx) override {
    Scalar sum(bits_);
    for (std::uint32_t i : idx) sum = sum + b_[i];
    return sum.hi();
  }

  BigFloat weighted_mean_lower() override {
    if (!mean_lower_) {
      Scalar sum(bits_);
      for (std::size_t i = 0; i < b_.size(); ++i) sum = sum + b_[i] * p_[class_of_[i]];
      mean_lower_ = sum.lo();
    }
    return *mean_lower_;
  }

  void advance(const std::vector<std::uint8_t>& x) override {
    for (std::size_t i = 0; i < w_.size(); ++i) {
      const std::uint32_t c = class_of_[i];
      w_[i] = x[i] ? w_[i] * gamma_[c] * alpha_[c] : w_[i] * gamma_[c];
    }
  }

  Scalar potential() const override {
    Scalar sum(bits_);
    for (const auto& v : w_) sum = sum + v;
    return sum;
  }

  unsigned bits() const override { return bits_; }
  Backend kind() const override { return Backend::Multiprecision; }

 private:
  const Scalar& fraction(const Fraction& f) {
    auto it = fractions_.find({f.num, f.den});
    if (it == fractions_.end()) {
      it = fractions_.emplace(std::make_pair(f.num, f.den), Scalar::exact(f.to_rational(), bits_))
               .first;
    }
    return it->second;
  }

  unsigned bits_;
  std::vector<std::uint32_t> class_of_;
  std::vector<Scalar> gamma_, alpha_, alpha_minus_one_, p_;
  std::vector<Scalar> w_, b_;
  std::optional<BigFloat> mean_lower_;
  std::map<std::pair<std::int64_t, std::uint64_t>, Scalar> fractions_;
};

std::vector<Scalar> class_m_terms(const ConstraintSystem& system, std::uint64_t output_size,
                                  unsigned bits) {
  std::vector<Scalar> out;
  const Scalar steps = Scalar::exact(rational_of(output_size), bits);
  for (const auto& cls : system.classes()) {
    const Scalar d = numerics::kl_divergence({cls.lambda, cls.p}, bits);
    out.push_back(numerics::exp(-(d * steps)));
  }
  return out;
}

// Everything about a run that does not depend on the arithmetic backend.
struct Setup {
  ConstraintSystem system;
  std::uint64_t m = 0;
  std::uint64_t output_size = 0;
  std::uint64_t coordinates = 1;
  Scalar mu;
  Rational tau;
  numerics::PrecisionBudget budget;
  BigFloat slack;  // per pick
  bool record_counters = false;
};

Setup make_setup(std::span<const ConstraintSpec> constraints, std::size_t space_constraints,
                 std::uint64_t coordinates, bool per_coordinate_slack,
                 const DerandomizerOptions& options) {
  if (constraints.empty()) throw ParameterError("no constraints");
  if (constraints.size() != space_constraints) {
    throw DimensionMismatch("space has " + std::to_string(space_constraints) +
                            " constraints but " + std::to_string(constraints.size()) +
                            " specs were given");
  }
  Setup s;
  s.system = ConstraintSystem(constraints);
  s.coordinates = coordinates;
  const auto classes = s.system.divergence_classes();
  if (options.m) {
    if (*options.m == 0) throw ParameterError("m must be at least 1");
    if (!numerics::sample_size_feasible(classes, *options.m)) {
      throw InfeasibleError("m = " + std::to_string(*options.m) +
                            " violates sum_i exp(-D_i m) <= 1; least feasible m is " +
                            std::to_string(numerics::required_sample_size(classes, options.m_cap)));
    }
    s.m = *options.m;
  } else {
    s.m = numerics::required_sample_size(classes, options.m_cap);
  }
  s.output_size = s.m + 1;

  BigFloat mu_lo = BigFloat::from_double(1.0);
  BigFloat mu_hi = BigFloat::from_double(1.0);
  for (const auto& c : classes) {
    const Scalar d = numerics::kl_divergence(c.params);
    mu_lo = numerics::min(mu_lo, d.lo());
    mu_hi = numerics::min(mu_hi, d.hi());
  }
  if (!(mu_lo > 0.0)) throw DomainError("a constraint has zero divergence");
  s.mu = Scalar::from_bounds(mu_lo, mu_hi);
  s.tau = s.system.tau();
  s.budget = numerics::precision_budget(s.m, s.system.size(), s.tau.get_d(), s.mu.lower(),
                                        coordinates);
  s.slack = numerics::div(s.mu.lo(), 4 * s.m, Round::Down);
  if (per_coordinate_slack) s.slack = numerics::div(s.slack, coordinates, Round::Down);

  const std::uint64_t cells = s.output_size * s.system.size();
  s.record_counters = s.output_size <= options.counter_budget &&
                      cells / s.output_size == s.system.size() && cells <= options.counter_budget;
  return s;
}

PotentialTrace make_trace(const Setup& s, const char* method, std::uint32_t alphabet,
                          const Terms& terms, const Scalar& initial) {
  PotentialTrace t;
  t.method = method;
  t.sizing_m = s.m;
  t.output_size = s.output_size;
  t.constraint_count = s.system.size();
  t.coordinate_count = s.coordinates;
  t.alphabet = alphabet;
  t.mu = s.mu;
  t.tau = s.tau;
  t.precision_budget_bits = s.budget.mantissa_bits;
  t.precision_error_bits = s.budget.error_bits;
  t.precision_bits_used = terms.bits();
  t.backend = to_string(terms.kind());
  t.slack = s.slack;
  t.initial_potential = initial;
  t.classes = s.system.classes();
  t.class_of = s.system.class_index();
  return t;
}

// Carries the certified bound to the next pick: the tighter of the chained
// candidate bound and a direct re-summation of the new terms.
BigFloat record_step(PotentialTrace& trace, Terms& terms, std::uint64_t index, Word chosen,
                     const BigFloat& candidate_bound) {
  const Scalar pot = terms.potential();
  BigFloat hi = numerics::min(candidate_bound, pot.hi());
  BigFloat lo = numerics::min(pot.lo(), hi);
  trace.steps.push_back(TraceStep{index, std::move(chosen), Scalar::from_bounds(lo, hi)});
  return hi;
}

void update_counters(PotentialTrace& trace, std::vector<std::uint32_t>& z,
                     const std::vector<std::uint8_t>& x, bool record) {
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += x[i];
  if (record) trace.counters.push_back(z);
}

void check_targets(const ConstraintSystem& system, const std::vector<std::uint32_t>& z,
                   std::uint64_t output_size) {
  const Rational size = rational_of(output_size);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const ConstraintClass& c = system.constraint_class(i);
    const Rational count = rational_of(z[i]);
    const bool ok = c.direction == Direction::Lower ? count >= c.lambda * size
                                                    : count <= c.lambda * size;
    if (!ok) {
      throw ContractViolation("constraint " + std::to_string(system.id(i)) +
                              " missed its target; the space's indicator means disagree with "
                              "the declared p");
    }
  }
}

template <typename Attempt>
DerandomizedSample with_escalation(const Setup& setup, const DerandomizerOptions& options,
                                   Attempt attempt) {
  std::vector<unsigned> plan;
  if (options.backend != Backend::Multiprecision) plan.push_back(0);
  if (options.backend != Backend::Fast) {
    for (unsigned bits = numerics::kDefaultBits; bits <= options.max_bits; bits *= 2) {
      plan.push_back(bits);
    }
  }
  std::string reason = "no precision level configured";
  for (unsigned bits : plan) {
    try {
      const unsigned term_bits = bits == 0 ? numerics::kDefaultBits : bits;
      const auto m_terms = class_m_terms(setup.system, setup.output_size, term_bits);
      std::unique_ptr<Terms> terms;
      if (bits == 0) {
        terms = std::make_unique<FastTerms>(setup.system, m_terms);
      } else {
        terms = std::make_unique<MpTerms>(setup.system, m_terms, bits);
      }
      return attempt(*terms);
    } catch (const NeedsPrecision& e) {
      reason = e.reason;
    }
  }
  throw PrecisionExhausted("could not certify the run up to " + std::to_string(options.max_bits) +
                           " bits: " + reason);
}

}  // namespace

std::string to_string(Direction direction) {
  return direction == Direction::Lower ? "lower" : "upper";
}

std::string to_string(Backend backend) {
  switch (backend) {
    case Backend::Auto:
      return "auto";
    case Backend::Fast:
      return "double";
    case Backend::Multiprecision:
      return "mpfr";
  }
  return "unknown";
}

void ConstraintSpec::validate() const {
  if (!(p > 0 && p < 1)) throw DomainError("p must lie in (0,1), got " + to_string(p));
  if (!(lambda > 0 && lambda < 1)) {
    throw DomainError("lambda must lie in (0,1), got " + to_string(lambda));
  }
  if (direction == Direction::Lower && !(lambda < p)) {
    throw DomainError("lower constraint needs lambda < p, got lambda=" + to_string(lambda) +
                      " p=" + to_string(p));
  }
  if (direction == Direction::Upper && !(lambda > p)) {
    throw DomainError("upper constraint needs lambda > p, got lambda=" + to_string(lambda) +
                      " p=" + to_string(p));
  }
}

Rational ConstraintSpec::alpha() const { return Rational((1 - p) * lambda / (p * (1 - lambda))); }

Rational ConstraintSpec::gamma() const { return Rational((1 - lambda) / (1 - p)); }

ConstraintSystem::ConstraintSystem(std::span<const ConstraintSpec> constraints) {
  class_of_.reserve(constraints.size());
  ids_.reserve(constraints.size());
  for (const auto& c : constraints) add(c);
}

std::size_t ConstraintSystem::add(const ConstraintSpec& spec) {
  spec.validate();
  std::size_t cls = classes_.size();
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    if (classes_[c].direction == spec.direction && classes_[c].p == spec.p &&
        classes_[c].lambda == spec.lambda) {
      cls = c;
      break;
    }
  }
  if (cls == classes_.size()) {
    classes_.push_back(
        ConstraintClass{spec.p, spec.lambda, spec.direction, spec.alpha(), spec.gamma(), 0});
  }
  ++classes_[cls].count;
  class_of_.push_back(static_cast<std::uint32_t>(cls));
  ids_.push_back(spec.id);
  return class_of_.size() - 1;
}

std::vector<numerics::DivergenceClass> ConstraintSystem::divergence_classes() const {
  std::vector<numerics::DivergenceClass> out;
  out.reserve(classes_.size());
  for (const auto& c : classes_) out.push_back({{c.lambda, c.p}, c.count});
  return out;
}

Rational ConstraintSystem::tau() const {
  Rational t = 0;
  for (const auto& c : classes_) t = std::max({t, c.alpha, c.gamma});
  return t;
}

void EnumeratedSpace::satisfied(std::size_t element, std::vector<std::uint32_t>& out) const {
  out.clear();
  const std::size_t n = constraint_count();
  for (std::size_t i = 0; i < n; ++i) {
    if (evaluate(element, i)) out.push_back(static_cast<std::uint32_t>(i));
  }
}

void ProductSpace::dependents(std::size_t, std::vector<std::uint32_t>& out) const {
  out.resize(constraint_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<std::uint32_t>(i);
}

ProductEnumeration::ProductEnumeration(const ProductSpace& space, std::uint64_t max_size)
    : space_(space) {
  for (std::size_t j = 0; j < space.coordinate_count(); ++j) {
    const std::uint64_t d = space.domain_size(j);
    if (d == 0) throw ParameterError("empty coordinate domain");
    if (size_ > max_size / d) {
      throw BudgetExceeded("product space exceeds the enumeration budget of " +
                           std::to_string(max_size) + " elements");
    }
    size_ *= d;
  }
}

Word ProductEnumeration::word(std::size_t element) const {
  Word w(space_.coordinate_count());
  for (std::size_t j = w.size(); j-- > 0;) {
    const std::uint32_t d = space_.domain_size(j);
    w[j] = static_cast<Symbol>(element % d);
    element /= d;
  }
  return w;
}

bool ProductEnumeration::evaluate(std::size_t element, std::size_t constraint) const {
  const Word w = word(element);
  const Fraction f = space_.conditional_mean(constraint, w);
  if (f.is_one()) return true;
  if (f.is_zero()) return false;
  throw ContractViolation("conditional mean at a full assignment is not 0 or 1");
}

void ProductEnumeration::satisfied(std::size_t element, std::vector<std::uint32_t>& out) const {
  out.clear();
  const Word w = word(element);
  const std::size_t n = space_.constraint_count();
  for (std::size_t i = 0; i < n; ++i) {
    const Fraction f = space_.conditional_mean(i, w);
    if (f.is_one()) {
      out.push_back(static_cast<std::uint32_t>(i));
    } else if (!f.is_zero()) {
      throw ContractViolation("conditional mean at a full assignment is not 0 or 1");
    }
  }
}

std::uint32_t ProductEnumeration::alphabet() const {
  std::uint32_t a = 2;
  for (std::size_t j = 0; j < space_.coordinate_count(); ++j) {
    a = std::max(a, space_.domain_size(j));
  }
  return a;
}

DerandomizedSample derandomize_enumerated(const EnumeratedSpace& space,
                                          std::span<const ConstraintSpec> constraints,
                                          const DerandomizerOptions& options) {
  const Setup setup = make_setup(constraints, space.constraint_count(), 1, false, options);
  const std::size_t n_elements = space.size();
  if (n_elements == 0) throw ParameterError("empty sample space");
  const std::size_t n = setup.system.size();

  if (options.check_martingale) {
    std::vector<std::uint64_t> hits(n, 0);
    std::vector<std::uint32_t> sat;
    for (std::size_t e = 0; e < n_elements; ++e) {
      space.satisfied(e, sat);
      for (std::uint32_t i : sat) ++hits[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (Rational(rational_of(hits[i]) / rational_of(n_elements)) !=
          setup.system.constraint_class(i).p) {
        throw ContractViolation("mean of constraint " + std::to_string(setup.system.id(i)) +
                                " over the space differs from its declared p");
      }
    }
  }

  // Satisfied sets in CSR form, or empty offsets when they do not fit the cache.
  std::vector<std::uint64_t> offsets;
  std::vector<std::uint32_t> cached;
  {
    std::vector<std::uint32_t> sat;
    offsets.reserve(n_elements + 1);
    offsets.push_back(0);
    for (std::size_t e = 0; e < n_elements; ++e) {
      space.satisfied(e, sat);
      if (cached.size() + sat.size() > kSatisfiedCacheEntries) {
        offsets.clear();
        cached.clear();
        cached.shrink_to_fit();
        break;
      }
      cached.insert(cached.end(), sat.begin(), sat.end());
      offsets.push_back(cached.size());
    }
  }
  std::vector<std::uint32_t> scratch;
  auto satisfied = [&](std::size_t e) -> std::span<const std::uint32_t> {
    if (!offsets.empty()) {
      return {cached.data() + offsets[e], static_cast<std::size_t>(offsets[e + 1] - offsets[e])};
    }
    space.satisfied(e, scratch);
    return scratch;
  };

  return with_escalation(setup, options, [&](Terms& terms) {
    const Scalar initial = terms.potential();
    PotentialTrace trace = make_trace(setup, "enumerated", space.alphabet(), terms, initial);
    SampleMultiset sample;
    sample.alphabet = space.alphabet();
    sample.word_length = space.word_length();

    std::vector<std::uint32_t> z(n, 0);
    std::vector<std::uint8_t> x(n, 0);
    BigFloat bound = initial.hi();
    for (std::uint64_t step = 0; step < setup.output_size; ++step) {
      terms.prepare_step();
      const BigFloat anchor = numerics::sub(bound, terms.weighted_mean_lower(), Round::Up);
      const BigFloat threshold = numerics::add(bound, setup.slack, Round::Down);
      std::optional<std::size_t> chosen;
      BigFloat chosen_bound(kChainBits);
      for (std::size_t e = 0; e < n_elements; ++e) {
        BigFloat cand = numerics::add(anchor, terms.satisfied_upper(satisfied(e)), Round::Up);
        if (!(cand <= threshold)) continue;
        if (!chosen || cand < chosen_bound) {
          chosen = e;
          chosen_bound = std::move(cand);
        }
        if (!options.minimize) break;
      }
      if (!chosen) {
        throw NeedsPrecision{"no candidate certified at pick " + std::to_string(step + 1)};
      }
      std::fill(x.begin(), x.end(), 0);
      for (std::uint32_t i : satisfied(*chosen)) x[i] = 1;
      update_counters(trace, z, x, setup.record_counters);
      terms.advance(x);
      Word w = space.word(*chosen);
      sample.words.push_back(w);
      bound = record_step(trace, terms, step + 1, std::move(w), chosen_bound);
    }
    if (!(bound < 1.0)) throw NeedsPrecision{"final potential bound is not below 1"};
    check_targets(setup.system, z, setup.output_size);
    trace.final_counters = std::move(z);
    sample.provenance.construction = "derandomize_enumerated";
    sample.provenance.trace_digest = trace.digest();
    return DerandomizedSample{std::move(sample), std::move(trace)};
  });
}

DerandomizedSample derandomize_conditional(const ProductSpace& space,
                                           std::span<const ConstraintSpec> constraints,
                                           const DerandomizerOptions& options) {
  const std::size_t coords = space.coordinate_count();
  if (coords == 0) throw ParameterError("product space has no coordinates");
  const Setup setup = make_setup(constraints, space.constraint_count(), coords, true, options);
  const std::size_t n = setup.system.size();

  std::uint32_t alphabet = 2;
  for (std::size_t j = 0; j < coords; ++j) {
    if (space.domain_size(j) == 0) throw ParameterError("empty coordinate domain");
    alphabet = std::max(alphabet, space.domain_size(j));
  }

  std::vector<Fraction> initial_means(n);
  for (std::size_t i = 0; i < n; ++i) {
    initial_means[i] = space.conditional_mean(i, {});
    if (initial_means[i].to_rational() != setup.system.constraint_class(i).p) {
      throw ContractViolation("conditional mean of constraint " +
                              std::to_string(setup.system.id(i)) +
                              " at the empty prefix differs from its declared p");
    }
  }
  std::vector<std::vector<std::uint32_t>> deps(coords);
  for (std::size_t j = 0; j < coords; ++j) space.dependents(j, deps[j]);

  // Cumulative acceptance allowance after fixing coordinate j; the last one
  // stays within the per-pick slack.
  const BigFloat per_coordinate = numerics::div(setup.slack, coords, Round::Down);
  std::vector<BigFloat> allowance;
  for (std::size_t j = 0; j < coords; ++j) {
    allowance.push_back(numerics::mul(per_coordinate, j + 1, Round::Down));
  }

  return with_escalation(setup, options, [&](Terms& terms) {
    const Scalar initial = terms.potential();
    PotentialTrace trace = make_trace(setup, "conditional", alphabet, terms, initial);
    SampleMultiset sample;
    sample.alphabet = alphabet;
    sample.word_length = coords;

    std::vector<std::uint32_t> z(n, 0);
    std::vector<std::uint8_t> x(n, 0);
    std::vector<Fraction> means;
    std::vector<Fraction> next, diff, best_next;
    BigFloat bound = initial.hi();
    for (std::uint64_t step = 0; step < setup.output_size; ++step) {
      terms.prepare_step();
      means = initial_means;
      Word prefix(coords, 0);
      BigFloat chain = bound;
      for (std::size_t j = 0; j < coords; ++j) {
        const auto& dep = deps[j];
        const BigFloat threshold = numerics::add(bound, allowance[j], Round::Down);
        const std::uint32_t domain = space.domain_size(j);
        next.resize(dep.size());
        diff.resize(dep.size());
        std::optional<Symbol> chosen;
        BigFloat chosen_bound(kChainBits);
        std::vector<Rational> martingale;
        if (options.check_martingale) martingale.assign(dep.size(), Rational(0));
        for (Symbol xi = 0; xi < domain; ++xi) {
          prefix[j] = xi;
          const std::span<const Symbol> view(prefix.data(), j + 1);
          for (std::size_t k = 0; k < dep.size(); ++k) {
            next[k] = space.conditional_mean(dep[k], view);
            diff[k] = next[k] - means[dep[k]];
            if (options.check_martingale) martingale[k] += next[k].to_rational();
          }
          if (chosen && !options.minimize) continue;  // only finishing the martingale sums
          BigFloat cand = numerics::add(chain, terms.delta_upper(dep, diff), Round::Up);
          if (!(cand <= threshold)) continue;
          if (!chosen || cand < chosen_bound) {
            chosen = xi;
            chosen_bound = std::move(cand);
            best_next = next;
          }
          if (!options.minimize && !options.check_martingale) break;
        }
        if (options.check_martingale) {
          for (std::size_t k = 0; k < dep.size(); ++k) {
            if (martingale[k] != means[dep[k]].to_rational() * domain) {
              throw ContractViolation("conditional means of constraint " +
                                      std::to_string(setup.system.id(dep[k])) +
                                      " are not a martingale at coordinate " + std::to_string(j));
            }
          }
        }
        if (!chosen) {
          throw NeedsPrecision{"no symbol certified at pick " + std::to_string(step + 1) +
                               ", coordinate " + std::to_string(j)};
        }
        prefix[j] = *chosen;
        for (std::size_t k = 0; k < dep.size(); ++k) means[dep[k]] = best_next[k];
        chain = std::move(chosen_bound);
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (means[i].is_one()) {
          x[i] = 1;
        } else if (means[i].is_zero()) {
          x[i] = 0;
        } else {
          throw ContractViolation("constraint " + std::to_string(setup.system.id(i)) +
                                  " is undetermined after fixing every coordinate; "
                                  "dependents() is incomplete");
        }
      }
      update_counters(trace, z, x, setup.record_counters);
      terms.advance(x);
      sample.words.push_back(prefix);
      bound = record_step(trace, terms, step + 1, std::move(prefix), chain);
    }
    if (!(bound < 1.0)) throw NeedsPrecision{"final potential bound is not below 1"};
    check_targets(setup.system, z, setup.output_size);
    trace.final_counters = std::move(z);
    sample.provenance.construction = "derandomize_conditional";
    sample.provenance.trace_digest = trace.digest();
    return DerandomizedSample{std::move(sample), std::move(trace)};
  });
}

PotentialState initial_state(const ConstraintSystem& system, std::uint64_t output_size,
                             unsigned bits) {
  if (output_size == 0) throw ParameterError("output size must be positive");
  const auto per_class = class_m_terms(system, output_size, bits);
  PotentialState state;
  state.m_terms.reserve(system.size());
  for (std::size_t i = 0; i < system.size(); ++i) {
    state.m_terms.push_back(per_class[system.class_of(i)]);
  }
  state.counters.assign(system.size(), 0);
  return state;
}

Scalar step_candidate_potential(const PotentialState& state, const ConstraintSystem& system,
                                std::span<const Fraction> means, unsigned bits) {
  const std::size_t n = system.size();
  if (state.m_terms.size() != n || state.counters.size() != n || means.size() != n) {
    throw DimensionMismatch("state, system and means must have one entry per constraint");
  }
  Scalar total(bits);
  for (std::size_t i = 0; i < n; ++i) {
    const ConstraintClass& c = system.constraint_class(i);
    const Scalar alpha = Scalar::exact(c.alpha, bits);
    const Scalar factor = Scalar::exact(Rational(1 + (c.alpha - 1) * means[i].to_rational()), bits);
    total = total + state.m_terms[i] * numerics::pow(Scalar::exact(c.gamma, bits), state.step + 1) *
                        numerics::pow(alpha, state.counters[i]) * factor;
  }
  return total;
}

Scalar state_potential(const PotentialState& state, const ConstraintSystem& system,
                       unsigned bits) {
  const std::size_t n = system.size();
  if (state.m_terms.size() != n || state.counters.size() != n) {
    throw DimensionMismatch("state and system must have one entry per constraint");
  }
  Scalar total(bits);
  for (std::size_t i = 0; i < n; ++i) {
    const ConstraintClass& c = system.constraint_class(i);
    total = total + state.m_terms[i] * numerics::pow(Scalar::exact(c.gamma, bits), state.step) *
                        numerics::pow(Scalar::exact(c.alpha, bits), state.counters[i]);
  }
  return total;
}

}  // namespace derand
