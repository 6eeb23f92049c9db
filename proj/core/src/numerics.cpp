#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "derand/error.hpp"
#include "derand/numerics.hpp"

namespace derand::numerics {

namespace {

bool in_open_unit(const Rational& x) { return x > 0 && x < 1; }

struct DivergenceTable {
  std::vector<Scalar> divergence;
  std::vector<std::uint64_t> count;
};

DivergenceTable tabulate(std::span<const DivergenceClass> classes, unsigned bits) {
  DivergenceTable t;
  t.divergence.reserve(classes.size());
  t.count.reserve(classes.size());
  for (const auto& c : classes) {
    t.divergence.push_back(kl_divergence(c.params, bits));
    t.count.push_back(c.count);
  }
  return t;
}

// sum_i count_i exp(-D_i m) <= 1, or nullopt when the interval straddles 1.
std::optional<bool> feasible_at(const DivergenceTable& t, std::uint64_t m, unsigned bits) {
  Scalar total(bits);
  const Scalar steps = Scalar::exact(rational_of(m), bits);
  for (std::size_t i = 0; i < t.divergence.size(); ++i) {
    if (t.count[i] == 0) continue;
    const Scalar term = exp(-(t.divergence[i] * steps));
    total = total + term * Scalar::exact(rational_of(t.count[i]), bits);
  }
  if (total.certainly_le(1)) return true;
  if (total.certainly_gt(1)) return false;
  return std::nullopt;
}

std::uint64_t ceil_to_u64(double x) {
  if (!(x < 9.0e18)) throw OverflowError("sample size does not fit in 64 bits");
  return static_cast<std::uint64_t>(std::ceil(x));
}

std::uint64_t total_count(std::span<const DivergenceClass> classes) {
  std::uint64_t n = 0;
  for (const auto& c : classes) {
    if (n > std::numeric_limits<std::uint64_t>::max() - c.count) {
      throw OverflowError("constraint count overflows 64 bits");
    }
    n += c.count;
  }
  return n;
}

}  // namespace

void DivergenceParams::validate() const {
  if (!in_open_unit(lambda)) throw DomainError("lambda must lie in (0,1), got " + to_string(lambda));
  if (!in_open_unit(p)) throw DomainError("p must lie in (0,1), got " + to_string(p));
}

Scalar kl_divergence(const DivergenceParams& params, unsigned bits) {
  params.validate();
  const Rational& lambda = params.lambda;
  const Rational& p = params.p;
  if (lambda == p) return Scalar::exact(0, bits);
  const Rational one_minus_lambda = 1 - lambda;
  const Scalar d = Scalar::exact(lambda, bits) * log(Scalar::exact(Rational(lambda / p), bits)) +
                   Scalar::exact(one_minus_lambda, bits) *
                       log(Scalar::exact(Rational(one_minus_lambda / (1 - p)), bits));
  // D >= 0 always; clip the rounding spill below zero.
  if (d.lo() < 0.0) {
    return Scalar::from_bounds(BigFloat(bits), max(d.hi(), BigFloat(bits)));
  }
  return d;
}

Scalar q_ary_entropy(const Rational& p, const Rational& q, unsigned bits) {
  if (!in_open_unit(p)) throw DomainError("entropy argument must lie in (0,1)");
  if (q <= 1) throw DomainError("entropy base must exceed 1");
  const Scalar one_minus_p = Scalar::exact(Rational(1 - p), bits);
  const Scalar numerator =
      Scalar::exact(p, bits) * log(Scalar::exact(Rational((q - 1) / p), bits)) +
      one_minus_p * log(Scalar::exact(Rational(1 / (1 - p)), bits));
  return numerator / log(Scalar::exact(q, bits));
}

bool sample_size_feasible(std::span<const DivergenceClass> classes, std::uint64_t m) {
  for (unsigned bits = kDefaultBits; bits <= 1024; bits *= 4) {
    const auto decided = feasible_at(tabulate(classes, bits), m, bits);
    if (decided) return *decided;
  }
  return false;
}

std::uint64_t max_divergence_sample_bound(std::span<const DivergenceClass> classes) {
  const std::uint64_t n = total_count(classes);
  if (n == 0) throw ParameterError("no constraints");
  if (n == 1) return 0;
  std::optional<Scalar> min_d;
  for (const auto& c : classes) {
    if (c.count == 0) continue;
    Scalar d = kl_divergence(c.params);
    if (!(d.lo() > 0.0)) throw DomainError("constraint with lambda == p has zero divergence");
    if (!min_d || d.lo() < min_d->lo()) min_d = std::move(d);
  }
  const Scalar log_n = log(Scalar::exact(rational_of(n)));
  return ceil_to_u64((log_n / *min_d).upper());
}

std::uint64_t required_sample_size(std::span<const DivergenceClass> classes, std::uint64_t cap) {
  for (const auto& c : classes) {
    c.params.validate();
    if (c.params.lambda == c.params.p) {
      throw DomainError("constraint with lambda == p can never be certified");
    }
  }
  const std::uint64_t n = total_count(classes);
  if (n == 0) throw ParameterError("no constraints");
  if (n == 1) return 1;

  std::uint64_t hi = std::max<std::uint64_t>(max_divergence_sample_bound(classes), 1);
  if (hi > cap) {
    throw OverflowError("required sample size " + std::to_string(hi) + " exceeds cap " +
                        std::to_string(cap));
  }
  const DivergenceTable table = tabulate(classes, kDefaultBits);
  auto feasible = [&](std::uint64_t m) {
    const auto decided = feasible_at(table, m, kDefaultBits);
    return decided ? *decided : sample_size_feasible(classes, m);
  };
  while (!feasible(hi)) {
    if (++hi > cap) throw OverflowError("required sample size exceeds cap");
  }
  std::uint64_t lo = 0;  // sum at m=0 is n > 1
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return std::max<std::uint64_t>(hi, 1);
}

std::uint64_t required_sample_size(std::span<const DivergenceParams> constraints,
                                   std::uint64_t cap) {
  std::map<std::pair<Rational, Rational>, std::uint64_t> grouped;
  for (const auto& c : constraints) ++grouped[{c.lambda, c.p}];
  std::vector<DivergenceClass> classes;
  classes.reserve(grouped.size());
  for (const auto& [key, count] : grouped) {
    classes.push_back(DivergenceClass{DivergenceParams{key.first, key.second}, count});
  }
  return required_sample_size(classes, cap);
}

std::uint64_t relative_error_sample_bound(std::uint64_t constraint_count,
                                          const Rational& min_p_eps_squared) {
  if (constraint_count == 0) throw ParameterError("no constraints");
  if (min_p_eps_squared <= 0) throw DomainError("min p*eps^2 must be positive");
  const Scalar log_n =
      log(Scalar::exact(rational_of(constraint_count)));
  const Scalar bound = Scalar::exact(3) * log_n / Scalar::exact(min_p_eps_squared);
  return ceil_to_u64(bound.upper());
}

PrecisionBudget precision_budget(std::uint64_t m, std::uint64_t constraint_count, double tau,
                                 double mu, std::uint64_t coordinate_count) {
  if (m == 0 || constraint_count == 0 || coordinate_count == 0) {
    throw ParameterError("precision budget needs m, N, n >= 1");
  }
  if (!(tau >= 1.0)) throw DomainError("tau must be >= 1");
  if (!(mu > 0.0 && mu <= 1.0)) throw DomainError("mu must lie in (0,1]");
  // The slackened run takes m+1 steps, so the step count enters as m+1.
  const double steps = static_cast<double>(m) + 1.0;
  const double raw = 2.0 * steps * std::log2(tau) + std::log2(static_cast<double>(constraint_count)) +
                     2.0 * std::log2(steps) + std::log2(1.0 / mu);
  PrecisionBudget budget;
  budget.error_bits = ceil_to_u64(raw) + 2;
  if (coordinate_count > 1) {
    budget.error_bits += ceil_to_u64(std::log2(static_cast<double>(coordinate_count)));
  }
  budget.mantissa_bits = budget.error_bits + 1 + ceil_to_u64(std::log2(tau + 1.0));
  return budget;
}

}  // namespace derand::numerics
