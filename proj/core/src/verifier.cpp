#include "derand/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "derand/error.hpp"

namespace derand {
namespace {

using numerics::BigFloat;
using numerics::Round;

constexpr std::uint64_t kSaturated = ~std::uint64_t{0};

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > kSaturated / a) return kSaturated;
  return a * b;
}

std::uint64_t saturating_pow(std::uint64_t base, unsigned exponent) {
  std::uint64_t r = 1;
  for (unsigned i = 0; i < exponent; ++i) r = saturating_mul(r, base);
  return r;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  __extension__ unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > kSaturated) return kSaturated;
  }
  return static_cast<std::uint64_t>(r);
}

Rational ratio(std::uint64_t num, std::uint64_t den) {
  Rational r = rational_of(num) / rational_of(den);
  r.canonicalize();
  return r;
}

std::uint64_t abs_diff(std::uint64_t a, std::uint64_t b) { return a > b ? a - b : b - a; }

void require_budget(std::uint64_t work, std::uint64_t budget, const std::string& what) {
  if (work > budget) {
    throw BudgetExceeded(what + " needs " +
                         (work == kSaturated ? std::string("more than 2^64")
                                             : std::to_string(work)) +
                         " enumerations, over the budget of " + std::to_string(budget));
  }
}

void require_words(const SampleMultiset& set) {
  set.validate();
  if (set.words.empty()) throw ParameterError("the multiset is empty");
  if (set.word_length == 0) throw ParameterError("words have length zero");
}

std::string subset_string(const std::vector<std::uint32_t>& subset) {
  std::string out = "I={";
  for (std::size_t t = 0; t < subset.size(); ++t) {
    if (t) out += ',';
    out += std::to_string(subset[t] + 1);
  }
  return out + "}";
}

bool next_combination(std::vector<std::uint32_t>& c, std::size_t n) {
  const std::size_t k = c.size();
  for (std::size_t t = k; t-- > 0;) {
    if (c[t] < n - k + t) {
      ++c[t];
      for (std::size_t u = t + 1; u < k; ++u) c[u] = c[u - 1] + 1;
      return true;
    }
  }
  return false;
}

// Yields every k-subset of [n] in lexicographic order, or `draws` uniform ones.
class SubsetSource {
 public:
  SubsetSource(std::size_t n, unsigned k, std::optional<std::uint64_t> draws, std::uint64_t seed)
      : n_(n), k_(k), draws_(draws), rng_(seed), pool_(n) {
    for (std::size_t i = 0; i < n; ++i) pool_[i] = static_cast<std::uint32_t>(i);
  }

  bool next(std::vector<std::uint32_t>& subset) {
    if (draws_) {
      if (produced_ == *draws_) return false;
      for (unsigned t = 0; t < k_; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, n_ - 1);
        std::swap(pool_[t], pool_[pick(rng_)]);
      }
      subset.assign(pool_.begin(), pool_.begin() + k_);
      std::sort(subset.begin(), subset.end());
    } else if (produced_ == 0) {
      subset.resize(k_);
      for (unsigned t = 0; t < k_; ++t) subset[t] = t;
    } else if (!next_combination(subset, n_)) {
      return false;
    }
    ++produced_;
    return true;
  }

  std::uint64_t produced() const { return produced_; }

 private:
  std::size_t n_;
  unsigned k_;
  std::optional<std::uint64_t> draws_;
  std::mt19937_64 rng_;
  std::vector<std::uint32_t> pool_;
  std::uint64_t produced_ = 0;
};

std::uint64_t subset_work(std::size_t n, unsigned k, std::uint64_t per_subset,
                          const VerifyOptions& options) {
  const std::uint64_t subsets = options.sampled ? *options.sampled : binomial(n, k);
  return saturating_mul(subsets, per_subset);
}

void check_order(std::size_t n, unsigned k) {
  if (k == 0) throw ParameterError("k must be at least 1");
  if (k > n) {
    throw ParameterError("k = " + std::to_string(k) + " exceeds the word length " +
                         std::to_string(n));
  }
}

}  // namespace

std::string VerificationReport::get(const std::string& key) const {
  for (const auto& [k, v] : extra) {
    if (k == key) return v;
  }
  return {};
}

std::string VerificationReport::to_key_value() const {
  std::ostringstream out;
  out << "property=" << property << '\n'
      << "pass=" << (pass ? "true" : "false") << '\n'
      << "witness=" << witness << '\n'
      << "max_deviation=" << to_string(max_deviation) << '\n'
      << "threshold=" << to_string(threshold) << '\n'
      << "enumeration_count=" << enumeration_count << '\n'
      << "exhaustive=" << (exhaustive ? "true" : "false") << '\n';
  for (const auto& [k, v] : extra) out << k << '=' << v << '\n';
  return out.str();
}

std::string VerificationReport::to_table() const {
  std::vector<std::pair<std::string, std::string>> rows = {
      {"property", property},
      {"result", pass ? "PASS" : "FAIL"},
      {"witness", witness},
      {"max deviation", to_string(max_deviation) + " (" +
                            std::to_string(max_deviation.get_d()) + ")"},
      {"threshold", to_string(threshold) + " (" + std::to_string(threshold.get_d()) + ")"},
      {"enumerated", std::to_string(enumeration_count)},
      {"exhaustive", exhaustive ? "yes" : "no (sampled)"},
  };
  rows.insert(rows.end(), extra.begin(), extra.end());
  std::size_t width = 0;
  for (const auto& row : rows) width = std::max(width, row.first.size());
  std::ostringstream out;
  for (const auto& [k, v] : rows) {
    out << k << std::string(width - k.size() + 2, ' ') << v << '\n';
  }
  return out.str();
}

std::string to_string(KwiseNorm norm) {
  switch (norm) {
    case KwiseNorm::Linf:
      return "linf";
    case KwiseNorm::L1:
      return "l1";
    case KwiseNorm::Multiplicative:
      return "multiplicative";
  }
  return "unknown";
}

VerificationReport check_bias(const SampleMultiset& set, const Rational& epsilon,
                              const VerifyOptions& options) {
  require_words(set);
  if (set.alphabet != 2) throw ParameterError("bias is defined for binary words only");
  const std::size_t n = set.word_length;
  const std::uint64_t size = set.size();

  VerificationReport r;
  r.property = "bias";
  r.threshold = epsilon;
  std::uint64_t best = 0;
  std::vector<std::uint32_t> best_subset;

  if (options.sampled) {
    require_budget(saturating_mul(*options.sampled, size), options.budget, "sampled bias check");
    r.exhaustive = false;
    std::mt19937_64 rng(options.seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::uint8_t> mask(n);
    for (std::uint64_t draw = 0; draw < *options.sampled; ++draw) {
      do {
        for (auto& b : mask) b = coin(rng);
      } while (std::none_of(mask.begin(), mask.end(), [](std::uint8_t b) { return b; }));
      std::uint64_t zeros = 0;
      for (const Word& w : set.words) {
        unsigned parity = 0;
        for (std::size_t i = 0; i < n; ++i) parity ^= mask[i] & w[i];
        zeros += parity == 0;
      }
      const std::uint64_t gap = abs_diff(2 * zeros, size);
      if (r.enumeration_count == 0 || gap > best) {
        best = gap;
        best_subset.clear();
        for (std::size_t i = 0; i < n; ++i) {
          if (mask[i]) best_subset.push_back(static_cast<std::uint32_t>(i));
        }
      }
      ++r.enumeration_count;
    }
  } else {
    if (n > 24) throw BudgetExceeded("exhaustive bias checks need n <= 24");
    const std::uint64_t cells = std::uint64_t{1} << n;
    require_budget(cells - 1, options.budget, "bias check");
    // Walsh-Hadamard transform of the point counts gives, at mask I,
    // #{parity_I = 0} - #{parity_I = 1}.
    std::vector<std::int64_t> f(cells, 0);
    for (const Word& w : set.words) {
      std::uint64_t x = 0;
      for (std::size_t i = 0; i < n; ++i) x |= std::uint64_t{w[i]} << i;
      ++f[x];
    }
    for (std::uint64_t len = 1; len < cells; len <<= 1) {
      for (std::uint64_t i = 0; i < cells; i += len << 1) {
        for (std::uint64_t j = i; j < i + len; ++j) {
          const std::int64_t a = f[j];
          const std::int64_t b = f[j + len];
          f[j] = a + b;
          f[j + len] = a - b;
        }
      }
    }
    std::uint64_t best_mask = 1;
    for (std::uint64_t mask = 1; mask < cells; ++mask) {
      const auto gap = static_cast<std::uint64_t>(f[mask] < 0 ? -f[mask] : f[mask]);
      if (mask == 1 || gap > best) {
        best = gap;
        best_mask = mask;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if ((best_mask >> i) & 1) best_subset.push_back(static_cast<std::uint32_t>(i));
    }
    r.enumeration_count = cells - 1;
  }

  r.max_deviation = ratio(best, size);
  r.pass = r.max_deviation <= epsilon;
  r.witness = subset_string(best_subset);
  r.extra.emplace_back("n", std::to_string(n));
  r.extra.emplace_back("size", std::to_string(size));
  return r;
}

VerificationReport check_kwise(const SampleMultiset& set, unsigned k, KwiseNorm norm,
                               const Rational& epsilon, const VerifyOptions& options) {
  require_words(set);
  const std::size_t n = set.word_length;
  check_order(n, k);
  const std::uint64_t a = set.alphabet;
  const std::uint64_t cells = saturating_pow(a, k);
  require_budget(subset_work(n, k, cells, options), options.budget, "k-wise check");
  const std::uint64_t size = set.size();
  if (saturating_mul(cells, size) == kSaturated) {
    throw OverflowError("alphabet^k * |S| does not fit in 64 bits");
  }

  VerificationReport r;
  r.property = "k-wise " + to_string(norm);
  r.threshold = epsilon;
  r.exhaustive = !options.sampled;

  // Deviations are kept as numerators over cells * size.
  std::uint64_t linf = 0;
  std::uint64_t l1 = 0;
  std::vector<std::uint32_t> linf_subset;
  std::vector<std::uint32_t> l1_subset;
  std::uint64_t linf_cell = 0;

  SubsetSource source(n, k, options.sampled, options.seed);
  std::vector<std::uint32_t> subset;
  std::vector<std::uint64_t> counts(cells);
  while (source.next(subset)) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const Word& w : set.words) {
      std::uint64_t cell = 0;
      for (std::uint32_t c : subset) cell = cell * a + w[c];
      ++counts[cell];
    }
    std::uint64_t total = 0;
    for (std::uint64_t cell = 0; cell < cells; ++cell) {
      const std::uint64_t dev = abs_diff(cells * counts[cell], size);
      total += dev;
      if (linf_subset.empty() || dev > linf) {
        linf = dev;
        linf_subset = subset;
        linf_cell = cell;
      }
    }
    if (l1_subset.empty() || total > l1) {
      l1 = total;
      l1_subset = subset;
    }
  }
  r.enumeration_count = source.produced();

  const std::uint64_t den = cells * size;
  const Rational linf_value = ratio(linf, den);
  const Rational l1_value = ratio(l1, den);
  Word sigma(k);
  for (unsigned t = k; t-- > 0;) {
    sigma[t] = static_cast<Symbol>(linf_cell % a);
    linf_cell /= a;
  }
  const std::string linf_witness =
      subset_string(linf_subset) + " sigma=" + format_word(sigma, set.alphabet);

  switch (norm) {
    case KwiseNorm::Linf:
      r.max_deviation = linf_value;
      r.witness = linf_witness;
      break;
    case KwiseNorm::L1:
      r.max_deviation = l1_value;
      r.witness = subset_string(l1_subset);
      break;
    case KwiseNorm::Multiplicative:
      r.max_deviation = ratio(linf, size);
      r.witness = linf_witness;
      break;
  }
  r.pass = r.max_deviation <= epsilon;
  r.extra.emplace_back("linf", to_string(linf_value));
  r.extra.emplace_back("l1", to_string(l1_value));
  r.extra.emplace_back("l1_le_ak_linf", l1_value <= rational_of(cells) * linf_value ? "true"
                                                                                      : "false");
  r.extra.emplace_back("k", std::to_string(k));
  r.extra.emplace_back("size", std::to_string(size));
  return r;
}

VerificationReport check_code_balance(const LinearCode& code, const Rational& epsilon,
                                      const VerifyOptions& options) {
  const std::uint64_t q = code.field.order();
  const std::size_t k = code.k;
  const std::uint64_t m = code.length();
  if (k == 0) throw ParameterError("code dimension must be at least 1");
  if (m == 0) throw ParameterError("code has no coordinates");
  for (const Word& row : code.rows) {
    if (row.size() != k) throw DimensionMismatch("generator row length differs from k");
    for (Symbol s : row) {
      if (!code.field.contains(s)) throw ParameterError("generator entry outside the field");
    }
  }
  const std::uint64_t messages = saturating_pow(q, static_cast<unsigned>(k));
  require_budget(messages - 1, options.budget, "code balance check");

  VerificationReport r;
  r.property = "code balance";
  r.threshold = epsilon;
  std::uint64_t worst = 0;
  std::uint64_t min_weight = m;
  std::string witness;
  bool first = true;

  Word u(k, 0);
  std::vector<std::uint64_t> counts(q);
  for (std::uint64_t index = 1; index < messages; ++index) {
    for (std::size_t t = k; t-- > 0;) {
      if (++u[t] < q) break;
      u[t] = 0;
    }
    std::fill(counts.begin(), counts.end(), 0);
    for (const Word& row : code.rows) ++counts[code.field.dot(u, row)];
    min_weight = std::min(min_weight, m - counts[0]);
    for (std::uint64_t xi = 0; xi < q; ++xi) {
      const std::uint64_t dev = abs_diff(q * counts[xi], m);
      if (first || dev > worst) {
        first = false;
        worst = dev;
        witness = "u=(" + format_word(u, static_cast<std::uint32_t>(q), ' ') +
                  ") xi=" + std::to_string(xi) + " count=" + std::to_string(counts[xi]);
      }
    }
  }
  r.enumeration_count = messages - 1;
  r.max_deviation = ratio(worst, m);
  r.pass = r.max_deviation <= epsilon;
  r.witness = witness;

  const Rational weight_bound = (1 - (1 + epsilon) / rational_of(q)) * rational_of(m);
  r.extra.emplace_back("q", std::to_string(q));
  r.extra.emplace_back("k", std::to_string(k));
  r.extra.emplace_back("length", std::to_string(m));
  r.extra.emplace_back("min_weight", std::to_string(min_weight));
  r.extra.emplace_back("min_distance", std::to_string(min_weight));
  r.extra.emplace_back("weight_bound", to_string(weight_bound));
  r.extra.emplace_back("weight_bound_met", rational_of(min_weight) >= weight_bound ? "true"
                                                                                  : "false");
  return r;
}

VerificationReport check_phf_density(const SampleMultiset& family, unsigned k,
                                     const Rational& epsilon, const VerifyOptions& options) {
  require_words(family);
  const std::size_t n = family.word_length;
  check_order(n, k);
  const std::uint64_t size = family.size();
  require_budget(subset_work(n, k, size, options), options.budget, "density check");

  VerificationReport r;
  r.property = "phf density";
  r.threshold = epsilon;
  r.exhaustive = !options.sampled;

  std::uint64_t min_good = size;
  std::vector<std::uint32_t> worst;
  SubsetSource source(n, k, options.sampled, options.seed);
  std::vector<std::uint32_t> subset;
  while (source.next(subset)) {
    std::uint64_t good = 0;
    for (const Word& w : family.words) {
      bool distinct = true;
      for (unsigned s = 0; s < k && distinct; ++s) {
        for (unsigned t = s + 1; t < k; ++t) {
          if (w[subset[s]] == w[subset[t]]) {
            distinct = false;
            break;
          }
        }
      }
      good += distinct;
    }
    if (worst.empty() || good < min_good) {
      min_good = good;
      worst = subset;
    }
  }
  r.enumeration_count = source.produced();
  r.max_deviation = ratio(size - min_good, size);
  r.pass = r.max_deviation <= epsilon;
  r.witness = subset_string(worst);
  r.extra.emplace_back("min_density", to_string(ratio(min_good, size)));
  r.extra.emplace_back("q", std::to_string(family.alphabet));
  r.extra.emplace_back("size", std::to_string(size));
  return r;
}

VerificationReport check_pair_collisions(const SampleMultiset& family, const Rational& bound,
                                         const VerifyOptions& options) {
  require_words(family);
  const std::size_t n = family.word_length;
  const std::uint64_t size = family.size();

  VerificationReport r;
  r.property = "pair collisions";
  r.threshold = bound;
  r.max_deviation = 0;
  if (n < 2) {
    r.pass = 0 <= bound;
    r.witness = "no pairs";
    return r;
  }
  require_budget(subset_work(n, 2, size, options), options.budget, "collision check");
  r.exhaustive = !options.sampled;

  std::uint64_t max_hits = 0;
  std::vector<std::uint32_t> worst;
  SubsetSource source(n, 2, options.sampled, options.seed);
  std::vector<std::uint32_t> pair;
  while (source.next(pair)) {
    std::uint64_t hits = 0;
    for (const Word& w : family.words) hits += w[pair[0]] == w[pair[1]];
    if (worst.empty() || hits > max_hits) {
      max_hits = hits;
      worst = pair;
    }
  }
  r.enumeration_count = source.produced();
  r.max_deviation = ratio(max_hits, size);
  r.pass = r.max_deviation <= bound;
  r.witness = subset_string(worst);
  r.extra.emplace_back("max_collisions", std::to_string(max_hits));
  r.extra.emplace_back("size", std::to_string(size));
  return r;
}

VerificationReport check_trace(const PotentialTrace& trace) {
  VerificationReport r;
  r.property = "potential trace";
  r.threshold = trace.slack.is_finite() ? trace.slack.to_rational() : Rational(0);
  r.max_deviation = 0;
  std::vector<std::string> failures;
  auto fail = [&](std::string reason) {
    if (failures.empty()) r.witness = reason;
    failures.push_back(std::move(reason));
  };

  if (!trace.slack.is_finite() || trace.slack < 0.0) fail("slack is negative or not finite");
  if (trace.steps.size() != trace.output_size) {
    fail("trace has " + std::to_string(trace.steps.size()) + " steps for output size " +
         std::to_string(trace.output_size));
  }

  BigFloat previous = trace.initial_potential.hi();
  bool have_increment = false;
  for (std::size_t j = 0; j < trace.steps.size(); ++j) {
    const TraceStep& step = trace.steps[j];
    if (step.index != j + 1) fail("step " + std::to_string(j + 1) + " has index " +
                                  std::to_string(step.index));
    const BigFloat& hi = step.potential.hi();
    if (!hi.is_finite()) {
      fail("step " + std::to_string(j + 1) + " has a non-finite bound");
      break;
    }
    const Rational increment = hi.to_rational() - previous.to_rational();
    if (!have_increment || increment > r.max_deviation) {
      r.max_deviation = increment;
      have_increment = true;
    }
    const BigFloat limit = numerics::add(previous, trace.slack, Round::Up);
    if (!(hi <= limit)) {
      fail("step " + std::to_string(j + 1) + ": bound " + hi.to_string(17, Round::Up) +
           " exceeds previous " + previous.to_string(17, Round::Up) + " plus slack");
    }
    previous = hi;
  }
  const bool final_below_one = previous < 1.0;
  if (!final_below_one) fail("final bound " + previous.to_string(17, Round::Up) + " is not below 1");
  r.enumeration_count = trace.steps.size();

  std::string targets = "skipped";
  if (!trace.final_counters.empty()) {
    if (trace.final_counters.size() != trace.constraint_count ||
        trace.class_of.size() != trace.constraint_count) {
      fail("final counters do not match the constraint count");
    } else {
      const Rational size = rational_of(trace.output_size);
      bool met = true;
      for (std::size_t i = 0; i < trace.final_counters.size() && met; ++i) {
        const ConstraintClass& c = trace.classes.at(trace.class_of[i]);
        const Rational z = rational_of(trace.final_counters[i]);
        const Rational target = c.lambda * size;
        met = c.direction == Direction::Lower ? z >= target : z <= target;
        if (!met) fail("constraint " + std::to_string(i) + " misses its target");
      }
      targets = met ? "true" : "false";
    }
  }

  std::string recomputed = "skipped";
  if (!trace.counters.empty()) {
    bool consistent = trace.counters.size() == trace.steps.size() &&
                      trace.class_of.size() == trace.constraint_count;
    for (std::size_t j = 0; j < trace.counters.size() && consistent; ++j) {
      const auto& row = trace.counters[j];
      if (row.size() != trace.constraint_count) {
        consistent = false;
        break;
      }
      for (std::size_t i = 0; i < row.size(); ++i) {
        const std::uint32_t before = j ? trace.counters[j - 1][i] : 0;
        if (row[i] < before || row[i] - before > 1) {
          consistent = false;
          break;
        }
      }
    }
    if (consistent && !trace.final_counters.empty() &&
        trace.final_counters != trace.counters.back()) {
      consistent = false;
    }
    if (!consistent) {
      fail("stored counters are inconsistent with the steps");
      recomputed = "false";
    } else {
      // Independent long-double evaluation of every potential from the counters.
      const long double size = static_cast<long double>(trace.output_size);
      std::vector<long double> base(trace.classes.size()), log_alpha(trace.classes.size()),
          log_gamma(trace.classes.size());
      for (std::size_t c = 0; c < trace.classes.size(); ++c) {
        const long double p = trace.classes[c].p.get_d();
        const long double l = trace.classes[c].lambda.get_d();
        const long double d = l * std::log(l / p) + (1 - l) * std::log((1 - l) / (1 - p));
        base[c] = -d * size;
        log_alpha[c] = std::log((1 - p) * l / (p * (1 - l)));
        log_gamma[c] = std::log((1 - l) / (1 - p));
      }
      constexpr long double kTolerance = 1e-9L;
      auto inside = [&](long double value, const numerics::Scalar& enclosure) {
        const long double lo = enclosure.lower();
        const long double hi = enclosure.upper();
        return value <= hi * (1 + kTolerance) + 1e-300L && value >= lo * (1 - kTolerance) - 1e-300L;
      };
      bool ok = true;
      long double initial = 0;
      for (std::size_t i = 0; i < trace.constraint_count; ++i) {
        initial += std::exp(base[trace.class_of[i]]);
      }
      if (!inside(initial, trace.initial_potential)) {
        ok = false;
        fail("initial potential does not match its recomputation");
      }
      for (std::size_t j = 0; j < trace.counters.size() && ok; ++j) {
        const long double t = static_cast<long double>(j + 1);
        long double value = 0;
        for (std::size_t i = 0; i < trace.constraint_count; ++i) {
          const std::uint32_t c = trace.class_of[i];
          value += std::exp(base[c] + t * log_gamma[c] + trace.counters[j][i] * log_alpha[c]);
        }
        if (!inside(value, trace.steps[j].potential)) {
          ok = false;
          fail("step " + std::to_string(j + 1) + ": recomputed potential lies outside the enclosure");
        }
      }
      recomputed = ok ? "true" : "false";
    }
  }

  r.pass = failures.empty();
  if (r.pass) r.witness = "none";
  r.extra.emplace_back("method", trace.method);
  r.extra.emplace_back("backend", trace.backend);
  r.extra.emplace_back("steps", std::to_string(trace.steps.size()));
  r.extra.emplace_back("initial_bound", trace.initial_potential.upper_string(12));
  r.extra.emplace_back("final_bound", previous.to_string(12, Round::Up));
  r.extra.emplace_back("final_below_one", final_below_one ? "true" : "false");
  r.extra.emplace_back("targets_met", targets);
  r.extra.emplace_back("recomputed", recomputed);
  r.extra.emplace_back("failures", std::to_string(failures.size()));
  return r;
}

}  // namespace derand
