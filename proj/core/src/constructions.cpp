#include "derand/constructions.hpp"

#include <charconv>
#include <limits>
#include <cstdlib>
#include <string>
#include <string_view>

#include "derand/error.hpp"

namespace derand {

namespace {

// [<v, w> = xi] for every canonical v; coordinate j is the j-th message symbol.
class LinearFormSpace final : public ProductSpace {
 public:
  LinearFormSpace(Field field, std::size_t k, std::vector<Word> forms)
      : field_(std::move(field)), k_(k), forms_(std::move(forms)),
        inv_q_(Fraction::of(1, field_.order())), deps_(k) {
    last_.reserve(forms_.size());
    const std::uint64_t q = field_.order();
    for (std::size_t f = 0; f < forms_.size(); ++f) {
      std::size_t last = 0;
      for (std::size_t j = 0; j < k_; ++j) {
        if (forms_[f][j] != 0) last = j;
      }
      last_.push_back(last);
      for (std::uint64_t c = 0; c < 2 * q; ++c) {
        deps_[last].push_back(static_cast<std::uint32_t>(f * 2 * q + c));
      }
    }
  }

  std::size_t coordinate_count() const override { return k_; }
  std::uint32_t domain_size(std::size_t) const override {
    return static_cast<std::uint32_t>(field_.order());
  }
  std::size_t constraint_count() const override { return forms_.size() * 2 * field_.order(); }

  Fraction conditional_mean(std::size_t constraint,
                            std::span<const Symbol> prefix) const override {
    const std::uint64_t q = field_.order();
    const std::size_t f = constraint / (2 * q);
    const Symbol xi = static_cast<Symbol>((constraint / 2) % q);
    const std::size_t last = last_[f];
    if (prefix.size() <= last) return inv_q_;
    const Word& v = forms_[f];
    Symbol acc = 0;
    for (std::size_t j = 0; j <= last; ++j) {
      if (v[j] != 0) acc = field_.add(acc, field_.mul(v[j], prefix[j]));
    }
    return acc == xi ? Fraction::one() : Fraction::zero();
  }

  void dependents(std::size_t coordinate, std::vector<std::uint32_t>& out) const override {
    out = deps_[coordinate];
  }

 private:
  Field field_;
  std::size_t k_;
  std::vector<Word> forms_;
  std::vector<std::size_t> last_;
  Fraction inv_q_;
  std::vector<std::vector<std::uint32_t>> deps_;
};

// [s_i = s_j] over [q]^n for every pair i < j.
class PairCollisionSpace final : public ProductSpace {
 public:
  PairCollisionSpace(std::size_t n, std::uint64_t q)
      : n_(n), q_(q), inv_q_(Fraction::of(1, q)), deps_(n) {
    for (std::size_t j = 1; j < n; ++j) {
      for (std::size_t i = 0; i < j; ++i) {
        deps_[j].push_back(static_cast<std::uint32_t>(pairs_.size()));
        pairs_.push_back({i, j});
      }
    }
  }

  std::size_t coordinate_count() const override { return n_; }
  std::uint32_t domain_size(std::size_t) const override { return static_cast<std::uint32_t>(q_); }
  std::size_t constraint_count() const override { return pairs_.size(); }

  Fraction conditional_mean(std::size_t constraint,
                            std::span<const Symbol> prefix) const override {
    const auto [i, j] = pairs_[constraint];
    if (prefix.size() <= j) return inv_q_;
    return prefix[i] == prefix[j] ? Fraction::one() : Fraction::zero();
  }

  void dependents(std::size_t coordinate, std::vector<std::uint32_t>& out) const override {
    out = deps_[coordinate];
  }

 private:
  std::size_t n_;
  std::uint64_t q_;
  Fraction inv_q_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<std::vector<std::uint32_t>> deps_;
};

void check_budget(std::uint64_t value, std::uint64_t budget, const std::string& what) {
  if (value > budget) {
    throw BudgetExceeded(what + " (" + std::to_string(value) + ") exceeds the budget of " +
                         std::to_string(budget) + "; raise DERAND_BUDGET to allow it");
  }
}

// Number of canonical forms (q^k - 1)/(q - 1), or budget + 1 if it would exceed it.
std::uint64_t canonical_form_count(std::uint64_t q, std::size_t k, std::uint64_t budget) {
  std::uint64_t total = 0;
  std::uint64_t layer = 1;
  for (std::size_t j = 0; j < k; ++j) {
    total += layer;
    if (total > budget) return budget + 1;
    if (j + 1 < k) {
      if (layer > budget / q) return budget + 1;
      layer *= q;
    }
  }
  return total;
}

std::string rational_param(const Rational& value) { return to_string(value); }

}  // namespace

std::uint64_t budget_from_environment(std::uint64_t fallback) {
  const char* raw = std::getenv("DERAND_BUDGET");
  if (raw == nullptr || *raw == '\0') return fallback;
  const std::string_view text(raw);
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || value == 0) {
    throw ParameterError("DERAND_BUDGET must be a positive integer, got '" + std::string(text) +
                         "'");
  }
  return value;
}

BuildResult solve(const ConstraintProblem& problem, const BuildOptions& options) {
  const ProductSpace& space = *problem.space;
  check_budget(problem.constraints.size(), options.budget, "constraint count");
  std::uint64_t scan = 0;
  for (std::size_t j = 0; j < space.coordinate_count(); ++j) scan += space.domain_size(j);
  check_budget(scan, options.budget, "symbols scanned per pick");

  DerandomizedSample result;
  if (options.enumerate) {
    const ProductEnumeration enumeration(space, options.budget);
    result = derandomize_enumerated(enumeration, problem.constraints, options.derandomizer);
  } else {
    result = derandomize_conditional(space, problem.constraints, options.derandomizer);
  }
  BuildResult out;
  out.constraint_count = problem.constraints.size();
  if (options.derandomizer.m) {
    const ConstraintSystem system(problem.constraints);
    out.size_bound = numerics::required_sample_size(system.divergence_classes(),
                                                    options.derandomizer.m_cap) +
                     1;
  } else {
    out.size_bound = result.trace.sizing_m + 1;
  }
  out.sample = std::move(result.sample);
  out.traces.push_back(std::move(result.trace));
  return out;
}

ConstraintProblem balanced_code_problem(std::uint64_t q, std::size_t k, const Rational& epsilon,
                                        std::uint64_t budget) {
  Field field = Field::from_order(q);
  if (k == 0) throw ParameterError("k must be at least 1");
  if (!(epsilon > 0 && epsilon <= Rational(1, 2))) {
    throw ParameterError("epsilon must lie in (0, 1/2], got " + to_string(epsilon));
  }
  const std::uint64_t forms = canonical_form_count(q, k, budget);
  if (forms > budget / (2 * q)) {
    throw BudgetExceeded("balanced code with q=" + std::to_string(q) + ", k=" + std::to_string(k) +
                         " needs more than " + std::to_string(budget) +
                         " constraints; raise DERAND_BUDGET to allow it");
  }

  std::vector<Word> vs;
  vs.reserve(forms);
  for (std::size_t j = 0; j < k; ++j) {
    Word v(k, 0);
    v[j] = 1;
    // Enumerate v_0..v_{j-1} lexicographically, first coordinate most significant.
    while (true) {
      vs.push_back(v);
      std::size_t pos = j;
      while (pos > 0 && v[pos - 1] == q - 1) v[--pos] = 0;
      if (pos == 0) break;
      ++v[pos - 1];
    }
  }

  ConstraintProblem problem;
  const Rational p(1, q);
  const Rational lower = (1 - epsilon) * p;
  const Rational upper = (1 + epsilon) * p;
  problem.constraints.reserve(vs.size() * 2 * q);
  std::uint64_t id = 0;
  for (std::size_t f = 0; f < vs.size(); ++f) {
    for (std::uint64_t xi = 0; xi < q; ++xi) {
      problem.constraints.push_back({id++, p, lower, Direction::Lower});
      problem.constraints.push_back({id++, p, upper, Direction::Upper});
    }
  }
  problem.space = std::make_unique<LinearFormSpace>(std::move(field), k, std::move(vs));
  return problem;
}

CodeBuild build_balanced_code(std::uint64_t q, std::size_t k, const Rational& epsilon,
                              const BuildOptions& options) {
  const ConstraintProblem problem = balanced_code_problem(q, k, epsilon, options.budget);
  CodeBuild out{LinearCode{Field::from_order(q), k, {}}, solve(problem, options)};
  out.build.sample.provenance.construction = "code";
  out.build.sample.provenance.params = {
      {"q", std::to_string(q)}, {"k", std::to_string(k)}, {"eps", rational_param(epsilon)}};
  out.build.sample.provenance.trace_digest = out.build.traces.front().digest();
  out.code.rows = out.build.sample.words;
  return out;
}

BuildResult build_bias_set(std::size_t n, const Rational& epsilon, const BuildOptions& options) {
  if (n == 0) throw ParameterError("n must be at least 1");
  CodeBuild code = build_balanced_code(2, n, epsilon, options);
  BuildResult out = std::move(code.build);
  out.sample.provenance.construction = "bias";
  out.sample.provenance.params = {{"n", std::to_string(n)}, {"eps", rational_param(epsilon)}};
  return out;
}

void PhfParams::validate() const {
  if (n == 0) throw ParameterError("n must be at least 1");
  if (k == 0) throw ParameterError("k must be at least 1");
  if (q < 2) throw ParameterError("q must be at least 2");
  if (q > std::numeric_limits<std::uint32_t>::max()) throw ParameterError("q too large");
  if (!(epsilon > 0 && epsilon < 1)) {
    throw ParameterError("epsilon must lie in (0,1), got " + to_string(epsilon));
  }
  const Rational kk = rational_of(std::uint64_t{k} * k);
  if (!(rational_of(q) * epsilon > 4 * kk)) {
    throw ParameterError("need q > 4k^2/eps; q=" + std::to_string(q) + " k=" + std::to_string(k) +
                         " eps=" + to_string(epsilon));
  }
}

std::uint64_t PhfParams::h() const {
  const Rational ratio = rational_of(std::uint64_t{k} * k) / epsilon;
  mpz_class ceil_value;
  mpz_cdiv_q(ceil_value.get_mpz_t(), ratio.get_num_mpz_t(), ratio.get_den_mpz_t());
  return ceil_value.get_ui();
}

ConstraintProblem phf_problem(const PhfParams& params, std::uint64_t budget) {
  params.validate();
  const std::uint64_t pairs = params.n * (params.n - 1) / 2;
  check_budget(pairs, budget, "pair constraint count");
  ConstraintProblem problem;
  const Rational p(1, params.q);
  const Rational lambda(1, params.h());
  for (std::uint64_t id = 0; id < pairs; ++id) {
    problem.constraints.push_back({id, p, lambda, Direction::Upper});
  }
  problem.space = std::make_unique<PairCollisionSpace>(params.n, params.q);
  return problem;
}

BuildResult build_phf(const PhfParams& params, const BuildOptions& options) {
  params.validate();
  BuildResult out;
  if (params.k == 1 || params.n == 1) {
    // No pair needs separating: one word already has density 1.
    out.sample.alphabet = static_cast<std::uint32_t>(params.q);
    out.sample.word_length = params.n;
    out.sample.words.assign(1, Word(params.n, 0));
    out.size_bound = 1;
  } else {
    out = solve(phf_problem(params, options.budget), options);
    out.sample.provenance.trace_digest = out.traces.front().digest();
  }
  out.sample.provenance.construction = "phf";
  out.sample.provenance.params = {{"n", std::to_string(params.n)},
                                  {"q", std::to_string(params.q)},
                                  {"k", std::to_string(params.k)},
                                  {"eps", rational_param(params.epsilon)}};
  return out;
}

SampleMultiset compose(const SampleMultiset& phf, const SampleMultiset& inner) {
  phf.validate();
  inner.validate();
  if (inner.word_length != phf.alphabet) {
    throw DimensionMismatch("inner words have length " + std::to_string(inner.word_length) +
                            " but the hash family maps into [" + std::to_string(phf.alphabet) +
                            "]");
  }
  SampleMultiset out;
  out.alphabet = inner.alphabet;
  out.word_length = phf.word_length;
  out.words.reserve(phf.size() * inner.size());
  for (const Word& u : phf.words) {
    for (const Word& v : inner.words) {
      Word w(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) w[i] = v[u[i]];
      out.words.push_back(std::move(w));
    }
  }
  out.provenance.construction = "compose";
  out.provenance.params = {{"outer", std::to_string(phf.size())},
                           {"inner", std::to_string(inner.size())}};
  return out;
}

}  // namespace derand
