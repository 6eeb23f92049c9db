#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "derand/constructions.hpp"
#include "derand/digest.hpp"
#include "derand/error.hpp"

namespace derand {

namespace {

std::vector<std::vector<std::uint32_t>> combinations(std::size_t n, unsigned k) {
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<std::uint32_t> c(k);
  for (unsigned i = 0; i < k; ++i) c[i] = i;
  while (true) {
    out.push_back(c);
    int i = static_cast<int>(k) - 1;
    while (i >= 0 && c[i] == n - k + i) --i;
    if (i < 0) break;
    ++c[i];
    for (unsigned j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
  }
  return out;
}

// C(n,k), or limit + 1 once it exceeds limit.
std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t limit) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  __extension__ unsigned __int128 value = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    value = value * (n - k + i) / i;
    if (value > limit) return limit + 1;
  }
  return static_cast<std::uint64_t>(value);
}

void check_budget(std::uint64_t value, std::uint64_t budget, const std::string& what) {
  if (value > budget) {
    throw BudgetExceeded(what + " exceeds the budget of " + std::to_string(budget) +
                         "; raise DERAND_BUDGET to allow it");
  }
}

// Constraints attached to each k-subset, laid out contiguously per subset.
class SubsetSpace : public ProductSpace {
 public:
  SubsetSpace(std::size_t n, unsigned k, std::size_t per_subset)
      : n_(n), k_(k), per_subset_(per_subset), subsets_(combinations(n, k)), deps_(n) {
    for (std::size_t s = 0; s < subsets_.size(); ++s) {
      for (std::uint32_t coord : subsets_[s]) {
        for (std::size_t c = 0; c < per_subset_; ++c) {
          deps_[coord].push_back(static_cast<std::uint32_t>(s * per_subset_ + c));
        }
      }
    }
  }

  std::size_t coordinate_count() const override { return n_; }
  std::uint32_t domain_size(std::size_t) const override { return 2; }
  std::size_t constraint_count() const override { return subsets_.size() * per_subset_; }
  void dependents(std::size_t coordinate, std::vector<std::uint32_t>& out) const override {
    out = deps_[coordinate];
  }

 protected:
  // Bits of the subset fixed by the prefix, first subset coordinate most significant.
  struct Fixed {
    unsigned count = 0;
    std::uint32_t mask = 0;
    std::uint32_t value = 0;
  };

  Fixed fixed_bits(std::size_t subset, std::span<const Symbol> prefix) const {
    Fixed f;
    const auto& s = subsets_[subset];
    for (unsigned t = 0; t < k_ && s[t] < prefix.size(); ++t) {
      const std::uint32_t bit = 1u << (k_ - 1 - t);
      f.mask |= bit;
      if (prefix[s[t]]) f.value |= bit;
      ++f.count;
    }
    return f;
  }

  std::size_t n_;
  unsigned k_;
  std::size_t per_subset_;
  std::vector<std::vector<std::uint32_t>> subsets_;
  std::vector<std::vector<std::uint32_t>> deps_;
};

// [s_I = xi] for every subset I and pattern xi, each with a lower and an upper side.
class PatternSpace final : public SubsetSpace {
 public:
  PatternSpace(std::size_t n, unsigned k) : SubsetSpace(n, k, std::size_t{2} << k) {}

  Fraction conditional_mean(std::size_t constraint,
                            std::span<const Symbol> prefix) const override {
    const std::size_t subset = constraint / per_subset_;
    const std::uint32_t xi = static_cast<std::uint32_t>((constraint % per_subset_) / 2);
    const Fixed f = fixed_bits(subset, prefix);
    if ((xi & f.mask) != f.value) return Fraction::zero();
    return Fraction::of(1, std::uint64_t{1} << (k_ - f.count));
  }
};

struct GroupedConstraint {
  std::uint32_t a;     // prefix pattern on the first r subset coordinates
  std::uint32_t set;   // bitmask over patterns of the last k - r coordinates
};

// [s_I in {a} x B] with the per-subset constraint list shared by every subset.
class GroupedSpace final : public SubsetSpace {
 public:
  GroupedSpace(std::size_t n, unsigned k, unsigned r, std::vector<GroupedConstraint> layout)
      : SubsetSpace(n, k, layout.size()), r_(r), layout_(std::move(layout)) {}

  Fraction conditional_mean(std::size_t constraint,
                            std::span<const Symbol> prefix) const override {
    const std::size_t subset = constraint / per_subset_;
    const GroupedConstraint& g = layout_[constraint % per_subset_];
    const Fixed f = fixed_bits(subset, prefix);
    const unsigned tail = k_ - r_;
    const std::uint32_t tail_mask = (1u << tail) - 1;
    const std::uint32_t head_mask = f.mask >> tail;
    if (((g.a ^ (f.value >> tail)) & head_mask) != 0) return Fraction::zero();
    const std::uint32_t fixed_mask = f.mask & tail_mask;
    const std::uint32_t fixed_value = f.value & tail_mask;
    std::uint64_t hits = 0;
    for (std::uint32_t b = 0; b <= tail_mask; ++b) {
      if ((g.set >> b & 1u) && (b & fixed_mask) == fixed_value) ++hits;
    }
    return Fraction::of(static_cast<std::int64_t>(hits), std::uint64_t{1} << (k_ - f.count));
  }

 private:
  unsigned r_;
  std::vector<GroupedConstraint> layout_;
};

std::map<std::string, std::string> kwise_provenance(const KwiseParams& p) {
  std::map<std::string, std::string> out = {{"n", std::to_string(p.n)},
                                            {"k", std::to_string(p.k)},
                                            {"eps", to_string(p.epsilon)},
                                            {"norm", to_string(p.norm)}};
  if (p.norm == Norm::L1) out["r"] = std::to_string(p.resolved_r());
  if (p.multiplicative) out["multiplicative"] = "1";
  return out;
}

std::uint64_t ceil_of(const Rational& x) {
  mpz_class c;
  mpz_cdiv_q(c.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  if (!c.fits_ulong_p()) throw ParameterError("alphabet size does not fit in 64 bits");
  return c.get_ui();
}

std::uint64_t floor_of(const Rational& x) {
  mpz_class c;
  mpz_fdiv_q(c.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  if (!c.fits_ulong_p()) throw ParameterError("alphabet size does not fit in 64 bits");
  return c.get_ui();
}

}  // namespace

std::string to_string(Norm norm) { return norm == Norm::Linf ? "linf" : "l1"; }

void KwiseParams::validate() const {
  if (k == 0) throw ParameterError("k must be at least 1");
  if (k > n) throw ParameterError("k must not exceed n");
  if (k > 20) throw ParameterError("k above 20 is not supported");
  if (!(epsilon > 0 && epsilon < 1)) {
    throw ParameterError("epsilon must lie in (0,1), got " + to_string(epsilon));
  }
  if (!(d > 0)) throw ParameterError("d must be positive");
  if (norm == Norm::Linf && !multiplicative && !(epsilon * (std::uint64_t{1} << k) < 1)) {
    throw ParameterError("Linf construction needs eps < 1/2^k");
  }
  if (norm == Norm::L1 && multiplicative) {
    throw ParameterError("multiplicative targets apply to the Linf norm only");
  }
  if (norm == Norm::L1 && r && *r >= k) throw ParameterError("r must satisfy 0 <= r < k");
}

unsigned KwiseParams::resolved_r() const {
  if (r) return *r;
  const double log_n = n > 1 ? std::log2(static_cast<double>(n)) : 0.0;
  const double loglog = log_n > 1.0 ? std::log2(log_n) : 0.0;
  const double x = static_cast<double>(k) - loglog - std::log2(d);
  const double c = std::max(std::ceil(x), 0.0);
  return static_cast<unsigned>(std::min<double>(c, k - 1));
}

ConstraintProblem kwise_direct_problem(const KwiseParams& params, std::uint64_t budget) {
  params.validate();
  if (params.norm != Norm::Linf) throw ParameterError("direct builder is for the Linf norm");
  const std::uint64_t per_subset = std::uint64_t{2} << params.k;
  check_budget(binomial_capped(params.n, params.k, budget / per_subset), budget / per_subset,
               "C(n,k) * 2^(k+1) constraints");

  const Rational p(1, std::uint64_t{1} << params.k);
  const Rational lower = params.multiplicative ? Rational((1 - params.epsilon) * p)
                                               : Rational(p - params.epsilon);
  const Rational upper = params.multiplicative ? Rational((1 + params.epsilon) * p)
                                               : Rational(p + params.epsilon);
  ConstraintProblem problem;
  problem.space = std::make_unique<PatternSpace>(params.n, params.k);
  const std::size_t count = problem.space->constraint_count();
  problem.constraints.reserve(count);
  for (std::uint64_t id = 0; id < count; id += 2) {
    problem.constraints.push_back({id, p, lower, Direction::Lower});
    problem.constraints.push_back({id + 1, p, upper, Direction::Upper});
  }
  return problem;
}

ConstraintProblem kwise_l1_problem(const KwiseParams& params, std::uint64_t budget) {
  params.validate();
  if (params.norm != Norm::L1) throw ParameterError("grouped builder is for the L1 norm");
  const unsigned r = params.resolved_r();
  const unsigned tail = params.k - r;
  if (tail > 4) {
    throw BudgetExceeded("k - r = " + std::to_string(tail) +
                         " needs 2^(2^(k-r)) subsets per prefix; choose r >= k - 4");
  }
  const std::uint32_t patterns = 1u << tail;
  const std::uint32_t sets = 1u << patterns;
  const Rational half_width = params.epsilon / Rational(std::uint64_t{2} << r);
  const Rational cube(std::uint64_t{1} << params.k);

  std::vector<GroupedConstraint> layout;
  std::vector<ConstraintSpec> specs;  // per subset, ids filled in below
  for (std::uint32_t a = 0; a < (1u << r); ++a) {
    for (std::uint32_t set = 1; set < sets; ++set) {
      const Rational p = Rational(std::popcount(set)) / cube;
      if (p == 1) continue;
      const Rational lower = p - half_width;
      const Rational upper = p + half_width;
      if (lower > 0) {
        layout.push_back({a, set});
        specs.push_back({0, p, lower, Direction::Lower});
      }
      if (upper < 1) {
        layout.push_back({a, set});
        specs.push_back({0, p, upper, Direction::Upper});
      }
    }
  }
  if (layout.empty()) throw ParameterError("every constraint is vacuous at this epsilon");
  check_budget(binomial_capped(params.n, params.k, budget / layout.size()),
               budget / layout.size(), "grouped L1 constraint count");

  ConstraintProblem problem;
  problem.space = std::make_unique<GroupedSpace>(params.n, params.k, r, layout);
  const std::size_t subsets = problem.space->constraint_count() / layout.size();
  problem.constraints.reserve(subsets * layout.size());
  std::uint64_t id = 0;
  for (std::size_t s = 0; s < subsets; ++s) {
    for (const auto& spec : specs) {
      ConstraintSpec c = spec;
      c.id = id++;
      problem.constraints.push_back(std::move(c));
    }
  }
  return problem;
}

BuildResult build_kwise_direct(const KwiseParams& params, const BuildOptions& options) {
  BuildResult out = solve(kwise_direct_problem(params, options.budget), options);
  out.sample.provenance.construction = "kwise";
  out.sample.provenance.params = kwise_provenance(params);
  out.sample.provenance.trace_digest = out.traces.front().digest();
  return out;
}

BuildResult build_kwise_l1(const KwiseParams& params, const BuildOptions& options) {
  BuildResult out = solve(kwise_l1_problem(params, options.budget), options);
  out.sample.provenance.construction = "kwise";
  out.sample.provenance.params = kwise_provenance(params);
  out.sample.provenance.trace_digest = out.traces.front().digest();
  return out;
}

SampleMultiset nn_reduce(const SampleMultiset& bias_set, std::size_t n, unsigned k) {
  bias_set.validate();
  if (bias_set.alphabet != 2) throw ParameterError("length reduction needs a binary input set");
  if (k < 3 || k % 2 == 0) throw ParameterError("k must be odd and at least 3");
  if (n == 0) throw ParameterError("n must be at least 1");
  const std::size_t m = bias_set.word_length;
  if (m == 0) throw ParameterError("input words are empty");
  const std::size_t t = std::min<std::size_t>(2 * (m - 1) / (k - 1), 16);
  if (t == 0 || n > (std::size_t{1} << t) - 1) {
    throw ParameterError("need n <= 2^floor(2(m-1)/(k-1)) - 1; got n=" + std::to_string(n) +
                         " with m=" + std::to_string(m) + ", k=" + std::to_string(k));
  }
  const BchColumnSet columns = bch_columns(static_cast<unsigned>(t), k);

  SampleMultiset out;
  out.alphabet = 2;
  out.word_length = n;
  out.words.reserve(bias_set.size());
  for (const Word& s : bias_set.words) {
    Word w(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::uint32_t parity = 0;
      const auto& col = columns.columns[j];
      for (std::size_t b = 0; b < columns.m; ++b) parity ^= col[b] & s[b];
      w[j] = parity;
    }
    out.words.push_back(std::move(w));
  }
  out.provenance.construction = "nn_reduce";
  out.provenance.params = {{"n", std::to_string(n)},
                           {"k", std::to_string(k)},
                           {"t", std::to_string(t)},
                           {"m", std::to_string(m)}};
  out.provenance.trace_digest = bias_set.provenance.trace_digest;
  return out;
}

std::uint64_t polytime_alphabet(const KwiseParams& params) {
  params.validate();
  const Rational k(params.k);
  std::uint64_t q = 0;
  if (params.norm == Norm::Linf) {
    const Rational ratio = k / params.epsilon;
    q = ceil_of(Rational(ratio * ratio * ratio));
  } else {
    const double base = std::pow(2.0, std::ldexp(1.0, static_cast<int>(params.k)) / params.k) *
                        params.k * params.k / params.epsilon.get_d();
    if (!(base < 4.0e9)) throw ParameterError("composition alphabet exceeds 2^32");
    q = static_cast<std::uint64_t>(std::ceil(base));
  }
  // The hash family at eps/4 needs q > 4k^2/(eps/4).
  q = std::max(q, floor_of(Rational(16 * k * k / params.epsilon)) + 1);
  if (q > std::numeric_limits<std::uint32_t>::max()) {
    throw ParameterError("composition alphabet exceeds 2^32");
  }
  return q;
}

BuildResult build_kwise_polytime(const KwiseParams& params, const PolytimeOptions& options) {
  params.validate();
  const std::uint64_t q = polytime_alphabet(params);
  if (!options.force_composition && params.n <= q) {
    return params.norm == Norm::Linf ? build_kwise_direct(params, options.build)
                                     : build_kwise_l1(params, options.build);
  }
  const Rational quarter = params.epsilon / 4;
  BuildResult hash = build_phf(PhfParams{params.n, q, params.k, quarter}, options.build);
  KwiseParams inner_params = params;
  inner_params.n = q;
  inner_params.epsilon = quarter;
  inner_params.r.reset();
  BuildResult inner = inner_params.norm == Norm::Linf
                          ? build_kwise_direct(inner_params, options.build)
                          : build_kwise_l1(inner_params, options.build);

  BuildResult out;
  out.sample = compose(hash.sample, inner.sample);
  out.size_bound = hash.size_bound * inner.size_bound;
  out.constraint_count = hash.constraint_count + inner.constraint_count;
  for (auto& t : hash.traces) out.traces.push_back(std::move(t));
  for (auto& t : inner.traces) out.traces.push_back(std::move(t));
  out.sample.provenance.construction = "kwise";
  out.sample.provenance.params = kwise_provenance(params);
  out.sample.provenance.params["q"] = std::to_string(q);
  out.sample.provenance.params["branch"] = "composed";
  std::string digests;
  for (const auto& t : out.traces) digests += t.digest();
  out.sample.provenance.trace_digest = sha256_hex(digests);
  return out;
}

}  // namespace derand
