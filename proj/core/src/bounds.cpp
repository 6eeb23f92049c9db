#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>

#include "derand/error.hpp"
#include "derand/verifier.hpp"

namespace derand {
namespace {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

std::string number(double value) {
  if (std::isnan(value)) return "n/a";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.6g", value);
  return buffer;
}

std::string pad(const std::string& text, std::size_t width) {
  return text.size() >= width ? text + " " : text + std::string(width - text.size(), ' ');
}

}  // namespace

LowerBoundReport lower_bound_report(std::size_t n, unsigned k, const Rational& epsilon,
                                    KwiseNorm norm, std::optional<std::uint64_t> achieved) {
  if (n < 2) throw ParameterError("n must be at least 2");
  if (epsilon <= 0) throw ParameterError("epsilon must be positive");

  LowerBoundReport r;
  r.n = n;
  r.k = k;
  r.epsilon = epsilon;
  r.norm = norm;
  r.achieved = achieved;

  const double log_n = std::log2(static_cast<double>(n));
  const double eps = epsilon.get_d();
  const double two_k = std::ldexp(1.0, static_cast<int>(k));
  const double e2 = eps * eps;
  const double e3 = e2 * eps;

  r.rows.push_back({"poly-time construction", log_n / (two_k * e3), two_k * two_k * log_n / e3,
                    (two_k + log_n) / e3});
  r.rows.push_back({"n^O(k)-time construction", log_n / (two_k * e2), two_k * log_n / e2,
                    (two_k + log_n) / e2});
  r.rows.push_back({"lower bound", log_n / (two_k * e2), two_k * log_n / e2, log_n / e2});

  const double lb1_log = std::log2(1.0 / (2.0 * two_k * eps));
  r.lb_linf = lb1_log > 0 ? log_n / (two_k * e2 * lb1_log) : kUndefined;
  const double lb2_log = std::log2(1.0 / eps);
  r.lb_l1 = lb2_log > 0 ? k * log_n / (e2 * lb2_log) : kUndefined;

  if (!(eps < 1.0 / (2.0 * two_k))) {
    r.warnings.push_back("linf lower bound assumes eps < 2^-(k+1)");
  }
  if (!(2.0 * k < static_cast<double>(n))) {
    r.warnings.push_back("linf lower bound assumes k < n/2");
  }
  r.warnings.push_back("linf lower bound assumes 1/poly(n) <= eps; the polynomial is unspecified "
                       "and not checked");
  if (!(eps > std::pow(static_cast<double>(n), -static_cast<double>(k) / 5.0))) {
    r.warnings.push_back("l1 lower bound assumes eps > n^(-k/5)");
  }
  if (norm == KwiseNorm::Linf && !(eps < 1.0 / two_k)) {
    r.warnings.push_back("additive linf closeness is only meaningful for eps < 2^-k");
  }
  if (norm != KwiseNorm::Linf && !(eps < 1.0)) {
    r.warnings.push_back("the expressions assume eps < 1");
  }
  return r;
}

std::string LowerBoundReport::to_table() const {
  std::ostringstream out;
  out << "Size expressions up to unspecified constants (log base 2)\n"
      << "n=" << n << " k=" << k << " eps=" << to_string(epsilon) << " (" << number(epsilon.get_d())
      << ") norm=" << derand::to_string(norm) << "\n\n";
  constexpr std::size_t kLabel = 28;
  constexpr std::size_t kCell = 14;
  out << pad("", kLabel) << pad("linf", kCell) << pad("linf*", kCell) << "l1\n";
  for (const BoundRow& row : rows) {
    out << pad(row.label, kLabel) << pad(number(row.linf), kCell)
        << pad(number(row.multiplicative), kCell) << number(row.l1) << '\n';
  }
  out << "\nlinf*: (1-eps)/2^k <= Pr[s_I = sigma] <= (1+eps)/2^k\n"
      << "linf lower bound  log n / (2^k eps^2 log(1/(2^(k+1) eps)))  = " << number(lb_linf)
      << '\n'
      << "l1 lower bound    k log n / (eps^2 log(1/eps))              = " << number(lb_l1)
      << '\n';
  if (achieved) {
    out << "achieved size (" << derand::to_string(norm) << ")  " << *achieved << '\n';
  }
  for (const std::string& w : warnings) out << "warning: " << w << '\n';
  return out.str();
}

std::string LowerBoundReport::to_key_value() const {
  std::ostringstream out;
  out << "n=" << n << '\n'
      << "k=" << k << '\n'
      << "eps=" << to_string(epsilon) << '\n'
      << "norm=" << derand::to_string(norm) << '\n'
      << "constants=unspecified\n";
  const char* keys[] = {"poly_time", "nok_time", "lower"};
  for (std::size_t i = 0; i < rows.size() && i < 3; ++i) {
    out << keys[i] << ".linf=" << number(rows[i].linf) << '\n'
        << keys[i] << ".linf_mult=" << number(rows[i].multiplicative) << '\n'
        << keys[i] << ".l1=" << number(rows[i].l1) << '\n';
  }
  out << "lb.linf=" << number(lb_linf) << '\n' << "lb.l1=" << number(lb_l1) << '\n';
  if (achieved) out << "achieved=" << *achieved << '\n';
  for (std::size_t i = 0; i < warnings.size(); ++i) {
    out << "warning." << i << '=' << warnings[i] << '\n';
  }
  return out.str();
}

}  // namespace derand
