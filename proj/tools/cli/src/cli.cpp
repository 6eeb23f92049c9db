#include "derand/cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "derand/cli/format.hpp"
#include "derand/constructions.hpp"
#include "derand/digest.hpp"
#include "derand/error.hpp"
#include "derand/verifier.hpp"
#include "derand/version.hpp"

namespace derand::cli {
namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct EngineFlags {
  std::string out;
  std::string trace;
  std::uint64_t budget = 0;
  std::uint64_t m = 0;
  bool enumerate = false;
  bool minimize = false;
  std::string backend = "auto";
  unsigned max_bits = 1u << 14;
  CLI::Option* budget_option = nullptr;
  CLI::Option* m_option = nullptr;
};

struct BiasFlags {
  std::size_t n = 0;
  std::string eps;
};

struct KwiseFlags {
  std::size_t n = 0;
  unsigned k = 0;
  std::string eps;
  std::string norm = "linf";
  unsigned r = 0;
  double d = 1.0;
  bool multiplicative = false;
  bool polytime = false;
  bool force_composition = false;
  CLI::Option* r_option = nullptr;
};

struct PhfFlags {
  std::size_t n = 0;
  std::uint64_t q = 0;
  unsigned k = 0;
  std::string eps;
};

struct CodeFlags {
  std::uint64_t q = 0;
  std::size_t k = 0;
  std::string eps;
};

struct VerifyFlags {
  std::string kind;
  std::string in;
  std::string eps;
  unsigned k = 0;
  std::string norm;
  std::string collision_bound;
  bool collisions = false;
  std::string format = "table";
  std::uint64_t budget = 0;
  std::uint64_t sampled = 0;
  std::uint64_t seed = 1;
  CLI::Option* eps_option = nullptr;
  CLI::Option* k_option = nullptr;
  CLI::Option* norm_option = nullptr;
  CLI::Option* bound_option = nullptr;
  CLI::Option* budget_option = nullptr;
  CLI::Option* sampled_option = nullptr;
};

struct ComposeFlags {
  std::string phf;
  std::string inner;
  std::string out;
};

struct BoundsFlags {
  std::size_t n = 0;
  unsigned k = 0;
  std::string eps;
  std::string norm = "linf";
  std::uint64_t achieved = 0;
  std::string format = "table";
  CLI::Option* achieved_option = nullptr;
};

struct ReplayFlags {
  std::string manifest;
  std::string out;
};

struct Construction {
  std::string kind;
  BuildResult build;
};

void add_engine_flags(CLI::App* app, EngineFlags& f, const std::string& default_out) {
  f.out = default_out;
  app->add_option("--out,-o", f.out, "Output sample file; a .manifest sidecar is written next to it")
      ->capture_default_str();
  app->add_option("--trace", f.trace, "Write the potential trace to this file");
  f.budget_option =
      app->add_option("--budget", f.budget, "Cap on constraints and per-pick work (env DERAND_BUDGET)");
  f.m_option = app->add_option("--m", f.m, "Sizing parameter m; the output has m + 1 elements");
  app->add_flag("--enumerate", f.enumerate, "Scan the whole product space at each pick");
  app->add_flag("--minimize", f.minimize, "Pick the candidate with the smallest potential");
  app->add_option("--backend", f.backend, "Arithmetic backend")
      ->check(CLI::IsMember({"auto", "double", "mpfr"}))
      ->capture_default_str();
  app->add_option("--max-bits", f.max_bits, "Highest MPFR precision tried")->capture_default_str();
}

BuildOptions build_options(const EngineFlags& f) {
  BuildOptions o;
  o.budget = f.budget_option->count() ? f.budget : budget_from_environment();
  if (o.budget == 0) throw UsageError("--budget must be positive");
  o.enumerate = f.enumerate;
  if (f.m_option->count()) o.derandomizer.m = f.m;
  o.derandomizer.minimize = f.minimize;
  o.derandomizer.max_bits = f.max_bits;
  if (f.backend == "double") {
    o.derandomizer.backend = Backend::Fast;
  } else if (f.backend == "mpfr") {
    o.derandomizer.backend = Backend::Multiprecision;
  }
  return o;
}

std::uint64_t verify_budget(const CLI::Option* option, std::uint64_t value) {
  const std::uint64_t budget =
      option && option->count() ? value : budget_from_environment(kDefaultVerifyBudget);
  if (budget == 0) throw UsageError("--budget must be positive");
  return budget;
}

Norm parse_norm(const std::string& text) {
  if (text == "linf") return Norm::Linf;
  if (text == "l1") return Norm::L1;
  throw UsageError("unknown norm '" + text + "'");
}

KwiseNorm parse_kwise_norm(const std::string& text) {
  if (text == "linf") return KwiseNorm::Linf;
  if (text == "l1") return KwiseNorm::L1;
  if (text == "multiplicative") return KwiseNorm::Multiplicative;
  throw UsageError("unknown norm '" + text + "'");
}

std::string trace_header(const PotentialTrace& t, std::size_t index) {
  std::ostringstream out;
  out << "# trace " << index << " method=" << t.method << " backend=" << t.backend
      << " bits=" << t.precision_bits_used << " m=" << t.sizing_m << " size=" << t.output_size
      << " constraints=" << t.constraint_count << " slack=" << t.slack.to_string(12)
      << " initial=" << t.initial_potential.upper_string(12) << '\n';
  return out.str();
}

std::string trace_text(const std::vector<PotentialTrace>& traces) {
  std::string out;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const PotentialTrace& t = traces[i];
    out += trace_header(t, i);
    out += t.dump();
    if (!t.counters.empty()) {
      out += "# counters\n";
      for (const auto& row : t.counters) {
        for (std::size_t c = 0; c < row.size(); ++c) {
          if (c) out += ' ';
          out += std::to_string(row[c]);
        }
        out += '\n';
      }
    }
  }
  return out;
}

int finish_construction(const Construction& c, const EngineFlags& f,
                        const std::vector<std::string>& args, double seconds, std::ostream& out) {
  bool traces_ok = true;
  std::vector<VerificationReport> checks;
  for (const PotentialTrace& t : c.build.traces) {
    checks.push_back(check_trace(t));
    traces_ok = traces_ok && checks.back().pass;
  }

  const std::string text = serialize_sample(c.build.sample, c.kind);
  write_file(f.out, text);

  RunManifest manifest;
  manifest.command = args;
  manifest.kind = c.kind;
  manifest.params = c.build.sample.provenance.params;
  manifest.version = std::string(library_version());
  manifest.output = f.out;
  manifest.output_sha256 = sha256_hex(text);
  manifest.wall_time_seconds = seconds;
  manifest.size = c.build.sample.size();
  manifest.size_bound = c.build.size_bound;
  for (const PotentialTrace& t : c.build.traces) manifest.trace_digests.push_back(t.digest());
  write_file(manifest_path(f.out), manifest.serialize());
  if (!f.trace.empty()) write_file(f.trace, trace_text(c.build.traces));

  out << "kind=" << c.kind << '\n'
      << "size=" << manifest.size << '\n'
      << "size_bound=" << manifest.size_bound << '\n'
      << "constraints=" << c.build.constraint_count << '\n'
      << "output=" << f.out << '\n'
      << "sha256=" << manifest.output_sha256 << '\n';
  for (std::size_t i = 0; i < checks.size(); ++i) {
    out << "trace." << i << '=' << (checks[i].pass ? "PASS" : "FAIL")
        << " method=" << c.build.traces[i].method << " backend=" << c.build.traces[i].backend
        << " final_bound=" << checks[i].get("final_bound") << '\n';
    if (!checks[i].pass) out << "trace." << i << ".failure=" << checks[i].witness << '\n';
  }
  return traces_ok ? kExitOk : kExitInternal;
}

std::string lookup(const std::map<std::string, std::string>& params, const std::string& key,
                   const std::string& flag) {
  const auto it = params.find(key);
  if (it == params.end()) {
    throw UsageError(flag + " is required (the input file does not record '" + key + "')");
  }
  return it->second;
}

unsigned parse_unsigned_param(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<unsigned>(v);
  } catch (const std::exception&) {
    throw ParseError("bad " + what + " '" + text + "'");
  }
}

void print_report(const VerificationReport& r, const std::string& format, std::ostream& out) {
  out << (format == "kv" ? r.to_key_value() : r.to_table());
}

int run_verify(const VerifyFlags& f, std::ostream& out) {
  const SampleFile file = read_sample_file(f.in);
  VerifyOptions options;
  options.budget = verify_budget(f.budget_option, f.budget);
  if (f.sampled_option->count()) {
    if (f.sampled == 0) throw UsageError("--sampled must be positive");
    options.sampled = f.sampled;
  }
  options.seed = f.seed;

  auto epsilon = [&] {
    return parse_rational(f.eps_option->count() ? f.eps : lookup(file.params, "eps", "--eps"));
  };
  auto order = [&] {
    return f.k_option->count() ? f.k : parse_unsigned_param(lookup(file.params, "k", "--k"), "k");
  };

  std::vector<VerificationReport> reports;
  if (f.kind == "bias") {
    reports.push_back(check_bias(file.set, epsilon(), options));
  } else if (f.kind == "kwise") {
    KwiseNorm norm;
    if (f.norm_option->count()) {
      norm = parse_kwise_norm(f.norm);
    } else {
      const auto it = file.params.find("multiplicative");
      norm = it != file.params.end() && it->second == "1"
                 ? KwiseNorm::Multiplicative
                 : parse_kwise_norm(lookup(file.params, "norm", "--norm"));
    }
    reports.push_back(check_kwise(file.set, order(), norm, epsilon(), options));
  } else if (f.kind == "phf") {
    const unsigned k = order();
    const Rational eps = epsilon();
    reports.push_back(check_phf_density(file.set, k, eps, options));
    if (f.bound_option->count()) {
      reports.push_back(check_pair_collisions(file.set, parse_rational(f.collision_bound), options));
    } else if (f.collisions) {
      PhfParams p;
      p.k = k;
      p.epsilon = eps;
      reports.push_back(
          check_pair_collisions(file.set, Rational(1) / rational_of(p.h()), options));
    }
  } else if (f.kind == "code") {
    LinearCode code{Field::from_order(file.set.alphabet), file.set.word_length, file.set.words};
    reports.push_back(check_code_balance(code, epsilon(), options));
  } else {
    throw UsageError("unknown kind '" + f.kind + "'");
  }

  bool pass = true;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i) out << '\n';
    print_report(reports[i], f.format, out);
    pass = pass && reports[i].pass;
  }
  return pass ? kExitOk : kExitVerifyFailed;
}

int run_compose(const ComposeFlags& f, const std::vector<std::string>& args, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const SampleFile phf = read_sample_file(f.phf);
  const SampleFile inner = read_sample_file(f.inner);
  SampleMultiset composed = compose(phf.set, inner.set);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string text = serialize_sample(composed, "compose");
  write_file(f.out, text);
  RunManifest manifest;
  manifest.command = args;
  manifest.kind = "compose";
  manifest.params = composed.provenance.params;
  manifest.version = std::string(library_version());
  manifest.output = f.out;
  manifest.output_sha256 = sha256_hex(text);
  manifest.wall_time_seconds = seconds;
  manifest.size = composed.size();
  manifest.size_bound = static_cast<std::uint64_t>(phf.set.size()) * inner.set.size();
  write_file(manifest_path(f.out), manifest.serialize());

  out << "kind=compose\n"
      << "size=" << manifest.size << '\n'
      << "size_bound=" << manifest.size_bound << '\n'
      << "output=" << f.out << '\n'
      << "sha256=" << manifest.output_sha256 << '\n';
  return kExitOk;
}

int run_bounds(const BoundsFlags& f, std::ostream& out) {
  std::optional<std::uint64_t> achieved;
  if (f.achieved_option->count()) achieved = f.achieved;
  const LowerBoundReport report =
      lower_bound_report(f.n, f.k, parse_rational(f.eps), parse_kwise_norm(f.norm), achieved);
  out << (f.format == "kv" ? report.to_key_value() : report.to_table());
  return kExitOk;
}

// Replaces any --out/-o value with `path` and drops --trace.
std::vector<std::string> redirect_output(const std::vector<std::string>& command,
                                         const std::string& path) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < command.size(); ++i) {
    const std::string& a = command[i];
    if (a == "--out" || a == "-o" || a == "--trace") {
      ++i;
      continue;
    }
    if (a.starts_with("--out=") || a.starts_with("--trace=")) continue;
    out.push_back(a);
  }
  out.push_back("--out");
  out.push_back(path);
  return out;
}

int run_replay(const ReplayFlags& f, std::ostream& out, std::ostream& err);

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deterministic construction and verification of small sample spaces", "derand"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(library_version()));

  auto* construct = app.add_subcommand("construct", "Build a sample space and write it to a file");
  construct->require_subcommand(1);

  EngineFlags engine;
  BiasFlags bias;
  auto* c_bias = construct->add_subcommand("bias", "Small-bias set over {0,1}^n");
  c_bias->add_option("--n", bias.n, "Word length")->required();
  c_bias->add_option("--eps", bias.eps, "Bias bound in (0, 1/2]")->required();
  add_engine_flags(c_bias, engine, "bias.txt");

  KwiseFlags kwise;
  auto* c_kwise = construct->add_subcommand("kwise", "Almost k-wise independent set over {0,1}^n");
  c_kwise->add_option("--n", kwise.n, "Word length")->required();
  c_kwise->add_option("--k", kwise.k, "Independence order")->required();
  c_kwise->add_option("--eps", kwise.eps, "Distance bound")->required();
  c_kwise->add_option("--norm", kwise.norm, "Distance norm")
      ->check(CLI::IsMember({"linf", "l1"}))
      ->capture_default_str();
  kwise.r_option = c_kwise->add_option("--r", kwise.r, "Prefix length for the l1 grouping");
  c_kwise->add_option("--d", kwise.d, "Factor in the default prefix length")->capture_default_str();
  c_kwise->add_flag("--multiplicative", kwise.multiplicative,
                    "linf only: bound Pr[s_I = sigma] within (1 -+ eps)/2^k");
  c_kwise->add_flag("--polytime", kwise.polytime,
                    "Hash and compose when n exceeds the inner alphabet");
  c_kwise->add_flag("--force-composition", kwise.force_composition,
                    "Always take the hash-and-compose branch");
  add_engine_flags(c_kwise, engine, "kwise.txt");

  PhfFlags phf;
  auto* c_phf = construct->add_subcommand("phf", "Dense perfect hash family in [q]^n");
  c_phf->add_option("--n", phf.n, "Number of coordinates")->required();
  c_phf->add_option("--q", phf.q, "Range size")->required();
  c_phf->add_option("--k", phf.k, "Tuple size")->required();
  c_phf->add_option("--eps", phf.eps, "Allowed failure fraction")->required();
  add_engine_flags(c_phf, engine, "phf.txt");

  CodeFlags code;
  auto* c_code = construct->add_subcommand("code", "Balanced linear code over F_q; rows are written");
  c_code->add_option("--q", code.q, "Field size")->required();
  c_code->add_option("--k", code.k, "Dimension")->required();
  c_code->add_option("--eps", code.eps, "Balance bound in (0, 1/2]")->required();
  add_engine_flags(c_code, engine, "code.txt");

  VerifyFlags verify;
  auto* v = app.add_subcommand("verify", "Check a sample file by exhaustive enumeration");
  v->add_option("kind", verify.kind, "Property to check")
      ->required()
      ->check(CLI::IsMember({"bias", "kwise", "phf", "code"}));
  v->add_option("--in,-i", verify.in, "Sample file")->required();
  verify.eps_option = v->add_option("--eps", verify.eps, "Threshold (default: from the file)");
  verify.k_option = v->add_option("--k", verify.k, "Order (default: from the file)");
  verify.norm_option = v->add_option("--norm", verify.norm, "kwise norm")
                           ->check(CLI::IsMember({"linf", "l1", "multiplicative"}));
  verify.bound_option =
      v->add_option("--collision-bound", verify.collision_bound, "phf: also check pair collisions");
  v->add_flag("--collisions", verify.collisions, "phf: check pair collisions against 1/ceil(k^2/eps)");
  v->add_option("--format", verify.format, "Report format")
      ->check(CLI::IsMember({"table", "kv"}))
      ->capture_default_str();
  verify.budget_option = v->add_option("--budget", verify.budget, "Enumeration budget");
  verify.sampled_option =
      v->add_option("--sampled", verify.sampled, "Check this many random subsets (not a proof)");
  v->add_option("--seed", verify.seed, "Seed for --sampled")->capture_default_str();

  ComposeFlags comp;
  auto* c = app.add_subcommand("compose", "Compose a hash family with an inner set");
  c->add_option("--phf", comp.phf, "Hash family file")->required();
  c->add_option("--inner", comp.inner, "Inner set file")->required();
  c->add_option("--out,-o", comp.out, "Output file")->required();

  BoundsFlags bounds;
  auto* b = app.add_subcommand("bounds", "Print size expressions for almost k-wise sets");
  b->add_option("--n", bounds.n, "Word length")->required();
  b->add_option("--k", bounds.k, "Independence order")->required();
  b->add_option("--eps", bounds.eps, "Distance bound")->required();
  b->add_option("--norm", bounds.norm, "Norm")
      ->check(CLI::IsMember({"linf", "l1", "multiplicative"}))
      ->capture_default_str();
  bounds.achieved_option = b->add_option("--achieved", bounds.achieved, "Achieved size to show");
  b->add_option("--format", bounds.format, "Output format")
      ->check(CLI::IsMember({"table", "kv"}))
      ->capture_default_str();

  ReplayFlags replay;
  auto* r = app.add_subcommand("replay", "Re-run a construct command from its manifest");
  r->add_option("manifest", replay.manifest, "Manifest file")->required();
  r->add_option("--out,-o", replay.out, "Where to write the re-run output");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (construct->parsed()) {
    const auto start = std::chrono::steady_clock::now();
    const BuildOptions options = build_options(engine);
    Construction result;
    if (c_bias->parsed()) {
      result = {"bias", build_bias_set(bias.n, parse_rational(bias.eps), options)};
    } else if (c_kwise->parsed()) {
      KwiseParams p;
      p.n = kwise.n;
      p.k = kwise.k;
      p.epsilon = parse_rational(kwise.eps);
      p.norm = parse_norm(kwise.norm);
      if (kwise.r_option->count()) p.r = kwise.r;
      p.d = kwise.d;
      p.multiplicative = kwise.multiplicative;
      if (kwise.polytime || kwise.force_composition) {
        PolytimeOptions po;
        po.build = options;
        po.force_composition = kwise.force_composition;
        result = {"kwise", build_kwise_polytime(p, po)};
      } else if (p.norm == Norm::Linf) {
        result = {"kwise", build_kwise_direct(p, options)};
      } else {
        result = {"kwise", build_kwise_l1(p, options)};
      }
    } else if (c_phf->parsed()) {
      PhfParams p;
      p.n = phf.n;
      p.q = phf.q;
      p.k = phf.k;
      p.epsilon = parse_rational(phf.eps);
      result = {"phf", build_phf(p, options)};
    } else {
      result = {"code", build_balanced_code(code.q, code.k, parse_rational(code.eps), options).build};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return finish_construction(result, engine, args, seconds, out);
  }
  if (v->parsed()) return run_verify(verify, out);
  if (c->parsed()) return run_compose(comp, args, out);
  if (b->parsed()) return run_bounds(bounds, out);
  return run_replay(replay, out, err);
}

int run_replay(const ReplayFlags& f, std::ostream& out, std::ostream& err) {
  const RunManifest manifest = RunManifest::parse(read_file(f.manifest));
  if (manifest.command.empty() ||
      (manifest.command.front() != "construct" && manifest.command.front() != "compose")) {
    throw ParseError("manifest does not record a construct or compose command");
  }
  const std::string target = f.out.empty() ? manifest.output + ".replay" : f.out;
  std::ostringstream inner_out;
  const int code = dispatch(redirect_output(manifest.command, target), inner_out, err);
  if (code != kExitOk) return code;
  const std::string digest = sha256_hex(read_file(target));
  // The replayed manifest records the replay's own command; keep the original.
  std::filesystem::remove(manifest_path(target));
  const bool same = digest == manifest.output_sha256;
  out << "output=" << target << '\n'
      << "sha256=" << digest << '\n'
      << "expected=" << manifest.output_sha256 << '\n'
      << "replay=" << (same ? "identical" : "MISMATCH") << '\n';
  return same ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const PrecisionExhausted& e) {
    err << "derand: precision exhausted: " << e.what() << '\n';
    return kExitInternal;
  } catch (const ContractViolation& e) {
    err << "derand: internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const IoError& e) {
    err << "derand: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "derand: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "derand: invalid parameters: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "derand: invalid parameters: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InfeasibleError& e) {
    err << "derand: infeasible: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "derand: parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const BudgetExceeded& e) {
    err << "derand: over budget: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionMismatch& e) {
    err << "derand: dimension mismatch: " << e.what() << '\n';
    return kExitUsage;
  } catch (const OverflowError& e) {
    err << "derand: overflow: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "derand: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace derand::cli
