#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fss/best_constants.hpp"
#include "fss/convex_solver.hpp"
#include "fss/io.hpp"
#include "fss/property_suite.hpp"
#include "fss/singular_chain.hpp"

namespace fss {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitAssertion = 2;

namespace cli {

/// Named pass/fail checks collected by a command.
class Checks {
public:
  void add(const std::string& name, double value, double limit, bool ok) {
    json c = {{"name", name}, {"value", detail::num(value)}, {"limit", detail::num(limit)}, {"passed", ok}};
    list_.push_back(std::move(c));
    passed_ = passed_ && ok;
  }
  /// value <= limit
  void at_most(const std::string& name, double value, double limit) {
    add(name, value, limit, value <= limit);
  }
  bool passed() const { return passed_; }
  const json& list() const { return list_; }

private:
  json list_ = json::array();
  bool passed_ = true;
};

inline std::uint64_t seed_from_env(std::uint64_t fallback) {
  if (const char* env = std::getenv("FSS_SEED"); env && *env) {
    char* end = nullptr;
    unsigned long long s = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("FSS_SEED must be a nonnegative integer");
    return s;
  }
  return fallback;
}

/// 1D kernel on (0,1), h = 1/32, s = 1/2, used when no config is given.
inline Kernel default_kernel(double p) {
  return build_kernel(build_grid(Box::interval(0.0, 1.0), 1.0 / 32.0, 4.0 / 32.0), FracParams(0.5, p, 1), true);
}

/// Exponent used for embedding constants when none is requested.
inline double default_theta(const FracParams& params) {
  return params.subcritical() ? params.p_star() : 2.0 * params.p();
}

inline json lemma_json(const LemmaReport& r) {
  json extras = json::object();
  for (const auto& [k, v] : r.extras) extras[k] = detail::num(v);
  return {{"lemma", r.lemma},
          {"trials", r.trials},
          {"worst_slack", detail::num(r.worst_slack)},
          {"fitted_constant", detail::num(r.fitted_constant)},
          {"witness", detail::num_array(r.witness)},
          {"extras", extras},
          {"passed", r.passed}};
}

inline double chain_scale(const ChainResult& chain) { return std::max(1.0, max_abs(chain.u_alpha)); }

/// Checks common to every chain run.
inline void chain_checks(Checks& c, const ChainResult& chain) {
  double scale = chain_scale(chain);
  c.add("chain_converged", chain.converged ? 1.0 : 0.0, 1.0, chain.converged);
  c.at_most("monotone_violation", chain.monotone_violation, 1e-8);
  c.at_most("seminorm_violation", chain.seminorm_violation, 1e-10);
  c.at_most("barrier_violation", chain.barrier_violation, 1e-8 * scale);
  c.at_most("limit_violation", chain.limit_violation, 1e-8 * scale);
}

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline int finish(Streams io, json report, const Checks& checks) {
  report["checks"] = checks.list();
  report["passed"] = checks.passed();
  io.out << report.dump(2) << "\n";
  if (!checks.passed()) {
    io.err << "assertion failure:";
    for (const auto& c : checks.list())
      if (!c.at("passed").get<bool>()) io.err << " " << c.at("name").get<std::string>();
    io.err << "\n";
    return kExitAssertion;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  std::string config;
  std::string out;
  std::string diagnostics;
};

inline int cmd_solve(const SolveArgs& a, Streams io) {
  RunConfig cfg = load_config(a.config);
  if (!cfg.problem.alpha) throw ConfigError("problem.alpha: required by solve");
  const double alpha = *cfg.problem.alpha;
  Kernel kernel = cfg.make_kernel();
  WeightField omega = make_weight(cfg, kernel.grid());
  ChainResult chain = run_chain(omega, alpha, kernel, cfg.chain_options());

  SolutionFile sol;
  sol.config_hash = cfg.hash;
  sol.box = kernel.grid().box;
  sol.h = kernel.grid().h;
  sol.collar_width = kernel.grid().collar_width;
  sol.shape = kernel.grid().shape;
  sol.tail = cfg.grid.tail;
  sol.s = cfg.s;
  sol.p = cfg.p;
  sol.alpha = alpha;
  sol.seminorm_p = seminorm_p(chain.u_alpha, kernel);
  sol.converged = chain.converged;
  sol.levels = static_cast<int>(chain.levels.size());
  sol.weight_r = omega.r();
  sol.weight.assign(omega.values().begin(), omega.values().end());
  sol.values = chain.u_alpha;

  Checks checks;
  chain_checks(checks, chain);
  if (alpha < 1.0) {
    SingularSolution ss = lambda_alpha(chain, omega, kernel);
    sol.constant_kind = "lambda";
    sol.constant = ss.lambda;
    sol.log_constant = ss.log_lambda;
    sol.seminorm_V = ss.seminorm_V;
  } else if (alpha == 1.0) {
    MuEstimate mu = mu_from_solution(chain.u_alpha, omega, kernel);
    sol.constant_kind = "mu";
    sol.constant = mu.mu_direct;
    sol.log_constant = mu.log_mu_direct;
    sol.seminorm_V = seminorm_p(mu.V, kernel);
    checks.at_most("energy_identity_error", std::abs(mu.energy_identity_error), 1e-7);
  }

  std::string out = a.out.empty() ? cfg.output.solution : a.out;
  std::string diag = a.diagnostics.empty() ? cfg.output.diagnostics : a.diagnostics;
  if (!out.empty()) save_solution(out, sol);
  if (!diag.empty()) write_text(diag, level_diagnostics(chain).dump(2) + "\n");

  json report = {{"command", "solve"},
                 {"config_hash", cfg.hash},
                 {"alpha", alpha},
                 {"nodes", kernel.size()},
                 {"levels", sol.levels},
                 {"converged", chain.converged},
                 {"constant_kind", sol.constant_kind},
                 {"constant", detail::num(sol.constant)},
                 {"log_constant", detail::num(sol.log_constant)},
                 {"seminorm_p", detail::num(sol.seminorm_p)},
                 {"max_u", detail::num(max_abs(chain.u_alpha))}};
  if (!out.empty()) report["solution"] = out;
  return finish(io, std::move(report), checks);
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string csv;
  std::string mu;
};

inline int cmd_sweep(const SweepArgs& a, Streams io) {
  RunConfig cfg = load_config(a.config);
  std::vector<double> grid = cfg.sweep_grid();
  if (grid.empty()) throw ConfigError("problem.alpha_grid: required by sweep");
  Kernel kernel = cfg.make_kernel();
  WeightField omega = make_weight(cfg, kernel.grid());

  SweepOptions so;
  so.chain = cfg.chain_options();
  so.assert_checks = false;
  SweepResult sweep = sweep_alpha(omega, grid, kernel, so);
  MuEstimate mu = estimate_mu_direct(omega, kernel, so.chain);
  attach_sweep(mu, sweep);
  Field psi = solve_psi(omega, kernel);
  ValfaLimitReport vl = check_valfa_limit(sweep, mu, psi, kernel, std::numeric_limits<double>::infinity());

  std::string csv = a.csv.empty() ? cfg.output.sweep_csv : a.csv;
  std::string mup = a.mu.empty() ? cfg.output.mu_json : a.mu;
  if (!csv.empty()) write_text(csv, sweep_csv(sweep));
  if (!mup.empty()) write_text(mup, mu_json(mu).dump(2) + "\n");

  Checks checks;
  bool all_converged = true;
  for (const auto& r : sweep.records) all_converged = all_converged && r.converged;
  checks.add("all_converged", all_converged ? 1.0 : 0.0, 1.0, all_converged);
  checks.at_most("scaled_monotone_violation", sweep.monotone_violation, 1e-8);
  checks.at_most("seminorm_V_identity_error", sweep.identity_error, 1e-8);
  checks.at_most("mu_energy_identity_error", std::abs(mu.energy_identity_error), 1e-7);

  json report = {{"command", "sweep"},
                 {"config_hash", cfg.hash},
                 {"nodes", kernel.size()},
                 {"mu_sweep", detail::num(mu.mu_sweep)},
                 {"mu_direct", detail::num(mu.mu_direct)},
                 {"mu_richardson", detail::num(mu.mu_richardson)},
                 {"trend", mu.trend},
                 {"valfa_gaps", detail::num_array(vl.gaps)},
                 {"valfa_gaps_decreasing", vl.gaps_decreasing},
                 {"valfa_lower_slack", detail::num(vl.lower_slack)}};
  return finish(io, std::move(report), checks);
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string solution;
  std::string config;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
};

inline int cmd_verify(const VerifyArgs& a, Streams io) {
  SolutionFile sol = load_solution(a.solution);
  int trials = 1000;
  std::uint64_t seed = seed_from_env(42);
  if (!a.config.empty()) {
    RunConfig cfg = load_config(a.config);
    check_grid(sol, cfg.make_grid());
    if (cfg.hash != sol.config_hash)
      io.err << "warning: config hash " << cfg.hash << " differs from the solution's " << sol.config_hash << "\n";
    trials = cfg.verification.trials;
    seed = cfg.verification.seed;
  }
  if (a.trials) trials = *a.trials;
  if (a.seed) seed = *a.seed;
  if (trials < 0) throw ConfigError("--trials must be nonnegative");

  Kernel kernel = sol.kernel();
  WeightField omega = sol.omega();
  Checks checks;
  json report = {{"command", "verify"}, {"alpha", sol.alpha}, {"trials", trials}, {"seed", seed}};

  WeakResidualReport wr = weak_residual(sol.values, omega, sol.alpha, kernel, trials, seed);
  report["weak_residual"] = {{"max_residual", detail::num(wr.max_residual)},
                             {"min_bound_slack", detail::num(wr.min_bound_slack)}};
  checks.at_most("weak_residual", wr.max_residual, 1e-6);

  if (sol.alpha < 1.0) {
    SingularSolution ss = lambda_alpha(sol.values, sol.alpha, omega, kernel);
    SobolevReport sr = verify_sobolev(ss, omega, kernel, trials, seed);
    report["lambda"] = detail::num(ss.lambda);
    report["log_lambda"] = detail::num(ss.log_lambda);
    report["sobolev"] = {{"min_relative_slack", detail::num(sr.min_relative_slack)},
                         {"worst_trial", sr.worst_trial},
                         {"extremal_relative_slack", detail::num(sr.extremal_relative_slack)},
                         {"violation_found", sr.violation_found}};
    checks.add("sobolev", sr.min_relative_slack, -1e-8, sr.passed);
  } else if (sol.alpha == 1.0) {
    MuEstimate mu = mu_from_solution(sol.values, omega, kernel);
    LogSobolevReport lr = verify_log_sobolev(mu.mu_direct, mu.V, omega, kernel, trials, seed);
    report["mu"] = detail::num(mu.mu_direct);
    report["log_mu"] = detail::num(mu.log_mu_direct);
    report["log_sobolev"] = {{"min_relative_slack", detail::num(lr.min_relative_slack)},
                             {"worst_trial", lr.worst_trial},
                             {"extremal_relative_slack", detail::num(lr.extremal_relative_slack)},
                             {"violation_found", lr.violation_found}};
    report["membership"] = detail::num(mu.membership);
    report["eqV_residual"] = detail::num(mu.eqV_residual);
    checks.add("log_sobolev", lr.min_relative_slack, -1e-8, lr.passed);
    checks.at_most("membership", std::abs(mu.membership), 1e-8);
    checks.at_most("eqV_residual", mu.eqV_residual, 1e-6);
  }
  return finish(io, std::move(report), checks);
}

// ---------------------------------------------------------------------------

struct PropsArgs {
  std::string config;
  std::optional<double> p;
  int trials = 1000;
  std::optional<std::uint64_t> seed;
};

inline int cmd_props(const PropsArgs& a, Streams io) {
  std::optional<RunConfig> cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  std::uint64_t seed = a.seed ? *a.seed : (cfg ? cfg->verification.seed : seed_from_env(42));
  double p = a.p ? *a.p : (cfg ? cfg->p : 2.0);
  if (!(p > 1.0 && std::isfinite(p))) throw ConfigError("--p must lie in (1,inf)");
  if (a.trials < 1) throw ConfigError("--trials must be positive");

  Kernel kernel = cfg ? build_kernel(cfg->make_grid(), FracParams(cfg->s, p, cfg->grid.box.dimension), cfg->grid.tail)
                      : default_kernel(p);
  Checks checks;
  json lemmas = json::array();

  auto vi = check_vector_inequalities(p, a.trials, seed);
  lemmas.push_back(lemma_json(vi.upper));
  lemmas.push_back(lemma_json(vi.lower));
  checks.add("vector_inequalities", vi.lower.worst_slack, 0.0, vi.passed());

  auto sm = check_strong_monotonicity(kernel, a.trials, seed);
  lemmas.push_back(lemma_json(sm));
  checks.add("strong_monotonicity", sm.worst_slack, 0.0, sm.passed);

  auto qi = check_q_identity(p, a.trials, seed, &kernel);
  lemmas.push_back(lemma_json(qi));
  checks.add("q_identity", qi.worst_slack, 0.0, qi.passed);

  auto fam = check_stampacchia_families(a.trials, seed);
  lemmas.push_back(lemma_json(fam));
  checks.add("stampacchia_families", fam.worst_slack, 0.0, fam.passed);

  // Level-set lemma on the solution of the configured (or a constant-weight) problem.
  double alpha = 0.5;
  std::optional<WeightField> omega;
  ChainOptions co;
  if (cfg) {
    omega = make_weight(*cfg, kernel.grid());
    co = cfg->chain_options();
    if (cfg->problem.alpha) alpha = *cfg->problem.alpha;
    else if (!cfg->problem.alpha_grid.empty()) alpha = cfg->problem.alpha_grid.front();
  } else {
    omega = WeightField(std::vector<double>(kernel.size(), 1.0), kernel.cell_measure(),
                        std::numeric_limits<double>::infinity());
  }
  double theta = default_theta(kernel.params());
  if (stampacchia_exponent(theta, omega->r(), p) > 1.0) {
    ChainResult chain = run_chain(*omega, alpha, kernel, co);
    EmbeddingConstant S = embedding_constant(theta, kernel, {.solve = co.level.solve});
    auto global = check_stampacchia_solution(chain.u_alpha, *omega, alpha, kernel, theta, S.value);
    auto half = check_stampacchia_solution(chain.u_alpha, *omega, alpha, kernel, theta, S.value,
                                           0.5 * max_abs(chain.u_alpha));
    global.lemma = "stampacchia-solution-k0";
    half.lemma = "stampacchia-solution-half-max";
    lemmas.push_back(lemma_json(global));
    lemmas.push_back(lemma_json(half));
    checks.add("stampacchia_solution", std::min(global.worst_slack, half.worst_slack), 0.0,
               global.passed && half.passed);
  } else {
    io.err << "note: stampacchia check skipped (weight.r too small for theta = " << theta << ")\n";
  }

  json report = {{"command", "props"}, {"p", p}, {"trials", a.trials}, {"seed", seed}, {"lemmas", lemmas}};
  return finish(io, std::move(report), checks);
}

// ---------------------------------------------------------------------------

struct ConstantArgs {
  std::string config;
  std::optional<double> theta;
  std::optional<double> p;
  int starts = 8;
  std::optional<std::uint64_t> seed;
};

inline int cmd_constant(const ConstantArgs& a, Streams io) {
  std::optional<RunConfig> cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  double p = a.p ? *a.p : (cfg ? cfg->p : 2.0);
  if (!(p > 1.0 && std::isfinite(p))) throw ConfigError("--p must lie in (1,inf)");
  Kernel kernel = cfg ? build_kernel(cfg->make_grid(), FracParams(cfg->s, p, cfg->grid.box.dimension), cfg->grid.tail)
                      : default_kernel(p);
  double theta = a.theta ? *a.theta : default_theta(kernel.params());
  EmbeddingOptions eo;
  eo.starts = a.starts;
  if (a.seed) eo.seed = *a.seed;
  if (cfg) eo.solve.gradient_tol = cfg->problem.gradient_tol;
  EmbeddingConstant S = embedding_constant(theta, kernel, eo);
  json report = {{"command", "constant"},
                 {"theta", theta},
                 {"p", p},
                 {"S", detail::num(S.value)},
                 {"best_start", S.seed},
                 {"iterations", S.iterations},
                 {"start_values", detail::num_array(S.start_values)}};
  io.out << report.dump(2) << "\n";
  return kExitOk;
}

} // namespace cli

/// Entry point of the command-line tool. Returns 0 when every check passed,
/// 2 when a check failed and 1 on usage, configuration or input errors.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"Fractional singular problems and sharp Sobolev-type constants", "fss"};
  app.require_subcommand(1);
  app.fallthrough(false);

  cli::SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Run the approximating chain and write the solution");
  s->add_option("--config", solve.config, "Run configuration (JSON)")->required();
  s->add_option("--out", solve.out, "Solution file (overrides output.solution)");
  s->add_option("--diagnostics", solve.diagnostics, "Per-level diagnostics (overrides output.diagnostics)");

  cli::SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Sweep alpha toward 1 and estimate mu");
  w->add_option("--config", sweep.config, "Run configuration (JSON)")->required();
  w->add_option("--csv", sweep.csv, "Sweep CSV (overrides output.sweep_csv)");
  w->add_option("--mu", sweep.mu, "mu JSON (overrides output.mu_json)");

  cli::VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Certify a saved solution against random fields");
  v->add_option("--solution", verify.solution, "Solution file")->required();
  v->add_option("--config", verify.config, "Config to compare against");
  v->add_option("--trials", verify.trials, "Number of random test fields");
  v->add_option("--seed", verify.seed, "Seed of the random test fields");

  cli::PropsArgs props;
  auto* pr = app.add_subcommand("props", "Run the elementary inequality suites");
  pr->add_option("--config", props.config, "Grid/weight configuration");
  pr->add_option("--p", props.p, "Exponent p");
  pr->add_option("--trials", props.trials, "Trials per suite");
  pr->add_option("--seed", props.seed, "Seed");

  cli::ConstantArgs constant;
  auto* c = app.add_subcommand("constant", "Compute a discrete embedding constant");
  c->add_option("--config", constant.config, "Grid configuration");
  c->add_option("--theta", constant.theta, "Integrability exponent theta");
  c->add_option("--p", constant.p, "Exponent p");
  c->add_option("--starts", constant.starts, "Random starts")->check(CLI::PositiveNumber);
  c->add_option("--seed", constant.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  cli::Streams io{out, err};
  try {
    if (s->parsed()) return cli::cmd_solve(solve, io);
    if (w->parsed()) return cli::cmd_sweep(sweep, io);
    if (v->parsed()) return cli::cmd_verify(verify, io);
    if (pr->parsed()) return cli::cmd_props(props, io);
    if (c->parsed()) return cli::cmd_constant(constant, io);
  } catch (const AssertionFailure& e) {
    err << "assertion failure: " << e.what() << "\n";
    return kExitAssertion;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << " (residual " << e.residual_norm() << ")\n";
    return kExitAssertion;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  err << app.help();
  return kExitUsage;
}

} // namespace fss
