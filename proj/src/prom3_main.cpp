// prom3 command-line harness: generate instances, run solvers, validate
// oracles, and emit trace CSVs plus summary JSON.
// Exit codes: 0 ok, 1 error, 2 completed with not-converged flags.
// SPDX-License-Identifier: MIT
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "prom3/baselines.hpp"
#include "prom3/instance_io.hpp"
#include "prom3/outer.hpp"

namespace {

using namespace prom3;

/// Solver options shared by `solve` and `bench`.
struct SolverFlags {
  long long K = 100;
  std::optional<double> alpha, beta, theta, nu, theta_report;
  std::optional<long long> inner_t, pessimize_budget;
  double c_t = 1.0;
  std::string step_mode = "nonsmooth";
  bool no_reuse_ztilde = false;
  bool no_theory_mode = false;
  bool inner_early_stop = false;
  bool wall_time = false;  // default: deterministic virtual time in the CSV
  // cutting-plane
  double epsilon = 5e-2;
  long long max_rounds = 100;
  std::optional<long long> master_iters;
  long long master_iters_cap = 50'000'000;
  std::optional<double> rho_pen;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--K", f.K, "Outer iteration count")->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "Proximal weight (default 1/Lip_f)");
  cmd->add_option("--beta", f.beta, "Multiplier step (default 1/(2 Lip_f))");
  cmd->add_option("--theta", f.theta, "Pessimization accuracy (default 1/K)");
  cmd->add_option("--nu", f.nu, "Inner saddle accuracy (default 1/K)");
  cmd->add_option("--inner-t", f.inner_t, "Fixed inner iteration count (overrides --c-t)");
  cmd->add_option("--c-t", f.c_t, "Inner iteration multiplier")->capture_default_str();
  cmd->add_option("--step-mode", f.step_mode, "Inner step regime: nonsmooth|smooth")
      ->check(CLI::IsMember({"nonsmooth", "smooth"}))
      ->capture_default_str();
  cmd->add_option("--pessimize-budget", f.pessimize_budget,
                  "Cap on iterations per pessimization");
  cmd->add_option("--theta-report", f.theta_report,
                  "Accuracy for reported violations (default theta/10)");
  cmd->add_flag("--no-reuse-ztilde", f.no_reuse_ztilde,
                "Re-pessimize active constraints instead of reusing inner maximizers");
  cmd->add_flag("--no-theory-mode", f.no_theory_mode,
                "Allow step sizes beyond the convergence-theory caps");
  cmd->add_flag("--inner-early-stop", f.inner_early_stop,
                "Gap-proxy early stop for inner solves (non-theory runs)");
  cmd->add_flag("--wall-time", f.wall_time,
                "Trace time_s column uses the wall clock instead of the "
                "deterministic virtual clock (CSV bytes then vary run to run)");
  cmd->add_option("--epsilon", f.epsilon, "[cutting-plane] target tolerance")
      ->capture_default_str();
  cmd->add_option("--max-rounds", f.max_rounds, "[cutting-plane] round cap")
      ->capture_default_str();
  cmd->add_option("--master-iters", f.master_iters,
                  "[cutting-plane] subgradient iterations per master solve");
  cmd->add_option("--master-iters-cap", f.master_iters_cap,
                  "[cutting-plane] cap for the automatic master iteration count")
      ->capture_default_str();
  cmd->add_option("--rho-pen", f.rho_pen,
                  "[cutting-plane] exact-penalty weight (default: from Slater margin)");
}

OuterConfig outer_config(const SolverFlags& f) {
  OuterConfig cfg;
  cfg.K = f.K;
  cfg.alpha = f.alpha;
  cfg.beta = f.beta;
  cfg.theta = f.theta;
  cfg.nu = f.nu;
  cfg.inner_T = f.inner_t;
  cfg.c_T = f.c_t;
  cfg.step_mode = f.step_mode == "smooth" ? StepMode::smooth : StepMode::nonsmooth;
  cfg.pessimize_budget = f.pessimize_budget;
  cfg.reuse_ztilde = !f.no_reuse_ztilde;
  cfg.theta_report = f.theta_report;
  cfg.theory_mode = !f.no_theory_mode;
  cfg.inner_early_stop = f.inner_early_stop;
  cfg.virtual_time = !f.wall_time;
  return cfg;
}

CuttingPlaneConfig cutting_plane_config(const SolverFlags& f) {
  CuttingPlaneConfig cfg;
  cfg.epsilon = f.epsilon;
  cfg.max_rounds = f.max_rounds;
  if (f.master_iters.has_value()) cfg.master.iters = *f.master_iters;
  cfg.master.iters_cap = f.master_iters_cap;
  cfg.master.rho_pen = f.rho_pen;
  if (f.pessimize_budget.has_value()) cfg.pessimize_budget = *f.pessimize_budget;
  cfg.virtual_time = !f.wall_time;
  return cfg;
}

nlohmann::json counters_json(const Counters& n) {
  return {{"f0", n.f0},     {"gx", n.gx},   {"gz", n.gz},
          {"h", n.h},       {"proj", n.proj}, {"exact_pessimize", n.exact_pessimize}};
}

/// Everything one solver run produces.
struct RunOutput {
  std::string csv;
  nlohmann::json summary;
  bool converged = true;
};

RunOutput run_algorithm(const InstanceData& inst, const std::string& algorithm,
                        const SolverFlags& flags) {
  RunOutput out;
  out.summary["algorithm"] = algorithm;
  out.summary["family"] = family_name(inst);
  out.summary["instance_digest"] = instance_digest(inst);

  detail::SegmentTimer timer;
  const auto finish_trace = [&](const Trace& trace, const Counters& counters) {
    std::ostringstream os;
    write_csv(trace, os);
    out.csv = os.str();
    out.summary["rows"] = trace.rows.size();
    const Counters& last = trace.rows.empty() ? counters : trace.rows.back().counts;
    out.summary["calls"] = counters_json(last);
    if (!trace.rows.empty()) {
      out.summary["objective"] = trace.rows.back().objective;
      out.summary["violation"] = trace.rows.back().violation;
    }
  };

  if (algorithm == "prom3") {
    const ProblemSpec spec = is_intersection_family(inst)
                                 ? direct_intersection_spec(build_intersection(inst))
                                 : build_problem(inst);
    if (is_intersection_family(inst)) out.summary["mode"] = "direct-intersection";
    timer.start();
    const OuterResult r = solve(spec, outer_config(flags));
    timer.stop();
    finish_trace(r.trace, r.counters);
    out.converged = !r.trace.budget_limited;
    out.summary["budget_limited"] = r.trace.budget_limited;
  } else if (algorithm == "prom3x") {
    if (!is_intersection_family(inst)) {
      throw ConfigError("prom3x runs intersection-form families only; use prom3 for " +
                        family_name(inst));
    }
    const IntersectionSpec in = build_intersection(inst);
    const OuterConfig cfg = outer_config(flags);
    timer.start();
    const ExtendedOuterResult r = solve_extended(in, cfg);
    timer.stop();
    finish_trace(r.result.trace, r.result.counters);
    out.converged = !r.result.trace.budget_limited;
    out.summary["budget_limited"] = r.result.trace.budget_limited;
    out.summary["a"] = r.ext.a;
    out.summary["G"] = r.ext.G;
    out.summary["heuristic_G"] = r.ext.heuristic_G;
    out.summary["heuristic_h_bound"] = r.ext.heuristic_h_bound;
    // Violation against the true intersection sets (the trace column reports
    // the penalized surrogate); reporting only, excluded from counters/time.
    const double theta = flags.theta_report.value_or(
        flags.theta.value_or(1.0 / static_cast<double>(flags.K)) / 10.0);
    out.summary["certified_violation"] = certified_violation(in, r.x_bar, theta);
  } else if (algorithm == "cutting-plane") {
    const ProblemSpec spec = is_intersection_family(inst)
                                 ? direct_intersection_spec(build_intersection(inst))
                                 : build_problem(inst);
    timer.start();
    const CuttingPlaneResult r = cutting_plane_solve(spec, cutting_plane_config(flags));
    timer.stop();
    finish_trace(r.trace, r.counters);
    out.converged = r.converged;
    out.summary["converged"] = r.converged;
    out.summary["rounds"] = r.rounds;
    out.summary["rho_pen"] = r.rho_pen;
    out.summary["master_iters"] = r.master_iters;
    // objective/violation mirror the last CSV row (violation clamped at 0);
    // the signed pessimization value is kept alongside.
    if (r.trace.rows.empty()) {
      out.summary["objective"] = r.objective;
      out.summary["violation"] = std::max(r.violation, 0.0);
    }
    out.summary["violation_signed"] = r.violation;
  } else {
    throw ConfigError("unknown algorithm '" + algorithm + "'");
  }
  out.summary["wall_time_s"] = timer.elapsed();
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw ConfigError("write failed for '" + path + "'");
}

// ------------------------------------------------------------ subcommands ----

struct GenerateFlags {
  std::string family, out;
  std::optional<long long> M, N, P, J;
  double kappa = 0.9, radius = 0.25;
  std::uint64_t seed = 0;
};

/// Validates that exactly the family's dimension flags were given, then
/// generates the instance.
InstanceData generate_family(const GenerateFlags& g) {
  const auto need = [&](const std::optional<long long>& v, const char* name) {
    if (!v.has_value()) {
      throw ConfigError(g.family + ": missing --" + std::string(name));
    }
    return static_cast<Index>(*v);
  };
  const auto reject = [&](const std::optional<long long>& v, const char* name) {
    if (v.has_value()) {
      throw ConfigError(g.family + ": --" + std::string(name) + " is not a " +
                        g.family + " parameter");
    }
  };
  if (g.family == "qcqp") {
    return gen_qcqp(need(g.M, "M"), need(g.N, "N"), need(g.P, "P"), need(g.J, "J"),
                    g.seed);
  }
  if (g.family == "lse") {
    reject(g.P, "P");
    return gen_lse(need(g.M, "M"), need(g.N, "N"), need(g.J, "J"), g.seed);
  }
  reject(g.P, "P");
  reject(g.J, "J");
  return gen_newsvendor(need(g.M, "M"), need(g.N, "N"), g.kappa, g.radius, g.seed);
}

int cmd_generate(const GenerateFlags& g) {
  const InstanceData inst = generate_family(g);
  save_instance(inst, g.out);
  std::cout << "wrote " << g.out << "\n"
            << "family: " << family_name(inst) << "\n"
            << "digest: " << instance_digest(inst) << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", recorded_slater_margin(inst));
  std::cout << "slater-margin: " << buf << "\n";
  return 0;
}

struct SolveCmdFlags {
  std::string instance, algorithm, trace_path, summary_path;
  SolverFlags solver;
};

int cmd_solve(const SolveCmdFlags& s) {
  const InstanceData inst = load_instance(s.instance);
  const RunOutput out = run_algorithm(inst, s.algorithm, s.solver);
  if (!s.trace_path.empty()) write_text(s.trace_path, out.csv);
  if (!s.summary_path.empty()) write_text(s.summary_path, out.summary.dump(2) + "\n");
  std::cout << out.summary.dump(2) << "\n";
  return out.converged ? 0 : 2;
}

struct CheckFlags {
  std::string instance;
  int trials = 20;
};

int cmd_check(const CheckFlags& c) {
  const InstanceData inst = load_instance(c.instance);
  bool ok = true;
  const auto report = [&](const std::string& name, bool pass, const std::string& note) {
    std::cout << (pass ? "   ok  " : " FAIL  ") << name;
    if (!note.empty()) std::cout << "  (" << note << ")";
    std::cout << "\n";
    if (!pass) ok = false;
  };

  // Data reproducibility: the stored arrays must match regeneration from the
  // embedded parameters and seed (format v1 stores generated instances only).
  {
    InstanceData regen;
    if (const auto* q = std::get_if<QcqpInstance>(&inst)) {
      regen = gen_qcqp(q->M, q->N, q->P, q->J, q->seed);
    } else if (const auto* l = std::get_if<LseInstance>(&inst)) {
      regen = gen_lse(l->M, l->N, l->J, l->seed);
    } else {
      const auto& n = std::get<NewsvendorInstance>(inst);
      regen = gen_newsvendor(n.M, n.N, n.kappa, n.radius, n.seed);
    }
    report("regeneration digest", instance_digest(regen) == instance_digest(inst),
           "digest " + instance_digest(inst));
  }

  // Family invariants on the stored data.
  if (const auto* q = std::get_if<QcqpInstance>(&inst)) {
    bool norms = true, bs = true, cs = true;
    for (Index m = 0; m <= q->M; ++m) {
      Mat stack((q->J + 1) * q->P, q->N);
      for (Index j = 0; j <= q->J; ++j) {
        stack.middleRows(j * q->P, q->P) = q->P_mats[static_cast<std::size_t>(m)]
                                                    [static_cast<std::size_t>(j)];
      }
      norms &= std::abs(stack.jacobiSvd().singularValues()[0] - 1.0) <= 1e-6;
      bs &= std::abs(q->b[static_cast<std::size_t>(m)].norm() - 1.0) <= 1e-9;
      cs &= q->c[static_cast<std::size_t>(m)] == -0.05;
    }
    report("stacked spectral norms = 1", norms, "");
    report("unit b vectors", bs, "");
    report("c = -0.05", cs, "");
  } else if (const auto* l = std::get_if<LseInstance>(&inst)) {
    bool norms = true;
    for (const auto& am : l->A) {
      norms &= std::abs(am.jacobiSvd().singularValues()[0] - 1.0) <= 1e-6;
    }
    for (const auto& bm : l->B) {
      norms &= std::abs(bm.jacobiSvd().singularValues()[0] - 1.0) <= 1e-6;
    }
    report("spectral norms = 1", norms, "");
    report("unit slater direction", std::abs(l->xhat.norm() - 1.0) <= 1e-9, "");
    report("uncertainty box [0.001, 1]", l->z_lo == 1e-3 && l->z_hi == 1.0, "");
  } else {
    const auto& n = std::get<NewsvendorInstance>(inst);
    bool econ = true;
    double lbound = 0.0;
    for (Index m = 0; m < n.M; ++m) {
      econ &= n.v[m] > n.c[m] && n.c[m] > n.s[m] && n.s[m] >= 0.0 && n.t[m] >= 0.0;
      lbound = std::max(lbound, (n.v[m] + n.t[m] + n.c[m]) * n.d.row(m).maxCoeff());
    }
    report("prices sane (v > c > s >= 0, t >= 0)", econ, "");
    report("tau box covers all losses", n.L >= lbound - 1e-12, "");
    report("kappa/radius valid", n.kappa >= 0.0 && n.kappa < 1.0 && n.radius > 0.0, "");
  }

  // Oracle validation on the solver-facing spec (penalized form for
  // intersection families so the cut oracles are exercised too).
  ProblemSpec spec;
  if (is_intersection_family(inst)) {
    Rng rng(1);
    spec = penalize(build_intersection(inst), rng).spec;
  } else {
    spec = build_problem(inst);
  }
  const auto fd = check_subgradients(spec, c.trials);
  double worst_err = 0.0;
  bool bound_ok = true, checked_ok = true;
  for (const auto& r : fd.records) {
    worst_err = std::max(worst_err, r.max_rel_err);
    bound_ok &= !r.bound_violation;
    checked_ok &= r.checked > 0;
  }
  {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max rel err %.3g", worst_err);
    report("finite-difference gradients <= 1e-5", checked_ok && worst_err <= 1e-5, buf);
  }
  report("subgradient norm bounds", bound_ok, "");

  // Slater certification.
  if (spec.slater_point.has_value()) {
    Counters scratch;
    const double margin = slater_margin(spec, 1e-6, 1LL << 22, scratch);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst value %.6g", margin);
    report("slater margin < 0", margin < 0.0, buf);
  } else {
    std::cout << "  note  slater check skipped (no point recorded)\n";
  }

  std::cout << (ok ? "all checks passed\n" : "checks FAILED\n");
  return ok ? 0 : 1;
}

struct BenchFlags {
  std::string family, algorithm, out_dir;
  std::optional<long long> M, N, P, J;
  double kappa = 0.9, radius = 0.25;
  std::vector<std::uint64_t> seeds;
  SolverFlags solver;
};

int cmd_bench(const BenchFlags& b) {
  std::filesystem::create_directories(b.out_dir);
  nlohmann::json manifest;
  manifest["format"] = "prom3-bench";
  manifest["version"] = 1;
  manifest["family"] = b.family;
  manifest["algorithm"] = b.algorithm;
  manifest["runs"] = nlohmann::json::array();
  bool all_converged = true;
  for (const std::uint64_t seed : b.seeds) {
    GenerateFlags g;
    g.family = b.family;
    g.M = b.M;
    g.N = b.N;
    g.P = b.P;
    g.J = b.J;
    g.kappa = b.kappa;
    g.radius = b.radius;
    g.seed = seed;
    const InstanceData inst = generate_family(g);
    const RunOutput out = run_algorithm(inst, b.algorithm, b.solver);
    const std::string csv_name =
        b.family + "-s" + std::to_string(seed) + "-" + b.algorithm + ".csv";
    write_text(b.out_dir + "/" + csv_name, out.csv);
    nlohmann::json entry = out.summary;
    entry["seed"] = seed;
    entry["trace"] = csv_name;
    manifest["runs"].push_back(std::move(entry));
    all_converged &= out.converged;
    std::cout << "seed " << seed << ": wrote " << csv_name << "\n";
  }
  write_text(b.out_dir + "/manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << b.out_dir << "/manifest.json\n";
  return all_converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "prom3: first-order robust-optimization solvers with trace emission.\n"
      "Config precedence: command-line flags override --config file values, "
      "which override built-in defaults."};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "INI config file with [subcommand] sections holding long-flag keys; "
                 "give it before the subcommand: prom3 --config run.ini solve ...");

  GenerateFlags gen;
  auto* cgen = app.add_subcommand("generate", "Generate a seeded instance JSON");
  cgen->configurable();
  cgen->add_option("--family", gen.family, "qcqp|lse|newsvendor")
      ->required()
      ->check(CLI::IsMember({"qcqp", "lse", "newsvendor"}));
  cgen->add_option("--M", gen.M, "Constraints (qcqp/lse) or products (newsvendor)");
  cgen->add_option("--N", gen.N, "Decision dim (qcqp/lse) or outcomes (newsvendor)");
  cgen->add_option("--P", gen.P, "[qcqp] rows per quadratic factor");
  cgen->add_option("--J", gen.J, "[qcqp/lse] uncertainty dimension");
  cgen->add_option("--kappa", gen.kappa, "[newsvendor] CVaR level")->capture_default_str();
  cgen->add_option("--radius", gen.radius, "[newsvendor] ambiguity radius")
      ->capture_default_str();
  cgen->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  cgen->add_option("--out", gen.out, "Output instance path")->required();

  SolveCmdFlags sol;
  auto* csol = app.add_subcommand("solve", "Run a solver on an instance");
  csol->configurable();
  csol->add_option("--instance", sol.instance, "Instance JSON path")->required();
  csol->add_option("--algorithm", sol.algorithm, "prom3|prom3x|cutting-plane")
      ->required()
      ->check(CLI::IsMember({"prom3", "prom3x", "cutting-plane"}));
  csol->add_option("--trace", sol.trace_path, "Write the trace CSV here");
  csol->add_option("--summary", sol.summary_path, "Write the summary JSON here");
  add_solver_flags(csol, sol.solver);

  CheckFlags chk;
  auto* cchk = app.add_subcommand("check", "Validate an instance and its oracles");
  cchk->configurable();
  cchk->add_option("--instance", chk.instance, "Instance JSON path")->required();
  cchk->add_option("--trials", chk.trials, "Finite-difference trial count")
      ->capture_default_str();

  BenchFlags ben;
  auto* cben = app.add_subcommand("bench", "Generate-and-solve a seed sweep");
  cben->configurable();
  cben->add_option("--family", ben.family, "qcqp|lse|newsvendor")
      ->required()
      ->check(CLI::IsMember({"qcqp", "lse", "newsvendor"}));
  cben->add_option("--algorithm", ben.algorithm, "prom3|prom3x|cutting-plane")
      ->required()
      ->check(CLI::IsMember({"prom3", "prom3x", "cutting-plane"}));
  cben->add_option("--seeds", ben.seeds, "Comma-separated generator seeds")
      ->required()
      ->delimiter(',');
  cben->add_option("--M", ben.M, "Constraints / products");
  cben->add_option("--N", ben.N, "Decision dim / outcomes");
  cben->add_option("--P", ben.P, "[qcqp] rows per quadratic factor");
  cben->add_option("--J", ben.J, "[qcqp/lse] uncertainty dimension");
  cben->add_option("--kappa", ben.kappa, "[newsvendor] CVaR level")->capture_default_str();
  cben->add_option("--radius", ben.radius, "[newsvendor] ambiguity radius")
      ->capture_default_str();
  cben->add_option("--out-dir", ben.out_dir, "Output directory")->required();
  add_solver_flags(cben, ben.solver);

  int threads = 1;
  app.add_option("--threads", threads,
                 "Cap on worker threads (solver stages currently use one worker; "
                 "the cap never raises parallelism)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(cgen)) return cmd_generate(gen);
    if (app.got_subcommand(csol)) return cmd_solve(sol);
    if (app.got_subcommand(cchk)) return cmd_check(chk);
    if (app.got_subcommand(cben)) return cmd_bench(ben);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}
