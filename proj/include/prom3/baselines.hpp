// prom3: first-order solver library for max-min-max robust optimization.
// Cutting-plane baseline: alternate an exact-penalty subgradient master over
// finite scenario sets with per-constraint pessimization, adding the worst
// scenario whenever it is violated beyond half the target tolerance.
// SPDX-License-Identifier: MIT
#ifndef PROM3_BASELINES_HPP
#define PROM3_BASELINES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "prom3/outer.hpp"
#include "prom3/problem.hpp"

namespace prom3 {

/// Settings for the penalty-subgradient master solver.
struct MasterConfig {
  /// Exact-penalty weight.  Unset: derived from the Slater margin as
  /// 2 (f0(x_slater) - f0_lower) / margin with the Lipschitz lower bound
  /// f0_lower = f0(x_slater) - D0 diam(X).  An explicit 0 disables the
  /// penalty entirely (the master then ignores all scenarios).
  std::optional<double> rho_pen;
  /// Projected-subgradient iterations per master solve.  0: derived from the
  /// step-rule bound (1.5 R L / (epsilon/4))^2, clamped to iters_cap.
  long long iters = 0;
  long long iters_cap = 50'000'000;  ///< guard for the auto iteration count
};

/// Settings for the cutting-plane loop.
struct CuttingPlaneConfig {
  double epsilon = 5e-2;       ///< target tolerance epsilon_cp
  long long max_rounds = 100;  ///< outer optimization/pessimization rounds
  MasterConfig master;
  long long pessimize_budget = 1LL << 20;  ///< per-pessimization iteration cap
  std::optional<Vec> x0;       ///< start point; default project(X, 0)
  bool virtual_time = false;   ///< time_s = 1e-9 * total oracle calls
};

/// Output of cutting_plane_solve.
struct CuttingPlaneResult {
  Vec x;                     ///< final master iterate
  double objective = 0.0;    ///< f0 at x
  double violation = 0.0;    ///< worst pessimized constraint value at x
  long long rounds = 0;      ///< rounds actually run
  bool converged = false;    ///< no constraint violated beyond epsilon/2
  double rho_pen = 0.0;      ///< penalty weight actually used
  long long master_iters = 0; ///< per-round master iterations actually used
  bool master_iters_capped = false;  ///< auto iteration count hit iters_cap
  std::vector<std::vector<Vec>> scenarios;  ///< final scenario sets, per m
  Trace trace;               ///< one row per round, same schema as solve()
  Counters counters;
};

/// Projected subgradient descent with suffix averaging on the exact-penalty
/// objective F(x) = f0(x) + rho_pen * [max_m max_{zhat in scenarios_m}
/// g_m(x, zhat)]_+ over X.  Steps eta_t = R / (L sqrt(t)) with R = diam(X)
/// and L the subgradient bound of F; returns the average of the last
/// ceil(iters/2) iterates.  With no scenarios (or rho_pen = 0) this is plain
/// projected subgradient descent on f0.
inline Vec master_solve(const ProblemSpec& spec,
                        const std::vector<std::vector<Vec>>& scenarios,
                        double rho_pen, long long iters, const Vec& x_start,
                        Counters& counters) {
  if (iters < 1) throw ConfigError("master_solve: need at least one iteration");
  if (!(rho_pen >= 0.0) || !std::isfinite(rho_pen)) {
    throw ConfigError("master_solve: rho_pen must be finite and >= 0");
  }
  if (scenarios.size() != spec.constraints.size()) {
    throw ConfigError("master_solve: one scenario list per constraint required");
  }
  const double R = spec.decision_set.diameter();
  bool any = false;
  double dmax = 0.0;
  for (std::size_t m = 0; m < scenarios.size(); ++m) {
    if (!scenarios[m].empty()) {
      any = true;
      dmax = std::max(dmax, spec.constraints[m].D);
    }
  }
  const double L = spec.objective.D0 + (any ? rho_pen * dmax : 0.0);
  if (!(L > 0.0)) throw ConfigError("master_solve: zero subgradient bound");

  Vec x = x_start;
  project_in_place(spec.decision_set, x);
  ++counters.proj;
  const long long suffix_start = iters - iters / 2;  // average t in [start, iters]
  Vec sum = Vec::Zero(x.size());
  long long averaged = 0;
  for (long long t = 1; t <= iters; ++t) {
    // Penalty term: value scan over every scenario, one subgradient at the
    // (first) argmax when the hinge is active.
    double worst = 0.0;
    std::size_t worst_m = 0;
    const Vec* worst_z = nullptr;
    for (std::size_t m = 0; m < scenarios.size(); ++m) {
      for (const Vec& z : scenarios[m]) {
        const double v = spec.constraints[m].eval(x, z);
        if (v > worst) {
          worst = v;
          worst_m = m;
          worst_z = &z;
        }
      }
    }
    Vec xi = spec.objective.subgrad(x);
    ++counters.f0;
    if (rho_pen > 0.0 && worst_z != nullptr) {
      xi += rho_pen * spec.constraints[worst_m].subgrad_x(x, *worst_z);
      ++counters.gx;
    }
    const double eta = R / (L * std::sqrt(static_cast<double>(t)));
    x -= eta * xi;
    project_in_place(spec.decision_set, x);
    ++counters.proj;
    if (!x.allFinite()) throw NumericalError("master_solve: iterate became non-finite", t);
    if (t >= suffix_start) {
      sum += x;
      ++averaged;
    }
  }
  return sum / static_cast<double>(averaged);
}

namespace detail {

/// Resolved cutting-plane parameters (penalty weight and master iterations).
struct ResolvedCp {
  double rho_pen = 0.0;
  long long iters = 0;
  bool capped = false;
};

inline ResolvedCp resolve_cutting_plane(const ProblemSpec& spec,
                                        const CuttingPlaneConfig& cfg,
                                        Counters& counters) {
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) {
    throw ConfigError("cutting_plane: epsilon must be positive");
  }
  if (cfg.max_rounds < 0) throw ConfigError("cutting_plane: max_rounds must be >= 0");
  ResolvedCp r;
  double dmax = 0.0;
  for (const auto& c : spec.constraints) dmax = std::max(dmax, c.D);
  if (cfg.master.rho_pen.has_value()) {
    r.rho_pen = *cfg.master.rho_pen;
    if (!(r.rho_pen >= 0.0) || !std::isfinite(r.rho_pen)) {
      throw ConfigError("cutting_plane: rho_pen must be finite and >= 0");
    }
  } else {
    // Exact-penalty weight from the certified Slater margin: any weight above
    // (f0(x_s) - f0_lower) / margin makes the penalized and the constrained
    // minimizers coincide for every scenario relaxation on the way.
    if (!spec.slater_point.has_value()) {
      throw ConfigError("cutting_plane: automatic rho_pen needs a Slater point");
    }
    const double theta = cfg.epsilon / 4.0;
    const double worst = slater_margin(spec, theta, cfg.pessimize_budget, counters);
    const double margin = -worst - theta;  // certified: true margin >= this
    if (!(margin > 0.0)) {
      throw ConfigError("cutting_plane: Slater point does not certify a negative margin");
    }
    // Lipschitz objective gap f0(x_s) - f0_lower <= D0 diam(X); the floor
    // keeps the penalty active for (near-)constant objectives.
    const double gap = spec.objective.D0 * spec.decision_set.diameter();
    r.rho_pen = 2.0 * std::max(gap, 1.0) / margin;
  }
  if (cfg.master.iters > 0) {
    r.iters = cfg.master.iters;
  } else {
    const double L = spec.objective.D0 + r.rho_pen * dmax;
    const double R = spec.decision_set.diameter();
    const double target = 1.5 * R * L / (cfg.epsilon / 4.0);
    const double want = std::ceil(target * target);
    r.iters = want > static_cast<double>(cfg.master.iters_cap) ? cfg.master.iters_cap
                                                               : static_cast<long long>(want);
    r.iters = std::max<long long>(r.iters, 100);
    r.capped = want > static_cast<double>(r.iters);
  }
  return r;
}

}  // namespace detail

/// Runs the optimization/pessimization alternation: solve the finite-scenario
/// master, pessimize every constraint at accuracy epsilon/4, and add each
/// scenario violated beyond epsilon/2 to its set; stop when none is.  Trace
/// rows use the same CSV schema as solve(); the violation column reuses the
/// round's pessimized values (these calls are algorithmic work here, so they
/// are included in the counters, unlike solve()'s reporting-only metrics).
inline CuttingPlaneResult cutting_plane_solve(const ProblemSpec& spec,
                                              const CuttingPlaneConfig& cfg = {}) {
  CuttingPlaneResult res;
  detail::SegmentTimer timer;
  timer.start();
  const auto p = detail::resolve_cutting_plane(spec, cfg, res.counters);
  res.rho_pen = p.rho_pen;
  res.master_iters = p.iters;
  res.master_iters_capped = p.capped;
  res.scenarios.assign(spec.constraints.size(), {});

  Vec x = cfg.x0.value_or(Vec::Zero(spec.decision_set.dim()));
  if (x.size() != spec.decision_set.dim()) {
    throw ConfigError("cutting_plane: x0 dimension mismatch");
  }
  project_in_place(spec.decision_set, x);
  ++res.counters.proj;

  for (long long round = 1; round <= cfg.max_rounds; ++round) {
    x = master_solve(spec, res.scenarios, p.rho_pen, p.iters, x, res.counters);
    res.rounds = round;

    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < spec.constraints.size(); ++m) {
      const auto pr = pessimize(spec.constraints[m], x, cfg.epsilon / 4.0,
                                cfg.pessimize_budget, res.counters);
      if (pr.budget_limited) res.trace.budget_limited = true;
      worst = std::max(worst, pr.value);
      if (pr.value > cfg.epsilon / 2.0) {
        res.scenarios[m].push_back(pr.z);
      }
    }

    timer.stop();
    TraceRow row;
    row.iter = round;
    row.time_s = cfg.virtual_time ? 1e-9 * static_cast<double>(res.counters.total())
                                  : timer.elapsed();
    row.objective = spec.objective.eval(x);
    row.violation = std::max(worst, 0.0);
    row.lambda_norm = 0.0;
    row.counts = res.counters;
    res.trace.rows.push_back(std::move(row));
    timer.start();

    res.violation = worst;
    if (worst <= cfg.epsilon / 2.0) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.objective = spec.objective.eval(x);
  return res;
}

}  // namespace prom3

#endif  // PROM3_BASELINES_HPP
