// prom3: first-order solver library for max-min-max robust optimization.
// Outer proximal-multiplier loop: lambda extrapolation, inner solves,
// trace/CSV emission, and the extended (penalized) variant.
// SPDX-License-Identifier: MIT
#ifndef PROM3_OUTER_HPP
#define PROM3_OUTER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "prom3/common.hpp"
#include "prom3/inner.hpp"
#include "prom3/problem.hpp"
#include "prom3/sets.hpp"

namespace prom3 {

/// Outer-loop parameters.  Optional fields resolve to their theory defaults at
/// solve time: alpha = 1/Lip_f, beta = 1/(2 Lip_f), theta = nu = 1/K,
/// T = ceil(c_T K^2) (nonsmooth) or ceil(c_T K) (smooth), budget = 10 T,
/// theta_report = theta/10.
struct OuterConfig {
  long long K = 100;                   ///< outer iteration count, >= 1
  std::optional<double> alpha;         ///< proximal weight, cap 1/Lip_f in theory mode
  std::optional<double> beta;          ///< multiplier step, cap 1/(2 Lip_f) in theory mode
  std::optional<double> theta;         ///< pessimization accuracy
  std::optional<double> nu;            ///< inner saddle accuracy target
  std::optional<long long> inner_T;    ///< fixed inner iteration count (overrides c_T)
  double c_T = 1.0;                    ///< inner T multiplier in the default policy
  StepMode step_mode = StepMode::nonsmooth;
  std::optional<long long> pessimize_budget; ///< cap on pessimization iterations
  bool reuse_ztilde = true;            ///< reuse inner z for active constraints
  std::optional<double> theta_report;  ///< accuracy for reported violations
  bool theory_mode = true;             ///< enforce the alpha/beta caps
  std::optional<Vec> x0;               ///< start point; default project(X, 0)
  bool inner_early_stop = false;       ///< gap-proxy early stop (non-theory runs only)
  bool virtual_time = false;           ///< time_s = 1e-9 * total oracle calls (deterministic)
};

/// One trace record per outer iteration.
struct TraceRow {
  long long iter = 0;       ///< outer iteration, 1-based
  double time_s = 0.0;      ///< cumulative algorithm wall-clock (or virtual) seconds
  double objective = 0.0;   ///< f0 at the running average iterate
  double violation = 0.0;   ///< max_m [f_m]_+ at the running average, theta_report accuracy
  double lambda_norm = 0.0; ///< ||lambda|| used by this round's inner solve
  Counters counts;          ///< cumulative oracle counters (CSV fields)
  Vec lambda;               ///< full multiplier vector (in-memory only)
};

/// Full per-run trace plus accumulated warnings.
struct Trace {
  std::vector<TraceRow> rows;
  bool budget_limited = false; ///< some pessimization hit its iteration budget
};

/// Serializes a trace with the exact column contract; floating-point fields
/// use 17 significant digits so equal doubles produce identical bytes.
inline void write_csv(const Trace& trace, std::ostream& os) {
  os << "iter,time_s,objective,violation,lambda_norm,calls_f0,calls_gx,calls_gz,"
        "calls_h,calls_proj\n";
  char buf[512];
  for (const auto& r : trace.rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%lld,%lld,%lld,%lld,%lld\n",
                  r.iter, r.time_s, r.objective, r.violation, r.lambda_norm, r.counts.f0,
                  r.counts.gx, r.counts.gz, r.counts.h, r.counts.proj);
    os << buf;
  }
}

/// Solver output: the averaged iterate (the theory object), the last iterate,
/// the closing multipliers and the trace.
struct OuterResult {
  Vec x_bar;        ///< (1/K) sum of the outer iterates
  Vec x_last;       ///< final outer iterate
  Vec lambda_last;  ///< multiplier used by the final inner solve
  Trace trace;
  Counters counters;
};

/// Extrapolated positive-part multiplier update:
///   lambda_next = [lambda + beta (2 g_curr - g_prev)]_+.
inline Vec lambda_update(const Vec& lambda, const Vec& g_curr, const Vec& g_prev,
                         double beta) {
  return (lambda + beta * (2.0 * g_curr - g_prev)).cwiseMax(0.0);
}

namespace detail {

/// Resolved outer parameters after applying the theory defaults.
struct ResolvedOuter {
  double alpha, beta, theta, nu, theta_report;
  long long T, budget;
};

inline ResolvedOuter resolve_outer(const ProblemSpec& spec, const OuterConfig& cfg) {
  if (cfg.K < 1) throw ConfigError("outer: iteration count K must be >= 1");
  if (cfg.c_T <= 0.0) throw ConfigError("outer: c_T must be positive");
  const double lip = lipschitz_f(spec);
  ResolvedOuter r;
  r.alpha = cfg.alpha.value_or(1.0 / lip);
  r.beta = cfg.beta.value_or(1.0 / (2.0 * lip));
  if (!(r.alpha > 0.0) || !(r.beta > 0.0)) {
    throw ConfigError("outer: alpha and beta must be positive");
  }
  if (cfg.theory_mode) {
    const double slack = 1.0 + 1e-12;
    if (r.alpha > slack / lip) {
      throw ConfigError("outer: theory mode requires alpha <= 1/Lip_f");
    }
    if (r.beta > slack / (2.0 * lip)) {
      throw ConfigError("outer: theory mode requires beta <= 1/(2 Lip_f)");
    }
  }
  const double K = static_cast<double>(cfg.K);
  r.theta = cfg.theta.value_or(1.0 / K);
  r.nu = cfg.nu.value_or(1.0 / K);
  if (!(r.theta > 0.0) || !(r.nu > 0.0)) {
    throw ConfigError("outer: theta and nu must be positive");
  }
  if (cfg.inner_T.has_value()) {
    r.T = *cfg.inner_T;
  } else if (cfg.step_mode == StepMode::nonsmooth) {
    r.T = static_cast<long long>(std::ceil(cfg.c_T * K * K));
  } else {
    r.T = static_cast<long long>(std::ceil(cfg.c_T * K));
  }
  if (r.T < 1) throw ConfigError("outer: resolved inner T must be >= 1");
  r.budget = cfg.pessimize_budget.value_or(10 * r.T);
  if (r.budget < 1) throw ConfigError("outer: pessimization budget must be >= 1");
  r.theta_report = cfg.theta_report.value_or(r.theta / 10.0);
  if (!(r.theta_report > 0.0)) throw ConfigError("outer: theta_report must be positive");
  return r;
}

/// Worst pessimized constraint value at x (not clamped), evaluated at
/// reporting accuracy with scratch counters so it never perturbs the
/// algorithm's oracle accounting.
inline double report_violation(const ProblemSpec& spec, const Vec& x, double theta) {
  double worst = -std::numeric_limits<double>::infinity();
  Counters scratch;
  for (const auto& c : spec.constraints) {
    // Reporting is honest about theta: derive the iteration count from the
    // accuracy requirement alone (with a generous hard cap as a guard).
    worst = std::max(worst, pessimize(c, x, theta, 1LL << 40, scratch).value);
  }
  return worst;
}

class SegmentTimer {
 public:
  void start() { begin_ = std::chrono::steady_clock::now(); }
  void stop() {
    elapsed_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - begin_)
                    .count();
  }
  double elapsed() const { return elapsed_; }

 private:
  std::chrono::steady_clock::time_point begin_;
  double elapsed_ = 0.0;
};

}  // namespace detail

/// Runs K rounds of the outer loop on a plain robust program:
/// pessimize (or reuse) -> extrapolated lambda update -> proximal inner solve
/// anchored at the current iterate.  Returns the averaged iterate and a trace
/// whose metric evaluations are excluded from both timing and counters.
inline OuterResult solve(const ProblemSpec& spec, const OuterConfig& cfg) {
  const auto p = detail::resolve_outer(spec, cfg);
  const std::size_t M = spec.constraints.size();
  Counters counters;

  detail::SegmentTimer timer;
  timer.start();

  Vec x;
  if (cfg.x0.has_value()) {
    if (!spec.decision_set.contains(*cfg.x0, 1e-9)) {
      throw ConfigError("outer: supplied x0 is not in the decision set");
    }
    x = *cfg.x0;
  } else {
    x = project(spec.decision_set, Vec::Zero(spec.decision_set.dim()));
    ++counters.proj;
  }

  Vec lambda = Vec::Zero(static_cast<Index>(M));
  Vec g_prev(static_cast<Index>(M));
  std::vector<Vec> z(M);          // z^k: pessimized (or reused) scenarios
  std::vector<Vec> z_tilde(M);    // warm starts / reuse candidates from the inner solve
  std::vector<bool> have_tilde(M, false);
  Vec sum_x = Vec::Zero(x.size());

  OuterResult out;
  out.trace.rows.reserve(static_cast<std::size_t>(cfg.K));

  for (long long k = 0; k < cfg.K; ++k) {
    // Pessimization step: z_m^k and g_m(x^k, z_m^k).  Constraints whose
    // multiplier is active may reuse the inner solve's averaged scenario.
    Vec g_curr(static_cast<Index>(M));
    for (std::size_t m = 0; m < M; ++m) {
      const bool reusable = cfg.reuse_ztilde && have_tilde[m] &&
                            lambda[static_cast<Index>(m)] > 0.0;
      if (reusable) {
        z[m] = z_tilde[m];
        g_curr[static_cast<Index>(m)] = spec.constraints[m].eval(x, z[m]);
      } else {
        auto res = pessimize(spec.constraints[m], x, p.theta, p.budget, counters);
        out.trace.budget_limited = out.trace.budget_limited || res.budget_limited;
        z[m] = std::move(res.z);
        g_curr[static_cast<Index>(m)] = res.value;
      }
    }
    if (k == 0) g_prev = g_curr;  // x^{-1} = x^0, z^{-1} = z^0 convention

    lambda = lambda_update(lambda, g_curr, g_prev, p.beta);
    g_prev = g_curr;

    InnerConfig icfg;
    icfg.T = p.T;
    icfg.step_mode = cfg.step_mode;
    if (cfg.step_mode == StepMode::smooth) {
      const auto caps = smooth_step_sizes(spec, lambda, p.alpha, p.T);
      icfg.gamma = caps.first;
      icfg.delta = caps.second;
    } else {
      icfg.gamma = 1.0 / std::sqrt(static_cast<double>(p.T));
      icfg.delta = icfg.gamma;
    }
    if (cfg.inner_early_stop && !cfg.theory_mode) {
      icfg.early_stop = true;
      icfg.early_stop_nu = p.nu;
    }

    // Warm start at (x^k, z^k) (or the inner's own last scenarios).
    InnerRoResult inner;
    try {
      inner = inner_solve_ro(spec, lambda, x, p.alpha, icfg, x, z);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("outer round ") + std::to_string(k + 1) + ": " +
                           e.what(), e.iteration());
    }
    counters += inner.counts;
    x = inner.x_avg;
    for (std::size_t m = 0; m < M; ++m) {
      if (lambda[static_cast<Index>(m)] > 0.0) {
        z_tilde[m] = inner.z_avg[m];
        have_tilde[m] = true;
      }
    }
    sum_x += x;

    // Metrics are evaluated outside the timed/counted section.
    timer.stop();
    const Vec x_bar = sum_x / static_cast<double>(k + 1);
    TraceRow row;
    row.iter = k + 1;
    row.time_s = cfg.virtual_time ? 1e-9 * static_cast<double>(counters.total())
                                  : timer.elapsed();
    row.objective = spec.objective.eval(x_bar);
    row.violation = std::max(0.0, detail::report_violation(spec, x_bar, p.theta_report));
    row.lambda_norm = lambda.norm();
    row.counts = counters;
    row.lambda = lambda;
    out.trace.rows.push_back(std::move(row));
    timer.start();
  }
  timer.stop();

  out.x_bar = sum_x / static_cast<double>(cfg.K);
  out.x_last = std::move(x);
  out.lambda_last = std::move(lambda);
  out.counters = counters;
  return out;
}

/// Result of the extended (penalized) solve: the outer result lives in the
/// extended space; the ExtendedProblem records the layout and caps needed to
/// read the x-block and dual blocks back out.
struct ExtendedOuterResult {
  OuterResult result;   ///< iterates over xt = (x, mu_1..mu_M)
  ExtendedProblem ext;  ///< layout, caps a_m and bounds G_m
  Vec x_bar;            ///< decision block of result.x_bar
};

/// Runs the outer loop on the penalized reformulation of an intersection-form
/// program.  Reported violations are the penalized surrogate
/// max_z [g_m - mu' h_m] at the running dual block; use certified_violation()
/// for an intersection-true bound on small instances.
inline ExtendedOuterResult solve_extended(const IntersectionSpec& in,
                                          const OuterConfig& cfg,
                                          int g_samples = 256) {
  Rng rng(0x70726f6d33ull);  // fixed seed: only used when some G_m is estimated
  ExtendedOuterResult out{OuterResult{}, penalize(in, rng, g_samples), Vec{}};
  out.result = solve(out.ext.spec, cfg);
  out.x_bar = out.ext.restrict_x(out.result.x_bar);
  return out;
}

/// Certified worst-case value of the ORIGINAL intersection constraints at x:
/// prefers the constraint's exact hook; otherwise runs projected supergradient
/// ascent with reference (Dykstra) projections onto base ∩ cut_region, which
/// requires the cut region to be supplied as a SetDescriptor.  Intended for
/// tests and small instances; every Dykstra call is a full reference solve.
inline double certified_violation(const IntersectionSpec& in, const Vec& x, double theta,
                                  double dykstra_tol = 1e-11,
                                  long long dykstra_max_iter = 200000) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < in.constraints.size(); ++m) {
    const auto& c = in.constraints[m];
    if (c.exact_intersection_pessimize) {
      worst = std::max(worst, c.exact_intersection_pessimize(x, theta).value);
      continue;
    }
    if (!c.cut_region.has_value()) {
      throw ConfigError("certified_violation: constraint " + std::to_string(m) +
                        " has neither an exact hook nor a geometric cut region");
    }
    const std::vector<SetDescriptor> pieces = {c.base.uncertainty_set, *c.cut_region};
    const auto proj = [&](const Vec& v) {
      return project_intersection_reference(pieces, v, dykstra_tol, dykstra_max_iter);
    };
    const double diam = c.base.uncertainty_set.diameter();
    const double E = c.base.E;
    const double ratio = diam * E / theta;
    long long T = static_cast<long long>(std::ceil(ratio * ratio));
    T = std::max<long long>(1, std::min<long long>(T, 1 << 22));
    Vec zv = proj(c.zbar);
    const double step = diam / (E * std::sqrt(static_cast<double>(T)));
    Vec sum = Vec::Zero(zv.size());
    for (long long t = 0; t < T; ++t) {
      sum += zv;
      const Vec zeta = c.base.supergrad_z(x, zv);
      zv = proj(zv - step * zeta);
    }
    const Vec avg = sum / static_cast<double>(T);
    worst = std::max(worst, std::max(c.base.eval(x, avg), c.base.eval(x, zv)));
  }
  return worst;
}

/// Epsilon-approximate optimality report.
struct EpsilonCheck {
  std::optional<bool> gap_ok;  ///< unset when no reference optimum is known
  double gap = std::numeric_limits<double>::quiet_NaN(); ///< f0(x) - f0*
  double violation = 0.0;      ///< max_m [f_m(x)]_+ at reporting accuracy
  bool violation_ok = false;
};

/// Checks x against the epsilon-approximate optimality definition: objective
/// gap vs a supplied reference optimum (when available) and clamped worst
/// constraint violation at accuracy min(theta_report, eps/10).
inline EpsilonCheck epsilon_check(const ProblemSpec& spec, const Vec& x, double eps,
                                  double theta_report,
                                  std::optional<double> f0_star = std::nullopt) {
  if (!(eps > 0.0)) throw ConfigError("epsilon_check: eps must be positive");
  const double theta = std::min(theta_report, eps / 10.0);
  EpsilonCheck out;
  out.violation = std::max(0.0, detail::report_violation(spec, x, theta));
  out.violation_ok = out.violation <= eps;
  if (f0_star.has_value()) {
    out.gap = spec.objective.eval(x) - *f0_star;
    out.gap_ok = out.gap <= eps;
  }
  return out;
}

}  // namespace prom3

#endif  // PROM3_OUTER_HPP
