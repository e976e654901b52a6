// prom3: first-order solver library for max-min-max robust optimization.
// Strongly-convex-concave saddle solver (modified projected subgradient
// ascent-descent) and its specialization to the proximal inner problem.
// SPDX-License-Identifier: MIT
#ifndef PROM3_INNER_HPP
#define PROM3_INNER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prom3/common.hpp"
#include "prom3/problem.hpp"
#include "prom3/sets.hpp"

namespace prom3 {

/// Saddle problem min_u max_v Fhat(u, v) + (sigma/2)||u - uhat||^2 over
/// u_set x v_set.  The oracles describe Fhat only; the proximal anchor term
/// is folded into the u-update analytically.
struct SaddleOracle {
  std::function<Vec(const Vec&, const Vec&)> u_subgrad;   ///< element of d_u Fhat
  std::function<Vec(const Vec&, const Vec&)> v_supergrad; ///< element of d_v(-Fhat)
  SetDescriptor u_set = SetDescriptor::ball(Vec::Zero(1), 1.0);
  SetDescriptor v_set = SetDescriptor::ball(Vec::Zero(1), 1.0);
  Vec uhat;           ///< strong-convexity anchor, must lie in u_set
  double sigma = 1.0; ///< anchor strength (sigma = 1/alpha for the inner problem)
};

/// Step-size regime for the inner solver.
enum class StepMode {
  nonsmooth, ///< gamma, delta <= 1/sqrt(T) (enforced)
  smooth     ///< caps from the smoothness constants (enforced when available)
};

/// Iteration plan for one inner solve.
struct InnerConfig {
  long long T = 100;     ///< iteration count, >= 1
  double gamma = 0.0;    ///< u-side step size, > 0
  double delta = 0.0;    ///< v-side step size, >= 0 (0 freezes v)
  StepMode step_mode = StepMode::nonsmooth;
  /// Optional gap-proxy early stop: halt when the combined prox-residual
  /// ||u_{t+1}-u_t||/gamma + ||v_{t+1}-v_t||/delta drops below nu/10.
  /// Off by default; theory-mode runs keep T fixed.
  bool early_stop = false;
  double early_stop_nu = 0.0;
};

/// Output of the generic saddle solver.
struct InnerResult {
  Vec u_avg, v_avg;   ///< averages over t = 1..T (feasible by convexity)
  Vec u_last, v_last; ///< final iterates
  long long iterations = 0;        ///< iterations actually run (early stop may shorten)
  long long u_subgrad_calls = 0;   ///< exactly T
  long long v_supergrad_calls = 0; ///< exactly T + 1 (one initial evaluation)
  long long projections = 0;       ///< exactly 2T (one per side per iteration)
};

/// Output of the robust-optimization specialization.
struct InnerRoResult {
  Vec x_avg;               ///< averaged decision iterate
  std::vector<Vec> z_avg;  ///< averaged scenario per constraint (frozen if skipped)
  Vec x_last;
  std::vector<Vec> z_last;
  long long iterations = 0;
  Counters counts;         ///< f0/gx/gz/h/proj oracle accounting
};

namespace detail {

inline void validate_inner_config(const InnerConfig& cfg) {
  if (cfg.T < 1) throw ConfigError("inner: iteration count T must be >= 1");
  if (!(cfg.gamma > 0.0) || !std::isfinite(cfg.gamma)) {
    throw ConfigError("inner: step size gamma must be positive");
  }
  if (cfg.delta < 0.0 || !std::isfinite(cfg.delta)) {
    throw ConfigError("inner: step size delta must be nonnegative");
  }
  if (cfg.step_mode == StepMode::nonsmooth) {
    const double cap = 1.0 / std::sqrt(static_cast<double>(cfg.T));
    const double slack = 1.0 + 1e-12;
    if (cfg.gamma > cap * slack || cfg.delta > cap * slack) {
      throw ConfigError("inner: nonsmooth mode requires gamma, delta <= 1/sqrt(T)");
    }
  }
}

}  // namespace detail

/// Runs T iterations of modified projected subgradient ascent-descent:
///   v_{t+1} = Proj_V(v_t - delta (2 zeta_t - zeta_{t-1})),  zeta_{-1} = zeta_0,
///   u_{t+1} = Proj_U((gamma sigma uhat + u_t - gamma xi_t) / (1 + gamma sigma)),
/// with xi_t evaluated at (u_t, v_{t+1}) and zeta_{t+1} at (u_{t+1}, v_{t+1}).
/// Returns the averages over t = 1..T.  Oracle calls: exactly T u-subgradients,
/// T v-supergradients plus the initial zeta_0, and T projections per side.
inline InnerResult inner_solve(const SaddleOracle& oracle, const InnerConfig& cfg,
                               const Vec& u0, const Vec& v0) {
  detail::validate_inner_config(cfg);
  if (!(oracle.sigma > 0.0)) throw ConfigError("inner: sigma must be positive");
  if (!oracle.u_set.contains(u0, 1e-9)) {
    throw std::invalid_argument("inner_solve: u0 is not in the u-set");
  }
  if (!oracle.v_set.contains(v0, 1e-9)) {
    throw std::invalid_argument("inner_solve: v0 is not in the v-set");
  }
  if (!oracle.u_set.contains(oracle.uhat, 1e-9)) {
    throw std::invalid_argument("inner_solve: anchor uhat is not in the u-set");
  }

  InnerResult res;
  Vec u = u0, v = v0;
  Vec zeta = oracle.v_supergrad(u, v);  // zeta_0; also serves as zeta_{-1}
  ++res.v_supergrad_calls;
  Vec zeta_prev = zeta;
  Vec sum_u = Vec::Zero(u.size());
  Vec sum_v = Vec::Zero(v.size());
  const double gs = cfg.gamma * oracle.sigma;

  long long t = 0;
  for (; t < cfg.T; ++t) {
    const Vec v_cand = v - cfg.delta * (2.0 * zeta - zeta_prev);
    if (!v_cand.allFinite()) {
      throw NumericalError("inner_solve: v-iterate became non-finite", t);
    }
    const Vec v_next = project(oracle.v_set, v_cand);
    ++res.projections;
    const Vec xi = oracle.u_subgrad(u, v_next);
    ++res.u_subgrad_calls;
    const Vec u_cand = (gs * oracle.uhat + u - cfg.gamma * xi) / (1.0 + gs);
    if (!u_cand.allFinite()) {
      throw NumericalError("inner_solve: u-iterate became non-finite", t);
    }
    const Vec u_next = project(oracle.u_set, u_cand);
    ++res.projections;

    double residual = std::numeric_limits<double>::infinity();
    if (cfg.early_stop) {
      residual = (u_next - u).norm() / cfg.gamma;
      if (cfg.delta > 0.0) residual += (v_next - v).norm() / cfg.delta;
    }

    zeta_prev = std::move(zeta);
    u = u_next;
    v = v_next;
    zeta = oracle.v_supergrad(u, v);  // zeta_{t+1}, eager for the next round
    ++res.v_supergrad_calls;
    sum_u += u;
    sum_v += v;

    if (cfg.early_stop && residual <= cfg.early_stop_nu / 10.0) {
      ++t;
      break;
    }
  }

  res.iterations = t;
  res.u_avg = sum_u / static_cast<double>(t);
  res.v_avg = sum_v / static_cast<double>(t);
  res.u_last = std::move(u);
  res.v_last = std::move(v);
  return res;
}

/// Convergence-guaranteeing step-size caps for the smooth inner problem at
/// multiplier lambda:
///   gamma <= 1 / (D0' + sum_m lambda_m D'_m + sqrt(2 sum_m (lambda_m E'_{m,1})^2))
///   delta <= 1 / (2 sqrt(2) max_m lambda_m E'_{m,2} + sqrt(2 sum_m (lambda_m E'_{m,1})^2))
/// The caps do not involve alpha; the parameter is validated for interface
/// symmetry with the nonsmooth path.  When every lambda_m = 0 the delta cap is
/// infinite; pass T > 0 to fall back to the 1/sqrt(T) safeguard (delta is then
/// irrelevant because no z moves).
inline std::pair<double, double> smooth_step_sizes(const ProblemSpec& spec, const Vec& lambda,
                                                   double alpha, long long T_guard = 0) {
  if (!(alpha > 0.0)) throw ConfigError("smooth_step_sizes: alpha must be positive");
  if (static_cast<std::size_t>(lambda.size()) != spec.constraints.size()) {
    throw ConfigError("smooth_step_sizes: lambda size does not match constraint count");
  }
  if (!spec.objective.D0_smooth.has_value()) {
    throw ConfigError("smooth_step_sizes: objective smoothness constant D0' missing");
  }
  double lin = *spec.objective.D0_smooth;
  double cross_sq = 0.0;
  double vv = 0.0;
  for (std::size_t m = 0; m < spec.constraints.size(); ++m) {
    const auto& c = spec.constraints[m];
    if (!c.D_smooth || !c.E1_smooth || !c.E2_smooth) {
      throw ConfigError("smooth_step_sizes: constraint " + std::to_string(m) +
                        " is missing smoothness constants");
    }
    const double lm = lambda[static_cast<Index>(m)];
    lin += lm * *c.D_smooth;
    cross_sq += (lm * *c.E1_smooth) * (lm * *c.E1_smooth);
    vv = std::max(vv, lm * *c.E2_smooth);
  }
  const double cross = std::sqrt(2.0 * cross_sq);
  // A zero denominator means the weighted coupling is affine in that block;
  // any step converges, so fall back to the scale-free 1/sqrt(T) guard.
  const auto cap = [T_guard](double denom) {
    if (denom > 0.0) return 1.0 / denom;
    return T_guard > 0 ? 1.0 / std::sqrt(static_cast<double>(T_guard))
                       : std::numeric_limits<double>::infinity();
  };
  return {cap(lin + cross), cap(2.0 * std::sqrt(2.0) * vv + cross)};
}

/// Solves the proximal inner problem of the outer loop:
///   min_{x in X} max_{z_m in Z_m}  f0(x) + sum_m lambda_m g_m(x, z_m)
///                                + (1/(2 alpha)) ||x - x_anchor||^2,
/// warm-started at (x0, z0).  Constraints with lambda_m = 0 are skipped
/// entirely: their z stays frozen and costs no oracle calls.  Oracle
/// accounting per iteration: one f0-subgradient, one g-subgradient and one
/// z-projection per active constraint, one x-projection, plus the eager
/// supergradient refresh (T + 1 per active constraint in total).
inline InnerRoResult inner_solve_ro(const ProblemSpec& spec, const Vec& lambda,
                                    const Vec& x_anchor, double alpha,
                                    const InnerConfig& cfg, const Vec& x0,
                                    const std::vector<Vec>& z0) {
  const std::size_t M = spec.constraints.size();
  if (static_cast<std::size_t>(lambda.size()) != M) {
    throw ConfigError("inner_solve_ro: lambda size does not match constraint count");
  }
  if (z0.size() != M) {
    throw ConfigError("inner_solve_ro: warm-start z0 must have one block per constraint");
  }
  if (lambda.minCoeff() < 0.0) {
    throw ConfigError("inner_solve_ro: lambda must be nonnegative");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("inner_solve_ro: alpha must be positive");
  }
  detail::validate_inner_config(cfg);
  if (cfg.step_mode == StepMode::smooth) {
    const auto caps = smooth_step_sizes(spec, lambda, alpha, cfg.T);
    const double slack = 1.0 + 1e-12;
    if (cfg.gamma > caps.first * slack || cfg.delta > caps.second * slack) {
      throw ConfigError("inner_solve_ro: smooth-mode steps exceed their caps");
    }
  }

  std::vector<std::size_t> active;
  for (std::size_t m = 0; m < M; ++m) {
    if (lambda[static_cast<Index>(m)] > 0.0) active.push_back(m);
  }

  InnerRoResult out;
  out.counts = Counters{};

  // Stack the active z-blocks into one v-vector; folding lambda_m into the
  // stacked supergradient makes the per-block update
  //   z_{t+1,m} = Proj_{Z_m}(z_{t,m} - delta lambda_m (2 zeta_t - zeta_{t-1}))
  // an instance of the generic v-update over the product set.
  std::vector<Index> offsets(active.size());
  Index v_dim = 0;
  std::vector<SetDescriptor> v_blocks;
  for (std::size_t j = 0; j < active.size(); ++j) {
    offsets[j] = v_dim;
    v_dim += z0[active[j]].size();
    v_blocks.push_back(spec.constraints[active[j]].uncertainty_set);
  }

  Counters& n = out.counts;
  SaddleOracle oracle;
  oracle.u_set = spec.decision_set;
  oracle.uhat = x_anchor;
  oracle.sigma = 1.0 / alpha;
  oracle.u_subgrad = [&](const Vec& x, const Vec& v) {
    Vec xi = spec.objective.subgrad(x);
    ++n.f0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      const auto& c = spec.constraints[active[j]];
      const double lm = lambda[static_cast<Index>(active[j])];
      xi += lm * c.subgrad_x(x, v.segment(offsets[j], c.uncertainty_set.dim()));
      ++n.gx;
      n.h += c.h_per_call;
    }
    return xi;
  };

  if (active.empty()) {
    // Pure proximal minimization of f0: drive the generic solver with a
    // zero-dimensional stand-in v that costs nothing.
    oracle.v_set = SetDescriptor::ball(Vec::Zero(1), 0.0);
    oracle.v_supergrad = [](const Vec&, const Vec&) { return Vec(Vec::Zero(1)); };
    const InnerResult r = inner_solve(oracle, cfg, x0, Vec::Zero(1));
    out.x_avg = r.u_avg;
    out.x_last = r.u_last;
    out.z_avg = z0;
    out.z_last = z0;
    out.iterations = r.iterations;
    n.proj += r.iterations;  // x-projections only; the stand-in v is not counted
    return out;
  }

  oracle.v_set = v_blocks.size() == 1 ? v_blocks[0] : SetDescriptor::product(v_blocks);
  oracle.v_supergrad = [&](const Vec& x, const Vec& v) {
    Vec zeta(v.size());
    for (std::size_t j = 0; j < active.size(); ++j) {
      const auto& c = spec.constraints[active[j]];
      const Index dim = c.uncertainty_set.dim();
      const double lm = lambda[static_cast<Index>(active[j])];
      zeta.segment(offsets[j], dim) = lm * c.supergrad_z(x, v.segment(offsets[j], dim));
      ++n.gz;
      n.h += c.h_per_call;
    }
    return zeta;
  };

  Vec v0(v_dim);
  for (std::size_t j = 0; j < active.size(); ++j) {
    v0.segment(offsets[j], z0[active[j]].size()) = z0[active[j]];
  }

  const InnerResult r = inner_solve(oracle, cfg, x0, v0);
  out.x_avg = r.u_avg;
  out.x_last = r.u_last;
  out.iterations = r.iterations;
  // Per-block projection accounting: one x-projection plus one per active z.
  n.proj += r.iterations * (1 + static_cast<long long>(active.size()));
  out.z_avg = z0;
  out.z_last = z0;
  for (std::size_t j = 0; j < active.size(); ++j) {
    const Index dim = z0[active[j]].size();
    out.z_avg[active[j]] = r.v_avg.segment(offsets[j], dim);
    out.z_last[active[j]] = r.v_last.segment(offsets[j], dim);
  }
  return out;
}

}  // namespace prom3

#endif  // PROM3_INNER_HPP
