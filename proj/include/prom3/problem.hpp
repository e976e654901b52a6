// prom3: first-order solver library for max-min-max robust optimization.
// Oracle-based problem model: objective/constraint oracles, pessimization,
// and the penalized transform for intersection-form uncertainty sets.
// SPDX-License-Identifier: MIT
#ifndef PROM3_PROBLEM_HPP
#define PROM3_PROBLEM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prom3/common.hpp"
#include "prom3/rng.hpp"
#include "prom3/sets.hpp"

namespace prom3 {

/// Result of maximizing one constraint over its uncertainty set at fixed x.
struct PessimizeResult {
  Vec z;                       ///< approximate maximizer in Z_m
  double value = 0.0;          ///< g_m(x, z)
  bool budget_limited = false; ///< true when the iteration budget could not meet theta
};

/// Convex objective f0 with a subgradient oracle and declared bounds.
struct ObjectiveOracle {
  std::function<double(const Vec&)> eval;  ///< x -> f0(x)
  std::function<Vec(const Vec&)> subgrad;  ///< x -> xi0 in subdifferential of f0
  double D0 = 0.0;                         ///< sup-norm bound on subgradients over X
  std::optional<double> D0_smooth;         ///< Lipschitz constant of grad f0, if smooth
};

/// One robust constraint g_m(x, z_m): convex in x, concave in z_m.
///
/// Sign convention: supergrad_z returns an element of the subdifferential of
/// z -> -g_m(x, z), so an ascent step on g_m moves along -supergrad_z.
struct ConstraintOracle {
  std::function<double(const Vec&, const Vec&)> eval;     ///< (x, z) -> g_m(x, z)
  std::function<Vec(const Vec&, const Vec&)> subgrad_x;   ///< element of d_x g_m(x, z)
  std::function<Vec(const Vec&, const Vec&)> supergrad_z; ///< element of d_z(-g_m)(x, z)
  SetDescriptor uncertainty_set = SetDescriptor::ball(Vec::Zero(1), 1.0); ///< Z_m
  double D = 0.0;                                         ///< bound on ||subgrad_x||
  double E = 0.0;                                         ///< bound on ||supergrad_z||
  std::optional<double> D_smooth;   ///< Lipschitz constant of d_x g_m in x
  std::optional<double> E1_smooth;  ///< Lipschitz constant of d_z g_m in x (cross term)
  std::optional<double> E2_smooth;  ///< Lipschitz constant of d_z g_m in z

  /// Optional closed-form pessimizer: (x, theta) -> exact-or-theta maximizer.
  /// When present it replaces the iterative fallback in pessimize(); invocations
  /// are tallied in Counters::exact_pessimize rather than gz/proj.
  std::function<PessimizeResult(const Vec&, double)> exact_pessimize;

  /// Cut-function evaluations implied by each eval/subgrad_x/supergrad_z call.
  /// Zero for plain oracles; set to 1 by penalize() so call sites can account
  /// for the h-oracle touches hidden inside the penalized closures.
  int h_per_call = 0;
};

/// A robust program: min_{x in X} f0(x) s.t. max_{z_m in Z_m} g_m(x, z_m) <= 0.
struct ProblemSpec {
  ObjectiveOracle objective;
  std::vector<ConstraintOracle> constraints;
  SetDescriptor decision_set = SetDescriptor::ball(Vec::Zero(1), 1.0); ///< X
  std::optional<Vec> slater_point; ///< some xbar with max_z g_m(xbar, z) < 0 for all m
};

/// One convex cut h_{m,i}(z) <= 0 carving the base uncertainty set.
struct CutFunction {
  std::function<double(const Vec&)> eval;  ///< z -> h(z)
  std::function<Vec(const Vec&)> subgrad;  ///< z -> eta in subdifferential of h
  double F = 0.0;                          ///< bound on ||subgrad|| over the base set
  std::optional<double> F_smooth;          ///< Lipschitz constant of grad h, if smooth
};

/// Constraint whose uncertainty set is an intersection: Z_m = base set cut by
/// { z : h_{m,i}(z) <= 0, i in [I_m] } with a strictly feasible zbar.
struct IntersectionConstraintOracle {
  ConstraintOracle base;          ///< g_m over the projection-friendly base set
  std::vector<CutFunction> cuts;  ///< h_{m,1..I_m}
  Vec zbar;                       ///< inner Slater point: h_{m,i}(zbar) < 0 for all i
  std::optional<double> G;        ///< analytic lower bound: g_m(x, zbar) >= G > -inf, G < 0
  std::optional<double> h_norm_bound; ///< analytic bound on ||h_m(z)|| over the base set

  /// Optional geometric carrier of { z : h_{m,i}(z) <= 0 for all i } when the
  /// cut region happens to be a describable set (e.g. a ball).  Enables the
  /// reference (Dykstra) projector onto the true intersection for certified
  /// violation reporting and direct solves.
  std::optional<SetDescriptor> cut_region;

  /// Optional closed-form maximizer of z -> g_m(x,z) - mu' h_m(z) over the base
  /// set: (x, mu_m, theta) -> result.  Used by the extended solve path.
  std::function<PessimizeResult(const Vec&, const Vec&, double)> exact_penalized_pessimize;

  /// Optional certified maximizer of g_m over the intersection itself:
  /// (x, theta) -> result.  Used only for reporting true constraint violations.
  std::function<PessimizeResult(const Vec&, double)> exact_intersection_pessimize;
};

/// A robust program whose constraints carry intersection-form uncertainty sets.
struct IntersectionSpec {
  ObjectiveOracle objective;
  std::vector<IntersectionConstraintOracle> constraints;
  SetDescriptor decision_set = SetDescriptor::ball(Vec::Zero(1), 1.0); ///< X
  std::optional<Vec> slater_point;
};

/// The penalized reformulation over xt = (x, mu_1, ..., mu_M).
struct ExtendedProblem {
  ProblemSpec spec;            ///< plain robust program over the extended decision set
  Index x_dim = 0;             ///< dimension of the original x block
  std::vector<Index> mu_offset; ///< start of mu_m inside xt
  std::vector<Index> mu_count;  ///< I_m = number of cuts for constraint m
  std::vector<double> a;        ///< dual caps a_m = G_m / max_i h_{m,i}(zbar_m)
  std::vector<double> G;        ///< strictly negative lower bounds G_m
  bool heuristic_G = false;        ///< true when any G_m came from estimate_G
  bool heuristic_h_bound = false;  ///< true when any h-norm bound was sampled

  /// Zero-pads the dual blocks: x -> (x, 0, ..., 0).
  Vec lift(const Vec& x) const {
    Vec xt = Vec::Zero(spec.decision_set.dim());
    xt.head(x_dim) = x;
    return xt;
  }
  /// Extracts the original decision block from xt.
  Vec restrict_x(const Vec& xt) const { return xt.head(x_dim); }
  /// Extracts the dual block mu_m from xt.
  Vec mu_block(const Vec& xt, std::size_t m) const {
    return xt.segment(mu_offset.at(m), mu_count.at(m));
  }
};

/// Lipschitz constant of the pessimized max-constraint map: sqrt(sum_m D_m^2).
inline double lipschitz_f(const ProblemSpec& spec) {
  double sum = 0.0;
  for (std::size_t m = 0; m < spec.constraints.size(); ++m) {
    const double d = spec.constraints[m].D;
    if (!std::isfinite(d) || d <= 0.0) {
      throw ConfigError("lipschitz_f: constraint " + std::to_string(m) +
                        " is missing a positive subgradient bound D");
    }
    sum += d * d;
  }
  return std::sqrt(sum);
}

/// Approximately maximizes z -> g_m(x, z) over Z_m to additive accuracy theta.
///
/// Uses the oracle's closed-form pessimizer when present; otherwise runs
/// projected supergradient ascent with the averaged-iterate guarantee
/// diam(Z_m) * E_m / sqrt(T) <= theta, capping the derived iteration count at
/// `budget` (and flagging the result when the cap bites).  Returns the better
/// of the averaged and the last iterate.
inline PessimizeResult pessimize(const ConstraintOracle& oracle, const Vec& x,
                                 double theta, long long budget, Counters& counters) {
  if (theta <= 0.0 || !std::isfinite(theta)) {
    throw ConfigError("pessimize: accuracy theta must be positive");
  }
  if (budget <= 0) {
    throw ConfigError("pessimize: iteration budget must be positive");
  }
  if (oracle.exact_pessimize) {
    ++counters.exact_pessimize;
    return oracle.exact_pessimize(x, theta);
  }
  const SetDescriptor& zset = oracle.uncertainty_set;
  const double diam = zset.diameter();
  if (!std::isfinite(diam)) {
    throw ConfigError("pessimize: uncertainty set has unbounded diameter");
  }
  Vec z = zset.interior_point();
  if (diam == 0.0) {
    return {z, oracle.eval(x, z), false};
  }
  if (!std::isfinite(oracle.E) || oracle.E <= 0.0) {
    throw ConfigError("pessimize: oracle is missing a positive supergradient bound E");
  }
  const double ratio = diam * oracle.E / theta;
  const double t_ideal = std::ceil(ratio * ratio);
  bool limited = false;
  long long T = budget;
  if (t_ideal <= static_cast<double>(budget)) {
    T = std::max<long long>(1, static_cast<long long>(t_ideal));
  } else {
    limited = true;
  }
  const double step = diam / (oracle.E * std::sqrt(static_cast<double>(T)));
  Vec sum = Vec::Zero(z.size());
  for (long long t = 0; t < T; ++t) {
    sum += z;
    const Vec zeta = oracle.supergrad_z(x, z);  // element of d_z(-g)
    ++counters.gz;
    counters.h += oracle.h_per_call;
    z = project(zset, z - step * zeta);
    ++counters.proj;
  }
  const Vec avg = sum / static_cast<double>(T);
  const double val_avg = oracle.eval(x, avg);
  const double val_last = oracle.eval(x, z);
  if (val_last > val_avg) {
    return {z, val_last, limited};
  }
  return {avg, val_avg, limited};
}

/// Convenience overload with scratch counters.
inline PessimizeResult pessimize(const ConstraintOracle& oracle, const Vec& x,
                                 double theta, long long budget) {
  Counters scratch;
  return pessimize(oracle, x, theta, budget, scratch);
}

/// Samples min_x g_m(x, zbar) over the decision set and subtracts a slack to
/// produce a heuristic lower bound G_m < 0.  With slack = nullopt the slack
/// defaults to 0.1 * |sampled min|.  Throws when the sampled minimum is >= 0,
/// since then zbar certifies nothing and an analytic G_m is required.
inline double estimate_G(const ConstraintOracle& oracle, const Vec& zbar,
                         const SetDescriptor& decision_set, int samples,
                         std::optional<double> slack, Rng& rng) {
  if (samples <= 0) {
    throw ConfigError("estimate_G: need at least one sample");
  }
  double lo = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const Vec x = decision_set.sample(rng);
    lo = std::min(lo, oracle.eval(x, zbar));
  }
  if (lo >= 0.0) {
    throw ConfigError("estimate_G: sampled min of g(x, zbar) is nonnegative (" +
                      std::to_string(lo) + "); supply an analytic G");
  }
  const double pad = slack.value_or(0.1 * std::abs(lo));
  if (pad < 0.0) {
    throw ConfigError("estimate_G: slack must be nonnegative");
  }
  return lo - pad;
}

namespace detail {

/// Evaluates all cuts of one intersection constraint as a vector.
inline Vec eval_cuts(const std::vector<CutFunction>& cuts, const Vec& z) {
  Vec h(static_cast<Index>(cuts.size()));
  for (std::size_t i = 0; i < cuts.size(); ++i) h[static_cast<Index>(i)] = cuts[i].eval(z);
  return h;
}

}  // namespace detail

/// Builds the penalized reformulation of an intersection-form robust program.
///
/// Each constraint becomes g~_m(xt, z) = g_m(x, z) - mu_m' h_m(z) over the base
/// set, with xt = (x, mu_1, ..., mu_M) ranging over X x prod_m [0, a_m]^{I_m}
/// and a_m = G_m / max_i h_{m,i}(zbar_m).  Missing G_m are estimated by
/// sampling (estimate_G with `g_samples` draws from `rng`) and flagged.
inline ExtendedProblem penalize(const IntersectionSpec& in, Rng& rng, int g_samples = 256) {
  if (in.constraints.empty()) {
    throw ConfigError("penalize: no constraints");
  }
  ExtendedProblem out;
  out.x_dim = in.decision_set.dim();
  const std::size_t M = in.constraints.size();

  // Pass 1: caps, bounds and layout.
  std::vector<double> hbar_max(M);
  Index total = out.x_dim;
  for (std::size_t m = 0; m < M; ++m) {
    const auto& c = in.constraints[m];
    if (c.cuts.empty()) {
      throw ConfigError("penalize: constraint " + std::to_string(m) + " has no cuts");
    }
    const Vec hbar = detail::eval_cuts(c.cuts, c.zbar);
    const double hmax = hbar.maxCoeff();
    if (hmax >= 0.0) {
      throw ConfigError("penalize: constraint " + std::to_string(m) +
                        " has h(zbar) >= 0; zbar is not an inner Slater point");
    }
    hbar_max[m] = hmax;
    double Gm;
    if (c.G.has_value()) {
      Gm = *c.G;
    } else {
      Gm = estimate_G(c.base, c.zbar, in.decision_set, g_samples, std::nullopt, rng);
      out.heuristic_G = true;
    }
    if (Gm >= 0.0) {
      throw ConfigError("penalize: constraint " + std::to_string(m) +
                        " has nonnegative lower bound G; G must be < 0");
    }
    out.G.push_back(Gm);
    out.a.push_back(Gm / hmax);  // both negative -> positive cap
    out.mu_offset.push_back(total);
    out.mu_count.push_back(static_cast<Index>(c.cuts.size()));
    total += static_cast<Index>(c.cuts.size());
  }

  // Extended decision set: X x prod_m [0, a_m]^{I_m}.
  std::vector<SetDescriptor> blocks;
  blocks.push_back(in.decision_set);
  for (std::size_t m = 0; m < M; ++m) {
    blocks.push_back(SetDescriptor::interval_box(out.a[m], out.mu_count[m]));
  }
  out.spec.decision_set = SetDescriptor::product(blocks);

  // Objective: f0 over the x block, zero subgradient on the dual blocks.
  const Index x_dim = out.x_dim;
  out.spec.objective.eval = [obj = in.objective, x_dim](const Vec& xt) {
    return obj.eval(xt.head(x_dim));
  };
  out.spec.objective.subgrad = [obj = in.objective, x_dim, total](const Vec& xt) {
    Vec g = Vec::Zero(total);
    g.head(x_dim) = obj.subgrad(xt.head(x_dim));
    return g;
  };
  out.spec.objective.D0 = in.objective.D0;
  out.spec.objective.D0_smooth = in.objective.D0_smooth;

  // Pass 2: penalized constraint oracles.
  for (std::size_t m = 0; m < M; ++m) {
    const auto c = std::make_shared<IntersectionConstraintOracle>(in.constraints[m]);
    const Index off = out.mu_offset[m];
    const Index cnt = out.mu_count[m];
    ConstraintOracle t;
    t.uncertainty_set = c->base.uncertainty_set;
    t.h_per_call = 1;
    t.eval = [c, off, cnt, x_dim](const Vec& xt, const Vec& z) {
      const Vec h = detail::eval_cuts(c->cuts, z);
      return c->base.eval(xt.head(x_dim), z) - xt.segment(off, cnt).dot(h);
    };
    t.subgrad_x = [c, off, cnt, x_dim, total](const Vec& xt, const Vec& z) {
      Vec g = Vec::Zero(total);
      g.head(x_dim) = c->base.subgrad_x(xt.head(x_dim), z);
      g.segment(off, cnt) = -detail::eval_cuts(c->cuts, z);
      return g;
    };
    t.supergrad_z = [c, off, cnt, x_dim](const Vec& xt, const Vec& z) {
      Vec zeta = c->base.supergrad_z(xt.head(x_dim), z);
      for (Index i = 0; i < cnt; ++i) {
        zeta += xt[off + i] * c->cuts[static_cast<std::size_t>(i)].subgrad(z);
      }
      return zeta;
    };
    if (c->exact_penalized_pessimize) {
      t.exact_pessimize = [c, off, cnt, x_dim](const Vec& xt, double theta) {
        return c->exact_penalized_pessimize(xt.head(x_dim), xt.segment(off, cnt), theta);
      };
    }

    // Declared bounds for the extended oracle.  x~-subgradients stack
    // (xi_m, -h_m), so D~ = sqrt(D^2 + Hbound^2) with Hbound a bound on
    // ||h_m|| over the base set; z-supergradients add sum_i mu_i eta_i,
    // bounded by a_m * I_m * F_m.
    double hbound;
    if (c->h_norm_bound.has_value()) {
      hbound = *c->h_norm_bound;
    } else {
      hbound = 0.0;
      Rng hrng(0x9e3779b97f4a7c15ull ^ static_cast<std::uint64_t>(m));
      for (int s = 0; s < 64; ++s) {
        const Vec zs = c->base.uncertainty_set.sample(hrng);
        hbound = std::max(hbound, detail::eval_cuts(c->cuts, zs).norm());
      }
      hbound *= 1.5;  // sampled estimate; padded and flagged as heuristic
      out.heuristic_h_bound = true;
    }
    double fsum = 0.0, fsq = 0.0, fpsum = 0.0;
    bool cuts_smooth = true;
    for (const auto& cut : c->cuts) {
      fsum += cut.F;
      fsq += cut.F * cut.F;
      cuts_smooth = cuts_smooth && cut.F_smooth.has_value();
    }
    t.D = std::sqrt(c->base.D * c->base.D + hbound * hbound);
    t.E = c->base.E + out.a[m] * fsum;

    // Smoothness survives penalization: the mu-gradient block -h(z) is
    // constant in xt (so D~' = D'), the z-gradient picks up sum_i mu_i eta_i,
    // Lipschitz in mu_i through ||eta_i|| <= F_i and in z through a_m * F_i'.
    t.D_smooth = c->base.D_smooth;
    if (cuts_smooth && c->base.E1_smooth.has_value() && c->base.E2_smooth.has_value()) {
      for (const auto& cut : c->cuts) fpsum += *cut.F_smooth;
      t.E1_smooth = std::sqrt(*c->base.E1_smooth * *c->base.E1_smooth + fsq);
      t.E2_smooth = *c->base.E2_smooth + out.a[m] * fpsum;
    }
    out.spec.constraints.push_back(std::move(t));
  }

  if (in.slater_point.has_value()) {
    out.spec.slater_point = out.lift(*in.slater_point);
  }
  return out;
}

/// Builds the plain robust program whose uncertainty sets are the TRUE
/// intersections, projected via Dykstra (SetDescriptor::intersection).  This
/// is the reference "direct solve" arm used to cross-check the penalized
/// reformulation on small instances; every constraint must carry a cut_region
/// descriptor.  The base oracle's closed-form pessimizer is dropped (it
/// maximizes over the base set only) and replaced by
/// exact_intersection_pessimize when available.
inline ProblemSpec direct_intersection_spec(const IntersectionSpec& in,
                                            double dykstra_tol = 1e-12,
                                            long dykstra_max_iter = 200000) {
  if (in.constraints.empty()) {
    throw ConfigError("direct_intersection_spec: no constraints");
  }
  ProblemSpec out;
  out.objective = in.objective;
  out.decision_set = in.decision_set;
  out.slater_point = in.slater_point;
  for (std::size_t m = 0; m < in.constraints.size(); ++m) {
    const auto& c = in.constraints[m];
    if (!c.cut_region.has_value()) {
      throw ConfigError("direct_intersection_spec: constraint " + std::to_string(m) +
                        " has no cut_region descriptor");
    }
    ConstraintOracle t = c.base;
    t.uncertainty_set = SetDescriptor::intersection(
        {c.base.uncertainty_set, *c.cut_region}, c.zbar, dykstra_tol, dykstra_max_iter);
    t.exact_pessimize = nullptr;
    if (c.exact_intersection_pessimize) {
      t.exact_pessimize = c.exact_intersection_pessimize;
    }
    out.constraints.push_back(std::move(t));
  }
  return out;
}

/// One oracle's finite-difference validation record.
struct OracleCheck {
  std::string name;           ///< "f0", "g[m].x" or "g[m].z"
  double max_rel_err = 0.0;   ///< worst relative FD error over checked points
  int checked = 0;            ///< points where the function looked locally smooth
  int skipped = 0;            ///< points rejected by the two-scale consistency test
  bool bound_violation = false; ///< some sampled (sub)gradient exceeded its declared bound
};

/// Finite-difference validation report for a whole problem.
struct SubgradientReport {
  std::vector<OracleCheck> records;
  /// True when every record stayed within tol and no bound was violated.
  bool ok(double tol) const {
    for (const auto& r : records) {
      if (r.bound_violation || r.max_rel_err > tol || r.checked == 0) return false;
    }
    return true;
  }
};

namespace detail {

/// Central finite-difference gradient of f at p, nullopt when the two-scale
/// consistency test suggests p sits near a kink.
inline std::optional<Vec> fd_gradient_smooth(const std::function<double(const Vec&)>& f,
                                             const Vec& p, double eps) {
  Vec g(p.size()), g2(p.size());
  Vec q = p;
  for (Index i = 0; i < p.size(); ++i) {
    const double base = p[i];
    q[i] = base + eps;
    const double fp = f(q);
    q[i] = base - eps;
    const double fm = f(q);
    q[i] = base + 0.5 * eps;
    const double fp2 = f(q);
    q[i] = base - 0.5 * eps;
    const double fm2 = f(q);
    q[i] = base;
    g[i] = (fp - fm) / (2.0 * eps);
    g2[i] = (fp2 - fm2) / eps;
  }
  // For a locally C^2 function both scales agree to O(eps^2); a kink inside
  // the stencil makes them disagree at O(1).
  const double scale = std::max(1.0, std::max(g.norm(), g2.norm()));
  if ((g - g2).norm() > 1e-4 * scale) return std::nullopt;
  return g2;  // half-step stencil: smaller truncation error
}

/// Draws a point opposite-blended toward the set's interior point.
inline Vec interior_sample(const SetDescriptor& set, Rng& rng) {
  return 0.9 * set.sample(rng) + 0.1 * set.interior_point();
}

}  // namespace detail

/// Validates declared (sub)gradients against central finite differences at
/// random interior points, skipping points where a kink is detected, and
/// spot-checks the declared norm bounds.  Report-only: never throws.
inline SubgradientReport check_subgradients(const ProblemSpec& spec, int trials,
                                            std::uint64_t seed = 20260823ull,
                                            double eps = 1e-6) {
  SubgradientReport report;
  Rng rng(seed);
  const auto record = [&](const std::string& name, auto&& fn, auto&& grad,
                          auto&& draw, double bound) {
    OracleCheck rec;
    rec.name = name;
    for (int t = 0; t < trials; ++t) {
      const Vec p = draw();
      const Vec g = grad(p);
      if (g.norm() > bound * (1.0 + 1e-9)) rec.bound_violation = true;
      const auto fd = detail::fd_gradient_smooth(fn, p, eps);
      if (!fd.has_value()) {
        ++rec.skipped;
        continue;
      }
      ++rec.checked;
      const double err = (*fd - g).norm() / std::max(1.0, g.norm());
      rec.max_rel_err = std::max(rec.max_rel_err, err);
    }
    report.records.push_back(std::move(rec));
  };

  record(
      "f0", [&](const Vec& x) { return spec.objective.eval(x); },
      [&](const Vec& x) { return spec.objective.subgrad(x); },
      [&] { return detail::interior_sample(spec.decision_set, rng); },
      spec.objective.D0);

  for (std::size_t m = 0; m < spec.constraints.size(); ++m) {
    const auto& c = spec.constraints[m];
    OracleCheck rx{"g[" + std::to_string(m) + "].x", 0.0, 0, 0, false};
    OracleCheck rz{"g[" + std::to_string(m) + "].z", 0.0, 0, 0, false};
    for (int t = 0; t < trials; ++t) {
      const Vec x = detail::interior_sample(spec.decision_set, rng);
      const Vec z = detail::interior_sample(c.uncertainty_set, rng);
      const Vec gx = c.subgrad_x(x, z);
      const Vec gz = c.supergrad_z(x, z);
      if (gx.norm() > c.D * (1.0 + 1e-9)) rx.bound_violation = true;
      if (gz.norm() > c.E * (1.0 + 1e-9)) rz.bound_violation = true;
      const auto fdx = detail::fd_gradient_smooth(
          [&](const Vec& p) { return c.eval(p, z); }, x, eps);
      if (fdx.has_value()) {
        ++rx.checked;
        rx.max_rel_err = std::max(rx.max_rel_err,
                                  (*fdx - gx).norm() / std::max(1.0, gx.norm()));
      } else {
        ++rx.skipped;
      }
      const auto fdz = detail::fd_gradient_smooth(
          [&](const Vec& p) { return -c.eval(x, p); }, z, eps);
      if (fdz.has_value()) {
        ++rz.checked;
        rz.max_rel_err = std::max(rz.max_rel_err,
                                  (*fdz - gz).norm() / std::max(1.0, gz.norm()));
      } else {
        ++rz.skipped;
      }
    }
    report.records.push_back(std::move(rx));
    report.records.push_back(std::move(rz));
  }
  return report;
}

/// Sampled secant test for convexity of t -> f(p + t d) on random segments.
/// Returns the worst violation of midpoint convexity (positive = violation).
inline double convexity_defect(const std::function<double(const Vec&)>& f,
                               const SetDescriptor& domain, int trials, Rng& rng) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const Vec p = domain.sample(rng);
    const Vec q = domain.sample(rng);
    const double mid = f(0.5 * (p + q));
    worst = std::max(worst, mid - 0.5 * (f(p) + f(q)));
  }
  return worst;
}

/// Worst pessimized constraint value at the declared Slater point; a strictly
/// negative return certifies the margin to accuracy theta.
inline double slater_margin(const ProblemSpec& spec, double theta, long long budget,
                            Counters& counters) {
  if (!spec.slater_point.has_value()) {
    throw ConfigError("slater_margin: no Slater point declared");
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : spec.constraints) {
    worst = std::max(worst, pessimize(c, *spec.slater_point, theta, budget, counters).value);
  }
  return worst;
}

}  // namespace prom3

#endif  // PROM3_PROBLEM_HPP
