// prom3: first-order solver library for max-min-max robust optimization.
// Seeded generator for the distributionally robust newsvendor family:
// purchase-cost objective with per-product CVaR-of-loss constraints whose
// demand distribution ranges over Simplex(N) ∩ Ball(empirical, radius),
// expressed in intersection form with one quadratic cut per constraint.
// SPDX-License-Identifier: MIT
#ifndef PROM3_GENERATORS_NEWSVENDOR_HPP
#define PROM3_GENERATORS_NEWSVENDOR_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "prom3/problem.hpp"
#include "prom3/rng.hpp"

namespace prom3 {

/// Raw data of one generated newsvendor instance.  Decisions are
/// (x, tau) in [0,1]^M x [-L, L]^M; constraint m bounds the worst-case CVaR
/// of the loss -r(x_m, d_m) at quantile kappa by rho_m.
struct NewsvendorInstance {
  Index M = 0;         ///< products
  Index N = 0;         ///< demand outcomes per product
  double kappa = 0.9;  ///< CVaR quantile level in [0, 1)
  double radius = 0.25;  ///< ambiguity ball radius around the empirical law
  std::uint64_t seed = 0;
  Vec c, v, s, t;  ///< unit purchase cost, selling price, salvage, storage
  Mat d;           ///< M x N demand outcomes
  Vec rho;         ///< risk thresholds, chosen so the instance is Slater
  double L = 0.0;  ///< tau box half-width, max_m (v+t+c)_m * max_n d_mn
  Vec x_bar, tau_bar;  ///< built-in Slater point (median order, VaR tau)
  Vec slater_margins;  ///< per-constraint worst-case value at the Slater point
};

namespace detail {

/// Piecewise-linear profit r(x, d) = v min{d,x} + s(x-d)_+ - t(d-x)_+ - c x
/// and its LEFT derivative in x (deterministic at the kink x = d).
struct ProfitEval {
  double value = 0.0;
  double slope = 0.0;
};
inline ProfitEval profit(double v, double s, double t, double c, double x, double d) {
  if (x <= d) return {(v + t - c) * x - t * d, v + t - c};
  return {v * d + s * (x - d) - c * x, s - c};
}

/// Exactly maximizes c' z over Simplex(N) ∩ Ball(zhat, r) by dualizing the
/// ball constraint: z(mu) = Proj_simplex(zhat + c / (2 mu)) traces the prox
/// path, ||z(mu) - zhat|| decreases in mu, and the optimal multiplier makes
/// the ball tight (or the best vertex / face point is already inside).
/// Returns a primal-feasible maximizer with duality gap below `tol`.
inline Vec simplex_ball_argmax(const Vec& c, const Vec& zhat, double r, double tol) {
  const Index N = c.size();
  // Best vertex: exact optimum of the simplex-only relaxation.
  Index best = 0;
  for (Index i = 1; i < N; ++i) {
    if (c[i] > c[best]) best = i;
  }
  Vec vertex = Vec::Zero(N);
  vertex[best] = 1.0;
  if ((vertex - zhat).norm() <= r) return vertex;

  const auto z_of = [&](double mu) { return project_simplex(N, zhat + c / (2.0 * mu)); };
  double mu_hi = 1.0;
  while ((z_of(mu_hi) - zhat).norm() > r) mu_hi *= 2.0;
  double mu_lo = mu_hi;
  while ((z_of(mu_lo) - zhat).norm() <= r) {
    mu_lo *= 0.5;
    if (mu_lo < 1e-300) break;  // whole prox path inside: gap already ~ 0
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (mu_lo + mu_hi);
    if (mid <= mu_lo || mid >= mu_hi) break;
    ((z_of(mid) - zhat).norm() > r ? mu_lo : mu_hi) = mid;
    const Vec z = z_of(mu_hi);
    if (mu_hi * (r * r - (z - zhat).squaredNorm()) <= tol) break;
  }
  return z_of(mu_hi);
}

/// Per-constraint payload shared by the oracle closures.
struct NewsvendorConstraintData {
  double v = 0, s = 0, t = 0, c = 0;
  Vec d;               ///< demand outcomes for this product
  double kappa = 0.0;
  double rho = 0.0;
  double radius = 0.0;
  Index M = 0;         ///< total products (for gradient placement)
  Index m = 0;         ///< this product's index
  Vec zhat;            ///< empirical (uniform) distribution
};

/// q_n = [tau - r(x, d_n)]_+ (value) with the hinge inactive at exactly 0.
inline Vec cvar_hinges(const NewsvendorConstraintData& cd, double x, double tau) {
  Vec q(cd.d.size());
  for (Index n = 0; n < cd.d.size(); ++n) {
    const double gap = tau - profit(cd.v, cd.s, cd.t, cd.c, x, cd.d[n]).value;
    q[n] = gap > 0.0 ? gap : 0.0;
  }
  return q;
}

}  // namespace detail

/// Samples one instance.  Draw order: per product the prices
/// (c ~ U[0.5,1], v = c·U[1.2,2], s = c·U[0,0.5], t ~ U[0,0.3]), then the
/// demand matrix row-major with entries U[0.5,1.5].  The thresholds rho_m
/// are then computed (not drawn) so the median-order point is strictly
/// feasible: with W_m the worst-case CVaR at (x_bar, tau_bar),
/// rho_m = max(W_m / 0.95, 0.01), giving margin <= -0.05 rho_m always.
inline NewsvendorInstance gen_newsvendor(Index M, Index N, double kappa, double radius,
                                         std::uint64_t seed) {
  if (M < 1 || N < 2) throw ConfigError("gen_newsvendor: need M >= 1 and N >= 2");
  if (!(kappa >= 0.0 && kappa < 1.0)) {
    throw ConfigError("gen_newsvendor: kappa must lie in [0, 1)");
  }
  if (!(radius > 0.0)) throw ConfigError("gen_newsvendor: radius must be > 0");
  NewsvendorInstance inst;
  inst.M = M;
  inst.N = N;
  inst.kappa = kappa;
  inst.radius = radius;
  inst.seed = seed;
  Rng rng(seed);
  inst.c = Vec(M);
  inst.v = Vec(M);
  inst.s = Vec(M);
  inst.t = Vec(M);
  for (Index m = 0; m < M; ++m) {
    inst.c[m] = rng.uniform(0.5, 1.0);
    inst.v[m] = inst.c[m] * rng.uniform(1.2, 2.0);
    inst.s[m] = inst.c[m] * rng.uniform(0.0, 0.5);
    inst.t[m] = rng.uniform(0.0, 0.3);
  }
  inst.d = rng.uniform_mat(M, N, 0.5, 1.5);

  inst.L = 0.0;
  for (Index m = 0; m < M; ++m) {
    inst.L = std::max(inst.L, (inst.v[m] + inst.t[m] + inst.c[m]) * inst.d.row(m).maxCoeff());
  }

  // Slater point: order the (clamped) median demand; tau at the empirical
  // kappa-quantile of the losses; rho from the exact worst-case CVaR there.
  const Vec zhat = Vec::Constant(N, 1.0 / static_cast<double>(N));
  inst.x_bar = Vec(M);
  inst.tau_bar = Vec(M);
  inst.rho = Vec(M);
  inst.slater_margins = Vec(M);
  for (Index m = 0; m < M; ++m) {
    std::vector<double> ds(inst.d.row(m).begin(), inst.d.row(m).end());
    std::sort(ds.begin(), ds.end());
    inst.x_bar[m] = std::min(1.0, ds[static_cast<std::size_t>((N - 1) / 2)]);

    std::vector<double> losses(static_cast<std::size_t>(N));
    for (Index n = 0; n < N; ++n) {
      losses[static_cast<std::size_t>(n)] =
          -detail::profit(inst.v[m], inst.s[m], inst.t[m], inst.c[m], inst.x_bar[m],
                          inst.d(m, n))
               .value;
    }
    std::sort(losses.begin(), losses.end());
    const auto qidx = static_cast<std::size_t>(std::min<Index>(
        N - 1, std::max<Index>(0, static_cast<Index>(std::ceil(kappa * N)) - 1)));
    inst.tau_bar[m] = losses[qidx];

    detail::NewsvendorConstraintData cd{inst.v[m], inst.s[m], inst.t[m], inst.c[m],
                                        inst.d.row(m).transpose(), kappa, 0.0, radius,
                                        M, m, zhat};
    const Vec q = detail::cvar_hinges(cd, inst.x_bar[m], inst.tau_bar[m]);
    const Vec cvec = q / (1.0 - kappa);
    const Vec zstar = detail::simplex_ball_argmax(cvec, zhat, radius, 1e-12);
    const double W = cvec.dot(zstar) - inst.tau_bar[m];
    inst.rho[m] = std::max(W / 0.95, 0.01);
    inst.slater_margins[m] = W - inst.rho[m];
  }
  return inst;
}

/// Builds the intersection-form spec: base uncertainty Simplex(N), one cut
/// h(z) = ||z - zhat||^2 - radius^2 per constraint, and closed-form
/// penalized / intersection pessimizers (simplex prox, ball-dual bisection).
inline IntersectionSpec newsvendor_problem(const NewsvendorInstance& inst) {
  const Index M = inst.M, N = inst.N;
  const double kap = inst.kappa;
  IntersectionSpec in;
  {
    Vec lower(2 * M), upper(2 * M);
    lower.head(M).setZero();
    upper.head(M).setOnes();
    lower.tail(M).setConstant(-inst.L);
    upper.tail(M).setConstant(inst.L);
    in.decision_set = SetDescriptor::box(std::move(lower), std::move(upper));
  }
  const Vec c0 = inst.c;
  in.objective.eval = [c0, M](const Vec& xt) { return c0.dot(xt.head(M)); };
  in.objective.subgrad = [c0, M](const Vec& xt) {
    Vec g = Vec::Zero(xt.size());
    g.head(M) = c0;
    return g;
  };
  in.objective.D0 = c0.norm();
  in.objective.D0_smooth = 0.0;

  const Vec zhat = Vec::Constant(N, 1.0 / static_cast<double>(N));
  for (Index m = 0; m < M; ++m) {
    auto cd = std::make_shared<const detail::NewsvendorConstraintData>(
        detail::NewsvendorConstraintData{inst.v[m], inst.s[m], inst.t[m], inst.c[m],
                                         inst.d.row(m).transpose(), kap, inst.rho[m],
                                         inst.radius, M, m, zhat});
    IntersectionConstraintOracle oc;
    oc.base.uncertainty_set = SetDescriptor::simplex(N);
    oc.base.eval = [cd](const Vec& xt, const Vec& z) {
      const Vec q = detail::cvar_hinges(*cd, xt[cd->m], xt[cd->M + cd->m]);
      return z.dot(q) / (1.0 - cd->kappa) - xt[cd->M + cd->m] - cd->rho;
    };
    oc.base.subgrad_x = [cd](const Vec& xt, const Vec& z) {
      const double x = xt[cd->m], tau = xt[cd->M + cd->m];
      double gx = 0.0, gtau = 0.0;
      for (Index n = 0; n < cd->d.size(); ++n) {
        const auto pr = detail::profit(cd->v, cd->s, cd->t, cd->c, x, cd->d[n]);
        if (tau - pr.value > 0.0) {
          gx -= z[n] * pr.slope;
          gtau += z[n];
        }
      }
      Vec grad = Vec::Zero(xt.size());
      grad[cd->m] = gx / (1.0 - cd->kappa);
      grad[cd->M + cd->m] = gtau / (1.0 - cd->kappa) - 1.0;
      return grad;
    };
    oc.base.supergrad_z = [cd](const Vec& xt, const Vec&) {
      const Vec q = detail::cvar_hinges(*cd, xt[cd->m], xt[cd->M + cd->m]);
      return Vec(-q / (1.0 - cd->kappa));
    };
    {
      const double lr = std::max(cd->v + cd->t - cd->c, cd->c - cd->s);
      const double inv = 1.0 / (1.0 - kap);
      oc.base.D = std::sqrt(lr * lr * inv * inv + (inv + 1.0) * (inv + 1.0));
      oc.base.E = 2.0 * inst.L * std::sqrt(static_cast<double>(N)) * inv;
      // grad_z is the hinge-value vector: Lipschitz in (x_m, tau_m) but the
      // x-subgradient jumps at hinges, so D_smooth stays unset (no smooth mode).
      oc.base.E1_smooth = std::sqrt(static_cast<double>(N) * (lr * lr + 1.0)) * inv;
      oc.base.E2_smooth = 0.0;
    }

    CutFunction h;
    h.eval = [zhat, r2 = inst.radius * inst.radius](const Vec& z) {
      return (z - zhat).squaredNorm() - r2;
    };
    h.subgrad = [zhat](const Vec& z) { return Vec(2.0 * (z - zhat)); };
    h.F = 2.0 * std::sqrt(1.0 - 1.0 / static_cast<double>(N));
    h.F_smooth = 2.0;
    oc.cuts.push_back(std::move(h));
    oc.zbar = zhat;
    oc.G = -(inst.L + inst.rho[m]);
    {
      const double reach = 1.0 - 1.0 / static_cast<double>(N);
      const double r2 = inst.radius * inst.radius;
      oc.h_norm_bound = std::max(r2, std::abs(reach - r2));
    }
    oc.cut_region = SetDescriptor::ball(zhat, inst.radius);

    oc.exact_penalized_pessimize = [cd](const Vec& xt, const Vec& mu, double) {
      const Vec q = detail::cvar_hinges(*cd, xt[cd->m], xt[cd->M + cd->m]);
      const Vec cvec = q / (1.0 - cd->kappa);
      const double shift = -xt[cd->M + cd->m] - cd->rho;
      PessimizeResult res;
      const double u = mu[0];
      if (u > 0.0) {
        res.z = project_simplex(cvec.size(), cd->zhat + cvec / (2.0 * u));
      } else {
        Index best = 0;
        for (Index i = 1; i < cvec.size(); ++i) {
          if (cvec[i] > cvec[best]) best = i;
        }
        res.z = Vec::Zero(cvec.size());
        res.z[best] = 1.0;
      }
      res.value = cvec.dot(res.z) + shift -
                  u * ((res.z - cd->zhat).squaredNorm() - cd->radius * cd->radius);
      return res;
    };
    oc.exact_intersection_pessimize = [cd](const Vec& xt, double theta) {
      const Vec q = detail::cvar_hinges(*cd, xt[cd->m], xt[cd->M + cd->m]);
      const Vec cvec = q / (1.0 - cd->kappa);
      PessimizeResult res;
      res.z = detail::simplex_ball_argmax(cvec, cd->zhat, cd->radius,
                                          std::max(theta * 0.5, 1e-14));
      res.value = cvec.dot(res.z) - xt[cd->M + cd->m] - cd->rho;
      return res;
    };
    in.constraints.push_back(std::move(oc));
  }
  {
    Vec sp(2 * M);
    sp.head(M) = inst.x_bar;
    sp.tail(M) = inst.tau_bar;
    in.slater_point = sp;
  }
  return in;
}

}  // namespace prom3

#endif  // PROM3_GENERATORS_NEWSVENDOR_HPP
