// prom3: first-order solver library for max-min-max robust optimization.
// Seeded generator for the robust log-sum-exponential family:
//   g_m(x, z) = x' A_m z - d_m + log(z_1 + sum_{j>=2} z_j exp(b_mj' x))
// with box uncertainty [0.001, 1]^J and X = [-1, 1]^N.
// SPDX-License-Identifier: MIT
#ifndef PROM3_GENERATORS_LSE_HPP
#define PROM3_GENERATORS_LSE_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include <Eigen/SVD>

#include "prom3/problem.hpp"
#include "prom3/rng.hpp"

namespace prom3 {

/// Raw data of one generated log-sum-exponential instance.  A_m is N x J and
/// B_m stacks the rows b_mj for j = 2..J ((J-1) x N); both are scaled to unit
/// spectral norm.  The offsets d_m are computed so the scaled random point
/// xhat = u/||u|| satisfies max_z g_m(xhat, z) = -feasibility_margin exactly,
/// which makes xhat a common Slater point for every constraint.
struct LseInstance {
  Index M = 0, N = 0, J = 0;
  std::uint64_t seed = 0;
  Vec c;                  ///< objective c'x, i.i.d. standard Gaussian entries
  std::vector<Mat> A;     ///< [m], N x J
  std::vector<Mat> B;     ///< [m], (J-1) x N, row j-2 = b_mj
  std::vector<double> d;  ///< [m]
  Vec xhat;               ///< u/||u||, the built-in Slater point
  double z_lo = 1e-3, z_hi = 1.0;
  double feasibility_margin = 0.05;
  double slater_margin = -0.05;
};

namespace detail {

/// Exactly maximizes a' z + log(beta' z) over the box [lo, hi]^J (beta > 0).
/// Parametrizing s = beta' z, the best a' z at fixed s is a fractional
/// knapsack filled greedily by the ratio a_j / beta_j, so the objective is a
/// concave piecewise-linear-plus-log function of s whose optimum is found by
/// walking the breakpoints (interior stop where ratio + 1/s = 0).
inline std::pair<Vec, double> lse_box_max(const Vec& a, const Vec& beta, double lo,
                                          double hi) {
  const Index J = a.size();
  std::vector<Index> order(static_cast<std::size_t>(J));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index i, Index j) {
    const double ri = a[i] / beta[i], rj = a[j] / beta[j];
    if (ri != rj) return ri > rj;
    return i < j;  // deterministic tie-break
  });
  Vec z = Vec::Constant(J, lo);
  double s = beta.dot(z);
  for (Index k : order) {
    const double ratio = a[k] / beta[k];
    if (ratio + 1.0 / s <= 0.0) break;          // derivative already <= 0
    const double s_next = s + beta[k] * (hi - lo);
    if (ratio >= 0.0 || ratio + 1.0 / s_next >= 0.0) {
      z[k] = hi;                                // take the whole segment
      s = s_next;
      continue;
    }
    const double s_star = -1.0 / ratio;         // interior stationary point
    z[k] = lo + (s_star - s) / beta[k];
    s = s_star;
    break;
  }
  return {z, a.dot(z) + std::log(beta.dot(z))};
}

/// Per-constraint payload shared by the oracle closures.
struct LseConstraintData {
  Mat A;  ///< N x J
  Mat B;  ///< (J-1) x N
  double d = 0.0;
  double z_lo = 0.0, z_hi = 0.0;
};

/// beta(x) = (1, exp(b_2'x), ..., exp(b_J'x)).
inline Vec lse_beta(const LseConstraintData& c, const Vec& x) {
  Vec beta(c.A.cols());
  beta[0] = 1.0;
  const Vec e = c.B * x;
  for (Index j = 1; j < beta.size(); ++j) beta[j] = std::exp(e[j - 1]);
  return beta;
}

}  // namespace detail

/// Samples one instance.  Draw order: c (N Gaussians), then per m the
/// matrices A_m (row-major) and B_m (row-major), each normalized to unit
/// spectral norm, then the positive vector u (N uniforms on [0,1]) shared by
/// all constraints; finally d_m = exact max of the margin-free constraint at
/// xhat = u/||u|| plus the feasibility margin, so xhat is Slater with margin
/// exactly -0.05.
inline LseInstance gen_lse(Index M, Index N, Index J, std::uint64_t seed) {
  if (M < 1 || N < 1) throw ConfigError("gen_lse: dimensions must be >= 1");
  if (J < 2) throw ConfigError("gen_lse: J must be >= 2 (the j = 2..J sum is empty)");
  LseInstance inst;
  inst.M = M;
  inst.N = N;
  inst.J = J;
  inst.seed = seed;
  Rng rng(seed);
  inst.c = rng.gaussian_vec(N);
  for (Index m = 0; m < M; ++m) {
    Mat A = rng.gaussian_mat(N, J);
    A /= A.jacobiSvd().singularValues()[0];
    Mat B = rng.gaussian_mat(J - 1, N);
    B /= B.jacobiSvd().singularValues()[0];
    inst.A.push_back(std::move(A));
    inst.B.push_back(std::move(B));
  }
  Vec u = rng.uniform_vec(N, 0.0, 1.0);
  while (u.norm() == 0.0) u = rng.uniform_vec(N, 0.0, 1.0);
  inst.xhat = u / u.norm();
  for (Index m = 0; m < M; ++m) {
    const Vec a = inst.A[static_cast<std::size_t>(m)].transpose() * inst.xhat;
    detail::LseConstraintData tmp{inst.A[static_cast<std::size_t>(m)],
                                  inst.B[static_cast<std::size_t>(m)], 0.0, inst.z_lo,
                                  inst.z_hi};
    const Vec beta = detail::lse_beta(tmp, inst.xhat);
    const double peak = detail::lse_box_max(a, beta, inst.z_lo, inst.z_hi).second;
    inst.d.push_back(peak + inst.feasibility_margin);
  }
  return inst;
}

/// Builds the solver-facing spec with exact-gradient oracles and the exact
/// knapsack-reduction pessimizer.  The z-gradient norm bound is dominated by
/// the 1/z_lo barrier of the log term; the pessimizer keeps that harmless.
inline ProblemSpec lse_problem(const LseInstance& inst) {
  const Index N = inst.N, J = inst.J;
  ProblemSpec spec;
  spec.decision_set = SetDescriptor::box(Vec::Constant(N, -1.0), Vec::Constant(N, 1.0));
  const Vec c = inst.c;
  spec.objective.eval = [c](const Vec& x) { return c.dot(x); };
  spec.objective.subgrad = [c](const Vec&) { return c; };
  spec.objective.D0 = c.norm();
  spec.objective.D0_smooth = 0.0;

  for (Index m = 0; m < inst.M; ++m) {
    auto dat = std::make_shared<const detail::LseConstraintData>(detail::LseConstraintData{
        inst.A[static_cast<std::size_t>(m)], inst.B[static_cast<std::size_t>(m)],
        inst.d[static_cast<std::size_t>(m)], inst.z_lo, inst.z_hi});
    ConstraintOracle g;
    g.uncertainty_set =
        SetDescriptor::box(Vec::Constant(J, inst.z_lo), Vec::Constant(J, inst.z_hi));
    g.eval = [dat](const Vec& x, const Vec& z) {
      const Vec beta = detail::lse_beta(*dat, x);
      return x.dot(dat->A * z) - dat->d + std::log(beta.dot(z));
    };
    g.subgrad_x = [dat](const Vec& x, const Vec& z) {
      const Vec beta = detail::lse_beta(*dat, x);
      const double S = beta.dot(z);
      Vec grad = dat->A * z;
      for (Index j = 1; j < z.size(); ++j) {
        grad += (z[j] * beta[j] / S) * dat->B.row(j - 1).transpose();
      }
      return grad;
    };
    g.supergrad_z = [dat](const Vec& x, const Vec& z) {
      const Vec beta = detail::lse_beta(*dat, x);
      const double S = beta.dot(z);
      return Vec(-(dat->A.transpose() * x) - beta / S);
    };
    // ||A z|| <= sqrt(J); softmax weights sum to <= 1 over unit-norm rows.
    g.D = std::sqrt(static_cast<double>(J)) + 1.0;
    // ||A' x|| <= sqrt(N); ||beta / (beta' z)|| <= 1 / z_lo.
    g.E = std::sqrt(static_cast<double>(N)) + 1.0 / inst.z_lo;
    g.exact_pessimize = [dat](const Vec& x, double) {
      const Vec a = dat->A.transpose() * x;
      const Vec beta = detail::lse_beta(*dat, x);
      auto [z, val] = detail::lse_box_max(a, beta, dat->z_lo, dat->z_hi);
      PessimizeResult res;
      res.z = std::move(z);
      res.value = val - dat->d;
      return res;
    };
    spec.constraints.push_back(std::move(g));
  }
  spec.slater_point = inst.xhat;
  return spec;
}

}  // namespace prom3

#endif  // PROM3_GENERATORS_LSE_HPP
