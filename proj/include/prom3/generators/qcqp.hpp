// prom3: first-order solver library for max-min-max robust optimization.
// Seeded generator for the robust QCQP family: quadratic constraints
// ||(P_m0 + sum_j z_j P_mj) x||^2 + b_m' x + c_m with ball uncertainty,
// made concave in the uncertainty through an exact epigraph + w-lift.
// SPDX-License-Identifier: MIT
#ifndef PROM3_GENERATORS_QCQP_HPP
#define PROM3_GENERATORS_QCQP_HPP

#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Eigenvalues>

#include <Eigen/SVD>

#include "prom3/problem.hpp"
#include "prom3/rng.hpp"

namespace prom3 {

/// Raw data of one generated robust QCQP instance.  Constraint index m runs
/// over 0..M where m = 0 is the objective handled in epigraph form
/// (min t s.t. g_0 <= t).  All entries are i.i.d. uniform on [-1,1] before
/// normalization; the stacked matrix [P_m0; ...; P_mJ] and each b_m are
/// scaled to unit spectral / Euclidean norm.
struct QcqpInstance {
  Index M = 0;  ///< number of proper constraints (total oracles = M + 1)
  Index N = 0;  ///< decision dimension (before the epigraph variable)
  Index P = 0;  ///< rows of each P_mj
  Index J = 0;  ///< uncertainty dimension per constraint
  std::uint64_t seed = 0;
  std::vector<std::vector<Mat>> P_mats;  ///< [m][j], m in 0..M, j in 0..J
  std::vector<Vec> b;                    ///< [m], unit norm
  std::vector<double> c;                 ///< [m], fixed at -0.05
  std::vector<double> R;                 ///< lifting radii, 1 + sqrt(J)
  double t_lo = 0.0, t_hi = 0.0;         ///< epigraph box for the t variable
  double slater_margin = 0.0;            ///< margin of (x, t) = 0 (= c_m)
};

namespace detail {

/// Maximizes z' A z + 2 g' z over the unit ball for symmetric A >= 0.  The
/// maximum sits on the sphere; the stationarity system (nu I - A) z = g with
/// nu >= lambda_max is solved by bisection on the secular equation
/// sum_i gt_i^2 / (nu - lambda_i)^2 = 1, with the classic hard case (g
/// orthogonal to the top eigenspace and interior secular norm) handled by
/// padding along the top eigenvector.
inline Vec max_quadratic_on_ball(const Mat& A, const Vec& g) {
  const Index J = A.rows();
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  const Vec lam = es.eigenvalues();  // ascending
  const Mat& Q = es.eigenvectors();
  const double lmax = lam[J - 1];
  const Vec gt = Q.transpose() * g;

  const double edge = 1e-12 * std::max(1.0, std::abs(lmax));
  double gtop_sq = 0.0, s_sq = 0.0;
  for (Index i = 0; i < J; ++i) {
    if (lam[i] >= lmax - edge) {
      gtop_sq += gt[i] * gt[i];
    } else {
      const double w = gt[i] / (lmax - lam[i]);
      s_sq += w * w;
    }
  }

  Vec zt(J);
  const double gnorm = g.norm();
  if (gtop_sq <= (1e-14 * gnorm) * (1e-14 * gnorm) && s_sq < 1.0) {
    // Hard case: solve at nu = lambda_max and pad along the top eigenvector.
    double pad = std::sqrt(1.0 - s_sq);
    for (Index i = 0; i < J; ++i) {
      if (lam[i] >= lmax - edge) {
        zt[i] = pad;
        pad = 0.0;  // all weight on the first top index: deterministic
      } else {
        zt[i] = gt[i] / (lmax - lam[i]);
      }
    }
  } else {
    // Easy case: the secular function is decreasing on (lambda_max, inf)
    // and crosses 1; bracket then bisect.
    const auto psi = [&](double nu) {
      double acc = 0.0;
      for (Index i = 0; i < J; ++i) {
        const double w = gt[i] / (nu - lam[i]);
        acc += w * w;
      }
      return acc;
    };
    double hi = lmax + std::max(1e-8, 2.0 * gnorm);
    while (psi(hi) >= 1.0) hi = lmax + 2.0 * (hi - lmax);
    double lo = lmax;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (psi(mid) >= 1.0 ? lo : hi) = mid;
    }
    for (Index i = 0; i < J; ++i) zt[i] = gt[i] / (hi - lam[i]);
  }

  Vec z = Q * zt;
  const double n = z.norm();
  if (n > 1.0) z /= n;
  return z;
}

/// Per-constraint payload shared by the oracle closures.
struct QcqpConstraintData {
  std::vector<Mat> P;  ///< P_0..P_J
  Vec b;
  double c = 0.0;
  double R = 0.0;
  bool epigraph = false;  ///< subtract the t variable (constraint 0)
};

/// y = (P_0 + sum_j z_j P_j) x.
inline Vec qcqp_map(const QcqpConstraintData& d, const Vec& x, const Vec& z) {
  Vec y = d.P[0] * x;
  for (Index j = 1; j < static_cast<Index>(d.P.size()); ++j) {
    y += z[j - 1] * (d.P[static_cast<std::size_t>(j)] * x);
  }
  return y;
}

}  // namespace detail

/// Samples one instance: for m = 0..M, the J+1 matrices P_mj (entries
/// uniform on [-1,1], row-major draw order), then b_m; the stack
/// [P_m0; ...; P_mJ] is scaled to unit spectral norm and b_m to unit
/// Euclidean norm; c_m = -0.05 throughout.
inline QcqpInstance gen_qcqp(Index M, Index N, Index P, Index J, std::uint64_t seed) {
  if (M < 1 || N < 1 || P < 1 || J < 1) {
    throw ConfigError("gen_qcqp: all dimensions must be >= 1");
  }
  QcqpInstance inst;
  inst.M = M;
  inst.N = N;
  inst.P = P;
  inst.J = J;
  inst.seed = seed;
  Rng rng(seed);
  for (Index m = 0; m <= M; ++m) {
    std::vector<Mat> mats;
    Mat stack((J + 1) * P, N);
    for (Index j = 0; j <= J; ++j) {
      Mat Pj = rng.uniform_mat(P, N, -1.0, 1.0);
      stack.middleRows(j * P, P) = Pj;
      mats.push_back(std::move(Pj));
    }
    const double spec = stack.jacobiSvd().singularValues()[0];
    for (auto& Pj : mats) Pj /= spec;
    Vec bm = rng.uniform_vec(N, -1.0, 1.0);
    bm /= bm.norm();
    inst.P_mats.push_back(std::move(mats));
    inst.b.push_back(std::move(bm));
    inst.c.push_back(-0.05);
    inst.R.push_back(1.0 + std::sqrt(static_cast<double>(J)));
  }
  // The epigraph variable must cover max_z g_0 for every feasible x:
  // |g_0| <= R^2 + 1 + |c|, padded to a round box.
  const double Rmax = inst.R[0];
  inst.t_lo = -(Rmax * Rmax + 2.0);
  inst.t_hi = Rmax * Rmax + 2.0;
  inst.slater_margin = -0.05;  // all x-terms vanish at (x, t) = 0
  return inst;
}

/// Builds the solver-facing spec: decision (x, t) in Ball(0,1) x [t_lo,t_hi],
/// objective t, and M+1 lifted constraints over (z, w) in Ball(0,1) x
/// Ball(0,R_m) with g(x,(z,w)) = 2 w'(P(z)x) + b'x + c - ||w||^2 (- t for
/// m = 0).  Maximizing over w recovers ||P(z)x||^2 exactly because
/// ||P(z)x|| <= R_m by the stacked normalization, so the lifted problem
/// coincides with the original robust QCQP.
inline ProblemSpec qcqp_problem(const QcqpInstance& inst) {
  const Index N = inst.N, P = inst.P, J = inst.J;
  ProblemSpec spec;
  spec.decision_set = SetDescriptor::product(
      {SetDescriptor::ball(Vec::Zero(N), 1.0),
       SetDescriptor::box(Vec::Constant(1, inst.t_lo), Vec::Constant(1, inst.t_hi))});
  spec.objective.eval = [N](const Vec& xt) { return xt[N]; };
  spec.objective.subgrad = [N](const Vec& xt) {
    Vec g = Vec::Zero(xt.size());
    g[N] = 1.0;
    return g;
  };
  spec.objective.D0 = 1.0;
  spec.objective.D0_smooth = 0.0;

  for (Index m = 0; m <= inst.M; ++m) {
    auto d = std::make_shared<const detail::QcqpConstraintData>(detail::QcqpConstraintData{
        inst.P_mats[static_cast<std::size_t>(m)], inst.b[static_cast<std::size_t>(m)],
        inst.c[static_cast<std::size_t>(m)], inst.R[static_cast<std::size_t>(m)], m == 0});
    const double R = d->R;
    ConstraintOracle g;
    g.uncertainty_set = SetDescriptor::product(
        {SetDescriptor::ball(Vec::Zero(J), 1.0), SetDescriptor::ball(Vec::Zero(P), R)});
    g.eval = [d, N, J](const Vec& xt, const Vec& v) {
      const Vec y = detail::qcqp_map(*d, xt.head(N), v.head(J));
      const auto w = v.tail(v.size() - J);
      double val = 2.0 * w.dot(y) + d->b.dot(xt.head(N)) + d->c - w.squaredNorm();
      if (d->epigraph) val -= xt[N];
      return val;
    };
    g.subgrad_x = [d, N, J](const Vec& xt, const Vec& v) {
      const auto w = v.tail(v.size() - J);
      Vec grad = Vec::Zero(xt.size());
      Vec gx = 2.0 * (d->P[0].transpose() * w);
      for (Index j = 1; j <= J; ++j) {
        gx += (2.0 * v[j - 1]) * (d->P[static_cast<std::size_t>(j)].transpose() * w);
      }
      grad.head(N) = gx + d->b;
      if (d->epigraph) grad[N] = -1.0;
      return grad;
    };
    g.supergrad_z = [d, N, J](const Vec& xt, const Vec& v) {
      const Vec x = xt.head(N);
      const auto w = v.tail(v.size() - J);
      const Vec y = detail::qcqp_map(*d, x, v.head(J));
      Vec sg(v.size());
      for (Index j = 1; j <= J; ++j) {
        sg[j - 1] = -2.0 * w.dot(d->P[static_cast<std::size_t>(j)] * x);
      }
      sg.tail(v.size() - J) = -2.0 * (y - w);
      return sg;
    };
    // With ||P(z)|| <= R and ||w|| <= R: ||grad_x|| <= 2 R^2 + 1 (+1 for t);
    // z-block <= 2 R (stacked normalization), w-block <= 4 R.
    const double dx = 2.0 * R * R + 1.0;
    g.D = d->epigraph ? std::sqrt(dx * dx + 1.0) : dx;
    g.E = 2.0 * R * std::sqrt(5.0);
    g.D_smooth = 0.0;  // grad_x depends only on (z, w)
    g.E1_smooth = 2.0 * R * std::sqrt(static_cast<double>(J) + 1.0);
    g.E2_smooth = 4.0;
    g.exact_pessimize = [d, N, J](const Vec& xt, double) {
      // max over (z, w): inner w* = P(z)x, then max ||P(z)x||^2 over the
      // z-ball, a convex quadratic z'(U'U)z + 2 (U'u0)'z + ||u0||^2 with
      // U = [P_1 x ... P_J x].
      const Vec x = xt.head(N);
      Mat U(d->P[0].rows(), J);
      for (Index j = 1; j <= J; ++j) U.col(j - 1) = d->P[static_cast<std::size_t>(j)] * x;
      const Vec u0 = d->P[0] * x;
      const Vec z = detail::max_quadratic_on_ball(U.transpose() * U, U.transpose() * u0);
      const Vec w = u0 + U * z;
      PessimizeResult res;
      res.z = Vec(z.size() + w.size());
      res.z.head(J) = z;
      res.z.tail(w.size()) = w;
      res.value = w.squaredNorm() + d->b.dot(x) + d->c;
      if (d->epigraph) res.value -= xt[N];
      return res;
    };
    spec.constraints.push_back(std::move(g));
  }
  spec.slater_point = Vec::Zero(N + 1);
  return spec;
}

}  // namespace prom3

#endif  // PROM3_GENERATORS_QCQP_HPP
