// Tests for the three instance generators: pinned closed-form oracles,
// normalization/feasibility invariants, lift exactness, finite-difference
// agreement and bitwise reproducibility.
// SPDX-License-Identifier: MIT
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "prom3/generators/lse.hpp"
#include "prom3/generators/newsvendor.hpp"
#include "prom3/generators/qcqp.hpp"
#include "test_util.hpp"

using namespace prom3;

namespace {

Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Mat make_mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

std::string report_str(const SubgradientReport& rep) {
  std::ostringstream os;
  for (const auto& r : rep.records) {
    os << r.name << " err=" << r.max_rel_err << " checked=" << r.checked
       << (r.bound_violation ? " BOUND" : "") << "; ";
  }
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- QCQP ----

TEST_CASE("max_quadratic_on_ball: pinned cases incl. the hard case", "[gen][qcqp]") {
  SECTION("hard case: g orthogonal to the top eigenvector") {
    // max 2 z1^2 + z2^2 + 0.2 z2 on the circle: stationarity gives
    // sin = 0.1, value 1 + cos^2 + 0.2 sin = 2.01.
    const Vec z = detail::max_quadratic_on_ball(make_mat2(2, 0, 0, 1), make_vec({0, 0.1}));
    const double val = z.dot(make_mat2(2, 0, 0, 1) * z) + 2.0 * make_vec({0, 0.1}).dot(z);
    CHECK(val == Catch::Approx(2.01).margin(1e-10));
    CHECK(std::abs(z.norm() - 1.0) <= 1e-9);
  }
  SECTION("zero linear term picks the top eigenvalue") {
    const Vec z = detail::max_quadratic_on_ball(make_mat2(3, 0, 0, 1), Vec::Zero(2));
    const double val = z.dot(make_mat2(3, 0, 0, 1) * z);
    CHECK(val == Catch::Approx(3.0).margin(1e-12));
  }
  SECTION("zero quadratic part reduces to the linear maximizer") {
    const Vec g = make_vec({0.3, -0.4});
    const Vec z = detail::max_quadratic_on_ball(Mat::Zero(2, 2), g);
    CHECK(z.isApprox(g / g.norm(), 1e-10));
  }
  SECTION("easy case beats a dense angular sweep") {
    const Mat A = make_mat2(2, 0.3, 0.3, 1);
    const Vec g = make_vec({0.5, 0.1});
    const Vec z = detail::max_quadratic_on_ball(A, g);
    const double val = z.dot(A * z) + 2.0 * g.dot(z);
    double best = -1e300;
    for (int i = 0; i < 400000; ++i) {
      const double phi = 2.0 * M_PI * i / 400000.0;
      const Vec p = make_vec({std::cos(phi), std::sin(phi)});
      best = std::max(best, p.dot(A * p) + 2.0 * g.dot(p));
    }
    CHECK(val >= best - 1e-9);
    CHECK(val <= best + 1e-8);
  }
}

TEST_CASE("gen_qcqp: normalization, fixed offsets, reproducibility", "[gen][qcqp]") {
  const auto inst = gen_qcqp(2, 7, 3, 4, 99);
  REQUIRE(inst.P_mats.size() == 3);
  for (Index m = 0; m <= inst.M; ++m) {
    Mat stack((inst.J + 1) * inst.P, inst.N);
    for (Index j = 0; j <= inst.J; ++j) {
      stack.middleRows(j * inst.P, inst.P) = inst.P_mats[m][static_cast<std::size_t>(j)];
    }
    CHECK(std::abs(stack.jacobiSvd().singularValues()[0] - 1.0) <= 1e-8);
    CHECK(std::abs(inst.b[static_cast<std::size_t>(m)].norm() - 1.0) <= 1e-12);
    CHECK(inst.c[static_cast<std::size_t>(m)] == -0.05);
    CHECK(inst.R[static_cast<std::size_t>(m)] == 1.0 + std::sqrt(4.0));
  }
  const auto again = gen_qcqp(2, 7, 3, 4, 99);
  for (Index m = 0; m <= inst.M; ++m) {
    for (Index j = 0; j <= inst.J; ++j) {
      CHECK(inst.P_mats[m][static_cast<std::size_t>(j)] ==
            again.P_mats[m][static_cast<std::size_t>(j)]);
    }
    CHECK(inst.b[static_cast<std::size_t>(m)] == again.b[static_cast<std::size_t>(m)]);
  }
  const auto other = gen_qcqp(2, 7, 3, 4, 100);
  CHECK(inst.P_mats[0][0] != other.P_mats[0][0]);
  CHECK_THROWS_AS(gen_qcqp(0, 7, 3, 4, 1), ConfigError);
}

TEST_CASE("qcqp lift: the w-maximizer stays strictly interior and is exact",
          "[gen][qcqp][lift]") {
  const auto inst = gen_qcqp(2, 10, 4, 5, 7);
  const auto spec = qcqp_problem(inst);
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    Vec xt = spec.decision_set.sample(rng);
    for (const auto& g : spec.constraints) {
      const Vec v = g.uncertainty_set.sample(rng);
      const Vec z = v.head(inst.J);
      // y = P(z) x never clips against the lifting radius.
      Vec y = Vec::Zero(inst.P);
      // Reconstruct y through the oracle: eval at w = y means solving the
      // inner max; instead use the instance data directly.
      const auto& mats = inst.P_mats[static_cast<std::size_t>(&g - spec.constraints.data())];
      y = mats[0] * xt.head(inst.N);
      for (Index j = 1; j <= inst.J; ++j) {
        y += z[j - 1] * (mats[static_cast<std::size_t>(j)] * xt.head(inst.N));
      }
      const double R = inst.R[static_cast<std::size_t>(&g - spec.constraints.data())];
      REQUIRE(y.norm() < R);
      // Lift identity: eval at (z, w = y) equals ||y||^2 + b'x + c (- t).
      Vec zw(inst.J + inst.P);
      zw.head(inst.J) = z;
      zw.tail(inst.P) = y;
      const std::size_t m = static_cast<std::size_t>(&g - spec.constraints.data());
      double direct = y.squaredNorm() + inst.b[m].dot(xt.head(inst.N)) + inst.c[m];
      if (m == 0) direct -= xt[inst.N];
      REQUIRE(std::abs(g.eval(xt, zw) - direct) <= 1e-9);
    }
  }
}

TEST_CASE("qcqp exact pessimizer dominates random probes", "[gen][qcqp]") {
  const auto inst = gen_qcqp(1, 8, 3, 4, 21);
  const auto spec = qcqp_problem(inst);
  Rng rng(77);
  Counters n;
  for (int trial = 0; trial < 20; ++trial) {
    const Vec xt = spec.decision_set.sample(rng);
    for (const auto& g : spec.constraints) {
      const auto res = pessimize(g, xt, 1e-9, 1 << 20, n);
      CHECK(g.uncertainty_set.contains(res.z, 1e-9));
      CHECK(std::abs(g.eval(xt, res.z) - res.value) <= 1e-9);
      for (int probe = 0; probe < 100; ++probe) {
        CHECK(res.value >= g.eval(xt, g.uncertainty_set.sample(rng)) - 1e-9);
      }
    }
  }
  CHECK(n.exact_pessimize == 40);
  CHECK(n.gz == 0);
}

TEST_CASE("qcqp oracles agree with finite differences; Slater margin is -0.05",
          "[gen][qcqp][fd]") {
  const auto inst = gen_qcqp(2, 6, 3, 3, 5);
  const auto spec = qcqp_problem(inst);
  const auto report = check_subgradients(spec, 25);
  INFO(report_str(report));
  CHECK(report.ok(1e-6));
  Counters n;
  for (const auto& g : spec.constraints) {
    const auto res = pessimize(g, *spec.slater_point, 1e-10, 1 << 20, n);
    CHECK(res.value == Catch::Approx(-0.05).margin(1e-12));
  }
}

// ----------------------------------------------------------------- LSE ----

TEST_CASE("lse_box_max: pinned knapsack walks", "[gen][lse]") {
  SECTION("negative ratio stops before the segment") {
    const auto [z, val] =
        detail::lse_box_max(make_vec({0, -2}), make_vec({1, 1}), 0.001, 1.0);
    CHECK(z[0] == 1.0);
    CHECK(z[1] == 0.001);
    CHECK(val == Catch::Approx(-2 * 0.001 + std::log(1.001)).margin(1e-14));
  }
  SECTION("interior stationary point inside a segment") {
    const auto [z, val] =
        detail::lse_box_max(make_vec({0, -0.8}), make_vec({1, 1}), 0.001, 1.0);
    CHECK(z[0] == 1.0);
    CHECK(z[1] == Catch::Approx(0.001 + (1.25 - 1.001)).margin(1e-14));
    CHECK(val == Catch::Approx(-0.8 * z[1] + std::log(1.25)).margin(1e-12));
  }
  SECTION("all-positive ratios saturate the box") {
    const auto [z, val] =
        detail::lse_box_max(make_vec({0.5, 0.2, 0.0}), make_vec({1, 2, 1}), 0.001, 1.0);
    CHECK((z.array() == 1.0).all());
    CHECK(val == Catch::Approx(0.7 + std::log(4.0)).margin(1e-14));
  }
  SECTION("KKT certificate on random data") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
      const Index J = 2 + static_cast<Index>(rng.uniform() * 5);
      const Vec a = rng.gaussian_vec(J);
      Vec beta(J);
      for (Index j = 0; j < J; ++j) beta[j] = std::exp(rng.uniform(-2.0, 2.0));
      const auto [z, val] = detail::lse_box_max(a, beta, 0.001, 1.0);
      const double S = beta.dot(z);
      for (Index j = 0; j < J; ++j) {
        const double grad = a[j] + beta[j] / S;
        if (z[j] >= 1.0 - 1e-12) {
          CHECK(grad >= -1e-10);
        } else if (z[j] <= 0.001 + 1e-12) {
          CHECK(grad <= 1e-10);
        } else {
          CHECK(std::abs(grad) <= 1e-10);
        }
      }
      CHECK(val == Catch::Approx(a.dot(z) + std::log(S)).margin(1e-12));
    }
  }
}

TEST_CASE("gen_lse: normalization, built-in Slater margin, reproducibility",
          "[gen][lse]") {
  const auto inst = gen_lse(3, 9, 5, 31);
  for (Index m = 0; m < inst.M; ++m) {
    CHECK(std::abs(inst.A[static_cast<std::size_t>(m)].jacobiSvd().singularValues()[0] -
                   1.0) <= 1e-8);
    CHECK(std::abs(inst.B[static_cast<std::size_t>(m)].jacobiSvd().singularValues()[0] -
                   1.0) <= 1e-8);
  }
  CHECK(std::abs(inst.xhat.norm() - 1.0) <= 1e-12);

  const auto spec = lse_problem(inst);
  Counters n;
  for (const auto& g : spec.constraints) {
    const auto res = pessimize(g, *spec.slater_point, 1e-10, 1 << 20, n);
    CHECK(res.value == Catch::Approx(-0.05).margin(1e-12));
  }

  const auto again = gen_lse(3, 9, 5, 31);
  for (Index m = 0; m < inst.M; ++m) {
    CHECK(inst.A[static_cast<std::size_t>(m)] == again.A[static_cast<std::size_t>(m)]);
    CHECK(inst.B[static_cast<std::size_t>(m)] == again.B[static_cast<std::size_t>(m)]);
    CHECK(inst.d[static_cast<std::size_t>(m)] == again.d[static_cast<std::size_t>(m)]);
  }
  CHECK_THROWS_AS(gen_lse(1, 4, 1, 3), ConfigError);
}

TEST_CASE("lse oracles: finite differences, concavity in z, monotone at x = 0",
          "[gen][lse][fd]") {
  const auto inst = gen_lse(2, 6, 4, 8);
  const auto spec = lse_problem(inst);
  const auto report = check_subgradients(spec, 30);
  INFO(report_str(report));
  CHECK(report.ok(1e-6));

  Rng rng(5);
  const auto& g = spec.constraints[0];
  const Vec x0 = spec.decision_set.sample(rng);
  const auto neg_in_z = [&](const Vec& z) { return -g.eval(x0, z); };
  CHECK(convexity_defect(neg_in_z, g.uncertainty_set, 200, rng) <= 1e-9);
  const auto in_x = [&](const Vec& x) {
    return g.eval(x, g.uncertainty_set.sample(rng));
  };
  // convexity in x at a frozen z
  const Vec zfix = g.uncertainty_set.sample(rng);
  const auto fx = [&](const Vec& x) { return g.eval(x, zfix); };
  CHECK(convexity_defect(fx, spec.decision_set, 200, rng) <= 1e-9);
  (void)in_x;

  // At x = 0 the exponentials collapse and g is increasing in every z_j.
  const Vec zero = Vec::Zero(inst.N);
  Vec z = g.uncertainty_set.sample(rng);
  const double base = g.eval(zero, z);
  for (Index j = 0; j < inst.J; ++j) {
    Vec zp = z;
    zp[j] = std::min(1.0, zp[j] + 1e-3);
    if (zp[j] > z[j]) CHECK(g.eval(zero, zp) > base);
  }
}

TEST_CASE("lse exact pessimizer dominates random probes", "[gen][lse]") {
  const auto inst = gen_lse(1, 5, 6, 17);
  const auto spec = lse_problem(inst);
  Rng rng(9);
  Counters n;
  for (int trial = 0; trial < 25; ++trial) {
    const Vec x = spec.decision_set.sample(rng);
    const auto res = pessimize(spec.constraints[0], x, 1e-10, 1 << 20, n);
    CHECK(spec.constraints[0].uncertainty_set.contains(res.z, 1e-12));
    CHECK(std::abs(spec.constraints[0].eval(x, res.z) - res.value) <= 1e-10);
    for (int probe = 0; probe < 200; ++probe) {
      const Vec zp = spec.constraints[0].uncertainty_set.sample(rng);
      CHECK(res.value >= spec.constraints[0].eval(x, zp) - 1e-10);
    }
  }
}

// ---------------------------------------------------------- newsvendor ----

TEST_CASE("profit: kink value and left slopes", "[gen][news]") {
  // v = 1.5, s = 0.2, t = 0.1, c = 1.
  const auto at = [&](double x, double d) { return detail::profit(1.5, 0.2, 0.1, 1.0, x, d); };
  CHECK(at(0.8, 0.8).value == Catch::Approx(0.5 * 0.8));  // (v - c) d at x = d
  CHECK(at(0.8, 0.8).slope == Catch::Approx(1.5 + 0.1 - 1.0));  // left branch at kink
  CHECK(at(0.5, 0.8).value == Catch::Approx(0.6 * 0.5 - 0.1 * 0.8));
  CHECK(at(1.0, 0.8).value == Catch::Approx(1.5 * 0.8 + 0.2 * 0.2 - 1.0));
  CHECK(at(1.0, 0.8).slope == Catch::Approx(0.2 - 1.0));
}

TEST_CASE("simplex_ball_argmax: vertex, sphere-cap and grid cross-checks",
          "[gen][news]") {
  SECTION("large radius reduces to the best vertex") {
    const Vec zhat = Vec::Constant(4, 0.25);
    const Vec c = make_vec({0.1, 0.9, 0.3, 0.2});
    const Vec z = detail::simplex_ball_argmax(c, zhat, 1.0, 1e-12);
    CHECK(z[1] == 1.0);
    CHECK(z.sum() == Catch::Approx(1.0));
  }
  SECTION("small radius: analytic sphere cap on the sum-zero subspace") {
    const Vec zhat = Vec::Constant(4, 0.25);
    const Vec c = make_vec({0.3, 0.1, 0.2, 0.15});
    const double r = 0.05;
    const Vec z = detail::simplex_ball_argmax(c, zhat, r, 1e-13);
    const Vec cperp = c - Vec::Constant(4, c.mean());
    const double expect = c.dot(zhat) + r * cperp.norm();
    CHECK(c.dot(z) == Catch::Approx(expect).margin(1e-10));
    CHECK(std::abs(z.sum() - 1.0) <= 1e-12);
    CHECK((z - zhat).norm() <= r + 1e-12);
  }
  SECTION("dominates a dense feasible grid (N = 3)") {
    const Vec zhat = Vec::Constant(3, 1.0 / 3.0);
    const Vec c = make_vec({0.8, -0.1, 0.4});
    const double r = 0.3;
    const Vec z = detail::simplex_ball_argmax(c, zhat, r, 1e-13);
    double best = -1e300;
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n - i; ++j) {
        const Vec p = make_vec({double(i) / n, double(j) / n, double(n - i - j) / n});
        if ((p - zhat).norm() <= r) best = std::max(best, c.dot(p));
      }
    }
    CHECK(c.dot(z) >= best - 1e-9);
    CHECK((z - zhat).norm() <= r + 1e-12);
    CHECK((z.array() >= -1e-12).all());
  }
}

TEST_CASE("newsvendor CVaR matches degenerate and brute-force references",
          "[gen][news][cvar]") {
  // Hand-built single-product instances exercise the oracle formula itself.
  NewsvendorInstance inst;
  inst.M = 1;
  inst.kappa = 0.0;
  inst.radius = 0.25;
  inst.c = make_vec({1.0});
  inst.v = make_vec({1.5});
  inst.s = make_vec({0.2});
  inst.t = make_vec({0.1});
  inst.rho = make_vec({0.3});
  inst.L = 10.0;
  inst.x_bar = make_vec({0.5});
  inst.tau_bar = make_vec({0.0});
  inst.slater_margins = make_vec({-1.0});

  SECTION("N = 1, kappa = 0: constraint collapses to -r - rho") {
    inst.N = 1;
    inst.d = Mat::Constant(1, 1, 0.8);
    const auto in = newsvendor_problem(inst);
    const double r_val = detail::profit(1.5, 0.2, 0.1, 1.0, 0.6, 0.8).value;
    const Vec z1 = make_vec({1.0});
    double best = 1e300;
    for (double tau = -5.0; tau <= 5.0; tau += 1e-4) {
      Vec xt = make_vec({0.6, tau});
      best = std::min(best, in.constraints[0].base.eval(xt, z1));
    }
    CHECK(best == Catch::Approx(-r_val - 0.3).margin(1e-4));
  }
  SECTION("N = 4, kappa = 0.5: CVaR equals the mean of the two worst losses") {
    inst.N = 4;
    inst.kappa = 0.5;
    inst.d = Mat(1, 4);
    inst.d << 0.6, 0.9, 1.2, 1.4;
    const auto in = newsvendor_problem(inst);
    const Vec zhat = Vec::Constant(4, 0.25);
    const double x = 0.7;
    std::vector<double> profits, losses;
    for (Index n = 0; n < 4; ++n) {
      const double r = detail::profit(1.5, 0.2, 0.1, 1.0, x, inst.d(0, n)).value;
      profits.push_back(r);
      losses.push_back(-r);
    }
    std::sort(losses.begin(), losses.end());
    const double cvar = 0.5 * (losses[2] + losses[3]);
    // g is piecewise linear in tau with breakpoints at the profit values, so
    // the minimum over tau sits at one of them.
    double best = 1e300;
    for (double tau : profits) {
      const Vec xt = make_vec({x, tau});
      best = std::min(best, in.constraints[0].base.eval(xt, zhat));
    }
    CHECK(best == Catch::Approx(cvar - 0.3).margin(1e-12));
  }
}

TEST_CASE("gen_newsvendor: sane economics, Slater construction, reproducibility",
          "[gen][news]") {
  const auto inst = gen_newsvendor(3, 12, 0.9, 0.25, 2024);
  for (Index m = 0; m < inst.M; ++m) {
    CHECK(inst.v[m] > inst.c[m]);
    CHECK(inst.c[m] > inst.s[m]);
    CHECK(inst.s[m] >= 0.0);
    CHECK(inst.t[m] >= 0.0);
    CHECK(inst.rho[m] >= 0.01);
    // Slater margin at least 5% of rho, as constructed.
    CHECK(inst.slater_margins[m] <= -0.05 * inst.rho[m] + 1e-12);
  }
  CHECK((inst.d.array() >= 0.5).all());
  CHECK((inst.d.array() <= 1.5).all());
  double L = 0.0;
  for (Index m = 0; m < inst.M; ++m) {
    L = std::max(L, (inst.v[m] + inst.t[m] + inst.c[m]) * inst.d.row(m).maxCoeff());
  }
  CHECK(inst.L == L);

  const auto again = gen_newsvendor(3, 12, 0.9, 0.25, 2024);
  CHECK(inst.d == again.d);
  CHECK(inst.rho == again.rho);
  CHECK(inst.tau_bar == again.tau_bar);
  CHECK_THROWS_AS(gen_newsvendor(1, 1, 0.9, 0.25, 1), ConfigError);
  CHECK_THROWS_AS(gen_newsvendor(1, 4, 1.0, 0.25, 1), ConfigError);
}

TEST_CASE("newsvendor spec: penalization caps, hooks and finite differences",
          "[gen][news][fd]") {
  const auto inst = gen_newsvendor(2, 6, 0.8, 0.3, 11);
  const auto in = newsvendor_problem(inst);

  Rng rng(1);
  auto ext = penalize(in, rng);
  CHECK_FALSE(ext.heuristic_G);
  CHECK_FALSE(ext.heuristic_h_bound);
  for (Index m = 0; m < inst.M; ++m) {
    CHECK(ext.a[static_cast<std::size_t>(m)] ==
          Catch::Approx((inst.L + inst.rho[m]) / (0.3 * 0.3)));
  }
  // The lifted Slater point keeps a strictly negative worst-case margin.
  Counters n;
  CHECK(slater_margin(ext.spec, 1e-6, 1 << 22, n) < 0.0);

  const auto rep_ext = check_subgradients(ext.spec, 40);
  INFO(report_str(rep_ext));
  CHECK(rep_ext.ok(1e-6));

  const auto direct = direct_intersection_spec(in);
  const auto rep_dir = check_subgradients(direct, 25);
  INFO(report_str(rep_dir));
  CHECK(rep_dir.ok(1e-6));

  // The intersection pessimizer certifies the recorded Slater margins.
  for (Index m = 0; m < inst.M; ++m) {
    const auto res = in.constraints[static_cast<std::size_t>(m)]
                         .exact_intersection_pessimize(*in.slater_point, 1e-12);
    CHECK(res.value == Catch::Approx(inst.slater_margins[m]).margin(1e-9));
  }
}
