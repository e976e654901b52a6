// Tests for the outer multiplier loop: lambda updates, end-to-end solves on
// an analytic robust LP, oracle accounting, trace/CSV and the extended solve.
// SPDX-License-Identifier: MIT
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "prom3/outer.hpp"
#include "test_util.hpp"

using namespace prom3;

namespace {

Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

/// Robust LP: min c'x  s.t.  max_{||z|| <= 1} (a + z)'x <= b  over Box[-1,1]^2.
/// The worst case is a'x + ||x|| <= b, so a grid brute force is available.
struct RobustLp {
  Vec a, c;
  double b;
  ProblemSpec spec;
};

RobustLp robust_lp(const Vec& a, const Vec& c, double b, bool with_hook = true) {
  RobustLp lp;
  lp.a = a;
  lp.c = c;
  lp.b = b;
  lp.spec.objective.eval = [c](const Vec& x) { return c.dot(x); };
  lp.spec.objective.subgrad = [c](const Vec&) { return c; };
  lp.spec.objective.D0 = c.norm();
  lp.spec.decision_set =
      SetDescriptor::box(Vec::Constant(a.size(), -1.0), Vec::Constant(a.size(), 1.0));
  ConstraintOracle g;
  g.eval = [a, b](const Vec& x, const Vec& z) { return (a + z).dot(x) - b; };
  g.subgrad_x = [a](const Vec&, const Vec& z) { return Vec(a + z); };
  g.supergrad_z = [](const Vec& x, const Vec&) { return Vec(-x); };
  g.uncertainty_set = SetDescriptor::ball(Vec::Zero(a.size()), 1.0);
  g.D = a.norm() + 1.0;
  g.E = std::sqrt(static_cast<double>(a.size()));
  if (with_hook) {
    g.exact_pessimize = [a, b](const Vec& x, double) {
      PessimizeResult r;
      const double n = x.norm();
      r.z = n > 0 ? Vec(x / n) : Vec(Vec::Zero(x.size()));
      r.value = a.dot(x) + n - b;
      return r;
    };
  }
  lp.spec.constraints.push_back(std::move(g));
  lp.spec.slater_point = Vec::Zero(a.size());
  return lp;
}

/// Brute-force reference optimum of the robust LP over an n-point-per-axis grid.
double lp_grid_optimum(const RobustLp& lp, int n) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vec x = make_vec({-1.0 + 2.0 * i / (n - 1), -1.0 + 2.0 * j / (n - 1)});
      if (lp.a.dot(x) + x.norm() <= lp.b + 1e-12) {
        best = std::min(best, lp.c.dot(x));
      }
    }
  }
  return best;
}

/// Counting instance: f0 = 0, one constraint g(x, z) = z over Z = [0, 1],
/// X = [0, 1].  g is always 1 after pessimization, so lambda stays active.
ProblemSpec counting_spec() {
  ProblemSpec spec;
  spec.objective.eval = [](const Vec&) { return 0.0; };
  spec.objective.subgrad = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
  spec.objective.D0 = 1.0;
  spec.decision_set = SetDescriptor::box(make_vec({0}), make_vec({1}));
  ConstraintOracle g;
  g.eval = [](const Vec&, const Vec& z) { return z[0]; };
  g.subgrad_x = [](const Vec& x, const Vec&) { return Vec(Vec::Zero(x.size())); };
  g.supergrad_z = [](const Vec&, const Vec& z) { return Vec(-Vec::Ones(z.size())); };
  g.uncertainty_set = SetDescriptor::box(make_vec({0}), make_vec({1}));
  g.D = 1.0;
  g.E = 1.0;
  spec.constraints.push_back(std::move(g));
  return spec;
}

}  // namespace

TEST_CASE("lambda_update applies the extrapolated positive-part rule", "[outer]") {
  CHECK(lambda_update(make_vec({0}), make_vec({-1}), make_vec({-1}), 0.1)[0] == 0.0);
  CHECK(lambda_update(make_vec({1}), make_vec({0.2}), make_vec({-0.2}), 0.5)[0] ==
        Catch::Approx(1.3));
  // Stationary g: extrapolation collapses to lambda + beta g, clipped.
  CHECK(lambda_update(make_vec({0.3}), make_vec({-1}), make_vec({-1}), 0.5)[0] == 0.0);
  CHECK(lambda_update(make_vec({0.3}), make_vec({0.4}), make_vec({0.4}), 0.5)[0] ==
        Catch::Approx(0.5));
  // Componentwise and never negative.
  const Vec up = lambda_update(make_vec({0.1, 2.0}), make_vec({-5.0, 1.0}),
                               make_vec({0.0, 1.0}), 1.0);
  CHECK(up[0] == 0.0);
  CHECK(up[1] == Catch::Approx(3.0));
}

TEST_CASE("solve reaches the brute-force optimum of a robust LP", "[outer][lp]") {
  const auto lp = robust_lp(make_vec({0.3, -0.2}), make_vec({1.0, 0.5}), 1.0);
  const double ref = lp_grid_optimum(lp, 101);

  OuterConfig cfg;
  cfg.K = 60;
  cfg.alpha = 0.3;  // damped proximal weight: shrinks the multiplier ramp-up transient
  const auto r = solve(lp.spec, cfg);

  const double gap = std::abs(lp.spec.objective.eval(r.x_bar) - ref);
  const double worst = lp.a.dot(r.x_bar) + r.x_bar.norm() - lp.b;
  INFO("objective " << lp.spec.objective.eval(r.x_bar) << " ref " << ref
                    << " violation " << worst);
  CHECK(gap <= 3e-2);
  CHECK(worst <= 5e-3);
  CHECK(lp.spec.decision_set.contains(r.x_bar, 1e-12));
  REQUIRE(r.trace.rows.size() == 60);
  // Counters and time are monotone along the trace.
  for (std::size_t i = 1; i < r.trace.rows.size(); ++i) {
    CHECK(r.trace.rows[i].counts.total() >= r.trace.rows[i - 1].counts.total());
    CHECK(r.trace.rows[i].time_s >= r.trace.rows[i - 1].time_s);
  }
  // The final row's violation matches an epsilon_check at the same accuracy.
  const auto chk = epsilon_check(lp.spec, r.x_bar, 3e-2, 1e-4, ref);
  CHECK(chk.violation <= 5e-3);
  REQUIRE(chk.gap_ok.has_value());
  CHECK(*chk.gap_ok);
}

TEST_CASE("solve improves with K on the robust LP", "[outer][lp]") {
  const auto lp = robust_lp(make_vec({0.3, -0.2}), make_vec({1.0, 0.5}), 1.0);
  const double ref = lp_grid_optimum(lp, 101);
  const auto gap_at = [&](long long K) {
    OuterConfig cfg;
    cfg.K = K;
    const auto r = solve(lp.spec, cfg);
    return std::abs(lp.spec.objective.eval(r.x_bar) - ref);
  };
  const double g10 = gap_at(10);
  const double g40 = gap_at(40);
  INFO("gap(10) = " << g10 << ", gap(40) = " << g40);
  CHECK(g40 <= g10 + 5e-3);  // monotone trend with a small noise allowance
}

TEST_CASE("a never-active constraint leaves lambda at zero", "[outer]") {
  ProblemSpec spec;
  const Vec c = make_vec({0.6, 0.8});
  spec.objective.eval = [c](const Vec& x) { return c.dot(x); };
  spec.objective.subgrad = [c](const Vec&) { return c; };
  spec.objective.D0 = 1.0;
  spec.decision_set = SetDescriptor::ball(Vec::Zero(2), 1.0);
  ConstraintOracle g;
  g.eval = [](const Vec&, const Vec&) { return -1.0; };
  g.subgrad_x = [](const Vec& x, const Vec&) { return Vec(Vec::Zero(x.size())); };
  g.supergrad_z = [](const Vec&, const Vec& z) { return Vec(Vec::Zero(z.size())); };
  g.uncertainty_set = SetDescriptor::ball(Vec::Zero(1), 1.0);
  g.D = 1.0;
  g.E = 1.0;
  spec.constraints.push_back(std::move(g));

  OuterConfig cfg;
  cfg.K = 30;
  const auto r = solve(spec, cfg);
  for (const auto& row : r.trace.rows) CHECK(row.lambda_norm == 0.0);
  // With lambda = 0 throughout, the run is proximal minimization of c'x.
  CHECK((r.x_bar - (-c)).norm() <= 0.1);
}

TEST_CASE("K = 1 oracle accounting identity", "[outer][counters]") {
  auto spec = counting_spec();
  OuterConfig cfg;
  cfg.K = 1;
  cfg.inner_T = 50;
  cfg.theta = 0.5;               // T_p = ceil((1 * 1 / 0.5)^2) = 4
  cfg.pessimize_budget = 1000;
  cfg.reuse_ztilde = false;
  const auto r = solve(spec, cfg);
  const long long T = 50, Tp = 4;
  CHECK(r.counters.f0 == T);
  CHECK(r.counters.gx == T);
  CHECK(r.counters.gz == Tp + (T + 1));
  CHECK(r.counters.proj == 1 + Tp + 2 * T);
  CHECK(r.counters.h == 0);
  REQUIRE(r.trace.rows.size() == 1);
  CHECK(r.trace.rows[0].lambda[0] > 0.0);  // g = 1 > 0 activates the multiplier
}

TEST_CASE("z-reuse skips re-pessimization for active constraints", "[outer][counters]") {
  auto spec = counting_spec();
  OuterConfig cfg;
  cfg.K = 3;
  cfg.inner_T = 50;
  cfg.theta = 0.5;
  cfg.pessimize_budget = 1000;
  cfg.reuse_ztilde = true;
  const auto r = solve(spec, cfg);
  const long long T = 50, Tp = 4, K = 3;
  // Pessimization runs only at k = 0; the multiplier stays active afterwards.
  CHECK(r.counters.gz == Tp + K * (T + 1));
  CHECK(r.counters.proj == 1 + Tp + K * 2 * T);
  CHECK(r.counters.f0 == K * T);
  CHECK(r.counters.gx == K * T);
  for (const auto& row : r.trace.rows) CHECK(row.lambda[0] > 0.0);

  // Reuse off: every round pays the pessimization pass.
  cfg.reuse_ztilde = false;
  const auto r2 = solve(spec, cfg);
  CHECK(r2.counters.gz == K * Tp + K * (T + 1));
  CHECK(r2.counters.proj == 1 + K * Tp + K * 2 * T);
}

TEST_CASE("trace serializes with the exact CSV contract", "[outer][csv]") {
  auto spec = counting_spec();
  OuterConfig cfg;
  cfg.K = 4;
  cfg.inner_T = 20;
  cfg.theta = 0.5;
  cfg.virtual_time = true;
  const auto r = solve(spec, cfg);
  std::ostringstream os;
  write_csv(r.trace, os);
  const std::string text = os.str();
  CHECK(text.rfind("iter,time_s,objective,violation,lambda_norm,calls_f0,calls_gx,"
                   "calls_gz,calls_h,calls_proj\n", 0) == 0);
  // One line per iteration plus the header.
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);

  // Virtual time makes repeated runs byte-identical.
  const auto r2 = solve(spec, cfg);
  std::ostringstream os2;
  write_csv(r2.trace, os2);
  CHECK(text == os2.str());
}

TEST_CASE("theory mode enforces the alpha and beta caps", "[outer][errors]") {
  const auto lp = robust_lp(make_vec({0.3, -0.2}), make_vec({1.0, 0.5}), 1.0);
  const double lip = lipschitz_f(lp.spec);
  OuterConfig cfg;
  cfg.K = 2;
  cfg.alpha = 2.0 / lip;
  CHECK_THROWS_AS(solve(lp.spec, cfg), ConfigError);
  cfg.alpha.reset();
  cfg.beta = 1.0 / lip;  // exceeds 1/(2 Lip_f)
  CHECK_THROWS_AS(solve(lp.spec, cfg), ConfigError);
  cfg.theory_mode = false;
  cfg.inner_T = 16;
  const auto r = solve(lp.spec, cfg);  // permitted outside theory mode
  CHECK(r.trace.rows.size() == 2);
}

TEST_CASE("pessimization budget warnings accumulate in the trace", "[outer]") {
  auto lp = robust_lp(make_vec({0.3, -0.2}), make_vec({1.0, 0.5}), 1.0,
                      /*with_hook=*/false);
  OuterConfig cfg;
  cfg.K = 2;
  cfg.inner_T = 16;
  cfg.theta = 1e-9;          // impossible at this budget
  cfg.pessimize_budget = 4;
  cfg.theta_report = 0.25;   // keep the metric path affordable
  const auto r = solve(lp.spec, cfg);
  CHECK(r.trace.budget_limited);
}

TEST_CASE("numerical failures carry outer-round context", "[outer][errors]") {
  auto spec = counting_spec();
  spec.objective.subgrad = [](const Vec& x) {
    return Vec(Vec::Constant(x.size(), std::numeric_limits<double>::quiet_NaN()));
  };
  OuterConfig cfg;
  cfg.K = 2;
  cfg.inner_T = 8;
  cfg.theta = 0.5;
  try {
    (void)solve(spec, cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("outer round 1") != std::string::npos);
  }
}

TEST_CASE("epsilon_check reports gap and clamped violation", "[outer]") {
  const auto lp = robust_lp(make_vec({0.3, -0.2}), make_vec({1.0, 0.5}), 1.0);

  SECTION("Slater point: violation clamps to zero") {
    const auto chk = epsilon_check(lp.spec, Vec::Zero(2), 1e-2, 1e-3);
    CHECK(chk.violation == 0.0);
    CHECK(chk.violation_ok);
    CHECK_FALSE(chk.gap_ok.has_value());  // no reference supplied
  }

  SECTION("self-comparison: zero gap") {
    const Vec x = make_vec({0.1, -0.1});
    const auto chk = epsilon_check(lp.spec, x, 1e-2, 1e-3, lp.spec.objective.eval(x));
    CHECK(chk.gap == 0.0);
    REQUIRE(chk.gap_ok.has_value());
    CHECK(*chk.gap_ok);
  }

  SECTION("infeasible probe: witness lower-bounds the violation") {
    // x = (1, 1): worst case = a'x + ||x|| - b = 0.1 + sqrt(2) - 1 > 0.5.
    const Vec x = make_vec({1.0, 1.0});
    const auto chk = epsilon_check(lp.spec, x, 1e-2, 1e-3);
    CHECK(chk.violation >= 0.5 - 1e-3);
    CHECK_FALSE(chk.violation_ok);
  }
}

namespace {

/// Wraps the robust LP as an intersection problem with one vacuous cut
/// h(z) = -1, whose penalized solution must match the plain solve.
IntersectionSpec lp_with_vacuous_cut(const RobustLp& lp, double G) {
  IntersectionSpec in;
  in.objective = lp.spec.objective;
  in.decision_set = lp.spec.decision_set;
  in.slater_point = lp.spec.slater_point;
  IntersectionConstraintOracle c;
  c.base = lp.spec.constraints[0];
  CutFunction h;
  h.eval = [](const Vec&) { return -1.0; };
  h.subgrad = [](const Vec& z) { return Vec(Vec::Zero(z.size())); };
  h.F = 0.0;
  c.cuts.push_back(std::move(h));
  c.zbar = Vec::Zero(2);
  c.G = G;
  c.h_norm_bound = 1.0;
  in.constraints.push_back(std::move(c));
  return in;
}

}  // namespace

TEST_CASE("solve_extended with a vacuous cut matches the plain solve", "[outer][extended]") {
  const auto lp = robust_lp(make_vec({0.3, -0.2}), make_vec({1.0, 0.5}), 1.0,
                            /*with_hook=*/false);
  const auto in = lp_with_vacuous_cut(lp, -2.0);

  OuterConfig cfg;
  cfg.K = 40;
  const auto plain = solve(lp.spec, cfg);
  const auto ext = solve_extended(in, cfg);

  CHECK(ext.ext.a[0] == Catch::Approx(2.0));
  const double fp = lp.spec.objective.eval(plain.x_bar);
  const double fe = lp.spec.objective.eval(ext.x_bar);
  INFO("plain " << fp << " extended " << fe);
  CHECK(std::abs(fp - fe) <= 2e-2);

  // Every dual iterate respects its cap (and the vacuous dual stays small).
  const Vec mu = ext.ext.mu_block(ext.result.x_bar, 0);
  CHECK(mu[0] >= 0.0);
  CHECK(mu[0] <= ext.ext.a[0] + 1e-12);
}

TEST_CASE("an oversized dual cap leaves iterates bitwise unchanged", "[outer][extended]") {
  const auto lp = robust_lp(make_vec({0.3, -0.2}), make_vec({1.0, 0.5}), 1.0,
                            /*with_hook=*/false);
  OuterConfig cfg;
  cfg.K = 12;
  cfg.inner_T = 64;
  const auto r1 = solve_extended(lp_with_vacuous_cut(lp, -2.0), cfg);
  const auto r2 = solve_extended(lp_with_vacuous_cut(lp, -2000.0), cfg);
  CHECK(r2.ext.a[0] == Catch::Approx(2000.0));
  // The cut pushes mu downward, so neither cap ever binds: identical runs.
  CHECK((r1.result.x_bar.array() == r2.result.x_bar.array()).all());
}

TEST_CASE("certified_violation agrees with the analytic worst case", "[outer][extended]") {
  // Constraint g(x, z) = x'z over Ball(0,1) ∩ Ball(0.5 e1, 1): the certified
  // maximum at x = e1 is max z1 over the lens, which is attained at the point
  // where the two circles cross or at a pole; geometry gives z1 max = 1 at
  // (1,0)? No: (1,0) has ||(1,0) - (0.5,0)|| = 0.5 <= 1, so (1,0) is in both
  // and the maximum is exactly 1.
  IntersectionSpec in;
  in.objective.eval = [](const Vec&) { return 0.0; };
  in.objective.subgrad = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
  in.objective.D0 = 1.0;
  in.decision_set = SetDescriptor::ball(Vec::Zero(2), 1.0);
  IntersectionConstraintOracle c;
  c.base.eval = [](const Vec& x, const Vec& z) { return x.dot(z); };
  c.base.subgrad_x = [](const Vec&, const Vec& z) { return Vec(z); };
  c.base.supergrad_z = [](const Vec& x, const Vec&) { return Vec(-x); };
  c.base.uncertainty_set = SetDescriptor::ball(Vec::Zero(2), 1.0);
  c.base.D = 1.0;
  c.base.E = 1.0;
  CutFunction h;
  h.eval = [](const Vec& z) { return (z - make_vec({0.5, 0.0})).squaredNorm() - 1.0; };
  h.subgrad = [](const Vec& z) { return Vec(2.0 * (z - make_vec({0.5, 0.0}))); };
  h.F = 3.0;
  c.cuts.push_back(std::move(h));
  c.zbar = make_vec({0.5, 0.0});
  c.G = -2.0;
  c.cut_region = SetDescriptor::ball(make_vec({0.5, 0.0}), 1.0);
  in.constraints.push_back(std::move(c));

  const double v = certified_violation(in, make_vec({1.0, 0.0}), 1e-2);
  CHECK(v == Catch::Approx(1.0).margin(2e-2));
  CHECK(v <= 1.0 + 1e-9);  // never overshoots the true maximum

  // At x = -e2 the maximizer is the lens corner with the most negative z2:
  // the circle intersection points are (0.25, ±sqrt(1 - 0.0625)).
  const double v2 = certified_violation(in, make_vec({0.0, -1.0}), 1e-2);
  CHECK(v2 == Catch::Approx(std::sqrt(1.0 - 0.0625)).margin(2e-2));
}

namespace {

/// min x1 + 0.5 x2 over Box[-1,1]^2  s.t.  max z'x <= 0.5 with z ranging over
/// the lens Ball(0,1) ∩ Ball((0.6,0), 0.9).  Both the penalized and the true
/// intersection pessimizations admit closed forms (interior-vs-sphere cases
/// of a concave quadratic; per-ball maximizers vs lens corners), keeping the
/// per-row violation reporting cheap on both solve arms.
IntersectionSpec lens_instance() {
  const Vec zb = make_vec({0.6, 0.0});
  const double r = 0.9;
  IntersectionSpec in;
  in.objective.eval = [](const Vec& x) { return x[0] + 0.5 * x[1]; };
  in.objective.subgrad = [](const Vec&) { return make_vec({1.0, 0.5}); };
  in.objective.D0 = std::sqrt(1.25);
  in.objective.D0_smooth = 0.0;
  in.decision_set = SetDescriptor::box(make_vec({-1, -1}), make_vec({1, 1}));
  in.slater_point = Vec::Zero(2);

  IntersectionConstraintOracle c;
  c.base.eval = [](const Vec& x, const Vec& z) { return z.dot(x) - 0.5; };
  c.base.subgrad_x = [](const Vec&, const Vec& z) { return Vec(z); };
  c.base.supergrad_z = [](const Vec& x, const Vec&) { return Vec(-x); };
  c.base.uncertainty_set = SetDescriptor::ball(Vec::Zero(2), 1.0);
  c.base.D = 1.0;
  c.base.E = std::sqrt(2.0);
  c.base.D_smooth = 0.0;
  c.base.E1_smooth = 1.0;
  c.base.E2_smooth = 0.0;

  CutFunction h;
  h.eval = [zb, r](const Vec& z) { return (z - zb).squaredNorm() - r * r; };
  h.subgrad = [zb](const Vec& z) { return Vec(2.0 * (z - zb)); };
  h.F = 3.2;  // 2 * max ||z - zbar|| over the unit ball = 2 * 1.6
  h.F_smooth = 2.0;
  c.cuts.push_back(std::move(h));
  c.zbar = zb;
  c.G = -1.0;  // min_x max_z g >= -0.5 since 0 lies in the lens
  c.h_norm_bound = 1.75;  // max |h| over the unit ball = 1.6^2 - 0.81
  c.cut_region = SetDescriptor::ball(zb, r);

  // max_{||z||<=1} [ z'x - mu(||z - zbar||^2 - r^2) ] - 0.5.
  c.exact_penalized_pessimize = [zb, r](const Vec& x, const Vec& mu, double) {
    PessimizeResult res;
    const double m = mu[0];
    if (m <= 0.0) {
      const double n = x.norm();
      res.z = n > 0 ? Vec(x / n) : zb;
    } else {
      const Vec zu = zb + x / (2.0 * m);
      if (zu.norm() <= 1.0) {
        res.z = zu;
      } else {
        const Vec w = x + 2.0 * m * zb;
        res.z = Vec(w / w.norm());
      }
    }
    res.value = x.dot(res.z) - m * ((res.z - zb).squaredNorm() - r * r) - 0.5;
    return res;
  };

  // max z'x over the lens: per-ball maximizers when cross-feasible, else the
  // better lens corner (circle crossings at z1 = (1 + 0.36 - 0.81) / 1.2).
  c.exact_intersection_pessimize = [zb, r](const Vec& x, double) {
    const double z1 = (1.0 + zb[0] * zb[0] - r * r) / (2.0 * zb[0]);
    const double z2 = std::sqrt(1.0 - z1 * z1);
    std::vector<Vec> cand = {make_vec({z1, z2}), make_vec({z1, -z2}), zb};
    const double n = x.norm();
    if (n > 0) {
      const Vec za = x / n;
      if ((za - zb).norm() <= r + 1e-12) cand.push_back(za);
      const Vec zc = zb + (r / n) * x;
      if (zc.norm() <= 1.0 + 1e-12) cand.push_back(zc);
    }
    PessimizeResult res;
    res.value = -std::numeric_limits<double>::infinity();
    for (const Vec& z : cand) {
      const double v = x.dot(z) - 0.5;
      if (v > res.value) {
        res.value = v;
        res.z = z;
      }
    }
    return res;
  };
  in.constraints.push_back(std::move(c));
  return in;
}

}  // namespace

TEST_CASE("extended and direct solves agree on a two-ball lens instance",
          "[outer][extended][dykstra]") {
  const IntersectionSpec in = lens_instance();

  OuterConfig cfg;
  cfg.K = 120;
  cfg.alpha = 0.25;  // damped prox: shrinks the multiplier ramp-up transient
  cfg.step_mode = StepMode::smooth;  // z-linear base + quadratic cut stay smooth

  const auto ext = solve_extended(in, cfg);
  CHECK(ext.ext.a[0] == Catch::Approx(1.0 / 0.81));
  CHECK_FALSE(ext.ext.heuristic_G);
  CHECK_FALSE(ext.ext.heuristic_h_bound);

  const auto dir = solve(direct_intersection_spec(in), cfg);

  const double f_ext = in.objective.eval(ext.x_bar);
  const double f_dir = in.objective.eval(dir.x_bar);
  INFO("extended " << f_ext << " direct " << f_dir);
  CHECK(std::abs(f_ext - f_dir) <= 2e-2);

  // Certified against the true intersection on both arms.
  CHECK(certified_violation(in, ext.x_bar, 1e-4) <= 2e-2);
  CHECK(certified_violation(in, dir.x_bar, 1e-4) <= 2e-2);

  // Both arms ran on their closed-form pessimizers.
  CHECK(ext.result.counters.exact_pessimize >= 1);
  CHECK(dir.counters.exact_pessimize >= 1);
}
