// Minimal library walkthrough: solve a tiny 2-D robust linear program and
// compare against a brute-force grid optimum.
//
//   min  c'x   s.t.  (a + z)'x <= b  for every ||z|| <= 1,  x in [-1, 1]^2
//
// The worst case has the closed form a'x + ||x|| <= b, so the exact
// pessimization hook returns z = x / ||x|| and the grid check is exact.
// SPDX-License-Identifier: MIT
#include <cmath>
#include <cstdio>

#include "prom3/outer.hpp"

int main() {
  using namespace prom3;

  const Vec a = (Vec(2) << 0.3, -0.2).finished();
  const Vec c = (Vec(2) << 1.0, 0.5).finished();
  const double b = 1.0;

  ProblemSpec spec;
  spec.objective.eval = [c](const Vec& x) { return c.dot(x); };
  spec.objective.subgrad = [c](const Vec&) { return c; };
  spec.objective.D0 = c.norm();
  spec.decision_set = SetDescriptor::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));

  ConstraintOracle g;
  g.eval = [a, b](const Vec& x, const Vec& z) { return (a + z).dot(x) - b; };
  g.subgrad_x = [a](const Vec&, const Vec& z) { return Vec(a + z); };
  g.supergrad_z = [](const Vec& x, const Vec&) { return Vec(-x); };
  g.uncertainty_set = SetDescriptor::ball(Vec::Zero(2), 1.0);
  g.D = a.norm() + 1.0;
  g.E = std::sqrt(2.0);
  g.exact_pessimize = [a, b](const Vec& x, double) {
    PessimizeResult r;
    const double n = x.norm();
    r.z = n > 0 ? Vec(x / n) : Vec(Vec::Zero(2));
    r.value = a.dot(x) + n - b;
    return r;
  };
  spec.constraints.push_back(std::move(g));
  spec.slater_point = Vec::Zero(2);

  OuterConfig cfg;
  cfg.K = 120;
  cfg.alpha = 0.3;  // aggressive but stable on this well-conditioned LP
  cfg.virtual_time = true;

  const OuterResult r = solve(spec, cfg);

  // Brute-force reference on a 201 x 201 grid over the box.
  double ref = 1e300;
  const int n = 201;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vec x(2);
      x << -1.0 + 2.0 * i / (n - 1), -1.0 + 2.0 * j / (n - 1);
      if (a.dot(x) + x.norm() <= b + 1e-12) ref = std::min(ref, c.dot(x));
    }
  }

  std::printf("trace tail (last 5 of %zu rows):\n", r.trace.rows.size());
  std::printf("%6s %14s %14s %12s\n", "iter", "objective", "violation", "|lambda|");
  for (std::size_t i = r.trace.rows.size() - 5; i < r.trace.rows.size(); ++i) {
    const TraceRow& row = r.trace.rows[i];
    std::printf("%6lld %14.8f %14.3e %12.6f\n", row.iter, row.objective, row.violation,
                row.lambda_norm);
  }
  const double obj = c.dot(r.x_bar);
  const double viol = a.dot(r.x_bar) + r.x_bar.norm() - b;
  std::printf("\naveraged iterate   x = (%.6f, %.6f)\n", r.x_bar[0], r.x_bar[1]);
  std::printf("objective          %.8f  (grid reference %.8f, gap %.3e)\n", obj, ref,
              obj - ref);
  std::printf("true violation     %.3e\n", viol > 0 ? viol : 0.0);
  std::printf("oracle calls       f0=%lld gx=%lld gz=%lld proj=%lld\n", r.counters.f0,
              r.counters.gx, r.counters.gz, r.counters.proj);
  return (obj - ref <= 2e-2 && viol <= 1e-3) ? 0 : 1;
}
