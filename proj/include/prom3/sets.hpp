// prom3: first-order solver library for max-min-max robust optimization.
// Projectable convex set descriptors with exact Euclidean projections, and a
// Dykstra alternating-projection reference oracle for intersections.
// SPDX-License-Identifier: MIT
#ifndef PROM3_SETS_HPP
#define PROM3_SETS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "prom3/common.hpp"
#include "prom3/rng.hpp"

namespace prom3 {

/// Euclidean projection onto the probability simplex {z >= 0, sum z = 1} by
/// sort-then-threshold. Ties in the threshold are resolved by the cumulative-sum
/// rule: the retained support is the longest sorted prefix with positive slack.
inline Vec project_simplex(Index n, const Vec& point) {
  if (n < 1) throw std::invalid_argument("project_simplex: dimension must be >= 1");
  require_dim(point, n, "project_simplex");
  require_finite(point, "project_simplex");
  std::vector<double> u(point.data(), point.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Index k = 0; k < n; ++k) {
    cumsum += u[static_cast<size_t>(k)];
    const double cand = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[static_cast<size_t>(k)] - cand > 0.0) tau = cand;
  }
  Vec out(n);
  for (Index i = 0; i < n; ++i) out[i] = std::max(point[i] - tau, 0.0);
  return out;
}

class SetDescriptor;
inline Vec project_intersection_reference(const std::vector<SetDescriptor>& sets,
                                          const Vec& point, double tol, long max_iter);

/// Description of a non-empty convex set with an exact Euclidean projection.
/// All variants except NonnegOrthant are compact. Descriptors are immutable
/// after construction; every operation on them is a pure function.
class SetDescriptor {
 public:
  enum class Kind { Ball, Box, Simplex, IntervalBox, NonnegOrthant, Product, Intersection };

  static SetDescriptor ball(Vec center, double radius) {
    require_finite(center, "SetDescriptor::ball");
    if (!(radius >= 0.0) || !std::isfinite(radius)) {
      throw std::invalid_argument("SetDescriptor::ball: radius must be >= 0");
    }
    SetDescriptor s(Kind::Ball, center.size());
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
  }

  static SetDescriptor box(Vec lower, Vec upper) {
    require_finite(lower, "SetDescriptor::box");
    require_finite(upper, "SetDescriptor::box");
    if (lower.size() != upper.size()) {
      throw std::invalid_argument("SetDescriptor::box: bound dimensions differ");
    }
    if ((lower.array() > upper.array()).any()) {
      throw std::invalid_argument("SetDescriptor::box: lower > upper");
    }
    SetDescriptor s(Kind::Box, lower.size());
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
  }

  static SetDescriptor simplex(Index dimension) {
    if (dimension < 1) throw std::invalid_argument("SetDescriptor::simplex: dimension must be >= 1");
    return SetDescriptor(Kind::Simplex, dimension);
  }

  /// The cube [0, upper]^dimension used for capped dual multipliers.
  static SetDescriptor interval_box(double upper, Index dimension) {
    if (!(upper > 0.0) || !std::isfinite(upper)) {
      throw std::invalid_argument("SetDescriptor::interval_box: upper must be > 0");
    }
    if (dimension < 1) {
      throw std::invalid_argument("SetDescriptor::interval_box: dimension must be >= 1");
    }
    SetDescriptor s(Kind::IntervalBox, dimension);
    s.radius_ = upper;  // reuse scalar slot for the interval upper bound
    return s;
  }

  static SetDescriptor nonneg_orthant(Index dimension) {
    if (dimension < 1) {
      throw std::invalid_argument("SetDescriptor::nonneg_orthant: dimension must be >= 1");
    }
    return SetDescriptor(Kind::NonnegOrthant, dimension);
  }

  static SetDescriptor product(std::vector<SetDescriptor> factors) {
    if (factors.empty()) throw std::invalid_argument("SetDescriptor::product: no factors");
    Index dim = 0;
    for (const auto& f : factors) dim += f.dim();
    SetDescriptor s(Kind::Product, dim);
    s.factors_ = std::make_shared<std::vector<SetDescriptor>>(std::move(factors));
    return s;
  }

  /// Intersection of same-dimension blocks, projected via Dykstra's alternating
  /// projections. This variant backs the direct-solve reference path used to
  /// cross-check the penalized reformulation; the production solvers never
  /// construct one themselves. Each projection call counts as ONE projection
  /// regardless of the number of Dykstra sweeps it spends internally.
  /// `feasible_point` must lie in every block and serves as the deterministic
  /// interior point (Dykstra needs a non-empty intersection to converge).
  static SetDescriptor intersection(std::vector<SetDescriptor> blocks, Vec feasible_point,
                                    double tol = 1e-12, long max_iter = 200000) {
    if (blocks.empty()) throw std::invalid_argument("SetDescriptor::intersection: no blocks");
    const Index dim = blocks.front().dim();
    for (const auto& b : blocks) {
      if (b.dim() != dim) {
        throw std::invalid_argument("SetDescriptor::intersection: block dimensions differ");
      }
    }
    require_dim(feasible_point, dim, "SetDescriptor::intersection");
    require_finite(feasible_point, "SetDescriptor::intersection");
    for (const auto& b : blocks) {
      if (!b.contains(feasible_point, 1e-9)) {
        throw std::invalid_argument(
            "SetDescriptor::intersection: feasible_point is not in every block");
      }
    }
    if (!(tol > 0.0) || !std::isfinite(tol)) {
      throw std::invalid_argument("SetDescriptor::intersection: tol must be > 0");
    }
    if (max_iter < 1) {
      throw std::invalid_argument("SetDescriptor::intersection: max_iter must be >= 1");
    }
    SetDescriptor s(Kind::Intersection, dim);
    s.factors_ = std::make_shared<std::vector<SetDescriptor>>(std::move(blocks));
    s.center_ = std::move(feasible_point);
    s.radius_ = tol;  // reuse scalar slot for the Dykstra sweep tolerance
    s.max_iter_ = max_iter;
    return s;
  }

  Kind kind() const { return kind_; }
  Index dim() const { return dim_; }
  double radius() const { return radius_; }
  double interval_upper() const { return radius_; }
  double dykstra_tol() const { return radius_; }
  long dykstra_max_iter() const { return max_iter_; }
  const Vec& center() const { return center_; }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  const std::vector<SetDescriptor>& factors() const { return *factors_; }

  /// Euclidean diameter (sup distance between two members); infinity for the orthant.
  double diameter() const {
    switch (kind_) {
      case Kind::Ball:
        return 2.0 * radius_;
      case Kind::Box:
        return (upper_ - lower_).norm();
      case Kind::Simplex:
        return dim_ > 1 ? std::sqrt(2.0) : 0.0;
      case Kind::IntervalBox:
        return radius_ * std::sqrt(static_cast<double>(dim_));
      case Kind::NonnegOrthant:
        return std::numeric_limits<double>::infinity();
      case Kind::Product: {
        double sq = 0.0;
        for (const auto& f : *factors_) {
          const double d = f.diameter();
          sq += d * d;
        }
        return std::sqrt(sq);
      }
      case Kind::Intersection: {
        // Valid upper bound: the intersection sits inside each block.
        double d = std::numeric_limits<double>::infinity();
        for (const auto& f : *factors_) d = std::min(d, f.diameter());
        return d;
      }
    }
    return 0.0;
  }

  /// Membership test with absolute tolerance.
  bool contains(const Vec& point, double tol = 1e-12) const {
    require_dim(point, dim_, "SetDescriptor::contains");
    switch (kind_) {
      case Kind::Ball:
        return (point - center_).norm() <= radius_ + tol;
      case Kind::Box:
        return (point.array() >= lower_.array() - tol).all() &&
               (point.array() <= upper_.array() + tol).all();
      case Kind::Simplex:
        return (point.array() >= -tol).all() && std::abs(point.sum() - 1.0) <= tol;
      case Kind::IntervalBox:
        return (point.array() >= -tol).all() && (point.array() <= radius_ + tol).all();
      case Kind::NonnegOrthant:
        return (point.array() >= -tol).all();
      case Kind::Product: {
        Index off = 0;
        for (const auto& f : *factors_) {
          if (!f.contains(point.segment(off, f.dim()), tol)) return false;
          off += f.dim();
        }
        return true;
      }
      case Kind::Intersection: {
        for (const auto& f : *factors_) {
          if (!f.contains(point, tol)) return false;
        }
        return true;
      }
    }
    return false;
  }

  /// A deterministic feasible point computed without the projection oracle:
  /// ball center, box midpoint, uniform simplex vertex barycenter, half-full
  /// interval box, the origin for the orthant.
  Vec interior_point() const {
    switch (kind_) {
      case Kind::Ball:
        return center_;
      case Kind::Box:
        return 0.5 * (lower_ + upper_);
      case Kind::Simplex:
        return Vec::Constant(dim_, 1.0 / static_cast<double>(dim_));
      case Kind::IntervalBox:
        return Vec::Constant(dim_, 0.5 * radius_);
      case Kind::NonnegOrthant:
        return Vec::Zero(dim_);
      case Kind::Product: {
        Vec out(dim_);
        Index off = 0;
        for (const auto& f : *factors_) {
          out.segment(off, f.dim()) = f.interior_point();
          off += f.dim();
        }
        return out;
      }
      case Kind::Intersection:
        return center_;  // the feasible point supplied at construction
    }
    return Vec::Zero(dim_);
  }

  /// Draws a uniform-ish feasible point (exact for boxes; standard direction x
  /// radius^(1/n) construction for balls; spacings construction for the simplex).
  Vec sample(Rng& rng) const {
    switch (kind_) {
      case Kind::Ball: {
        if (radius_ == 0.0 || dim_ == 0) return center_;
        Vec dir = rng.gaussian_vec(dim_);
        double n = dir.norm();
        while (n == 0.0) {
          dir = rng.gaussian_vec(dim_);
          n = dir.norm();
        }
        const double u = rng.uniform();
        const double r = radius_ * std::pow(u, 1.0 / static_cast<double>(dim_));
        return center_ + (r / n) * dir;
      }
      case Kind::Box: {
        Vec out(dim_);
        for (Index i = 0; i < dim_; ++i) out[i] = rng.uniform(lower_[i], upper_[i]);
        return out;
      }
      case Kind::Simplex: {
        // Exponential spacings: e_i / sum e_i is uniform on the simplex.
        Vec e(dim_);
        for (Index i = 0; i < dim_; ++i) {
          double u = rng.uniform();
          while (u <= 0.0) u = rng.uniform();
          e[i] = -std::log(u);
        }
        return e / e.sum();
      }
      case Kind::IntervalBox: {
        Vec out(dim_);
        for (Index i = 0; i < dim_; ++i) out[i] = rng.uniform(0.0, radius_);
        return out;
      }
      case Kind::NonnegOrthant: {
        Vec out(dim_);
        for (Index i = 0; i < dim_; ++i) out[i] = -std::log(std::max(rng.uniform(), 1e-300));
        return out;
      }
      case Kind::Product: {
        Vec out(dim_);
        Index off = 0;
        for (const auto& f : *factors_) {
          out.segment(off, f.dim()) = f.sample(rng);
          off += f.dim();
        }
        return out;
      }
      case Kind::Intersection: {
        // Rejection sampling from the first block; after too many misses fall
        // back to Dykstra-projecting the last draw (boundary-biased but total).
        Vec draw = (*factors_)[0].sample(rng);
        for (int attempt = 0; attempt < 200; ++attempt) {
          bool ok = true;
          for (size_t i = 1; i < factors_->size(); ++i) {
            if (!(*factors_)[i].contains(draw, 1e-12)) {
              ok = false;
              break;
            }
          }
          if (ok) return draw;
          draw = (*factors_)[0].sample(rng);
        }
        return project_intersection_reference(*factors_, draw, radius_, max_iter_);
      }
    }
    return Vec::Zero(dim_);
  }

 private:
  SetDescriptor(Kind kind, Index dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  Index dim_;
  double radius_ = 0.0;  // ball radius, interval-box upper bound, or Dykstra tol
  long max_iter_ = 0;    // Dykstra sweep cap (Intersection only)
  Vec center_, lower_, upper_;
  std::shared_ptr<const std::vector<SetDescriptor>> factors_;
};

/// In-place Euclidean projection; allocation-free for clamp/scaling variants
/// (the simplex needs a sort buffer, the product delegates per factor).
inline void project_in_place(const SetDescriptor& set, Eigen::Ref<Vec> point) {
  switch (set.kind()) {
    case SetDescriptor::Kind::Ball: {
      if (set.radius() == 0.0) {
        point = set.center();
        return;
      }
      const double dist = (point - set.center()).norm();
      if (dist > set.radius()) {
        point = set.center() + (set.radius() / dist) * (point - set.center());
      }
      return;
    }
    case SetDescriptor::Kind::Box:
      point = point.cwiseMax(set.lower()).cwiseMin(set.upper());
      return;
    case SetDescriptor::Kind::Simplex:
      point = project_simplex(set.dim(), point);
      return;
    case SetDescriptor::Kind::IntervalBox:
      point = point.cwiseMax(0.0).cwiseMin(set.interval_upper());
      return;
    case SetDescriptor::Kind::NonnegOrthant:
      point = point.cwiseMax(0.0);
      return;
    case SetDescriptor::Kind::Product: {
      Index off = 0;
      for (const auto& f : set.factors()) {
        project_in_place(f, point.segment(off, f.dim()));
        off += f.dim();
      }
      return;
    }
    case SetDescriptor::Kind::Intersection:
      point = project_intersection_reference(set.factors(), point, set.dykstra_tol(),
                                             set.dykstra_max_iter());
      return;
  }
}

/// Euclidean projection onto the set. Throws std::invalid_argument on
/// dimension mismatch or non-finite input.
inline Vec project(const SetDescriptor& set, const Vec& point) {
  require_dim(point, set.dim(), "project");
  require_finite(point, "project");
  Vec out = point;
  project_in_place(set, out);
  return out;
}

/// Dykstra's alternating projection onto an intersection of descriptors.
/// Terminates when the change of the iterate over one full sweep is <= tol.
/// This is a test/reference oracle (it also backs the Intersection descriptor
/// used by direct-solve cross-checks); the penalized reformulation exists so
/// production solves never need it. Throws ConvergenceError (carrying the
/// last iterate) if max_iter sweeps do not reach tol.
inline Vec project_intersection_reference(const std::vector<SetDescriptor>& sets,
                                          const Vec& point, double tol,
                                          long max_iter) {
  if (sets.empty()) {
    throw std::invalid_argument("project_intersection_reference: no sets");
  }
  for (const auto& s : sets) {
    require_dim(point, s.dim(), "project_intersection_reference");
  }
  require_finite(point, "project_intersection_reference");
  if (!(tol > 0.0)) {
    throw std::invalid_argument("project_intersection_reference: tol must be > 0");
  }
  if (max_iter < 1) {
    throw std::invalid_argument("project_intersection_reference: max_iter must be >= 1");
  }

  const size_t n_sets = sets.size();
  Vec x = point;
  std::vector<Vec> increments(n_sets, Vec::Zero(point.size()));
  for (long sweep = 0; sweep < max_iter; ++sweep) {
    const Vec x_prev = x;
    for (size_t i = 0; i < n_sets; ++i) {
      const Vec y = x + increments[i];
      x = project(sets[i], y);
      increments[i] = y - x;
    }
    if ((x - x_prev).norm() <= tol) return x;
  }
  throw ConvergenceError(
      "project_intersection_reference: no convergence within " +
          std::to_string(max_iter) + " sweeps",
      x);
}

}  // namespace prom3

#endif  // PROM3_SETS_HPP
