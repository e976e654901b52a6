// prom3: first-order solver library for max-min-max robust optimization.
// Shared aliases, error types and oracle-call accounting.
// SPDX-License-Identifier: MIT
#ifndef PROM3_COMMON_HPP
#define PROM3_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace prom3 {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Configuration problems detected before any compute (missing bounds, bad flags).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A solver iterate became non-finite; carries the iteration at which it happened.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, long long iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  long long iteration() const { return iteration_; }

 private:
  long long iteration_;
};

/// An iterative routine exhausted its budget before reaching tolerance;
/// carries the last iterate so callers can inspect or reuse it.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Vec last_iterate)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)) {}
  const Vec& last_iterate() const { return last_iterate_; }

 private:
  Vec last_iterate_;
};

/// Cumulative oracle-call counters. Only subgradient/supergradient calls and
/// projection requests are counted; plain function-value evaluations are free.
/// A projection routed through a custom projector (e.g. a Dykstra oracle)
/// counts as one projection request. Exact pessimization hooks are tracked
/// separately and perform no counted oracle calls.
struct Counters {
  long long f0 = 0;    ///< subgradient calls to the objective
  long long gx = 0;    ///< x-subgradient calls to constraint functions
  long long gz = 0;    ///< z-supergradient calls to constraint functions
  long long h = 0;     ///< subgradient calls to cut functions (one per cut)
  long long proj = 0;  ///< projection requests (any set)
  long long exact_pessimize = 0;  ///< closed-form pessimizer invocations (not in CSV)

  Counters& operator+=(const Counters& o) {
    f0 += o.f0;
    gx += o.gx;
    gz += o.gz;
    h += o.h;
    proj += o.proj;
    exact_pessimize += o.exact_pessimize;
    return *this;
  }
  long long total() const { return f0 + gx + gz + h + proj; }
};

inline bool operator==(const Counters& a, const Counters& b) {
  return a.f0 == b.f0 && a.gx == b.gx && a.gz == b.gz && a.h == b.h && a.proj == b.proj;
}

/// Throws std::invalid_argument if v contains NaN or infinity.
inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite input");
  }
}

inline void require_dim(const Vec& v, Index dim, const char* what) {
  if (v.size() != dim) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(v.size()) + ", expected " +
                                std::to_string(dim) + ")");
  }
}

}  // namespace prom3

#endif  // PROM3_COMMON_HPP
