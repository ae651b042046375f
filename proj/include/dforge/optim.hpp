#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dforge/linalg.hpp"

namespace dforge {

// f(x, grad): returns f(x) and, when grad != nullptr, writes the gradient.
// Non-finite values are treated as +inf (step rejected).
using SmoothFn = std::function<double(const Vec&, Vec*)>;
using Projector = std::function<Vec(const Vec&)>;

struct FistaOptions {
  int max_iter = 20000;
  double ftol = 1e-15;      // relative objective stall
  double xtol = 1e-13;      // relative step
  double gtol = 1e-12;      // gradient-mapping norm (relative to max(1, |g0|))
  double l0 = 1.0;          // initial Lipschitz estimate
  int stall_window = 5;
};

struct FistaResult {
  Vec x;
  double f = 0.0;
  Vec grad;
  int iterations = 0;
  bool converged = false;
  double stationarity = 0.0;  // gradient-mapping norm at the last step
};

// Accelerated projected gradient with backtracking and adaptive restart.
FistaResult fista_minimize(const SmoothFn& f, const Projector& proj, const Vec& x0,
                           const FistaOptions& opt = {});

// Projected gradient steps driven by gradients only (no objective
// comparisons), so the gradient mapping can be pushed below the level where
// objective differences drown in rounding. Step length adapts to local
// gradient-Lipschitz estimates. Returns the final iterate, value, gradient.
FistaResult gradient_polish(const SmoothFn& f, const Projector& proj, const Vec& x0,
                            int max_iter = 2000, double gtol = 1e-15);

struct DykstraOptions {
  int max_cycles = 20000;
  double tol = 1e-13;
};

// Dykstra's alternating projection onto an intersection of convex sets.
// Returns the (approximate) Euclidean projection of x onto the intersection.
Vec dykstra(const std::vector<Projector>& projs, const Vec& x, const DykstraOptions& opt = {},
            double* residual = nullptr);

// Returns true when x is feasible; otherwise writes a normal a with
// a'(y - x) <= 0 for every feasible y.
using CutFn = std::function<bool(const Vec&, Vec*)>;

struct EllipsoidOptions {
  int max_iter = 0;       // 0: 400 + 200 n^2
  double rel_tol = 1e-12; // on best - lower, relative to max(1, |best|)
};

struct EllipsoidResult {
  Vec x;
  double f = 0.0;
  double lower = -INFINITY;  // certified lower bound on the minimum
  int iterations = 0;
  bool converged = false;
};

// Central-cut ellipsoid method for a convex, possibly non-smooth f with
// subgradients over a feasible set contained in the ball (center, radius).
// `proj` maps infeasible centres to feasible candidates; `start` (feasible)
// seeds the incumbent.
EllipsoidResult ellipsoid_minimize(const SmoothFn& f, const CutFn& cut, const Projector& proj,
                                   const Vec& center, double radius, const Vec& start,
                                   const EllipsoidOptions& opt = {});

}  // namespace dforge
