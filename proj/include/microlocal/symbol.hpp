#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "microlocal/composition.hpp"
#include "microlocal/smooth_map.hpp"

namespace microlocal {

enum class SymbolBranch { diagonal, umbrella };

/// One branch of the degenerate-phase critical set with a choice of local
/// coordinates lambda (indices into the phase variables (x, y, theta2,
/// theta3, tau)); the fiber variables are the last three.
struct CriticalBranch {
  SmoothMap phase;  // 9 variables -> R
  SymbolBranch branch = SymbolBranch::diagonal;
  std::vector<int> lambda;  // 6 coordinate indices
};

CriticalBranch make_branch(const ReducedPhase& rp, SymbolBranch branch,
                           std::vector<int> lambda = {});

struct SymbolValue {
  double jacobian = 0.0;  // |det D(lambda, d_fiber phi) / D(vars)|
  double E = 0.0;         // 1 / jacobian
  double factor = 0.0;    // sqrt(E)
};

struct SymbolOptions {
  double tol_critical = 1e-9;   // max |d_fiber phi| (scaled) on the critical set
  double tol_singular = 1e-10;  // scaled determinant below this -> SingularJacobian
};

/// Hoermander's principal-symbol factor E^(1/2) at a critical point.
SymbolValue symbol_factor(const CriticalBranch& branch, Eigen::Ref<const Eigen::VectorXd> pt,
                          const SymbolOptions& opts = {});

struct BlowupFit {
  double exponent = 0.0;
  double stderr_exponent = 0.0;
  int samples = 0;
  std::vector<double> deltas, factors;
};

/// Least-squares slope of log(factor) against log(delta) along a
/// one-parameter family of critical points approaching the intersection.
BlowupFit blowup_exponent(const CriticalBranch& branch,
                          const std::function<Eigen::VectorXd(double)>& path,
                          double delta_lo = 1e-4, double delta_hi = 1e-1, int samples = 12,
                          const SymbolOptions& opts = {});

/// Standard approach paths for the two branches of a reduced phase:
/// diagonal, theta2 -> P1 with tau = 0; umbrella, x1 - y1 -> 0 at fixed tau.
std::function<Eigen::VectorXd(double)> diagonal_approach_path(const ReducedPhase& rp,
                                                              const Eigen::Vector3d& x0);
std::function<Eigen::VectorXd(double)> umbrella_approach_path(const ReducedPhase& rp,
                                                              const Eigen::Vector3d& x0,
                                                              double tau0 = 0.8);

}  // namespace microlocal
