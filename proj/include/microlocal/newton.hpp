#pragma once

#include <functional>

#include <Eigen/Core>

#include "microlocal/errors.hpp"

namespace microlocal {

struct NewtonOptions {
  double tol = 1e-10;      // infinity-norm residual target
  int max_iter = 50;
  int max_backtracks = 30;
  double min_step = 1e-15;
};

struct NewtonResult {
  Eigen::VectorXd x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Damped Newton for a square system; throws DegenerateJacobian when the
/// Jacobian is numerically singular at an iterate.
NewtonResult newton_solve(const ResidualFn& F, const JacobianFn& J, Eigen::VectorXd x0,
                          const NewtonOptions& opts = {});

/// Gauss-Newton with minimum-norm steps for systems with more unknowns than
/// equations (converges to a nearby point of the solution manifold).
NewtonResult gauss_newton_min_norm(const ResidualFn& F, const JacobianFn& J, Eigen::VectorXd x0,
                                   const NewtonOptions& opts = {});

}  // namespace microlocal
