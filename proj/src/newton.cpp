#include "microlocal/newton.hpp"

#include <Eigen/Dense>

namespace microlocal {

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

NewtonResult iterate(const ResidualFn& F, const JacobianFn& J, Eigen::VectorXd x,
                     const NewtonOptions& opts, bool min_norm) {
  NewtonResult res;
  Eigen::VectorXd r = F(x);
  double rn = inf_norm(r);
  for (int it = 0; it < opts.max_iter; ++it) {
    if (rn <= opts.tol) {
      res.x = x;
      res.residual = rn;
      res.iterations = it;
      res.converged = true;
      return res;
    }
    Eigen::MatrixXd jac = J(x);
    Eigen::VectorXd step;
    if (min_norm) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
      svd.setThreshold(1e-13);
      step = -svd.solve(r);
    } else {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
      lu.setThreshold(1e-13);
      if (!lu.isInvertible())
        throw DegenerateJacobian("newton: singular Jacobian at iterate");
      step = -lu.solve(r);
    }
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      Eigen::VectorXd xn = x + lambda * step;
      Eigen::VectorXd rn_vec = F(xn);
      double rnn = inf_norm(rn_vec);
      if (rnn < rn || rnn <= opts.tol) {
        x = xn;
        r = rn_vec;
        rn = rnn;
        accepted = true;
        break;
      }
      lambda *= 0.5;
      if (lambda * inf_norm(step) < opts.min_step) break;
    }
    if (!accepted) break;
  }
  if (rn <= opts.tol) {
    res.converged = true;
  }
  res.x = x;
  res.residual = rn;
  res.iterations = opts.max_iter;
  return res;
}

}  // namespace

NewtonResult newton_solve(const ResidualFn& F, const JacobianFn& J, Eigen::VectorXd x0,
                          const NewtonOptions& opts) {
  return iterate(F, J, std::move(x0), opts, false);
}

NewtonResult gauss_newton_min_norm(const ResidualFn& F, const JacobianFn& J, Eigen::VectorXd x0,
                                   const NewtonOptions& opts) {
  return iterate(F, J, std::move(x0), opts, true);
}

}  // namespace microlocal
