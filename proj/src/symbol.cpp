#include "microlocal/symbol.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace microlocal {

CriticalBranch make_branch(const ReducedPhase& rp, SymbolBranch branch, std::vector<int> lambda) {
  CriticalBranch b;
  b.phase = rp.assembled_phase();
  b.branch = branch;
  if (lambda.empty()) {
    // (x, tau, theta2, theta3) on the diagonal, (x, y1, tau, theta3) on the
    // umbrella branch; variables are (x1 x2 x3 y1 y2 y3 theta2 theta3 tau).
    lambda = branch == SymbolBranch::diagonal ? std::vector<int>{0, 1, 2, 8, 6, 7}
                                              : std::vector<int>{0, 1, 2, 3, 8, 7};
  }
  b.lambda = std::move(lambda);
  return b;
}

SymbolValue symbol_factor(const CriticalBranch& branch, Eigen::Ref<const Eigen::VectorXd> pt,
                          const SymbolOptions& opts) {
  if (branch.lambda.size() != 6) throw Error("symbol_factor: lambda must pick 6 coordinates");
  Jet phi = branch.phase.jets(pt, 2)[0];
  Eigen::VectorXd grad = phi.gradient();
  Eigen::MatrixXd hess = phi.hessian();
  const double scale = std::max(1.0, grad.cwiseAbs().maxCoeff());
  for (int f = 6; f < 9; ++f)
    if (std::abs(grad[f]) > opts.tol_critical * scale)
      throw NotCritical("symbol_factor: fiber derivative " + std::to_string(f) +
                        " does not vanish at the point");

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(9, 9);
  for (int i = 0; i < 6; ++i) m(i, branch.lambda[i]) = 1.0;
  for (int f = 0; f < 3; ++f) m.row(6 + f) = hess.row(6 + f);

  // Scale-normalized singularity test; the returned factor uses the raw value.
  double hadamard = 1.0;
  for (int r = 6; r < 9; ++r) hadamard *= std::max(m.row(r).norm(), 1e-300);
  const double det = m.determinant();
  if (std::abs(det) < opts.tol_singular * hadamard)
    throw SingularJacobian("symbol_factor: coordinate Jacobian is singular (on the intersection)");

  SymbolValue out;
  out.jacobian = std::abs(det);
  out.E = 1.0 / out.jacobian;
  out.factor = std::sqrt(out.E);
  return out;
}

BlowupFit blowup_exponent(const CriticalBranch& branch,
                          const std::function<Eigen::VectorXd(double)>& path, double delta_lo,
                          double delta_hi, int samples, const SymbolOptions& opts) {
  if (samples < 12) samples = 12;
  BlowupFit fit;
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    const double delta = delta_lo * std::pow(delta_hi / delta_lo, t);
    SymbolValue sv = symbol_factor(branch, path(delta), opts);
    fit.deltas.push_back(delta);
    fit.factors.push_back(sv.factor);
  }
  fit.samples = samples;

  // least squares on log-log
  Eigen::VectorXd lx(samples), ly(samples);
  for (int i = 0; i < samples; ++i) {
    lx[i] = std::log(fit.deltas[i]);
    ly[i] = std::log(fit.factors[i]);
  }
  const double mx = lx.mean(), my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  fit.exponent = sxy / sxx;
  const Eigen::ArrayXd resid = ly.array() - my - fit.exponent * (lx.array() - mx);
  fit.stderr_exponent = std::sqrt(resid.square().sum() / (samples - 2) / sxx);
  return fit;
}

std::function<Eigen::VectorXd(double)> diagonal_approach_path(const ReducedPhase& rp,
                                                              const Eigen::Vector3d& x0) {
  SmoothMap P1 = rp.P1;
  return [P1, x0](double delta) {
    Eigen::VectorXd a(5);
    a << x0[0], x0[0], x0[1], x0[2], 1.0;
    const double p1 = P1.value(a)[0];
    Eigen::VectorXd v(9);
    // x = y, tau = 0, theta3 = 1; the distance measure on this branch is
    // (theta2 - P1)/theta3 + 3/2 tau^2/theta3^2 = delta.
    v << x0[0], x0[1], x0[2], x0[0], x0[1], x0[2], p1 + delta, 1.0, 0.0;
    return v;
  };
}

std::function<Eigen::VectorXd(double)> umbrella_approach_path(const ReducedPhase& rp,
                                                              const Eigen::Vector3d& x0,
                                                              double tau0) {
  ComposedCharts cc = reduced_phase_charts(rp);
  RelationChart chart = cc.umbrella.chart;
  return [chart, x0, tau0](double delta) {
    Eigen::VectorXd p(6);
    p << x0[0], x0[1], x0[2], x0[0] - delta, 1.0, tau0;  // (x, y1, theta3, tau)
    Eigen::VectorXd v = chart.map.value(p);
    Eigen::VectorXd pt(9);
    pt << v[0], v[1], v[2], v[6], v[7], v[8], v[4], v[5], tau0;
    return pt;
  };
}

}  // namespace microlocal
