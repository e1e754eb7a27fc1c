#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "microlocal/jet.hpp"

namespace microlocal {

/// A smooth map R^in -> R^out given by an evaluation callback over jets.
/// The callback must be pure arithmetic on its inputs so it works both on
/// seeded variables and on jets coming from an enclosing computation.
class SmoothMap {
 public:
  using EvalFn = std::function<std::vector<Jet>(std::span<const Jet>)>;

  SmoothMap() = default;
  SmoothMap(int in, int out, EvalFn fn, std::string label = {});

  int in() const { return in_; }
  int out() const { return out_; }
  const std::string& label() const { return label_; }

  /// All partials of every component at x, up to `order`.
  std::vector<Jet> jets(Eigen::Ref<const Eigen::VectorXd> x, int order) const;

  /// Evaluation on caller-supplied jets (composition).
  std::vector<Jet> operator()(std::span<const Jet> in) const;

  Eigen::VectorXd value(Eigen::Ref<const Eigen::VectorXd> x) const;
  Eigen::MatrixXd jacobian(Eigen::Ref<const Eigen::VectorXd> x) const;

  /// Scalar-valued convenience (requires out == 1).
  Jet scalar(std::span<const Jet> in) const;

 private:
  int in_ = 0, out_ = 0;
  EvalFn fn_;
  std::string label_;
};

/// Spec operation: component i of the result holds all partials of f_i at x.
std::vector<Jet> jet_of_map(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> x, int order);

/// Central finite-difference weights on the stencil {-w..w}*h for the k-th
/// derivative (Fornberg). `accuracy` is the order of the truncation error.
std::vector<double> central_fd_weights(int k, int accuracy);

/// Mixed partial d^|alpha| f_i / dx^alpha by tensored central differences.
/// h per variable; h <= 0 selects a per-order default step.
Eigen::VectorXd fd_partial(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> x,
                           const MultiIndex& alpha, double h = 0.0);

/// Finite-difference jets of f at x: same layout as jets(), derivatives
/// filled from central differences. Independent of the jet arithmetic path.
std::vector<Jet> fd_jets(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> x, int order,
                         double h = 0.0);

/// Max over components and multi-indices up to `order` of
/// |jet - finite difference| / (1 + |jet|).
double finite_diff_check(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> x, int order,
                         double h = 0.0);

/// Solves F(u, t) = 0 for t near t0 with dF/dt != 0, returning the jet of
/// the implicit t(u) in the algebra of the inputs u.
Jet jet_implicit_solve(const std::function<Jet(std::span<const Jet>, const Jet&)>& F,
                       std::span<const Jet> u, double t0);

/// dF/d(slot) evaluated on foreign-algebra inputs, via a one-variable
/// extension of the algebra. Requires order <= 3 on the inputs (the
/// extension costs one order and jets cap at 4).
std::vector<Jet> jet_partials_extended(const SmoothMap& F, std::span<const Jet> in, int slot);

}  // namespace microlocal
