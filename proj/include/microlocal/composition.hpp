#pragma once

#include <map>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "microlocal/phase_geometry.hpp"
#include "microlocal/symplectic.hpp"

namespace microlocal {

enum class CompositionBranch { diagonal, umbrella, intersection };

std::string to_string(CompositionBranch b);

/// One solved point of the composition A^t o B: (x, xi; z, zeta) on A^t and
/// (z, zeta; y, eta) on B.
struct CompositionPoint {
  RelationPoint xy;    // (x, xi; y, eta)
  CotangentPoint mid;  // (z, zeta)
  CompositionBranch branch = CompositionBranch::diagonal;
  double residual = 0.0;        // matching residual (scaled infinity norm)
  double factor_diag = 0.0;     // scaled |x1 - y1|
  double factor_umbrella = 0.0; // scaled bracket factor
  Eigen::VectorXd params_a, params_b;
};

struct UmbrellaChart {
  RelationChart chart;
  std::string provenance;  // model_zform | model_tauform | reduced_phase
  Eigen::VectorXd singular_seed;

  LagrangianInclusion as_lagrangian() const;
};

/// Endpoint data of the stationary-phase reduction: P1, P2, N are smooth
/// functions of (x1, y1, y2, y3, theta3); the assembled phase lives on
/// (x, y, theta2, theta3, tau).
struct ReducedPhase {
  SmoothMap P1, P2, N;

  static ReducedPhase model_instance();  // P1 = P2 = 0, N = 1

  SmoothMap assembled_phase() const;  // 9 variables -> R

  /// min |N| over a sampled box in (x1, y1, y2, y3, theta3).
  double min_abs_N(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int samples,
                   uint64_t seed = 7) const;

  /// max | d_tau phi - (x1-y1) * factor | over samples: the normal-crossing
  /// factorization of the tau derivative.
  double factorization_residual(int samples, uint64_t seed = 8) const;
};

struct ComposedCharts {
  RelationChart diagonal;  // params (x, tau, theta2, theta3)
  UmbrellaChart umbrella;  // params (x, y1, theta3, tau)
};

struct ComposeOptions {
  double tol = 1e-10;
  double branch_tol = 1e-6;
};

/// Newton solve of the matching equations (left point of B = left point of
/// A, both at the intermediate (z, zeta)); both factor charts are used as
/// produced, chart A entering transposed. When both charts are the model
/// relation the intermediate variable is eliminated in closed form.
CompositionPoint compose_solve(const RelationChart& chartA, const RelationChart& chartB,
                               Eigen::Ref<const Eigen::VectorXd> seed,
                               const ComposeOptions& opts = {});

/// The composed non-diagonal branch in its two parametrizations:
/// zform over (x, y1, z1, theta3), tauform over (x, y1, theta3, tau).
UmbrellaChart model_umbrella_chart(const std::string& form);

/// Diagonal chart of the model composition, params (x, tau, theta2, theta3).
RelationChart model_diagonal_chart();

ComposedCharts reduced_phase_charts(const ReducedPhase& rp);

/// Scaled distance of a relation point to the diagonal.
double diagonal_distance(const RelationPoint& p);

/// Scaled residual of membership in the composed umbrella branch of `rp`
/// (tau and theta3 recovered from the point).
double umbrella_membership_residual(const RelationPoint& p, const ReducedPhase& rp);

/// min(diagonal distance, umbrella membership) -- distance to the union.
double composition_set_distance(const RelationPoint& p, const ReducedPhase& rp);

struct IntersectionReport {
  bool found = false;
  int codim_diagonal = 0;
  int codim_umbrella = 0;
  double cross_residual = 0.0;  // membership of each chart's root in the other
};

/// Locates diagonal/umbrella intersection points on both charts and
/// returns the codimension of the intersection in each (rank of the
/// defining residual's gradient restricted to the chart).
IntersectionReport intersection_codim_check(const RelationChart& diag, const UmbrellaChart& umb,
                                            const ReducedPhase& rp);

}  // namespace microlocal
