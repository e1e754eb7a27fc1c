#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "microlocal/newton.hpp"
#include "microlocal/smooth_map.hpp"
#include "microlocal/symplectic.hpp"

namespace microlocal {

struct CotangentPoint {
  Eigen::VectorXd base;
  Eigen::VectorXd covector;
};

/// A point of a canonical relation in T*X x T*Y, twist convention
/// (x, xi; y, eta)' = (x, xi; y, -eta) already applied: both covectors are
/// stored untwisted and the product symplectic form carries the sign.
struct RelationPoint {
  CotangentPoint left;   // (x, xi)
  CotangentPoint right;  // (y, eta)

  Eigen::VectorXd packed() const;
  static RelationPoint unpack(Eigen::Ref<const Eigen::VectorXd> v, int nx, int ny);
};

enum class Side { left, right };

enum class ThetaSlice { fixed_last, unit_sphere };

/// Phase function phi(x, y, theta), positively homogeneous of degree one
/// in theta for the built-in families.
struct PhaseFunction {
  int nx = 3, ny = 3, ntheta = 2;
  SmoothMap phi;  // (x, y, theta) -> R
  double homogeneity = 1.0;

  int vars() const { return nx + ny + ntheta; }
};

/// Parametrized canonical relation with jet access.
struct RelationChart {
  int nx = 3, ny = 3;
  SmoothMap map;  // params -> (x, xi, y, eta)
  std::string name;
  ThetaSlice slice = ThetaSlice::fixed_last;

  // Default sampling region in parameters (used by certificates and scans).
  Eigen::VectorXd box_lo, box_hi;

  // Optional defining pairs of the cusp-set images, as functions on T*X
  // (resp. T*Y); registered for families where the pair is known in closed
  // form, otherwise built from sampled tangent data.
  std::vector<SmoothMap> cusp_image_left, cusp_image_right;

  int dim() const { return map.in(); }
  RelationPoint at(Eigen::Ref<const Eigen::VectorXd> p) const;

  /// params -> (base, covector) of one side, as a smooth map.
  SmoothMap projection(Side side) const;
};

/// View of a relation chart as a map into the twisted product symplectic
/// space (its image is Lagrangian there).
LagrangianInclusion as_inclusion(const RelationChart& chart);

/// Chart composed with the affine reparametrization p -> A p + b.
RelationChart reparametrized(const RelationChart& chart, const Eigen::MatrixXd& A,
                             const Eigen::VectorXd& b);

/// Weak-normal-form phase family: S2, S3, S4 are functions of
/// (x1, x2, x3, y1, theta2, theta3); defaults f = 0, g = x1.
struct WeakNormalFormPhase {
  SmoothMap S2, S3, S4;
  std::optional<SmoothMap> f, g;

  PhaseFunction assemble() const;

  /// Explicit chart over (x, y1, theta2, theta3).
  RelationChart chart() const;

  /// Samples the box and returns the worst margin of the conditions
  /// d(S2)/dx2 != 0, S3 != 0, S4 != 0 (minimum absolute value seen).
  double validate(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int samples,
                  uint64_t seed = 2024) const;
};

struct CurveParams {
  // gamma_i(t) = sum_k coeffs[i][k] t^k; rows = ambient dimension (3 or 4).
  std::vector<std::vector<double>> coeffs;
  double t_lo = -1.0, t_hi = 1.0;
};

struct ChartParams {
  std::optional<CurveParams> curve;
  std::string wnf_variant = "model";  // "model" (= C0) or "unit" (S3 = S4 = 1)
};

using BuiltinObject = std::variant<RelationChart, LagrangianInclusion>;

/// Built-in families: model_c0, menn_c1, curve_r4, curve_r3,
/// weak_normal_form (relation charts); model_umbrella_U, model_lambda1
/// (Lagrangian inclusions).
BuiltinObject builtin_chart(const std::string& name, const ChartParams& params = {});

/// As builtin_chart but requires a relation chart.
RelationChart builtin_relation(const std::string& name, const ChartParams& params = {});

/// Newton solve of d_theta phi = 0 in the chosen unknowns (indices into the
/// concatenated (x, y, theta) vector). Other coordinates stay fixed.
Eigen::VectorXd critical_point_solve(const PhaseFunction& phi,
                                     Eigen::Ref<const Eigen::VectorXd> seed,
                                     const std::vector<int>& unknowns,
                                     const NewtonOptions& opts = {});

/// left = (x, d_x phi), right = (y, -d_y phi) at a stationary point.
RelationPoint relation_point_from_phase(const PhaseFunction& phi,
                                        Eigen::Ref<const Eigen::VectorXd> crit,
                                        double tol = 1e-8);

/// Minimum of |det[gamma', gamma'', gamma''', gamma'''']| over a sampled
/// t-range (>= 200 samples).
double curve_nondegeneracy_check(const SmoothMap& gamma, double t_lo, double t_hi,
                                 int samples = 256);

/// Isotropy defect of the chart against the twisted product form at p;
/// the canonical-relation certificate drives this below 1e-9.
double canonical_relation_defect(const RelationChart& chart, Eigen::Ref<const Eigen::VectorXd> p);

}  // namespace microlocal
