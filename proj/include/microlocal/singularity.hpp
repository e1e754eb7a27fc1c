#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "microlocal/phase_geometry.hpp"
#include "microlocal/symplectic.hpp"

namespace microlocal {

enum class SingularityClass { graph, fold, cusp, degenerate };

std::string to_string(SingularityClass c);

struct ClassifyOptions {
  double tol_det = 1e-8;    // |det| <= tol_det * max|entry| counts as singular
  double tol_dir = 1e-6;    // floor for scaled directional derivatives
  double tol_corank = 1e-7; // sigma ratio below which another direction is dead
};

struct SingularityReport {
  Side side = Side::left;
  Eigen::VectorXd point;
  double det = 0.0;
  Eigen::VectorXd grad_det;
  Eigen::VectorXd kernel;  // unit kernel of d(pi) when singular
  SingularityClass cls = SingularityClass::graph;
  std::map<std::string, double> residuals;
};

struct SamplePlan {
  Eigen::VectorXd box_lo, box_hi;  // empty = chart default box
  int sigma1_seeds = 48;
  int sigma11_seeds = 16;
  uint64_t rng_seed = 77;
  ClassifyOptions classify;
};

struct FlatCuspCertificate {
  std::string chart;
  std::vector<Eigen::VectorXd> cusp_points;  // parameter-space roots
  bool cusps_found = false;
  bool at_most_cusps = true;     // (i) every singular sample folds or cusps
  bool cusp_sets_equal = false;  // (ii)
  bool coisotropic = false;      // (iii) first clause
  bool nonradial = false;        // (iii) second clause
  double residual_cusp_pair = 0.0;   // max right-side defining-pair residual at left roots
  double max_root_distance = 0.0;    // left vs right sigma11 roots
  double max_coisotropy_residual = 0.0;
  double min_nonradial_gap = 0.0;
  std::string notes;

  bool verdict_i() const { return at_most_cusps && cusps_found; }
  bool verdict_ii() const { return cusp_sets_equal; }
  bool verdict_iii() const { return coisotropic && nonradial; }
  bool verdict() const { return verdict_i() && verdict_ii() && verdict_iii(); }
};

/// Differential of pi_side composed with the chart, and its determinant.
std::pair<Eigen::MatrixXd, double> projection_jacobian(const RelationChart& chart, Side side,
                                                       Eigen::Ref<const Eigen::VectorXd> p);

/// Whitney classification of a square map at a point (graph / fold / cusp /
/// degenerate) from order-3 jets.
SingularityReport classify_map(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> p,
                               const ClassifyOptions& opts = {});

/// Same classification from precomputed order-3 component jets of the map.
SingularityReport classify_jets(const std::vector<Jet>& comps,
                                Eigen::Ref<const Eigen::VectorXd> p,
                                const ClassifyOptions& opts = {});

SingularityReport classify_point(const RelationChart& chart, Side side,
                                 Eigen::Ref<const Eigen::VectorXd> p,
                                 const ClassifyOptions& opts = {});

/// Newton root of det d(pi_side) = 0, varying the given parameter indices
/// (all parameters when empty).
Eigen::VectorXd sigma1_solve(const RelationChart& chart, Side side,
                             Eigen::Ref<const Eigen::VectorXd> seed,
                             const std::vector<int>& free_indices = {},
                             const NewtonOptions& opts = {});

/// Newton root of the cusp system (det, d(det)(kernel)) = 0 in two unknowns
/// (auto-selected when empty). Returns the root; the report at the root must
/// classify as cusp, otherwise NotACusp is thrown.
Eigen::VectorXd sigma11_solve(const RelationChart& chart, Side side,
                              Eigen::Ref<const Eigen::VectorXd> seed,
                              std::vector<int> unknowns = {}, const NewtonOptions& opts = {});

std::vector<CotangentPoint> image_of_cusp_set(const RelationChart& chart, Side side,
                                              const std::vector<Eigen::VectorXd>& samples);

FlatCuspCertificate flat_two_sided_cusp_check(const RelationChart& chart,
                                              const SamplePlan& plan = {});

}  // namespace microlocal
