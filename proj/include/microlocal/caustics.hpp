#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "microlocal/singularity.hpp"
#include "microlocal/smooth_map.hpp"

namespace microlocal {

/// Background sound speed with closed-form first and second derivatives
/// (the variational flow needs them as plain arithmetic).
struct SoundSpeedModel {
  SmoothMap c0;    // R^3 -> R_+
  SmoothMap grad;  // R^3 -> R^3
  SmoothMap hess;  // R^3 -> R^9 (row-major)
  std::string name;

  static SoundSpeedModel constant(double c);
  /// Isotropic widths keep a point-source configuration rotationally
  /// symmetric, which degenerates the sagittal caustic sheet; anisotropic
  /// widths produce generic fold/cusp structure.
  static SoundSpeedModel gaussian_lens(double amplitude, const Eigen::Vector3d& center,
                                       const Eigen::Vector3d& sigma, double background = 1.0);
  static SoundSpeedModel gaussian_lens(double amplitude, const Eigen::Vector3d& center,
                                       double sigma, double background = 1.0);
};

/// Gnomonic launch chart around +e3.
Eigen::Vector3d launch_direction(double a, double b);

struct TraceOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double min_dt = 1e-9;
  bool adaptive = true;     // fixed-step mode raises StepFailure on bad error
  double domain_half = 2.5; // LeftDomain outside [-L, L]^3
  int jet_order = 1;        // order of the (a, b)-jets carried along the ray
};

struct RaySample {
  double t = 0.0;
  Eigen::Vector3d x, xi;
  Eigen::Matrix3d J;  // dx / d(a, b, t)
  double det_J = 0.0;
  double H = 0.0;
};

struct RayTrajectory {
  Eigen::Vector2d launch;
  std::vector<RaySample> samples;
  double h_drift = 0.0;  // max |H - H(0)|, relative to c^-2/2 at the source
};

/// Integrates the bicharacteristic flow (oriented so that constant speed
/// gives x = s + t p with xi = p / c0(s)) together with the launch-parameter
/// jets; `dt` is the maximum (adaptive) or exact (fixed) step.
RayTrajectory trace_ray(const SoundSpeedModel& model, const Eigen::Vector3d& source,
                        const Eigen::Vector2d& launch, double t_max, double dt,
                        const TraceOptions& opts = {});

/// The spatial map (a, b, t) -> x(t) as a smooth map with jet access
/// (integrates the flow, then expands in the time direction).
SmoothMap ray_spatial_map(const SoundSpeedModel& model, const Eigen::Vector3d& source,
                          const TraceOptions& opts = {});

struct CausticReport {
  Eigen::Vector2d launch;
  double t = 0.0;
  Eigen::Vector3d x;
  SingularityClass cls = SingularityClass::fold;
  std::array<double, 3> residuals{};  // det, d(det)(v), d2(det)(v, v)
  double rank2_sigma = 0.0;
  double h_drift = 0.0;
};

/// Ordered residual triple of the caustic conditions.
std::array<double, 3> caustic_condition_residuals(const CausticReport& report);

struct CausticScanConfig {
  Eigen::Vector3d source = Eigen::Vector3d::Zero();
  double a_lo = -0.35, a_hi = 0.35, b_lo = -0.35, b_hi = 0.35;
  int na = 40, nb = 40;
  double t_min = 0.05, t_max = 2.0;
  double sample_dt = 0.02;
  TraceOptions trace;
  ClassifyOptions classify;
};

/// Sign-change detection of det J along rays, root polishing, and
/// classification through the generic singularity machinery; cusp points on
/// the fold set are located by a joint solve of (det, d(det)(kernel)) = 0.
std::vector<CausticReport> caustic_scan(const SoundSpeedModel& model,
                                        const CausticScanConfig& config);

/// Default lens used by the demo (validated by the dense-scan oracle to
/// produce folds with cusp edges from the default source by t = 2).
SoundSpeedModel default_lens();

void write_caustics_csv(const std::vector<CausticReport>& reports, const std::string& path);
void write_ray_csv(const RayTrajectory& ray, const std::string& path);

}  // namespace microlocal
