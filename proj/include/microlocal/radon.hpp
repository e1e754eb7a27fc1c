#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "microlocal/errors.hpp"
#include "microlocal/rng.hpp"

namespace microlocal {

/// Scalar samples on a regular vertex-centered grid over a cube.
struct ScalarField3D {
  int n = 0;                  // points per axis (>= 16)
  double lo = -1.0, hi = 1.0; // cube [lo, hi]^3
  std::vector<double> data;   // index (i * n + j) * n + k

  ScalarField3D() = default;
  ScalarField3D(int n_, double lo_, double hi_)
      : n(n_), lo(lo_), hi(hi_), data(static_cast<size_t>(n_) * n_ * n_, 0.0) {
    if (n_ < 16) throw Error("ScalarField3D: need at least 16 points per axis");
  }

  double spacing() const { return (hi - lo) / (n - 1); }
  double& at(int i, int j, int k) { return data[(static_cast<size_t>(i) * n + j) * n + k]; }
  double at(int i, int j, int k) const { return data[(static_cast<size_t>(i) * n + j) * n + k]; }
  Eigen::Vector3d coord(int i, int j, int k) const {
    const double h = spacing();
    return {lo + i * h, lo + j * h, lo + k * h};
  }

  /// Trilinear interpolation with zero extension outside the grid.
  double interpolate(const Eigen::Vector3d& p) const;

  double dot(const ScalarField3D& o) const;
  double max_abs() const;
};

/// The averaging curve (t, t^2, t^4).
Eigen::Vector3d curve_point(double t);

/// Cutoff and quadrature of the curve average: chi is the standard bump
/// exp(1/((t/T)^2 - 1)) on (-T, T) scaled to unit integral, sampled on a
/// composite Simpson rule.
struct CurveAverageSpec {
  double T = 0.7;
  int nodes = 129;  // odd

  CurveAverageSpec() { normalize(); }
  CurveAverageSpec(double T_, int nodes_) : T(T_), nodes(nodes_) { normalize(); }

  double chi(double t) const;

  /// Simpson nodes with weights already multiplied by chi.
  const std::vector<double>& quadrature_nodes() const { return nodes_; }
  const std::vector<double>& quadrature_weights() const { return weights_; }

  /// Plain quadrature of a constant 1 over [-T, T] (Simpson exactness check).
  double quadrature_of_one() const;

 private:
  void normalize();
  double norm_ = 1.0;
  std::vector<double> nodes_, weights_;
};

ScalarField3D radon_apply(const ScalarField3D& f, const CurveAverageSpec& spec);
ScalarField3D radon_adjoint_apply(const ScalarField3D& g, const CurveAverageSpec& spec);

struct NormalImageOptions {
  double bump_width_cells = 2.0;
  double boundary_margin = 0.2;  // fraction of the box edge
};

/// R0* R0 applied to a unit-peak Gaussian bump at x0 (width in cells).
ScalarField3D normal_image(const Eigen::Vector3d& x0, const CurveAverageSpec& spec, int grid_n,
                           double box_half, const NormalImageOptions& opts = {});

/// Closed-form sample cloud of the predicted artifact surface.
struct ArtifactLocus {
  Eigen::Vector3d source;
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;  // unit; zero where the surface is singular
  std::vector<Eigen::Vector2d> params;   // (y1, z1)
};

/// Samples (y1, z1) within the given ranges, keeping points whose curve
/// parameters stay within `reach_fraction` of the cutoff support and whose
/// positions stay inside the box.
ArtifactLocus predicted_locus(const Eigen::Vector3d& x0, double y1_lo, double y1_hi, double z1_lo,
                              double z1_hi, int samples_per_axis, double box_half,
                              const CurveAverageSpec& spec, double reach_fraction = 0.8);

struct RidgeStats {
  double coverage = 0.0;
  double chance_span = 0.0;        // fraction of the probe window within k cells
  double median_offset_cells = 0.0;
  int used = 0, covered = 0;
};

/// For each locus sample outside the exclusion ball, probes the field along
/// the surface normal and reports whether the maximum of |field| lies
/// within k cells of the surface.
RidgeStats ridge_match(const ScalarField3D& field, const ArtifactLocus& locus,
                       const Eigen::Vector3d& x0, double exclusion_cells = 6.0,
                       double k_cells = 2.0, double probe_halfwidth_cells = 12.0);

ScalarField3D noise_field(int n, double box_half, uint64_t seed);

// --- exports ---------------------------------------------------------------

/// Raw little-endian float32 samples plus a JSON sidecar {dims, box}.
void write_field(const ScalarField3D& f, const std::string& path_base);

/// 8-bit PGM of the axis-normal mid slice; returns {min, max} used for the
/// linear normalization (recorded by the caller's sidecar).
std::pair<double, double> write_pgm_slice(const ScalarField3D& f, int axis, int index,
                                          const std::string& path);

void write_locus_csv(const ArtifactLocus& locus, const std::string& path);

}  // namespace microlocal
