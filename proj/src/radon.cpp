#include "microlocal/radon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <Eigen/Dense>

#include "microlocal/jet.hpp"

namespace microlocal {

double ScalarField3D::interpolate(const Eigen::Vector3d& p) const {
  const double h = spacing();
  const double u = (p[0] - lo) / h, v = (p[1] - lo) / h, w = (p[2] - lo) / h;
  const int i0 = static_cast<int>(std::floor(u));
  const int j0 = static_cast<int>(std::floor(v));
  const int k0 = static_cast<int>(std::floor(w));
  const double fu = u - i0, fv = v - j0, fw = w - k0;
  double acc = 0.0;
  for (int di = 0; di < 2; ++di) {
    const int i = i0 + di;
    if (i < 0 || i >= n) continue;
    const double wi = di ? fu : 1.0 - fu;
    for (int dj = 0; dj < 2; ++dj) {
      const int j = j0 + dj;
      if (j < 0 || j >= n) continue;
      const double wj = dj ? fv : 1.0 - fv;
      for (int dk = 0; dk < 2; ++dk) {
        const int k = k0 + dk;
        if (k < 0 || k >= n) continue;
        const double wk = dk ? fw : 1.0 - fw;
        acc += wi * wj * wk * at(i, j, k);
      }
    }
  }
  return acc;
}

double ScalarField3D::dot(const ScalarField3D& o) const {
  double acc = 0.0;
  for (size_t i = 0; i < data.size(); ++i) acc += data[i] * o.data[i];
  return acc;
}

double ScalarField3D::max_abs() const {
  double m = 0.0;
  for (double v : data) m = std::max(m, std::abs(v));
  return m;
}

Eigen::Vector3d curve_point(double t) { return {t, t * t, t * t * t * t}; }

double CurveAverageSpec::chi(double t) const {
  const double u = t / T;
  if (std::abs(u) >= 1.0) return 0.0;
  return std::exp(1.0 / (u * u - 1.0)) / norm_;
}

void CurveAverageSpec::normalize() {
  if (nodes % 2 == 0 || nodes < 3) throw Error("CurveAverageSpec: Simpson needs an odd node count");
  // unit integral, computed once on a fine Simpson rule
  norm_ = 1.0;
  const int fine = 4097;
  const double h = 2.0 * T / (fine - 1);
  double z = 0.0;
  for (int i = 0; i < fine; ++i) {
    const double w = (i == 0 || i == fine - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    z += w * chi(-T + i * h);
  }
  norm_ = z * h / 3.0;

  nodes_.clear();
  weights_.clear();
  const double hq = 2.0 * T / (nodes - 1);
  for (int i = 0; i < nodes; ++i) {
    const double w = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double t = -T + i * hq;
    nodes_.push_back(t);
    weights_.push_back(w * hq / 3.0 * chi(t));
  }
}

double CurveAverageSpec::quadrature_of_one() const {
  const double hq = 2.0 * T / (nodes - 1);
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i)
    acc += ((i == 0 || i == nodes - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0)) * hq / 3.0;
  return acc;
}

namespace {

ScalarField3D curve_average(const ScalarField3D& f, const CurveAverageSpec& spec, double sign) {
  ScalarField3D out(f.n, f.lo, f.hi);
  const auto& ts = spec.quadrature_nodes();
  const auto& ws = spec.quadrature_weights();
  for (int i = 0; i < f.n; ++i)
    for (int j = 0; j < f.n; ++j)
      for (int k = 0; k < f.n; ++k) {
        const Eigen::Vector3d x = f.coord(i, j, k);
        double acc = 0.0;
        for (size_t q = 0; q < ts.size(); ++q) {
          if (ws[q] == 0.0) continue;
          acc += ws[q] * f.interpolate(x - sign * curve_point(ts[q]));
        }
        out.at(i, j, k) = acc;
      }
  return out;
}

}  // namespace

ScalarField3D radon_apply(const ScalarField3D& f, const CurveAverageSpec& spec) {
  return curve_average(f, spec, +1.0);
}

ScalarField3D radon_adjoint_apply(const ScalarField3D& g, const CurveAverageSpec& spec) {
  return curve_average(g, spec, -1.0);
}

ScalarField3D normal_image(const Eigen::Vector3d& x0, const CurveAverageSpec& spec, int grid_n,
                           double box_half, const NormalImageOptions& opts) {
  const double margin = opts.boundary_margin * 2.0 * box_half;
  for (int a = 0; a < 3; ++a)
    if (x0[a] < -box_half + margin || x0[a] > box_half - margin)
      throw SourceTooCloseToBoundary("normal_image: source closer than the margin to the box");
  ScalarField3D bump(grid_n, -box_half, box_half);
  const double sigma = opts.bump_width_cells * bump.spacing() / 2.0;
  for (int i = 0; i < grid_n; ++i)
    for (int j = 0; j < grid_n; ++j)
      for (int k = 0; k < grid_n; ++k) {
        const double r2 = (bump.coord(i, j, k) - x0).squaredNorm();
        bump.at(i, j, k) = std::exp(-r2 / (2.0 * sigma * sigma));
      }
  return radon_adjoint_apply(radon_apply(bump, spec), spec);
}

ArtifactLocus predicted_locus(const Eigen::Vector3d& x0, double y1_lo, double y1_hi, double z1_lo,
                              double z1_hi, int samples_per_axis, double box_half,
                              const CurveAverageSpec& spec, double reach_fraction) {
  ArtifactLocus locus;
  locus.source = x0;
  const double reach = reach_fraction * spec.T;
  TablePtr tab = IndexTable::get(2, 1);
  const int steps = std::max(samples_per_axis - 1, 1);
  for (int a = 0; a < samples_per_axis; ++a) {
    for (int b = 0; b < samples_per_axis; ++b) {
      const double y1 = y1_lo + (y1_hi - y1_lo) * a / steps;
      const double z1 = z1_lo + (z1_hi - z1_lo) * b / steps;
      if (std::abs(z1 - x0[0]) > reach || std::abs(z1 - y1) > reach) continue;
      // y(y1, z1) in jets: tangents give the surface normal for free.
      Jet jy1 = Jet::variable(tab, 0, y1);
      Jet jz1 = Jet::variable(tab, 1, z1);
      Jet d = jy1 - x0[0];
      Jet w = 2.0 * jz1 - x0[0] - jy1;
      Jet zx = jz1 - x0[0];
      Jet zy = jz1 - jy1;
      Jet y2 = x0[1] + d * w;
      Jet y3 = x0[2] + d * w * (zx * zx + zy * zy);
      const Eigen::Vector3d y(jy1.value(), y2.value(), y3.value());
      if (y.cwiseAbs().maxCoeff() > box_half) continue;
      Eigen::Vector3d t1(1.0, y2.gradient()[0], y3.gradient()[0]);
      Eigen::Vector3d t2(0.0, y2.gradient()[1], y3.gradient()[1]);
      Eigen::Vector3d nrm = t1.cross(t2);
      locus.points.push_back(y);
      locus.normals.push_back(nrm.norm() > 1e-10 ? nrm.normalized() : Eigen::Vector3d::Zero());
      locus.params.emplace_back(y1, z1);
    }
  }
  return locus;
}

RidgeStats ridge_match(const ScalarField3D& field, const ArtifactLocus& locus,
                       const Eigen::Vector3d& x0, double exclusion_cells, double k_cells,
                       double probe_halfwidth_cells) {
  if (locus.points.empty()) throw EmptyLocus("ridge_match: locus has no samples");
  const double h = field.spacing();
  RidgeStats stats;
  std::vector<double> offsets;
  const int half_steps = static_cast<int>(std::lround(2.0 * probe_halfwidth_cells));
  for (size_t s = 0; s < locus.points.size(); ++s) {
    const Eigen::Vector3d& y = locus.points[s];
    const Eigen::Vector3d& nrm = locus.normals[s];
    if (nrm.squaredNorm() == 0.0) continue;
    if ((y - x0).norm() < exclusion_cells * h) continue;
    const Eigen::Vector3d lo3 = y - probe_halfwidth_cells * h * nrm;
    const Eigen::Vector3d hi3 = y + probe_halfwidth_cells * h * nrm;
    if (lo3.cwiseAbs().maxCoeff() > field.hi || hi3.cwiseAbs().maxCoeff() > field.hi) continue;
    double best = -1.0, best_s = 0.0;
    for (int q = -half_steps; q <= half_steps; ++q) {
      const double off = q * 0.5 * h;
      const double val = std::abs(field.interpolate(y + off * nrm));
      if (val > best) {
        best = val;
        best_s = off;
      }
    }
    ++stats.used;
    offsets.push_back(std::abs(best_s) / h);
    if (std::abs(best_s) <= k_cells * h) ++stats.covered;
  }
  if (stats.used == 0) throw EmptyLocus("ridge_match: no usable locus samples");
  stats.coverage = static_cast<double>(stats.covered) / stats.used;
  stats.chance_span = (2.0 * k_cells) / (2.0 * probe_halfwidth_cells);
  std::sort(offsets.begin(), offsets.end());
  stats.median_offset_cells = offsets[offsets.size() / 2];
  return stats;
}

ScalarField3D noise_field(int n, double box_half, uint64_t seed) {
  ScalarField3D f(n, -box_half, box_half);
  Rng rng(seed);
  for (double& v : f.data) v = rng.uniform(-1.0, 1.0);
  return f;
}

void write_field(const ScalarField3D& f, const std::string& path_base) {
  std::ofstream raw(path_base + ".raw", std::ios::binary);
  for (double v : f.data) {
    const float x = static_cast<float>(v);
    raw.write(reinterpret_cast<const char*>(&x), sizeof(float));
  }
  std::ofstream side(path_base + ".json");
  side.precision(17);
  side << "{\"dims\": [" << f.n << ", " << f.n << ", " << f.n << "], \"box\": [" << f.lo << ", "
       << f.hi << "], \"dtype\": \"float32-le\", \"order\": \"i-major\"}\n";
}

std::pair<double, double> write_pgm_slice(const ScalarField3D& f, int axis, int index,
                                          const std::string& path) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto value = [&](int a, int b) {
    switch (axis) {
      case 0: return f.at(index, a, b);
      case 1: return f.at(a, index, b);
      default: return f.at(a, b, index);
    }
  };
  for (int a = 0; a < f.n; ++a)
    for (int b = 0; b < f.n; ++b) {
      lo = std::min(lo, value(a, b));
      hi = std::max(hi, value(a, b));
    }
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << f.n << " " << f.n << "\n255\n";
  for (int a = 0; a < f.n; ++a)
    for (int b = 0; b < f.n; ++b) {
      const int g = static_cast<int>(std::lround(255.0 * (value(a, b) - lo) / span));
      const unsigned char c = static_cast<unsigned char>(std::clamp(g, 0, 255));
      out.write(reinterpret_cast<const char*>(&c), 1);
    }
  return {lo, hi};
}

void write_locus_csv(const ArtifactLocus& locus, const std::string& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "y1,z1,px,py,pz,nx,ny,nz\n";
  for (size_t i = 0; i < locus.points.size(); ++i) {
    out << locus.params[i][0] << "," << locus.params[i][1] << "," << locus.points[i][0] << ","
        << locus.points[i][1] << "," << locus.points[i][2] << "," << locus.normals[i][0] << ","
        << locus.normals[i][1] << "," << locus.normals[i][2] << "\n";
  }
}

}  // namespace microlocal
