#include "microlocal/caustics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>

namespace microlocal {

SoundSpeedModel SoundSpeedModel::constant(double c) {
  SoundSpeedModel m;
  m.name = "constant";
  m.c0 = SmoothMap(3, 1,
                   [c](std::span<const Jet> x) {
                     return std::vector<Jet>{Jet::constant(x[0].table(), c)};
                   },
                   "c0=const");
  m.grad = SmoothMap(3, 3,
                     [](std::span<const Jet> x) {
                       Jet z = Jet::constant(x[0].table(), 0.0);
                       return std::vector<Jet>{z, z, z};
                     },
                     "grad c0=0");
  m.hess = SmoothMap(3, 9,
                     [](std::span<const Jet> x) {
                       return std::vector<Jet>(9, Jet::constant(x[0].table(), 0.0));
                     },
                     "hess c0=0");
  return m;
}

SoundSpeedModel SoundSpeedModel::gaussian_lens(double amplitude, const Eigen::Vector3d& center,
                                               const Eigen::Vector3d& sigma, double background) {
  SoundSpeedModel m;
  m.name = "gaussian_lens";
  const Eigen::Vector3d s2 = sigma.cwiseProduct(sigma);
  auto well = [center, s2](std::span<const Jet> x) {
    Jet r2 = Jet::constant(x[0].table(), 0.0);
    for (int i = 0; i < 3; ++i) {
      Jet d = x[i] - center[i];
      r2 += (0.5 / s2[i]) * d * d;
    }
    return exp(-r2);
  };
  m.c0 = SmoothMap(3, 1,
                   [well, amplitude, background](std::span<const Jet> x) {
                     return std::vector<Jet>{background * (1.0 - amplitude * well(x))};
                   },
                   "c0=lens");
  m.grad = SmoothMap(3, 3,
                     [well, amplitude, background, center, s2](std::span<const Jet> x) {
                       Jet factor = (background * amplitude) * well(x);
                       return std::vector<Jet>{(factor / s2[0]) * (x[0] - center[0]),
                                               (factor / s2[1]) * (x[1] - center[1]),
                                               (factor / s2[2]) * (x[2] - center[2])};
                     },
                     "grad lens");
  m.hess = SmoothMap(3, 9,
                     [well, amplitude, background, center, s2](std::span<const Jet> x) {
                       Jet factor = (background * amplitude) * well(x);
                       std::vector<Jet> out(9, Jet::constant(x[0].table(), 0.0));
                       for (int i = 0; i < 3; ++i)
                         for (int j = 0; j < 3; ++j) {
                           Jet term = (factor / (s2[i] * s2[j])) * (-1.0) * (x[i] - center[i]) *
                                      (x[j] - center[j]);
                           if (i == j) term += factor / s2[i];
                           out[3 * i + j] = term;
                         }
                       return out;
                     },
                     "hess lens");
  return m;
}

SoundSpeedModel SoundSpeedModel::gaussian_lens(double amplitude, const Eigen::Vector3d& center,
                                               double sigma, double background) {
  return gaussian_lens(amplitude, center, Eigen::Vector3d::Constant(sigma), background);
}

SoundSpeedModel default_lens() {
  // Anisotropic widths break the point-source rotational symmetry, giving
  // two fold sheets with generic cusp edges inside t <= 2.
  return SoundSpeedModel::gaussian_lens(0.3, Eigen::Vector3d(0.1, 0.0, 0.7),
                                        Eigen::Vector3d(0.16, 0.24, 0.2));
}

Eigen::Vector3d launch_direction(double a, double b) {
  return Eigen::Vector3d(a, b, 1.0) / std::sqrt(1.0 + a * a + b * b);
}

namespace {

using State = std::vector<Jet>;  // (x1, x2, x3, xi1, xi2, xi3)

State flow_rhs(const SoundSpeedModel& model, const State& y) {
  std::span<const Jet> x(y.data(), 3);
  Jet c = model.c0(x)[0];
  std::vector<Jet> gc = model.grad(x);
  Jet factor = -1.0 / (c * c * c);
  State dy(6);
  for (int i = 0; i < 3; ++i) dy[i] = y[3 + i];
  for (int i = 0; i < 3; ++i) dy[3 + i] = factor * gc[i];
  return dy;
}

// Dormand-Prince 5(4) on the jet-valued state.
struct Stepper {
  const SoundSpeedModel& model;
  const TraceOptions& opts;

  double error_norm(const State& y, const State& err) const {
    double worst = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int r = 0; r < y[i].table()->size(); ++r) {
        const double sc = opts.atol + opts.rtol * std::abs(y[i].coeff(r));
        worst = std::max(worst, std::abs(err[i].coeff(r)) / sc);
      }
    return worst;
  }

  // One attempted step; returns the error estimate and writes the candidate.
  double attempt(const State& y, double dt, State& out) const {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

    auto lc = [&](std::initializer_list<std::pair<double, const State*>> terms) {
      State r = y;
      for (auto& [c, k] : terms)
        for (int i = 0; i < 6; ++i) r[i] += (c * dt) * (*k)[i];
      return r;
    };
    State k1 = flow_rhs(model, y);
    State k2 = flow_rhs(model, lc({{a21, &k1}}));
    State k3 = flow_rhs(model, lc({{a31, &k1}, {a32, &k2}}));
    State k4 = flow_rhs(model, lc({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    State k5 = flow_rhs(model, lc({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    State k6 = flow_rhs(model, lc({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    out = lc({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    State k7 = flow_rhs(model, out);
    State err(6);
    for (int i = 0; i < 6; ++i) {
      err[i] = (e1 * dt) * k1[i];
      err[i] += (e3 * dt) * k3[i];
      err[i] += (e4 * dt) * k4[i];
      err[i] += (e5 * dt) * k5[i];
      err[i] += (e6 * dt) * k6[i];
      err[i] += (e7 * dt) * k7[i];
    }
    return error_norm(out, err);
  }
};

double hamiltonian(const SoundSpeedModel& model, const State& y) {
  Eigen::Vector3d xv(y[0].value(), y[1].value(), y[2].value());
  const double c = model.c0.value(xv)[0];
  const double xi2 = y[3].value() * y[3].value() + y[4].value() * y[4].value() +
                     y[5].value() * y[5].value();
  return 0.5 * (1.0 / (c * c) - xi2);
}

// Integrates from t0 to t1, invoking the sampler after every accepted step.
void integrate(const SoundSpeedModel& model, State& y, double t0, double t1, double max_dt,
               const TraceOptions& opts,
               const std::function<void(double, const State&)>& sampler = {}) {
  Stepper stepper{model, opts};
  double t = t0;
  double dt = std::min(max_dt, t1 - t0);
  while (t < t1 - 1e-14 * std::max(1.0, t1)) {
    dt = std::min(dt, t1 - t);
    State candidate;
    const double err = stepper.attempt(y, dt, candidate);
    if (!opts.adaptive) {
      if (err > 1.0) throw StepFailure("fixed-step error estimate exceeds tolerance");
      t += dt;
      y = std::move(candidate);
    } else if (err <= 1.0) {
      t += dt;
      y = std::move(candidate);
      dt = std::min(max_dt, dt * std::min(5.0, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
    } else {
      dt *= std::max(0.1, 0.9 * std::pow(err, -0.2));
      if (dt < opts.min_dt) throw StepFailure("adaptive step fell below the minimum");
      continue;
    }
    for (int i = 0; i < 3; ++i)
      if (std::abs(y[i].value()) > opts.domain_half)
        throw LeftDomain("ray left the working box");
    if (sampler) sampler(t, y);
  }
}

State initial_state(const SoundSpeedModel& model, const Eigen::Vector3d& source, const Jet& a,
                    const Jet& b) {
  TablePtr tab = a.table();
  const double cs = model.c0.value(source)[0];
  Jet n = sqrt(1.0 + a * a + b * b) * cs;
  State y(6);
  for (int i = 0; i < 3; ++i) y[i] = Jet::constant(tab, source[i]);
  y[3] = a / n;
  y[4] = b / n;
  y[5] = 1.0 / n;
  return y;
}

RaySample make_sample(const SoundSpeedModel& model, double t, const State& y) {
  RaySample s;
  s.t = t;
  for (int i = 0; i < 3; ++i) {
    s.x[i] = y[i].value();
    s.xi[i] = y[3 + i].value();
  }
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd g = y[i].gradient();
    s.J(i, 0) = g[0];
    s.J(i, 1) = g[1];
    s.J(i, 2) = s.xi[i];  // dx/dt = xi along the flow
  }
  s.det_J = s.J.determinant();
  s.H = hamiltonian(model, y);
  return s;
}

}  // namespace

RayTrajectory trace_ray(const SoundSpeedModel& model, const Eigen::Vector3d& source,
                        const Eigen::Vector2d& launch, double t_max, double dt,
                        const TraceOptions& opts) {
  TablePtr tab = IndexTable::get(2, std::max(1, opts.jet_order));
  State y = initial_state(model, source, Jet::variable(tab, 0, launch[0]),
                          Jet::variable(tab, 1, launch[1]));
  RayTrajectory ray;
  ray.launch = launch;
  ray.samples.push_back(make_sample(model, 0.0, y));
  const double h0 = ray.samples[0].H;
  const double hscale = 0.5 / std::pow(model.c0.value(source)[0], 2);
  integrate(model, y, 0.0, t_max, dt, opts, [&](double t, const State& yy) {
    RaySample s = make_sample(model, t, yy);
    ray.h_drift = std::max(ray.h_drift, std::abs(s.H - h0) / hscale);
    ray.samples.push_back(std::move(s));
  });
  return ray;
}

namespace {

// Taylor expansion of x(t_end + delta) in the state's own jet algebra:
// x' = xi, x'' = G = -c^-3 grad c, x''' = dG/dt.
std::vector<Jet> time_expand(const SoundSpeedModel& model, const State& y, const Jet& delta) {
  TablePtr tab = y[0].table();
  std::span<const Jet> x(y.data(), 3);
  Jet c = model.c0(x)[0];
  std::vector<Jet> gc = model.grad(x);
  std::vector<Jet> hc = model.hess(x);
  Jet cf = -1.0 / (c * c * c);
  // dG/dt = 3 c^-4 (grad c . xi) grad c - c^-3 Hess_c xi
  Jet gdot = Jet::constant(tab, 0.0);
  for (int i = 0; i < 3; ++i) gdot += gc[i] * y[3 + i];
  Jet c4 = 3.0 / (c * c * c * c);
  std::vector<Jet> out(3);
  for (int i = 0; i < 3; ++i) {
    Jet G = cf * gc[i];
    Jet hrow = Jet::constant(tab, 0.0);
    for (int j = 0; j < 3; ++j) hrow += hc[3 * i + j] * y[3 + j];
    Jet dG = c4 * gdot * gc[i] + cf * hrow;
    out[i] = y[i] + delta * (y[3 + i] + delta * (0.5 * G + delta * (1.0 / 6.0) * dG));
  }
  return out;
}

// (alpha, beta) -> (alpha, beta, 0) embedding of launch-parameter jets into
// the (a, b, t) algebra.
Jet lift_to_abt(const Jet& j, TablePtr tab3) {
  Jet out(tab3);
  TablePtr t2 = j.table();
  MultiIndex mi(3, 0);
  for (int r = 0; r < t2->size(); ++r) {
    const MultiIndex& src = t2->index(r);
    mi[0] = src[0];
    mi[1] = src[1];
    out.coeff(tab3->rank(mi)) = j.coeff(r);
  }
  return out;
}

}  // namespace

SmoothMap ray_spatial_map(const SoundSpeedModel& model, const Eigen::Vector3d& source,
                          const TraceOptions& opts) {
  return SmoothMap(
      3, 3,
      [model, source, opts](std::span<const Jet> u) {
        TablePtr tab = u[0].table();
        if (tab->order() > 3) throw Error("ray_spatial_map: jets capped at order 3");
        State y = initial_state(model, source, u[0], u[1]);
        const double t_end = u[2].value();
        integrate(model, y, 0.0, t_end, 0.05, opts);
        return time_expand(model, y, u[2] - t_end);
      },
      "ray_spatial_map");
}

std::array<double, 3> caustic_condition_residuals(const CausticReport& report) {
  return report.residuals;
}

namespace {

CausticReport report_from_classification(const SingularityReport& rep,
                                         const Eigen::Vector2d& launch, double t,
                                         const Eigen::Vector3d& x, double h_drift) {
  CausticReport out;
  out.launch = launch;
  out.t = t;
  out.x = x;
  out.cls = rep.cls;
  out.residuals = {rep.det, rep.residuals.count("ddet_v") ? rep.residuals.at("ddet_v") : 0.0,
                   rep.residuals.count("d2det_vv") ? rep.residuals.at("d2det_vv") : 0.0};
  out.rank2_sigma = rep.residuals.count("rank2_sigma") ? rep.residuals.at("rank2_sigma") : 0.0;
  out.h_drift = h_drift;
  return out;
}

}  // namespace

namespace {

// One traced ray with its launch-parameter jet states stored at the sample
// times; queries re-integrate only the short gap from the nearest stored
// state, then lift into the (a, b, t) algebra.
struct StoredRay {
  Eigen::Vector2d launch;
  std::vector<double> ts;
  std::vector<State> states;  // order-3 jets in (a, b)
  double h_drift = 0.0;

  int sample_below(double t) const {
    int s = 0;
    while (s + 1 < static_cast<int>(ts.size()) && ts[s + 1] <= t) ++s;
    return s;
  }
};

StoredRay store_ray(const SoundSpeedModel& model, const CausticScanConfig& config, double a,
                    double b) {
  StoredRay ray;
  ray.launch = {a, b};
  TablePtr tab = IndexTable::get(2, 3);
  TraceOptions opts = config.trace;
  State y = initial_state(model, config.source, Jet::variable(tab, 0, a),
                          Jet::variable(tab, 1, b));
  ray.ts.push_back(0.0);
  ray.states.push_back(y);
  const double h0 = hamiltonian(model, y);
  const double hscale = 0.5 / std::pow(model.c0.value(config.source)[0], 2);
  integrate(model, y, 0.0, config.t_max, config.sample_dt, opts, [&](double t, const State& yy) {
    ray.ts.push_back(t);
    ray.states.push_back(yy);
    ray.h_drift = std::max(ray.h_drift, std::abs(hamiltonian(model, yy) - h0) / hscale);
  });
  return ray;
}

State state_at(const SoundSpeedModel& model, const StoredRay& ray, const TraceOptions& opts,
               double t) {
  const int s = ray.sample_below(t);
  State y = ray.states[s];
  if (t > ray.ts[s] + 1e-15) integrate(model, y, ray.ts[s], t, 0.05, opts);
  return y;
}

double det_at(const SoundSpeedModel& model, const StoredRay& ray, const TraceOptions& opts,
              double t) {
  State y = state_at(model, ray, opts, t);
  Eigen::Matrix3d J;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd g = y[i].gradient();
    J(i, 0) = g[0];
    J(i, 1) = g[1];
    J(i, 2) = y[3 + i].value();
  }
  return J.determinant();
}

std::vector<Jet> map_jets_at(const SoundSpeedModel& model, const StoredRay& ray,
                             const TraceOptions& opts, double t) {
  State y = state_at(model, ray, opts, t);
  TablePtr tab3 = IndexTable::get(3, 3);
  State lifted(6);
  for (int i = 0; i < 6; ++i) lifted[i] = lift_to_abt(y[i], tab3);
  MultiIndex et{0, 0, 1};
  Jet delta(tab3);
  delta.coeff(tab3->rank(et)) = 1.0;  // t - t_root as a pure jet variable
  return time_expand(model, lifted, delta);
}

}  // namespace

std::vector<CausticReport> caustic_scan(const SoundSpeedModel& model,
                                        const CausticScanConfig& config) {
  std::vector<CausticReport> reports;

  struct FoldRoot {
    int ia, ib;
    Eigen::Vector2d launch;
    double t;
    double q;  // d(det)(kernel) at the root
  };
  std::vector<FoldRoot> roots;

  for (int ia = 0; ia < config.na; ++ia) {
    for (int ib = 0; ib < config.nb; ++ib) {
      const double a = config.a_lo + (config.a_hi - config.a_lo) * ia / (config.na - 1);
      const double b = config.b_lo + (config.b_hi - config.b_lo) * ib / (config.nb - 1);
      StoredRay ray;
      try {
        ray = store_ray(model, config, a, b);
      } catch (const LeftDomain&) {
        continue;
      }
      for (size_t s = 1; s + 1 < ray.ts.size(); ++s) {
        if (ray.ts[s] < config.t_min) continue;
        const double d0 = det_at(model, ray, config.trace, ray.ts[s]);
        const double d1 = det_at(model, ray, config.trace, ray.ts[s + 1]);
        if ((d0 > 0) == (d1 > 0)) continue;
        double lo = ray.ts[s], hi = ray.ts[s + 1];
        double flo = d0;
        for (int it = 0; it < 52; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fm = det_at(model, ray, config.trace, mid);
          if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        const double t_root = 0.5 * (lo + hi);
        Eigen::Vector3d p(a, b, t_root);
        std::vector<Jet> comps = map_jets_at(model, ray, config.trace, t_root);
        SingularityReport rep = classify_jets(comps, p, config.classify);
        if (rep.cls == SingularityClass::graph) continue;
        Eigen::Vector3d x(comps[0].value(), comps[1].value(), comps[2].value());
        reports.push_back(report_from_classification(rep, {a, b}, t_root, x, ray.h_drift));
        if (rep.kernel.size())
          roots.push_back({ia, ib, {a, b}, t_root, rep.grad_det.dot(rep.kernel)});
      }
    }
  }

  // Cusp ridge: polish (det, d(det)(v)) = 0 from sign changes of q between
  // fold roots of adjacent rays.
  SmoothMap ray_map = ray_spatial_map(model, config.source, config.trace);
  auto cusp_polish = [&](const Eigen::Vector3d& seed) {
    auto system = [&](const Eigen::VectorXd& p) {
      std::vector<Jet> comps = ray_map.jets(p, 3);
      std::vector<std::vector<Jet>> entries(3, std::vector<Jet>(3));
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) entries[i][j] = comps[i].partial(j);
      Jet det = jet_det(entries);
      Eigen::Matrix3d J;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) J(i, j) = entries[i][j].value();
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(J, Eigen::ComputeFullV);
      Eigen::Vector3d v = svd.matrixV().col(2);
      Eigen::VectorXd grad = det.gradient();
      Eigen::MatrixXd hess = det.hessian();
      Eigen::Vector2d r(det.value(), grad.dot(v));
      Eigen::MatrixXd jac(2, 3);
      jac.row(0) = grad.transpose();
      jac.row(1) = (hess * v).transpose();
      return std::pair<Eigen::Vector2d, Eigen::MatrixXd>(r, jac);
    };
    NewtonOptions nopts;
    nopts.tol = 1e-11;
    NewtonResult res = gauss_newton_min_norm(
        [&](const Eigen::VectorXd& p) { return Eigen::VectorXd(system(p).first); },
        [&](const Eigen::VectorXd& p) { return system(p).second; }, seed, nopts);
    return res;
  };

  for (const FoldRoot& r0 : roots) {
    for (const FoldRoot& r1 : roots) {
      const bool adjacent = (r0.ia == r1.ia && r0.ib + 1 == r1.ib) ||
                            (r0.ib == r1.ib && r0.ia + 1 == r1.ia);
      if (!adjacent || std::abs(r0.t - r1.t) > 3.0 * config.sample_dt) continue;
      if ((r0.q > 0) == (r1.q > 0)) continue;
      Eigen::Vector3d seed(0.5 * (r0.launch[0] + r1.launch[0]),
                           0.5 * (r0.launch[1] + r1.launch[1]), 0.5 * (r0.t + r1.t));
      NewtonResult res = cusp_polish(seed);
      if (!res.converged) continue;
      Eigen::Vector3d p = res.x;
      SingularityReport rep = classify_map(ray_map, p, config.classify);
      if (rep.cls != SingularityClass::cusp) continue;
      bool fresh = true;
      for (const CausticReport& existing : reports)
        if (existing.cls == SingularityClass::cusp &&
            (Eigen::Vector2d(existing.launch) - Eigen::Vector2d(p[0], p[1])).norm() +
                    std::abs(existing.t - p[2]) <
                1e-4)
          fresh = false;
      if (!fresh) continue;
      reports.push_back(
          report_from_classification(rep, {p[0], p[1]}, p[2], ray_map.value(p), 0.0));
    }
  }
  return reports;
}

void write_caustics_csv(const std::vector<CausticReport>& reports, const std::string& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "a,b,t,x1,x2,x3,class,det,ddet_v,d2det_vv,rank2_sigma\n";
  for (const auto& r : reports) {
    out << r.launch[0] << "," << r.launch[1] << "," << r.t << "," << r.x[0] << "," << r.x[1] << ","
        << r.x[2] << "," << to_string(r.cls) << "," << r.residuals[0] << "," << r.residuals[1]
        << "," << r.residuals[2] << "," << r.rank2_sigma << "\n";
  }
}

void write_ray_csv(const RayTrajectory& ray, const std::string& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "t,x1,x2,x3,xi1,xi2,xi3,det_J,H\n";
  for (const auto& s : ray.samples) {
    out << s.t << "," << s.x[0] << "," << s.x[1] << "," << s.x[2] << "," << s.xi[0] << ","
        << s.xi[1] << "," << s.xi[2] << "," << s.det_J << "," << s.H << "\n";
  }
}

}  // namespace microlocal
