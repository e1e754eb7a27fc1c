#include "microlocal/phase_geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace microlocal {

Eigen::VectorXd RelationPoint::packed() const {
  Eigen::VectorXd v(left.base.size() + left.covector.size() + right.base.size() +
                    right.covector.size());
  v << left.base, left.covector, right.base, right.covector;
  return v;
}

RelationPoint RelationPoint::unpack(Eigen::Ref<const Eigen::VectorXd> v, int nx, int ny) {
  RelationPoint p;
  p.left.base = v.segment(0, nx);
  p.left.covector = v.segment(nx, nx);
  p.right.base = v.segment(2 * nx, ny);
  p.right.covector = v.segment(2 * nx + ny, ny);
  return p;
}

RelationPoint RelationChart::at(Eigen::Ref<const Eigen::VectorXd> p) const {
  return RelationPoint::unpack(map.value(p), nx, ny);
}

SmoothMap RelationChart::projection(Side side) const {
  const int offset = side == Side::left ? 0 : 2 * nx;
  const int n = side == Side::left ? nx : ny;
  SmoothMap inner = map;
  return SmoothMap(map.in(), 2 * n,
                   [inner, offset, n](std::span<const Jet> p) {
                     std::vector<Jet> full = inner(p);
                     return std::vector<Jet>(full.begin() + offset, full.begin() + offset + 2 * n);
                   },
                   name + (side == Side::left ? ":piL" : ":piR"));
}

LagrangianInclusion as_inclusion(const RelationChart& chart) {
  LagrangianInclusion inc;
  inc.map = chart.map;
  inc.pairing = SymplecticPairing::twisted_product(chart.nx, chart.ny);
  inc.name = chart.name;
  return inc;
}

RelationChart reparametrized(const RelationChart& chart, const Eigen::MatrixXd& A,
                             const Eigen::VectorXd& b) {
  RelationChart out = chart;
  SmoothMap inner = chart.map;
  out.map = SmoothMap(chart.map.in(), chart.map.out(),
                      [inner, A, b](std::span<const Jet> p) {
                        std::vector<Jet> q(p.size(), Jet(p[0].table()));
                        for (int i = 0; i < A.rows(); ++i) {
                          Jet acc = Jet::constant(p[0].table(), b[i]);
                          for (int j = 0; j < A.cols(); ++j)
                            if (A(i, j) != 0.0) acc += A(i, j) * p[j];
                          q[i] = acc;
                        }
                        return inner(q);
                      },
                      chart.name + ":reparam");
  out.box_lo.resize(0);
  out.box_hi.resize(0);
  return out;
}

// ---------------------------------------------------------------------------
// Built-in families

namespace {

SmoothMap coordinate_map(int dim, int idx, const std::string& label) {
  return SmoothMap(dim, 1,
                   [idx](std::span<const Jet> v) { return std::vector<Jet>{v[idx]}; }, label);
}

RelationChart make_model_c0() {
  RelationChart c;
  c.nx = c.ny = 3;
  c.name = "model_c0";
  c.map = SmoothMap(6, 12,
                    [](std::span<const Jet> p) {
                      const Jet& x1 = p[0];
                      const Jet& x2 = p[1];
                      const Jet& x3 = p[2];
                      const Jet& y1 = p[3];
                      const Jet& t2 = p[4];
                      const Jet& t3 = p[5];
                      Jet u = x1 - y1;
                      Jet u2 = u * u;
                      Jet xi1 = -2.0 * u * t2 - 4.0 * u * u2 * t3;
                      return std::vector<Jet>{x1,  x2,           x3,           xi1, t2, t3,
                                              y1,  x2 - u2,      x3 - u2 * u2, xi1, t2, t3};
                    },
                    "model_c0");
  c.box_lo = Eigen::VectorXd(6);
  c.box_lo << -1, -1, -1, -1, -2, 0.5;
  c.box_hi = Eigen::VectorXd(6);
  c.box_hi << 1, 1, 1, 1, 2, 2;
  c.cusp_image_left = {coordinate_map(6, 3, "xi1"), coordinate_map(6, 4, "xi2")};
  c.cusp_image_right = {coordinate_map(6, 3, "eta1"), coordinate_map(6, 4, "eta2")};
  return c;
}

RelationChart make_menn_c1() {
  // Conormal bundle of translates of Menn's surface
  // w3 = w1^2 w2 - w2^2, w = x - y, twisted.
  RelationChart c;
  c.nx = c.ny = 3;
  c.name = "menn_c1";
  c.map = SmoothMap(6, 12,
                    [](std::span<const Jet> p) {
                      const Jet& x1 = p[0];
                      const Jet& x2 = p[1];
                      const Jet& x3 = p[2];
                      const Jet& y1 = p[3];
                      const Jet& y2 = p[4];
                      const Jet& t3 = p[5];
                      Jet w1 = x1 - y1;
                      Jet w2 = x2 - y2;
                      Jet xi1 = -2.0 * w1 * w2 * t3;
                      Jet xi2 = (2.0 * w2 - w1 * w1) * t3;
                      Jet y3 = x3 - w1 * w1 * w2 + w2 * w2;
                      return std::vector<Jet>{x1, x2, x3, xi1, xi2, t3,
                                              y1, y2, y3, xi1, xi2, t3};
                    },
                    "menn_c1");
  c.box_lo = Eigen::VectorXd(6);
  c.box_lo << -1, -1, -1, -1, -1, 0.5;
  c.box_hi = Eigen::VectorXd(6);
  c.box_hi << 1, 1, 1, 1, 1, 2;
  c.cusp_image_left = {coordinate_map(6, 3, "xi1"), coordinate_map(6, 4, "xi2")};
  c.cusp_image_right = {coordinate_map(6, 3, "eta1"), coordinate_map(6, 4, "eta2")};
  return c;
}

struct PolyCurve {
  std::vector<std::vector<double>> rows;

  int dim() const { return static_cast<int>(rows.size()); }

  Jet eval(int comp, const Jet& t, int deriv) const {
    const auto& cs = rows[comp];
    Jet acc = Jet::constant(t.table(), 0.0);
    for (int k = static_cast<int>(cs.size()) - 1; k >= deriv; --k) {
      double fac = cs[k];
      for (int j = 0; j < deriv; ++j) fac *= (k - j);
      acc = acc * t + fac;
    }
    return acc;
  }

  double eval(int comp, double t, int deriv) const {
    TablePtr tab = IndexTable::get(1, 0);
    return eval(comp, Jet::constant(tab, t), deriv).value();
  }
};


double curve_min_frame_det(const PolyCurve& pc, double t_lo, double t_hi, int samples) {
  const int n = pc.dim();
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const double t = t_lo + (t_hi - t_lo) * s / (samples - 1);
    Eigen::MatrixXd m(n, n);
    for (int d = 1; d <= n; ++d)
      for (int i = 0; i < n; ++i) m(i, d - 1) = pc.eval(i, t, d);
    best = std::min(best, std::abs(m.determinant()));
  }
  return best;
}

RelationChart make_curve_chart(const CurveParams& params, int ambient) {
  PolyCurve pc{params.coeffs};
  if (pc.dim() != ambient) throw Error("curve chart: wrong ambient dimension");
  if (curve_min_frame_det(pc, params.t_lo, params.t_hi, 256) < 1e-8)
    throw DegenerateCurve("curve derivative frame is degenerate on the range");
  for (int s = 0; s < 256; ++s) {
    const double t = params.t_lo + (params.t_hi - params.t_lo) * s / 255.0;
    if (std::abs(pc.eval(0, t, 1)) < 1e-8)
      throw DegenerateCurve("curve chart needs gamma_1' != 0 on the range");
  }

  RelationChart c;
  c.nx = c.ny = ambient;
  c.name = ambient == 4 ? "curve_r4" : "curve_r3";
  const int d = 2 * ambient;  // params: x (n), t, xi_2..xi_n
  c.map = SmoothMap(d, 4 * ambient,
                    [pc, ambient](std::span<const Jet> p) {
                      TablePtr tab = p[0].table();
                      const Jet& t = p[ambient];
                      std::vector<Jet> gamma, dgamma;
                      for (int i = 0; i < ambient; ++i) {
                        gamma.push_back(pc.eval(i, t, 0));
                        dgamma.push_back(pc.eval(i, t, 1));
                      }
                      // xi . gamma' = 0 defines xi_1.
                      Jet num = Jet::constant(tab, 0.0);
                      for (int j = 1; j < ambient; ++j) num += p[ambient + j] * dgamma[j];
                      Jet xi1 = -num / dgamma[0];
                      std::vector<Jet> out;
                      for (int i = 0; i < ambient; ++i) out.push_back(p[i]);
                      out.push_back(xi1);
                      for (int j = 1; j < ambient; ++j) out.push_back(p[ambient + j]);
                      for (int i = 0; i < ambient; ++i) out.push_back(p[i] - gamma[i]);
                      out.push_back(xi1);
                      for (int j = 1; j < ambient; ++j) out.push_back(p[ambient + j]);
                      return out;
                    },
                    c.name);
  c.box_lo = Eigen::VectorXd(d);
  c.box_hi = Eigen::VectorXd(d);
  for (int i = 0; i < ambient; ++i) {
    c.box_lo[i] = -1.0;
    c.box_hi[i] = 1.0;
  }
  c.box_lo[ambient] = params.t_lo + 0.1 * (params.t_hi - params.t_lo);
  c.box_hi[ambient] = params.t_hi - 0.1 * (params.t_hi - params.t_lo);
  for (int j = 1; j < ambient - 1; ++j) {
    c.box_lo[ambient + j] = -1.0;
    c.box_hi[ambient + j] = 1.0;
  }
  c.box_lo[2 * ambient - 1] = 0.5;  // last covector slot kept away from 0
  c.box_hi[2 * ambient - 1] = 2.0;

  if (ambient == 4) {
    // Defining pair of the cusp-set image: f1 = xi.gamma'(t(xi)),
    // f2 = xi.gamma''(t(xi)) with t(xi) the root of xi.gamma''' = 0
    // (implicit-function chart; the third derivative has a simple root
    // there since the frame is nondegenerate).
    auto pair_map = [pc, ambient](int deriv) {
      return SmoothMap(2 * ambient, 1,
                       [pc, ambient, deriv](std::span<const Jet> v) {
                         auto F = [&pc, ambient](std::span<const Jet> u, const Jet& t) {
                           Jet acc = Jet::constant(t.table(), 0.0);
                           for (int j = 0; j < ambient; ++j)
                             acc += u[ambient + j] * pc.eval(j, t, 3);
                           return acc;
                         };
                         Jet t = jet_implicit_solve(F, v, 0.0);
                         Jet acc = Jet::constant(v[0].table(), 0.0);
                         for (int j = 0; j < ambient; ++j) acc += v[ambient + j] * pc.eval(j, t, deriv);
                         return std::vector<Jet>{acc};
                       },
                       deriv == 1 ? "xi.gamma1(t(xi))" : "xi.gamma2(t(xi))");
    };
    c.cusp_image_left = {pair_map(1), pair_map(2)};
    c.cusp_image_right = {pair_map(1), pair_map(2)};
  }
  return c;
}

CurveParams default_curve(int ambient) {
  CurveParams p;
  for (int i = 0; i < ambient; ++i) {
    std::vector<double> row(i + 2, 0.0);
    row[i + 1] = 1.0;
    p.coeffs.push_back(row);  // gamma_i = t^{i+1}
  }
  return p;
}

SmoothMap constant_scalar(int dim, double v, const std::string& label) {
  return SmoothMap(dim, 1,
                   [v](std::span<const Jet> in) {
                     return std::vector<Jet>{Jet::constant(in[0].table(), v)};
                   },
                   label);
}

WeakNormalFormPhase make_wnf(const std::string& variant) {
  WeakNormalFormPhase w;
  w.S2 = coordinate_map(6, 1, "S2=x2");
  if (variant == "model") {
    w.S3 = SmoothMap(6, 1,
                     [](std::span<const Jet> v) { return std::vector<Jet>{-v[5]}; }, "S3=-theta3");
    w.S4 = constant_scalar(6, -1.0, "S4=-1");
  } else if (variant == "unit") {
    w.S3 = constant_scalar(6, 1.0, "S3=1");
    w.S4 = constant_scalar(6, 1.0, "S4=1");
  } else {
    throw UnknownName("weak_normal_form variant: " + variant);
  }
  return w;
}

}  // namespace

PhaseFunction WeakNormalFormPhase::assemble() const {
  // Variables: (x1, x2, x3, y1, y2, y3, theta2, theta3); the S's, f, g see
  // (x1, x2, x3, y1, theta2, theta3).
  SmoothMap S2c = S2, S3c = S3, S4c = S4;
  std::optional<SmoothMap> fc = f, gc = g;
  PhaseFunction phi;
  phi.nx = 3;
  phi.ny = 3;
  phi.ntheta = 2;
  phi.phi = SmoothMap(8, 1,
                      [S2c, S3c, S4c, fc, gc](std::span<const Jet> v) {
                        std::vector<Jet> a{v[0], v[1], v[2], v[3], v[6], v[7]};
                        Jet fv = fc ? (*fc)(a)[0] : Jet::constant(v[0].table(), 0.0);
                        Jet gv = gc ? (*gc)(a)[0] : v[0];
                        Jet u = v[3] - gv;
                        Jet u2 = u * u;
                        Jet phi_val = (S2c(a)[0] + u2 * S4c(a)[0]) * (v[6] - fv) +
                                      (v[2] - v[5]) * v[7] + u2 * u2 * S3c(a)[0] - v[4] * v[6];
                        return std::vector<Jet>{phi_val};
                      },
                      "wnf_phase");
  return phi;
}

RelationChart WeakNormalFormPhase::chart() const {
  SmoothMap S2c = S2, S3c = S3, S4c = S4;
  std::optional<SmoothMap> fc = f, gc = g;
  // A(x, y1, theta') = (S2 + (y1-g)^2 S4)(theta2 - f) + (y1-g)^4 S3;
  // the chart solves d_theta phi = 0 for (y2, y3) explicitly.
  SmoothMap A(6, 1,
              [S2c, S3c, S4c, fc, gc](std::span<const Jet> v) {
                Jet fv = fc ? (*fc)(v)[0] : Jet::constant(v[0].table(), 0.0);
                Jet gv = gc ? (*gc)(v)[0] : v[0];
                Jet u = v[3] - gv;
                Jet u2 = u * u;
                return std::vector<Jet>{(S2c(v)[0] + u2 * S4c(v)[0]) * (v[4] - fv) +
                                        u2 * u2 * S3c(v)[0]};
              },
              "wnf_A");

  RelationChart c;
  c.nx = c.ny = 3;
  c.name = "weak_normal_form";
  c.map = SmoothMap(6, 12,
                    [A](std::span<const Jet> p) {
                      std::vector<Jet> dA(6);
                      for (int s = 0; s < 6; ++s) dA[s] = jet_partials_extended(A, p, s)[0];
                      Jet xi1 = dA[0];
                      Jet xi2 = dA[1];
                      Jet xi3 = dA[2] + p[5];
                      Jet y2 = dA[4];
                      Jet y3 = p[2] + dA[5];
                      Jet eta1 = -dA[3];
                      return std::vector<Jet>{p[0], p[1], p[2], xi1,  xi2,  xi3,
                                              p[3], y2,   y3,   eta1, p[4], p[5]};
                    },
                    "weak_normal_form");
  c.box_lo = Eigen::VectorXd(6);
  c.box_lo << -1, -1, -1, -1, -2, 0.5;
  c.box_hi = Eigen::VectorXd(6);
  c.box_hi << 1, 1, 1, 1, 2, 2;
  c.cusp_image_left = {coordinate_map(6, 3, "xi1"), coordinate_map(6, 4, "xi2")};
  c.cusp_image_right = {coordinate_map(6, 3, "eta1"), coordinate_map(6, 4, "eta2")};
  return c;
}

double WeakNormalFormPhase::validate(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                     int samples, uint64_t seed) const {
  Rng rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  TablePtr tab = IndexTable::get(6, 1);
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd p = rng.box(lo, hi);
    auto jets = Jet::seed(tab, p);
    std::span<const Jet> v(jets);
    Jet s2 = S2(v)[0];
    worst = std::min(worst, std::abs(s2.gradient()[1]));  // d S2 / d x2
    worst = std::min(worst, std::abs(S3(v)[0].value()));
    worst = std::min(worst, std::abs(S4(v)[0].value()));
  }
  return worst;
}

BuiltinObject builtin_chart(const std::string& name, const ChartParams& params) {
  if (name == "model_c0") return make_model_c0();
  if (name == "menn_c1") return make_menn_c1();
  if (name == "curve_r4") return make_curve_chart(params.curve.value_or(default_curve(4)), 4);
  if (name == "curve_r3") return make_curve_chart(params.curve.value_or(default_curve(3)), 3);
  if (name == "weak_normal_form") return make_wnf(params.wnf_variant).chart();
  if (name == "model_umbrella_U") return make_open_umbrella_model();
  if (name == "model_lambda1") return make_conic_umbrella_model();
  throw UnknownName("unknown chart: " + name);
}

RelationChart builtin_relation(const std::string& name, const ChartParams& params) {
  BuiltinObject obj = builtin_chart(name, params);
  if (auto* c = std::get_if<RelationChart>(&obj)) return *c;
  throw UnknownName("builtin " + name + " is a Lagrangian inclusion, not a relation chart");
}

Eigen::VectorXd critical_point_solve(const PhaseFunction& phi,
                                     Eigen::Ref<const Eigen::VectorXd> seed,
                                     const std::vector<int>& unknowns, const NewtonOptions& opts) {
  if (static_cast<int>(unknowns.size()) != phi.ntheta)
    throw Error("critical_point_solve: need as many unknowns as theta variables");
  Eigen::VectorXd base = seed;
  auto assemble = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd p = base;
    for (size_t i = 0; i < unknowns.size(); ++i) p[unknowns[i]] = u[i];
    return p;
  };
  auto F = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd g = phi.phi.jets(assemble(u), 1)[0].gradient();
    return Eigen::VectorXd(g.segment(phi.nx + phi.ny, phi.ntheta));
  };
  auto J = [&](const Eigen::VectorXd& u) {
    Eigen::MatrixXd h = phi.phi.jets(assemble(u), 2)[0].hessian();
    Eigen::MatrixXd jac(phi.ntheta, unknowns.size());
    for (int r = 0; r < phi.ntheta; ++r)
      for (size_t c = 0; c < unknowns.size(); ++c)
        jac(r, c) = h(phi.nx + phi.ny + r, unknowns[c]);
    return jac;
  };
  Eigen::VectorXd u0(unknowns.size());
  for (size_t i = 0; i < unknowns.size(); ++i) u0[i] = seed[unknowns[i]];
  NewtonResult res = newton_solve(F, J, u0, opts);
  if (!res.converged) throw NoConvergence("critical_point_solve: Newton did not converge");
  return assemble(res.x);
}

RelationPoint relation_point_from_phase(const PhaseFunction& phi,
                                        Eigen::Ref<const Eigen::VectorXd> crit, double tol) {
  Eigen::VectorXd g = phi.phi.jets(crit, 1)[0].gradient();
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if (g.segment(phi.nx + phi.ny, phi.ntheta).cwiseAbs().maxCoeff() > tol * scale)
    throw Error("relation_point_from_phase: point is not stationary in theta");
  RelationPoint p;
  p.left.base = crit.segment(0, phi.nx);
  p.left.covector = g.segment(0, phi.nx);
  p.right.base = crit.segment(phi.nx, phi.ny);
  p.right.covector = -g.segment(phi.nx, phi.ny);
  if (p.left.covector.norm() < 1e-12 * scale || p.right.covector.norm() < 1e-12 * scale)
    throw ZeroCovector("phase critical point has a vanishing covector");
  return p;
}

double curve_nondegeneracy_check(const SmoothMap& gamma, double t_lo, double t_hi, int samples) {
  samples = std::max(samples, 200);
  const int n = gamma.out();
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd t(1);
  for (int s = 0; s < samples; ++s) {
    t[0] = t_lo + (t_hi - t_lo) * s / (samples - 1);
    auto jets = gamma.jets(t, 4);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int d = 1; d <= n; ++d) m(i, d - 1) = jets[i].derivative(MultiIndex{d});
    best = std::min(best, std::abs(m.determinant()));
  }
  return best;
}

double canonical_relation_defect(const RelationChart& chart,
                                 Eigen::Ref<const Eigen::VectorXd> p) {
  return isotropy_defect(as_inclusion(chart), p);
}

}  // namespace microlocal
