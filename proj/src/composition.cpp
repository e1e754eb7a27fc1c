#include "microlocal/composition.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "microlocal/newton.hpp"

namespace microlocal {

std::string to_string(CompositionBranch b) {
  switch (b) {
    case CompositionBranch::diagonal: return "diagonal";
    case CompositionBranch::umbrella: return "umbrella";
    default: return "intersection";
  }
}

LagrangianInclusion UmbrellaChart::as_lagrangian() const {
  LagrangianInclusion inc = as_inclusion(chart);
  inc.singular_seed = singular_seed;
  inc.name = provenance;
  return inc;
}

// ---------------------------------------------------------------------------
// Reduced phase

ReducedPhase ReducedPhase::model_instance() {
  auto constant = [](double v, const std::string& label) {
    return SmoothMap(5, 1,
                     [v](std::span<const Jet> in) {
                       return std::vector<Jet>{Jet::constant(in[0].table(), v)};
                     },
                     label);
  };
  ReducedPhase rp;
  rp.P1 = constant(0.0, "P1=0");
  rp.P2 = constant(0.0, "P2=0");
  // N = theta3 makes the assembled phase coincide term by term with the
  // model phase of the averaging operator (degree-one homogeneity).
  rp.N = SmoothMap(5, 1, [](std::span<const Jet> a) { return std::vector<Jet>{a[4]}; },
                   "N=theta3");
  return rp;
}

namespace {

// Arguments of the P's from phase variables (x, y, theta2, theta3, tau).
std::vector<Jet> p_args(std::span<const Jet> v) {
  return {v[0], v[3], v[4], v[5], v[7]};  // (x1, y1, y2, y3, theta3)
}

}  // namespace

SmoothMap ReducedPhase::assembled_phase() const {
  SmoothMap P1c = P1, P2c = P2, Nc = N;
  return SmoothMap(
      9, 1,
      [P1c, P2c, Nc](std::span<const Jet> v) {
        // v = (x1, x2, x3, y1, y2, y3, theta2, theta3, tau)
        const Jet& t2 = v[6];
        const Jet& t3 = v[7];
        const Jet& tau = v[8];
        std::vector<Jet> a = p_args(v);
        Jet d = v[0] - v[3];
        Jet s = tau / t3;
        Jet p1 = P1c(a)[0], p2 = P2c(a)[0], n = Nc(a)[0];
        Jet big = v[2] - v[5] + d * (p2 - s * p1) / t3 + d * d * d * s * (n * 0.5) / t3 +
                  d * 0.5 * s * s * s;
        return std::vector<Jet>{(v[1] - v[4] + s * d) * t2 + big * t3};
      },
      "reduced_phase");
}

double ReducedPhase::min_abs_N(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int samples,
                               uint64_t seed) const {
  Rng rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) worst = std::min(worst, std::abs(N.value(rng.box(lo, hi))[0]));
  return worst;
}

double ReducedPhase::factorization_residual(int samples, uint64_t seed) const {
  SmoothMap phi = assembled_phase();
  SmoothMap P1c = P1, Nc = N;
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd v(9);
    v << rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
        rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-2, 2), rng.uniform(0.5, 2),
        rng.uniform(-2, 2);
    Eigen::VectorXd g = phi.jets(v, 1)[0].gradient();
    Eigen::VectorXd a(5);
    a << v[0], v[3], v[4], v[5], v[7];
    const double d = v[0] - v[3];
    const double factor = (v[6] - P1c.value(a)[0]) / v[7] + 1.5 * v[8] * v[8] / (v[7] * v[7]) +
                          d * d * Nc.value(a)[0] / (2 * v[7]);
    worst = std::max(worst, std::abs(g[8] - d * factor));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Composed charts

namespace {

// Solves the implicit pair (theta2, y3) of the reduced-phase umbrella chart
// in the jet algebra of the chart parameters: value Newton, then frozen-
// Jacobian passes that terminate exactly on the nilpotent part.
struct ReducedChartCore {
  SmoothMap P1, P2, N;

  // The two defining equations at a context (x1, x2, x3, y1, theta3, tau)
  // given in any jet algebra.
  std::pair<Jet, Jet> equations(std::span<const Jet> v, const Jet& t2, const Jet& y3) const {
    const Jet& x1 = v[0];
    const Jet& x3 = v[2];
    const Jet& y1 = v[3];
    const Jet& t3 = v[4];
    const Jet& tau = v[5];
    Jet d = x1 - y1;
    Jet s = tau / t3;
    Jet y2 = v[1] + s * d;
    std::vector<Jet> a{x1, y1, y2, y3, t3};
    Jet p1 = P1(a)[0], n = N(a)[0];
    Jet f1 = t2 - p1 + 1.5 * tau * tau / t3 + d * d * n * 0.5;
    // [[theta3]] = dP2/dt3 - s dP1/dt3 + (tau/t3^2) P1
    //            + d^2 [ s dN/dt3 / 2 - (tau/t3^2) N / 2 ] - tau^3/t3^3
    std::vector<Jet> dp1 = jet_partials_extended(P1, a, 4);
    std::vector<Jet> dp2 = jet_partials_extended(P2, a, 4);
    std::vector<Jet> dn = jet_partials_extended(N, a, 4);
    Jet bracket_t3 = dp2[0] - s * dp1[0] + tau / (t3 * t3) * p1 +
                     d * d * (s * dn[0] * 0.5 - tau / (t3 * t3) * n * 0.5) -
                     tau * tau * tau / (t3 * t3 * t3);
    Jet f2 = y3 - x3 + d * tau * t2 / (t3 * t3) - d * bracket_t3;
    return {f1, f2};
  }

  // params (x1, x2, x3, y1, theta3, tau)
  std::vector<Jet> operator()(std::span<const Jet> v) const {
    TablePtr tab = v[0].table();
    const Jet& x1 = v[0];
    const Jet& y1 = v[3];
    const Jet& t3 = v[4];
    const Jet& tau = v[5];
    Jet d = x1 - y1;
    Jet s = tau / t3;
    Jet y2 = v[1] + s * d;

    // Value Newton on (theta2, y3), probing with a 2-variable algebra.
    TablePtr probe_tab = IndexTable::get(2, 1);
    std::vector<Jet> ctx;
    for (const Jet& j : v) ctx.push_back(Jet::constant(probe_tab, j.value()));
    double t2v = 0.0, y3v = v[2].value();
    Eigen::Matrix2d J0;
    for (int it = 0; it < 60; ++it) {
      auto [f1, f2] = equations(ctx, Jet::variable(probe_tab, 0, t2v),
                                Jet::variable(probe_tab, 1, y3v));
      Eigen::Vector2d r(f1.value(), f2.value());
      J0 << f1.gradient()[0], f1.gradient()[1], f2.gradient()[0], f2.gradient()[1];
      Eigen::Vector2d step = J0.fullPivLu().solve(r);
      t2v -= step[0];
      y3v -= step[1];
      if (step.cwiseAbs().maxCoeff() < 1e-14 * (1.0 + std::abs(t2v) + std::abs(y3v))) break;
      if (it == 59) throw NoConvergence("reduced-phase chart: implicit (theta2, y3) stalled");
    }

    // Frozen-Jacobian passes on the jets.
    Eigen::Matrix2d J0inv = J0.inverse();
    Jet t2 = Jet::constant(tab, t2v);
    Jet y3 = Jet::constant(tab, y3v);
    for (int it = 0; it < tab->order() + 1; ++it) {
      auto [f1, f2] = equations(v, t2, y3);
      Jet dt2 = J0inv(0, 0) * f1 + J0inv(0, 1) * f2;
      Jet dy3 = J0inv(1, 0) * f1 + J0inv(1, 1) * f2;
      t2 -= dt2;
      y3 -= dy3;
    }

    // Covectors.
    std::vector<Jet> a{x1, y1, y2, y3, t3};
    Jet p1 = P1(a)[0], p2 = P2(a)[0], n = N(a)[0];
    std::vector<Jet> dp1x = jet_partials_extended(P1, a, 0), dp2x = jet_partials_extended(P2, a, 0),
                     dnx = jet_partials_extended(N, a, 0);
    std::vector<Jet> dp1y1 = jet_partials_extended(P1, a, 1),
                     dp2y1 = jet_partials_extended(P2, a, 1), dny1 = jet_partials_extended(N, a, 1);
    std::vector<Jet> dp1y2 = jet_partials_extended(P1, a, 2),
                     dp2y2 = jet_partials_extended(P2, a, 2), dny2 = jet_partials_extended(N, a, 2);
    std::vector<Jet> dp1y3 = jet_partials_extended(P1, a, 3),
                     dp2y3 = jet_partials_extended(P2, a, 3), dny3 = jet_partials_extended(N, a, 3);
    auto bracket = [&](const std::vector<Jet>& dp1s, const std::vector<Jet>& dp2s,
                       const std::vector<Jet>& dns) {
      return dp2s[0] - s * dp1s[0] + d * d * s * dns[0] * 0.5;
    };
    Jet core = p2 - tau * tau * tau / (t3 * t3) + tau * n * d * d / t3;
    Jet xi1 = core + d * bracket(dp1x, dp2x, dnx);
    Jet eta1 = core + d * bracket(dp1y1, dp2y1, dny1);
    Jet eta2 = t2 + d * bracket(dp1y2, dp2y2, dny2);
    Jet eta3 = t3 + d * bracket(dp1y3, dp2y3, dny3);
    return std::vector<Jet>{x1, v[1], v[2], xi1, t2, t3, y1, y2, y3, eta1, eta2, eta3};
  }
};

}  // namespace

ComposedCharts reduced_phase_charts(const ReducedPhase& rp) {
  ComposedCharts out;

  SmoothMap P1c = rp.P1, P2c = rp.P2;
  out.diagonal.nx = out.diagonal.ny = 3;
  out.diagonal.name = "composed_diagonal";
  out.diagonal.map = SmoothMap(
      6, 12,
      [P1c, P2c](std::span<const Jet> v) {
        // params (x1, x2, x3, tau, theta2, theta3); x = y.
        const Jet& tau = v[3];
        const Jet& t2 = v[4];
        const Jet& t3 = v[5];
        std::vector<Jet> a{v[0], v[0], v[1], v[2], t3};  // y = x on the diagonal
        Jet p1 = P1c(a)[0], p2 = P2c(a)[0];
        Jet s = tau / t3;
        Jet xi1 = s * t2 + p2 - s * p1 + 0.5 * s * s * s * t3;
        return std::vector<Jet>{v[0], v[1], v[2], xi1, t2, t3,
                                v[0], v[1], v[2], xi1, t2, t3};
      },
      "composed_diagonal");
  out.diagonal.box_lo = Eigen::VectorXd(6);
  out.diagonal.box_lo << -1, -1, -1, -2, -2, 0.5;
  out.diagonal.box_hi = Eigen::VectorXd(6);
  out.diagonal.box_hi << 1, 1, 1, 2, 2, 2;

  ReducedChartCore core{rp.P1, rp.P2, rp.N};
  out.umbrella.provenance = "reduced_phase";
  out.umbrella.chart.nx = out.umbrella.chart.ny = 3;
  out.umbrella.chart.name = "composed_umbrella";
  out.umbrella.chart.map =
      SmoothMap(6, 12, [core](std::span<const Jet> v) { return core(v); }, "composed_umbrella");
  out.umbrella.chart.box_lo = Eigen::VectorXd(6);
  out.umbrella.chart.box_lo << -1, -1, -1, -1, 0.5, -2;
  out.umbrella.chart.box_hi = Eigen::VectorXd(6);
  out.umbrella.chart.box_hi << 1, 1, 1, 1, 2, 2;
  out.umbrella.singular_seed = Eigen::VectorXd(6);
  out.umbrella.singular_seed << 0.05, 0.0, 0.0, -0.05, 1.0, 0.08;
  return out;
}

UmbrellaChart model_umbrella_chart(const std::string& form) {
  if (form == "tauform") {
    ComposedCharts cc = reduced_phase_charts(ReducedPhase::model_instance());
    UmbrellaChart u = cc.umbrella;
    u.provenance = "model_tauform";
    u.chart.name = "model_tauform";
    return u;
  }
  if (form != "zform") throw UnknownName("model_umbrella_chart: " + form);
  UmbrellaChart u;
  u.provenance = "model_zform";
  u.chart.nx = u.chart.ny = 3;
  u.chart.name = "model_zform";
  u.chart.map = SmoothMap(
      6, 12,
      [](std::span<const Jet> v) {
        // params (x1, x2, x3, y1, z1, theta3)
        const Jet& x1 = v[0];
        const Jet& y1 = v[3];
        const Jet& z1 = v[4];
        const Jet& t3 = v[5];
        Jet q = 3.0 * z1 * z1 - 3.0 * z1 * (x1 + y1) + x1 * x1 + y1 * y1 + x1 * y1;
        Jet t2 = -2.0 * q * t3;
        Jet zx = z1 - x1;
        Jet zy = z1 - y1;
        Jet xi1 = -2.0 * zx * t2 - 4.0 * zx * zx * zx * t3;
        Jet w = 2.0 * z1 - x1 - y1;
        Jet y2 = v[1] + (y1 - x1) * w;
        Jet y3 = v[2] + (y1 - x1) * w * (zx * zx + zy * zy);
        return std::vector<Jet>{x1, v[1], v[2], xi1, t2, t3, y1, y2, y3, xi1, t2, t3};
      },
      "model_zform");
  u.chart.box_lo = Eigen::VectorXd(6);
  u.chart.box_lo << -1, -1, -1, -1, -1, 0.5;
  u.chart.box_hi = Eigen::VectorXd(6);
  u.chart.box_hi << 1, 1, 1, 1, 1, 2;
  u.singular_seed = Eigen::VectorXd(6);
  u.singular_seed << 0.05, 0, 0, -0.05, 0.08, 1.0;
  return u;
}

RelationChart model_diagonal_chart() {
  return reduced_phase_charts(ReducedPhase::model_instance()).diagonal;
}

// ---------------------------------------------------------------------------
// Composition solve

namespace {

CompositionPoint classify_composition(const RelationPoint& xy, const CotangentPoint& mid,
                                      double residual, const ComposeOptions& opts) {
  CompositionPoint cp;
  cp.xy = xy;
  cp.mid = mid;
  cp.residual = residual;
  const double x1 = xy.left.base[0], y1 = xy.right.base[0], z1 = mid.base[0];
  const double zeta2 = mid.covector[1], zeta3 = mid.covector[2];
  const double q = 3 * z1 * z1 - 3 * z1 * (x1 + y1) + x1 * x1 + y1 * y1 + x1 * y1;
  cp.factor_diag = std::abs(x1 - y1) / std::max(1.0, std::abs(x1) + std::abs(y1));
  cp.factor_umbrella =
      std::abs(zeta2 + 2 * q * zeta3) / std::max(1.0, std::abs(zeta2) + std::abs(2 * q * zeta3));
  const bool diag = cp.factor_diag < opts.branch_tol;
  const bool umb = cp.factor_umbrella < opts.branch_tol;
  cp.branch = diag && umb   ? CompositionBranch::intersection
              : diag        ? CompositionBranch::diagonal
                            : CompositionBranch::umbrella;
  return cp;
}

CompositionPoint compose_model_explicit(Eigen::Ref<const Eigen::VectorXd> seed,
                                        const ComposeOptions& opts) {
  // Free data: x (from chart A's right base), y1, z1, theta2 (diagonal
  // only), theta3; the bracket relation fixes theta2 on the umbrella branch.
  const double z1 = seed[0];
  const double x1 = seed[3];
  const double x2 = seed[1] - std::pow(z1 - x1, 2);
  const double x3 = seed[2] - std::pow(z1 - x1, 4);
  const double y1 = seed[9];
  const double t3 = seed[5];
  double t2 = seed[4];
  const double q = 3 * z1 * z1 - 3 * z1 * (x1 + y1) + x1 * x1 + y1 * y1 + x1 * y1;
  if (std::abs(x1 - y1) > opts.branch_tol) t2 = -2.0 * q * t3;

  RelationChart c0 = builtin_relation("model_c0");
  Eigen::VectorXd pa(6), pb(6);
  pa << z1, x2 + std::pow(z1 - x1, 2), x3 + std::pow(z1 - x1, 4), x1, t2, t3;
  pb << pa[0], pa[1], pa[2], y1, t2, t3;
  RelationPoint a = c0.at(pa);
  RelationPoint b = c0.at(pb);
  RelationPoint xy{a.right, b.right};
  double residual = (a.left.base - b.left.base).cwiseAbs().maxCoeff() +
                    (a.left.covector - b.left.covector).cwiseAbs().maxCoeff() /
                        std::max(1.0, a.left.covector.cwiseAbs().maxCoeff());
  CompositionPoint cp = classify_composition(xy, a.left, residual, opts);
  cp.params_a = pa;
  cp.params_b = pb;
  return cp;
}

}  // namespace

CompositionPoint compose_solve(const RelationChart& chartA, const RelationChart& chartB,
                               Eigen::Ref<const Eigen::VectorXd> seed, const ComposeOptions& opts) {
  if (chartA.name == "model_c0" && chartB.name == "model_c0")
    return compose_model_explicit(seed, opts);

  const int da = chartA.dim(), db = chartB.dim();
  if (seed.size() != da + db) throw Error("compose_solve: seed dimension mismatch");
  SmoothMap projA = chartA.projection(Side::left);
  SmoothMap projB = chartB.projection(Side::left);
  const int m = 2 * chartA.nx;

  auto F = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd va = projA.value(u.head(da));
    Eigen::VectorXd vb = projB.value(u.tail(db));
    Eigen::VectorXd r = va - vb;
    const double scale = std::max(1.0, std::max(va.cwiseAbs().maxCoeff(), vb.cwiseAbs().maxCoeff()));
    return Eigen::VectorXd(r / scale);
  };
  auto J = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd va = projA.value(u.head(da));
    Eigen::VectorXd vb = projB.value(u.tail(db));
    const double scale = std::max(1.0, std::max(va.cwiseAbs().maxCoeff(), vb.cwiseAbs().maxCoeff()));
    Eigen::MatrixXd jac(m, da + db);
    jac.block(0, 0, m, da) = projA.jacobian(u.head(da)) / scale;
    jac.block(0, da, m, db) = -projB.jacobian(u.tail(db)) / scale;
    return jac;
  };
  NewtonOptions nopts;
  nopts.tol = opts.tol;
  NewtonResult res = gauss_newton_min_norm(F, J, seed, nopts);
  if (!res.converged) throw NoConvergence("compose_solve: matching system did not converge");

  RelationPoint a = chartA.at(res.x.head(da));
  RelationPoint b = chartB.at(res.x.tail(db));
  RelationPoint xy{a.right, b.right};
  CompositionPoint cp = classify_composition(xy, a.left, res.residual, opts);
  cp.params_a = res.x.head(da);
  cp.params_b = res.x.tail(db);
  return cp;
}

// ---------------------------------------------------------------------------
// Membership and intersection

double diagonal_distance(const RelationPoint& p) {
  const double base = (p.left.base - p.right.base).cwiseAbs().maxCoeff();
  const double cov = (p.left.covector - p.right.covector).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, p.left.covector.cwiseAbs().maxCoeff());
  return std::max(base, cov / scale);
}

double umbrella_membership_residual(const RelationPoint& p, const ReducedPhase& rp) {
  const double t3 = p.left.covector[2];
  if (std::abs(t3) < 1e-12) return std::numeric_limits<double>::infinity();
  const double d = p.left.base[0] - p.right.base[0];
  const double scale = std::max(1.0, p.left.covector.cwiseAbs().maxCoeff());

  auto residual_at = [&](double tau) {
    Eigen::VectorXd a(5);
    a << p.left.base[0], p.right.base[0], p.right.base[1], p.right.base[2], t3;
    const double p1 = rp.P1.value(a)[0];
    const double p2 = rp.P2.value(a)[0];
    const double n = rp.N.value(a)[0];
    const double s = tau / t3;
    double r = 0.0;
    r = std::max(r, std::abs(p.right.base[1] - (p.left.base[1] + s * d)));
    Eigen::VectorXd ja = a;
    auto jets1 = rp.P1.jets(ja, 1)[0];
    auto jets2 = rp.P2.jets(ja, 1)[0];
    auto jetsn = rp.N.jets(ja, 1)[0];
    const double bt3 = jets2.gradient()[4] - s * jets1.gradient()[4] + tau / (t3 * t3) * p1 +
                       d * d * (s * jetsn.gradient()[4] * 0.5 - tau / (t3 * t3) * n * 0.5) -
                       tau * tau * tau / (t3 * t3 * t3);
    const double t2 = p.left.covector[1];
    r = std::max(r, std::abs(p.right.base[2] - (p.left.base[2] - d * tau * t2 / (t3 * t3) + d * bt3)));
    r = std::max(r, std::abs(t2 - (p1 - 1.5 * tau * tau / t3 - d * d * n * 0.5)) / scale);
    const double core = p2 - tau * tau * tau / (t3 * t3) + tau * n * d * d / t3;
    const double bx1 = jets2.gradient()[0] - s * jets1.gradient()[0] +
                       d * d * s * jetsn.gradient()[0] * 0.5;
    const double by1 = jets2.gradient()[1] - s * jets1.gradient()[1] +
                       d * d * s * jetsn.gradient()[1] * 0.5;
    r = std::max(r, std::abs(p.left.covector[0] - (core + d * bx1)) / scale);
    r = std::max(r, std::abs(p.right.covector[0] - (core + d * by1)) / scale);
    r = std::max(r, std::abs(p.right.covector[2] - t3) / scale);
    return r;
  };

  std::vector<double> candidates;
  if (std::abs(d) > 1e-9) candidates.push_back(t3 * (p.right.base[1] - p.left.base[1]) / d);
  // tau from xi2 = P1 - 3/2 tau^2/t3 - ... (P's at the point)
  Eigen::VectorXd a(5);
  a << p.left.base[0], p.right.base[0], p.right.base[1], p.right.base[2], t3;
  const double p1 = rp.P1.value(a)[0];
  const double n = rp.N.value(a)[0];
  const double tau_sq = (p1 - p.left.covector[1] - d * d * n * 0.5) * t3 / 1.5;
  if (tau_sq >= 0.0) {
    candidates.push_back(std::sqrt(tau_sq));
    candidates.push_back(-std::sqrt(tau_sq));
  }
  candidates.push_back(0.0);
  double best = std::numeric_limits<double>::infinity();
  for (double tau : candidates) best = std::min(best, residual_at(tau));
  return best;
}

double composition_set_distance(const RelationPoint& p, const ReducedPhase& rp) {
  return std::min(diagonal_distance(p), umbrella_membership_residual(p, rp));
}

IntersectionReport intersection_codim_check(const RelationChart& diag, const UmbrellaChart& umb,
                                            const ReducedPhase& rp) {
  IntersectionReport rep;

  // Umbrella chart: defining residual of the intersection is x1 - y1.
  SmoothMap umap = umb.chart.map;
  Eigen::VectorXd pu = 0.5 * (umb.chart.box_lo + umb.chart.box_hi);
  pu[5] = 0.8;  // keep tau away from the chart's own singular locus
  {
    auto F = [&](const Eigen::VectorXd& p) {
      Eigen::VectorXd v = umap.value(p);
      Eigen::VectorXd r(1);
      r << v[0] - v[6];
      return r;
    };
    auto J = [&](const Eigen::VectorXd& p) {
      Eigen::MatrixXd jac = umap.jacobian(p);
      return Eigen::MatrixXd(jac.row(0) - jac.row(6));
    };
    NewtonResult res = gauss_newton_min_norm(F, J, pu);
    if (res.converged) {
      RelationPoint xy = umb.chart.at(res.x);
      const double cross = diagonal_distance(xy);
      rep.cross_residual = std::max(rep.cross_residual, cross);
      if (cross < 1e-7) {
        Eigen::MatrixXd g = J(res.x);
        rep.codim_umbrella = g.cwiseAbs().maxCoeff() > 1e-8 ? 1 : 0;
        rep.found = true;
      }
    }
  }

  // Diagonal chart: defining residual is the vanishing umbrella factor
  // (theta2 - P1)/theta3 + 3/2 tau^2/theta3^2 (x = y on this chart).
  SmoothMap P1c = rp.P1;
  SmoothMap factor(6, 1,
                   [P1c](std::span<const Jet> v) {
                     std::vector<Jet> a{v[0], v[0], v[1], v[2], v[5]};
                     Jet p1 = P1c(a)[0];
                     return std::vector<Jet>{(v[4] - p1) / v[5] +
                                             1.5 * v[3] * v[3] / (v[5] * v[5])};
                   },
                   "diag_intersection_factor");
  {
    Eigen::VectorXd pd = 0.5 * (diag.box_lo + diag.box_hi);
    pd[3] = 0.8;  // tau
    auto F = [&](const Eigen::VectorXd& p) { return Eigen::VectorXd(factor.value(p)); };
    auto J = [&](const Eigen::VectorXd& p) { return Eigen::MatrixXd(factor.jacobian(p)); };
    NewtonResult res = gauss_newton_min_norm(F, J, pd);
    bool ok = false;
    if (res.converged) {
      RelationPoint xy = diag.at(res.x);
      const double cross = umbrella_membership_residual(xy, rp);
      rep.cross_residual = std::max(rep.cross_residual, cross);
      if (cross < 1e-7) {
        Eigen::MatrixXd g = factor.jacobian(res.x);
        rep.codim_diagonal = g.cwiseAbs().maxCoeff() > 1e-8 ? 1 : 0;
        ok = true;
      }
    }
    rep.found = rep.found && ok;
  }
  return rep;
}

}  // namespace microlocal
