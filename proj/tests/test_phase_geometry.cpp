#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "microlocal/phase_geometry.hpp"
#include "microlocal/rng.hpp"
#include "test_helpers.hpp"

using namespace microlocal;

namespace {

// Phase of the model averaging operator over translates of (t, t^2, t^4).
PhaseFunction model_phase() {
  PhaseFunction p;
  p.nx = p.ny = 3;
  p.ntheta = 2;
  p.phi = SmoothMap(8, 1,
                    [](std::span<const Jet> v) {
                      Jet u = v[0] - v[3];
                      Jet u2 = u * u;
                      return std::vector<Jet>{(v[1] - v[4] - u2) * v[6] +
                                              (v[2] - v[5] - u2 * u2) * v[7]};
                    },
                    "model_phase");
  return p;
}

Eigen::VectorXd pt8(double x1, double x2, double x3, double y1, double y2, double y3, double t2,
                    double t3) {
  Eigen::VectorXd v(8);
  v << x1, x2, x3, y1, y2, y3, t2, t3;
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("phase_geometry");

TEST_CASE("critical point solve on the model phase") {
  PhaseFunction phi = model_phase();
  SUBCASE("x = y solves both constraints") {
    auto p = critical_point_solve(phi, pt8(0, 0, 0, 0, 0.3, -0.2, 1, 1), {4, 5});
    CHECK(p[4] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(p[5] == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("closed-form constraints at x1 - y1 = 1") {
    auto p = critical_point_solve(phi, pt8(1, 0, 0, 0, 0.5, 0.5, 1, 1), {4, 5});
    CHECK(p[4] == doctest::Approx(-1.0));
    CHECK(p[5] == doctest::Approx(-1.0));
  }
  SUBCASE("infeasible geometry fails to converge") {
    // Unknowns (y1, y3): d_theta2 phi = (x2 - y2) - u^2 = -10 - u^2 < 0 always.
    CHECK_THROWS_AS((void)critical_point_solve(phi, pt8(0, -10, 0, 1, 0, 0, 1, 1), {3, 5}),
                    NoConvergence);
  }
}

TEST_CASE("relation point from phase") {
  PhaseFunction phi = model_phase();
  SUBCASE("closed-form covector") {
    auto rp = relation_point_from_phase(phi, pt8(1, 0, 0, 0, -1, -1, 1, 1));
    Eigen::Vector3d expect(-6, 1, 1);
    CHECK((rp.left.covector - expect).norm() < 1e-12);
    CHECK((rp.right.covector - expect).norm() < 1e-12);
    CHECK((rp.left.base - Eigen::Vector3d(1, 0, 0)).norm() == 0.0);
  }
  SUBCASE("diagonal point") {
    auto rp = relation_point_from_phase(phi, pt8(0.5, 0.2, 0.1, 0.5, 0.2, 0.1, 2, 3));
    CHECK((rp.left.covector - Eigen::Vector3d(0, 2, 3)).norm() < 1e-12);
    CHECK((rp.right.covector - Eigen::Vector3d(0, 2, 3)).norm() < 1e-12);
  }
  SUBCASE("zero theta gives ZeroCovector") {
    CHECK_THROWS_AS((void)relation_point_from_phase(phi, pt8(0, 0, 0, 0, 0, 0, 0, 0)),
                    ZeroCovector);
  }
}

TEST_CASE("builtin model_c0 matches the displayed closed form") {
  RelationChart c = builtin_relation("model_c0");
  Eigen::VectorXd p(6);
  p << 1, 0.5, -0.5, 0, 2, 3;  // (x, y1, theta2, theta3)
  RelationPoint rp = c.at(p);
  const double u = 1.0;
  const double xi1 = -2 * u * 2 - 4 * u * u * u * 3;
  CHECK(rp.left.covector[0] == doctest::Approx(xi1));
  CHECK(rp.left.covector[1] == doctest::Approx(2));
  CHECK(rp.left.covector[2] == doctest::Approx(3));
  CHECK(rp.right.base[1] == doctest::Approx(0.5 - 1.0));
  CHECK(rp.right.base[2] == doctest::Approx(-0.5 - 1.0));
  CHECK((rp.right.covector - rp.left.covector).norm() == 0.0);
}

TEST_CASE("phase-derived points land on the model chart covector formula") {
  PhaseFunction phi = model_phase();
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd seed = pt8(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1), 0, 0, rng.uniform(-2, 2),
                               rng.uniform(0.5, 2));
    auto crit = critical_point_solve(phi, seed, {4, 5});
    auto rp = relation_point_from_phase(phi, crit);
    const double u = crit[0] - crit[3];
    const double t2 = crit[6], t3 = crit[7];
    const double xi1 = -2 * u * t2 - 4 * u * u * u * t3;
    CHECK(std::abs(rp.left.covector[0] - xi1) < 1e-10 * std::max(1.0, std::abs(xi1)));
    CHECK(rp.left.covector[1] == doctest::Approx(t2).epsilon(1e-12));
    CHECK((rp.left.covector - rp.right.covector).norm() < 1e-12);
  }
}

TEST_CASE("homogeneity in theta") {
  RelationChart c = builtin_relation("model_c0");
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd p = rng.box(c.box_lo, c.box_hi);
    const double lambda = rng.uniform(0.5, 3.0);
    Eigen::VectorXd q = p;
    q[4] *= lambda;
    q[5] *= lambda;
    RelationPoint a = c.at(p), b = c.at(q);
    CHECK((b.left.base - a.left.base).norm() == 0.0);
    CHECK((b.right.base - a.right.base).norm() < 1e-12);
    CHECK((b.left.covector - lambda * a.left.covector).norm() <
          1e-10 * a.left.covector.norm());
    CHECK((b.right.covector - lambda * a.right.covector).norm() <
          1e-10 * a.right.covector.norm());
  }
}

TEST_CASE("curve nondegeneracy") {
  SUBCASE("moment-type curve has constant frame determinant 288") {
    RelationChart c = builtin_relation("curve_r4");
    CHECK(c.name == "curve_r4");
    CurveParams params;
    params.coeffs = {{0, 1}, {0, 0, 1}, {0, 0, 0, 1}, {0, 0, 0, 0, 1}};
    SmoothMap gamma(1, 4,
                    [](std::span<const Jet> t) {
                      Jet t2 = t[0] * t[0];
                      return std::vector<Jet>{t[0], t2, t2 * t[0], t2 * t2};
                    },
                    "gamma");
    CHECK(curve_nondegeneracy_check(gamma, -1, 1) == doctest::Approx(288.0));
  }
  SUBCASE("planar curve is degenerate") {
    SmoothMap gamma(1, 4,
                    [](std::span<const Jet> t) {
                      TablePtr tab = t[0].table();
                      return std::vector<Jet>{t[0], t[0] * t[0], Jet::constant(tab, 0.0),
                                              Jet::constant(tab, 0.0)};
                    },
                    "planar");
    CHECK(curve_nondegeneracy_check(gamma, -1, 1) == doctest::Approx(0.0));
    CurveParams params;
    params.coeffs = {{0, 1}, {0, 0, 1}, {0}, {0}};
    CHECK_THROWS_AS((void)builtin_relation("curve_r4", {params, "model"}), DegenerateCurve);
  }
  SUBCASE("grid scan min for (t, t^2, t^4, t^5) on [0.1, 1]") {
    SmoothMap gamma(1, 4,
                    [](std::span<const Jet> t) {
                      Jet t2 = t[0] * t[0];
                      return std::vector<Jet>{t[0], t2, t2 * t2, t2 * t2 * t[0]};
                    },
                    "gamma");
    // frame determinant is 2880 t^2, so the sampled minimum sits at t = 0.1
    CHECK(curve_nondegeneracy_check(gamma, 0.1, 1.0) == doctest::Approx(28.8).epsilon(1e-9));
  }
  SUBCASE("unknown name rejected") {
    CHECK_THROWS_AS((void)builtin_relation("no_such_chart"), UnknownName);
  }
}

TEST_CASE("canonical relation certificate: twisted isotropy below 1e-9") {
  Rng rng(23);
  for (const char* name : {"model_c0", "menn_c1", "curve_r4", "curve_r3", "weak_normal_form"}) {
    RelationChart c = builtin_relation(name);
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd p = rng.box(c.box_lo, c.box_hi);
      CHECK(canonical_relation_defect(c, p) < 1e-9);
    }
  }
}

TEST_CASE("weak normal form model variant reproduces model_c0") {
  RelationChart wnf = builtin_relation("weak_normal_form");
  RelationChart c0 = builtin_relation("model_c0");
  Rng rng(31);
  for (int i = 0; i < 25; ++i) {
    Eigen::VectorXd p = rng.box(c0.box_lo, c0.box_hi);
    CHECK((wnf.map.value(p) - c0.map.value(p)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((wnf.map.jacobian(p) - c0.map.jacobian(p)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("weak normal form validity margins") {
  WeakNormalFormPhase w;
  w.S2 = SmoothMap(6, 1, [](std::span<const Jet> v) { return std::vector<Jet>{v[1]}; }, "x2");
  w.S3 = SmoothMap(6, 1, [](std::span<const Jet> v) { return std::vector<Jet>{-v[5]}; }, "-t3");
  w.S4 = SmoothMap(6, 1,
                   [](std::span<const Jet> v) {
                     return std::vector<Jet>{Jet::constant(v[0].table(), -1.0)};
                   },
                   "-1");
  Eigen::VectorXd lo(6), hi(6);
  lo << -1, -1, -1, -1, -2, 0.5;
  hi << 1, 1, 1, 1, 2, 2;
  CHECK(w.validate(lo, hi, 100) >= 0.5);  // S3 margin is min |theta3| = 0.5
}

TEST_SUITE_END();
