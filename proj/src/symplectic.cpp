#include "microlocal/symplectic.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "microlocal/errors.hpp"
#include "microlocal/newton.hpp"

namespace microlocal {

SymplecticPairing SymplecticPairing::cotangent(int n) {
  SymplecticPairing s;
  s.ambient = 2 * n;
  for (int j = 0; j < n; ++j) {
    s.q_idx.push_back(j);
    s.p_idx.push_back(n + j);
    s.sign.push_back(1.0);
  }
  return s;
}

SymplecticPairing SymplecticPairing::twisted_product(int nx, int ny) {
  SymplecticPairing s;
  s.ambient = 2 * nx + 2 * ny;
  for (int j = 0; j < nx; ++j) {
    s.q_idx.push_back(j);
    s.p_idx.push_back(nx + j);
    s.sign.push_back(1.0);
  }
  for (int j = 0; j < ny; ++j) {
    s.q_idx.push_back(2 * nx + j);
    s.p_idx.push_back(2 * nx + ny + j);
    s.sign.push_back(-1.0);
  }
  return s;
}

double SymplecticPairing::omega(Eigen::Ref<const Eigen::VectorXd> u,
                                Eigen::Ref<const Eigen::VectorXd> w) const {
  double acc = 0.0;
  for (size_t k = 0; k < q_idx.size(); ++k)
    acc += sign[k] * (u[p_idx[k]] * w[q_idx[k]] - u[q_idx[k]] * w[p_idx[k]]);
  return acc;
}

Eigen::VectorXd SymplecticPairing::hamiltonian_of_linear(Eigen::Ref<const Eigen::VectorXd> a) const {
  // i_H omega = df with f = <a, .>: H_q = -s a_p, H_p = s a_q per pair.
  Eigen::VectorXd h = Eigen::VectorXd::Zero(ambient);
  for (size_t k = 0; k < q_idx.size(); ++k) {
    h[q_idx[k]] = -sign[k] * a[p_idx[k]];
    h[p_idx[k]] = sign[k] * a[q_idx[k]];
  }
  return h;
}

double poisson_bracket(const SmoothMap& f, const SmoothMap& g,
                       Eigen::Ref<const Eigen::VectorXd> pt) {
  if (f.in() != g.in() || f.in() % 2 != 0) throw Error("poisson_bracket: bad dimensions");
  const int n = f.in() / 2;
  Eigen::VectorXd df = f.jets(pt, 1)[0].gradient();
  Eigen::VectorXd dg = g.jets(pt, 1)[0].gradient();
  double acc = 0.0;
  for (int j = 0; j < n; ++j) acc += df[n + j] * dg[j] - df[j] * dg[n + j];
  return acc;
}

namespace {

void check_on_set(const SmoothMap& f1, const SmoothMap& f2, Eigen::Ref<const Eigen::VectorXd> pt,
                  Eigen::VectorXd& g1, Eigen::VectorXd& g2) {
  auto j1 = f1.jets(pt, 1)[0];
  auto j2 = f2.jets(pt, 1)[0];
  g1 = j1.gradient();
  g2 = j2.gradient();
  const double scale = std::max({1.0, g1.norm() * pt.norm(), g2.norm() * pt.norm()});
  if (std::abs(j1.value()) > 1e-8 * scale || std::abs(j2.value()) > 1e-8 * scale)
    throw NotOnSet("defining functions do not vanish at the point");
  Eigen::MatrixXd G(2, pt.size());
  G.row(0) = g1.transpose();
  G.row(1) = g2.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  if (svd.singularValues()(1) < 1e-10 * svd.singularValues()(0))
    throw DependentDefiners("defining differentials are dependent at the point");
}

}  // namespace

CoisotropyResult coisotropic_check(const SmoothMap& f1, const SmoothMap& f2,
                                   Eigen::Ref<const Eigen::VectorXd> pt, double tol) {
  Eigen::VectorXd g1, g2;
  check_on_set(f1, f2, pt, g1, g2);
  CoisotropyResult r;
  r.residual = std::abs(poisson_bracket(f1, f2, pt)) / std::max(1.0, g1.norm() * g2.norm());
  r.coisotropic = r.residual < tol;
  return r;
}

NonradialResult nonradial_check(const SmoothMap& f1, const SmoothMap& f2,
                                Eigen::Ref<const Eigen::VectorXd> pt, double tol) {
  Eigen::VectorXd g1, g2;
  check_on_set(f1, f2, pt, g1, g2);
  const int n = f1.in() / 2;
  SymplecticPairing pairing = SymplecticPairing::cotangent(n);
  Eigen::VectorXd h1 = pairing.hamiltonian_of_linear(g1);
  Eigen::VectorXd h2 = pairing.hamiltonian_of_linear(g2);
  Eigen::VectorXd radial = Eigen::VectorXd::Zero(2 * n);
  radial.tail(n) = pt.tail(n);
  Eigen::MatrixXd m(2 * n, 3);
  m.col(0) = h1.normalized();
  m.col(1) = h2.normalized();
  if (radial.norm() == 0.0) throw Error("nonradial_check: zero covector");
  m.col(2) = radial.normalized();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  NonradialResult r;
  r.rank_gap = svd.singularValues()(2);
  r.nonradial = r.rank_gap > tol;
  return r;
}

double isotropy_defect(const LagrangianInclusion& psi, Eigen::Ref<const Eigen::VectorXd> p) {
  Eigen::MatrixXd j = psi.map.jacobian(p);
  double worst = 0.0;
  for (int a = 0; a < j.cols(); ++a)
    for (int b = a + 1; b < j.cols(); ++b)
      worst = std::max(worst, std::abs(psi.pairing.omega(j.col(a), j.col(b))));
  return worst;
}

namespace {

// Scale-normalized defect used by the umbrella probes.
double isotropy_defect_scaled(const LagrangianInclusion& psi, const Eigen::VectorXd& p) {
  Eigen::MatrixXd j = psi.map.jacobian(p);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
  const double s1 = svd.singularValues()(0);
  double worst = 0.0;
  for (int a = 0; a < j.cols(); ++a)
    for (int b = a + 1; b < j.cols(); ++b)
      worst = std::max(worst, std::abs(psi.pairing.omega(j.col(a), j.col(b))));
  return worst / std::max(1e-300, s1 * s1);
}

}  // namespace

namespace {

// Jets (order 1) of the k x k minor with rows `rows` of d(psi) at p,
// normalized by the k-th power of the largest row norm of the full
// differential. A per-row normalization would be blind to rows that
// themselves vanish on the singular set.
Jet minor_jet(const LagrangianInclusion& psi, const Eigen::VectorXd& p,
              const std::vector<int>& rows) {
  const int k = psi.map.in();
  std::vector<Jet> comps = psi.map.jets(p, 2);
  double rowmax = 1e-12;
  for (int r = 0; r < psi.map.out(); ++r) {
    double rn = 0.0;
    for (int b = 0; b < k; ++b) {
      const double e = comps[r].partial(b).value();
      rn += e * e;
    }
    rowmax = std::max(rowmax, std::sqrt(rn));
  }
  std::vector<std::vector<Jet>> m(k, std::vector<Jet>(k));
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) m[a][b] = comps[rows[a]].partial(b);
  return jet_det(m) * std::pow(rowmax, -k);
}

double minor_value(const LagrangianInclusion& psi, const Eigen::VectorXd& p,
                   const std::vector<int>& rows) {
  const int k = psi.map.in();
  Eigen::MatrixXd j = psi.map.jacobian(p);
  const double rowmax = std::max(j.rowwise().norm().maxCoeff(), 1e-12);
  Eigen::MatrixXd sub(k, k);
  for (int a = 0; a < k; ++a) sub.row(a) = j.row(rows[a]);
  return sub.determinant() / std::pow(rowmax, k);
}

}  // namespace

namespace {

struct MinorPair {
  std::vector<int> rows1, rows2;
  bool ok = false;
};

// k-1 well-conditioned rows at `at`, then the two completion rows whose
// minor gradients are most independent.
MinorPair select_minor_pair(const LagrangianInclusion& psi, const Eigen::VectorXd& at) {
  const int k = psi.map.in();
  const int m = psi.map.out();
  Eigen::MatrixXd j0 = psi.map.jacobian(at);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(j0.transpose());  // pivots = rows of j0
  std::vector<int> base;
  for (int i = 0; i < k - 1; ++i)
    base.push_back(static_cast<int>(qr.colsPermutation().indices()(i)));
  std::vector<int> rest;
  for (int r = 0; r < m; ++r)
    if (std::find(base.begin(), base.end(), r) == base.end()) rest.push_back(r);

  struct Cand {
    std::vector<int> rows;
    Eigen::VectorXd grad;
  };
  std::vector<Cand> cands;
  for (int r : rest) {
    std::vector<int> rows = base;
    rows.push_back(r);
    std::sort(rows.begin(), rows.end());
    Eigen::VectorXd g = minor_jet(psi, at, rows).gradient();
    if (g.norm() < 1e-14) continue;
    cands.push_back({rows, g.normalized()});
  }
  MinorPair out;
  double best = -1.0;
  for (size_t a = 0; a < cands.size(); ++a) {
    for (size_t b = a + 1; b < cands.size(); ++b) {
      Eigen::MatrixXd g(2, psi.map.in());
      g.row(0) = cands[a].grad.transpose();
      g.row(1) = cands[b].grad.transpose();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
      const double indep = svd.singularValues()(1);
      if (indep > best) {
        best = indep;
        out.rows1 = cands[a].rows;
        out.rows2 = cands[b].rows;
      }
    }
  }
  out.ok = best > 0.0;
  return out;
}

}  // namespace

UmbrellaCertificate umbrella_check(const LagrangianInclusion& psi,
                                   Eigen::Ref<const Eigen::VectorXd> seed,
                                   const UmbrellaOptions& opts) {
  UmbrellaCertificate cert;
  const int k = psi.map.in();
  const int m = psi.map.out();
  if (m != 2 * k) throw Error("umbrella_check: map must go R^k -> R^2k");

  // Rows picked far from the singular set can degenerate on it, leaving
  // minors that vanish to second order; re-selecting at each located point
  // restores a simple zero, so iterate selection + Newton.
  MinorPair pair = select_minor_pair(psi, seed);
  if (!pair.ok) {
    cert.failing_condition = "no rank-drop conditions found (differential looks constant-rank)";
    return cert;
  }
  Eigen::VectorXd p = seed;
  NewtonOptions nopts;
  nopts.tol = opts.tol_root;
  auto jacobian_for = [&](const MinorPair& mp) {
    return [&psi, mp](const Eigen::VectorXd& q) {
      Eigen::MatrixXd jac(2, psi.map.in());
      jac.row(0) = minor_jet(psi, q, mp.rows1).gradient().transpose();
      jac.row(1) = minor_jet(psi, q, mp.rows2).gradient().transpose();
      return jac;
    };
  };
  bool located = false;
  for (int round = 0; round < 4 && !located; ++round) {
    auto residual = [&psi, &pair](const Eigen::VectorXd& q) {
      Eigen::VectorXd r(2);
      r << minor_value(psi, q, pair.rows1), minor_value(psi, q, pair.rows2);
      return r;
    };
    NewtonResult root = gauss_newton_min_norm(residual, jacobian_for(pair), p, nopts);
    if (!root.converged) {
      if (!std::isfinite(root.residual))
        throw NoConvergence("umbrella_check: minor Newton diverged");
      cert.failing_condition = "no rank drop located near seed";
      cert.singular_point = root.x;
      return cert;
    }
    p = root.x;
    Eigen::MatrixXd jp = psi.map.jacobian(p);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jp);
    if (svd.singularValues()(k - 1) / svd.singularValues()(0) < opts.tol_rank) {
      located = true;
      break;
    }
    MinorPair next = select_minor_pair(psi, p);
    if (!next.ok) break;
    pair = next;
  }
  cert.singular_point = p;

  Eigen::MatrixXd jp = psi.map.jacobian(p);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jp, Eigen::ComputeThinV);
  Eigen::VectorXd sv = svd.singularValues();
  const double s1 = sv(0);
  cert.rank_drop_sigma = sv(k - 1) / s1;
  cert.next_sigma = sv(k - 2) / s1;
  cert.kernel = svd.matrixV().col(k - 1);
  if (cert.rank_drop_sigma > opts.tol_rank) {
    cert.failing_condition = "differential does not drop rank at the located point";
    return cert;
  }
  if (cert.next_sigma < opts.tol_conditions) {
    cert.failing_condition = "rank drops by more than one";
    return cert;
  }

  // Simplicity: minor gradients independent at the root.
  Eigen::MatrixXd g = jacobian_for(pair)(p);
  Eigen::VectorXd g1 = g.row(0), g2 = g.row(1);
  Eigen::MatrixXd gn(2, k);
  gn.row(0) = g1.transpose() / g1.norm();
  gn.row(1) = g2.transpose() / g2.norm();
  Eigen::JacobiSVD<Eigen::MatrixXd> gsvd(gn);
  cert.simplicity_sigma = gsvd.singularValues()(1);
  if (cert.simplicity_sigma < opts.tol_conditions) {
    cert.failing_condition = "rank drop is not simple (minor gradients dependent)";
    return cert;
  }

  // Kernel transversality to the rank-drop set {M1 = M2 = 0}.
  const Eigen::Vector2d pairing(g1.dot(cert.kernel) / g1.norm(), g2.dot(cert.kernel) / g2.norm());
  cert.transversality_residual = pairing.norm();
  if (cert.transversality_residual < opts.tol_conditions) {
    cert.failing_condition = "kernel is tangent to the singular set";
    return cert;
  }

  // Lagrangian off the singular set: probe a ring of radii around p.
  Rng rng(opts.rng_seed);
  double worst = 0.0;
  for (int i = 0; i < opts.probes; ++i) {
    const double t = static_cast<double>(i) / std::max(1, opts.probes - 1);
    const double radius =
        opts.probe_radius_lo * std::pow(opts.probe_radius_hi / opts.probe_radius_lo, t);
    Eigen::VectorXd dir = rng.vector(k, -1.0, 1.0);
    if (dir.norm() < 1e-12) dir.setOnes();
    Eigen::VectorXd q = p + radius * dir.normalized();
    worst = std::max(worst, isotropy_defect_scaled(psi, q));
  }
  cert.max_isotropy_defect = worst;
  if (worst > opts.tol_isotropy) {
    cert.failing_condition = "range of d(psi) is not Lagrangian off the singular set";
    return cert;
  }

  cert.verdict = true;
  return cert;
}

LagrangianInclusion make_open_umbrella_model() {
  LagrangianInclusion u;
  u.name = "open_umbrella_U";
  u.pairing = SymplecticPairing::cotangent(2);
  u.map = SmoothMap(2, 4,
                    [](std::span<const Jet> v) {
                      const Jet& a = v[0];
                      const Jet& b = v[1];
                      return std::vector<Jet>{a * a, b, a * b, (2.0 / 3.0) * a * a * a};
                    },
                    "open_umbrella_U");
  u.singular_seed = Eigen::Vector2d(0.1, 0.1);
  return u;
}

LagrangianInclusion make_conic_umbrella_model() {
  LagrangianInclusion u;
  u.name = "conic_umbrella_Lambda1";
  u.pairing = SymplecticPairing::cotangent(3);
  u.map = SmoothMap(3, 6,
                    [](std::span<const Jet> v) {
                      const Jet& t = v[0];
                      const Jet& s = v[1];
                      const Jet& th = v[2];
                      Jet t3 = t * t * t;
                      return std::vector<Jet>{t * t,          s, (-2.0 / 3.0) * t3 * s,
                                              s * t * th, (2.0 / 3.0) * t3 * th, th};
                    },
                    "conic_umbrella_Lambda1");
  u.singular_seed = Eigen::Vector3d(0.1, 0.1, 1.0);
  return u;
}

}  // namespace microlocal
