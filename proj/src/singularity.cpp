#include "microlocal/singularity.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace microlocal {

std::string to_string(SingularityClass c) {
  switch (c) {
    case SingularityClass::graph: return "graph";
    case SingularityClass::fold: return "fold";
    case SingularityClass::cusp: return "cusp";
    default: return "degenerate";
  }
}

std::pair<Eigen::MatrixXd, double> projection_jacobian(const RelationChart& chart, Side side,
                                                       Eigen::Ref<const Eigen::VectorXd> p) {
  Eigen::MatrixXd j = chart.projection(side).jacobian(p);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
  return {j, lu.determinant()};
}

namespace {

struct DetJets {
  Eigen::MatrixXd J;       // value matrix
  double det = 0.0;
  Eigen::VectorXd grad;    // gradient of det over parameters
  Eigen::MatrixXd hess;    // Hessian of det
  double scale = 1.0;      // max |entry|
};

DetJets det_jets(const SmoothMap& f, const Eigen::VectorXd& p, int order) {
  const int d = f.in();
  std::vector<Jet> comps = f.jets(p, order);
  std::vector<std::vector<Jet>> entries(d, std::vector<Jet>(d));
  DetJets out;
  out.J.resize(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      entries[i][j] = comps[i].partial(j);
      out.J(i, j) = entries[i][j].value();
    }
  Jet det = jet_det(entries);
  out.det = det.value();
  if (order >= 2) out.grad = det.gradient();
  if (order >= 3) out.hess = det.hessian();
  out.scale = std::max(1e-300, out.J.cwiseAbs().maxCoeff());
  return out;
}

Eigen::VectorXd kernel_direction(const Eigen::MatrixXd& J) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
  return svd.matrixV().col(J.cols() - 1);
}

}  // namespace

SingularityReport classify_map(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> p,
                               const ClassifyOptions& opts) {
  if (f.in() != f.out()) throw Error("classify_map: map must be square");
  return classify_jets(f.jets(p, 3), p, opts);
}

SingularityReport classify_jets(const std::vector<Jet>& comps,
                                Eigen::Ref<const Eigen::VectorXd> p,
                                const ClassifyOptions& opts) {
  const int d = static_cast<int>(comps.size());
  if (comps[0].dim() != d) throw Error("classify_jets: map must be square");
  DetJets dj;
  {
    std::vector<std::vector<Jet>> entries(d, std::vector<Jet>(d));
    dj.J.resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        entries[i][j] = comps[i].partial(j);
        dj.J(i, j) = entries[i][j].value();
      }
    Jet det = jet_det(entries);
    dj.det = det.value();
    dj.grad = det.gradient();
    dj.hess = det.hessian();
    dj.scale = std::max(1e-300, dj.J.cwiseAbs().maxCoeff());
  }

  SingularityReport rep;
  rep.point = p;
  rep.det = dj.det;
  rep.grad_det = dj.grad;
  rep.residuals["det"] = dj.det;
  rep.residuals["scale"] = dj.scale;

  if (std::abs(dj.det) > opts.tol_det * dj.scale) {
    rep.cls = SingularityClass::graph;
    return rep;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dj.J, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double sv_scale = std::max(sv(0), 1e-150);
  rep.residuals["corank_gap"] = sv(d - 2) / sv_scale;
  if (sv(d - 2) < opts.tol_corank * sv_scale) {
    rep.cls = SingularityClass::degenerate;  // corank >= 2, outside scope
    rep.residuals["corank"] = 2;
    return rep;
  }
  rep.kernel = svd.matrixV().col(d - 1);
  // Deterministic orientation (the SVD sign is arbitrary): largest-magnitude
  // component positive, so kernel-directional quantities compare across
  // nearby points.
  int imax = 0;
  for (int i = 1; i < d; ++i)
    if (std::abs(rep.kernel[i]) > std::abs(rep.kernel[imax])) imax = i;
  if (rep.kernel[imax] < 0) rep.kernel = -rep.kernel;

  const double gnorm = dj.grad.norm();
  rep.residuals["grad_norm"] = gnorm;
  if (gnorm < opts.tol_dir * dj.scale) {
    rep.cls = SingularityClass::degenerate;  // det does not vanish simply
    return rep;
  }

  const double ddet_v = dj.grad.dot(rep.kernel);
  rep.residuals["ddet_v"] = ddet_v;
  if (std::abs(ddet_v) > opts.tol_dir * gnorm) {
    rep.cls = SingularityClass::fold;
    return rep;
  }

  const Eigen::VectorXd hv = dj.hess * rep.kernel;
  const double d2 = rep.kernel.dot(hv);
  rep.residuals["d2det_vv"] = d2;
  const double hscale = std::max(dj.hess.cwiseAbs().maxCoeff(), gnorm);
  Eigen::MatrixXd pair(2, d);
  pair.row(0) = dj.grad.transpose() / gnorm;
  pair.row(1) = hv.transpose() / std::max(hv.norm(), 1e-300);
  Eigen::JacobiSVD<Eigen::MatrixXd> psvd(pair);
  rep.residuals["rank2_sigma"] = psvd.singularValues()(1);

  if (std::abs(d2) > opts.tol_dir * hscale && psvd.singularValues()(1) > opts.tol_dir) {
    rep.cls = SingularityClass::cusp;
  } else {
    rep.cls = SingularityClass::degenerate;
  }
  return rep;
}

SingularityReport classify_point(const RelationChart& chart, Side side,
                                 Eigen::Ref<const Eigen::VectorXd> p,
                                 const ClassifyOptions& opts) {
  SingularityReport rep = classify_map(chart.projection(side), p, opts);
  rep.side = side;
  return rep;
}

Eigen::VectorXd sigma1_solve(const RelationChart& chart, Side side,
                             Eigen::Ref<const Eigen::VectorXd> seed,
                             const std::vector<int>& free_indices, const NewtonOptions& opts) {
  SmoothMap proj = chart.projection(side);
  std::vector<int> idx = free_indices;
  if (idx.empty())
    for (int i = 0; i < chart.dim(); ++i) idx.push_back(i);
  Eigen::VectorXd base = seed;
  auto assemble = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd p = base;
    for (size_t i = 0; i < idx.size(); ++i) p[idx[i]] = u[i];
    return p;
  };
  auto F = [&](const Eigen::VectorXd& u) {
    DetJets dj = det_jets(proj, assemble(u), 1);
    Eigen::VectorXd r(1);
    r << dj.det / dj.scale;
    return r;
  };
  auto J = [&](const Eigen::VectorXd& u) {
    DetJets dj = det_jets(proj, assemble(u), 2);
    Eigen::MatrixXd jac(1, idx.size());
    for (size_t i = 0; i < idx.size(); ++i) jac(0, i) = dj.grad[idx[i]] / dj.scale;
    return jac;
  };
  Eigen::VectorXd u0(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) u0[i] = seed[idx[i]];
  NewtonResult res = gauss_newton_min_norm(F, J, u0, opts);
  if (!res.converged) throw NoConvergence("sigma1_solve: no root of det d(pi) near seed");
  return assemble(res.x);
}

Eigen::VectorXd sigma11_solve(const RelationChart& chart, Side side,
                              Eigen::Ref<const Eigen::VectorXd> seed, std::vector<int> unknowns,
                              const NewtonOptions& opts) {
  SmoothMap proj = chart.projection(side);
  const int d = chart.dim();

  auto system = [&](const Eigen::VectorXd& p) {
    DetJets dj = det_jets(proj, p, 3);
    Eigen::VectorXd v = kernel_direction(dj.J);
    Eigen::Vector2d r(dj.det / dj.scale, dj.grad.dot(v) / dj.scale);
    Eigen::MatrixXd jac(2, d);
    jac.row(0) = dj.grad.transpose() / dj.scale;
    jac.row(1) = (dj.hess * v).transpose() / dj.scale;  // kernel frozen per iterate
    return std::pair<Eigen::Vector2d, Eigen::MatrixXd>(r, jac);
  };

  if (unknowns.empty()) {
    // Pick the pair of parameters on which the cusp system is best conditioned.
    auto [r0, j0] = system(seed);
    double best = -1.0;
    for (int a = 0; a < d; ++a) {
      for (int b = a + 1; b < d; ++b) {
        Eigen::Matrix2d sub;
        sub << j0(0, a), j0(0, b), j0(1, a), j0(1, b);
        Eigen::JacobiSVD<Eigen::Matrix2d> svd(sub);
        if (svd.singularValues()(1) > best) {
          best = svd.singularValues()(1);
          unknowns = {a, b};
        }
      }
    }
  }
  if (unknowns.size() != 2) throw Error("sigma11_solve: exactly two unknowns required");

  Eigen::VectorXd base = seed;
  auto assemble = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd p = base;
    p[unknowns[0]] = u[0];
    p[unknowns[1]] = u[1];
    return p;
  };
  auto F = [&](const Eigen::VectorXd& u) {
    return Eigen::VectorXd(system(assemble(u)).first);
  };
  auto J = [&](const Eigen::VectorXd& u) {
    Eigen::MatrixXd full = system(assemble(u)).second;
    Eigen::Matrix2d sub;
    sub << full(0, unknowns[0]), full(0, unknowns[1]), full(1, unknowns[0]), full(1, unknowns[1]);
    return Eigen::MatrixXd(sub);
  };
  Eigen::Vector2d u0(seed[unknowns[0]], seed[unknowns[1]]);
  NewtonResult res = newton_solve(F, J, u0, opts);
  if (!res.converged) throw NoConvergence("sigma11_solve: cusp system did not converge");
  Eigen::VectorXd root = assemble(res.x);
  SingularityReport rep = classify_point(chart, side, root);
  if (rep.cls != SingularityClass::cusp)
    throw NotACusp("sigma11_solve: root classifies as " + to_string(rep.cls));
  return root;
}

std::vector<CotangentPoint> image_of_cusp_set(const RelationChart& chart, Side side,
                                              const std::vector<Eigen::VectorXd>& samples) {
  std::vector<CotangentPoint> out;
  const int n = side == Side::left ? chart.nx : chart.ny;
  SmoothMap proj = chart.projection(side);
  for (const auto& p : samples) {
    Eigen::VectorXd v = proj.value(p);
    out.push_back({v.segment(0, n), v.segment(n, n)});
  }
  return out;
}

namespace {

// Linear defining pair of the cusp-set image built from sampled tangent
// data: push TSigma11 through d(pi), take the Euclidean complement.
std::vector<SmoothMap> tangent_defining_pair(const RelationChart& chart, Side side,
                                             const Eigen::VectorXd& root) {
  SmoothMap proj = chart.projection(side);
  DetJets dj = det_jets(proj, root, 3);
  Eigen::VectorXd v = kernel_direction(dj.J);
  Eigen::MatrixXd conds(2, chart.dim());
  conds.row(0) = dj.grad.transpose();
  conds.row(1) = (dj.hess * v).transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(conds);
  Eigen::MatrixXd tangent = lu.kernel();  // basis of TSigma11 in parameter space
  Eigen::MatrixXd pushed = dj.J * tangent;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pushed, Eigen::ComputeFullU);
  const int m = static_cast<int>(pushed.rows());
  Eigen::VectorXd a1 = svd.matrixU().col(m - 2);
  Eigen::VectorXd a2 = svd.matrixU().col(m - 1);
  Eigen::VectorXd z0 = proj.value(root);
  auto linear_form = [m](Eigen::VectorXd a, Eigen::VectorXd z0v, const std::string& label) {
    return SmoothMap(m, 1,
                     [a, z0v](std::span<const Jet> z) {
                       Jet acc = Jet::constant(z[0].table(), 0.0);
                       for (int i = 0; i < a.size(); ++i) acc += a[i] * (z[i] - z0v[i]);
                       return std::vector<Jet>{acc};
                     },
                     label);
  };
  return {linear_form(a1, z0, "tangent_pair_1"), linear_form(a2, z0, "tangent_pair_2")};
}

void dedupe(std::vector<Eigen::VectorXd>& pts, double tol) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& p : pts) {
    bool fresh = true;
    for (const auto& q : out)
      if ((p - q).norm() < tol) {
        fresh = false;
        break;
      }
    if (fresh) out.push_back(p);
  }
  pts.swap(out);
}

}  // namespace

FlatCuspCertificate flat_two_sided_cusp_check(const RelationChart& chart,
                                              const SamplePlan& plan) {
  FlatCuspCertificate cert;
  cert.chart = chart.name;
  Eigen::VectorXd lo = plan.box_lo.size() ? plan.box_lo : chart.box_lo;
  Eigen::VectorXd hi = plan.box_hi.size() ? plan.box_hi : chart.box_hi;
  if (!lo.size()) throw Error("flat_two_sided_cusp_check: no sampling box");
  Rng rng(plan.rng_seed);

  // (i) every located singular point classifies as fold or cusp. Roots that
  // escape the declared region are not samples of it and are dropped.
  auto in_box = [&](const Eigen::VectorXd& p) {
    const Eigen::VectorXd margin = 0.05 * (hi - lo);
    for (int i = 0; i < p.size(); ++i)
      if (p[i] < lo[i] - margin[i] || p[i] > hi[i] + margin[i]) return false;
    return true;
  };
  std::vector<Eigen::VectorXd> sigma1_roots;
  for (int s = 0; s < plan.sigma1_seeds; ++s) {
    Eigen::VectorXd seed = rng.box(lo, hi);
    try {
      Eigen::VectorXd root = sigma1_solve(chart, Side::left, seed);
      if (in_box(root)) sigma1_roots.push_back(root);
    } catch (const NoConvergence&) {
    }
  }
  dedupe(sigma1_roots, 1e-5);
  for (const auto& p : sigma1_roots) {
    for (Side side : {Side::left, Side::right}) {
      SingularityReport rep = classify_point(chart, side, p, plan.classify);
      if (rep.cls == SingularityClass::degenerate || rep.cls == SingularityClass::graph)
        cert.at_most_cusps = false;
    }
  }

  // Cusp roots on both sides.
  std::vector<Eigen::VectorXd> left_roots, right_roots;
  for (int s = 0; s < plan.sigma11_seeds; ++s) {
    Eigen::VectorXd seed = rng.box(lo, hi);
    try {
      Eigen::VectorXd root = sigma11_solve(chart, Side::left, seed);
      if (in_box(root)) left_roots.push_back(root);
    } catch (const Error&) {
    }
    try {
      Eigen::VectorXd root = sigma11_solve(chart, Side::right, seed);
      if (in_box(root)) right_roots.push_back(root);
    } catch (const Error&) {
    }
  }
  dedupe(left_roots, 1e-6);
  dedupe(right_roots, 1e-6);
  cert.cusps_found = !left_roots.empty() && !right_roots.empty();
  cert.cusp_points = left_roots;
  if (!cert.cusps_found) {
    cert.notes = "no cusp points found in the sampled region";
    return cert;
  }

  // (ii) left and right cusp systems vanish at the same parameter points.
  SmoothMap proj_l = chart.projection(Side::left);
  SmoothMap proj_r = chart.projection(Side::right);
  for (const auto& p : left_roots) {
    DetJets dr = det_jets(proj_r, p, 2);
    Eigen::VectorXd v = kernel_direction(dr.J);
    cert.residual_cusp_pair = std::max(cert.residual_cusp_pair, std::abs(dr.det) / dr.scale);
    cert.residual_cusp_pair =
        std::max(cert.residual_cusp_pair, std::abs(dr.grad.dot(v)) / dr.scale);
    try {
      Eigen::VectorXd q = sigma11_solve(chart, Side::right, p);
      cert.max_root_distance = std::max(cert.max_root_distance, (p - q).norm());
    } catch (const Error&) {
      cert.max_root_distance = std::numeric_limits<double>::infinity();
    }
  }
  cert.cusp_sets_equal = cert.residual_cusp_pair < 1e-8 && cert.max_root_distance < 1e-8;

  // (iii) coisotropy and nonradiality of the cusp-set images.
  cert.coisotropic = true;
  cert.nonradial = true;
  cert.min_nonradial_gap = std::numeric_limits<double>::infinity();
  for (const auto& p : left_roots) {
    for (Side side : {Side::left, Side::right}) {
      const auto& registered =
          side == Side::left ? chart.cusp_image_left : chart.cusp_image_right;
      std::vector<SmoothMap> pair =
          registered.size() == 2 ? registered : tangent_defining_pair(chart, side, p);
      Eigen::VectorXd image = chart.projection(side).value(p);
      try {
        CoisotropyResult co = coisotropic_check(pair[0], pair[1], image);
        cert.max_coisotropy_residual = std::max(cert.max_coisotropy_residual, co.residual);
        if (!co.coisotropic) cert.coisotropic = false;
        NonradialResult nr = nonradial_check(pair[0], pair[1], image);
        cert.min_nonradial_gap = std::min(cert.min_nonradial_gap, nr.rank_gap);
        if (!nr.nonradial) cert.nonradial = false;
      } catch (const Error& e) {
        cert.coisotropic = false;
        cert.nonradial = false;
        cert.notes += std::string("condition (iii) check failed: ") + e.what() + "; ";
      }
    }
  }
  cert.notes += "sampled box recorded in plan";
  return cert;
}

}  // namespace microlocal
