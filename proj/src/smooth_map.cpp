#include "microlocal/smooth_map.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace microlocal {

SmoothMap::SmoothMap(int in, int out, EvalFn fn, std::string label)
    : in_(in), out_(out), fn_(std::move(fn)), label_(std::move(label)) {}

std::vector<Jet> SmoothMap::jets(Eigen::Ref<const Eigen::VectorXd> x, int order) const {
  if (x.size() != in_) throw Error("SmoothMap: point dimension mismatch");
  TablePtr tab = IndexTable::get(in_, order);
  std::vector<Jet> seeds = Jet::seed(tab, x);
  std::vector<Jet> out = fn_(seeds);
  if (static_cast<int>(out.size()) != out_) throw Error("SmoothMap: component count mismatch");
  return out;
}

std::vector<Jet> SmoothMap::operator()(std::span<const Jet> in) const {
  if (static_cast<int>(in.size()) != in_) throw Error("SmoothMap: input arity mismatch");
  return fn_(in);
}

Eigen::VectorXd SmoothMap::value(Eigen::Ref<const Eigen::VectorXd> x) const {
  std::vector<Jet> js = jets(x, 0);
  Eigen::VectorXd v(out_);
  for (int i = 0; i < out_; ++i) v[i] = js[i].value();
  return v;
}

Eigen::MatrixXd SmoothMap::jacobian(Eigen::Ref<const Eigen::VectorXd> x) const {
  std::vector<Jet> js = jets(x, 1);
  Eigen::MatrixXd m(out_, in_);
  for (int i = 0; i < out_; ++i) m.row(i) = js[i].gradient().transpose();
  return m;
}

Jet SmoothMap::scalar(std::span<const Jet> in) const {
  if (out_ != 1) throw Error("SmoothMap: scalar() on non-scalar map");
  return fn_(in)[0];
}

std::vector<Jet> jet_of_map(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> x, int order) {
  if (order < 0 || order > 4) throw Error("jet_of_map: unsupported order");
  return f.jets(x, order);
}

std::vector<double> central_fd_weights(int k, int accuracy) {
  int width = k + accuracy - 1;
  if (width % 2 == 0) width += 1;
  const int n = width;           // number of nodes
  const int half = (n - 1) / 2;  // nodes at -half..half
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = i - half;
  // Fornberg 1988, weights for derivative order k at x=0.
  std::vector<std::vector<double>> c(n, std::vector<double>(k + 1, 0.0));
  c[0][0] = 1.0;
  double c1 = 1.0;
  double c4 = xs[0];
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, k);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int m = mn; m >= 1; --m)
          c[i][m] = c1 * (m * c[i - 1][m - 1] - c5 * c[i - 1][m]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int m = mn; m >= 1; --m) c[j][m] = (c4 * c[j][m] - m * c[j][m - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = c[i][k];
  return out;
}

namespace {

// The round-off error of a tensored stencil scales like eps / prod h_i^k_i,
// so both the step and the stencil accuracy are chosen from the total
// derivative order of the multi-index, not per axis.
int default_accuracy(int total) { return total <= 2 ? 2 : 4; }

double default_step(int total, int accuracy, double xmag) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  return std::pow(eps, 1.0 / (total + accuracy)) * (1.0 + xmag);
}

}  // namespace

Eigen::VectorXd fd_partial(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> x,
                           const MultiIndex& alpha, double h) {
  int total = 0;
  for (int v : alpha) total += v;
  const int acc = default_accuracy(total);
  struct Axis {
    int var;
    std::vector<double> weights;
    int half;
    double step;
  };
  std::vector<Axis> axes;
  for (size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] == 0) continue;
    std::vector<double> wts = central_fd_weights(alpha[i], acc);
    const double step = h > 0.0 ? h : default_step(total, acc, std::abs(x[i]));
    const int half = static_cast<int>(wts.size() - 1) / 2;
    axes.push_back({static_cast<int>(i), std::move(wts), half, step});
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(f.out());
  if (axes.empty()) return f.value(x);

  // Stencil weights sum to zero, so shifting by f(x) keeps the result
  // exact for constants and trims cancellation noise elsewhere.
  const Eigen::VectorXd f0 = f.value(x);
  std::vector<int> idx(axes.size(), 0);
  Eigen::VectorXd p = x;
  while (true) {
    double wprod = 1.0;
    for (size_t a = 0; a < axes.size(); ++a) {
      wprod *= axes[a].weights[idx[a]];
      p[axes[a].var] = x[axes[a].var] + (idx[a] - axes[a].half) * axes[a].step;
    }
    if (wprod != 0.0) sum += wprod * (f.value(p) - f0);
    size_t a = 0;
    for (; a < axes.size(); ++a) {
      if (++idx[a] < static_cast<int>(axes[a].weights.size())) break;
      idx[a] = 0;
      p[axes[a].var] = x[axes[a].var];
    }
    if (a == axes.size()) break;
  }
  double scale = 1.0;
  for (const auto& a : axes) {
    int k = alpha[a.var];
    scale *= std::pow(a.step, k);
  }
  return sum / scale;
}

std::vector<Jet> fd_jets(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> x, int order,
                         double h) {
  TablePtr tab = IndexTable::get(f.in(), order);
  std::vector<Jet> out(f.out(), Jet(tab));
  for (int r = 0; r < tab->size(); ++r) {
    Eigen::VectorXd d = fd_partial(f, x, tab->index(r), h);
    for (int i = 0; i < f.out(); ++i) out[i].coeff(r) = d[i] / tab->factorial(r);
  }
  return out;
}

double finite_diff_check(const SmoothMap& f, Eigen::Ref<const Eigen::VectorXd> x, int order,
                         double h) {
  std::vector<Jet> js = f.jets(x, order);
  TablePtr tab = js[0].table();
  double worst = 0.0;
  for (int r = 1; r < tab->size(); ++r) {
    Eigen::VectorXd d = fd_partial(f, x, tab->index(r), h);
    for (int i = 0; i < f.out(); ++i) {
      const double jd = js[i].coeff(r) * tab->factorial(r);
      worst = std::max(worst, std::abs(jd - d[i]) / (1.0 + std::abs(jd)));
    }
  }
  return worst;
}

Jet jet_implicit_solve(const std::function<Jet(std::span<const Jet>, const Jet&)>& F,
                       std::span<const Jet> u, double t0) {
  TablePtr tab = u[0].table();
  TablePtr t1 = IndexTable::get(1, 1);
  std::vector<Jet> u1;
  for (const Jet& j : u) u1.push_back(Jet::constant(t1, j.value()));
  auto value_and_slope = [&](double t) {
    Jet r = F(u1, Jet::variable(t1, 0, t));
    return std::pair<double, double>(r.value(), r.gradient()[0]);
  };

  // Scalar Newton for the value part.
  double t = t0;
  bool ok = false;
  for (int it = 0; it < 60; ++it) {
    auto [val, der] = value_and_slope(t);
    if (std::abs(der) < 1e-300) throw DegenerateJacobian("implicit solve: dF/dt = 0");
    const double step = val / der;
    t -= step;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(t))) {
      ok = true;
      break;
    }
  }
  if (!ok) throw NoConvergence("implicit solve: value Newton stalled");

  // Modified Newton with the slope frozen at the value point. The error is
  // purely nilpotent, and each pass raises its lowest degree, so order()
  // passes make the jet exact.
  const double der = value_and_slope(t).second;
  Jet tj = Jet::constant(tab, t);
  for (int it = 0; it < tab->order() + 1; ++it) tj -= F(u, tj) * (1.0 / der);
  return tj;
}

std::vector<Jet> jet_partials_extended(const SmoothMap& F, std::span<const Jet> in, int slot) {
  TablePtr ft = in[0].table();
  const int d = ft->dim();
  const int order = ft->order();
  if (order > 3) throw Error("jet_partials_extended: input order must be <= 3");
  TablePtr ext = IndexTable::get(d + 1, order + 1);

  auto lift = [&](const Jet& j, bool add_s) {
    Jet out(ext);
    MultiIndex mi(d + 1, 0);
    for (int r = 0; r < ft->size(); ++r) {
      const MultiIndex& src = ft->index(r);
      for (int k = 0; k < d; ++k) mi[k] = src[k];
      mi[d] = 0;
      out.coeff(ext->rank(mi)) = j.coeff(r);
    }
    if (add_s) {
      MultiIndex s(d + 1, 0);
      s[d] = 1;
      out.coeff(ext->rank(s)) += 1.0;
    }
    return out;
  };

  std::vector<Jet> lifted;
  lifted.reserve(in.size());
  for (size_t i = 0; i < in.size(); ++i) lifted.push_back(lift(in[i], static_cast<int>(i) == slot));
  std::vector<Jet> vals = F(lifted);

  std::vector<Jet> out;
  out.reserve(vals.size());
  MultiIndex mi(d + 1, 0);
  for (const Jet& v : vals) {
    Jet o(ft);
    for (int r = 0; r < ft->size(); ++r) {
      const MultiIndex& src = ft->index(r);
      for (int k = 0; k < d; ++k) mi[k] = src[k];
      mi[d] = 1;
      o.coeff(r) = v.coeff(ext->rank(mi));
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace microlocal
