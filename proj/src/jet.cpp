#include "microlocal/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace microlocal {

namespace {

uint64_t pack_key(const MultiIndex& mi) {
  uint64_t key = 0;
  for (size_t i = 0; i < mi.size(); ++i) key |= static_cast<uint64_t>(mi[i] & 0xF) << (4 * i);
  return key;
}

void enumerate(int dim, int order, int pos, int remaining, MultiIndex& cur,
               std::vector<MultiIndex>& out) {
  if (pos == dim) {
    out.push_back(cur);
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    cur[pos] = k;
    enumerate(dim, order, pos + 1, remaining - k, cur, out);
  }
  cur[pos] = 0;
}

}  // namespace

IndexTable::IndexTable(int dim, int order) : dim_(dim), order_(order) {
  if (dim < 1 || dim > 16) throw Error("jet dimension out of range [1,16]");
  if (order < 0 || order > 4) throw Error("jet order out of range [0,4]");
  // Graded order: enumerate degree by degree, lexicographic within a degree.
  prefix_.assign(order + 1, 0);
  for (int k = 0; k <= order; ++k) {
    std::vector<MultiIndex> layer;
    MultiIndex cur(dim, 0);
    enumerate(dim, k, 0, k, cur, layer);
    for (auto& mi : layer) {
      int deg = 0;
      for (int v : mi) deg += v;
      if (deg != k) continue;
      indices_.push_back(mi);
      degrees_.push_back(k);
    }
    prefix_[k] = static_cast<int>(indices_.size());
  }
  factorials_.resize(indices_.size());
  for (size_t r = 0; r < indices_.size(); ++r) {
    double f = 1.0;
    for (int v : indices_[r])
      for (int j = 2; j <= v; ++j) f *= j;
    factorials_[r] = f;
    lookup_[pack_key(indices_[r])] = static_cast<int>(r);
  }
  const size_t n = indices_.size();
  sum_.assign(n * n, -1);
  MultiIndex s(dim);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (degrees_[i] + degrees_[j] > order) continue;
      for (int k = 0; k < dim; ++k) s[k] = indices_[i][k] + indices_[j][k];
      sum_[i * n + j] = static_cast<int32_t>(lookup_.at(pack_key(s)));
    }
  }
}

std::shared_ptr<const IndexTable> IndexTable::get(int dim, int order) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const IndexTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{dim, order}];
  if (!slot) slot = std::shared_ptr<const IndexTable>(new IndexTable(dim, order));
  return slot;
}

int IndexTable::rank(const MultiIndex& mi) const {
  int deg = 0;
  for (int v : mi) deg += v;
  if (deg > order_) return -1;
  auto it = lookup_.find(pack_key(mi));
  return it == lookup_.end() ? -1 : it->second;
}

Jet Jet::constant(TablePtr tab, double v) {
  Jet j(std::move(tab));
  j.c_[0] = v;
  return j;
}

Jet Jet::variable(TablePtr tab, int i, double v) {
  Jet j(std::move(tab));
  j.c_[0] = v;
  if (j.tab_->order() >= 1) {
    MultiIndex e(j.tab_->dim(), 0);
    e[i] = 1;
    j.c_[j.tab_->rank(e)] = 1.0;
  }
  return j;
}

std::vector<Jet> Jet::seed(TablePtr tab, Eigen::Ref<const Eigen::VectorXd> x) {
  std::vector<Jet> out;
  out.reserve(x.size());
  for (int i = 0; i < x.size(); ++i) out.push_back(variable(tab, i, x[i]));
  return out;
}

double Jet::coeff(const MultiIndex& mi) const {
  int r = tab_->rank(mi);
  if (r < 0) throw Error("multi-index outside jet order");
  return c_[r];
}

double Jet::derivative(const MultiIndex& mi) const {
  int r = tab_->rank(mi);
  if (r < 0) throw Error("multi-index outside jet order");
  return c_[r] * tab_->factorial(r);
}

Eigen::VectorXd Jet::gradient() const {
  Eigen::VectorXd g(tab_->dim());
  MultiIndex e(tab_->dim(), 0);
  for (int i = 0; i < tab_->dim(); ++i) {
    e[i] = 1;
    g[i] = c_[tab_->rank(e)];
    e[i] = 0;
  }
  return g;
}

Eigen::MatrixXd Jet::hessian() const {
  const int d = tab_->dim();
  Eigen::MatrixXd h(d, d);
  MultiIndex e(d, 0);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      e[i] += 1;
      e[j] += 1;
      int r = tab_->rank(e);
      h(i, j) = h(j, i) = c_[r] * tab_->factorial(r);
      e[i] = 0;
      e[j] = 0;
    }
  }
  return h;
}

Jet Jet::partial(int i) const {
  TablePtr lower = IndexTable::get(tab_->dim(), tab_->order() - 1);
  Jet out(lower);
  for (int r = 0; r < lower->size(); ++r) {
    MultiIndex mi = lower->index(r);
    mi[i] += 1;
    int src = tab_->rank(mi);
    out.c_[r] = c_[src] * mi[i];
  }
  return out;
}

Jet Jet::operator-() const {
  Jet r = *this;
  for (int i = 0; i < r.c_.size(); ++i) r.c_[i] = -r.c_[i];
  return r;
}

Jet& Jet::operator+=(const Jet& o) {
  if (tab_ != o.tab_) throw Error("jet table mismatch");
  for (int i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  if (tab_ != o.tab_) throw Error("jet table mismatch");
  for (int i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (int i = 0; i < c_.size(); ++i) c_[i] *= s;
  return *this;
}

Jet operator*(const Jet& a, const Jet& b) {
  if (a.tab_ != b.tab_) throw Error("jet table mismatch");
  const IndexTable& t = *a.tab_;
  Jet out(a.tab_);
  const int n = t.size();
  for (int i = 0; i < n; ++i) {
    const double ai = a.c_[i];
    if (ai == 0.0) continue;
    const int jmax = t.count_to_degree(t.order() - t.degree(i));
    for (int j = 0; j < jmax; ++j) out.c_[t.sum_rank(i, j)] += ai * b.c_[j];
  }
  return out;
}

Jet univariate_compose(const Jet& g, std::span<const double> taylor) {
  // Horner on the zero-value part of g.
  Jet h = g;
  h.c_[0] = 0.0;
  const int order = g.order();
  Jet acc = Jet::constant(g.table(), taylor[order]);
  for (int k = order - 1; k >= 0; --k) {
    acc = acc * h;
    acc += taylor[k];
  }
  return acc;
}

Jet operator/(const Jet& a, const Jet& b) { return a * (1.0 / b); }

Jet operator/(double s, const Jet& b) {
  const double v = b.value();
  if (std::abs(v) < 1e-300) throw Error("jet division by zero value");
  std::array<double, 5> t{};
  double p = s / v;
  for (int k = 0; k <= b.order(); ++k) {
    t[k] = p;
    p = -p / v;
  }
  return univariate_compose(b, std::span<const double>(t.data(), b.order() + 1));
}

Jet exp(const Jet& g) {
  std::array<double, 5> t{};
  const double e = std::exp(g.value());
  double f = 1.0;
  for (int k = 0; k <= g.order(); ++k) {
    t[k] = e / f;
    f *= (k + 1);
  }
  return univariate_compose(g, std::span<const double>(t.data(), g.order() + 1));
}

Jet log(const Jet& g) {
  const double v = g.value();
  if (v <= 0.0) throw Error("jet log of non-positive value");
  std::array<double, 5> t{};
  t[0] = std::log(v);
  double p = 1.0 / v;
  for (int k = 1; k <= g.order(); ++k) {
    t[k] = (k % 2 == 1 ? 1.0 : -1.0) * p / k;
    p /= v;
  }
  return univariate_compose(g, std::span<const double>(t.data(), g.order() + 1));
}

Jet sqrt(const Jet& g) {
  const double v = g.value();
  if (v <= 0.0) throw Error("jet sqrt of non-positive value");
  std::array<double, 5> t{};
  const double s = std::sqrt(v);
  // binomial(1/2, k) * s / v^k
  double binom = 1.0;
  double pk = 1.0;
  for (int k = 0; k <= g.order(); ++k) {
    t[k] = binom * s / pk;
    binom *= (0.5 - k) / (k + 1);
    pk *= v;
  }
  return univariate_compose(g, std::span<const double>(t.data(), g.order() + 1));
}

Jet sin(const Jet& g) {
  std::array<double, 5> t{};
  const double s = std::sin(g.value()), c = std::cos(g.value());
  const double cyc[4] = {s, c, -s, -c};
  double f = 1.0;
  for (int k = 0; k <= g.order(); ++k) {
    t[k] = cyc[k % 4] / f;
    f *= (k + 1);
  }
  return univariate_compose(g, std::span<const double>(t.data(), g.order() + 1));
}

Jet cos(const Jet& g) {
  std::array<double, 5> t{};
  const double s = std::sin(g.value()), c = std::cos(g.value());
  const double cyc[4] = {c, -s, -c, s};
  double f = 1.0;
  for (int k = 0; k <= g.order(); ++k) {
    t[k] = cyc[k % 4] / f;
    f *= (k + 1);
  }
  return univariate_compose(g, std::span<const double>(t.data(), g.order() + 1));
}

Jet pow(const Jet& g, int n) {
  if (n < 0) return 1.0 / pow(g, -n);
  Jet r = Jet::constant(g.table(), 1.0);
  Jet base = g;
  while (n > 0) {
    if (n & 1) r = r * base;
    base = base * base;
    n >>= 1;
  }
  return r;
}

Jet jet_det(const std::vector<std::vector<Jet>>& m) {
  const int n = static_cast<int>(m.size());
  if (n == 0) throw Error("empty matrix");
  TablePtr tab = m[0][0].table();
  // minors[mask] = det of rows 0..popcount(mask)-1 over the column set `mask`.
  std::vector<Jet> minors(size_t(1) << n);
  for (int j = 0; j < n; ++j) minors[size_t(1) << j] = m[0][j];
  for (uint32_t mask = 1; mask < (1u << n); ++mask) {
    const int r = __builtin_popcount(mask);
    if (r < 2) continue;
    Jet acc(tab);
    int sign = (r % 2 == 1) ? 1 : -1;  // expansion along row r-1
    for (int j = 0; j < n; ++j) {
      if (!(mask & (1u << j))) continue;
      const Jet& sub = minors[mask & ~(1u << j)];
      if (sign > 0)
        acc += m[r - 1][j] * sub;
      else
        acc -= m[r - 1][j] * sub;
      sign = -sign;
    }
    minors[mask] = acc;
  }
  return minors[(size_t(1) << n) - 1];
}

}  // namespace microlocal
