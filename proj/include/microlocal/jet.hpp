#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "microlocal/errors.hpp"

namespace microlocal {

/// Multi-index over the jet variables, e.g. (1,0,2) for d/dx1 d^2/dx3^2.
using MultiIndex = std::vector<int>;

/// Enumeration of all multi-indices of total degree <= order over `dim`
/// variables, graded-lexicographic, with rank lookup and the addition
/// table used by truncated products. Tables are cached per (dim, order).
class IndexTable {
 public:
  static std::shared_ptr<const IndexTable> get(int dim, int order);

  int dim() const { return dim_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(indices_.size()); }

  const MultiIndex& index(int rank) const { return indices_[rank]; }
  int degree(int rank) const { return degrees_[rank]; }
  double factorial(int rank) const { return factorials_[rank]; }

  /// Rank of a multi-index, or -1 if its degree exceeds `order`.
  int rank(const MultiIndex& mi) const;

  /// Rank of index(i) + index(j), or -1 if the sum exceeds `order`.
  int sum_rank(int i, int j) const { return sum_[static_cast<size_t>(i) * indices_.size() + j]; }

  /// Number of ranks with degree <= k (ranks are sorted by degree).
  int count_to_degree(int k) const { return prefix_[k]; }

 private:
  IndexTable(int dim, int order);

  int dim_, order_;
  std::vector<MultiIndex> indices_;
  std::vector<int> degrees_;
  std::vector<double> factorials_;  // alpha! per rank
  std::vector<int> prefix_;
  std::vector<int32_t> sum_;
  std::unordered_map<uint64_t, int> lookup_;
};

using TablePtr = std::shared_ptr<const IndexTable>;

/// Coefficient storage with an inline buffer; ray tracing lives in small
/// algebras and would otherwise spend its time in the allocator.
class CoeffVec {
 public:
  CoeffVec() = default;
  explicit CoeffVec(int n, double v = 0.0) { assign(n, v); }
  CoeffVec(const CoeffVec& o) { *this = o; }
  CoeffVec(CoeffVec&& o) noexcept { *this = std::move(o); }
  CoeffVec& operator=(const CoeffVec& o) {
    assign(o.size_, 0.0);
    for (int i = 0; i < size_; ++i) data()[i] = o.data()[i];
    return *this;
  }
  CoeffVec& operator=(CoeffVec&& o) noexcept {
    if (o.heap_.empty()) {
      assign(o.size_, 0.0);
      for (int i = 0; i < size_; ++i) data()[i] = o.data()[i];
    } else {
      heap_ = std::move(o.heap_);
      size_ = o.size_;
    }
    return *this;
  }

  void assign(int n, double v) {
    size_ = n;
    if (n > kInline) {
      heap_.assign(n, v);
    } else {
      heap_.clear();
      for (int i = 0; i < n; ++i) inline_[i] = v;
    }
  }
  int size() const { return size_; }
  double* data() { return heap_.empty() ? inline_.data() : heap_.data(); }
  const double* data() const { return heap_.empty() ? inline_.data() : heap_.data(); }
  double& operator[](int i) { return data()[i]; }
  double operator[](int i) const { return data()[i]; }

 private:
  static constexpr int kInline = 36;
  int size_ = 0;
  std::array<double, kInline> inline_{};
  std::vector<double> heap_;
};

/// Truncated multivariate Taylor expansion of a scalar quantity at a point.
///
/// Coefficients are stored in Taylor normalization (derivative / alpha!),
/// so products are plain truncated convolutions; `derivative()` restores
/// the factorial. Arithmetic between jets requires identical tables.
class Jet {
 public:
  Jet() = default;
  explicit Jet(TablePtr tab) : tab_(std::move(tab)), c_(tab_->size()) {}

  static Jet constant(TablePtr tab, double v);
  static Jet variable(TablePtr tab, int i, double v);
  /// One variable jet per coordinate of x.
  static std::vector<Jet> seed(TablePtr tab, Eigen::Ref<const Eigen::VectorXd> x);

  bool valid() const { return tab_ != nullptr; }
  int dim() const { return tab_->dim(); }
  int order() const { return tab_->order(); }
  const TablePtr& table() const { return tab_; }

  double value() const { return c_[0]; }
  double coeff(int rank) const { return c_[rank]; }
  double& coeff(int rank) { return c_[rank]; }
  double coeff(const MultiIndex& mi) const;

  /// Partial derivative d^|alpha| f / dx^alpha at the expansion point.
  double derivative(const MultiIndex& mi) const;

  Eigen::VectorXd gradient() const;
  Eigen::MatrixXd hessian() const;

  /// Jet of the partial derivative df/dx_i, one order lower.
  Jet partial(int i) const;

  Jet operator-() const;
  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator+=(double s) { c_[0] += s; return *this; }
  Jet& operator-=(double s) { c_[0] -= s; return *this; }
  Jet& operator*=(double s);

  friend Jet operator+(Jet a, const Jet& b) { a += b; return a; }
  friend Jet operator-(Jet a, const Jet& b) { a -= b; return a; }
  friend Jet operator+(Jet a, double s) { a += s; return a; }
  friend Jet operator+(double s, Jet a) { a += s; return a; }
  friend Jet operator-(Jet a, double s) { a -= s; return a; }
  friend Jet operator-(double s, const Jet& a) { Jet r = -a; r += s; return r; }
  friend Jet operator*(Jet a, double s) { a *= s; return a; }
  friend Jet operator*(double s, Jet a) { a *= s; return a; }
  friend Jet operator/(Jet a, double s) { a *= 1.0 / s; return a; }
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b);
  friend Jet operator/(double s, const Jet& b);

  /// f(g) for a univariate f given by Taylor coefficients f^(k)(g.value())/k!.
  friend Jet univariate_compose(const Jet& g, std::span<const double> taylor);

  friend Jet exp(const Jet& g);
  friend Jet log(const Jet& g);
  friend Jet sqrt(const Jet& g);
  friend Jet sin(const Jet& g);
  friend Jet cos(const Jet& g);
  friend Jet pow(const Jet& g, int n);

 private:
  TablePtr tab_;
  CoeffVec c_;
};

/// Determinant of a square matrix of jets, by expansion over column
/// subsets (no divisions, so singular values at the point are fine).
Jet jet_det(const std::vector<std::vector<Jet>>& m);

}  // namespace microlocal
