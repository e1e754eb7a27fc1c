#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace microlocal {

/// Deterministic uniform sampling; avoids std distributions so that the
/// same seed gives the same stream on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0x9e3779b97f4a7c15ULL) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  Eigen::VectorXd vector(int n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  Eigen::VectorXd box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd v(lo.size());
    for (int i = 0; i < lo.size(); ++i) v[i] = uniform(lo[i], hi[i]);
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace microlocal
