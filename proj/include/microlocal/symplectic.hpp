#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "microlocal/rng.hpp"
#include "microlocal/smooth_map.hpp"

namespace microlocal {

/// omega = sum_k sign_k dp_k ^ dq_k over ambient coordinates. The cotangent
/// convention here is omega = sum dxi_j ^ dx_j; products of cotangent
/// bundles carry the twist as a sign flip on the right factor.
struct SymplecticPairing {
  std::vector<int> q_idx, p_idx;
  std::vector<double> sign;
  int ambient = 0;

  static SymplecticPairing cotangent(int n);
  static SymplecticPairing twisted_product(int nx, int ny);

  double omega(Eigen::Ref<const Eigen::VectorXd> u, Eigen::Ref<const Eigen::VectorXd> w) const;

  /// Hamiltonian vector field of a linear form a.(z - z0): i_H omega = df.
  Eigen::VectorXd hamiltonian_of_linear(Eigen::Ref<const Eigen::VectorXd> a) const;
};

/// Two scalar observables on T*R^n, bracketed pointwise.
struct PoissonPair {
  SmoothMap f, g;
};

/// Parametrized map into a symplectic vector space, Lagrangian off its
/// singular points.
struct LagrangianInclusion {
  SmoothMap map;  // R^k -> R^{2n}
  SymplecticPairing pairing;
  std::string name;
  Eigen::VectorXd singular_seed;  // declared seed near the rank drop (may be empty)
};

struct CoisotropyResult {
  double residual = 0.0;   // |{f1, f2}| at the point
  bool coisotropic = false;
};

struct NonradialResult {
  double rank_gap = 0.0;   // smallest singular value of [H_f1 H_f2 R], scaled
  bool nonradial = false;
};

struct UmbrellaCertificate {
  bool verdict = false;
  std::string failing_condition;  // empty when positive
  Eigen::VectorXd singular_point;
  Eigen::VectorXd kernel;              // unit kernel direction of d(psi)
  double rank_drop_sigma = 0.0;        // smallest singular value at the point (scaled)
  double next_sigma = 0.0;             // second smallest (must stay away from 0)
  double simplicity_sigma = 0.0;       // independence of the two minor gradients
  double transversality_residual = 0.0;
  double max_isotropy_defect = 0.0;    // over the probe ring off the singular set
};

/// {f, g}(pt) = sum_j df/dxi_j dg/dx_j - df/dx_j dg/dxi_j on T*R^n,
/// pt = (x, xi).
double poisson_bracket(const SmoothMap& f, const SmoothMap& g,
                       Eigen::Ref<const Eigen::VectorXd> pt);

/// Codimension-two coisotropy: the bracket of the two defining functions
/// vanishes on the set.
CoisotropyResult coisotropic_check(const SmoothMap& f1, const SmoothMap& f2,
                                   Eigen::Ref<const Eigen::VectorXd> pt, double tol = 1e-9);

/// Tests whether the radial vector sum xi_j d_xi_j lies in the span of the
/// Hamiltonian fields of the defining functions.
NonradialResult nonradial_check(const SmoothMap& f1, const SmoothMap& f2,
                                Eigen::Ref<const Eigen::VectorXd> pt, double tol = 1e-9);

/// max_{i<j} |omega(dpsi e_i, dpsi e_j)| at p, normalized by the squared
/// largest singular value of dpsi.
double isotropy_defect(const LagrangianInclusion& psi, Eigen::Ref<const Eigen::VectorXd> p);

struct UmbrellaOptions {
  double tol_root = 1e-10;
  double tol_rank = 1e-7;        // scaled sigma threshold for "rank dropped"
  double tol_conditions = 1e-6;  // simplicity / transversality floor
  double tol_isotropy = 1e-9;
  double probe_radius_lo = 1e-3;
  double probe_radius_hi = 1e-1;
  int probes = 24;
  uint64_t rng_seed = 1234;
};

/// Locates a rank-drop point of psi near `seed` (Newton on two square
/// minors of d(psi)), then certifies the open-umbrella conditions.
UmbrellaCertificate umbrella_check(const LagrangianInclusion& psi,
                                   Eigen::Ref<const Eigen::VectorXd> seed,
                                   const UmbrellaOptions& opts = {});

LagrangianInclusion make_open_umbrella_model();  // (a,b) -> (a^2, b, ab, 2/3 a^3)
LagrangianInclusion make_conic_umbrella_model(); // (t,s,theta) chart of the conic model

}  // namespace microlocal
