#pragma once

#include "mnsid/rng.h"
#include "mnsid/shape_ops.h"

#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace mnsid {

// Law of the i.i.d. zero-mean unit-variance components z used to draw
// vec(Abar) = L z and u = nu + M z. Uniform means uniform on [-sqrt(3), sqrt(3)].
enum class ComponentLaw { Uniform, Gaussian };

std::string to_string(ComponentLaw law);
ComponentLaw component_law_from_string(const std::string& s);

struct ZeroNoise {};

struct CovarianceNoise {
  Matrix Sigma_A;  // n^2 x n^2
  Matrix Sigma_B;  // nm x nm
  ComponentLaw law = ComponentLaw::Uniform;
};

// Abar_t = sum_i p_i A_i, Bbar_t = sum_j q_j B_j with Var p_i = sigma2_i, Var q_j = delta2_j.
struct EigenStructuredNoise {
  std::vector<Matrix> A_dirs;
  Vector sigma2;
  std::vector<Matrix> B_dirs;
  Vector delta2;
  ComponentLaw law = ComponentLaw::Uniform;
};

using NoiseModel = std::variant<ZeroNoise, CovarianceNoise, EigenStructuredNoise>;

struct MultNoiseSystem {
  Matrix A;
  Matrix B;
  NoiseModel noise;
  Matrix Sigma_A;
  Matrix Sigma_B;
  Matrix L_A;  // Sigma_A = L_A L_A^T (covariance noise only)
  Matrix L_B;
  bool bounded = true;
  double c_Abar = 0.0;  // a.s. bound on ||Abar_t||_2, +inf for Gaussian components
  double c_Bbar = 0.0;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
};

MultNoiseSystem make_system(const Matrix& A, const Matrix& B, const NoiseModel& noise);

// w_t ~ Sigma_w enters as an extra input column driven by a constant 1.
MultNoiseSystem embed_additive_noise(const MultNoiseSystem& sys, const Matrix& Sigma_w);

// Symmetric PSD factor L with L L^T = S, clipping eigenvalues down to -1e-10 * max(1, lambda_max).
Matrix psd_factor(const Matrix& S, const std::string& what);

struct InputSchedule {
  std::vector<Vector> nu;    // means, t = 0..ell-1
  std::vector<Matrix> Ubar;  // central second moments
  ComponentLaw law = ComponentLaw::Gaussian;
  std::string mean_law = "uniform";
  std::string cov_law = "wishart";
  std::uint64_t seed = 0;

  Index ell() const { return Index(nu.size()); }
  Index m() const { return nu.empty() ? 0 : nu.front().size(); }
};

void validate_schedule(const InputSchedule& s);

// Input dimension grows by one; the new component is the constant 1.
InputSchedule augment_with_constant(const InputSchedule& s);

struct InitialState {
  enum class Kind { Fixed, UniformBox, TruncatedGaussian };
  Kind kind = Kind::Fixed;
  Vector center;  // x0 for Fixed, mean otherwise
  Vector spread;  // half-widths (box) or pre-truncation standard deviations
  double truncation = 3.0;  // TruncatedGaussian cut at +-truncation * spread

  static InitialState fixed(const Vector& x0);
  static InitialState uniform_box(const Vector& center, const Vector& half_widths);
  static InitialState truncated_gaussian(const Vector& mean, const Vector& sd, double k = 3.0);

  Vector mean() const;
  Matrix second_moment() const;  // E{x0 x0^T}
  double norm_bound() const;     // a.s. bound on ||x0||
};

struct Rollout {
  Matrix x;  // n x (ell+1)
  Matrix u;  // m x ell
  bool diverged = false;
  Index steps = 0;  // transitions completed before a divergence stop
};

struct RolloutSet {
  Index n = 0;
  Index m = 0;
  Index ell = 0;
  std::uint64_t seed = 0;
  InputSchedule schedule;
  std::vector<Rollout> rollouts;

  Index n_r() const { return Index(rollouts.size()); }
  bool any_diverged() const;
};

inline constexpr double kDivergenceThreshold = 1e12;

// Rollout k uses streams keyed by (seed, k, t, role), so the result does not
// depend on `threads`.
RolloutSet simulate_rollouts(const MultNoiseSystem& sys, const InputSchedule& schedule,
                             const InitialState& init, Index n_r, std::uint64_t seed,
                             int threads = 1);

Rollout simulate_one(const MultNoiseSystem& sys, const InputSchedule& schedule,
                     const std::vector<Matrix>& input_factors, const InitialState& init,
                     std::uint64_t seed, std::uint64_t k);

// Draw helpers, exposed for tests.
Matrix sample_Abar(const MultNoiseSystem& sys, CounterRng& rng);
Matrix sample_Bbar(const MultNoiseSystem& sys, CounterRng& rng);
double draw_component(ComponentLaw law, CounterRng& rng);

}  // namespace mnsid
