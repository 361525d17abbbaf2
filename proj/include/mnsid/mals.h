#pragma once

#include "mnsid/moment_oracle.h"
#include "mnsid/system_model.h"

#include <cstdint>
#include <optional>
#include <string>

namespace mnsid {

struct InputDesign {
  std::string mean_law = "uniform";  // "uniform" on [mean_lo, mean_hi]^m, or "gaussian" N(0, I)
  double mean_lo = 0.0;
  double mean_hi = 1.0;
  std::string cov_law = "wishart";   // "wishart" W(scale * I, m), "deterministic" (Ubar = 0), "identity"
  double wishart_scale = 0.1;
  ComponentLaw input_law = ComponentLaw::Gaussian;
};

InputSchedule design_inputs(Index m, Index ell, const InputDesign& design, std::uint64_t seed);

// Bartlett construction of W(scale * I_m, m).
Matrix sample_wishart(Index m, double scale, CounterRng& rng);

struct EmpiricalMoments {
  MomentTrajectory traj;  // mu^, X~^, W^, W'^ and designed U~
  InputSchedule schedule;
  Index n = 0;
  Index m = 0;
  Index n_r = 0;
};

// Means over rollouts, summed by a fixed pairwise tree over the rollout index.
EmpiricalMoments empirical_moments(const RolloutSet& rollouts, int threads = 1);

// Exact moments packaged like empirical ones, for oracle feeds.
EmpiricalMoments population_moments(const MultNoiseSystem& sys, const InputSchedule& schedule,
                                    const InitialState& init);

struct LsDiagnostics {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  bool used_pseudoinverse = false;
};

// Returns Y Z^T (Z Z^T)^dagger: Cholesky when well conditioned, otherwise SVD
// pseudoinverse with cutoff 1e-10 * sigma_max.
Matrix gram_solve(const Matrix& Y, const Matrix& Z, LsDiagnostics* diag);

struct Diagnostics {
  LsDiagnostics nominal;
  LsDiagnostics covariance;
  Index n_r = 0;
};

struct EstimationErrors {
  double err_AB = 0.0;
  double err_Sigma = 0.0;
  double err_AB_normalized = 0.0;
  double err_Sigma_normalized = 0.0;
};

struct EstimationResult {
  Matrix A_hat;
  Matrix B_hat;
  Matrix SigmaA_tilde_hat;
  Matrix SigmaB_tilde_hat;
  Diagnostics diagnostics;
  std::optional<EstimationErrors> errors;
};

struct NominalEstimate {
  Matrix A_hat;
  Matrix B_hat;
  LsDiagnostics diag;
};

struct CovarianceEstimate {
  Matrix SigmaA_tilde_hat;
  Matrix SigmaB_tilde_hat;
  LsDiagnostics diag;
};

NominalEstimate estimate_nominal(const EmpiricalMoments& em);
CovarianceEstimate estimate_covariance(const EmpiricalMoments& em, const Matrix& A_hat, const Matrix& B_hat);

EstimationResult estimate_from_moments(const EmpiricalMoments& em);
EstimationResult estimate_from_rollouts(const RolloutSet& rollouts, int threads = 1);

EstimationErrors estimation_errors(const EstimationResult& r, const MultNoiseSystem& truth);

EstimationResult mals(const MultNoiseSystem& sys, const InputSchedule& schedule, const InitialState& init,
                      Index n_r, std::uint64_t seed, int threads = 1);

}  // namespace mnsid
