#pragma once

#include "mnsid/shape_ops.h"
#include "mnsid/system_model.h"

#include <string>
#include <vector>

namespace mnsid {

// Reduced second-moment dynamics of a (A, B, Sigma_A, Sigma_B) quadruple.
struct LiftedDynamics {
  Index n = 0;
  Index m = 0;
  Matrix A;
  Matrix B;
  Matrix A_tilde;        // P1 (A kron A) Q1
  Matrix B_tilde;        // P1 (B kron B) Q2
  Matrix K_BA;           // P1 (B kron A), acts on W = vec(mu nu^T)
  Matrix K_AB;           // P1 (A kron B), acts on W' = vec(nu mu^T)
  Matrix SigmaA_prime;   // G(Sigma_A, n, n, n, n) = E{Abar kron Abar}
  Matrix SigmaB_prime;   // G(Sigma_B, n, m, n, m)
  Matrix SigmaA_tilde;   // P1 SigmaA' Q1
  Matrix SigmaB_tilde;   // P1 SigmaB' Q2
};

// Nominal part only (A_tilde, B_tilde, K_BA, K_AB); covariance fields left zero.
LiftedDynamics lift_nominal(const Matrix& A, const Matrix& B);
LiftedDynamics lift(const Matrix& A, const Matrix& B, const Matrix& Sigma_A, const Matrix& Sigma_B);
LiftedDynamics lift(const MultNoiseSystem& sys);

// Sigma' -> reduced Sigma~' and back to a Sigma with the same reduction.
Matrix reduce_SigmaA(const Matrix& Sigma_A, Index n);
Matrix reduce_SigmaB(const Matrix& Sigma_B, Index n, Index m);

struct MomentTrajectory {
  std::vector<Vector> mu;   // t = 0..ell
  std::vector<Vector> Xt;   // svec E{x_t x_t^T}, t = 0..ell
  std::vector<Vector> W;    // vec(mu_t nu_t^T), t = 0..ell-1
  std::vector<Vector> Wp;   // vec(nu_t mu_t^T)
  std::vector<Vector> Ut;   // svec(Ubar_t + nu_t nu_t^T)
  bool exact = true;

  Index ell() const { return Index(W.size()); }
};

std::vector<Vector> propagate_first(const Matrix& A, const Matrix& B, const InputSchedule& schedule,
                                    const Vector& mu0);

// Fills W, W', U~ from mu and the designed schedule.
void fill_input_terms(MomentTrajectory& tr, const InputSchedule& schedule);

MomentTrajectory propagate_second(const LiftedDynamics& L, const InputSchedule& schedule,
                                  const Vector& mu0, const Vector& Xt0);
MomentTrajectory propagate_second(const MultNoiseSystem& sys, const InputSchedule& schedule,
                                  const Vector& mu0, const Vector& Xt0);

struct RegressionMatrices {
  Matrix Y;  // [mu_ell ... mu_1]
  Matrix Z;  // [[mu_{ell-1} ... mu_0]; [nu_{ell-1} ... nu_0]]
  Matrix C;  // [C_ell ... C_1]
  Matrix D;  // [[X~_{ell-1} ... X~_0]; [U~_{ell-1} ... U~_0]]
};

// C uses the nominal part of `nominal` (A_tilde, B_tilde, K_BA, K_AB).
RegressionMatrices assemble(const MomentTrajectory& tr, const InputSchedule& schedule,
                            const LiftedDynamics& nominal);

RegressionMatrices assemble_population(const MultNoiseSystem& sys, const InputSchedule& schedule,
                                       const InitialState& init);

struct ExcitationReport {
  Index rank_Z = 0;
  double lambda_min_ZZ = 0.0;
  double lambda_max_ZZ = 0.0;
  Index rank_D = 0;
  double lambda_min_DD = 0.0;
  double lambda_max_DD = 0.0;
  bool ell_ok_Z = false;
  bool ell_ok_D = false;
  bool pass_Z = false;
  bool pass_D = false;
};

inline constexpr double kRankTol = 1e-10;

// Rank of a symmetric PSD Gram matrix: eigenvalues above kRankTol * lambda_max.
Index gram_rank(const Matrix& G);

ExcitationReport check_excitation(const RegressionMatrices& R, Index n, Index m);

bool controllable(const Matrix& A, const Matrix& B);

// Spectral radius of A~ + Sigma~'_A (mean-square stability diagnostic).
double second_moment_spectral_radius(const LiftedDynamics& L);

// Column labels for trajectory CSV export: t, mu_1.., Xt_11, Xt_21, ...
std::vector<std::string> trajectory_header(Index n);

}  // namespace mnsid
