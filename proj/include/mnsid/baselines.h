#pragma once

#include "mnsid/moment_oracle.h"
#include "mnsid/system_model.h"

#include <cstdint>
#include <vector>

namespace mnsid {

// Recursive least squares for y ~ Theta^T phi with unit forgetting.
class Rls {
 public:
  Rls(Index regressors, Index outputs, double p0 = 1e6);

  void update(const Vector& phi, const Vector& y);

  const Matrix& theta() const { return theta_; }  // regressors x outputs
  const Matrix& P() const { return P_; }
  Index steps() const { return steps_; }
  bool diverged() const { return diverged_; }
  void mark_diverged() { diverged_ = true; }

 private:
  Matrix theta_;
  Matrix P_;
  Index steps_ = 0;
  bool diverged_ = false;
};

// Ridge-form batch solve equal to the RLS recursion: (Phi^T Phi + I/p0)^{-1} Phi^T Y.
Matrix batch_ls(const Matrix& Phi, const Matrix& Y, double p0 = 1e6);

struct RlsSnapshot {
  Index samples = 0;
  Matrix A_hat;
  Matrix B_hat;
  Matrix SigmaA_tilde_hat;
  Matrix SigmaB_tilde_hat;
  bool diverged = false;
};

// Runs both recursions along one trajectory and records snapshots after each
// checkpoint count of transitions. Second-moment regressors are
// [svec(x x^T); svec(u u^T); vec(x u^T)]; vec(u x^T) is a permutation of vec(x u^T),
// so its coefficient is absorbed into the same block.
std::vector<RlsSnapshot> rls_estimates(const Rollout& traj, Index n, Index m,
                                       const std::vector<Index>& checkpoints);

// Nominal-only convenience returning [A_hat B_hat] at the end of the trajectory.
RlsSnapshot rls_nominal(const Rollout& traj, Index n, Index m);

// Input law for t = 0..T-1 with mean nu_{t mod ell} and covariance Ubar_{t mod ell}.
InputSchedule make_periodic_schedule(const InputSchedule& schedule, Index T);

// i.i.d. standard Gaussian inputs of length T.
InputSchedule standard_gaussian_schedule(Index m, Index T);

struct BaselineErrors {
  double err_AB = 0.0;
  double err_Sigma = 0.0;
};

BaselineErrors baseline_errors(const RlsSnapshot& s, const MultNoiseSystem& truth);

}  // namespace mnsid
