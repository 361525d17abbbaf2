#include "mnsid/baselines.h"
#include "mnsid/mals.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mnsid;

namespace {

Matrix A_stable() {
  Matrix A(2, 2);
  A << 0.6, 0.2, 0, 0.6;
  return A;
}

Matrix B_ref() {
  Matrix B(2, 1);
  B << 0.8, 1;
  return B;
}

Rollout long_trajectory(const MultNoiseSystem& sys, Index T, std::uint64_t seed) {
  const RolloutSet set =
      simulate_rollouts(sys, standard_gaussian_schedule(sys.m(), T), InitialState::fixed(Vector::Zero(sys.n())), 1, seed);
  return set.rollouts.front();
}

}  // namespace

TEST(Rls, MatchesRidgeBatchSolution) {
  std::mt19937_64 g(1);
  std::normal_distribution<double> N;
  const Index T = 300, p = 4, q = 2;
  Matrix Phi(T, p), Y(T, q);
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < p; ++i) Phi(t, i) = N(g);
    for (Index i = 0; i < q; ++i) Y(t, i) = N(g);
  }
  Rls rls(p, q);
  for (Index t = 0; t < T; ++t) rls.update(Phi.row(t).transpose(), Y.row(t).transpose());
  EXPECT_EQ(rls.steps(), T);
  EXPECT_LE((rls.theta() - batch_ls(Phi, Y)).cwiseAbs().maxCoeff(), 1e-8);
  // P is the inverse of the regularized Gram matrix.
  Matrix G = Phi.transpose() * Phi;
  G.diagonal().array() += 1e-6;
  EXPECT_LE((rls.P() * G - Matrix::Identity(p, p)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Rls, DivergenceFreezesState) {
  Rls rls(1, 1);
  rls.update(Vector::Ones(1), Vector::Constant(1, 1e15));
  EXPECT_TRUE(rls.diverged());
  const Matrix frozen = rls.theta();
  rls.update(Vector::Ones(1), Vector::Ones(1));
  EXPECT_EQ(rls.theta(), frozen);
  EXPECT_EQ(rls.steps(), 1);
  Rls ok(1, 1);
  ok.mark_diverged();
  EXPECT_TRUE(ok.diverged());
}

TEST(RlsEstimates, NoiselessSystemIsRecovered) {
  const MultNoiseSystem sys = make_system(A_stable(), B_ref(), ZeroNoise{});
  const Rollout traj = long_trajectory(sys, 10000, 3);
  const std::vector<RlsSnapshot> snaps = rls_estimates(traj, 2, 1, {100, 10000});
  ASSERT_EQ(snaps.size(), 2u);
  EXPECT_EQ(snaps[1].samples, 10000);
  const BaselineErrors e = baseline_errors(snaps[1], sys);
  EXPECT_LE(e.err_AB, 1e-6);
  EXPECT_LE(e.err_Sigma, 1e-5);
  EXPECT_FALSE(snaps[1].diverged);
  EXPECT_LE(snaps[1].SigmaA_tilde_hat.cwiseAbs().maxCoeff(), 1e-5);
  const RlsSnapshot last = rls_nominal(traj, 2, 1);
  EXPECT_EQ(last.A_hat, snaps[1].A_hat);
}

TEST(RlsEstimates, NoisyStableSystemConverges) {
  Matrix SA = 0.01 * Matrix::Identity(4, 4), SB = 0.01 * Matrix::Identity(2, 2);
  const MultNoiseSystem sys = make_system(A_stable(), B_ref(), CovarianceNoise{SA, SB});
  const Rollout traj = long_trajectory(sys, 200000, 4);
  const std::vector<RlsSnapshot> snaps = rls_estimates(traj, 2, 1, {1000, 200000});
  const BaselineErrors early = baseline_errors(snaps[0], sys), late = baseline_errors(snaps[1], sys);
  EXPECT_LT(late.err_AB, early.err_AB);
  EXPECT_LT(late.err_AB, 0.02);
  EXPECT_LT(late.err_Sigma, 0.05);
}

TEST(RlsEstimates, DivergedTrajectoryMarksLaterSnapshots) {
  const MultNoiseSystem sys = make_system(10 * Matrix::Identity(2, 2), B_ref(), ZeroNoise{});
  const Rollout traj = long_trajectory(sys, 100, 5);
  ASSERT_TRUE(traj.diverged);
  const std::vector<RlsSnapshot> snaps = rls_estimates(traj, 2, 1, {5, 50, 100, 200});
  ASSERT_EQ(snaps.size(), 4u);
  EXPECT_FALSE(snaps[0].diverged);
  EXPECT_TRUE(snaps[1].diverged);
  EXPECT_TRUE(snaps[3].diverged);
  EXPECT_THROW(rls_estimates(traj, 2, 1, {50, 5}), std::invalid_argument);
}

TEST(BaselineErrors, NonFiniteEstimatesAreInfinite) {
  const MultNoiseSystem sys = make_system(A_stable(), B_ref(), ZeroNoise{});
  RlsSnapshot s;
  s.A_hat = A_stable();
  s.A_hat(0, 0) = std::nan("");
  s.B_hat = B_ref();
  s.SigmaA_tilde_hat = Matrix::Zero(3, 3);
  s.SigmaB_tilde_hat = Matrix::Zero(3, 1);
  const BaselineErrors e = baseline_errors(s, sys);
  EXPECT_TRUE(std::isinf(e.err_AB));
  EXPECT_EQ(e.err_Sigma, 0.0);
}

TEST(Schedules, PeriodicRepeatsDesign) {
  const InputSchedule base = design_inputs(2, 4, InputDesign{}, 8);
  const InputSchedule per = make_periodic_schedule(base, 11);
  ASSERT_EQ(per.ell(), 11);
  for (Index t = 0; t < 11; ++t) {
    EXPECT_EQ(per.nu[t], base.nu[t % 4]);
    EXPECT_EQ(per.Ubar[t], base.Ubar[t % 4]);
  }
  EXPECT_THROW(make_periodic_schedule(base, 3), std::invalid_argument);
  const InputSchedule gs = standard_gaussian_schedule(3, 5);
  EXPECT_EQ(gs.ell(), 5);
  EXPECT_EQ(gs.Ubar[4], Matrix::Identity(3, 3));
  EXPECT_EQ(gs.nu[0], Vector::Zero(3));
}
