#include "mnsid/mals.h"

#include <gtest/gtest.h>

#include <Eigen/QR>
#include <Eigen/SVD>

using namespace mnsid;

namespace {

Matrix A41() {
  Matrix A(2, 2);
  A << 1, 0.2, 0, 1;
  return A;
}

Matrix B41() {
  Matrix B(2, 1);
  B << 0.8, 1;
  return B;
}

Matrix SigmaA41() {
  Matrix S(4, 4);
  S << 8, -2, 0, 0, -2, 16, 2, 0, 0, 2, 2, 0, 0, 0, 0, 8;
  return S / 40;
}

Matrix SigmaB41() {
  Matrix S(2, 2);
  S << 5, -2, -2, 20;
  return S / 40;
}

MultNoiseSystem sys41() { return make_system(A41(), B41(), CovarianceNoise{SigmaA41(), SigmaB41()}); }

InputSchedule deterministic_schedule(Index m, Index ell, std::uint64_t seed) {
  InputDesign d;
  d.cov_law = "deterministic";
  return design_inputs(m, ell, d, seed);
}

}  // namespace

TEST(Design, LawsAndReproducibility) {
  InputDesign d;
  d.mean_lo = -0.5;
  d.mean_hi = 2.0;
  const InputSchedule a = design_inputs(3, 7, d, 5), b = design_inputs(3, 7, d, 5), c = design_inputs(3, 7, d, 6);
  ASSERT_EQ(a.ell(), 7);
  ASSERT_EQ(a.m(), 3);
  bool differs = false;
  for (Index t = 0; t < 7; ++t) {
    EXPECT_EQ(a.nu[t], b.nu[t]);
    EXPECT_EQ(a.Ubar[t], b.Ubar[t]);
    EXPECT_GE(a.nu[t].minCoeff(), -0.5);
    EXPECT_LE(a.nu[t].maxCoeff(), 2.0);
    EXPECT_GT(min_eigenvalue(a.Ubar[t]), 0.0);
    EXPECT_EQ(a.Ubar[t], a.Ubar[t].transpose());
    differs = differs || a.nu[t] != c.nu[t];
  }
  EXPECT_TRUE(differs);
  for (const Matrix& U : deterministic_schedule(2, 3, 1).Ubar) EXPECT_EQ(U, Matrix::Zero(2, 2));
  d.cov_law = "bogus";
  EXPECT_THROW(design_inputs(1, 2, d, 1), std::invalid_argument);
  EXPECT_THROW(design_inputs(0, 2, InputDesign{}, 1), std::invalid_argument);
}

TEST(Design, WishartSampleMean) {
  // E W(s I, m) = m s I
  const Index m = 3;
  const int N = 40000;
  Matrix acc = Matrix::Zero(m, m);
  for (int k = 0; k < N; ++k) {
    CounterRng rng(7, std::uint64_t(k), 0, StreamRole::Design);
    acc += sample_wishart(m, 0.1, rng);
  }
  acc /= N;
  EXPECT_LE((acc - 0.3 * Matrix::Identity(m, m)).cwiseAbs().maxCoeff(), 0.01);
}

TEST(EmpiricalMoments, MatchDirectAveragesAndThreadCount) {
  const MultNoiseSystem sys = sys41();
  const InputSchedule s = design_inputs(1, 4, InputDesign{}, 2021);
  const RolloutSet set = simulate_rollouts(sys, s, InitialState::fixed(Vector::Zero(2)), 1001, 3);
  const EmpiricalMoments e1 = empirical_moments(set, 1), e4 = empirical_moments(set, 4);
  for (Index t = 0; t <= 4; ++t) {
    Vector mu = Vector::Zero(2);
    Matrix X = Matrix::Zero(2, 2);
    for (const auto& r : set.rollouts) {
      mu += r.x.col(t);
      X += r.x.col(t) * r.x.col(t).transpose();
    }
    mu /= 1001.0;
    X /= 1001.0;
    EXPECT_LE((e1.traj.mu[t] - mu).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((e1.traj.Xt[t] - svec(X)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(e1.traj.mu[t], e4.traj.mu[t]);
    EXPECT_EQ(e1.traj.Xt[t], e4.traj.Xt[t]);
  }
  for (Index t = 0; t < 4; ++t) EXPECT_EQ(e1.traj.W[t], vec(e1.traj.mu[t] * s.nu[t].transpose()));
}

TEST(GramSolve, WellConditionedUsesCholesky) {
  Matrix Z(2, 4), Y(1, 4);
  Z << 1, 2, 3, 4, 0, 1, 0, 1;
  Y << 1, 1, 2, 3;
  LsDiagnostics d;
  const Matrix X = gram_solve(Y, Z, &d);
  EXPECT_FALSE(d.used_pseudoinverse);
  const Matrix ref = Z.transpose().householderQr().solve(Y.transpose()).transpose();
  EXPECT_LE((X - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GramSolve, RankDeficientFallsBackToPseudoinverse) {
  Matrix Z(3, 4), Y(2, 4);
  Z << 1, 2, 3, 4, 2, 4, 6, 8, 0, 1, 0, 1;
  Y << 1, 0, 2, 1, 0, 1, 1, 0;
  LsDiagnostics d;
  const Matrix X = gram_solve(Y, Z, &d);
  EXPECT_TRUE(d.used_pseudoinverse);
  // Minimum-norm least squares through a different factorization.
  const Matrix ref = Z.transpose().completeOrthogonalDecomposition().solve(Y.transpose()).transpose();
  EXPECT_LE((X - ref).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Estimator, PopulationMomentsRecoverParameters) {
  const MultNoiseSystem sys = sys41();
  for (std::uint64_t seed : {2021u, 7u, 99u}) {
    const InputSchedule s = design_inputs(1, 4, InputDesign{}, seed);
    const EstimationResult r = estimate_from_moments(population_moments(sys, s, InitialState::fixed(Vector::Zero(2))));
    const EstimationErrors e = estimation_errors(r, sys);
    // Rounding error scales with the conditioning of the Gram matrices.
    const double kz = r.diagnostics.nominal.lambda_max / r.diagnostics.nominal.lambda_min;
    const double kd = r.diagnostics.covariance.lambda_max / r.diagnostics.covariance.lambda_min;
    if (seed == 2021) {
      EXPECT_LE(e.err_AB, 1e-9);
      EXPECT_LE(e.err_Sigma, 1e-9);
    }
    EXPECT_LE(e.err_AB, 1e-15 * kz * 100) << seed << " cond " << kz;
    EXPECT_LE(e.err_Sigma, 1e-15 * kd * 100) << seed << " cond " << kd;
  }
}

TEST(Estimator, PopulationRecoveryLargerSystem) {
  Matrix A(3, 3), B(3, 2);
  A << 0.5, 0.1, 0, 0, 0.4, 0.2, 0.1, 0, 0.3;
  B << 1, 0, 0, 1, 0.5, 0.5;
  Matrix SA = Matrix::Identity(9, 9) * 0.01, SB = Matrix::Identity(6, 6) * 0.02;
  SA(0, 4) = SA(4, 0) = 0.004;
  const MultNoiseSystem sys = make_system(A, B, CovarianceNoise{SA, SB});
  const InputSchedule s = design_inputs(2, 12, InputDesign{}, 3);
  const InitialState init = InitialState::uniform_box(Vector::Constant(3, 0.2), Vector::Constant(3, 0.1));
  const EstimationErrors e = estimation_errors(estimate_from_moments(population_moments(sys, s, init)), sys);
  EXPECT_LE(e.err_AB, 1e-9);
  EXPECT_LE(e.err_Sigma, 1e-8);
}

TEST(Estimator, NoiselessDeterministicInputsAreExact) {
  const MultNoiseSystem sys = make_system(A41(), B41(), ZeroNoise{});
  const InputSchedule s = deterministic_schedule(1, 4, 2021);
  const EstimationResult r = mals(sys, s, InitialState::fixed(Vector::Zero(2)), 5, 11);
  const EstimationErrors e = estimation_errors(r, sys);
  EXPECT_LE(e.err_AB, 1e-10);
  EXPECT_LE(e.err_Sigma, 1e-10);
}

TEST(Estimator, ErrorsShrinkWithMoreRollouts) {
  const MultNoiseSystem sys = sys41();
  const InputSchedule s = design_inputs(1, 4, InputDesign{}, 2021);
  const InitialState init = InitialState::fixed(Vector::Zero(2));
  double small = 0, large = 0;
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    small += estimation_errors(mals(sys, s, init, 200, rep), sys).err_AB;
    large += estimation_errors(mals(sys, s, init, 20000, rep), sys).err_AB;
  }
  EXPECT_LT(large, small / 3);
}

TEST(Estimator, NormalizedErrorsDivideBySpectralNorm) {
  const MultNoiseSystem sys = sys41();
  EstimationResult r;
  r.A_hat = A41() * 1.1;
  r.B_hat = B41();
  const LiftedDynamics L = lift(sys);
  r.SigmaA_tilde_hat = L.SigmaA_tilde;
  r.SigmaB_tilde_hat = L.SigmaB_tilde * 0.5;
  const EstimationErrors e = estimation_errors(r, sys);
  Matrix AB(2, 3);
  AB << A41(), B41();
  EXPECT_NEAR(e.err_AB, 0.1 * A41().jacobiSvd().singularValues()(0), 1e-12);
  EXPECT_NEAR(e.err_AB_normalized, e.err_AB / AB.jacobiSvd().singularValues()(0), 1e-12);
  EXPECT_NEAR(e.err_Sigma, 0.5 * L.SigmaB_tilde.norm(), 1e-12);
}
