#include "mnsid/moment_oracle.h"

#include <stdexcept>

namespace mnsid {

LiftedDynamics lift_nominal(const Matrix& A, const Matrix& B) {
  const Index n = A.rows();
  const Index m = B.cols();
  if (A.cols() != n || B.rows() != n) throw std::invalid_argument("lift: shape mismatch");
  LiftedDynamics L;
  L.n = n;
  L.m = m;
  L.A = A;
  L.B = B;
  L.A_tilde = apply_Q_cols(apply_P_rows(kron(A, A), n), n);
  L.B_tilde = apply_Q_cols(apply_P_rows(kron(B, B), n), m);
  L.K_BA = apply_P_rows(kron(B, A), n);
  L.K_AB = apply_P_rows(kron(A, B), n);
  L.SigmaA_prime = Matrix::Zero(n * n, n * n);
  L.SigmaB_prime = Matrix::Zero(n * n, m * m);
  L.SigmaA_tilde = Matrix::Zero(half_dim(n), half_dim(n));
  L.SigmaB_tilde = Matrix::Zero(half_dim(n), half_dim(m));
  return L;
}

Matrix reduce_SigmaA(const Matrix& Sigma_A, Index n) {
  return apply_Q_cols(apply_P_rows(reshape_G(Sigma_A, n, n, n, n), n), n);
}

Matrix reduce_SigmaB(const Matrix& Sigma_B, Index n, Index m) {
  return apply_Q_cols(apply_P_rows(reshape_G(Sigma_B, n, m, n, m), n), m);
}

LiftedDynamics lift(const Matrix& A, const Matrix& B, const Matrix& Sigma_A, const Matrix& Sigma_B) {
  LiftedDynamics L = lift_nominal(A, B);
  const Index n = L.n;
  const Index m = L.m;
  L.SigmaA_prime = reshape_G(Sigma_A, n, n, n, n);
  L.SigmaB_prime = reshape_G(Sigma_B, n, m, n, m);
  L.SigmaA_tilde = apply_Q_cols(apply_P_rows(L.SigmaA_prime, n), n);
  L.SigmaB_tilde = apply_Q_cols(apply_P_rows(L.SigmaB_prime, n), m);
  return L;
}

LiftedDynamics lift(const MultNoiseSystem& sys) { return lift(sys.A, sys.B, sys.Sigma_A, sys.Sigma_B); }

std::vector<Vector> propagate_first(const Matrix& A, const Matrix& B, const InputSchedule& schedule,
                                    const Vector& mu0) {
  validate_schedule(schedule);
  if (mu0.size() != A.rows() || schedule.m() != B.cols())
    throw std::invalid_argument("propagate_first: dimension mismatch");
  std::vector<Vector> mu{mu0};
  for (Index t = 0; t < schedule.ell(); ++t) mu.push_back(A * mu.back() + B * schedule.nu[t]);
  return mu;
}

void fill_input_terms(MomentTrajectory& tr, const InputSchedule& schedule) {
  const Index ell = schedule.ell();
  tr.W.clear();
  tr.Wp.clear();
  tr.Ut.clear();
  for (Index t = 0; t < ell; ++t) {
    const Vector& nu = schedule.nu[t];
    tr.W.push_back(vec(tr.mu[t] * nu.transpose()));
    tr.Wp.push_back(vec(nu * tr.mu[t].transpose()));
    tr.Ut.push_back(svec(schedule.Ubar[t] + nu * nu.transpose()));
  }
}

MomentTrajectory propagate_second(const LiftedDynamics& L, const InputSchedule& schedule,
                                  const Vector& mu0, const Vector& Xt0) {
  validate_schedule(schedule);
  if (Xt0.size() != half_dim(L.n)) throw std::invalid_argument("propagate_second: X~0 has wrong length");
  const Matrix cov0 = smat(Xt0, L.n) - mu0 * mu0.transpose();
  const double scale = std::max(1.0, cov0.cwiseAbs().maxCoeff());
  if (min_eigenvalue(cov0) < -1e-10 * scale)
    throw std::invalid_argument("propagate_second: smat(X~0) - mu0 mu0^T is not PSD");

  MomentTrajectory tr;
  tr.exact = true;
  tr.mu = propagate_first(L.A, L.B, schedule, mu0);
  fill_input_terms(tr, schedule);
  const Matrix MA = L.A_tilde + L.SigmaA_tilde;
  const Matrix MB = L.B_tilde + L.SigmaB_tilde;
  tr.Xt.push_back(Xt0);
  for (Index t = 0; t < schedule.ell(); ++t)
    tr.Xt.push_back(MA * tr.Xt[t] + MB * tr.Ut[t] + L.K_BA * tr.W[t] + L.K_AB * tr.Wp[t]);
  return tr;
}

MomentTrajectory propagate_second(const MultNoiseSystem& sys, const InputSchedule& schedule,
                                  const Vector& mu0, const Vector& Xt0) {
  return propagate_second(lift(sys), schedule, mu0, Xt0);
}

RegressionMatrices assemble(const MomentTrajectory& tr, const InputSchedule& schedule,
                            const LiftedDynamics& L) {
  const Index ell = schedule.ell();
  const Index n = L.n;
  const Index m = L.m;
  const Index hn = half_dim(n);
  const Index hm = half_dim(m);
  if (Index(tr.mu.size()) != ell + 1 || Index(tr.Xt.size()) != ell + 1 || tr.ell() != ell)
    throw std::invalid_argument("assemble: trajectory length does not match schedule");
  RegressionMatrices R;
  R.Y.resize(n, ell);
  R.Z.resize(n + m, ell);
  R.C.resize(hn, ell);
  R.D.resize(hn + hm, ell);
  for (Index c = 0; c < ell; ++c) {
    const Index t = ell - c;  // column c holds time t (Y, C) and t-1 (Z, D)
    R.Y.col(c) = tr.mu[t];
    R.Z.col(c) << tr.mu[t - 1], schedule.nu[t - 1];
    R.C.col(c) = tr.Xt[t] - (L.A_tilde * tr.Xt[t - 1] + L.K_BA * tr.W[t - 1] + L.K_AB * tr.Wp[t - 1] +
                             L.B_tilde * tr.Ut[t - 1]);
    R.D.col(c) << tr.Xt[t - 1], tr.Ut[t - 1];
  }
  return R;
}

RegressionMatrices assemble_population(const MultNoiseSystem& sys, const InputSchedule& schedule,
                                       const InitialState& init) {
  const LiftedDynamics L = lift(sys);
  const MomentTrajectory tr = propagate_second(L, schedule, init.mean(), svec(init.second_moment()));
  return assemble(tr, schedule, L);
}

Index gram_rank(const Matrix& G) {
  if (G.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(G), Eigen::EigenvaluesOnly);
  const Vector& lam = es.eigenvalues();
  const double lmax = lam(lam.size() - 1);
  if (!(lmax > 0)) return 0;
  Index r = 0;
  for (Index i = 0; i < lam.size(); ++i)
    if (lam(i) > kRankTol * lmax) ++r;
  return r;
}

ExcitationReport check_excitation(const RegressionMatrices& R, Index n, Index m) {
  ExcitationReport rep;
  const Index ell = R.Z.cols();
  const Matrix ZZ = R.Z * R.Z.transpose();
  const Matrix DD = R.D * R.D.transpose();
  rep.lambda_min_ZZ = min_eigenvalue(ZZ);
  rep.lambda_max_ZZ = max_eigenvalue(ZZ);
  rep.lambda_min_DD = min_eigenvalue(DD);
  rep.lambda_max_DD = max_eigenvalue(DD);
  rep.rank_Z = gram_rank(ZZ);
  rep.rank_D = gram_rank(DD);
  rep.ell_ok_Z = ell >= n + m;
  rep.ell_ok_D = 2 * ell >= n * (n + 1) + m * (m + 1);
  rep.pass_Z = rep.ell_ok_Z && rep.lambda_min_ZZ > kRankTol * rep.lambda_max_ZZ && rep.lambda_max_ZZ > 0;
  rep.pass_D = rep.ell_ok_D && rep.lambda_min_DD > kRankTol * rep.lambda_max_DD && rep.lambda_max_DD > 0;
  return rep;
}

bool controllable(const Matrix& A, const Matrix& B) {
  const Index n = A.rows();
  if (A.cols() != n || B.rows() != n) throw std::invalid_argument("controllable: shape mismatch");
  const Index m = B.cols();
  Matrix ctrb(n, n * m);
  Matrix blk = B;
  for (Index i = 0; i < n; ++i) {
    ctrb.middleCols(i * m, m) = blk;
    blk = A * blk;
  }
  return gram_rank(ctrb * ctrb.transpose()) == n;
}

double second_moment_spectral_radius(const LiftedDynamics& L) {
  Eigen::EigenSolver<Matrix> es(L.A_tilde + L.SigmaA_tilde, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<std::string> trajectory_header(Index n) {
  std::vector<std::string> h{"t"};
  for (Index i = 1; i <= n; ++i) h.push_back("mu_" + std::to_string(i));
  for (Index c = 1; c <= n; ++c)
    for (Index r = c; r <= n; ++r) h.push_back("Xt_" + std::to_string(r) + std::to_string(c));
  return h;
}

}  // namespace mnsid
