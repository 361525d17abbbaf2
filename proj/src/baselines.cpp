#include "mnsid/baselines.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mnsid {

Rls::Rls(Index regressors, Index outputs, double p0)
    : theta_(Matrix::Zero(regressors, outputs)), P_(p0 * Matrix::Identity(regressors, regressors)) {}

void Rls::update(const Vector& phi, const Vector& y) {
  if (diverged_) return;
  const Vector Pphi = P_ * phi;
  const double denom = 1.0 + phi.dot(Pphi);
  const Vector K = Pphi / denom;
  theta_ += K * (y.transpose() - phi.transpose() * theta_);
  P_ -= K * Pphi.transpose();
  P_ = symmetrize(P_);
  ++steps_;
  const bool bad = !theta_.allFinite() || !P_.allFinite() ||
                   theta_.cwiseAbs().maxCoeff() > kDivergenceThreshold ||
                   P_.cwiseAbs().maxCoeff() > kDivergenceThreshold;
  if (bad) diverged_ = true;
}

Matrix batch_ls(const Matrix& Phi, const Matrix& Y, double p0) {
  Matrix G = Phi.transpose() * Phi;
  G.diagonal().array() += 1.0 / p0;
  return G.ldlt().solve(Phi.transpose() * Y);
}

namespace {

Vector second_moment_regressor(const Vector& x, const Vector& u) {
  const Index hn = half_dim(x.size());
  const Index hm = half_dim(u.size());
  Vector phi(hn + hm + x.size() * u.size());
  phi << svec(x * x.transpose()), svec(u * u.transpose()), vec(x * u.transpose());
  return phi;
}

}  // namespace

std::vector<RlsSnapshot> rls_estimates(const Rollout& traj, Index n, Index m,
                                       const std::vector<Index>& checkpoints) {
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
    throw std::invalid_argument("rls_estimates: checkpoints must be ascending");
  const Index hn = half_dim(n);
  const Index hm = half_dim(m);
  Rls nominal(n + m, n);
  Rls second(hn + hm + n * m, hn);
  std::vector<RlsSnapshot> out;
  std::size_t next = 0;
  auto snapshot = [&](Index samples) {
    RlsSnapshot s;
    s.samples = samples;
    const Matrix AB = nominal.theta().transpose();
    s.A_hat = AB.leftCols(n);
    s.B_hat = AB.rightCols(m);
    const Matrix M = second.theta().transpose();  // [A~+S~A, B~+S~B, K]
    const LiftedDynamics Lh = lift_nominal(s.A_hat, s.B_hat);
    s.SigmaA_tilde_hat = M.leftCols(hn) - Lh.A_tilde;
    s.SigmaB_tilde_hat = M.middleCols(hn, hm) - Lh.B_tilde;
    s.diverged = nominal.diverged() || second.diverged();
    return s;
  };
  const Index usable = traj.diverged ? traj.steps : traj.u.cols();
  for (Index t = 0; t < traj.u.cols() && next < checkpoints.size(); ++t) {
    if (t < usable) {
      const Vector x = traj.x.col(t);
      const Vector u = traj.u.col(t);
      const Vector x1 = traj.x.col(t + 1);
      Vector phi(n + m);
      phi << x, u;
      nominal.update(phi, x1);
      second.update(second_moment_regressor(x, u), svec(x1 * x1.transpose()));
    } else {
      nominal.mark_diverged();
      second.mark_diverged();
    }
    while (next < checkpoints.size() && checkpoints[next] == t + 1) out.push_back(snapshot(checkpoints[next++]));
  }
  while (next < checkpoints.size()) {
    // Trajectory shorter than the checkpoint: nothing more to learn from.
    RlsSnapshot s = snapshot(checkpoints[next++]);
    s.diverged = true;
    out.push_back(s);
  }
  return out;
}

RlsSnapshot rls_nominal(const Rollout& traj, Index n, Index m) {
  return rls_estimates(traj, n, m, {traj.u.cols()}).front();
}

InputSchedule make_periodic_schedule(const InputSchedule& schedule, Index T) {
  validate_schedule(schedule);
  if (T < schedule.ell()) throw std::invalid_argument("make_periodic_schedule: T must be >= ell");
  InputSchedule out;
  out.law = schedule.law;
  out.mean_law = schedule.mean_law + "-periodic";
  out.cov_law = schedule.cov_law;
  out.seed = schedule.seed;
  for (Index t = 0; t < T; ++t) {
    out.nu.push_back(schedule.nu[t % schedule.ell()]);
    out.Ubar.push_back(schedule.Ubar[t % schedule.ell()]);
  }
  return out;
}

InputSchedule standard_gaussian_schedule(Index m, Index T) {
  InputSchedule out;
  out.law = ComponentLaw::Gaussian;
  out.mean_law = "zero";
  out.cov_law = "identity";
  out.nu.assign(std::size_t(T), Vector::Zero(m));
  out.Ubar.assign(std::size_t(T), Matrix::Identity(m, m));
  return out;
}

BaselineErrors baseline_errors(const RlsSnapshot& s, const MultNoiseSystem& truth) {
  const LiftedDynamics L = lift(truth);
  const Index n = truth.n();
  const Index m = truth.m();
  Matrix AB(n, n + m), ABh(n, n + m);
  AB << truth.A, truth.B;
  ABh << s.A_hat, s.B_hat;
  Matrix S(half_dim(n), half_dim(n) + half_dim(m)), Sh(S.rows(), S.cols());
  S << L.SigmaA_tilde, L.SigmaB_tilde;
  Sh << s.SigmaA_tilde_hat, s.SigmaB_tilde_hat;
  BaselineErrors e;
  e.err_AB = ABh.allFinite() ? spectral_norm(ABh - AB) : std::numeric_limits<double>::infinity();
  e.err_Sigma = Sh.allFinite() ? spectral_norm(Sh - S) : std::numeric_limits<double>::infinity();
  return e;
}

}  // namespace mnsid
