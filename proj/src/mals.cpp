#include "mnsid/mals.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace mnsid {

Matrix sample_wishart(Index m, double scale, CounterRng& rng) {
  Matrix L = Matrix::Zero(m, m);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < m; ++i) {
    std::chi_squared_distribution<double> chi2(double(m - i));
    L(i, i) = std::sqrt(chi2(rng));
    for (Index j = 0; j < i; ++j) L(i, j) = normal(rng);
  }
  return scale * (L * L.transpose());
}

InputSchedule design_inputs(Index m, Index ell, const InputDesign& design, std::uint64_t seed) {
  if (m < 1 || ell < 1) throw std::invalid_argument("design_inputs: m and ell must be >= 1");
  if (design.mean_law == "uniform" && !(design.mean_lo <= design.mean_hi))
    throw std::invalid_argument("design_inputs: mean_lo > mean_hi");
  if (design.mean_law != "uniform" && design.mean_law != "gaussian")
    throw std::invalid_argument("design_inputs: unknown mean law '" + design.mean_law + "'");
  if (design.cov_law != "wishart" && design.cov_law != "deterministic" && design.cov_law != "identity")
    throw std::invalid_argument("design_inputs: unknown covariance law '" + design.cov_law + "'");
  if (design.cov_law == "wishart" && !(design.wishart_scale > 0))
    throw std::invalid_argument("design_inputs: Wishart scale must be positive");

  InputSchedule s;
  s.law = design.input_law;
  s.mean_law = design.mean_law;
  s.cov_law = design.cov_law;
  s.seed = seed;
  for (Index t = 0; t < ell; ++t) {
    CounterRng rn(seed, std::uint64_t(t), 0, StreamRole::Design);
    Vector nu(m);
    if (design.mean_law == "uniform") {
      std::uniform_real_distribution<double> d(design.mean_lo, design.mean_hi);
      for (Index i = 0; i < m; ++i) nu(i) = d(rn);
    } else {
      std::normal_distribution<double> d(0.0, 1.0);
      for (Index i = 0; i < m; ++i) nu(i) = d(rn);
    }
    s.nu.push_back(nu);
    // The covariance stream does not depend on the mean law, so the Gaussian and
    // uniform input cases share one covariance sequence.
    CounterRng rc(seed, std::uint64_t(t), 1, StreamRole::Design);
    if (design.cov_law == "wishart")
      s.Ubar.push_back(sample_wishart(m, design.wishart_scale, rc));
    else if (design.cov_law == "identity")
      s.Ubar.push_back(Matrix::Identity(m, m));
    else
      s.Ubar.push_back(Matrix::Zero(m, m));
  }
  return s;
}

namespace {

// Per-rollout contribution: [x_0; svec(x_0 x_0^T); x_1; ...].
Vector rollout_terms(const Rollout& r, Index n, Index ell) {
  const Index hn = half_dim(n);
  Vector v(( ell + 1) * (n + hn));
  for (Index t = 0; t <= ell; ++t) {
    const Vector x = r.x.col(t);
    v.segment(t * (n + hn), n) = x;
    v.segment(t * (n + hn) + n, hn) = svec(x * x.transpose());
  }
  return v;
}

Vector pairwise_sum(const RolloutSet& set, Index lo, Index hi, Index n, Index ell) {
  if (hi - lo == 1) return rollout_terms(set.rollouts[std::size_t(lo)], n, ell);
  const Index mid = lo + (hi - lo) / 2;
  return pairwise_sum(set, lo, mid, n, ell) + pairwise_sum(set, mid, hi, n, ell);
}

// Same tree as pairwise_sum; subtrees at depth `depth` are evaluated on worker threads.
Vector pairwise_sum_parallel(const RolloutSet& set, Index lo, Index hi, Index n, Index ell, int depth) {
  if (depth <= 0 || hi - lo < 2) return pairwise_sum(set, lo, hi, n, ell);
  const Index mid = lo + (hi - lo) / 2;
  Vector left;
  std::thread th([&] { left = pairwise_sum_parallel(set, lo, mid, n, ell, depth - 1); });
  Vector right = pairwise_sum_parallel(set, mid, hi, n, ell, depth - 1);
  th.join();
  return left + right;
}

}  // namespace

EmpiricalMoments empirical_moments(const RolloutSet& set, int threads) {
  if (set.n_r() < 1) throw std::invalid_argument("empirical_moments: empty rollout set");
  if (set.any_diverged()) throw std::runtime_error("empirical_moments: rollout set contains diverged rollouts");
  const Index n = set.n;
  const Index ell = set.ell;
  const Index hn = half_dim(n);
  int depth = 0;
  while ((1 << (depth + 1)) <= threads) ++depth;
  const Vector sum = pairwise_sum_parallel(set, 0, set.n_r(), n, ell, depth);
  const Vector mean = sum / double(set.n_r());

  EmpiricalMoments em;
  em.n = n;
  em.m = set.m;
  em.n_r = set.n_r();
  em.schedule = set.schedule;
  em.traj.exact = false;
  for (Index t = 0; t <= ell; ++t) {
    em.traj.mu.push_back(mean.segment(t * (n + hn), n));
    em.traj.Xt.push_back(mean.segment(t * (n + hn) + n, hn));
  }
  fill_input_terms(em.traj, set.schedule);
  return em;
}

EmpiricalMoments population_moments(const MultNoiseSystem& sys, const InputSchedule& schedule,
                                    const InitialState& init) {
  EmpiricalMoments em;
  em.n = sys.n();
  em.m = sys.m();
  em.n_r = 0;
  em.schedule = schedule;
  em.traj = propagate_second(sys, schedule, init.mean(), svec(init.second_moment()));
  return em;
}

Matrix gram_solve(const Matrix& Y, const Matrix& Z, LsDiagnostics* diag) {
  const Matrix G = symmetrize(Z * Z.transpose());
  const Matrix YZ = Y * Z.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(G);
  const Vector& lam = es.eigenvalues();
  LsDiagnostics d;
  d.lambda_min = lam(0);
  d.lambda_max = lam(lam.size() - 1);
  Matrix out;
  if (d.lambda_max > 0 && d.lambda_min > kRankTol * d.lambda_max) {
    Eigen::LLT<Matrix> llt(G);
    out = llt.solve(YZ.transpose()).transpose();
  } else {
    d.used_pseudoinverse = true;
    Eigen::JacobiSVD<Matrix> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double cut = kRankTol * (s.size() ? s(0) : 0.0);
    Vector sinv = Vector::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i)
      if (s(i) > cut && s(i) > 0) sinv(i) = 1.0 / s(i);
    const Matrix Gp = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
    out = YZ * Gp;
  }
  if (diag) *diag = d;
  return out;
}

NominalEstimate estimate_nominal(const EmpiricalMoments& em) {
  const Index n = em.n;
  const Index ell = em.schedule.ell();
  Matrix Y(n, ell), Z(n + em.m, ell);
  for (Index c = 0; c < ell; ++c) {
    const Index t = ell - c;
    Y.col(c) = em.traj.mu[t];
    Z.col(c) << em.traj.mu[t - 1], em.schedule.nu[t - 1];
  }
  NominalEstimate est;
  const Matrix AB = gram_solve(Y, Z, &est.diag);
  est.A_hat = AB.leftCols(n);
  est.B_hat = AB.rightCols(em.m);
  return est;
}

CovarianceEstimate estimate_covariance(const EmpiricalMoments& em, const Matrix& A_hat, const Matrix& B_hat) {
  const LiftedDynamics Lh = lift_nominal(A_hat, B_hat);
  const RegressionMatrices R = assemble(em.traj, em.schedule, Lh);
  CovarianceEstimate est;
  const Matrix S = gram_solve(R.C, R.D, &est.diag);
  const Index hn = half_dim(em.n);
  est.SigmaA_tilde_hat = S.leftCols(hn);
  est.SigmaB_tilde_hat = S.rightCols(half_dim(em.m));
  return est;
}

EstimationResult estimate_from_moments(const EmpiricalMoments& em) {
  const NominalEstimate nom = estimate_nominal(em);
  const CovarianceEstimate cov = estimate_covariance(em, nom.A_hat, nom.B_hat);
  EstimationResult r;
  r.A_hat = nom.A_hat;
  r.B_hat = nom.B_hat;
  r.SigmaA_tilde_hat = cov.SigmaA_tilde_hat;
  r.SigmaB_tilde_hat = cov.SigmaB_tilde_hat;
  r.diagnostics.nominal = nom.diag;
  r.diagnostics.covariance = cov.diag;
  r.diagnostics.n_r = em.n_r;
  return r;
}

EstimationResult estimate_from_rollouts(const RolloutSet& rollouts, int threads) {
  return estimate_from_moments(empirical_moments(rollouts, threads));
}

EstimationErrors estimation_errors(const EstimationResult& r, const MultNoiseSystem& truth) {
  const LiftedDynamics L = lift(truth);
  const Index n = truth.n();
  const Index m = truth.m();
  Matrix AB(n, n + m), ABh(n, n + m);
  AB << truth.A, truth.B;
  ABh << r.A_hat, r.B_hat;
  const Index hn = half_dim(n);
  const Index hm = half_dim(m);
  Matrix S(hn, hn + hm), Sh(hn, hn + hm);
  S << L.SigmaA_tilde, L.SigmaB_tilde;
  Sh << r.SigmaA_tilde_hat, r.SigmaB_tilde_hat;
  EstimationErrors e;
  e.err_AB = spectral_norm(ABh - AB);
  e.err_Sigma = spectral_norm(Sh - S);
  const double nAB = spectral_norm(AB);
  const double nS = spectral_norm(S);
  e.err_AB_normalized = nAB > 0 ? e.err_AB / nAB : e.err_AB;
  e.err_Sigma_normalized = nS > 0 ? e.err_Sigma / nS : e.err_Sigma;
  return e;
}

EstimationResult mals(const MultNoiseSystem& sys, const InputSchedule& schedule, const InitialState& init,
                      Index n_r, std::uint64_t seed, int threads) {
  const RolloutSet set = simulate_rollouts(sys, schedule, init, n_r, seed, threads);
  EstimationResult r = estimate_from_rollouts(set, threads);
  r.errors = estimation_errors(r, sys);
  return r;
}

}  // namespace mnsid
