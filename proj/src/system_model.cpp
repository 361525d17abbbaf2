#include "mnsid/system_model.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

namespace mnsid {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

double truncated_normal_variance(double k) {
  const double phi = std::exp(-0.5 * k * k) / std::sqrt(2.0 * M_PI);
  const double mass = std::erf(k / std::sqrt(2.0));
  return 1.0 - 2.0 * k * phi / mass;
}

void check_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw std::invalid_argument(std::string(what) + " has non-finite entries");
}

}  // namespace

std::string to_string(ComponentLaw law) {
  return law == ComponentLaw::Uniform ? "uniform" : "gaussian";
}

ComponentLaw component_law_from_string(const std::string& s) {
  if (s == "uniform") return ComponentLaw::Uniform;
  if (s == "gaussian") return ComponentLaw::Gaussian;
  throw std::invalid_argument("unknown component law '" + s + "'");
}

Matrix psd_factor(const Matrix& S, const std::string& what) {
  if (S.rows() != S.cols()) throw std::invalid_argument(what + " is not square");
  if (S.size() == 0) return S;
  check_finite(S, what.c_str());
  const double scale = S.cwiseAbs().maxCoeff();
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > kSymTol * std::max(scale, 1e-300))
    throw std::invalid_argument(what + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S));
  const Vector& lam = es.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, std::abs(lam(lam.size() - 1)));
  if (lam(0) < -tol)
    throw std::invalid_argument(what + " is not PSD (min eigenvalue " + std::to_string(lam(0)) + ")");
  return es.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

MultNoiseSystem make_system(const Matrix& A, const Matrix& B, const NoiseModel& noise) {
  const Index n = A.rows();
  const Index m = B.cols();
  if (n < 1 || A.cols() != n) throw std::invalid_argument("make_system: A must be square");
  if (B.rows() != n || m < 1) throw std::invalid_argument("make_system: B must have n rows");
  if (m > n) throw std::invalid_argument("make_system: requires m <= n");
  check_finite(A, "A");
  check_finite(B, "B");

  MultNoiseSystem sys;
  sys.A = A;
  sys.B = B;
  sys.noise = noise;

  if (std::holds_alternative<ZeroNoise>(noise)) {
    sys.Sigma_A = Matrix::Zero(n * n, n * n);
    sys.Sigma_B = Matrix::Zero(n * m, n * m);
    sys.L_A = sys.Sigma_A;
    sys.L_B = sys.Sigma_B;
  } else if (const auto* cov = std::get_if<CovarianceNoise>(&noise)) {
    if (cov->Sigma_A.rows() != n * n || cov->Sigma_A.cols() != n * n)
      throw std::invalid_argument("make_system: Sigma_A must be n^2 x n^2");
    if (cov->Sigma_B.rows() != n * m || cov->Sigma_B.cols() != n * m)
      throw std::invalid_argument("make_system: Sigma_B must be nm x nm");
    sys.Sigma_A = symmetrize(cov->Sigma_A);
    sys.Sigma_B = symmetrize(cov->Sigma_B);
    sys.L_A = psd_factor(sys.Sigma_A, "Sigma_A");
    sys.L_B = psd_factor(sys.Sigma_B, "Sigma_B");
    sys.bounded = cov->law == ComponentLaw::Uniform;
    if (sys.bounded) {
      // ||Abar||_2 <= ||L z||_2 <= ||L||_2 sqrt(3 n^2)
      sys.c_Abar = spectral_norm(sys.L_A) * kSqrt3 * std::sqrt(double(n * n));
      sys.c_Bbar = spectral_norm(sys.L_B) * kSqrt3 * std::sqrt(double(n * m));
    }
  } else {
    const auto& eig = std::get<EigenStructuredNoise>(noise);
    if (Index(eig.A_dirs.size()) != eig.sigma2.size() || Index(eig.B_dirs.size()) != eig.delta2.size())
      throw std::invalid_argument("make_system: direction/variance count mismatch");
    sys.Sigma_A = Matrix::Zero(n * n, n * n);
    sys.Sigma_B = Matrix::Zero(n * m, n * m);
    for (std::size_t i = 0; i < eig.A_dirs.size(); ++i) {
      if (eig.A_dirs[i].rows() != n || eig.A_dirs[i].cols() != n || eig.sigma2(Index(i)) < 0)
        throw std::invalid_argument("make_system: invalid A direction");
      const Vector v = vec(eig.A_dirs[i]);
      sys.Sigma_A += eig.sigma2(Index(i)) * v * v.transpose();
      sys.c_Abar += std::sqrt(eig.sigma2(Index(i))) * kSqrt3 * spectral_norm(eig.A_dirs[i]);
    }
    for (std::size_t j = 0; j < eig.B_dirs.size(); ++j) {
      if (eig.B_dirs[j].rows() != n || eig.B_dirs[j].cols() != m || eig.delta2(Index(j)) < 0)
        throw std::invalid_argument("make_system: invalid B direction");
      const Vector v = vec(eig.B_dirs[j]);
      sys.Sigma_B += eig.delta2(Index(j)) * v * v.transpose();
      sys.c_Bbar += std::sqrt(eig.delta2(Index(j))) * kSqrt3 * spectral_norm(eig.B_dirs[j]);
    }
    sys.bounded = eig.law == ComponentLaw::Uniform;
  }
  if (!sys.bounded) {
    sys.c_Abar = std::numeric_limits<double>::infinity();
    sys.c_Bbar = std::numeric_limits<double>::infinity();
  }
  return sys;
}

MultNoiseSystem embed_additive_noise(const MultNoiseSystem& sys, const Matrix& Sigma_w) {
  const Index n = sys.n();
  const Index m = sys.m();
  if (Sigma_w.rows() != n || Sigma_w.cols() != n)
    throw std::invalid_argument("embed_additive_noise: Sigma_w must be n x n");
  psd_factor(Sigma_w, "Sigma_w");
  Matrix B2 = Matrix::Zero(n, m + 1);
  B2.leftCols(m) = sys.B;
  // vec([Bbar w]) = [vec(Bbar); w]
  Matrix SB = Matrix::Zero(n * (m + 1), n * (m + 1));
  SB.topLeftCorner(n * m, n * m) = sys.Sigma_B;
  SB.bottomRightCorner(n, n) = Sigma_w;
  ComponentLaw law = ComponentLaw::Uniform;
  if (const auto* cov = std::get_if<CovarianceNoise>(&sys.noise)) law = cov->law;
  if (const auto* eig = std::get_if<EigenStructuredNoise>(&sys.noise)) law = eig->law;
  return make_system(sys.A, B2, CovarianceNoise{sys.Sigma_A, SB, law});
}

void validate_schedule(const InputSchedule& s) {
  if (s.ell() < 1) throw std::invalid_argument("schedule: ell must be >= 1");
  if (Index(s.Ubar.size()) != s.ell()) throw std::invalid_argument("schedule: nu/Ubar length mismatch");
  const Index m = s.m();
  for (Index t = 0; t < s.ell(); ++t) {
    if (s.nu[t].size() != m || s.Ubar[t].rows() != m || s.Ubar[t].cols() != m)
      throw std::invalid_argument("schedule: inconsistent input dimension at t=" + std::to_string(t));
  }
}

InputSchedule augment_with_constant(const InputSchedule& s) {
  InputSchedule out = s;
  const Index m = s.m();
  for (Index t = 0; t < s.ell(); ++t) {
    Vector nu(m + 1);
    nu << s.nu[t], 1.0;
    Matrix U = Matrix::Zero(m + 1, m + 1);
    U.topLeftCorner(m, m) = s.Ubar[t];
    out.nu[t] = nu;
    out.Ubar[t] = U;
  }
  return out;
}

InitialState InitialState::fixed(const Vector& x0) {
  InitialState s;
  s.kind = Kind::Fixed;
  s.center = x0;
  s.spread = Vector::Zero(x0.size());
  return s;
}

InitialState InitialState::uniform_box(const Vector& center, const Vector& half_widths) {
  if (center.size() != half_widths.size() || (half_widths.array() < 0).any())
    throw std::invalid_argument("uniform_box: bad half widths");
  InitialState s;
  s.kind = Kind::UniformBox;
  s.center = center;
  s.spread = half_widths;
  return s;
}

InitialState InitialState::truncated_gaussian(const Vector& mean, const Vector& sd, double k) {
  if (mean.size() != sd.size() || (sd.array() < 0).any() || !(k > 0))
    throw std::invalid_argument("truncated_gaussian: bad parameters");
  InitialState s;
  s.kind = Kind::TruncatedGaussian;
  s.center = mean;
  s.spread = sd;
  s.truncation = k;
  return s;
}

Vector InitialState::mean() const { return center; }

Matrix InitialState::second_moment() const {
  Matrix S = center * center.transpose();
  if (kind == Kind::UniformBox) {
    S.diagonal() += (spread.array().square() / 3.0).matrix();
  } else if (kind == Kind::TruncatedGaussian) {
    S.diagonal() += (spread.array().square() * truncated_normal_variance(truncation)).matrix();
  }
  return S;
}

double InitialState::norm_bound() const {
  if (kind == Kind::Fixed) return center.norm();
  const double k = kind == Kind::TruncatedGaussian ? truncation : 1.0;
  return center.norm() + k * spread.norm();
}

bool RolloutSet::any_diverged() const {
  for (const auto& r : rollouts)
    if (r.diverged) return true;
  return false;
}

double draw_component(ComponentLaw law, CounterRng& rng) {
  if (law == ComponentLaw::Uniform) {
    std::uniform_real_distribution<double> d(-kSqrt3, kSqrt3);
    return d(rng);
  }
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

namespace {

Vector draw_vector(Index k, ComponentLaw law, CounterRng& rng) {
  Vector z(k);
  for (Index i = 0; i < k; ++i) z(i) = draw_component(law, rng);
  return z;
}

Vector draw_initial(const InitialState& init, CounterRng& rng) {
  const Index n = init.center.size();
  switch (init.kind) {
    case InitialState::Kind::Fixed:
      return init.center;
    case InitialState::Kind::UniformBox: {
      Vector x(n);
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      for (Index i = 0; i < n; ++i) x(i) = init.center(i) + init.spread(i) * d(rng);
      return x;
    }
    case InitialState::Kind::TruncatedGaussian: {
      Vector x(n);
      std::normal_distribution<double> d(0.0, 1.0);
      for (Index i = 0; i < n; ++i) {
        double g = d(rng);
        while (std::abs(g) > init.truncation) g = d(rng);
        x(i) = init.center(i) + init.spread(i) * g;
      }
      return x;
    }
  }
  return init.center;
}

}  // namespace

Matrix sample_Abar(const MultNoiseSystem& sys, CounterRng& rng) {
  const Index n = sys.n();
  if (std::holds_alternative<ZeroNoise>(sys.noise)) return Matrix::Zero(n, n);
  if (const auto* cov = std::get_if<CovarianceNoise>(&sys.noise))
    return mat(sys.L_A * draw_vector(n * n, cov->law, rng), n, n);
  const auto& eig = std::get<EigenStructuredNoise>(sys.noise);
  Matrix Ab = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < eig.A_dirs.size(); ++i)
    Ab += std::sqrt(eig.sigma2(Index(i))) * draw_component(eig.law, rng) * eig.A_dirs[i];
  return Ab;
}

Matrix sample_Bbar(const MultNoiseSystem& sys, CounterRng& rng) {
  const Index n = sys.n();
  const Index m = sys.m();
  if (std::holds_alternative<ZeroNoise>(sys.noise)) return Matrix::Zero(n, m);
  if (const auto* cov = std::get_if<CovarianceNoise>(&sys.noise))
    return mat(sys.L_B * draw_vector(n * m, cov->law, rng), n, m);
  const auto& eig = std::get<EigenStructuredNoise>(sys.noise);
  Matrix Bb = Matrix::Zero(n, m);
  for (std::size_t j = 0; j < eig.B_dirs.size(); ++j)
    Bb += std::sqrt(eig.delta2(Index(j))) * draw_component(eig.law, rng) * eig.B_dirs[j];
  return Bb;
}

Rollout simulate_one(const MultNoiseSystem& sys, const InputSchedule& schedule,
                     const std::vector<Matrix>& input_factors, const InitialState& init,
                     std::uint64_t seed, std::uint64_t k) {
  const Index n = sys.n();
  const Index m = sys.m();
  const Index ell = schedule.ell();
  Rollout r;
  r.x = Matrix::Constant(n, ell + 1, std::numeric_limits<double>::quiet_NaN());
  r.u = Matrix::Constant(m, ell, std::numeric_limits<double>::quiet_NaN());
  CounterRng rng0(seed, k, 0, StreamRole::InitialState);
  Vector x = draw_initial(init, rng0);
  r.x.col(0) = x;
  for (Index t = 0; t < ell; ++t) {
    CounterRng ru(seed, k, std::uint64_t(t), StreamRole::Input);
    CounterRng ra(seed, k, std::uint64_t(t), StreamRole::NoiseA);
    CounterRng rb(seed, k, std::uint64_t(t), StreamRole::NoiseB);
    const Vector u = schedule.nu[t] + input_factors[t] * draw_vector(m, schedule.law, ru);
    const Matrix Ab = sample_Abar(sys, ra);
    const Matrix Bb = sample_Bbar(sys, rb);
    x = (sys.A + Ab) * x + (sys.B + Bb) * u;
    r.u.col(t) = u;
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceThreshold) {
      r.diverged = true;
      r.steps = t;
      return r;
    }
    r.x.col(t + 1) = x;
  }
  r.steps = ell;
  return r;
}

RolloutSet simulate_rollouts(const MultNoiseSystem& sys, const InputSchedule& schedule,
                             const InitialState& init, Index n_r, std::uint64_t seed, int threads) {
  validate_schedule(schedule);
  if (n_r < 1) throw std::invalid_argument("simulate_rollouts: n_r must be >= 1");
  if (schedule.m() != sys.m()) throw std::invalid_argument("simulate_rollouts: schedule input dimension mismatch");
  if (init.center.size() != sys.n()) throw std::invalid_argument("simulate_rollouts: initial state dimension mismatch");

  std::vector<Matrix> factors;
  factors.reserve(schedule.ell());
  for (Index t = 0; t < schedule.ell(); ++t) factors.push_back(psd_factor(schedule.Ubar[t], "Ubar"));

  RolloutSet set;
  set.n = sys.n();
  set.m = sys.m();
  set.ell = schedule.ell();
  set.seed = seed;
  set.schedule = schedule;
  set.rollouts.resize(std::size_t(n_r));

  const int workers = std::max(1, std::min<int>(threads, int(n_r)));
  auto work = [&](int w) {
    for (Index k = w; k < n_r; k += workers)
      set.rollouts[std::size_t(k)] = simulate_one(sys, schedule, factors, init, seed, std::uint64_t(k));
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  return set;
}

}  // namespace mnsid
