#include "mnsid/bounds.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mnsid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonnegative(double v, const char* name) {
  if (!(v >= 0)) throw std::invalid_argument(std::string("lemma1_constants: ") + name + " must be >= 0");
}

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  if (a == kInf || b == kInf) return kInf;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

LogBound operator+(const LogBound& a, const LogBound& b) {
  return {log_add(a.log_value, b.log_value), a.in_range && b.in_range, a.monotone && b.monotone};
}

LogBound scaled(double log_factor, LogBound b) {
  if (b.log_value != -kInf) b.log_value += log_factor;
  return b;
}

LogBound vacuous() { return {kInf, false, true}; }

// prefactor * exp{-3/2 n_r eps^2 / (3 ell c^2 + eps sqrt(ell c^2))}
LogBound bernstein(double prefactor, double c, const BoundContext& ctx, double eps) {
  if (std::isnan(eps) || !(eps > 0)) return vacuous();
  if (eps == kInf) return {-kInf, true, true};
  const double s2 = double(ctx.ell) * c * c;
  if (s2 == 0) return {-kInf, true, true};
  const double expo = 1.5 * double(ctx.n_r) * eps * eps / (3.0 * s2 + eps * std::sqrt(s2));
  return {std::log(prefactor) - expo, true, true};
}

// sqrt(a + x) - sqrt(a) without cancellation
double sqrt_shift(double a, double x) { return x / (std::sqrt(a + x) + std::sqrt(a)); }

double log_covering(double dim, double lmax, double lmin) {
  const double kappa = lmin > 0 ? lmax / lmin : kInf;
  return log_add(dim * std::log(9.0), dim * std::log(16.0 * kappa + 1.0));
}

LogBound in_open_range(LogBound b, bool ok) {
  b.in_range = b.in_range && ok;
  return b;
}

}  // namespace

double LogBound::value() const { return std::exp(log_value); }
double LogBound::reported() const { return std::min(1.0, value()); }

SystemBoundConstants lemma1_constants(const BoundInputs& in) {
  require_nonnegative(in.c_X, "c_X");
  require_nonnegative(in.c_U, "c_U");
  require_nonnegative(in.c_Abar, "c_Abar");
  require_nonnegative(in.c_Bbar, "c_Bbar");
  require_nonnegative(in.c_mu, "c_mu");
  require_nonnegative(in.c_DeltaX, "c_DeltaX");
  require_nonnegative(in.c_nu, "c_nu");
  require_nonnegative(in.c_SigmaA_prime, "c_SigmaA_prime");
  require_nonnegative(in.c_SigmaB_prime, "c_SigmaB_prime");
  require_nonnegative(in.norm_A, "norm_A");
  require_nonnegative(in.norm_B, "norm_B");
  require_nonnegative(in.norm_SigmaA_prime, "norm_SigmaA_prime");
  require_nonnegative(in.norm_SigmaB_prime, "norm_SigmaB_prime");
  if (in.ell < 0) throw std::invalid_argument("lemma1_constants: ell must be >= 0");

  SystemBoundConstants k;
  k.in = in;
  const double nA = in.norm_A;
  const double nB = in.norm_B;
  k.c_A = nA + in.c_Abar;
  k.c_B = nB + in.c_Bbar;

  // max over t of {r^t c0 + sum_{i<t} r^i step}
  auto horizon_max = [&](double r, double c0, double step) {
    double best = c0;
    double pow_t = 1.0;
    double geo = 0.0;
    for (Index t = 1; t <= in.ell; ++t) {
      geo += pow_t * step;
      pow_t *= r;
      best = std::max(best, pow_t * c0 + geo);
    }
    return best;
  };

  k.c_M = horizon_max(k.c_A, in.c_X, k.c_B * in.c_U);
  k.c_N = horizon_max(nA, in.c_mu, nB * in.c_nu + in.c_Abar * k.c_M + in.c_Bbar * in.c_U);
  k.c_W = k.c_N * in.c_U + k.c_M * in.c_nu;
  k.c_FX = (2.0 * nA * in.c_Abar + in.c_SigmaA_prime) * k.c_M * k.c_M;
  k.c_FU = 3.0 * (nB * nB + in.norm_SigmaB_prime) * in.c_U * in.c_nu +
           (2.0 * nB * in.c_Bbar + in.c_SigmaB_prime) * in.c_U * in.c_U;
  k.c_FXU = 2.0 * nA * nB * k.c_W +
            (2.0 * nA * in.c_Bbar + 2.0 * nB * in.c_Abar + 2.0 * in.c_Abar * in.c_Bbar) * k.c_M * in.c_U;
  k.c_F = horizon_max(nA * nA + in.norm_SigmaA_prime, in.c_DeltaX, k.c_FX + k.c_FU + k.c_FXU);
  return k;
}

BoundInputs bound_inputs_for(const MultNoiseSystem& sys, const InputSchedule& schedule,
                             const InitialState& init) {
  validate_schedule(schedule);
  const LiftedDynamics L = lift(sys);
  BoundInputs in;
  in.ell = schedule.ell();
  in.norm_A = spectral_norm(sys.A);
  in.norm_B = spectral_norm(sys.B);
  in.norm_SigmaA_prime = spectral_norm(L.SigmaA_prime);
  in.norm_SigmaB_prime = spectral_norm(L.SigmaB_prime);
  in.c_Abar = sys.c_Abar;
  in.c_Bbar = sys.c_Bbar;
  in.c_X = init.norm_bound();
  in.c_mu = init.kind == InitialState::Kind::Fixed ? 0.0 : init.norm_bound() - init.center.norm();
  in.c_DeltaX = init.kind == InitialState::Kind::Fixed ? 0.0 : 2.0 * in.c_X * in.c_X;
  const double m = double(schedule.m());
  for (Index t = 0; t < schedule.ell(); ++t) {
    const double spread = spectral_norm(psd_factor(schedule.Ubar[t], "Ubar"));
    double dev = 0.0;
    if (spread > 0) dev = schedule.law == ComponentLaw::Uniform ? spread * std::sqrt(3.0 * m) : kInf;
    in.c_nu = std::max(in.c_nu, dev);
    in.c_U = std::max(in.c_U, schedule.nu[t].norm() + dev);
  }
  in.c_SigmaA_prime = in.c_Abar * in.c_Abar + in.norm_SigmaA_prime;
  in.c_SigmaB_prime = in.c_Bbar * in.c_Bbar + in.norm_SigmaB_prime;
  return in;
}

BoundContext make_bound_context(const MultNoiseSystem& sys, const InputSchedule& schedule,
                                const InitialState& init, const SystemBoundConstants& k, Index n_r,
                                double eps_max) {
  if (!(eps_max > 0 && eps_max <= 1)) throw std::invalid_argument("make_bound_context: eps_max must be in (0, 1]");
  if (n_r < 1) throw std::invalid_argument("make_bound_context: n_r must be >= 1");
  const LiftedDynamics L = lift(sys);
  const MomentTrajectory tr = propagate_second(L, schedule, init.mean(), svec(init.second_moment()));
  const RegressionMatrices R = assemble(tr, schedule, L);
  const Index ell = schedule.ell();
  const Index hn = half_dim(sys.n());

  BoundContext c;
  c.n = sys.n();
  c.m = sys.m();
  c.ell = ell;
  c.n_r = n_r;
  c.eps_max = eps_max;
  const Matrix ZZ = R.Z * R.Z.transpose();
  const Matrix DD = R.D * R.D.transpose();
  const Matrix CC = R.C * R.C.transpose();
  c.lmin_ZZ = std::max(0.0, min_eigenvalue(ZZ));
  c.lmax_ZZ = max_eigenvalue(ZZ);
  c.lmax_YY = max_eigenvalue(R.Y * R.Y.transpose());
  c.lmin_DD = std::max(0.0, min_eigenvalue(DD));
  c.lmax_DD = max_eigenvalue(DD);
  c.lmin_CC = std::max(0.0, min_eigenvalue(CC));
  c.lmax_CC = max_eigenvalue(CC);
  c.norm_Y = spectral_norm(R.Y);
  c.norm_Z = spectral_norm(R.Z);
  c.norm_C = spectral_norm(R.C);
  c.norm_D = spectral_norm(R.D);
  c.norm_A = spectral_norm(sys.A);
  c.norm_B = spectral_norm(sys.B);
  c.norm_M1 = spectral_norm(R.D.topRows(hn));
  c.norm_U = spectral_norm(R.D.bottomRows(R.D.rows() - hn));
  Matrix L1(sys.n() * sys.m(), ell);
  for (Index col = 0; col < ell; ++col) L1.col(col) = tr.W[ell - 1 - col];
  c.norm_L1 = spectral_norm(L1);
  c.c_N = k.c_N;
  c.c_F = k.c_F;
  c.c_W = k.c_W;
  return c;
}

LogBound delta_Y(const BoundContext& c, double eps) {
  return bernstein(double(c.n + c.ell), c.c_N, c, eps);
}

LogBound delta_YZ(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  const double h = 0.5 * (c.norm_Y + c.norm_Z);
  return delta_Y(c, sqrt_shift(h * h, eps));
}

LogBound delta_0(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  return delta_Y(c, sqrt_shift(c.lmax_ZZ, eps));
}

LogBound delta_1(const BoundContext& c, double eps) {
  return scaled(double(c.n + c.m) * std::log(9.0), delta_0(c, eps));
}

LogBound delta_2(const BoundContext& c, double eps) {
  const double kappa = c.lmin_ZZ > 0 ? c.lmax_ZZ / c.lmin_ZZ : kInf;
  return scaled(double(c.n + c.m) * std::log(16.0 * kappa + 1.0), delta_0(c, eps));
}

LogBound delta_m(const BoundContext& c, double eps) {
  return scaled(log_covering(double(c.n + c.m), c.lmax_ZZ, c.lmin_ZZ), delta_0(c, eps));
}

LogBound delta_ZZ(const BoundContext& c, double eps) {
  if (!(eps > 0 && eps < c.eps_max)) return vacuous();
  const double lmin = c.lmin_ZZ;
  LogBound b = delta_0(c, 0.5 * lmin * lmin * (1.0 - eps / c.eps_max) * eps) +
               delta_m(c, eps * lmin / (c.eps_max * (2.0 + lmin / c.lmax_ZZ)));
  b.monotone = b.monotone && eps < 0.5 * c.eps_max;
  return b;
}

double delta_AB_range(const BoundContext& c) {
  return 3.0 * c.eps_max * std::min(std::sqrt(c.lmax_YY * c.lmax_ZZ), c.eps_max);
}

LogBound delta_AB(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  LogBound b = delta_YZ(c, c.lmin_ZZ * eps / 3.0) + delta_YZ(c, std::sqrt(eps / 3.0)) +
               delta_ZZ(c, eps / (3.0 * std::sqrt(c.lmax_YY * c.lmax_ZZ))) +
               delta_ZZ(c, std::sqrt(eps / 3.0));
  return in_open_range(b, eps < delta_AB_range(c));
}

LogBound eta_D(const BoundContext& c, double eps) {
  return bernstein(double(half_dim(c.n) + c.ell), c.c_F, c, eps);
}

LogBound eta_L(const BoundContext& c, double eps) {
  return bernstein(double(c.n * c.m + c.ell), c.c_W, c, eps);
}

LogBound eta_A(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  return delta_AB(c, std::sqrt(eps) / 2.0) + delta_AB(c, eps / (8.0 * std::sqrt(c.norm_A)));
}

LogBound eta_B(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  return delta_AB(c, std::sqrt(eps) / 2.0) + delta_AB(c, eps / (8.0 * std::sqrt(c.norm_B)));
}

LogBound eta_AB(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  return scaled(std::log(2.0), delta_AB(c, std::sqrt(eps / 3.0))) +
         delta_AB(c, eps / (3.0 * std::sqrt(c.norm_B))) + delta_AB(c, eps / (3.0 * std::sqrt(c.norm_A)));
}

LogBound eta_AM(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  return eta_A(c, eps / (3.0 * c.norm_M1)) + eta_D(c, eps / (6.0 * c.norm_A * c.norm_A)) +
         eta_A(c, std::sqrt(eps / 3.0)) + eta_D(c, std::sqrt(eps / 3.0));
}

LogBound eta_KL(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  return eta_AB(c, eps / (3.0 * c.norm_L1)) + eta_L(c, eps / (3.0 * c.norm_A * c.norm_B)) +
         eta_AB(c, std::sqrt(eps / 3.0)) + eta_L(c, std::sqrt(eps / 3.0));
}

LogBound eta_C(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  return eta_D(c, eps / 5.0) + eta_AM(c, eps / 5.0) + scaled(std::log(2.0), eta_KL(c, eps / 5.0)) +
         eta_B(c, eps / (5.0 * c.norm_U));
}

LogBound eta_CD(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  return eta_C(c, std::sqrt(eps / 3.0)) + eta_D(c, std::sqrt(eps / 3.0)) + eta_C(c, eps / (3.0 * c.norm_D)) +
         eta_D(c, eps / (3.0 * c.norm_C));
}

LogBound eta_0(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  return eta_D(c, sqrt_shift(c.lmax_DD, eps));
}

LogBound eta_m(const BoundContext& c, double eps) {
  const double d = double(half_dim(c.n) + half_dim(c.m));
  return scaled(log_covering(d, c.lmax_DD, c.lmin_DD), eta_0(c, eps));
}

LogBound eta_DD(const BoundContext& c, double eps) {
  if (!(eps > 0 && eps < c.eps_max)) return vacuous();
  const double lmin = c.lmin_DD;
  LogBound b = eta_0(c, 0.5 * lmin * lmin * (1.0 - eps / c.eps_max) * eps) +
               eta_m(c, eps * lmin / (c.eps_max * (2.0 + lmin / c.lmax_DD)));
  b.monotone = b.monotone && eps < 0.5 * c.eps_max;
  return b;
}

double eta_range(const BoundContext& c) {
  return 3.0 * c.eps_max * std::min(std::sqrt(c.lmax_CC * c.lmax_DD), c.eps_max);
}

LogBound eta(const BoundContext& c, double eps) {
  if (!(eps > 0)) return vacuous();
  // First term uses lambda_min(D D^T), as in the final step of the proof.
  LogBound b = eta_CD(c, c.lmin_DD * eps / 3.0) + eta_CD(c, std::sqrt(eps / 3.0)) +
               eta_DD(c, eps / (3.0 * std::sqrt(c.lmax_CC * c.lmax_DD))) + eta_DD(c, std::sqrt(eps / 3.0));
  return in_open_range(b, eps < eta_range(c));
}

namespace {

// Largest eps in (0, hi) for which `flag` holds, given flag is true below some threshold.
double flag_threshold(const std::function<bool(double)>& flag, double hi) {
  if (flag(hi * (1 - 1e-12))) return hi;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (flag(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace

double delta_AB_monotone_range(const BoundContext& c) {
  return flag_threshold([&](double e) { return delta_AB(c, e).monotone; }, delta_AB_range(c));
}

double eta_monotone_range(const BoundContext& c) {
  return flag_threshold([&](double e) { return eta(c, e).monotone; }, eta_range(c));
}

DeltaFamily delta_family(const BoundContext& c, double eps) {
  if (!(eps > 0) || !std::isfinite(eps)) throw std::domain_error("delta_family: eps must be positive and finite");
  DeltaFamily f;
  f.eps = eps;
  f.Y = delta_Y(c, eps);
  f.YZ = delta_YZ(c, eps);
  f.zero = delta_0(c, eps);
  f.one = delta_1(c, eps);
  f.two = delta_2(c, eps);
  f.m = delta_m(c, eps);
  f.ZZ = delta_ZZ(c, eps);
  f.AB = delta_AB(c, eps);
  f.vacuous_warning = c.n + c.m > 20;
  return f;
}

EtaFamily eta_family(const BoundContext& c, double eps) {
  if (!(eps > 0) || !std::isfinite(eps)) throw std::domain_error("eta_family: eps must be positive and finite");
  EtaFamily f;
  f.eps = eps;
  f.D = eta_D(c, eps);
  f.L = eta_L(c, eps);
  f.A = eta_A(c, eps);
  f.B = eta_B(c, eps);
  f.AB = eta_AB(c, eps);
  f.AM = eta_AM(c, eps);
  f.KL = eta_KL(c, eps);
  f.C = eta_C(c, eps);
  f.CD = eta_CD(c, eps);
  f.zero = eta_0(c, eps);
  f.m = eta_m(c, eps);
  f.DD = eta_DD(c, eps);
  f.total = eta(c, eps);
  f.vacuous_warning = c.n + c.m > 20;
  return f;
}

double epsilon_Y(const BoundContext& c, double delta) {
  const double pref = double(c.n + c.ell);
  if (!(delta > 0 && delta < pref)) throw std::domain_error("epsilon_Y: delta outside (0, n + ell)");
  const double lc2 = double(c.ell) * c.c_N * c.c_N;
  const double lg = std::log(pref / delta);
  const double nr = double(c.n_r);
  return std::sqrt(lc2) * lg / (3.0 * nr) + std::sqrt(lc2 * lg * lg / (9.0 * nr * nr) + 2.0 * lc2 * lg / nr);
}

double invert_bound(const std::function<LogBound(double)>& bound, double delta, double lo, double hi) {
  if (!(delta > 0)) throw std::domain_error("invert_bound: delta must be positive");
  if (!(lo > 0 && hi > lo)) throw std::domain_error("invert_bound: need 0 < lo < hi");
  const double target = std::log(delta);
  const double flo = bound(lo).log_value;
  const double fhi = bound(hi).log_value;
  if (!(flo >= target && fhi <= target)) throw std::domain_error("invert_bound: delta outside achievable range");
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = bound(mid).log_value;
    if (std::abs(std::expm1(f - target)) <= 1e-10) return mid;
    if (f > target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace mnsid
