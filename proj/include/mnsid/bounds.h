#pragma once

#include "mnsid/mals.h"
#include "mnsid/moment_oracle.h"
#include "mnsid/system_model.h"

#include <functional>
#include <string>

namespace mnsid {

struct BoundInputs {
  double c_X = 0.0;        // ||x_0|| a.s.
  double c_U = 0.0;        // ||u_t|| a.s.
  double c_Abar = 0.0;     // ||Abar_t||_2 a.s.
  double c_Bbar = 0.0;
  double c_mu = 0.0;       // ||x_0 - E x_0|| a.s.
  double c_DeltaX = 0.0;   // ||vec(x_0 x_0^T - E x_0 x_0^T)|| a.s.
  double c_nu = 0.0;       // ||u_t - nu_t|| a.s.
  double c_SigmaA_prime = 0.0;  // ||Abar kron Abar - Sigma'_A||_2 a.s.
  double c_SigmaB_prime = 0.0;
  double norm_A = 0.0;
  double norm_B = 0.0;
  double norm_SigmaA_prime = 0.0;
  double norm_SigmaB_prime = 0.0;
  Index ell = 0;
};

struct SystemBoundConstants {
  BoundInputs in;
  double c_A = 0.0, c_B = 0.0, c_M = 0.0, c_N = 0.0, c_F = 0.0, c_W = 0.0;
  double c_FX = 0.0, c_FU = 0.0, c_FXU = 0.0;
};

SystemBoundConstants lemma1_constants(const BoundInputs& in);

// Input bounds for a bounded-law system, schedule and initial state, using the
// suggested c_DeltaX <= 2 c_X^2 and c_Sigma' <= c_bar^2 + ||Sigma'||.
BoundInputs bound_inputs_for(const MultNoiseSystem& sys, const InputSchedule& schedule,
                             const InitialState& init);

struct BoundContext {
  Index n = 0, m = 0, ell = 0, n_r = 0;
  double eps_max = 0.5;
  double lmin_ZZ = 0, lmax_ZZ = 0, lmax_YY = 0;
  double lmin_DD = 0, lmax_DD = 0, lmin_CC = 0, lmax_CC = 0;
  double norm_Y = 0, norm_Z = 0, norm_C = 0, norm_D = 0;
  double norm_A = 0, norm_B = 0;
  double norm_M1 = 0, norm_L1 = 0, norm_U = 0;
  double c_N = 0, c_F = 0, c_W = 0;
};

BoundContext make_bound_context(const MultNoiseSystem& sys, const InputSchedule& schedule,
                                const InitialState& init, const SystemBoundConstants& k, Index n_r,
                                double eps_max);

// log of a probability bound. Arguments outside a formula's validity interval
// give +inf (vacuous) and clear in_range.
struct LogBound {
  double log_value = 0.0;
  bool in_range = true;
  // False once some delta_ZZ / eta_DD argument reaches eps_max / 2.
  bool monotone = true;

  double value() const;
  double reported() const;  // min(1, value)
};

LogBound delta_Y(const BoundContext& c, double eps);
LogBound delta_YZ(const BoundContext& c, double eps);
LogBound delta_0(const BoundContext& c, double eps);
LogBound delta_1(const BoundContext& c, double eps);
LogBound delta_2(const BoundContext& c, double eps);
LogBound delta_m(const BoundContext& c, double eps);
LogBound delta_ZZ(const BoundContext& c, double eps);
LogBound delta_AB(const BoundContext& c, double eps);

LogBound eta_D(const BoundContext& c, double eps);
LogBound eta_L(const BoundContext& c, double eps);
LogBound eta_A(const BoundContext& c, double eps);
LogBound eta_B(const BoundContext& c, double eps);
LogBound eta_AB(const BoundContext& c, double eps);
LogBound eta_AM(const BoundContext& c, double eps);
LogBound eta_KL(const BoundContext& c, double eps);
LogBound eta_C(const BoundContext& c, double eps);
LogBound eta_CD(const BoundContext& c, double eps);
LogBound eta_0(const BoundContext& c, double eps);
LogBound eta_m(const BoundContext& c, double eps);
LogBound eta_DD(const BoundContext& c, double eps);
LogBound eta(const BoundContext& c, double eps);

// Upper ends of the stated ranges: 3 eps_max min{sqrt(lmax_YY lmax_ZZ), eps_max}
// and the analogue with C, D.
double delta_AB_range(const BoundContext& c);
double eta_range(const BoundContext& c);
// Sub-range on which every delta_ZZ argument stays below eps_max / 2, where the
// composite is provably monotone.
double delta_AB_monotone_range(const BoundContext& c);
double eta_monotone_range(const BoundContext& c);

struct DeltaFamily {
  double eps = 0.0;
  LogBound Y, YZ, zero, one, two, m, ZZ, AB;
  bool vacuous_warning = false;
};

struct EtaFamily {
  double eps = 0.0;
  LogBound D, L, A, B, AB, AM, KL, C, CD, zero, m, DD, total;
  bool vacuous_warning = false;
};

// Throws std::domain_error for eps <= 0 or non-finite; range violations past that are flagged.
DeltaFamily delta_family(const BoundContext& c, double eps);
EtaFamily eta_family(const BoundContext& c, double eps);

// Closed-form inverse of delta_Y.
double epsilon_Y(const BoundContext& c, double delta);

// Bisection on [lo, hi] for a decreasing bound: returns eps with |bound(eps) - delta| <= 1e-10 delta.
double invert_bound(const std::function<LogBound(double)>& bound, double delta, double lo, double hi);

}  // namespace mnsid
