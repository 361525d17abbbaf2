#pragma once

#include "mnsid/shape_ops.h"

#include <cstdint>
#include <string>
#include <vector>

namespace mnsid {

enum class EntryCase {
  DiagDiag,   // (i,i),(k,k): E{Abar_ik^2}
  DiagOff,    // (i,i),(k,l), k<l: 2 E{Abar_ik Abar_il}
  OffDiag,    // (i,j),(k,k), i<j: E{Abar_ik Abar_jk}
  OffOff,     // (i,j),(k,l): E{Abar_ik Abar_jl} + E{Abar_il Abar_jk}
};

std::string to_string(EntryCase c);

struct EntryMapResult {
  Index row = 0;  // 1-based reduced coordinates, (i-1)(n-i/2)+j
  Index col = 0;
  EntryCase kind = EntryCase::DiagDiag;
};

// Requires 1 <= i <= j <= n and 1 <= k <= l <= n (1-based).
EntryMapResult entry_map(Index i, Index j, Index k, Index l, Index n);

// 1-based reduced position of pair (i, j), i <= j.
Index reduced_position(Index i, Index j, Index n);

// E{Abar_ab Abar_cd} read from Sigma_A (1-based indices).
double sigma_entry(const Matrix& Sigma_A, Index a, Index b, Index c, Index d, Index n);

// Value of the reduced entry computed from Sigma_A through the case formulas.
double reduced_entry_from_cases(const Matrix& Sigma_A, Index i, Index j, Index k, Index l, Index n);

inline Index d_alpha(Index n) { return n * n * (n - 1) * (n - 1) / 4; }
inline Index d_beta(Index n, Index m) { return n * m * (n - 1) * (m - 1) / 4; }

// Summands are ordered with the left pair (i<j) outermost, each pair in lexicographic order.
Matrix build_E_alpha(const Vector& alpha, Index n);
Matrix build_E_beta(const Vector& beta, Index n, Index m);

struct EquivalenceClass {
  Index n = 0;
  Index m = 0;
  Matrix SigmaA_tilde;
  Matrix SigmaB_tilde;
  Index d_alpha = 0;
  Index d_beta = 0;
  Matrix base_SigmaA;  // Sigma_A(0)
  Matrix base_SigmaB;  // Sigma_B(0)
};

EquivalenceClass make_class(const Matrix& SigmaA_tilde, const Matrix& SigmaB_tilde, Index n, Index m);

struct ClassMember {
  Matrix Sigma_A;
  Matrix Sigma_B;
  bool psd_A = false;
  bool psd_B = false;
};

ClassMember sigma_from_class(const EquivalenceClass& ec, const Vector& alpha, const Vector& beta);

bool is_psd(const Matrix& S, double tol = 1e-10);
// lambda_min > 1e-8 * lambda_max
bool is_strictly_pd(const Matrix& S);

enum class Verdict { Unique, InfinitelyMany, UniqueUnderConstraints, Undetermined };
std::string to_string(Verdict v);

struct UniquenessVerdict {
  Verdict overall = Verdict::Undetermined;
  Verdict a_part = Verdict::Undetermined;
  Verdict b_part = Verdict::Undetermined;
  std::vector<std::string> reasons;
};

UniquenessVerdict classify_uniqueness(Index n, Index m, const Matrix& Sigma_A, const Matrix& Sigma_B);

struct PairConstraint {
  Index i = 0, j = 0, k = 0, l = 0;  // 1-based, i<j, k<l
  double gamma = 1.0;
  double delta = -1.0;
  double tau = 0.0;
};

// gamma * E{Abar_ik Abar_jl} + delta * E{Abar_il Abar_jk} = tau for every i<j, k<l.
class ConstraintSet {
 public:
  // E{Abar_ik Abar_jl} = E{Abar_il Abar_jk} on every pair.
  static ConstraintSet diagonal_independence();
  ConstraintSet(double gamma, double delta, double tau);

  void set(const PairConstraint& c);
  PairConstraint get(Index i, Index j, Index k, Index l) const;

 private:
  PairConstraint default_;
  std::vector<PairConstraint> overrides_;
};

struct ConstrainedRecovery {
  Matrix Sigma_A;
  bool psd = false;
};

ConstrainedRecovery recover_under_constraints(const Matrix& SigmaA_tilde, Index n, const ConstraintSet& cs);

// Nearest PSD matrix in Frobenius norm.
Matrix project_psd(const Matrix& S);

// Grid scan of alpha (d_alpha == 1) or seeded random search (d_alpha > 1) for PSD members.
std::vector<Vector> scan_alpha_psd(const EquivalenceClass& ec, double lo, double hi, Index count,
                                   std::uint64_t seed = 0);

}  // namespace mnsid
