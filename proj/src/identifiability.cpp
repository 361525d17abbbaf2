#include "mnsid/identifiability.h"

#include "mnsid/rng.h"

#include <random>
#include <stdexcept>

namespace mnsid {

std::string to_string(EntryCase c) {
  switch (c) {
    case EntryCase::DiagDiag: return "diag-diag";
    case EntryCase::DiagOff: return "diag-off";
    case EntryCase::OffDiag: return "off-diag";
    case EntryCase::OffOff: return "off-off";
  }
  return "?";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Unique: return "Unique";
    case Verdict::InfinitelyMany: return "InfinitelyMany";
    case Verdict::UniqueUnderConstraints: return "UniqueUnderConstraints";
    case Verdict::Undetermined: return "Undetermined";
  }
  return "?";
}

Index reduced_position(Index i, Index j, Index n) {
  // (i-1)(n - i/2) + j, kept in integers
  return (i - 1) * (2 * n - i) / 2 + j;
}

EntryMapResult entry_map(Index i, Index j, Index k, Index l, Index n) {
  if (!(1 <= i && i <= j && j <= n && 1 <= k && k <= l && l <= n))
    throw std::invalid_argument("entry_map: indices must satisfy 1 <= i <= j <= n, 1 <= k <= l <= n");
  EntryMapResult r;
  r.row = reduced_position(i, j, n);
  r.col = reduced_position(k, l, n);
  if (i == j)
    r.kind = k == l ? EntryCase::DiagDiag : EntryCase::DiagOff;
  else
    r.kind = k == l ? EntryCase::OffDiag : EntryCase::OffOff;
  return r;
}

double sigma_entry(const Matrix& S, Index a, Index b, Index c, Index d, Index n) {
  return S(vec_position(a, b, n) - 1, vec_position(c, d, n) - 1);
}

double reduced_entry_from_cases(const Matrix& S, Index i, Index j, Index k, Index l, Index n) {
  switch (entry_map(i, j, k, l, n).kind) {
    case EntryCase::DiagDiag: return sigma_entry(S, i, k, i, k, n);
    case EntryCase::DiagOff: return 2.0 * sigma_entry(S, i, k, i, l, n);
    case EntryCase::OffDiag: return sigma_entry(S, i, k, j, k, n);
    case EntryCase::OffOff: return sigma_entry(S, i, k, j, l, n) + sigma_entry(S, i, l, j, k, n);
  }
  return 0.0;
}

namespace {

std::vector<std::pair<Index, Index>> strict_pairs(Index n) {
  std::vector<std::pair<Index, Index>> p;
  for (Index i = 1; i <= n; ++i)
    for (Index j = i + 1; j <= n; ++j) p.emplace_back(i, j);
  return p;
}

// e_{(i-1)n+j} - e_{(j-1)n+i}
Vector antisym_direction(Index i, Index j, Index n) {
  Vector v = Vector::Zero(n * n);
  v(vec_position(j, i, n) - 1) += 1.0;
  v(vec_position(i, j, n) - 1) -= 1.0;
  return v;
}

Matrix build_E(const Vector& coef, Index n, Index m) {
  const auto left = strict_pairs(n);
  const auto right = strict_pairs(m);
  if (coef.size() != Index(left.size() * right.size()))
    throw std::invalid_argument("build_E: expected " + std::to_string(left.size() * right.size()) +
                                " coefficients, got " + std::to_string(coef.size()));
  Matrix E = Matrix::Zero(n * n, m * m);
  Index idx = 0;
  for (const auto& [i, j] : left) {
    const Vector u = antisym_direction(i, j, n);
    for (const auto& [k, l] : right) {
      E += coef(idx++) * u * antisym_direction(k, l, m).transpose();
    }
  }
  return E;
}

}  // namespace

Matrix build_E_alpha(const Vector& alpha, Index n) { return build_E(alpha, n, n); }
Matrix build_E_beta(const Vector& beta, Index n, Index m) { return build_E(beta, n, m); }

EquivalenceClass make_class(const Matrix& SA, const Matrix& SB, Index n, Index m) {
  if (SA.rows() != half_dim(n) || SA.cols() != half_dim(n) || SB.rows() != half_dim(n) ||
      SB.cols() != half_dim(m))
    throw std::invalid_argument("make_class: reduced covariance shapes do not match (n, m)");
  EquivalenceClass ec;
  ec.n = n;
  ec.m = m;
  ec.SigmaA_tilde = SA;
  ec.SigmaB_tilde = SB;
  ec.d_alpha = d_alpha(n);
  ec.d_beta = d_beta(n, m);
  const ClassMember base = sigma_from_class(ec, Vector::Zero(ec.d_alpha), Vector::Zero(ec.d_beta));
  ec.base_SigmaA = base.Sigma_A;
  ec.base_SigmaB = base.Sigma_B;
  return ec;
}

bool is_psd(const Matrix& S, double tol) {
  if (S.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S), Eigen::EigenvaluesOnly);
  const Vector& lam = es.eigenvalues();
  return lam(0) >= -tol * std::max(1.0, std::abs(lam(lam.size() - 1)));
}

bool is_strictly_pd(const Matrix& S) {
  if (S.size() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S), Eigen::EigenvaluesOnly);
  const Vector& lam = es.eigenvalues();
  const double lmax = lam(lam.size() - 1);
  return lmax > 0 && lam(0) > 1e-8 * lmax;
}

ClassMember sigma_from_class(const EquivalenceClass& ec, const Vector& alpha, const Vector& beta) {
  const Index n = ec.n;
  const Index m = ec.m;
  const Matrix Dn = selection_matrices(int(n)).D;
  const Matrix Dm = selection_matrices(int(m)).D;
  // Q1 S Q^T D + E, then F back to covariance layout
  auto expand = [](const Matrix& S, Index rn, Index cn) {
    const Matrix left = apply_Q_rows(S, rn);
    return Matrix(apply_Q_rows(left.transpose(), cn).transpose());
  };
  ClassMember out;
  out.Sigma_A = reshape_F(expand(ec.SigmaA_tilde, n, n) * Dn + build_E_alpha(alpha, n), n, n, n, n);
  out.Sigma_B = reshape_F(expand(ec.SigmaB_tilde, n, m) * Dm + build_E_beta(beta, n, m), n, m, n, m);
  out.psd_A = is_psd(out.Sigma_A);
  out.psd_B = is_psd(out.Sigma_B);
  return out;
}

UniquenessVerdict classify_uniqueness(Index n, Index m, const Matrix& Sigma_A, const Matrix& Sigma_B) {
  if (!is_psd(Sigma_A) || !is_psd(Sigma_B))
    throw std::invalid_argument("classify_uniqueness: covariances must be PSD");
  UniquenessVerdict v;
  if (n == 1) {
    v.a_part = Verdict::Unique;
    v.reasons.push_back("n = 1: no free alpha parameters");
  } else if (is_strictly_pd(Sigma_A)) {
    v.a_part = Verdict::InfinitelyMany;
    v.reasons.push_back("n >= 2 and Sigma_A is positive definite");
  } else {
    v.a_part = Verdict::Undetermined;
    v.reasons.push_back("n >= 2 and Sigma_A is singular: not decided by the proposition");
  }
  if (m == 1 || n == 1) {
    v.b_part = Verdict::Unique;
    v.reasons.push_back(m == 1 ? "m = 1: Sigma_B is unique" : "n = 1: Sigma_B is unique");
  } else if (is_strictly_pd(Sigma_B)) {
    v.b_part = Verdict::InfinitelyMany;
    v.reasons.push_back("m >= 2 and Sigma_B is positive definite");
  } else {
    v.b_part = Verdict::Undetermined;
    v.reasons.push_back("m >= 2 and Sigma_B is singular: not decided by the proposition");
  }
  if (v.a_part == Verdict::InfinitelyMany || v.b_part == Verdict::InfinitelyMany)
    v.overall = Verdict::InfinitelyMany;
  else if (v.a_part == Verdict::Unique && v.b_part == Verdict::Unique)
    v.overall = Verdict::Unique;
  else
    v.overall = Verdict::Undetermined;
  return v;
}

ConstraintSet ConstraintSet::diagonal_independence() { return ConstraintSet(1.0, -1.0, 0.0); }

ConstraintSet::ConstraintSet(double gamma, double delta, double tau) {
  if (gamma == delta) throw std::invalid_argument("ConstraintSet: gamma must differ from delta");
  default_.gamma = gamma;
  default_.delta = delta;
  default_.tau = tau;
}

void ConstraintSet::set(const PairConstraint& c) {
  if (c.gamma == c.delta) throw std::invalid_argument("ConstraintSet: gamma must differ from delta");
  if (!(c.i < c.j && c.k < c.l)) throw std::invalid_argument("ConstraintSet: requires i<j and k<l");
  for (auto& o : overrides_)
    if (o.i == c.i && o.j == c.j && o.k == c.k && o.l == c.l) {
      o = c;
      return;
    }
  overrides_.push_back(c);
}

PairConstraint ConstraintSet::get(Index i, Index j, Index k, Index l) const {
  for (const auto& o : overrides_)
    if (o.i == i && o.j == j && o.k == k && o.l == l) return o;
  PairConstraint c = default_;
  c.i = i;
  c.j = j;
  c.k = k;
  c.l = l;
  return c;
}

ConstrainedRecovery recover_under_constraints(const Matrix& SA, Index n, const ConstraintSet& cs) {
  if (SA.rows() != half_dim(n) || SA.cols() != half_dim(n))
    throw std::invalid_argument("recover_under_constraints: SigmaA_tilde must be n(n+1)/2 square");
  Matrix S = Matrix::Zero(n * n, n * n);
  auto put = [&](Index a, Index b, Index c, Index d, double v) {
    S(vec_position(a, b, n) - 1, vec_position(c, d, n) - 1) = v;
    S(vec_position(c, d, n) - 1, vec_position(a, b, n) - 1) = v;
  };
  for (Index i = 1; i <= n; ++i)
    for (Index j = i; j <= n; ++j)
      for (Index k = 1; k <= n; ++k)
        for (Index l = k; l <= n; ++l) {
          const EntryMapResult e = entry_map(i, j, k, l, n);
          const double r = SA(e.row - 1, e.col - 1);
          switch (e.kind) {
            case EntryCase::DiagDiag: put(i, k, i, k, r); break;
            case EntryCase::DiagOff: put(i, k, i, l, 0.5 * r); break;
            case EntryCase::OffDiag: put(i, k, j, k, r); break;
            case EntryCase::OffOff: {
              const PairConstraint c = cs.get(i, j, k, l);
              const double x = (c.tau - c.delta * r) / (c.gamma - c.delta);
              put(i, k, j, l, x);
              put(i, l, j, k, r - x);
              break;
            }
          }
        }
  ConstrainedRecovery out;
  out.Sigma_A = S;
  out.psd = is_psd(S);
  return out;
}

Matrix project_psd(const Matrix& S) {
  if (S.rows() != S.cols()) throw std::invalid_argument("project_psd: matrix is not square");
  if (S.size() == 0) return S;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S));
  const Matrix& V = es.eigenvectors();
  return symmetrize(V * es.eigenvalues().cwiseMax(0.0).asDiagonal() * V.transpose());
}

std::vector<Vector> scan_alpha_psd(const EquivalenceClass& ec, double lo, double hi, Index count,
                                   std::uint64_t seed) {
  std::vector<Vector> feasible;
  const Vector beta = Vector::Zero(ec.d_beta);
  if (ec.d_alpha == 0) {
    if (sigma_from_class(ec, Vector(), beta).psd_A) feasible.push_back(Vector());
    return feasible;
  }
  for (Index s = 0; s < count; ++s) {
    Vector a(ec.d_alpha);
    if (ec.d_alpha == 1) {
      a(0) = count == 1 ? lo : lo + (hi - lo) * double(s) / double(count - 1);
    } else {
      CounterRng rng(seed, std::uint64_t(s), 0, StreamRole::Experiment);
      std::uniform_real_distribution<double> d(lo, hi);
      for (Index i = 0; i < a.size(); ++i) a(i) = d(rng);
    }
    if (sigma_from_class(ec, a, beta).psd_A) feasible.push_back(a);
  }
  return feasible;
}

}  // namespace mnsid
