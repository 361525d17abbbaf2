#include "mnsid/shape_ops.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mnsid {

Vector vec(const Matrix& M) {
  return Eigen::Map<const Vector>(M.data(), M.size());
}

Matrix mat(const Vector& v, Index p, Index q) {
  if (p < 0 || q < 0 || v.size() != p * q)
    throw std::invalid_argument("mat: length " + std::to_string(v.size()) + " does not match " +
                                std::to_string(p) + "x" + std::to_string(q));
  return Eigen::Map<const Matrix>(v.data(), p, q);
}

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index j = 0; j < A.cols(); ++j)
    for (Index i = 0; i < A.rows(); ++i)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

std::vector<Index> kept_positions(Index n) {
  std::vector<Index> pos;
  pos.reserve(half_dim(n));
  for (Index c = 0; c < n; ++c)
    for (Index r = c; r < n; ++r) pos.push_back(c * n + r);
  return pos;
}

SelectionMatrices selection_matrices(int n) {
  if (n < 1) throw std::invalid_argument("selection_matrices: n must be >= 1");
  const Index nn = Index(n) * n;
  SelectionMatrices s;
  s.n = n;
  // T: row (j-1)n+i of I is replaced by e_{(i-1)n+j} for i<j.
  s.T = Matrix::Identity(nn, nn);
  for (Index i = 1; i <= n; ++i)
    for (Index j = i + 1; j <= n; ++j) {
      const Index row = vec_position(i, j, n) - 1;
      s.T.row(row).setZero();
      s.T(row, vec_position(j, i, n) - 1) = 1.0;
    }
  const auto kept = kept_positions(n);
  const Index h = Index(kept.size());
  s.P = Matrix::Zero(h, nn);
  s.Q = Matrix::Zero(nn, h);
  for (Index k = 0; k < h; ++k) {
    s.P(k, kept[k]) = 1.0;
    s.Q.col(k) = s.T.col(kept[k]);
  }
  s.D = Matrix::Zero(nn, nn);
  for (Index k = 0; k < nn; ++k) s.D(k, k) = 0.5;
  for (Index i = 1; i <= n; ++i) s.D(vec_position(i, i, n) - 1, vec_position(i, i, n) - 1) = 1.0;
  return s;
}

Matrix apply_P_rows(const Matrix& M, Index n) {
  if (M.rows() != n * n) throw std::invalid_argument("apply_P_rows: expected n^2 rows");
  const auto kept = kept_positions(n);
  Matrix out(Index(kept.size()), M.cols());
  for (Index k = 0; k < Index(kept.size()); ++k) out.row(k) = M.row(kept[k]);
  return out;
}

Matrix apply_Q_cols(const Matrix& M, Index n) {
  if (M.cols() != n * n) throw std::invalid_argument("apply_Q_cols: expected n^2 columns");
  Matrix out(M.rows(), half_dim(n));
  Index k = 0;
  for (Index c = 0; c < n; ++c)
    for (Index r = c; r < n; ++r, ++k) {
      out.col(k) = M.col(c * n + r);
      if (r != c) out.col(k) += M.col(r * n + c);
    }
  return out;
}

Matrix apply_Q_rows(const Matrix& M, Index n) {
  if (M.rows() != half_dim(n)) throw std::invalid_argument("apply_Q_rows: expected n(n+1)/2 rows");
  Matrix out(n * n, M.cols());
  Index k = 0;
  for (Index c = 0; c < n; ++c)
    for (Index r = c; r < n; ++r, ++k) {
      out.row(c * n + r) = M.row(k);
      out.row(r * n + c) = M.row(k);
    }
  return out;
}

Matrix apply_Pt_cols(const Matrix& M, Index n) {
  if (M.cols() != half_dim(n)) throw std::invalid_argument("apply_Pt_cols: expected n(n+1)/2 columns");
  const auto kept = kept_positions(n);
  Matrix out = Matrix::Zero(M.rows(), n * n);
  for (Index k = 0; k < Index(kept.size()); ++k) out.col(kept[k]) = M.col(k);
  return out;
}

Vector svec(const Matrix& S) {
  if (S.rows() != S.cols()) throw std::invalid_argument("svec: matrix is not square");
  const double scale = S.size() ? S.cwiseAbs().maxCoeff() : 0.0;
  const double asym = S.size() ? (S - S.transpose()).cwiseAbs().maxCoeff() : 0.0;
  if (!(asym <= kSymTol * scale))
    throw std::invalid_argument("svec: asymmetry " + std::to_string(asym) + " exceeds tolerance");
  const Index n = S.rows();
  Vector v(half_dim(n));
  Index k = 0;
  for (Index c = 0; c < n; ++c)
    for (Index r = c; r < n; ++r, ++k) v(k) = 0.5 * (S(r, c) + S(c, r));
  return v;
}

Matrix smat(const Vector& v, Index n) {
  if (n < 0 || v.size() != half_dim(n))
    throw std::invalid_argument("smat: length " + std::to_string(v.size()) + " does not match n=" +
                                std::to_string(n));
  Matrix S(n, n);
  Index k = 0;
  for (Index c = 0; c < n; ++c)
    for (Index r = c; r < n; ++r, ++k) S(r, c) = S(c, r) = v(k);
  return S;
}

Matrix reshape_F(const Matrix& B, Index m, Index n, Index p, Index q) {
  if (B.rows() != m * p || B.cols() != n * q)
    throw std::invalid_argument("reshape_F: expected " + std::to_string(m * p) + "x" +
                                std::to_string(n * q) + " input");
  Matrix out(m * n, p * q);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) {
      const Matrix blk = B.block(i * p, j * q, p, q);
      out.row(j * m + i) = vec(blk).transpose();
    }
  return out;
}

Matrix reshape_G(const Matrix& X, Index m, Index n, Index p, Index q) {
  if (X.rows() != m * n || X.cols() != p * q)
    throw std::invalid_argument("reshape_G: expected " + std::to_string(m * n) + "x" +
                                std::to_string(p * q) + " input");
  Matrix out(m * p, n * q);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i)
      out.block(i * p, j * q, p, q) = mat(X.row(j * m + i).transpose(), p, q);
  return out;
}

Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

double min_eigenvalue(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(M), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

}  // namespace mnsid
