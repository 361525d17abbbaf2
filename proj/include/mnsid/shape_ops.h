#pragma once

#include <Eigen/Dense>

#include <vector>

namespace mnsid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Relative asymmetry tolerated by svec before it refuses the input.
inline constexpr double kSymTol = 1e-9;

// 1-based position of entry (i, j) of an n-row matrix inside vec(.): (j-1)n+i.
inline Index vec_position(Index i, Index j, Index n) { return (j - 1) * n + i; }

// Stacks columns.
Vector vec(const Matrix& M);
Matrix mat(const Vector& v, Index p, Index q);

Matrix kron(const Matrix& A, const Matrix& B);

struct SelectionMatrices {
  int n = 0;
  Matrix P;  // n(n+1)/2 x n^2, keeps lower triangle incl. diagonal, column-major
  Matrix Q;  // n^2 x n(n+1)/2
  Matrix T;  // n^2 x n^2, Q*P
  Matrix D;  // n^2 x n^2 diagonal, 1 on vec positions of the diagonal, 1/2 elsewhere
};

SelectionMatrices selection_matrices(int n);

inline Index half_dim(Index n) { return n * (n + 1) / 2; }

// 0-based vec positions kept by P, in row order of P.
std::vector<Index> kept_positions(Index n);

// Gather-based applications of P and Q, valid for any n.
Matrix apply_P_rows(const Matrix& M, Index n);   // P * M
Matrix apply_Q_cols(const Matrix& M, Index n);   // M * Q
Matrix apply_Q_rows(const Matrix& M, Index n);   // Q * M
Matrix apply_Pt_cols(const Matrix& M, Index n);  // M * P, i.e. (P^T M^T)^T

Vector svec(const Matrix& S);
Matrix smat(const Vector& v, Index n);

// B is (m*p) x (n*q) with p x q blocks B_ij. Row (j-1)m+i of F(B) is vec(B_ij)^T.
Matrix reshape_F(const Matrix& B, Index m, Index n, Index p, Index q);
Matrix reshape_G(const Matrix& X, Index m, Index n, Index p, Index q);

Matrix symmetrize(const Matrix& M);
double min_eigenvalue(const Matrix& M);
double max_eigenvalue(const Matrix& M);
double spectral_norm(const Matrix& M);

}  // namespace mnsid
