#pragma once

#include "kernelforge/types.hpp"

namespace kernelforge {

/// Leading q eigenpairs of a symmetric PSD s x s matrix plus the (q+1)-th
/// eigenvalue. Eigenvalues are sorted descending; each eigenvector has its
/// first nonzero component positive.
struct TopQEigensystem {
  Vector values;   // q, descending
  Matrix vectors;  // s x q, orthonormal columns
  double tail = 0.0;
  Index source_size = 0;

  Index q() const noexcept { return values.size(); }
};

/// Largest matrix accepted by the dense eigensolver.
inline constexpr Index kMaxDenseEigenSize = 5000;

/// Top-q eigensystem of A (0 <= q < s). q = 0 yields empty values/vectors and
/// tail = lambda_1. Rejects asymmetric input, q >= s, sizes beyond
/// kMaxDenseEigenSize, and eigenvalues below -1e-8 * lambda_1.
TopQEigensystem top_q_eigensystem(const Matrix& A, Index q);

/// Columns e_i / sqrt(lambda_i): the coefficients of the unit-norm RKHS
/// eigenfunctions psi_i = K(., X) e_i / sqrt(lambda_i).
Matrix nystrom_coefficients(const TopQEigensystem& eig);

/// Empirical stability guidance for the Nystrom eigensystem: s / q should
/// exceed 10. Prints a warning to stderr and returns false when it does not.
bool check_nystrom_ratio(Index s, Index q);

}  // namespace kernelforge
