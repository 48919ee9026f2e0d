#include "kernelforge/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <vector>

namespace kernelforge {

namespace {

constexpr double kSymmetryTol = 1e-8;
constexpr double kNegativeTol = 1e-8;

void make_first_component_positive(Eigen::Ref<Vector> v) {
  const double scale = v.cwiseAbs().maxCoeff();
  for (Index k = 0; k < v.size(); ++k) {
    if (std::abs(v[k]) > 1e-12 * scale) {
      if (v[k] < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

TopQEigensystem top_q_eigensystem(const Matrix& A, Index q) {
  const Index s = A.rows();
  if (A.cols() != s) throw DimensionError("top_q_eigensystem: matrix is not square");
  if (s < 1) throw InvalidArgument("top_q_eigensystem: empty matrix");
  if (s > kMaxDenseEigenSize) {
    throw InvalidArgument("top_q_eigensystem: size " + std::to_string(s) +
                          " exceeds the dense eigensolver cap of " +
                          std::to_string(kMaxDenseEigenSize));
  }
  if (q < 0 || q >= s) {
    throw InvalidArgument("top_q_eigensystem: need 0 <= q < s, got q=" + std::to_string(q) +
                          ", s=" + std::to_string(s));
  }
  if (!A.allFinite()) throw NonFiniteError("top_q_eigensystem: non-finite entries");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw InvalidArgument("top_q_eigensystem: matrix is not symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(A);
  if (solver.info() != Eigen::Success) throw Error("top_q_eigensystem: eigensolver failed");
  const Vector& ascending = solver.eigenvalues();

  // Descending order; stable sort keeps ties in ascending solver index.
  std::vector<Index> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return ascending[a] > ascending[b]; });

  const double top = ascending[order.front()];
  const double bottom = ascending[order.back()];
  if (bottom < -kNegativeTol * std::max(top, 0.0) || top < 0.0) {
    throw InvalidArgument("top_q_eigensystem: matrix is not positive semi-definite "
                          "(smallest eigenvalue " + std::to_string(bottom) + ")");
  }

  TopQEigensystem eig;
  eig.source_size = s;
  eig.values.resize(q);
  eig.vectors.resize(s, q);
  for (Index i = 0; i < q; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    eig.values[i] = ascending[src];
    eig.vectors.col(i) = solver.eigenvectors().col(src);
    make_first_component_positive(eig.vectors.col(i));
  }
  eig.tail = std::max(0.0, ascending[order[static_cast<std::size_t>(q)]]);
  return eig;
}

Matrix nystrom_coefficients(const TopQEigensystem& eig) {
  Matrix coeffs = eig.vectors;
  for (Index i = 0; i < eig.q(); ++i) {
    if (!(eig.values[i] > 0.0)) {
      throw SingularMatrixError("nystrom_coefficients: eigenvalue " + std::to_string(i) +
                                " is not positive");
    }
    coeffs.col(i) /= std::sqrt(eig.values[i]);
  }
  return coeffs;
}

bool check_nystrom_ratio(Index s, Index q) {
  if (q == 0 || s > 10 * q) return true;
  std::cerr << "warning: Nystrom subsample size s=" << s << " is not more than 10x the "
            << "preconditioner level q=" << q << "; the eigensystem may be unstable\n";
  return false;
}

}  // namespace kernelforge
