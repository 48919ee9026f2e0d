#include "kernelforge/kernels.hpp"

#include "kernelforge/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kernelforge {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "laplace" || name == "Laplace") return KernelFamily::Laplace;
  if (name == "gaussian" || name == "Gaussian") return KernelFamily::Gaussian;
  throw InvalidArgument("unknown kernel family '" + std::string(name) + "'");
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Laplace:
      return "laplace";
    case KernelFamily::Gaussian:
      return "gaussian";
  }
  return "unknown";
}

KernelSpec::KernelSpec(KernelFamily family, double bandwidth)
    : family_(family), bandwidth_(bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InvalidArgument("kernel bandwidth must be positive and finite");
  }
}

double KernelSpec::evaluate(const double* x, const double* z, Index d) const noexcept {
  double sq = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double diff = x[k] - z[k];
    sq += diff * diff;
  }
  switch (family_) {
    case KernelFamily::Laplace:
      return std::exp(-std::sqrt(sq) / bandwidth_);
    case KernelFamily::Gaussian:
      return std::exp(-sq / (2.0 * bandwidth_ * bandwidth_));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void Dataset::validate() const {
  if (features.rows() < 1 || features.cols() < 1) {
    throw InvalidArgument("dataset needs at least one sample and one feature");
  }
  if (targets.cols() < 1) throw InvalidArgument("dataset needs at least one target column");
  if (targets.rows() != features.rows()) {
    throw DimensionError("dataset features have " + std::to_string(features.rows()) +
                         " rows but targets have " + std::to_string(targets.rows()));
  }
  if (!features.allFinite() || !targets.allFinite()) {
    throw NonFiniteError("dataset contains non-finite entries");
  }
}

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& z) {
  if (x.size() != z.size()) {
    throw DimensionError("eval_kernel: dimension mismatch (" + std::to_string(x.size()) +
                         " vs " + std::to_string(z.size()) + ")");
  }
  if (!x.allFinite() || !z.allFinite()) throw NonFiniteError("eval_kernel: non-finite input");
  return spec.evaluate(x.data(), z.data(), x.size());
}

Matrix kernel_matrix(const KernelSpec& spec, const Matrix& A, const Matrix& B,
                     Index block_rows) {
  if (A.cols() != B.cols()) {
    throw DimensionError("kernel_matrix: feature dimensions differ (" +
                         std::to_string(A.cols()) + " vs " + std::to_string(B.cols()) + ")");
  }
  if (block_rows < 1) throw InvalidArgument("kernel_matrix: block size must be positive");
  if (!A.allFinite() || !B.allFinite()) throw NonFiniteError("kernel_matrix: non-finite input");

  const Index n = A.rows();
  const Index m = B.rows();
  const Index d = A.cols();
  Matrix K(n, m);
  if (n == 0 || m == 0) return K;

  // Row-major copies give contiguous points for the inner loop.
  const RowMajorMatrix a = A;
  const RowMajorMatrix b = B;

  const auto blocks = static_cast<std::size_t>((n + block_rows - 1) / block_rows);
  parallel_for(blocks, [&](std::size_t blk) {
    const Index begin = static_cast<Index>(blk) * block_rows;
    const Index end = std::min(n, begin + block_rows);
    for (Index j = 0; j < m; ++j) {
      const double* bj = b.row(j).data();
      for (Index i = begin; i < end; ++i) K(i, j) = spec.evaluate(a.row(i).data(), bj, d);
    }
  });
  return K;
}

double kernel_diag_max(const KernelSpec& spec, const Matrix& X) {
  if (X.rows() < 1) throw InvalidArgument("kernel_diag_max: empty input");
  const RowMajorMatrix x = X;
  double best = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < x.rows(); ++i) {
    const double* xi = x.row(i).data();
    best = std::max(best, spec.evaluate(xi, xi, x.cols()));
  }
  return best;
}

}  // namespace kernelforge
