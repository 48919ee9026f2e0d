#pragma once

#include "kernelforge/types.hpp"

#include <string>
#include <string_view>

namespace kernelforge {

enum class KernelFamily { Laplace, Gaussian };

KernelFamily parse_kernel_family(std::string_view name);
std::string to_string(KernelFamily family);

/// A radial kernel with a bandwidth in the units of the input space.
///
///   Laplace:  K(x, z) = exp(-|x - z| / b)
///   Gaussian: K(x, z) = exp(-|x - z|^2 / (2 b^2))
///
/// Both satisfy K(x, x) = 1 and K(x, z) = K(z, x).
class KernelSpec {
 public:
  KernelSpec(KernelFamily family, double bandwidth);

  KernelFamily family() const noexcept { return family_; }
  double bandwidth() const noexcept { return bandwidth_; }

  /// Kernel value from two raw coordinate arrays of length d. Every kernel
  /// entry in the library goes through this function so that blocked and
  /// naive assembly agree bit for bit.
  double evaluate(const double* x, const double* z, Index d) const noexcept;

  bool operator==(const KernelSpec&) const = default;

 private:
  KernelFamily family_;
  double bandwidth_;
};

/// Training or test data: features n x d, targets n x c.
struct Dataset {
  Matrix features;
  Matrix targets;

  Index n() const noexcept { return features.rows(); }
  Index d() const noexcept { return features.cols(); }
  Index c() const noexcept { return targets.cols(); }

  /// Throws unless n, d, c >= 1, row counts agree, and all entries are finite.
  void validate() const;
};

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& z);

inline constexpr Index kDefaultKernelBlockRows = 256;

/// K(A, B) with entry (i, j) = K(a_i, b_j), assembled in row blocks of A.
/// Blocks may run on several threads; the result is independent of both the
/// block size and the thread count.
Matrix kernel_matrix(const KernelSpec& spec, const Matrix& A, const Matrix& B,
                     Index block_rows = kDefaultKernelBlockRows);

/// max_i K(x_i, x_i).
double kernel_diag_max(const KernelSpec& spec, const Matrix& X);

}  // namespace kernelforge
