#pragma once

#include "kernelforge/kernels.hpp"
#include "kernelforge/sampling.hpp"
#include "kernelforge/spectral.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace kernelforge {

/// Learning-rate rule used when the critical batch size exceeds the cap.
///   Paper:     eta = beta / (2m).
///   Corrected: eta = m / (2 beta), the dimensionally consistent form.
enum class Ep2LrRule { Paper, Corrected };

Ep2LrRule parse_ep2_lr_rule(std::string_view name);
std::string to_string(Ep2LrRule rule);

struct Ep2Hyperparameters {
  Index batch_size = 1;
  double learning_rate = 0.0;
};

/// Batch size m = min(ceil(beta / tail), batch_cap) and the matching step
/// size. tail is the (q+1)-th eigenvalue of the normalized subsample matrix
/// K(Z_s, Z_s) / s.
Ep2Hyperparameters ep2_hyperparameters(double beta, double tail, Index batch_cap,
                                       Ep2LrRule rule);

/// D_ii = (1 / (s lambda_i)) (1 - tail / lambda_i) for normalized eigenvalues.
Vector ep2_correction_diag(const Vector& eigenvalues, double tail, Index s);

struct Ep2Options {
  Index s = 0;  // Nystrom subset size, q < s <= p
  Index q = 0;
  Index batch_cap = 512;
  Ep2LrRule lr_rule = Ep2LrRule::Paper;
  std::uint64_t seed = 0;
  bool cache_kernel = true;  // keep K(Z, Z) in memory when p <= kMaxCachedCenters
};

inline constexpr Index kMaxCachedCenters = 4096;

/// Preconditioned SGD for K(Z, Z) theta = h (EigenPro 2.0). Setup draws the
/// Nystrom subset Z_s, eigendecomposes K(Z_s, Z_s) / s and fixes the batch
/// size and step size; iterations then run a stochastic gradient step on the
/// batch rows followed by a gradient correction on the subset rows.
class Ep2Solver {
 public:
  Ep2Solver(const KernelSpec& spec, Matrix centers, const Ep2Options& options);

  /// One update on the given batch rows of theta (p x c). rhs is the full
  /// right-hand side h; only its batch rows are read.
  void iterate(Matrix& theta, const Matrix& rhs, std::span<const Index> batch) const;

  /// epochs passes over shuffled batches from theta = 0. The overload without
  /// an rng seeds a fresh generator from the options.
  Matrix solve(const Matrix& rhs, int epochs) const;
  Matrix solve(const Matrix& rhs, int epochs, Rng& rng) const;

  const KernelSpec& spec() const noexcept { return spec_; }
  const Matrix& centers() const noexcept { return centers_; }
  Index p() const noexcept { return centers_.rows(); }
  const std::vector<Index>& subset() const noexcept { return subset_; }
  /// Eigensystem of the normalized subset matrix K(Z_s, Z_s) / s.
  const TopQEigensystem& eigensystem() const noexcept { return eig_; }
  const Vector& correction_diag() const noexcept { return diag_; }
  double beta() const noexcept { return beta_; }
  Index batch_size() const noexcept { return batch_size_; }
  double learning_rate() const noexcept { return eta_; }
  void set_learning_rate(double eta);

 private:
  Matrix kernel_rows(std::span<const Index> rows, std::span<const Index> cols) const;

  KernelSpec spec_;
  Matrix centers_;
  Ep2Options options_;
  std::vector<Index> subset_;
  TopQEigensystem eig_;
  Vector diag_;
  double beta_ = 1.0;
  Index batch_size_ = 1;
  double eta_ = 0.0;
  Matrix kzz_;  // empty unless cached
};

}  // namespace kernelforge
