#pragma once

#include "kernelforge/kernels.hpp"
#include "kernelforge/spectral.hpp"

namespace kernelforge {

enum class PreconditionerMode { ExactQ, NystromQs };

/// Spectrum-flattening operator built from the top-q eigensystem
/// (Lambda, E, lambda_{q+1}) of a kernel matrix, kept in factored form:
///
///   ExactQ:    Q   = E (I - lambda_{q+1} Lambda^-1) E^T
///   NystromQs: Q_s = E (I - lambda_{q+1} Lambda^-1) Lambda^-1 E^T
///
/// (I - Q) K(X, X) has eigenvalues min(lambda_i, lambda_{q+1}). Immutable after
/// construction.
class NystromPreconditioner {
 public:
  /// Q over the matrix the eigensystem came from.
  static NystromPreconditioner exact(TopQEigensystem eig);

  /// Q_s over K(X_s, X_s); anchors are the subsample rows X_s.
  static NystromPreconditioner nystrom(TopQEigensystem eig, Matrix anchors);

  PreconditionerMode mode() const noexcept { return mode_; }
  const TopQEigensystem& eigensystem() const noexcept { return eig_; }
  const Matrix& anchors() const noexcept { return anchors_; }
  Index size() const noexcept { return eig_.source_size; }
  Index q() const noexcept { return eig_.q(); }

  /// Per-direction weights w with Q (or Q_s) = E diag(w) E^T.
  const Vector& weights() const noexcept { return weights_; }

  /// (I - Q) v for v of shape n x c. ExactQ only. O(nqc).
  Matrix apply_I_minus_Q(const Matrix& v) const;

  /// Q_s v for v of shape s x c. NystromQs only. O(sqc).
  Matrix apply_Qs(const Matrix& v) const;

 private:
  NystromPreconditioner(PreconditionerMode mode, TopQEigensystem eig, Matrix anchors);

  Matrix apply_factored(const Matrix& v) const;

  PreconditionerMode mode_;
  TopQEigensystem eig_;
  Matrix anchors_;
  Vector weights_;
};

/// C = K(Z, X_s) E (Lambda^-1 - lambda_{q+1} Lambda^-2) E^T, p x s, so that
/// C K(X_s, X_m) g = K(Z, X_s) Q_s K(X_s, X_m) g.
Matrix build_C(const KernelSpec& spec, const Matrix& Z, const NystromPreconditioner& pc);

}  // namespace kernelforge
