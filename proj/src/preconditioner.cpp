#include "kernelforge/preconditioner.hpp"

#include <utility>

namespace kernelforge {

NystromPreconditioner::NystromPreconditioner(PreconditionerMode mode, TopQEigensystem eig,
                                             Matrix anchors)
    : mode_(mode), eig_(std::move(eig)), anchors_(std::move(anchors)) {
  const Index q = eig_.q();
  if (eig_.vectors.cols() != q || eig_.vectors.rows() != eig_.source_size) {
    throw DimensionError("preconditioner: malformed eigensystem");
  }
  weights_.resize(q);
  for (Index i = 0; i < q; ++i) {
    const double lambda = eig_.values[i];
    if (!(lambda > 0.0)) {
      throw SingularMatrixError("preconditioner: top-q eigenvalue " + std::to_string(i) +
                                " is not positive");
    }
    const double flatten = 1.0 - eig_.tail / lambda;
    weights_[i] = mode_ == PreconditionerMode::ExactQ ? flatten : flatten / lambda;
  }
}

NystromPreconditioner NystromPreconditioner::exact(TopQEigensystem eig) {
  return NystromPreconditioner(PreconditionerMode::ExactQ, std::move(eig), Matrix());
}

NystromPreconditioner NystromPreconditioner::nystrom(TopQEigensystem eig, Matrix anchors) {
  if (anchors.rows() != eig.source_size) {
    throw DimensionError("preconditioner: " + std::to_string(anchors.rows()) +
                         " anchor points for an eigensystem of size " +
                         std::to_string(eig.source_size));
  }
  return NystromPreconditioner(PreconditionerMode::NystromQs, std::move(eig),
                               std::move(anchors));
}

Matrix NystromPreconditioner::apply_factored(const Matrix& v) const {
  if (v.rows() != eig_.source_size) {
    throw DimensionError("preconditioner: operand has " + std::to_string(v.rows()) +
                         " rows, expected " + std::to_string(eig_.source_size));
  }
  if (q() == 0) return Matrix::Zero(v.rows(), v.cols());
  const Matrix projected = weights_.asDiagonal() * (eig_.vectors.transpose() * v);
  return eig_.vectors * projected;
}

Matrix NystromPreconditioner::apply_I_minus_Q(const Matrix& v) const {
  if (mode_ != PreconditionerMode::ExactQ) {
    throw InvalidArgument("apply_I_minus_Q requires an ExactQ preconditioner");
  }
  return v - apply_factored(v);
}

Matrix NystromPreconditioner::apply_Qs(const Matrix& v) const {
  if (mode_ != PreconditionerMode::NystromQs) {
    throw InvalidArgument("apply_Qs requires a NystromQs preconditioner");
  }
  return apply_factored(v);
}

Matrix build_C(const KernelSpec& spec, const Matrix& Z, const NystromPreconditioner& pc) {
  if (pc.mode() != PreconditionerMode::NystromQs) {
    throw InvalidArgument("build_C requires a NystromQs preconditioner");
  }
  const Index s = pc.size();
  if (pc.q() == 0) return Matrix::Zero(Z.rows(), s);
  const Matrix& E = pc.eigensystem().vectors;
  const Matrix kzs_e = kernel_matrix(spec, Z, pc.anchors()) * E;  // p x q
  return (kzs_e * pc.weights().asDiagonal()) * E.transpose();
}

}  // namespace kernelforge
