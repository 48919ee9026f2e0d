#include "kernelforge/analysis.hpp"

#include "kernelforge/parallel.hpp"
#include "kernelforge/preconditioner.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace kernelforge {

namespace {

// With P = I - Q and B = P^1/2 K(X, Z) = U R (thin QR), M = B^T B = R^T R.
// Inverses and traces go through R rather than M, which keeps their accuracy
// tied to cond(B) instead of cond(B)^2.
struct FixedPointParts {
  Matrix kxz;      // K(X, Z)
  Matrix w;        // (I - Q) K(X, Z)
  std::optional<TopQEigensystem> eig;  // of K(X, X), absent for q = 0
  Matrix u;        // n x p, orthonormal columns
  Matrix r_inv;    // R^-1
  Vector m_eigs;   // eigenvalues of M, ascending

  // E diag(f(lambda)) E^T v for f = 1 - sqrt(tail / lambda) or sqrt(1 - tail / lambda).
  Matrix apply_spectral(const Matrix& v, bool sqrt_q) const {
    const auto& e = *eig;
    Vector d(e.values.size());
    for (Index i = 0; i < d.size(); ++i) {
      const double ratio = e.tail / e.values[i];
      d[i] = sqrt_q ? std::sqrt(1.0 - ratio) : 1.0 - std::sqrt(ratio);
    }
    return e.vectors * (d.asDiagonal() * (e.vectors.transpose() * v));
  }
  Matrix sqrt_p(const Matrix& v) const { return eig ? Matrix(v - apply_spectral(v, false)) : v; }
  Matrix sqrt_q(const Matrix& v) const { return eig ? apply_spectral(v, true) : Matrix::Zero(v.rows(), v.cols()); }
};

FixedPointParts fixed_point_parts(const KernelSpec& spec, const Matrix& X, const Matrix& Z, Index q) {
  if (Z.cols() != X.cols()) throw DimensionError("fixed_point: centers and data differ in dimension");
  if (q < 0) throw InvalidArgument("fixed_point: q must be nonnegative");
  FixedPointParts parts;
  parts.kxz = kernel_matrix(spec, X, Z);
  if (q == 0) {
    parts.w = parts.kxz;
  } else {
    const auto precond = NystromPreconditioner::exact(top_q_eigensystem(kernel_matrix(spec, X, X), q));
    parts.w = precond.apply_I_minus_Q(parts.kxz);
    parts.eig = precond.eigensystem();
  }

  Matrix M = parts.kxz.transpose() * parts.w;
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(M, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("fixed_point: eigensolver failed on M");
  parts.m_eigs = solver.eigenvalues();
  const double largest = parts.m_eigs.cwiseAbs().maxCoeff();
  const double smallest = parts.m_eigs.minCoeff();
  if (!(smallest > kSingularityThreshold * largest)) {
    std::ostringstream msg;
    msg << "fixed_point: M = K(Z,X)(I-Q)K(X,Z) is singular (smallest singular value " << smallest
        << ", largest " << largest << ")";
    throw SingularMatrixError(msg.str());
  }

  const Index n = X.rows(), p = Z.rows();
  Eigen::HouseholderQR<Matrix> qr(parts.sqrt_p(parts.kxz));
  parts.u = qr.householderQ() * Matrix::Identity(n, p);
  const Matrix R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  parts.r_inv = R.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  return parts;
}

}  // namespace

Matrix fixed_point_operator(const KernelSpec& spec, const Matrix& X, const Matrix& Z, Index q) {
  const auto parts = fixed_point_parts(spec, X, Z, q);
  return parts.r_inv * parts.sqrt_p(parts.u).transpose();
}

FixedPointReport fixed_point(const KernelSpec& spec, const Matrix& X, const Matrix& y,
                             const Matrix& Z, Index q) {
  if (y.rows() != X.rows()) throw DimensionError("fixed_point: targets and data differ in rows");
  const auto parts = fixed_point_parts(spec, X, Z, q);

  FixedPointReport report;
  report.n = X.rows();
  report.alpha_inf = parts.r_inv * (parts.u.transpose() * parts.sqrt_p(y));

  // G = U R^-T = B M^-1, so (I - Q) K M^-1 = P^1/2 G and tr(M^-1) = |G|^2.
  const Matrix G = parts.u * parts.r_inv.transpose();
  report.variance_trace_direct = parts.sqrt_p(G).squaredNorm();
  report.trace_cross = parts.sqrt_q(G).squaredNorm();
  report.trace_m_inv = parts.r_inv.squaredNorm();
  report.variance_trace_alt = static_cast<double>(report.n) - report.trace_cross;
  report.lr_bound = 2.0 / parts.m_eigs.maxCoeff();

  const Matrix kzz = kernel_matrix(spec, Z, Z);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> gen(parts.kxz.transpose() * parts.w, kzz,
                                                        Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  report.lr_bound_projected = gen.info() == Eigen::Success
                                  ? 2.0 / gen.eigenvalues().maxCoeff()
                                  : std::numeric_limits<double>::quiet_NaN();
  return report;
}

Matrix add_gaussian_noise(const Matrix& clean, double sigma, Rng& rng) {
  if (sigma < 0.0) throw InvalidArgument("noise sigma must be nonnegative");
  Matrix y = clean;
  if (sigma == 0.0) return y;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < y.cols(); ++j) {
    for (Index i = 0; i < y.rows(); ++i) y(i, j) += sigma * normal(rng);
  }
  return y;
}

Matrix student_teacher_sample(const KernelSpec& spec, const Matrix& X, const Matrix& Z,
                              const StudentTeacherSpec& st) {
  if (st.alpha_star.rows() != Z.rows()) throw DimensionError("alpha* must have one row per center");
  if (!st.alpha_star.allFinite()) throw NonFiniteError("alpha* has non-finite entries");
  Rng rng(st.seed);
  return add_gaussian_noise(kernel_matrix(spec, X, Z) * st.alpha_star, st.noise_sigma, rng);
}

double generalization_error(const KernelSpec& spec, const Matrix& X, const Matrix& Z,
                            const Matrix& alpha, const Matrix& alpha_star) {
  if (alpha.rows() != Z.rows() || alpha_star.rows() != Z.rows() || alpha.cols() != alpha_star.cols()) {
    throw DimensionError("generalization_error: weight shapes do not match the centers");
  }
  return (kernel_matrix(spec, X, Z) * (alpha - alpha_star)).squaredNorm() /
         static_cast<double>(X.rows());
}

MonteCarloStats montecarlo_estimator_stats(const KernelSpec& spec, const Matrix& X,
                                           const Matrix& Z, Index q,
                                           const StudentTeacherSpec& st, Index n_draws) {
  if (n_draws < 2) throw InvalidArgument("Monte Carlo needs at least two draws");
  if (st.alpha_star.rows() != Z.rows()) throw DimensionError("alpha* must have one row per center");

  const Matrix op = fixed_point_operator(spec, X, Z, q);
  const Matrix kxz = kernel_matrix(spec, X, Z);
  const Matrix clean = kxz * st.alpha_star;
  const auto n = static_cast<double>(X.rows());

  std::vector<Matrix> alphas(static_cast<std::size_t>(n_draws));
  std::vector<double> gen_errors(static_cast<std::size_t>(n_draws));
  parallel_for(static_cast<std::size_t>(n_draws), [&](std::size_t i) {
    std::seed_seq seq{static_cast<std::uint64_t>(st.seed), static_cast<std::uint64_t>(i)};
    Rng rng(seq);
    const Matrix y = add_gaussian_noise(clean, st.noise_sigma, rng);
    alphas[i] = op * y;
    gen_errors[i] = (kxz * (alphas[i] - st.alpha_star)).squaredNorm() / n;
  });

  MonteCarloStats stats;
  stats.draws = n_draws;
  const auto draws = static_cast<double>(n_draws);
  stats.mean_alpha = Matrix::Zero(st.alpha_star.rows(), st.alpha_star.cols());
  double sqerr = 0.0;
  double gen = 0.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    stats.mean_alpha += alphas[i];
    sqerr += (alphas[i] - st.alpha_star).squaredNorm();
    gen += gen_errors[i];
  }
  stats.mean_alpha /= draws;
  Matrix var = Matrix::Zero(stats.mean_alpha.rows(), stats.mean_alpha.cols());
  for (const auto& a : alphas) var += (a - stats.mean_alpha).cwiseAbs2();
  stats.stderr_alpha = (var / (draws - 1.0)).cwiseSqrt() / std::sqrt(draws);

  stats.mean_sqerr = sqerr / draws;
  stats.normalized = st.noise_sigma > 0.0;
  if (stats.normalized) stats.mean_sqerr /= st.noise_sigma * st.noise_sigma;
  stats.mean_generalization_error = gen / draws;
  return stats;
}

ContractionReport contraction_estimate(const std::vector<double>& residuals) {
  if (residuals.size() < 5) throw InvalidArgument("contraction_estimate needs at least 5 points");
  for (const double r : residuals) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw InvalidArgument("contraction_estimate: residuals must be finite and nonnegative");
    }
  }
  ContractionReport report;
  for (const double r : residuals) {
    if (r == 0.0) return report;
  }
  const double log_ratio = std::log(residuals.back()) - std::log(residuals.front());
  report.rho_fit = std::exp(log_ratio / static_cast<double>(residuals.size() - 1));
  report.diverging = report.rho_fit > 1.0;
  return report;
}

double richardson_spectral_bound(int steps, double nu, double lambda_1, double lambda_q1,
                                 double sigma_max_kxz) {
  const double ratio = 1.0 - nu * (lambda_1 - lambda_q1);
  double sum = 0.0;
  double term = 1.0;
  for (int i = 0; i < steps; ++i) {
    sum += term;
    term *= ratio;
  }
  return sum * sigma_max_kxz * sigma_max_kxz / lambda_q1;
}

StudentTeacherProblem make_student_teacher_problem(const KernelSpec& spec, Index n, Index n_test,
                                                   Index d, Index p_star, double sigma,
                                                   std::uint64_t seed) {
  if (n < 1 || d < 1 || p_star < 1 || n_test < 0) throw InvalidArgument("invalid student-teacher sizes");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Index rows, Index cols) {
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) M(i, j) = normal(rng);
    }
    return M;
  };
  StudentTeacherProblem problem;
  problem.X = draw(n, d);
  problem.X_test = draw(n_test, d);
  problem.teacher_centers = draw(p_star, d);
  problem.alpha_star = draw(p_star, 1);
  problem.y = add_gaussian_noise(kernel_matrix(spec, problem.X, problem.teacher_centers) *
                                     problem.alpha_star,
                                 sigma, rng);
  problem.y_test_clean = kernel_matrix(spec, problem.X_test, problem.teacher_centers) * problem.alpha_star;
  return problem;
}

}  // namespace kernelforge
