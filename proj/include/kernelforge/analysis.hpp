#pragma once

#include "kernelforge/kernels.hpp"
#include "kernelforge/sampling.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kernelforge {

/// Stationary point of the exact-projection iteration and its noise
/// sensitivity. With M = K(Z,X)(I - Q)K(X,Z):
///   alpha_inf             = M^-1 K(Z,X)(I - Q) y
///   variance_trace_direct = tr(M^-2 K(Z,X)(I - Q)^2 K(X,Z))
///   variance_trace_alt    = n - tr(M^-2 K(Z,X) Q (I - Q) K(X,Z))
///   trace_m_inv           = tr(M^-1)
///   lr_bound              = 2 / lambda_max(M)
///   lr_bound_projected    = 2 / lambda_max(K(Z,Z)^-1 M), the exact stability
///                           limit of the iteration with the projection
struct FixedPointReport {
  Matrix alpha_inf;
  double variance_trace_direct = 0.0;
  double variance_trace_alt = 0.0;
  double trace_m_inv = 0.0;
  double trace_cross = 0.0;  // tr(M^-2 K(Z,X) Q (I - Q) K(X,Z))
  double lr_bound = 0.0;
  double lr_bound_projected = 0.0;
  Index n = 0;
};

/// Relative singularity threshold for M.
inline constexpr double kSingularityThreshold = 1e-12;

FixedPointReport fixed_point(const KernelSpec& spec, const Matrix& X, const Matrix& y,
                             const Matrix& Z, Index q);

/// Linear map y -> alpha_inf, i.e. A = M^-1 K(Z,X)(I - Q), p x n.
Matrix fixed_point_operator(const KernelSpec& spec, const Matrix& X, const Matrix& Z, Index q);

struct StudentTeacherSpec {
  Matrix alpha_star;  // p x c
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// y = K(X, Z) alpha* + sigma * xi with xi standard normal from the seeded
/// generator (filled column by column).
Matrix student_teacher_sample(const KernelSpec& spec, const Matrix& X, const Matrix& Z,
                              const StudentTeacherSpec& st);

/// Same noise model with a precomputed clean signal K(X, Z) alpha*.
Matrix add_gaussian_noise(const Matrix& clean, double sigma, Rng& rng);

/// (1/n) |K(X, Z)(alpha - alpha*)|_F^2.
double generalization_error(const KernelSpec& spec, const Matrix& X, const Matrix& Z,
                            const Matrix& alpha, const Matrix& alpha_star);

struct MonteCarloStats {
  Matrix mean_alpha;        // p x c
  Matrix stderr_alpha;      // p x c, sample std / sqrt(draws)
  double mean_sqerr = 0.0;  // mean |alpha_inf - alpha*|^2, divided by sigma^2 when normalized
  bool normalized = true;   // false when sigma = 0
  double mean_generalization_error = 0.0;
  Index draws = 0;
};

/// Repeats: sample y, solve for alpha_inf. Draw i uses its own generator
/// seeded from (st.seed, i) so the result does not depend on the thread count.
MonteCarloStats montecarlo_estimator_stats(const KernelSpec& spec, const Matrix& X,
                                           const Matrix& Z, Index q,
                                           const StudentTeacherSpec& st, Index n_draws);

struct ContractionReport {
  double rho_fit = 0.0;
  bool diverging = false;  // rho_fit > 1
  std::optional<double> bound;
};

/// Geometric-mean ratio r_{t+1} / r_t of a residual history (at least five
/// points). A zero residual means the run already converged and gives 0.
ContractionReport contraction_estimate(const std::vector<double>& residuals);

/// sum_{i<T} (1 - nu (lambda_1 - lambda_{q+1}))^i * sigma_max(K(X,Z))^2 / lambda_{q+1},
/// the spectral bound on |A K(X,Z)| for the Richardson-projected iteration.
/// Reported as a diagnostic.
double richardson_spectral_bound(int steps, double nu, double lambda_1, double lambda_q1,
                                 double sigma_max_kxz);

/// A synthetic regression problem with known teacher weights.
struct StudentTeacherProblem {
  Matrix X;            // n x d
  Matrix teacher_centers;
  Matrix alpha_star;
  Matrix y;
  Matrix X_test;
  Matrix y_test_clean;  // K(X_test, Z*) alpha*
};

/// X and X_test standard normal in d dimensions, teacher centers drawn the
/// same way, alpha* standard normal, y = K(X, Z*) alpha* + sigma xi.
StudentTeacherProblem make_student_teacher_problem(const KernelSpec& spec, Index n, Index n_test,
                                                   Index d, Index p_star, double sigma,
                                                   std::uint64_t seed);

}  // namespace kernelforge
