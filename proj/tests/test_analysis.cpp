#include <doctest.h>

#include "kernelforge/analysis.hpp"
#include "kernelforge/parallel.hpp"
#include "kernelforge/trainer.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace kernelforge;
using kftest::dense_Q;
using kftest::gaussian_matrix;
using kftest::rel;

namespace {
const KernelSpec kLaplace(KernelFamily::Laplace, 1.0);
}

TEST_CASE("fixed point on the kernel machine is the interpolant") {
  const Matrix X = gaussian_matrix(25, 4, 1);
  const Matrix y = gaussian_matrix(25, 2, 2);
  const auto rep = fixed_point(kLaplace, X, y, X, 0);
  const Matrix K = kernel_matrix(kLaplace, X, X);
  CHECK(rel(rep.alpha_inf, K.llt().solve(y)) < 1e-8);
  CHECK(rep.n == 25);
}

TEST_CASE("fixed point report matches dense formulas") {
  const Matrix X = gaussian_matrix(60, 3, 3);
  const Matrix y = gaussian_matrix(60, 1, 4);
  const Matrix Z = gaussian_matrix(12, 3, 5);
  const Index q = 4;
  const auto rep = fixed_point(kLaplace, X, y, Z, q);

  const Matrix K = kernel_matrix(kLaplace, X, X);
  const Matrix Q = dense_Q(top_q_eigensystem(K, q));
  const Matrix IQ = Matrix::Identity(60, 60) - Q;
  const Matrix kxz = kernel_matrix(kLaplace, X, Z);
  const Matrix M = kxz.transpose() * IQ * kxz;
  const Matrix Minv = M.inverse();
  CHECK(rel(rep.alpha_inf, Minv * kxz.transpose() * IQ * y) < 1e-8);
  const double direct = (Minv * Minv * kxz.transpose() * IQ * IQ * kxz).trace();
  const double cross = (Minv * Minv * kxz.transpose() * Q * IQ * kxz).trace();
  CHECK(rep.variance_trace_direct == doctest::Approx(direct).epsilon(1e-8));
  CHECK(rep.trace_cross == doctest::Approx(cross).epsilon(1e-8));
  CHECK(rep.variance_trace_alt == doctest::Approx(60.0 - cross).epsilon(1e-8));
  CHECK(rep.trace_m_inv == doctest::Approx(Minv.trace()).epsilon(1e-8));
  CHECK(rep.variance_trace_direct >= 0.0);

  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  CHECK(rep.lr_bound == doctest::Approx(2.0 / es.eigenvalues().maxCoeff()).epsilon(1e-10));
  const Matrix kzz = kernel_matrix(kLaplace, Z, Z);
  Eigen::EigenSolver<Matrix> gen(kzz.inverse() * M, false);
  CHECK(rep.lr_bound_projected ==
        doctest::Approx(2.0 / gen.eigenvalues().real().maxCoeff()).epsilon(1e-8));

  const Matrix op = fixed_point_operator(kLaplace, X, Z, q);
  CHECK(op.rows() == 12);
  CHECK(op.cols() == 60);
  CHECK(rel(op * y, rep.alpha_inf) < 1e-10);
}

TEST_CASE("q = 0 variance trace equals tr(M^-1)") {
  const Matrix X = gaussian_matrix(50, 3, 6);
  const Matrix Z = gaussian_matrix(8, 3, 7);
  const auto rep = fixed_point(kLaplace, X, gaussian_matrix(50, 1, 8), Z, 0);
  const Matrix kxz = kernel_matrix(kLaplace, X, Z);
  const Matrix M = kxz.transpose() * kxz;
  CHECK(rep.variance_trace_direct == doctest::Approx(M.inverse().trace()).epsilon(1e-8));
  CHECK(rep.trace_cross == doctest::Approx(0.0));
}

TEST_CASE("exact iterates converge to the fixed point") {
  const Matrix X = gaussian_matrix(200, 5, 9);
  const Matrix y = gaussian_matrix(200, 1, 10);
  const Matrix Z = X.topRows(30);
  const Index q = 5;
  const auto rep = fixed_point(kLaplace, X, y, Z, q);
  const auto setup = ep3_exact_setup(kLaplace, X, y, Z, q);
  TrainState state = initial_state(30, 1, 0.9 * rep.lr_bound, {});
  for (int t = 0; t < 3000 && rel(state.alpha, rep.alpha_inf) >= 1e-8; ++t) ep3_exact_step(state, setup);
  CHECK(rel(state.alpha, rep.alpha_inf) < 1e-8);
}

TEST_CASE("singular M is reported") {
  const Matrix X = gaussian_matrix(20, 2, 11);
  Matrix Z = gaussian_matrix(5, 2, 12);
  Z.row(4) = Z.row(1);
  try {
    fixed_point(kLaplace, X, gaussian_matrix(20, 1, 13), Z, 0);
    FAIL("singular M accepted");
  } catch (const SingularMatrixError& e) {
    CHECK(std::string(e.what()).find("smallest") != std::string::npos);
  }
  CHECK_THROWS_AS(fixed_point(kLaplace, X, gaussian_matrix(19, 1, 13), Z.topRows(3), 0), DimensionError);
  CHECK_THROWS_AS(fixed_point(kLaplace, X, gaussian_matrix(20, 1, 13), Z.topRows(3), -1), InvalidArgument);
}

TEST_CASE("student-teacher sampling") {
  const Matrix X = gaussian_matrix(30, 3, 14);
  const Matrix Z = gaussian_matrix(6, 3, 15);
  StudentTeacherSpec st{gaussian_matrix(6, 1, 16), 0.0, 3};
  const Matrix clean = kernel_matrix(kLaplace, X, Z) * st.alpha_star;
  CHECK(student_teacher_sample(kLaplace, X, Z, st) == clean);
  st.noise_sigma = 0.7;
  const Matrix a = student_teacher_sample(kLaplace, X, Z, st);
  CHECK(a == student_teacher_sample(kLaplace, X, Z, st));
  CHECK(a != clean);

  Rng rng(5);
  const Index draws = 10000;
  double sum = 0.0;
  for (Index i = 0; i < draws; ++i) sum += (add_gaussian_noise(clean, 0.7, rng) - clean)(0, 0);
  CHECK(std::abs(sum / draws) < 4.0 * 0.7 / std::sqrt(static_cast<double>(draws)));

  CHECK_THROWS_AS(add_gaussian_noise(clean, -1.0, rng), InvalidArgument);
  st.alpha_star = gaussian_matrix(5, 1, 1);
  CHECK_THROWS_AS(student_teacher_sample(kLaplace, X, Z, st), DimensionError);
}

TEST_CASE("generalization error") {
  const Matrix X = gaussian_matrix(20, 2, 17);
  const Matrix Z = gaussian_matrix(4, 2, 18);
  const Matrix star = gaussian_matrix(4, 1, 19);
  const Matrix alpha = gaussian_matrix(4, 1, 20);
  CHECK(generalization_error(kLaplace, X, Z, star, star) == 0.0);
  const double e1 = generalization_error(kLaplace, X, Z, alpha, star);
  const double e2 = generalization_error(kLaplace, X, Z, star + 2.0 * (alpha - star), star);
  CHECK(e2 == doctest::Approx(4.0 * e1));
  CHECK(e1 == doctest::Approx((kernel_matrix(kLaplace, X, Z) * (alpha - star)).squaredNorm() / 20.0));
  CHECK_THROWS_AS(generalization_error(kLaplace, X, Z, gaussian_matrix(3, 1, 1), star), DimensionError);
}

TEST_CASE("Monte Carlo statistics") {
  const Matrix X = gaussian_matrix(80, 4, 21);
  const Matrix Z = gaussian_matrix(6, 4, 22);
  StudentTeacherSpec st{gaussian_matrix(6, 1, 23), 0.0, 4};
  const auto exact = montecarlo_estimator_stats(kLaplace, X, Z, 2, st, 2);
  CHECK(rel(exact.mean_alpha, st.alpha_star) < 1e-8);
  CHECK_FALSE(exact.normalized);
  CHECK(exact.mean_sqerr < 1e-14);

  st.noise_sigma = 0.3;
  set_num_threads(1);
  const auto one = montecarlo_estimator_stats(kLaplace, X, Z, 2, st, 50);
  set_num_threads(4);
  const auto four = montecarlo_estimator_stats(kLaplace, X, Z, 2, st, 50);
  set_num_threads(1);
  CHECK(one.mean_alpha == four.mean_alpha);
  CHECK(one.mean_sqerr == four.mean_sqerr);
  CHECK(one.normalized);
  CHECK(one.draws == 50);
  CHECK((one.stderr_alpha.array() > 0).all());
  CHECK(((one.mean_alpha - st.alpha_star).cwiseAbs().array() <= 4.0 * one.stderr_alpha.array()).all());

  CHECK_THROWS_AS(montecarlo_estimator_stats(kLaplace, X, Z, 2, st, 1), InvalidArgument);
}

TEST_CASE("contraction estimate") {
  std::vector<double> geometric;
  for (int t = 0; t < 10; ++t) geometric.push_back(std::pow(0.5, t));
  const auto half = contraction_estimate(geometric);
  CHECK(half.rho_fit == doctest::Approx(0.5));
  CHECK_FALSE(half.diverging);

  std::vector<double> growing;
  for (int t = 0; t < 6; ++t) growing.push_back(std::pow(1.3, t));
  CHECK(contraction_estimate(growing).diverging);

  CHECK(contraction_estimate({1.0, 0.5, 0.0, 0.0, 0.0}).rho_fit == 0.0);
  CHECK_THROWS_AS(contraction_estimate({1.0, 0.5, 0.25}), InvalidArgument);
  CHECK_THROWS_AS(contraction_estimate({1.0, -0.5, 0.25, 0.1, 0.1}), InvalidArgument);
}

TEST_CASE("Richardson spectral bound") {
  CHECK(richardson_spectral_bound(1, 0.1, 5.0, 1.0, 2.0) == doctest::Approx(4.0));
  CHECK(richardson_spectral_bound(3, 0.1, 5.0, 1.0, 1.0) == doctest::Approx(1.0 + 0.6 + 0.36));
}

TEST_CASE("student-teacher problem generator") {
  const auto a = make_student_teacher_problem(kLaplace, 40, 10, 3, 7, 0.2, 9);
  const auto b = make_student_teacher_problem(kLaplace, 40, 10, 3, 7, 0.2, 9);
  CHECK(a.X == b.X);
  CHECK(a.y == b.y);
  CHECK(a.X.rows() == 40);
  CHECK(a.X_test.rows() == 10);
  CHECK(a.teacher_centers.rows() == 7);
  CHECK(a.alpha_star.rows() == 7);
  CHECK(rel(a.y_test_clean, kernel_matrix(kLaplace, a.X_test, a.teacher_centers) * a.alpha_star) < 1e-15);
  const auto clean = make_student_teacher_problem(kLaplace, 40, 0, 3, 7, 0.0, 9);
  CHECK(clean.y == kernel_matrix(kLaplace, clean.X, clean.teacher_centers) * clean.alpha_star);
  CHECK_THROWS_AS(make_student_teacher_problem(kLaplace, 0, 0, 3, 7, 0.0, 9), InvalidArgument);
}
