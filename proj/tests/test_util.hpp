#pragma once

#include "kernelforge/analysis.hpp"
#include "kernelforge/kernels.hpp"
#include "kernelforge/sampling.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>

namespace kftest {

using kernelforge::Index;
using kernelforge::Matrix;
using kernelforge::Vector;

inline Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
  kernelforge::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = normal(rng);
  return M;
}

inline Matrix laplace_gram(const Matrix& X, double bandwidth = 1.0) {
  return kernelforge::kernel_matrix(kernelforge::KernelSpec(kernelforge::KernelFamily::Laplace, bandwidth), X, X);
}

// Dense Q = E (I - tail / Lambda) E^T.
template <class Eig>
Matrix dense_Q(const Eig& eig) {
  const Index q = eig.values.size();
  Vector w(q);
  for (Index i = 0; i < q; ++i) w[i] = 1.0 - eig.tail / eig.values[i];
  return eig.vectors * w.asDiagonal() * eig.vectors.transpose();
}

inline double rel(const Matrix& a, const Matrix& b) {
  const double denom = std::max(b.norm(), 1e-300);
  return (a - b).norm() / denom;
}

// The standard synthetic regression instance: n=300 points in 10 dimensions,
// a 60-center teacher, Laplace bandwidth 0.5, noise 0.1. Student centers
// are the first 60 training points.
struct StandardInstance {
  kernelforge::KernelSpec spec{kernelforge::KernelFamily::Laplace, 0.5};
  Matrix X, y, Z;
  Index q = 10;
};

inline StandardInstance standard_instance(std::uint64_t seed = 1) {
  StandardInstance inst;
  const auto problem = kernelforge::make_student_teacher_problem(inst.spec, 300, 0, 10, 60, 0.1, seed);
  inst.X = problem.X;
  inst.y = problem.y;
  inst.Z = problem.X.topRows(60);
  return inst;
}

// Scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("kf_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace kftest
