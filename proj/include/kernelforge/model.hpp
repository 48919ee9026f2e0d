#pragma once

#include "kernelforge/kernels.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace kernelforge {

/// f(x) = sum_j alpha_j K(x, z_j) with centers Z (p x d) and weights alpha (p x c).
class GeneralKernelModel {
 public:
  GeneralKernelModel(KernelSpec spec, Matrix centers, Matrix weights);

  /// A model with all weights zero.
  static GeneralKernelModel zeros(KernelSpec spec, Matrix centers, Index outputs);

  const KernelSpec& spec() const noexcept { return spec_; }
  const Matrix& centers() const noexcept { return centers_; }
  const Matrix& weights() const noexcept { return weights_; }
  Index p() const noexcept { return centers_.rows(); }
  Index d() const noexcept { return centers_.cols(); }
  Index c() const noexcept { return weights_.cols(); }

  void set_weights(Matrix weights);

  /// K(X, Z) alpha, n x c.
  Matrix predict(const Matrix& X) const;

  /// Row-wise argmax of predict(X); ties go to the lowest class index.
  std::vector<Index> classify(const Matrix& X) const;

 private:
  KernelSpec spec_;
  Matrix centers_;
  Matrix weights_;
};

/// Row-wise argmax with ties resolved to the lowest column.
std::vector<Index> argmax_rows(const Matrix& scores);

/// True when c >= 2 and every row has exactly one entry equal to 1, the rest 0.
bool is_one_hot(const Matrix& targets);

struct Evaluation {
  double mse = 0.0;                 // (1/n) sum_i |f(x_i) - y_i|^2
  std::optional<double> accuracy;   // only for one-hot targets
};

Evaluation evaluate(const GeneralKernelModel& model, const Dataset& data);

/// Model file: one line of JSON
///   {"format":"kernelforge-model","version":1,"kernel":..,"bandwidth":..,"p":..,"d":..,"c":..}
/// terminated by '\n', then Z (p x d) and alpha (p x c) as row-major
/// little-endian float64.
void save_model(const GeneralKernelModel& model, const std::filesystem::path& path);
GeneralKernelModel load_model(const std::filesystem::path& path);

}  // namespace kernelforge
