#include "kernelforge/ep2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kernelforge {

Ep2LrRule parse_ep2_lr_rule(std::string_view name) {
  if (name == "paper") return Ep2LrRule::Paper;
  if (name == "corrected") return Ep2LrRule::Corrected;
  throw InvalidArgument("unknown ep2 learning-rate rule '" + std::string(name) + "'");
}

std::string to_string(Ep2LrRule rule) {
  return rule == Ep2LrRule::Paper ? "paper" : "corrected";
}

Ep2Hyperparameters ep2_hyperparameters(double beta, double tail, Index batch_cap,
                                       Ep2LrRule rule) {
  if (!(beta > 0.0)) throw InvalidArgument("ep2: beta must be positive");
  if (batch_cap < 1) throw InvalidArgument("ep2: batch cap must be positive");
  if (tail < 0.0) throw InvalidArgument("ep2: tail eigenvalue must be nonnegative");

  // Slightly shrink the ratio so that an exact quotient such as 1/0.05 is not
  // pushed past an integer by roundoff.
  const double critical = tail > 0.0 ? (beta / tail) * (1.0 - 1e-12)
                                     : std::numeric_limits<double>::infinity();
  Ep2Hyperparameters hp;
  hp.batch_size = critical < static_cast<double>(batch_cap)
                      ? std::max<Index>(1, static_cast<Index>(std::ceil(critical)))
                      : batch_cap;
  const auto m = static_cast<double>(hp.batch_size);
  if (m < critical) {
    hp.learning_rate = rule == Ep2LrRule::Paper ? beta / (2.0 * m) : m / (2.0 * beta);
  } else {
    hp.learning_rate = 0.99 * m / (beta + (m - 1.0) * tail);
  }
  return hp;
}

Vector ep2_correction_diag(const Vector& eigenvalues, double tail, Index s) {
  Vector d(eigenvalues.size());
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    const double lambda = eigenvalues[i];
    if (!(lambda > 0.0)) throw SingularMatrixError("ep2: nonpositive top-q eigenvalue");
    d[i] = (1.0 / (static_cast<double>(s) * lambda)) * (1.0 - tail / lambda);
  }
  return d;
}

Ep2Solver::Ep2Solver(const KernelSpec& spec, Matrix centers, const Ep2Options& options)
    : spec_(spec), centers_(std::move(centers)), options_(options) {
  const Index p = centers_.rows();
  if (p < 1) throw InvalidArgument("ep2: no centers");
  if (options_.s > p) {
    throw InvalidArgument("ep2: Nystrom size s=" + std::to_string(options_.s) +
                          " exceeds p=" + std::to_string(p));
  }
  if (options_.q < 0 || options_.q >= options_.s) {
    throw InvalidArgument("ep2: need 0 <= q < s, got q=" + std::to_string(options_.q) +
                          ", s=" + std::to_string(options_.s));
  }

  Rng rng(options_.seed);
  subset_ = sample_without_replacement(p, options_.s, rng);

  if (options_.cache_kernel && p <= kMaxCachedCenters) {
    kzz_ = kernel_matrix(spec_, centers_, centers_);
  }
  const Matrix kss = kernel_rows(subset_, subset_);
  const auto s = static_cast<double>(options_.s);
  eig_ = top_q_eigensystem(kss / s, options_.q);
  check_nystrom_ratio(options_.s, options_.q);
  diag_ = ep2_correction_diag(eig_.values, eig_.tail, options_.s);
  beta_ = kernel_diag_max(spec_, centers_);

  const Ep2Hyperparameters hp =
      ep2_hyperparameters(beta_, eig_.tail, std::min(options_.batch_cap, p), options_.lr_rule);
  batch_size_ = hp.batch_size;
  eta_ = hp.learning_rate;
}

void Ep2Solver::set_learning_rate(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument("ep2: learning rate must be positive");
  eta_ = eta;
}

Matrix Ep2Solver::kernel_rows(std::span<const Index> rows, std::span<const Index> cols) const {
  const std::vector<Index> r(rows.begin(), rows.end());
  const std::vector<Index> c(cols.begin(), cols.end());
  if (kzz_.size() > 0) return kzz_(r, c);
  return kernel_matrix(spec_, gather_rows(centers_, r), gather_rows(centers_, c));
}

void Ep2Solver::iterate(Matrix& theta, const Matrix& rhs, std::span<const Index> batch) const {
  const Index p = centers_.rows();
  if (theta.rows() != p || rhs.rows() != p || rhs.cols() != theta.cols()) {
    throw DimensionError("ep2: theta and rhs must both be p x c");
  }
  if (batch.empty()) throw InvalidArgument("ep2: empty batch");
  for (const Index i : batch) {
    if (i < 0 || i >= p) throw InvalidArgument("ep2: batch index " + std::to_string(i) + " out of range");
  }

  const std::vector<Index> rows(batch.begin(), batch.end());
  std::vector<Index> all(static_cast<std::size_t>(p));
  std::iota(all.begin(), all.end(), Index{0});

  const Matrix g = kernel_rows(rows, all) * theta - rhs(rows, Eigen::all);
  const double step = eta_ / static_cast<double>(rows.size());

  Matrix correction;
  if (eig_.q() > 0) {
    const Matrix& E = eig_.vectors;
    correction = E * (diag_.asDiagonal() * (E.transpose() * (kernel_rows(subset_, rows) * g)));
  }

  theta(rows, Eigen::all) -= step * g;
  if (eig_.q() > 0) theta(subset_, Eigen::all) += step * correction;
}

Matrix Ep2Solver::solve(const Matrix& rhs, int epochs) const {
  Rng rng(options_.seed);
  return solve(rhs, epochs, rng);
}

Matrix Ep2Solver::solve(const Matrix& rhs, int epochs, Rng& rng) const {
  if (epochs < 1) throw InvalidArgument("ep2: epochs must be at least 1");
  if (rhs.rows() != centers_.rows()) throw DimensionError("ep2: rhs must have p rows");
  if (!rhs.allFinite()) throw NonFiniteError("ep2: non-finite right-hand side");

  Matrix theta = Matrix::Zero(rhs.rows(), rhs.cols());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (const auto& batch : shuffled_batches(centers_.rows(), batch_size_, rng)) {
      iterate(theta, rhs, batch);
    }
  }
  return theta;
}

}  // namespace kernelforge
