#pragma once

#include "kernelforge/ep2.hpp"
#include "kernelforge/kernels.hpp"
#include "kernelforge/model.hpp"
#include "kernelforge/preconditioner.hpp"
#include "kernelforge/sampling.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace kernelforge {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// theta = K(Z, Z)^-1 h through a Cholesky factorization.
struct ExactInverseProjection {};

/// theta from a few epochs of the EigenPro 2.0 solver over the centers.
/// s = 0 and q < 0 select defaults: s = min(p, 1000), q = s / 10.
struct Ep2Projection {
  int epochs = 1;
  Index s = 0;
  Index q = -1;
  Index batch_cap = 512;
  Ep2LrRule lr_rule = Ep2LrRule::Paper;
};

/// theta from T steps of theta <- theta - nu (I - Q2)(K(Z, Z) theta - h),
/// started at zero. Q2 comes from the top-q eigensystem of K(Z, Z); nu
/// defaults to 1 / lambda_{q+1}(K(Z, Z)).
struct RichardsonProjection {
  std::optional<double> nu;
  int steps = 10;
  Index q = 0;
};

using ProjectionConfig = std::variant<ExactInverseProjection, Ep2Projection, RichardsonProjection>;

std::string describe(const ProjectionConfig& projection);

enum class TrainVariant { EP3, EP3Exact, ClassicalGD };

TrainVariant parse_train_variant(std::string_view name);
std::string to_string(TrainVariant variant);

struct TrainConfig {
  Index q = 0;                  // data preconditioner level
  Index s = 0;                  // Nystrom subsample size (EP3); 0 means min(n, 2000)
  Index m = 0;                  // batch size (EP3); 0 means n
  std::optional<double> eta;    // empty: automatic
  int epochs = 1;
  ProjectionConfig projection = ExactInverseProjection{};
  std::uint64_t seed = 0;
  double tol = 0.0;             // stop when |delta train MSE| < tol (0 disables)
  double gd_lambda = 0.0;       // ridge term for the classical GD baseline
};

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

struct HistoryPoint {
  long iteration = 0;
  double train_mse = 0.0;
};

struct TrainState {
  Matrix alpha;  // p x c
  long iteration = 0;
  double eta = 0.0;
  std::vector<HistoryPoint> history;  // MSE of alpha^t before the step t -> t+1
  TrainConfig config;
};

/// Zero-initialized state for p centers and c outputs.
TrainState initial_state(Index p, Index c, double eta, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Exact-projection iteration
// ---------------------------------------------------------------------------

inline constexpr Index kMaxExactSamples = 5000;
inline constexpr Index kMaxExactCenters = 2000;

struct ExactSetup {
  Matrix kxz;                     // K(X, Z), n x p
  Matrix targets;                 // y, n x c
  NystromPreconditioner precond;  // ExactQ over K(X, X)
  Eigen::LLT<Matrix> kzz;         // factorization of K(Z, Z)
};

/// Top-q eigensystem of K(X, X), factored Q, Cholesky of K(Z, Z). Throws
/// SingularMatrixError naming duplicate center rows when K(Z, Z) is singular.
ExactSetup ep3_exact_setup(const KernelSpec& spec, const Matrix& X, const Matrix& y,
                           const Matrix& Z, Index q);

/// alpha <- alpha - eta K(Z,Z)^-1 K(Z,X) (I - Q)(K(X,Z) alpha - y).
void ep3_exact_step(TrainState& state, const ExactSetup& setup);

/// 2 / lambda_max(K(Z,X) (I - Q) K(X,Z)).
double exact_lr_bound(const ExactSetup& setup);

/// 1 / lambda_{q+1}(K(X, X)): stable because the projected, preconditioned
/// Hessian is bounded by lambda_{q+1}.
double exact_auto_learning_rate(const ExactSetup& setup);

// ---------------------------------------------------------------------------
// Stochastic iteration
// ---------------------------------------------------------------------------

/// Approximate or exact solve of K(Z, Z) theta = h.
class Projector {
 public:
  Projector(const KernelSpec& spec, const Matrix& Z, const ProjectionConfig& config,
            std::uint64_t seed);

  Matrix project(const Matrix& h, Rng& rng) const;

  const ProjectionConfig& config() const noexcept { return config_; }
  /// The inner EigenPro 2.0 solver, when configured.
  const Ep2Solver* ep2() const noexcept { return ep2_ ? &*ep2_ : nullptr; }
  /// Richardson step size actually used, when configured.
  double richardson_nu() const noexcept { return nu_; }

 private:
  ProjectionConfig config_;
  std::optional<Eigen::LLT<Matrix>> llt_;
  std::optional<Ep2Solver> ep2_;
  Matrix kzz_;
  std::optional<NystromPreconditioner> q2_;
  double nu_ = 0.0;
};

struct Ep3Setup {
  KernelSpec spec;
  Matrix X;
  Matrix y;
  Matrix Z;
  std::vector<Index> subset;          // indices of X_s in X, ascending
  NystromPreconditioner precond;      // NystromQs over K(X_s, X_s)
  Matrix C;                           // p x s
  Projector projector;
  double eta = 0.0;                   // resolved learning rate
  double lr_bound = 0.0;              // twice the automatic rate, reported on divergence
};

/// Subsample X_s (seeded), eigensystem of K(X_s, X_s), C, and the projection.
Ep3Setup ep3_setup(const KernelSpec& spec, const Matrix& X, const Matrix& y, const Matrix& Z,
                   const TrainConfig& config);

/// Automatic EP3 step size, the EigenPro 2.0 batch rule transplanted to the
/// outer iteration: m / (n beta + (m - 1) lambda_hat) with
/// lambda_hat = (n / s) lambda_{q+1}(K(X_s, X_s)).
double ep3_auto_learning_rate(Index n, Index s, Index m, double beta, double tail_s);

/// One minibatch step:
///   g = K(X_m, Z) alpha - y_m
///   h = K(Z, X_m) g - C K(X_s, X_m) g
///   theta = project(h)
///   alpha <- alpha - (n / m) eta theta
void ep3_step(TrainState& state, const Ep3Setup& setup, std::span<const Index> batch, Rng& rng);

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct GdSetup {
  Matrix kxz;      // n x p
  Matrix kzz;      // p x p
  Matrix targets;  // n x c
};

GdSetup gd_setup(const KernelSpec& spec, const Matrix& X, const Matrix& y, const Matrix& Z);

/// 2 / lambda_max(K(Z,X) K(X,Z) + lambda K(Z,Z)).
double gd_lr_bound(const GdSetup& setup, double lambda);

/// alpha <- alpha - eta K(Z,X)(K(X,Z) alpha - y) - eta lambda K(Z,Z) alpha.
void classical_gd_step(TrainState& state, const GdSetup& setup, double lambda);

/// nu * sum_{i<T} (I - nu (I - Q2) Kzz)^i (I - Q2) h, evaluated by running T
/// Richardson steps from zero.
Matrix richardson_project(const NystromPreconditioner& q2, const Matrix& kzz, const Matrix& h,
                          double nu, int steps);

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  std::optional<double> test_mse;
  std::optional<double> test_accuracy;
  double seconds = 0.0;  // cumulative wall clock
};

struct TrainResult {
  GeneralKernelModel model;
  std::vector<EpochRecord> history;
  TrainState state;
};

/// Runs epochs * ceil(n / m) steps (one full-batch step per epoch for the
/// exact and GD variants) from alpha = 0, recording one EpochRecord per
/// epoch. Deterministic for a fixed seed. Throws DivergenceError when alpha
/// leaves the finite / |alpha| <= 1e12 region.
TrainResult train(const KernelSpec& spec, const Dataset& data, const Matrix& Z,
                  const TrainConfig& config, TrainVariant variant,
                  const Dataset* test = nullptr);

/// Divergence guard threshold on |alpha|.
inline constexpr double kDivergenceNorm = 1e12;

}  // namespace kernelforge
