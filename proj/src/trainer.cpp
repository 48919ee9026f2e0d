#include "kernelforge/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace kernelforge {

namespace {

double largest_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("eigenvalue solver failed");
  return solver.eigenvalues().maxCoeff();
}

void check_divergence(const TrainState& state, const std::function<double()>& bound) {
  if (state.alpha.allFinite() && state.alpha.norm() <= kDivergenceNorm) return;
  const double lr_bound = bound();
  std::ostringstream msg;
  msg << "training diverged at iteration " << state.iteration << " with eta=" << state.eta
      << "; estimated stable learning-rate bound " << lr_bound;
  throw DivergenceError(msg.str(), lr_bound);
}

/// Names the first pair of identical center rows, if any.
void reject_duplicate_centers(const Matrix& Z) {
  for (Index i = 0; i < Z.rows(); ++i) {
    for (Index j = i + 1; j < Z.rows(); ++j) {
      if (Z.row(i) == Z.row(j)) {
        throw SingularMatrixError("K(Z, Z) is singular: centers " + std::to_string(i) + " and " +
                                  std::to_string(j) + " are duplicates");
      }
    }
  }
}

Eigen::LLT<Matrix> factor_center_kernel(const Matrix& kzz, const Matrix& Z) {
  reject_duplicate_centers(Z);
  Eigen::LLT<Matrix> llt(kzz);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("K(Z, Z) is not numerically positive definite");
  }
  return llt;
}

void validate_training_inputs(const Matrix& X, const Matrix& y, const Matrix& Z) {
  if (X.rows() < 1 || X.cols() < 1) throw InvalidArgument("training set is empty");
  if (y.rows() != X.rows()) throw DimensionError("targets and features have different row counts");
  if (y.cols() < 1) throw InvalidArgument("targets need at least one column");
  if (Z.rows() < 1) throw InvalidArgument("need at least one center");
  if (Z.cols() != X.cols()) {
    throw DimensionError("centers have " + std::to_string(Z.cols()) + " features, data has " +
                         std::to_string(X.cols()));
  }
}

}  // namespace

std::string describe(const ProjectionConfig& projection) {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ExactInverseProjection>) {
          return "exact";
        } else if constexpr (std::is_same_v<T, Ep2Projection>) {
          return "ep2:" + std::to_string(p.epochs);
        } else {
          std::ostringstream out;
          out << "richardson:";
          if (p.nu) {
            out << *p.nu;
          } else {
            out << "auto";
          }
          out << "," << p.steps;
          return out.str();
        }
      },
      projection);
}

TrainVariant parse_train_variant(std::string_view name) {
  if (name == "ep3") return TrainVariant::EP3;
  if (name == "ep3-exact") return TrainVariant::EP3Exact;
  if (name == "gd") return TrainVariant::ClassicalGD;
  throw InvalidArgument("unknown training variant '" + std::string(name) + "'");
}

std::string to_string(TrainVariant variant) {
  switch (variant) {
    case TrainVariant::EP3:
      return "ep3";
    case TrainVariant::EP3Exact:
      return "ep3-exact";
    case TrainVariant::ClassicalGD:
      return "gd";
  }
  return "unknown";
}

TrainState initial_state(Index p, Index c, double eta, const TrainConfig& config) {
  TrainState state;
  state.alpha = Matrix::Zero(p, c);
  state.eta = eta;
  state.config = config;
  return state;
}

// --- exact projection -------------------------------------------------------

ExactSetup ep3_exact_setup(const KernelSpec& spec, const Matrix& X, const Matrix& y,
                           const Matrix& Z, Index q) {
  validate_training_inputs(X, y, Z);
  if (X.rows() > kMaxExactSamples || Z.rows() > kMaxExactCenters) {
    throw InvalidArgument("exact projection is limited to n <= " +
                          std::to_string(kMaxExactSamples) + " and p <= " +
                          std::to_string(kMaxExactCenters));
  }
  const Matrix kzz = kernel_matrix(spec, Z, Z);
  auto llt = factor_center_kernel(kzz, Z);
  auto eig = top_q_eigensystem(kernel_matrix(spec, X, X), q);
  return ExactSetup{kernel_matrix(spec, X, Z), y, NystromPreconditioner::exact(std::move(eig)),
                    std::move(llt)};
}

double exact_lr_bound(const ExactSetup& setup) {
  const Matrix M = setup.kxz.transpose() * setup.precond.apply_I_minus_Q(setup.kxz);
  return 2.0 / largest_eigenvalue(0.5 * (M + M.transpose()));
}

double exact_auto_learning_rate(const ExactSetup& setup) {
  return 1.0 / setup.precond.eigensystem().tail;
}

void ep3_exact_step(TrainState& state, const ExactSetup& setup) {
  const Matrix g = setup.kxz * state.alpha - setup.targets;
  state.history.push_back({state.iteration, g.squaredNorm() / static_cast<double>(g.rows())});
  const Matrix h = setup.kxz.transpose() * setup.precond.apply_I_minus_Q(g);
  state.alpha -= state.eta * setup.kzz.solve(h);
  ++state.iteration;
  check_divergence(state, [&] { return exact_lr_bound(setup); });
}

// --- stochastic iteration -----------------------------------------------------

Projector::Projector(const KernelSpec& spec, const Matrix& Z, const ProjectionConfig& config,
                     std::uint64_t seed)
    : config_(config) {
  const Index p = Z.rows();
  if (std::holds_alternative<ExactInverseProjection>(config_)) {
    llt_ = factor_center_kernel(kernel_matrix(spec, Z, Z), Z);
  } else if (const auto* inner = std::get_if<Ep2Projection>(&config_)) {
    if (inner->epochs < 1) throw InvalidArgument("ep2 projection needs at least one epoch");
    Ep2Options options;
    options.s = inner->s > 0 ? inner->s : std::min<Index>(p, 1000);
    options.q = inner->q >= 0 ? inner->q : (options.s - 1) / 10;
    options.batch_cap = inner->batch_cap;
    options.lr_rule = inner->lr_rule;
    options.seed = seed;
    ep2_.emplace(spec, Z, options);
  } else {
    const auto& rich = std::get<RichardsonProjection>(config_);
    if (rich.steps < 1) throw InvalidArgument("richardson projection needs at least one step");
    kzz_ = kernel_matrix(spec, Z, Z);
    auto eig = top_q_eigensystem(kzz_, rich.q);
    const double tail = eig.tail;
    q2_ = NystromPreconditioner::exact(std::move(eig));
    nu_ = rich.nu ? *rich.nu : 1.0 / tail;
    if (!(nu_ > 0.0) || !std::isfinite(nu_)) throw InvalidArgument("richardson step size must be positive");
  }
}

Matrix Projector::project(const Matrix& h, Rng& rng) const {
  if (llt_) return llt_->solve(h);
  if (ep2_) return ep2_->solve(h, std::get<Ep2Projection>(config_).epochs, rng);
  return richardson_project(*q2_, kzz_, h, nu_, std::get<RichardsonProjection>(config_).steps);
}

double ep3_auto_learning_rate(Index n, Index s, Index m, double beta, double tail_s) {
  const double lambda_hat = static_cast<double>(n) / static_cast<double>(s) * tail_s;
  const auto nd = static_cast<double>(n);
  const auto md = static_cast<double>(m);
  return md / (nd * beta + (md - 1.0) * lambda_hat);
}

Ep3Setup ep3_setup(const KernelSpec& spec, const Matrix& X, const Matrix& y, const Matrix& Z,
                   const TrainConfig& config) {
  validate_training_inputs(X, y, Z);
  const Index n = X.rows();
  const Index s = config.s > 0 ? config.s : std::min<Index>(n, 2000);
  const Index m = config.m > 0 ? config.m : n;
  if (s > n) throw InvalidArgument("Nystrom size s=" + std::to_string(s) + " exceeds n=" + std::to_string(n));
  if (config.q < 0 || config.q >= s) {
    throw InvalidArgument("need 0 <= q < s, got q=" + std::to_string(config.q) + ", s=" + std::to_string(s));
  }
  if (m > n) throw InvalidArgument("batch size m=" + std::to_string(m) + " exceeds n=" + std::to_string(n));

  Rng rng(config.seed);
  auto subset = sample_without_replacement(n, s, rng);
  Matrix Xs = gather_rows(X, subset);
  auto eig = top_q_eigensystem(kernel_matrix(spec, Xs, Xs), config.q);
  check_nystrom_ratio(s, config.q);
  const double tail = eig.tail;
  const double beta = kernel_diag_max(spec, Xs);
  auto precond = NystromPreconditioner::nystrom(std::move(eig), std::move(Xs));
  Matrix C = build_C(spec, Z, precond);

  const double auto_eta = ep3_auto_learning_rate(n, s, m, beta, tail);
  const double eta = config.eta ? *config.eta : auto_eta;
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument("learning rate must be positive");

  return Ep3Setup{spec,
                  X,
                  y,
                  Z,
                  std::move(subset),
                  std::move(precond),
                  std::move(C),
                  Projector(spec, Z, config.projection, config.seed + 1),
                  eta,
                  2.0 * auto_eta};
}

void ep3_step(TrainState& state, const Ep3Setup& setup, std::span<const Index> batch, Rng& rng) {
  if (batch.empty()) throw InvalidArgument("ep3_step: empty minibatch");
  const std::vector<Index> rows(batch.begin(), batch.end());
  const Matrix Xm = gather_rows(setup.X, rows);
  const Matrix kmz = kernel_matrix(setup.spec, Xm, setup.Z);
  const Matrix g = kmz * state.alpha - gather_rows(setup.y, rows);
  state.history.push_back({state.iteration, g.squaredNorm() / static_cast<double>(g.rows())});

  Matrix h = kmz.transpose() * g;
  if (setup.precond.q() > 0) {
    h -= setup.C * (kernel_matrix(setup.spec, setup.precond.anchors(), Xm) * g);
  }
  if (!h.allFinite()) throw NonFiniteError("ep3_step: non-finite projected gradient");

  const Matrix theta = setup.projector.project(h, rng);
  const double scale = static_cast<double>(setup.X.rows()) / static_cast<double>(rows.size());
  state.alpha -= scale * state.eta * theta;
  ++state.iteration;
  check_divergence(state, [&] { return setup.lr_bound; });
}

// --- baselines ----------------------------------------------------------------

GdSetup gd_setup(const KernelSpec& spec, const Matrix& X, const Matrix& y, const Matrix& Z) {
  validate_training_inputs(X, y, Z);
  return GdSetup{kernel_matrix(spec, X, Z), kernel_matrix(spec, Z, Z), y};
}

double gd_lr_bound(const GdSetup& setup, double lambda) {
  const Matrix H = setup.kxz.transpose() * setup.kxz + lambda * setup.kzz;
  return 2.0 / largest_eigenvalue(H);
}

void classical_gd_step(TrainState& state, const GdSetup& setup, double lambda) {
  const Matrix g = setup.kxz * state.alpha - setup.targets;
  state.history.push_back({state.iteration, g.squaredNorm() / static_cast<double>(g.rows())});
  Matrix grad = setup.kxz.transpose() * g;
  if (lambda != 0.0) grad += lambda * (setup.kzz * state.alpha);
  state.alpha -= state.eta * grad;
  ++state.iteration;
  check_divergence(state, [&] { return gd_lr_bound(setup, lambda); });
}

Matrix richardson_project(const NystromPreconditioner& q2, const Matrix& kzz, const Matrix& h,
                          double nu, int steps) {
  if (kzz.rows() != h.rows() || kzz.cols() != h.rows()) {
    throw DimensionError("richardson_project: K(Z, Z) and h disagree in size");
  }
  Matrix theta = Matrix::Zero(h.rows(), h.cols());
  for (int t = 0; t < steps; ++t) {
    theta -= nu * q2.apply_I_minus_Q(kzz * theta - h);
  }
  return theta;
}

// --- driver -------------------------------------------------------------------

TrainResult train(const KernelSpec& spec, const Dataset& data, const Matrix& Z,
                  const TrainConfig& config, TrainVariant variant, const Dataset* test) {
  data.validate();
  validate_training_inputs(data.features, data.targets, Z);
  if (config.epochs < 0) throw InvalidArgument("epochs must be nonnegative");
  if (test) {
    test->validate();
    if (test->d() != data.d() || test->c() != data.c()) {
      throw DimensionError("test set shape does not match the training set");
    }
  }

  const Index n = data.n();
  const Index p = Z.rows();
  const Index c = data.c();
  const auto clock_start = std::chrono::steady_clock::now();

  GeneralKernelModel model = GeneralKernelModel::zeros(spec, Z, c);
  std::vector<EpochRecord> history;
  TrainState state = initial_state(p, c, 0.0, config);

  std::function<void()> run_epoch;
  std::optional<ExactSetup> exact;
  std::optional<GdSetup> gd;
  std::optional<Ep3Setup> ep3;
  Rng batch_rng(config.seed + 2);

  switch (variant) {
    case TrainVariant::EP3Exact:
      exact.emplace(ep3_exact_setup(spec, data.features, data.targets, Z, config.q));
      state.eta = config.eta ? *config.eta : exact_auto_learning_rate(*exact);
      run_epoch = [&] { ep3_exact_step(state, *exact); };
      break;
    case TrainVariant::ClassicalGD:
      gd.emplace(gd_setup(spec, data.features, data.targets, Z));
      state.eta = config.eta ? *config.eta : 0.5 * gd_lr_bound(*gd, config.gd_lambda);
      run_epoch = [&] { classical_gd_step(state, *gd, config.gd_lambda); };
      break;
    case TrainVariant::EP3: {
      ep3.emplace(ep3_setup(spec, data.features, data.targets, Z, config));
      state.eta = ep3->eta;
      const Index m = config.m > 0 ? config.m : n;
      run_epoch = [&, m] {
        for (const auto& batch : shuffled_batches(n, m, batch_rng)) {
          ep3_step(state, *ep3, batch, batch_rng);
        }
      };
      break;
    }
  }
  if (!(state.eta > 0.0) || !std::isfinite(state.eta)) {
    throw InvalidArgument("learning rate must be positive and finite");
  }

  std::optional<double> previous_mse;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    run_epoch();
    model.set_weights(state.alpha);

    EpochRecord record;
    record.epoch = epoch;
    record.train_mse = evaluate(model, data).mse;
    if (test) {
      const Evaluation ev = evaluate(model, *test);
      record.test_mse = ev.mse;
      record.test_accuracy = ev.accuracy;
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    history.push_back(record);

    if (config.tol > 0.0 && previous_mse && std::abs(*previous_mse - record.train_mse) < config.tol) {
      break;
    }
    previous_mse = record.train_mse;
  }

  return TrainResult{std::move(model), std::move(history), std::move(state)};
}

}  // namespace kernelforge
