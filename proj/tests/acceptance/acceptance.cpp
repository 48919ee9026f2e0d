// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// fails. Pass a criterion number to run only that one.
#include "kernelforge/analysis.hpp"
#include "kernelforge/cli.hpp"
#include "kernelforge/data_io.hpp"
#include "kernelforge/ep2.hpp"
#include "kernelforge/model.hpp"
#include "kernelforge/parallel.hpp"
#include "kernelforge/preconditioner.hpp"
#include "kernelforge/trainer.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>

using namespace kernelforge;
using kftest::gaussian_matrix;
using kftest::rel;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 == 1 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

std::vector<Index> all_rows(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

// 1. Eigenvalues of (I - Q)K are min(lambda_i, lambda_{q+1}).
void spectrum_flattening(Outcome& out) {
  const Index n = 64, q = 8;
  const Matrix K = kftest::laplace_gram(gaussian_matrix(n, 5, 101), 1.0);
  const auto pc = NystromPreconditioner::exact(top_q_eigensystem(K, q));
  const Matrix PK = pc.apply_I_minus_Q(K);

  Eigen::SelfAdjointEigenSolver<Matrix> full(K, Eigen::EigenvaluesOnly);
  Vector lambda = full.eigenvalues().reverse();
  const double cap = lambda[q];
  Vector expected = lambda.cwiseMin(cap);
  std::sort(expected.data(), expected.data() + n);

  Eigen::EigenSolver<Matrix> es(PK, false);
  Vector got = es.eigenvalues().real();
  std::sort(got.data(), got.data() + n);
  const double imag = es.eigenvalues().imag().cwiseAbs().maxCoeff();
  const double err = (got - expected).cwiseAbs().maxCoeff();
  out.detail << "max |eig - min(lambda_i, lambda_9)| = " << err << ", max imag " << imag;
  out.require(err < 1e-8 && imag < 1e-8, "eigenvalue error < 1e-8");
}

// 2. Exact-projection iteration converges to the fixed point.
void fixed_point_convergence(Outcome& out) {
  const auto inst = kftest::standard_instance(1);
  const auto rep = fixed_point(inst.spec, inst.X, inst.y, inst.Z, inst.q);
  const auto setup = ep3_exact_setup(inst.spec, inst.X, inst.y, inst.Z, inst.q);
  TrainState state = initial_state(inst.Z.rows(), 1, 0.9 * rep.lr_bound, {});
  std::vector<double> dist{rel(state.alpha, rep.alpha_inf)};
  int t = 0;
  while (t < 2000 && dist.back() >= 1e-6) {
    ep3_exact_step(state, setup);
    dist.push_back(rel(state.alpha, rep.alpha_inf));
    ++t;
  }
  const auto rho = contraction_estimate(dist);
  out.detail << "relative distance " << dist.back() << " after " << t << " iterations, rho " << rho.rho_fit;
  out.require(dist.back() < 1e-6, "distance < 1e-6 within 2000 iterations");
  out.require(rho.rho_fit < 1.0, "rho < 1");
}

// 3. Full-data stochastic iteration with exact projection tracks the exact iteration.
void equivalence_chain(Outcome& out) {
  const KernelSpec spec(KernelFamily::Laplace, 1.0);
  const auto problem = make_student_teacher_problem(spec, 200, 0, 5, 20, 0.1, 3);
  const Matrix Z = problem.X.topRows(40);
  const Index n = 200, q = 10;
  const auto exact = ep3_exact_setup(spec, problem.X, problem.y, Z, q);
  const double eta = 0.9 * exact_lr_bound(exact);
  TrainConfig config;
  config.q = q;
  config.s = n;
  config.m = n;
  config.eta = eta;
  const auto stochastic = ep3_setup(spec, problem.X, problem.y, Z, config);
  TrainState a = initial_state(40, 1, eta, config);
  TrainState b = initial_state(40, 1, eta, config);
  Rng rng(4);
  const auto batch = all_rows(n);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    ep3_step(a, stochastic, batch, rng);
    ep3_exact_step(b, exact);
    worst = std::max(worst, rel(a.alpha, b.alpha));
  }
  out.detail << "max relative iterate gap over 50 steps " << worst;
  out.require(worst < 1e-10, "gap < 1e-10");
}

// 4. Inner solver against a dense solve; Richardson with Q2 = 0.
void inner_solver(Outcome& out) {
  const KernelSpec spec(KernelFamily::Laplace, 1.0);
  const Matrix Z = gaussian_matrix(500, 10, 41);
  const Matrix h = gaussian_matrix(500, 1, 42);
  const Matrix K = kernel_matrix(spec, Z, Z);
  const Matrix dense = K.llt().solve(h);

  Ep2Options options;
  options.s = 500;
  options.q = 20;
  options.lr_rule = Ep2LrRule::Corrected;
  options.seed = 7;
  const Ep2Solver solver(spec, Z, options);
  const Matrix theta = solver.solve(h, 50);
  const double err = rel(theta, dense);
  const double residual = (K * theta - h).norm() / h.norm();

  RichardsonProjection rp;
  rp.q = 0;
  rp.steps = 500;
  const Projector projector(spec, Z, rp, 7);
  Rng rng(7);
  const double rich = rel(projector.project(h, rng), dense);
  out.detail << "ep2 relative error " << err << " (residual " << residual << "), richardson error " << rich;
  out.require(err < 1e-3, "ep2 relative error < 1e-3");
  out.require(rich < 1e-6, "richardson error < 1e-6");
}

// 5. Generalization error of the least-squares estimator is sigma^2 p / n.
void variance_law(Outcome& out) {
  const KernelSpec spec(KernelFamily::Laplace, 1.0);
  const Index n = 2000, p = 50;
  const double sigma = 0.5;
  const auto problem = make_student_teacher_problem(spec, n, 0, 10, p, sigma, 11);
  const StudentTeacherSpec st{problem.alpha_star, sigma, 5};
  const auto mc = montecarlo_estimator_stats(spec, problem.X, problem.teacher_centers, 0, st, 200);
  const double target = sigma * sigma * static_cast<double>(p) / static_cast<double>(n);
  const double relerr = std::abs(mc.mean_generalization_error / target - 1.0);
  out.detail << "mean generalization error " << mc.mean_generalization_error << " vs " << target
             << " (relative " << relerr << ")";
  out.require(relerr < 0.10, "within 10%");
}

// 6. Monte Carlo squared error against the closed-form variance trace.
void variance_formula(Outcome& out) {
  const KernelSpec spec(KernelFamily::Laplace, 1.0);
  const double sigma = 0.5;
  const Index q = 4;
  const auto problem = make_student_teacher_problem(spec, 400, 0, 10, 20, sigma, 13);
  const auto rep = fixed_point(spec, problem.X, problem.y, problem.teacher_centers, q);
  const StudentTeacherSpec st{problem.alpha_star, sigma, 9};
  const auto mc = montecarlo_estimator_stats(spec, problem.X, problem.teacher_centers, q, st, 1000);
  const double relerr = std::abs(mc.mean_sqerr / rep.variance_trace_direct - 1.0);
  const double zmax =
      ((mc.mean_alpha - problem.alpha_star).cwiseAbs().array() / mc.stderr_alpha.array()).maxCoeff();
  out.detail << "E|a - a*|^2 / sigma^2 = " << mc.mean_sqerr << " vs trace " << rep.variance_trace_direct
             << " (relative " << relerr << "), max |z| " << zmax;
  out.require(relerr < 0.05, "within 5%");
  out.require(zmax <= 4.0, "mean within 4 standard errors");
}

using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// Extended-precision dense evaluation of tr(M^-1), the direct trace and the cross trace.
std::array<long double, 3> dense_traces(const KernelSpec& spec, const Matrix& X, const Matrix& Z, Index q) {
  auto gram = [&](const Matrix& A, const Matrix& B) {
    MatrixL K(A.rows(), B.rows());
    for (Index i = 0; i < A.rows(); ++i)
      for (Index j = 0; j < B.rows(); ++j) {
        const long double r2 = (A.row(i).cast<long double>() - B.row(j).cast<long double>()).squaredNorm();
        const long double b = spec.bandwidth();
        K(i, j) = spec.family() == KernelFamily::Laplace ? std::exp(-std::sqrt(r2) / b) : std::exp(-r2 / (2 * b * b));
      }
    return K;
  };
  const Index n = X.rows();
  const MatrixL kxx = gram(X, X), kxz = gram(X, Z);
  Eigen::SelfAdjointEigenSolver<MatrixL> es(kxx);
  MatrixL Q = MatrixL::Zero(n, n);
  const long double tail = es.eigenvalues()[n - 1 - q];
  for (Index i = 0; i < q; ++i) {
    const long double lambda = es.eigenvalues()[n - 1 - i];
    Q += (1 - tail / lambda) * es.eigenvectors().col(n - 1 - i) * es.eigenvectors().col(n - 1 - i).transpose();
  }
  const MatrixL P = MatrixL::Identity(n, n) - Q;
  const MatrixL M = kxz.transpose() * P * kxz;
  const MatrixL Minv = M.ldlt().solve(MatrixL::Identity(M.rows(), M.cols()));
  const MatrixL direct = Minv * kxz.transpose() * P * P * kxz * Minv;
  const MatrixL cross = Minv * kxz.transpose() * Q * P * kxz * Minv;
  return {Minv.trace(), direct.trace(), cross.trace()};
}

// 7. tr(M^-2 K^T (I-Q)^2 K) = tr(M^-1) - tr(M^-2 K^T Q (I-Q) K).
void trace_identity(Outcome& out) {
  double worst = 0.0, oracle = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Index n = 40 + static_cast<Index>(seed) * 3;
    const Index p = 5 + static_cast<Index>(seed % 7);
    const Index q = static_cast<Index>(seed % 6);
    const Index d = 2 + static_cast<Index>(seed % 4);
    const KernelSpec spec(seed % 2 ? KernelFamily::Laplace : KernelFamily::Gaussian, 0.5 + 0.1 * seed);
    const Matrix X = gaussian_matrix(n, d, 700 + seed), Z = gaussian_matrix(p, d, 900 + seed);
    const auto rep = fixed_point(spec, X, gaussian_matrix(n, 1, 800 + seed), Z, q);
    const double scale = std::max(1.0, std::abs(rep.trace_m_inv));
    worst = std::max(worst, std::abs(rep.variance_trace_direct - (rep.trace_m_inv - rep.trace_cross)) / scale);
    const auto ref = dense_traces(spec, X, Z, q);
    oracle = std::max({oracle, static_cast<double>(std::abs(rep.trace_m_inv - ref[0]) / scale),
                       static_cast<double>(std::abs(rep.variance_trace_direct - ref[1]) / scale),
                       static_cast<double>(std::abs(rep.trace_cross - ref[2]) / scale)});
  }
  out.detail << "max relative identity gap over 20 instances " << worst
             << ", max deviation from extended-precision oracle " << oracle;
  out.require(worst < 1e-8, "gap < 1e-8");
  out.require(oracle < 1e-8, "traces agree with the oracle");
}

// 8. Test error plateaus in n at p = 50 and improves in p at n = 4000.
void scaling_trends(Outcome& out) {
  const KernelSpec spec(KernelFamily::Laplace, 2.0);
  const std::vector<Index> ns{1000, 2000, 4000}, ps{50, 100, 200};
  std::map<std::pair<Index, Index>, std::vector<double>> errors;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto problem = make_student_teacher_problem(spec, 4000, 1000, 5, 200, 0.1, seed);
    for (const Index p : ps) {
      for (const Index n : ns) {
        if (p != 50 && n != 4000) continue;
        const Dataset data{problem.X.topRows(n), problem.y.topRows(n)};
        CenterSelection sel;
        sel.p = p;
        sel.seed = seed + 17;
        const Matrix Z = select_centers(data.features, sel).centers;
        TrainConfig config;
        config.q = 20;
        config.s = 500;
        config.m = 500;
        config.epochs = 20;
        config.seed = seed;
        const auto result = train(spec, data, Z, config, TrainVariant::EP3);
        errors[{p, n}].push_back((result.model.predict(problem.X_test) - problem.y_test_clean).squaredNorm() /
                                 1000.0);
      }
    }
  }
  auto med = [&](Index p, Index n) { return median(errors[{p, n}]); };
  out.detail << "p=50: n=1000 " << med(50, 1000) << ", n=2000 " << med(50, 2000) << ", n=4000 " << med(50, 4000)
             << "; n=4000: p=100 " << med(100, 4000) << ", p=200 " << med(200, 4000);
  const double drift = std::abs(med(50, 4000) - med(50, 2000)) / med(50, 2000);
  out.require(drift < 0.10, "p=50 median changes < 10% from n=2000 to n=4000");
  out.require(med(100, 4000) < med(50, 4000) && med(200, 4000) < med(100, 4000), "strict improvement in p");
}

// 9. Preconditioned training reaches a target MSE in fewer epochs than GD.
void baseline_comparison(Outcome& out) {
  const KernelSpec spec(KernelFamily::Laplace, 4.0);
  const int cap = 300;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto problem = make_student_teacher_problem(spec, 1000, 0, 5, 50, 0.0, seed);
    const Dataset data{problem.X, problem.y};
    Eigen::SelfAdjointEigenSolver<Matrix> es(kernel_matrix(spec, problem.X, problem.X), Eigen::EigenvaluesOnly);
    const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    const double target = 1e-3 * problem.y.squaredNorm() / 1000.0;

    auto epochs_to_target = [&](TrainVariant variant) {
      TrainConfig config;
      config.epochs = cap;
      config.seed = seed;
      if (variant == TrainVariant::EP3) {
        config.q = 40;
        config.s = 1000;
        config.m = 200;
      }
      const auto result = train(spec, data, problem.teacher_centers, config, variant);
      for (const auto& r : result.history)
        if (r.train_mse < target) return r.epoch;
      return cap + 1;
    };
    const int ep3 = epochs_to_target(TrainVariant::EP3);
    const int gd = epochs_to_target(TrainVariant::ClassicalGD);
    out.detail << (seed > 1 ? "; " : "") << "seed " << seed << ": cond " << static_cast<long>(cond) << ", ep3 "
               << ep3 << ", gd " << (gd > cap ? ">" + std::to_string(cap) : std::to_string(gd));
    out.require(cond >= 1e4, "cond(K) >= 1e4");
    out.require(ep3 < gd, "ep3 strictly faster");
  }
}

// 10. k-means centers are at least as accurate as random centers.
void center_selection(Outcome& out) {
  const KernelSpec spec(KernelFamily::Laplace, 4.0);
  for (const Index p : {16, 64}) {
    std::vector<double> acc[2];
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Dataset all = make_blobs(3000, 5, 10, 2.0, seed);
      const Dataset tr{all.features.topRows(2000), all.targets.topRows(2000)};
      const Dataset te{all.features.bottomRows(1000), all.targets.bottomRows(1000)};
      for (int k = 0; k < 2; ++k) {
        CenterSelection sel;
        sel.method = k == 0 ? CenterMethod::RandomSubset : CenterMethod::KMeans;
        sel.p = p;
        sel.seed = seed + 100;
        TrainConfig config;
        config.q = 10;
        config.s = 500;
        config.m = 500;
        config.epochs = 10;
        config.seed = seed;
        const auto result = train(spec, tr, select_centers(tr.features, sel).centers, config, TrainVariant::EP3, &te);
        acc[k].push_back(*result.history.back().test_accuracy);
      }
    }
    const double random = median(acc[0]), kmeans = median(acc[1]);
    out.detail << (p == 16 ? "" : "; ") << "p=" << p << ": kmeans " << kmeans << ", random " << random;
    out.require(kmeans >= random, "kmeans >= random at p=" + std::to_string(p));
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// 11. Same seed and one thread give byte-identical model files; load preserves predictions.
void determinism(Outcome& out) {
  kftest::TempDir dir("acceptance");
  std::ostringstream sink;
  const auto prefix = dir.file("blobs");
  int code = run_cli({"synth", "--n", "400", "--n-test", "200", "--d", "4", "--classes", "4", "--seed", "3",
                      "--out", prefix},
                     sink, sink);
  auto train_to = [&](const std::string& path) {
    return run_cli({"train", "--data", prefix + ".csv", "--labels", "4", "--bandwidth", "3", "--centers",
                    "kmeans:40", "--q", "8", "--s", "200", "--m", "100", "--epochs", "3", "--proj", "ep2:1",
                    "--seed", "9", "--threads", "1", "--out", path},
                   sink, sink);
  };
  code += train_to(dir.file("a.kfm")) + train_to(dir.file("b.kfm"));
  out.require(code == 0, "cli runs succeed");
  const bool same = slurp(dir.file("a.kfm")) == slurp(dir.file("b.kfm")) && !slurp(dir.file("a.kfm")).empty();

  const Dataset test = load_csv(prefix + "_test.csv", 4);
  const auto model = load_model(dir.file("a.kfm"));
  save_model(model, dir.file("c.kfm"));
  const auto reloaded = load_model(dir.file("c.kfm"));
  const bool bitwise = (reloaded.predict(test.features).array() == model.predict(test.features).array()).all() &&
                       slurp(dir.file("c.kfm")) == slurp(dir.file("a.kfm"));
  out.detail << "identical files " << (same ? "yes" : "no") << ", bitwise predictions after reload "
             << (bitwise ? "yes" : "no");
  out.require(same, "byte-identical model files");
  out.require(bitwise, "bitwise round trip");
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  set_num_threads(1);
  const std::vector<Criterion> criteria = {
      {1, "spectrum flattening", 1.0, spectrum_flattening},
      {2, "fixed-point convergence", 30.0, fixed_point_convergence},
      {3, "equivalence chain", 10.0, equivalence_chain},
      {4, "inner solver", 30.0, inner_solver},
      {5, "sigma^2 p/n law", 60.0, variance_law},
      {6, "variance formula", 60.0, variance_formula},
      {7, "trace identity", 5.0, trace_identity},
      {8, "scaling trends", 300.0, scaling_trends},
      {9, "baseline comparison", 120.0, baseline_comparison},
      {10, "center selection", 120.0, center_selection},
      {11, "determinism and persistence", 60.0, determinism},
  };
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;

  int failed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Outcome outcome;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(outcome);
    } catch (const std::exception& e) {
      outcome.ok = false;
      outcome.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_seconds) {
      outcome.ok = false;
      outcome.detail << " [over time limit]";
    }
    if (!outcome.ok) ++failed;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.2fs / %.0fs", secs, c.limit_seconds);
    std::cout << (outcome.ok ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << " (" << timing
              << "): " << outcome.detail.str() << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
