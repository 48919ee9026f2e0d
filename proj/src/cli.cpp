#include "kernelforge/cli.hpp"

#include "kernelforge/analysis.hpp"
#include "kernelforge/data_io.hpp"
#include "kernelforge/model.hpp"
#include "kernelforge/parallel.hpp"
#include "kernelforge/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace kernelforge {

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw IoError("expected a non-empty JSON matrix");
  const auto r = static_cast<Index>(rows.size());
  const auto c = static_cast<Index>(rows.front().size());
  Matrix M(r, c);
  for (Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Index>(row.size()) != c) throw IoError("ragged JSON matrix");
    for (Index j = 0; j < c; ++j) M(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return M;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  file << text;
  if (!file) throw IoError("failed writing '" + path + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in '" + path + "': " + e.what());
  }
}

void apply_threads(int threads) {
  if (threads > 0) {
    set_num_threads(threads);
    return;
  }
  if (const char* env = std::getenv("KERNELFORGE_THREADS")) {
    try {
      set_num_threads(std::stoi(env));
      return;
    } catch (const std::exception&) {
      throw InvalidArgument("KERNELFORGE_THREADS must be an integer");
    }
  }
  set_num_threads(1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

std::vector<Index> parse_index_list(const std::string& text) {
  std::vector<Index> values;
  for (const auto& part : split(text, ',')) {
    try {
      values.push_back(static_cast<Index>(std::stoll(part)));
    } catch (const std::exception&) {
      throw InvalidArgument("expected a comma-separated integer list, got '" + text + "'");
    }
    if (values.back() < 1) throw InvalidArgument("grid values must be positive");
  }
  if (values.empty()) throw InvalidArgument("empty grid");
  return values;
}

double parse_positive(const std::string& text, const std::string& what) {
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw InvalidArgument(what + " must be a number, got '" + text + "'");
  }
  if (!(value > 0.0)) throw InvalidArgument(what + " must be positive");
  return value;
}

ProjectionConfig parse_projection(const std::string& text, Index proj_s, Index proj_q,
                                  Index batch_cap, Ep2LrRule rule) {
  if (text == "exact") return ExactInverseProjection{};
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "ep2") {
    Ep2Projection proj;
    proj.epochs = arg.empty() ? 1 : static_cast<int>(parse_positive(arg, "ep2 epochs"));
    proj.s = proj_s;
    proj.q = proj_q;
    proj.batch_cap = batch_cap;
    proj.lr_rule = rule;
    return proj;
  }
  if (kind == "richardson") {
    const auto parts = split(arg, ',');
    if (parts.size() != 2) throw InvalidArgument("--proj richardson expects richardson:nu,T");
    RichardsonProjection proj;
    if (parts[0] != "auto") proj.nu = parse_positive(parts[0], "richardson nu");
    proj.steps = static_cast<int>(parse_positive(parts[1], "richardson T"));
    proj.q = std::max<Index>(0, proj_q);
    return proj;
  }
  throw InvalidArgument("unknown projection '" + text + "' (expected ep2:T, exact, or richardson:nu,T)");
}

Matrix resolve_centers(const std::string& spec, const Matrix& X, std::uint64_t seed, int kmeans_iters) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  if (colon != std::string::npos && (kind == "random" || kind == "kmeans")) {
    CenterSelection sel;
    sel.method = kind == "random" ? CenterMethod::RandomSubset : CenterMethod::KMeans;
    sel.p = static_cast<Index>(parse_positive(spec.substr(colon + 1), "number of centers"));
    sel.kmeans_iters = kmeans_iters;
    sel.seed = seed;
    return select_centers(X, sel).centers;
  }
  Matrix Z = load_matrix_csv(spec);
  if (Z.cols() != X.cols()) {
    throw DimensionError("centers file has " + std::to_string(Z.cols()) + " columns, data has " +
                         std::to_string(X.cols()));
  }
  return Z;
}

// --- synth --------------------------------------------------------------------

struct SynthArgs {
  std::string kind = "blobs";
  Index n = 1000;
  Index n_test = 0;
  Index d = 2;
  Index classes = 3;
  double spread = 1.0;
  Index p_star = 50;
  double sigma = 0.0;
  std::string kernel = "laplace";
  double bandwidth = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  apply_threads(a.threads);
  json sidecar;
  sidecar["kind"] = a.kind;
  sidecar["seed"] = a.seed;
  sidecar["n"] = a.n;
  sidecar["n_test"] = a.n_test;
  sidecar["d"] = a.d;

  if (a.kind == "blobs") {
    const Dataset all = make_blobs(a.n + a.n_test, a.d, a.classes, a.spread, a.seed);
    Dataset train{all.features.topRows(a.n), all.targets.topRows(a.n)};
    save_csv(a.out + ".csv", train);
    if (a.n_test > 0) {
      save_csv(a.out + "_test.csv",
               Dataset{all.features.bottomRows(a.n_test), all.targets.bottomRows(a.n_test)});
    }
    sidecar["classes"] = a.classes;
    sidecar["spread"] = a.spread;
    sidecar["label_columns"] = a.classes;
    sidecar["means"] = matrix_to_json(blob_means(a.d, a.classes, a.seed));
  } else if (a.kind == "student-teacher") {
    const KernelSpec spec(parse_kernel_family(a.kernel), a.bandwidth);
    const auto problem = make_student_teacher_problem(spec, a.n, a.n_test, a.d, a.p_star, a.sigma, a.seed);
    save_csv(a.out + ".csv", Dataset{problem.X, problem.y});
    if (a.n_test > 0) save_csv(a.out + "_test.csv", Dataset{problem.X_test, problem.y_test_clean});
    sidecar["sigma"] = a.sigma;
    sidecar["kernel"] = to_string(spec.family());
    sidecar["bandwidth"] = spec.bandwidth();
    sidecar["p_star"] = a.p_star;
    sidecar["label_columns"] = 1;
    sidecar["test_targets"] = "noiseless";
    sidecar["teacher_centers"] = matrix_to_json(problem.teacher_centers);
    sidecar["alpha_star"] = matrix_to_json(problem.alpha_star);
  } else {
    throw InvalidArgument("unknown synth kind '" + a.kind + "' (expected blobs or student-teacher)");
  }
  write_text(a.out + ".json", sidecar.dump(2) + "\n", out);
  return kExitOk;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  Index labels = 1;
  bool header = false;
  std::string variant = "ep3";
  std::string kernel = "laplace";
  double bandwidth = 0.0;
  std::string centers;
  int kmeans_iters = 20;
  Index q = 0;
  Index s = 0;
  Index m = 0;
  std::string eta = "auto";
  int epochs = 10;
  std::string proj = "ep2:1";
  Index proj_s = 0;
  Index proj_q = -1;
  Index ep2_batch_cap = 512;
  std::string ep2_lr_rule = "paper";
  double lambda = 0.0;
  double tol = 0.0;
  std::uint64_t seed = 0;
  std::string test;
  std::string out;
  std::string record;
  int threads = 0;
};

struct TrainFlagsGiven {
  bool s = false, q = false, m = false, proj = false, lambda = false;
};

int cmd_train(const TrainArgs& a, const TrainFlagsGiven& given, std::ostream& out, std::ostream& err) {
  apply_threads(a.threads);
  const TrainVariant variant = parse_train_variant(a.variant);
  if (variant == TrainVariant::ClassicalGD && (given.s || given.q || given.m || given.proj)) {
    throw InvalidArgument("--s, --q, --m and --proj do not apply to --variant gd");
  }
  if (variant == TrainVariant::EP3Exact && (given.s || given.m || given.proj)) {
    throw InvalidArgument("--s, --m and --proj do not apply to --variant ep3-exact");
  }
  if (variant != TrainVariant::ClassicalGD && given.lambda) {
    throw InvalidArgument("--lambda only applies to --variant gd");
  }

  const KernelSpec spec(parse_kernel_family(a.kernel), a.bandwidth);
  const Dataset data = load_csv(a.data, a.labels, a.header);
  std::optional<Dataset> test;
  if (!a.test.empty()) test = load_csv(a.test, a.labels, a.header);
  const Matrix Z = resolve_centers(a.centers, data.features, a.seed, a.kmeans_iters);

  TrainConfig config;
  config.q = a.q;
  config.s = a.s;
  config.m = a.m;
  if (a.eta != "auto") config.eta = parse_positive(a.eta, "--eta");
  config.epochs = a.epochs;
  config.projection = parse_projection(a.proj, a.proj_s, a.proj_q, a.ep2_batch_cap,
                                       parse_ep2_lr_rule(a.ep2_lr_rule));
  config.seed = a.seed;
  config.tol = a.tol;
  config.gd_lambda = a.lambda;

  json record;
  json cfg;
  cfg["variant"] = to_string(variant);
  cfg["kernel"] = to_string(spec.family());
  cfg["bandwidth"] = spec.bandwidth();
  cfg["centers"] = a.centers;
  cfg["p"] = Z.rows();
  cfg["n"] = data.n();
  cfg["d"] = data.d();
  cfg["c"] = data.c();
  cfg["q"] = a.q;
  cfg["s"] = a.s;
  cfg["m"] = a.m;
  cfg["eta"] = a.eta;
  cfg["epochs"] = a.epochs;
  cfg["proj"] = describe(config.projection);
  cfg["ep2_lr_rule"] = a.ep2_lr_rule;
  cfg["lambda"] = a.lambda;
  cfg["tol"] = a.tol;
  cfg["seed"] = a.seed;
  cfg["threads"] = num_threads();
  record["config"] = cfg;

  const std::string record_path = a.record.empty() ? a.out + ".run.json" : a.record;
  TrainResult result = [&] {
    try {
      return train(spec, data, Z, config, variant, test ? &*test : nullptr);
    } catch (const DivergenceError& e) {
      record["diverged"] = true;
      record["error"] = e.what();
      record["lr_bound"] = e.lr_bound();
      write_text(record_path, record.dump(2) + "\n", out);
      throw;
    }
  }();

  save_model(result.model, a.out);
  json epochs = json::array();
  for (const auto& r : result.history) {
    json e;
    e["epoch"] = r.epoch;
    e["train_mse"] = r.train_mse;
    if (r.test_mse) e["test_mse"] = *r.test_mse;
    if (r.test_accuracy) e["accuracy"] = *r.test_accuracy;
    e["seconds"] = r.seconds;
    epochs.push_back(std::move(e));
  }
  record["eta_used"] = result.state.eta;
  record["epochs"] = std::move(epochs);
  record["model_path"] = a.out;
  record["diverged"] = false;
  write_text(record_path, record.dump(2) + "\n", out);

  if (!result.history.empty()) {
    const auto& last = result.history.back();
    err << "trained " << result.history.size() << " epochs; train mse " << last.train_mse;
    if (last.test_mse) err << ", test mse " << *last.test_mse;
    if (last.test_accuracy) err << ", test accuracy " << *last.test_accuracy;
    err << "\n";
  }
  return kExitOk;
}

// --- fixed-point -------------------------------------------------------------------

struct FixedPointArgs {
  std::string data;
  Index labels = 1;
  bool header = false;
  std::string kernel = "laplace";
  double bandwidth = 0.0;
  std::string centers;
  std::string sidecar;
  int kmeans_iters = 20;
  Index q = 0;
  Index draws = 0;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
};

int cmd_fixed_point(const FixedPointArgs& a, std::ostream& out) {
  apply_threads(a.threads);
  const KernelSpec spec(parse_kernel_family(a.kernel), a.bandwidth);
  const Dataset data = load_csv(a.data, a.labels, a.header);

  std::optional<json> sidecar;
  if (!a.sidecar.empty()) sidecar = read_json_file(a.sidecar);
  if (a.draws > 0 && !sidecar) throw InvalidArgument("--draws needs a student-teacher --sidecar");

  Matrix Z;
  if (!a.centers.empty()) {
    Z = resolve_centers(a.centers, data.features, a.seed, a.kmeans_iters);
  } else if (sidecar && sidecar->contains("teacher_centers")) {
    Z = matrix_from_json(sidecar->at("teacher_centers"));
  } else {
    throw InvalidArgument("fixed-point needs --centers or a sidecar with teacher centers");
  }

  const FixedPointReport rep = fixed_point(spec, data.features, data.targets, Z, a.q);
  json report;
  report["n"] = rep.n;
  report["p"] = Z.rows();
  report["q"] = a.q;
  report["kernel"] = to_string(spec.family());
  report["bandwidth"] = spec.bandwidth();
  report["variance_trace_direct"] = rep.variance_trace_direct;
  report["variance_trace_alt"] = rep.variance_trace_alt;
  report["trace_m_inv"] = rep.trace_m_inv;
  report["trace_cross"] = rep.trace_cross;
  report["lr_bound"] = rep.lr_bound;
  report["lr_bound_projected"] = rep.lr_bound_projected;
  report["alpha_inf"] = matrix_to_json(rep.alpha_inf);

  if (a.draws > 0) {
    StudentTeacherSpec st;
    st.alpha_star = matrix_from_json(sidecar->at("alpha_star"));
    st.noise_sigma = sidecar->at("sigma").get<double>();
    st.seed = a.seed;
    if (st.alpha_star.rows() != Z.rows()) {
      throw DimensionError("sidecar alpha* does not match the number of centers");
    }
    const auto mc = montecarlo_estimator_stats(spec, data.features, Z, a.q, st, a.draws);
    json j;
    j["draws"] = mc.draws;
    j["sigma"] = st.noise_sigma;
    j["normalized"] = mc.normalized;
    j[mc.normalized ? "mean_sqerr_over_sigma2" : "mean_sqerr"] = mc.mean_sqerr;
    j["mean_generalization_error"] = mc.mean_generalization_error;
    j["mean_alpha"] = matrix_to_json(mc.mean_alpha);
    j["stderr_alpha"] = matrix_to_json(mc.stderr_alpha);
    report["montecarlo"] = std::move(j);
  }
  write_text(a.out, report.dump(2) + "\n", out);
  return kExitOk;
}

// --- benchmark --------------------------------------------------------------------

struct BenchmarkArgs {
  std::string p_grid = "50,100,200";
  std::string n_grid = "1000,2000,4000";
  Index n_test = 1000;
  Index p_star = 200;
  Index d = 5;
  double sigma = 0.1;
  std::string kernel = "laplace";
  double bandwidth = 0.0;
  std::string variant = "ep3";
  int epochs = 10;
  Index q = 0;
  Index s = 0;
  Index m = 0;
  std::string proj = "exact";
  std::string ep2_lr_rule = "corrected";
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
};

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  apply_threads(a.threads);
  const KernelSpec spec(parse_kernel_family(a.kernel), a.bandwidth);
  const auto p_grid = parse_index_list(a.p_grid);
  const auto n_grid = parse_index_list(a.n_grid);
  const Index n_max = *std::max_element(n_grid.begin(), n_grid.end());
  const TrainVariant variant = parse_train_variant(a.variant);

  const auto problem = make_student_teacher_problem(spec, n_max, a.n_test, a.d, a.p_star, a.sigma, a.seed);

  std::ostringstream csv;
  csv << "p,n,test_error\n";
  for (const Index p : p_grid) {
    for (const Index n : n_grid) {
      if (p > n) throw InvalidArgument("benchmark grid has p=" + std::to_string(p) + " > n=" + std::to_string(n));
      Dataset data{problem.X.topRows(n), problem.y.topRows(n)};
      CenterSelection sel;
      sel.p = p;
      sel.seed = a.seed + 17;
      const Matrix Z = select_centers(data.features, sel).centers;

      TrainConfig config;
      config.q = a.q;
      config.s = a.s > 0 ? std::min(a.s, n) : 0;
      config.m = a.m > 0 ? std::min(a.m, n) : 0;
      config.epochs = a.epochs;
      config.projection = parse_projection(a.proj, 0, -1, 512, parse_ep2_lr_rule(a.ep2_lr_rule));
      config.seed = a.seed;
      const auto result = train(spec, data, Z, config, variant);
      const double test_error =
          (result.model.predict(problem.X_test) - problem.y_test_clean).squaredNorm() /
          static_cast<double>(std::max<Index>(1, a.n_test));
      csv << p << ',' << n << ',' << format_double(test_error) << '\n';
    }
  }
  write_text(a.out, csv.str(), out);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"kernelforge: general kernel models trained with projected preconditioned SGD"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic datasets and a ground-truth sidecar");
  synth_cmd->add_option("--kind", synth.kind, "blobs or student-teacher")->capture_default_str();
  synth_cmd->add_option("--n", synth.n, "Training samples")->capture_default_str();
  synth_cmd->add_option("--n-test", synth.n_test, "Test samples (written to <out>_test.csv)")->capture_default_str();
  synth_cmd->add_option("--d", synth.d, "Feature dimension")->capture_default_str();
  synth_cmd->add_option("--classes", synth.classes, "Blob classes")->capture_default_str();
  synth_cmd->add_option("--spread", synth.spread, "Blob standard deviation")->capture_default_str();
  synth_cmd->add_option("--p-star", synth.p_star, "Teacher centers")->capture_default_str();
  synth_cmd->add_option("--sigma", synth.sigma, "Label noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--kernel", synth.kernel, "laplace or gaussian")->capture_default_str();
  synth_cmd->add_option("--bandwidth", synth.bandwidth, "Teacher kernel bandwidth")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output prefix")->required();
  synth_cmd->add_option("--threads", synth.threads, "Worker threads");

  TrainArgs tr;
  TrainFlagsGiven given;
  auto* train_cmd = app.add_subcommand("train", "Train a general kernel model");
  train_cmd->add_option("--data", tr.data, "Training CSV")->required();
  train_cmd->add_option("--labels", tr.labels, "Number of trailing label columns")->capture_default_str();
  train_cmd->add_flag("--header", tr.header, "CSV files have a header row");
  train_cmd->add_option("--variant", tr.variant, "ep3, ep3-exact or gd")->capture_default_str();
  train_cmd->add_option("--kernel", tr.kernel, "laplace or gaussian")->capture_default_str();
  train_cmd->add_option("--bandwidth", tr.bandwidth, "Kernel bandwidth")->required();
  train_cmd->add_option("--centers", tr.centers, "Centers: a CSV file, random:p or kmeans:p")->required();
  train_cmd->add_option("--kmeans-iters", tr.kmeans_iters, "Lloyd iterations for kmeans:p")->capture_default_str();
  auto* q_opt = train_cmd->add_option("--q", tr.q, "Data preconditioner level")->capture_default_str();
  auto* s_opt = train_cmd->add_option("--s", tr.s, "Nystrom subsample size (0: min(n, 2000))");
  auto* m_opt = train_cmd->add_option("--m", tr.m, "Batch size (0: n)");
  train_cmd->add_option("--eta", tr.eta, "Learning rate or auto")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs, "Epochs")->capture_default_str();
  auto* proj_opt = train_cmd->add_option("--proj", tr.proj, "Projection: ep2:T, exact or richardson:nu,T")
                       ->capture_default_str();
  train_cmd->add_option("--proj-s", tr.proj_s, "Nystrom size of the model preconditioner (0: min(p, 1000))");
  train_cmd->add_option("--proj-q", tr.proj_q, "Level of the model preconditioner (-1: s/10 for ep2, 0 for richardson)");
  train_cmd->add_option("--ep2-batch-cap", tr.ep2_batch_cap, "Inner solver batch cap")->capture_default_str();
  train_cmd->add_option("--ep2-lr-rule", tr.ep2_lr_rule, "paper or corrected")->capture_default_str();
  auto* lambda_opt = train_cmd->add_option("--lambda", tr.lambda, "Ridge term (gd only)");
  train_cmd->add_option("--tol", tr.tol, "Stop when the train MSE changes by less than this")->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--test", tr.test, "Test CSV");
  train_cmd->add_option("--out", tr.out, "Model output path")->required();
  train_cmd->add_option("--record", tr.record, "Run record path (default <out>.run.json)");
  train_cmd->add_option("--threads", tr.threads, "Worker threads");

  FixedPointArgs fp;
  auto* fp_cmd = app.add_subcommand("fixed-point", "Fixed point and variance report of the exact iteration");
  fp_cmd->add_option("--data", fp.data, "Data CSV")->required();
  fp_cmd->add_option("--labels", fp.labels, "Number of trailing label columns")->capture_default_str();
  fp_cmd->add_flag("--header", fp.header, "CSV has a header row");
  fp_cmd->add_option("--kernel", fp.kernel, "laplace or gaussian")->capture_default_str();
  fp_cmd->add_option("--bandwidth", fp.bandwidth, "Kernel bandwidth")->required();
  fp_cmd->add_option("--centers", fp.centers, "Centers: a CSV file, random:p or kmeans:p (default: sidecar teacher centers)");
  fp_cmd->add_option("--sidecar", fp.sidecar, "Student-teacher sidecar JSON from synth");
  fp_cmd->add_option("--kmeans-iters", fp.kmeans_iters, "Lloyd iterations for kmeans:p")->capture_default_str();
  fp_cmd->add_option("--q", fp.q, "Preconditioner level")->capture_default_str();
  fp_cmd->add_option("--draws", fp.draws, "Monte Carlo noise draws (0: none)")->capture_default_str();
  fp_cmd->add_option("--seed", fp.seed, "Random seed")->capture_default_str();
  fp_cmd->add_option("--out", fp.out, "Report path (default stdout)");
  fp_cmd->add_option("--threads", fp.threads, "Worker threads");

  BenchmarkArgs bm;
  auto* bm_cmd = app.add_subcommand("benchmark", "Test error over a grid of model and data sizes");
  bm_cmd->add_option("--p-grid", bm.p_grid, "Comma-separated model sizes")->capture_default_str();
  bm_cmd->add_option("--n-grid", bm.n_grid, "Comma-separated training sizes")->capture_default_str();
  bm_cmd->add_option("--n-test", bm.n_test, "Test samples")->capture_default_str();
  bm_cmd->add_option("--p-star", bm.p_star, "Teacher centers")->capture_default_str();
  bm_cmd->add_option("--d", bm.d, "Feature dimension")->capture_default_str();
  bm_cmd->add_option("--sigma", bm.sigma, "Label noise")->capture_default_str();
  bm_cmd->add_option("--kernel", bm.kernel, "laplace or gaussian")->capture_default_str();
  bm_cmd->add_option("--bandwidth", bm.bandwidth, "Kernel bandwidth")->required();
  bm_cmd->add_option("--variant", bm.variant, "ep3, ep3-exact or gd")->capture_default_str();
  bm_cmd->add_option("--epochs", bm.epochs, "Epochs per run")->capture_default_str();
  bm_cmd->add_option("--q", bm.q, "Data preconditioner level")->capture_default_str();
  bm_cmd->add_option("--s", bm.s, "Nystrom subsample size")->capture_default_str();
  bm_cmd->add_option("--m", bm.m, "Batch size")->capture_default_str();
  bm_cmd->add_option("--proj", bm.proj, "Projection: ep2:T, exact or richardson:nu,T")->capture_default_str();
  bm_cmd->add_option("--ep2-lr-rule", bm.ep2_lr_rule, "paper or corrected")->capture_default_str();
  bm_cmd->add_option("--seed", bm.seed, "Random seed")->capture_default_str();
  bm_cmd->add_option("--out", bm.out, "CSV path (default stdout)");
  bm_cmd->add_option("--threads", bm.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  given.s = s_opt->count() > 0;
  given.q = q_opt->count() > 0;
  given.m = m_opt->count() > 0;
  given.proj = proj_opt->count() > 0;
  given.lambda = lambda_opt->count() > 0;

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*train_cmd) return cmd_train(tr, given, out, err);
    if (*fp_cmd) return cmd_fixed_point(fp, out);
    if (*bm_cmd) return cmd_benchmark(bm, out);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("kernelforge");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace kernelforge
