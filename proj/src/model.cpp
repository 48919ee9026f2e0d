#include "kernelforge/model.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace kernelforge {

namespace {

constexpr int kModelFormatVersion = 1;
constexpr const char* kModelFormatName = "kernelforge-model";

void write_le(std::ostream& out, const Matrix& M) {
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      auto bits = std::bit_cast<std::uint64_t>(M(i, j));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      char buf[8];
      std::memcpy(buf, &bits, 8);
      out.write(buf, 8);
    }
  }
}

Matrix read_le(std::istream& in, Index rows, Index cols) {
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      char buf[8];
      if (!in.read(buf, 8)) throw IoError("model file truncated");
      std::uint64_t bits;
      std::memcpy(&bits, buf, 8);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      M(i, j) = std::bit_cast<double>(bits);
    }
  }
  return M;
}

}  // namespace

GeneralKernelModel::GeneralKernelModel(KernelSpec spec, Matrix centers, Matrix weights)
    : spec_(spec), centers_(std::move(centers)), weights_(std::move(weights)) {
  if (centers_.rows() < 1 || centers_.cols() < 1) throw InvalidArgument("model needs p >= 1 centers");
  if (weights_.rows() != centers_.rows() || weights_.cols() < 1) {
    throw DimensionError("model weights must be p x c with p = number of centers");
  }
  if (!centers_.allFinite() || !weights_.allFinite()) throw NonFiniteError("model has non-finite entries");
}

GeneralKernelModel GeneralKernelModel::zeros(KernelSpec spec, Matrix centers, Index outputs) {
  const Index p = centers.rows();
  return GeneralKernelModel(spec, std::move(centers), Matrix::Zero(p, outputs));
}

void GeneralKernelModel::set_weights(Matrix weights) {
  if (weights.rows() != weights_.rows() || weights.cols() != weights_.cols()) {
    throw DimensionError("set_weights: shape mismatch");
  }
  if (!weights.allFinite()) throw NonFiniteError("set_weights: non-finite weights");
  weights_ = std::move(weights);
}

Matrix GeneralKernelModel::predict(const Matrix& X) const {
  if (X.cols() != d()) {
    throw DimensionError("predict: inputs have " + std::to_string(X.cols()) +
                         " features, model expects " + std::to_string(d()));
  }
  return kernel_matrix(spec_, X, centers_) * weights_;
}

std::vector<Index> argmax_rows(const Matrix& scores) {
  std::vector<Index> labels(static_cast<std::size_t>(scores.rows()));
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

std::vector<Index> GeneralKernelModel::classify(const Matrix& X) const {
  if (c() < 2) throw InvalidArgument("classify needs at least two outputs");
  return argmax_rows(predict(X));
}

bool is_one_hot(const Matrix& targets) {
  if (targets.cols() < 2) return false;
  for (Index i = 0; i < targets.rows(); ++i) {
    int ones = 0;
    for (Index j = 0; j < targets.cols(); ++j) {
      const double v = targets(i, j);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  return true;
}

Evaluation evaluate(const GeneralKernelModel& model, const Dataset& data) {
  if (data.targets.cols() != model.c() || data.targets.rows() != data.features.rows()) {
    throw DimensionError("evaluate: dataset shape does not match the model");
  }
  const Matrix pred = model.predict(data.features);
  Evaluation ev;
  ev.mse = (pred - data.targets).squaredNorm() / static_cast<double>(data.n());
  if (is_one_hot(data.targets)) {
    const auto predicted = argmax_rows(pred);
    const auto truth = argmax_rows(data.targets);
    Index correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth[i];
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.n());
  }
  return ev;
}

void save_model(const GeneralKernelModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format"] = kModelFormatName;
  header["version"] = kModelFormatVersion;
  header["kernel"] = to_string(model.spec().family());
  header["bandwidth"] = model.spec().bandwidth();
  header["p"] = model.p();
  header["d"] = model.d();
  header["c"] = model.c();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << header.dump() << '\n';
  write_le(out, model.centers());
  write_le(out, model.weights());
  if (!out) throw IoError("failed writing model to '" + path.string() + "'");
}

GeneralKernelModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("model file has no header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed model header: ") + e.what());
  }
  if (header.value("format", "") != kModelFormatName) throw IoError("not a kernelforge model file");
  if (header.value("version", 0) != kModelFormatVersion) {
    throw IoError("unsupported model format version");
  }
  const KernelSpec spec(parse_kernel_family(header.at("kernel").get<std::string>()),
                        header.at("bandwidth").get<double>());
  const auto p = header.at("p").get<Index>();
  const auto d = header.at("d").get<Index>();
  const auto c = header.at("c").get<Index>();
  if (p < 1 || d < 1 || c < 1) throw IoError("model header has invalid shape");

  Matrix centers = read_le(in, p, d);
  Matrix weights = read_le(in, p, c);
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in model file");
  return GeneralKernelModel(spec, std::move(centers), std::move(weights));
}

}  // namespace kernelforge
