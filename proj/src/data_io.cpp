#include "kernelforge/data_io.hpp"

#include "kernelforge/parallel.hpp"
#include "kernelforge/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace kernelforge {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end) {
    throw IoError("non-numeric cell '" + std::string(cell) + "' at row " + std::to_string(row) +
                  ", column " + std::to_string(col));
  }
  return value;
}

Matrix read_numeric_rows(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  std::vector<double> values;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (has_header && line_no == 1) continue;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (width == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw IoError("ragged CSV: row " + std::to_string(line_no) + " has " +
                    std::to_string(cells.size()) + " columns, expected " + std::to_string(width));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) values.push_back(parse_cell(cells[c], line_no, c + 1));
    ++rows;
  }
  Matrix M(static_cast<Index>(rows), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      M(static_cast<Index>(r), static_cast<Index>(c)) = values[r * width + c];
    }
  }
  return M;
}

void write_rows(std::ostream& out, const Matrix& A, const Matrix* B) {
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(A(i, j));
    }
    if (B) {
      for (Index j = 0; j < B->cols(); ++j) out << ',' << format_double((*B)(i, j));
    }
    out << '\n';
  }
}

double squared_distance(const Matrix& A, Index i, const Matrix& B, Index j) {
  return (A.row(i) - B.row(j)).squaredNorm();
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw IoError("failed to format number");
  return std::string(buf, ptr);
}

Dataset load_csv(const std::filesystem::path& path, Index label_columns, bool has_header) {
  if (label_columns < 1) throw InvalidArgument("need at least one label column");
  const Matrix all = read_numeric_rows(path, has_header);
  if (all.rows() == 0) throw IoError("'" + path.string() + "' contains no data rows");
  if (all.cols() <= label_columns) {
    throw IoError("'" + path.string() + "' has " + std::to_string(all.cols()) +
                  " columns; need more than " + std::to_string(label_columns));
  }
  Dataset data;
  const Index d = all.cols() - label_columns;
  data.features = all.leftCols(d);
  data.targets = all.rightCols(label_columns);
  data.validate();
  return data;
}

void save_csv(const std::filesystem::path& path, const Dataset& data,
              const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
  }
  write_rows(out, data.features, &data.targets);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void save_matrix_csv(const std::filesystem::path& path, const Matrix& M) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_rows(out, M, nullptr);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
  Matrix M = read_numeric_rows(path, false);
  if (M.rows() == 0) throw IoError("'" + path.string() + "' contains no data rows");
  return M;
}

Matrix blob_means(Index d, Index classes, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  Matrix means(classes, d);
  for (Index k = 0; k < classes; ++k) {
    for (Index j = 0; j < d; ++j) means(k, j) = box(rng);
  }
  return means;
}

Dataset make_blobs(Index n, Index d, Index classes, double spread, std::uint64_t seed) {
  if (classes < 1) throw InvalidArgument("make_blobs needs at least one class");
  if (n < 1 || d < 1) throw InvalidArgument("make_blobs needs n >= 1 and d >= 1");
  if (!(spread >= 0.0)) throw InvalidArgument("make_blobs spread must be nonnegative");

  const Matrix means = blob_means(d, classes, seed);
  Rng rng(seed + 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Index> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % classes;
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset data;
  data.features.resize(n, d);
  data.targets = Matrix::Zero(n, classes);
  for (Index i = 0; i < n; ++i) {
    const Index k = labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d; ++j) data.features(i, j) = means(k, j) + spread * normal(rng);
    data.targets(i, k) = 1.0;
  }
  return data;
}

SelectedCenters select_centers(const Matrix& X, const CenterSelection& selection) {
  const Index n = X.rows();
  const Index p = selection.p;
  if (p < 1) throw InvalidArgument("need at least one center");
  if (p > n) {
    throw InvalidArgument("cannot select " + std::to_string(p) + " centers from " +
                          std::to_string(n) + " points");
  }
  Rng rng(selection.seed);
  SelectedCenters out;

  if (selection.method == CenterMethod::RandomSubset) {
    // Uniform without replacement, kept in draw order.
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    perm.resize(static_cast<std::size_t>(p));
    out.indices = perm;
    out.centers = gather_rows(X, perm);
    return out;
  }

  if (selection.kmeans_iters < 1) throw InvalidArgument("k-means needs at least one iteration");

  // k-means++ seeding.
  Matrix centroids(p, X.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  centroids.row(0) = X.row(first(rng));
  Vector nearest(n);
  for (Index i = 0; i < n; ++i) nearest[i] = squared_distance(X, i, centroids, 0);
  for (Index k = 1; k < p; ++k) {
    const double total = nearest.sum();
    Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        target -= nearest[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    centroids.row(k) = X.row(pick);
    for (Index i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(X, i, centroids, k));
  }

  std::vector<Index> assign(static_cast<std::size_t>(n), 0);
  Vector cost(n);
  for (int iter = 0; iter < selection.kmeans_iters; ++iter) {
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      const auto ii = static_cast<Index>(i);
      Index best = 0;
      double best_d = squared_distance(X, ii, centroids, 0);
      for (Index k = 1; k < p; ++k) {
        const double dk = squared_distance(X, ii, centroids, k);
        if (dk < best_d) {
          best_d = dk;
          best = k;
        }
      }
      assign[i] = best;
      cost[ii] = best_d;
    });
    out.inertia.push_back(cost.sum());

    Matrix sums = Matrix::Zero(p, X.cols());
    std::vector<Index> counts(static_cast<std::size_t>(p), 0);
    for (Index i = 0; i < n; ++i) {
      const Index k = assign[static_cast<std::size_t>(i)];
      sums.row(k) += X.row(i);
      ++counts[static_cast<std::size_t>(k)];
    }
    for (Index k = 0; k < p; ++k) {
      const Index count = counts[static_cast<std::size_t>(k)];
      if (count > 0) {
        centroids.row(k) = sums.row(k) / static_cast<double>(count);
        continue;
      }
      // Empty cluster: move it to the point farthest from its centroid.
      Index far = 0;
      for (Index i = 1; i < n; ++i) {
        if (cost[i] > cost[far]) far = i;
      }
      centroids.row(k) = X.row(far);
      cost[far] = 0.0;
    }
  }
  out.centers = centroids;
  return out;
}

}  // namespace kernelforge
