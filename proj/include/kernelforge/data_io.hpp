#pragma once

#include "kernelforge/kernels.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kernelforge {

// CSV: comma separated, one sample per row, targets in the last
// `label_columns` columns, optional single header row.

Dataset load_csv(const std::filesystem::path& path, Index label_columns, bool has_header = false);

/// Writes features then targets. Values use the shortest representation that
/// parses back to the same double, so save -> load is bit exact.
void save_csv(const std::filesystem::path& path, const Dataset& data,
              const std::vector<std::string>& header = {});

/// Writes a bare matrix (no header), same number formatting as save_csv.
void save_matrix_csv(const std::filesystem::path& path, const Matrix& M);
Matrix load_matrix_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

/// `classes` Gaussian blobs: means uniform in [-10, 10]^d, isotropic noise with
/// standard deviation `spread`, one-hot targets, class sizes differing by at
/// most one, rows shuffled. Deterministic per seed.
Dataset make_blobs(Index n, Index d, Index classes, double spread, std::uint64_t seed);

/// Blob means used by make_blobs for the same (d, classes, seed).
Matrix blob_means(Index d, Index classes, std::uint64_t seed);

enum class CenterMethod { RandomSubset, KMeans };

struct CenterSelection {
  CenterMethod method = CenterMethod::RandomSubset;
  Index p = 1;
  int kmeans_iters = 20;
  std::uint64_t seed = 0;
};

struct SelectedCenters {
  Matrix centers;               // p x d
  std::vector<Index> indices;   // rows of X (RandomSubset only)
  std::vector<double> inertia;  // within-cluster sum of squares per Lloyd iteration (KMeans only)
};

/// RandomSubset: p rows of X uniformly without replacement.
/// KMeans: k-means++ seeding then a fixed number of Lloyd iterations under
/// squared Euclidean distance. An empty cluster is re-seeded at the point
/// farthest from its current centroid.
SelectedCenters select_centers(const Matrix& X, const CenterSelection& selection);

}  // namespace kernelforge
