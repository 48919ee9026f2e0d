#pragma once

#include "kernelforge/types.hpp"

#include <random>
#include <vector>

namespace kernelforge {

using Rng = std::mt19937_64;

/// k distinct indices from [0, n), uniform without replacement, returned in
/// ascending order (so k = n yields the identity).
std::vector<Index> sample_without_replacement(Index n, Index k, Rng& rng);

/// A uniformly shuffled permutation of [0, n) split into consecutive batches
/// of size m; the last batch keeps the remainder.
std::vector<std::vector<Index>> shuffled_batches(Index n, Index m, Rng& rng);

/// Rows of M selected by idx, in idx order.
Matrix gather_rows(const Matrix& M, const std::vector<Index>& idx);

}  // namespace kernelforge
