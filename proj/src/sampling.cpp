#include "kernelforge/sampling.hpp"

#include <algorithm>
#include <numeric>

namespace kernelforge {

std::vector<Index> sample_without_replacement(Index n, Index k, Rng& rng) {
  if (k < 0 || k > n) {
    throw InvalidArgument("cannot sample " + std::to_string(k) + " of " + std::to_string(n) +
                          " items without replacement");
  }
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  perm.resize(static_cast<std::size_t>(k));
  std::sort(perm.begin(), perm.end());
  return perm;
}

std::vector<std::vector<Index>> shuffled_batches(Index n, Index m, Rng& rng) {
  if (m < 1) throw InvalidArgument("batch size must be positive");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Index>> batches;
  for (Index begin = 0; begin < n; begin += m) {
    const Index end = std::min(n, begin + m);
    batches.emplace_back(perm.begin() + begin, perm.begin() + end);
  }
  return batches;
}

Matrix gather_rows(const Matrix& M, const std::vector<Index>& idx) {
  return M(idx, Eigen::all);
}

}  // namespace kernelforge
