#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "covclust/sparse_matrix.hpp"

namespace covclust {

/// sum_j q_j ln q_j + ln K with q_j = sizes[j] / sum(sizes); K = sizes.size().
/// Zero-size entries contribute nothing. Clamped at 0 against rounding.
double entropy_difference(std::span<const std::size_t> sizes);

/// |a n b| / |a u b| for sorted index sets; 0 when both are empty.
double jaccard(std::span<const Index> a, std::span<const Index> b);

/// Mean Jaccard similarity over all unordered pairs of sets.
/// Throws UndefinedImpurity with fewer than two sets.
double mean_pairwise_jaccard(const std::vector<std::vector<Index>>& sets);

/// Hubert-Arabie adjusted Rand index between two labelings of the same items.
/// 1 when both put everything in one group.
double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

}  // namespace covclust
