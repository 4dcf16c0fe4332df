#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "covclust/clustering.hpp"
#include "covclust/sparse_matrix.hpp"
#include "covclust/transform.hpp"

namespace covclust {

/// Weights over the other members of user i's cluster, summing to 1.
struct SimilarityVector {
    std::size_t anchor = 0;
    std::vector<std::size_t> peers;  // ascending user index
    std::vector<double> values;
};

/// s_ij = (S - d_ij) / S with S = sum_j d_ij over the peers and d the
/// Euclidean distance in feature space, rescaled to sum to 1. Uniform when
/// every distance is zero or there is a single peer.
SimilarityVector similarity_vector(const FeatureMatrix& f, const ClusterModel& model,
                                   std::size_t i);

/// Frequencies of the categories used inside one cluster, as probabilities.
struct CategoryPrior {
    std::vector<Index> categories;    // ascending, each used by >= 1 member
    std::vector<std::size_t> counts;  // members using the category
    std::vector<double> probabilities;
};

CategoryPrior category_prior(const SparseBinaryMatrix& d, const ClusterModel& model,
                             std::size_t cluster);

struct ScoredCategory {
    Index category = 0;
    double score = 0.0;
    bool used = false;  // already used by the anchor
};

struct RecommendationList {
    std::size_t anchor = 0;
    std::size_t cluster = 0;
    std::vector<ScoredCategory> items;  // score descending, then category ascending
};

/// score(j) = p_j * sum over peers k using j of s_ik, for every category of
/// the cluster.
RecommendationList score_categories(const SparseBinaryMatrix& d, const FeatureMatrix& f,
                                    const ClusterModel& model, std::size_t i);

struct Recommendation {
    std::size_t user = 0;
    std::size_t cluster = 0;
    std::vector<ScoredCategory> items;
    bool truncated = false;  // fewer than top_k candidates were available
};

Recommendation recommend(const SparseBinaryMatrix& d, const FeatureMatrix& f,
                         const ClusterModel& model, std::size_t i, std::size_t top_k,
                         bool exclude_used);

}  // namespace covclust
