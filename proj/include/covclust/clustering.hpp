#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covclust/classes.hpp"
#include "covclust/sparse_matrix.hpp"
#include "covclust/transform.hpp"

namespace covclust {

struct ClusterModel {
    std::size_t l = 0;    // cluster count
    std::size_t dim = 0;  // K for feature-space models, p for the raw baseline
    std::vector<double> centroids;  // l x dim, row-major
    std::vector<std::size_t> assignments;
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> inertia_history;

    std::span<const double> centroid(std::size_t j) const {
        return {centroids.data() + j * dim, dim};
    }
    friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

struct KMeansFitOptions {
    std::uint64_t seed = 0;
    std::size_t restarts = 4;
    std::size_t max_iter = 300;
    double tol = 1e-8;
};

/// Lloyd's algorithm from k-means++ seeding, best of options.restarts by
/// inertia. Empty clusters are repaired by splitting the costliest cluster.
ClusterModel kmeans_fit(const FeatureMatrix& f, std::size_t l, const KMeansFitOptions& options);

/// Per-cluster member counts.
std::vector<std::size_t> cluster_sizes(const ClusterModel& model);
/// Distinct categories used by the members of each cluster.
std::vector<std::vector<Index>> cluster_item_sets(const ClusterModel& model,
                                                  const SparseBinaryMatrix& d);

/// M(L) with q_j = size_j / n.
double cluster_entropy_change(const ClusterModel& model);
/// Mean pairwise Jaccard of the cluster item sets. Throws UndefinedImpurity for L < 2.
double cluster_impurity(const ClusterModel& model, const SparseBinaryMatrix& d);

struct SimilarityStats {
    std::size_t l = 0;
    std::vector<double> matrix;  // l x l, zero diagonal
    double linf = 0.0;           // largest row average over the l-1 off-diagonal entries
};
SimilarityStats similarity_stats(const std::vector<std::vector<Index>>& item_sets);
SimilarityStats similarity_stats(const ClusterModel& model, const SparseBinaryMatrix& d);

/// hist[f-1] = number of categories present in exactly f item sets, f = 1..L.
std::vector<std::size_t> cooccurrence_histogram(const std::vector<std::vector<Index>>& item_sets,
                                                std::size_t n_cols);
std::vector<std::size_t> cooccurrence_histogram(const ClusterModel& model,
                                                const SparseBinaryMatrix& d);
/// cdf[c-1] = fraction of present categories found in at most c clusters.
std::vector<double> cooccurrence_cdf(const std::vector<std::size_t>& hist);

struct ClusterQuality {
    std::size_t l = 0;
    double entropy_change = 0.0;
    double impurity = 0.0;        // NaN when L < 2
    double similarity_linf = 0.0; // NaN when L < 2
    std::vector<std::size_t> cooccurrence;
    std::vector<std::size_t> cluster_sizes;
    std::vector<std::vector<Index>> cluster_item_sets;

    double max_cluster_share() const;
};

ClusterQuality cluster_quality(const ClusterModel& model, const SparseBinaryMatrix& d);

struct ClusterDiagnostic {
    std::size_t l = 0;
    double impurity = 0.0;
    double entropy_difference = 0.0;
    double similarity_linf = 0.0;
    double inertia = 0.0;
};

struct ClusterSelection {
    std::size_t l = 0;
    bool intersection_found = false;
    std::vector<ClusterDiagnostic> diagnostics;
    std::vector<ClusterModel> models;  // one per grid value
};

/// Picks L where I(L) - M(L) changes sign along the grid (the grid point with
/// the smaller |I - M| next to a sign change; the first such point on ties).
/// Without a sign change, the argmin of |I - M| and intersection_found = false.
ClusterSelection select_cluster_count(const FeatureMatrix& f, const SparseBinaryMatrix& d,
                                      const std::vector<std::size_t>& l_grid,
                                      const KMeansFitOptions& options);

/// Nearest centroid (squared Euclidean, lower index on ties).
std::size_t nearest_centroid(const ClusterModel& model, std::span<const double> x);
/// Transforms the support through the class set, then nearest_centroid.
std::size_t assign_user(const ClusterModel& model, const ClassSet& cs,
                        std::span<const Index> user_support);

inline constexpr std::string_view kModelMagic = "CVM1";

void write_model(std::ostream& out, const ClusterModel& model);
ClusterModel read_model(std::istream& in);
void save_model(const std::string& path, const ClusterModel& model);
ClusterModel load_model(const std::string& path);

void save_quality(const std::string& path, const ClusterQuality& q);
void write_cluster_diagnostics_csv(std::ostream& out, const std::vector<ClusterDiagnostic>& rows);

}  // namespace covclust
