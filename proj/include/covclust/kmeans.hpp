#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "covclust/error.hpp"
#include "covclust/random.hpp"
#include "covclust/sparse_matrix.hpp"

// Lloyd's k-means with k-means++ seeding, shared by the class grouping of
// W-hat rows (sparse 0/1 points) and the clustering of the feature matrix
// (dense points).
namespace covclust::kmeans {

/// Dense row-major points.
class DensePoints {
public:
    DensePoints(std::span<const double> values, std::size_t dim)
        : values_(values), dim_(dim), n_(dim == 0 ? 0 : values.size() / dim) {}

    std::size_t size() const { return n_; }
    std::size_t dim() const { return dim_; }

    double sqdist(std::size_t i, std::span<const double> c, double /*c_norm2*/) const {
        const double* x = values_.data() + i * dim_;
        double s = 0.0;
        for (std::size_t k = 0; k < dim_; ++k) {
            const double d = x[k] - c[k];
            s += d * d;
        }
        return s;
    }
    void accumulate(std::size_t i, std::span<double> sum) const {
        const double* x = values_.data() + i * dim_;
        for (std::size_t k = 0; k < dim_; ++k) {
            sum[k] += x[k];
        }
    }

private:
    std::span<const double> values_;
    std::size_t dim_;
    std::size_t n_;
};

/// Rows of a binary matrix viewed as 0/1 vectors in R^p.
class BinaryPoints {
public:
    explicit BinaryPoints(const SparseBinaryMatrix& m) : m_(m) {}

    std::size_t size() const { return m_.n_rows(); }
    std::size_t dim() const { return m_.n_cols(); }

    double sqdist(std::size_t i, std::span<const double> c, double c_norm2) const {
        double s = c_norm2;
        for (Index k : m_.row(i)) {
            s += 1.0 - 2.0 * c[k];
        }
        return std::max(s, 0.0);
    }
    void accumulate(std::size_t i, std::span<double> sum) const {
        for (Index k : m_.row(i)) {
            sum[k] += 1.0;
        }
    }

private:
    const SparseBinaryMatrix& m_;
};

enum class EmptyClusterRepair {
    reseed_farthest_point,   // move the point farthest from its centroid
    split_largest_inertia,   // move the farthest member of the costliest cluster
};

struct Options {
    std::size_t k = 1;
    std::uint64_t seed = 0;
    std::size_t restarts = 1;
    std::size_t max_iter = 300;
    double tol = 1e-8;
    EmptyClusterRepair repair = EmptyClusterRepair::split_largest_inertia;
};

struct Fit {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> centroids;  // k x dim, row-major
    std::vector<std::size_t> labels;
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> inertia_history;  // after each centroid update
};

namespace detail {

inline double norm2(std::span<const double> c) {
    double s = 0.0;
    for (double v : c) {
        s += v * v;
    }
    return s;
}

template <class Points>
class Run {
public:
    Run(const Points& points, const Options& options, std::uint64_t seed)
        : pts_(points), opt_(options), rng_(seed), k_(options.k), dim_(points.dim()),
          centroids_(k_ * dim_, 0.0), norms_(k_, 0.0), labels_(points.size(), 0) {}

    Fit operator()() {
        seed_centroids();
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            labels_[i] = nearest(i);
        }
        Fit fit;
        std::size_t iter = 0;
        while (iter < opt_.max_iter) {
            const double shift = update();
            fit.inertia_history.push_back(inertia());
            ++iter;
            const std::size_t changed = reassign();
            if (changed == 0 || shift < opt_.tol) {
                break;
            }
        }
        for (std::size_t guard = 0; guard < k_ && repair_empty(); ++guard) {
        }
        fit.k = k_;
        fit.dim = dim_;
        fit.centroids = centroids_;
        fit.labels = labels_;
        fit.inertia = inertia();
        fit.iterations = iter;
        return fit;
    }

private:
    std::span<double> centroid(std::size_t c) { return {centroids_.data() + c * dim_, dim_}; }
    std::span<const double> centroid(std::size_t c) const {
        return {centroids_.data() + c * dim_, dim_};
    }
    double dist(std::size_t i, std::size_t c) const { return pts_.sqdist(i, centroid(c), norms_[c]); }

    void set_to_point(std::size_t c, std::size_t i) {
        auto dst = centroid(c);
        std::fill(dst.begin(), dst.end(), 0.0);
        pts_.accumulate(i, dst);
        norms_[c] = norm2(dst);
    }

    void seed_centroids() {
        const std::size_t n = pts_.size();
        std::vector<char> taken(n, 0);
        std::size_t first = rng_.index(n);
        set_to_point(0, first);
        taken[first] = 1;
        std::vector<double> d2(n);
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = dist(i, 0);
        }
        for (std::size_t c = 1; c < k_; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                total += taken[i] ? 0.0 : d2[i];
            }
            std::size_t pick = n;
            if (total > 0.0) {
                const double target = rng_.uniform() * total;
                double cum = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (taken[i] || d2[i] <= 0.0) {
                        continue;
                    }
                    cum += d2[i];
                    pick = i;
                    if (cum > target) {
                        break;
                    }
                }
            }
            if (pick == n) {  // every remaining point coincides with a centre
                for (std::size_t i = 0; i < n; ++i) {
                    if (!taken[i]) {
                        pick = i;
                        break;
                    }
                }
            }
            set_to_point(c, pick);
            taken[pick] = 1;
            for (std::size_t i = 0; i < n; ++i) {
                d2[i] = std::min(d2[i], dist(i, c));
            }
        }
    }

    std::size_t nearest(std::size_t i) const {
        std::size_t best = 0;
        double best_d = dist(i, 0);
        for (std::size_t c = 1; c < k_; ++c) {
            const double d = dist(i, c);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }

    std::size_t reassign() {
        std::size_t changed = 0;
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            const std::size_t c = nearest(i);
            if (c != labels_[i] && dist(i, c) < dist(i, labels_[i])) {
                labels_[i] = c;
                ++changed;
            }
        }
        return changed;
    }

    // Moves one point into each empty cluster. Returns true if anything moved.
    bool repair_empty() {
        std::vector<std::size_t> counts(k_, 0);
        for (std::size_t l : labels_) {
            ++counts[l];
        }
        bool moved = false;
        for (std::size_t c = 0; c < k_; ++c) {
            if (counts[c] > 0) {
                continue;
            }
            std::size_t donor_cluster = k_;
            if (opt_.repair == EmptyClusterRepair::split_largest_inertia) {
                std::vector<double> cost(k_, 0.0);
                for (std::size_t i = 0; i < pts_.size(); ++i) {
                    cost[labels_[i]] += dist(i, labels_[i]);
                }
                double worst = -1.0;
                for (std::size_t q = 0; q < k_; ++q) {
                    if (counts[q] >= 2 && cost[q] > worst) {
                        worst = cost[q];
                        donor_cluster = q;
                    }
                }
            }
            std::size_t donor = pts_.size();
            double far = -1.0;
            for (std::size_t i = 0; i < pts_.size(); ++i) {
                const std::size_t q = labels_[i];
                if (counts[q] < 2 || (donor_cluster != k_ && q != donor_cluster)) {
                    continue;
                }
                const double d = dist(i, q);
                if (d > far) {
                    far = d;
                    donor = i;
                }
            }
            if (donor == pts_.size()) {
                continue;
            }
            --counts[labels_[donor]];
            labels_[donor] = c;
            counts[c] = 1;
            set_to_point(c, donor);
            moved = true;
        }
        return moved;
    }

    // Recomputes centroids as member means after repairing empty clusters.
    // Returns the largest centroid displacement.
    double update() {
        repair_empty();
        std::vector<double> sums(k_ * dim_, 0.0);
        std::vector<std::size_t> counts(k_, 0);
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            pts_.accumulate(i, std::span<double>(sums.data() + labels_[i] * dim_, dim_));
            ++counts[labels_[i]];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k_; ++c) {
            if (counts[c] == 0) {
                continue;
            }
            auto dst = centroid(c);
            double moved = 0.0;
            for (std::size_t k = 0; k < dim_; ++k) {
                const double v = sums[c * dim_ + k] / static_cast<double>(counts[c]);
                moved += (v - dst[k]) * (v - dst[k]);
                dst[k] = v;
            }
            norms_[c] = norm2(dst);
            shift = std::max(shift, std::sqrt(moved));
        }
        return shift;
    }

    double inertia() const {
        double s = 0.0;
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            s += dist(i, labels_[i]);
        }
        return s;
    }

    const Points& pts_;
    const Options& opt_;
    Rng rng_;
    std::size_t k_;
    std::size_t dim_;
    std::vector<double> centroids_;
    std::vector<double> norms_;
    std::vector<std::size_t> labels_;
};

}  // namespace detail

/// Best of options.restarts seeded runs by inertia (earliest run wins ties).
template <class Points>
Fit fit(const Points& points, const Options& options) {
    if (options.k == 0 || options.k > points.size()) {
        throw ContractViolation("k-means needs 1 <= k <= number of points (k = " +
                                std::to_string(options.k) + ", n = " +
                                std::to_string(points.size()) + ")");
    }
    if (options.restarts == 0 || options.max_iter == 0) {
        throw ContractViolation("k-means restarts and max_iter must be positive");
    }
    Fit best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < options.restarts; ++r) {
        detail::Run<Points> run(points, options, derive_seed(options.seed, r));
        Fit candidate = run();
        if (candidate.inertia < best.inertia) {
            best = std::move(candidate);
        }
    }
    return best;
}

}  // namespace covclust::kmeans
