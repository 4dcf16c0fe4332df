#include "covclust/recommend.hpp"

#include <algorithm>
#include <cmath>

#include "covclust/error.hpp"

namespace covclust {

namespace {

void check_user(const FeatureMatrix& f, const ClusterModel& model, std::size_t i) {
    if (model.assignments.size() != f.n_rows) {
        throw ContractViolation("model and feature matrix disagree on the number of users");
    }
    if (i >= f.n_rows) {
        throw ContractViolation("user index " + std::to_string(i) + " out of range");
    }
}

}  // namespace

SimilarityVector similarity_vector(const FeatureMatrix& f, const ClusterModel& model,
                                   std::size_t i) {
    check_user(f, model, i);
    SimilarityVector s;
    s.anchor = i;
    const std::size_t cluster = model.assignments[i];
    std::vector<double> dist;
    for (std::size_t j = 0; j < f.n_rows; ++j) {
        if (j == i || model.assignments[j] != cluster) {
            continue;
        }
        double sq = 0.0;
        for (std::size_t u = 0; u < f.k; ++u) {
            const double diff = f(i, u) - f(j, u);
            sq += diff * diff;
        }
        s.peers.push_back(j);
        dist.push_back(std::sqrt(sq));
    }
    if (s.peers.empty()) {
        throw NoPeersError("user " + std::to_string(i) + " is alone in cluster " +
                           std::to_string(cluster));
    }
    double total = 0.0;
    for (double v : dist) {
        total += v;
    }
    s.values.resize(dist.size());
    double raw_total = 0.0;
    if (total > 0.0) {
        for (std::size_t t = 0; t < dist.size(); ++t) {
            s.values[t] = (total - dist[t]) / total;
            raw_total += s.values[t];
        }
    }
    if (raw_total > 0.0) {
        for (double& v : s.values) {
            v /= raw_total;
        }
    } else {
        std::fill(s.values.begin(), s.values.end(), 1.0 / static_cast<double>(dist.size()));
    }
    return s;
}

CategoryPrior category_prior(const SparseBinaryMatrix& d, const ClusterModel& model,
                             std::size_t cluster) {
    if (model.assignments.size() != d.n_rows()) {
        throw ContractViolation("model and matrix disagree on the number of users");
    }
    if (cluster >= model.l) {
        throw ContractViolation("cluster index out of range");
    }
    std::vector<std::size_t> freq(d.n_cols(), 0);
    bool any_member = false;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        if (model.assignments[i] != cluster) {
            continue;
        }
        any_member = true;
        for (Index c : d.row(i)) {
            ++freq[c];
        }
    }
    if (!any_member) {
        throw ContractViolation("cluster " + std::to_string(cluster) + " is empty");
    }
    CategoryPrior prior;
    double total = 0.0;
    for (std::size_t c = 0; c < freq.size(); ++c) {
        if (freq[c] > 0) {
            prior.categories.push_back(static_cast<Index>(c));
            prior.counts.push_back(freq[c]);
            total += static_cast<double>(freq[c]);
        }
    }
    for (std::size_t n : prior.counts) {
        prior.probabilities.push_back(static_cast<double>(n) / total);
    }
    return prior;
}

RecommendationList score_categories(const SparseBinaryMatrix& d, const FeatureMatrix& f,
                                    const ClusterModel& model, std::size_t i) {
    check_user(f, model, i);
    if (d.n_rows() != f.n_rows) {
        throw ContractViolation("matrix and feature matrix disagree on the number of users");
    }
    const auto sim = similarity_vector(f, model, i);
    const std::size_t cluster = model.assignments[i];
    const auto prior = category_prior(d, model, cluster);

    std::vector<double> weight(d.n_cols(), 0.0);
    for (std::size_t t = 0; t < sim.peers.size(); ++t) {
        for (Index c : d.row(sim.peers[t])) {
            weight[c] += sim.values[t];
        }
    }
    RecommendationList list;
    list.anchor = i;
    list.cluster = cluster;
    for (std::size_t t = 0; t < prior.categories.size(); ++t) {
        const Index c = prior.categories[t];
        list.items.push_back({c, prior.probabilities[t] * weight[c], d.contains(i, c)});
    }
    std::stable_sort(list.items.begin(), list.items.end(),
                     [](const ScoredCategory& a, const ScoredCategory& b) {
                         if (a.score != b.score) {
                             return a.score > b.score;
                         }
                         return a.category < b.category;
                     });
    return list;
}

Recommendation recommend(const SparseBinaryMatrix& d, const FeatureMatrix& f,
                         const ClusterModel& model, std::size_t i, std::size_t top_k,
                         bool exclude_used) {
    if (top_k == 0) {
        throw ContractViolation("top_k must be positive");
    }
    auto list = score_categories(d, f, model, i);
    Recommendation rec;
    rec.user = i;
    rec.cluster = list.cluster;
    for (const auto& item : list.items) {
        if (exclude_used && item.used) {
            continue;
        }
        if (rec.items.size() == top_k) {
            break;
        }
        rec.items.push_back(item);
    }
    rec.truncated = rec.items.size() < top_k;
    return rec;
}

}  // namespace covclust
