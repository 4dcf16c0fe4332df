#include "covclust/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "json.hpp"

#include "covclust/binary_io.hpp"
#include "covclust/error.hpp"
#include "covclust/kmeans.hpp"
#include "covclust/metrics.hpp"
#include "covclust/parallel.hpp"
#include "covclust/random.hpp"

namespace covclust {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ClusterModel kmeans_fit(const FeatureMatrix& f, std::size_t l, const KMeansFitOptions& options) {
    if (l == 0 || l > f.n_rows) {
        throw ContractViolation("cluster count L = " + std::to_string(l) + " must lie in [1, " +
                                std::to_string(f.n_rows) + "]");
    }
    if (!(options.tol > 0.0)) {
        throw ContractViolation("k-means tolerance must be positive");
    }
    kmeans::Options opt;
    opt.k = l;
    opt.seed = options.seed;
    opt.restarts = options.restarts;
    opt.max_iter = options.max_iter;
    opt.tol = options.tol;
    opt.repair = kmeans::EmptyClusterRepair::split_largest_inertia;
    auto fit = kmeans::fit(kmeans::DensePoints(f.values, f.k), opt);

    ClusterModel model;
    model.l = l;
    model.dim = f.k;
    model.centroids = std::move(fit.centroids);
    model.assignments = std::move(fit.labels);
    model.inertia = fit.inertia;
    model.iterations = fit.iterations;
    model.inertia_history = std::move(fit.inertia_history);
    return model;
}

std::vector<std::size_t> cluster_sizes(const ClusterModel& model) {
    std::vector<std::size_t> sizes(model.l, 0);
    for (std::size_t a : model.assignments) {
        ++sizes.at(a);
    }
    return sizes;
}

std::vector<std::vector<Index>> cluster_item_sets(const ClusterModel& model,
                                                  const SparseBinaryMatrix& d) {
    if (model.assignments.size() != d.n_rows()) {
        throw ContractViolation("model has " + std::to_string(model.assignments.size()) +
                                " assignments but the matrix has " + std::to_string(d.n_rows()) +
                                " rows");
    }
    std::vector<std::vector<char>> present(model.l, std::vector<char>(d.n_cols(), 0));
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        auto& mark = present[model.assignments[i]];
        for (Index c : d.row(i)) {
            mark[c] = 1;
        }
    }
    std::vector<std::vector<Index>> sets(model.l);
    for (std::size_t j = 0; j < model.l; ++j) {
        for (std::size_t c = 0; c < d.n_cols(); ++c) {
            if (present[j][c]) {
                sets[j].push_back(static_cast<Index>(c));
            }
        }
    }
    return sets;
}

double cluster_entropy_change(const ClusterModel& model) {
    return entropy_difference(cluster_sizes(model));
}

double cluster_impurity(const ClusterModel& model, const SparseBinaryMatrix& d) {
    if (model.l < 2) {
        throw UndefinedImpurity("impurity needs L >= 2");
    }
    return mean_pairwise_jaccard(cluster_item_sets(model, d));
}

SimilarityStats similarity_stats(const std::vector<std::vector<Index>>& item_sets) {
    const std::size_t l = item_sets.size();
    if (l < 2) {
        throw UndefinedImpurity("similarity matrix needs L >= 2");
    }
    SimilarityStats s;
    s.l = l;
    s.matrix.assign(l * l, 0.0);
    for (std::size_t a = 0; a < l; ++a) {
        for (std::size_t b = a + 1; b < l; ++b) {
            const double j = jaccard(item_sets[a], item_sets[b]);
            s.matrix[a * l + b] = j;
            s.matrix[b * l + a] = j;
        }
    }
    for (std::size_t a = 0; a < l; ++a) {
        double row = 0.0;
        for (std::size_t b = 0; b < l; ++b) {
            row += s.matrix[a * l + b];
        }
        s.linf = std::max(s.linf, row / static_cast<double>(l - 1));
    }
    return s;
}

SimilarityStats similarity_stats(const ClusterModel& model, const SparseBinaryMatrix& d) {
    return similarity_stats(cluster_item_sets(model, d));
}

std::vector<std::size_t> cooccurrence_histogram(const std::vector<std::vector<Index>>& item_sets,
                                                std::size_t n_cols) {
    std::vector<std::size_t> in_clusters(n_cols, 0);
    for (const auto& set : item_sets) {
        for (Index c : set) {
            ++in_clusters.at(c);
        }
    }
    std::vector<std::size_t> hist(item_sets.size(), 0);
    for (std::size_t f : in_clusters) {
        if (f > 0) {
            ++hist[f - 1];
        }
    }
    return hist;
}

std::vector<std::size_t> cooccurrence_histogram(const ClusterModel& model,
                                                const SparseBinaryMatrix& d) {
    return cooccurrence_histogram(cluster_item_sets(model, d), d.n_cols());
}

std::vector<double> cooccurrence_cdf(const std::vector<std::size_t>& hist) {
    double total = 0.0;
    for (std::size_t h : hist) {
        total += static_cast<double>(h);
    }
    std::vector<double> cdf(hist.size(), 0.0);
    double run = 0.0;
    for (std::size_t f = 0; f < hist.size(); ++f) {
        run += static_cast<double>(hist[f]);
        cdf[f] = total > 0.0 ? run / total : 0.0;
    }
    return cdf;
}

double ClusterQuality::max_cluster_share() const {
    std::size_t n = 0;
    std::size_t biggest = 0;
    for (std::size_t s : cluster_sizes) {
        n += s;
        biggest = std::max(biggest, s);
    }
    return n == 0 ? 0.0 : static_cast<double>(biggest) / static_cast<double>(n);
}

ClusterQuality cluster_quality(const ClusterModel& model, const SparseBinaryMatrix& d) {
    ClusterQuality q;
    q.l = model.l;
    q.cluster_sizes = cluster_sizes(model);
    q.entropy_change = entropy_difference(q.cluster_sizes);
    q.cluster_item_sets = cluster_item_sets(model, d);
    q.cooccurrence = cooccurrence_histogram(q.cluster_item_sets, d.n_cols());
    if (model.l >= 2) {
        q.impurity = mean_pairwise_jaccard(q.cluster_item_sets);
        q.similarity_linf = similarity_stats(q.cluster_item_sets).linf;
    } else {
        q.impurity = kNaN;
        q.similarity_linf = kNaN;
    }
    return q;
}

ClusterSelection select_cluster_count(const FeatureMatrix& f, const SparseBinaryMatrix& d,
                                      const std::vector<std::size_t>& l_grid,
                                      const KMeansFitOptions& options) {
    if (l_grid.empty()) {
        throw ContractViolation("cluster grid is empty");
    }
    for (std::size_t t = 0; t < l_grid.size(); ++t) {
        if (l_grid[t] < 2 || (t > 0 && l_grid[t] <= l_grid[t - 1])) {
            throw ContractViolation("cluster grid must be strictly increasing from 2");
        }
    }
    ClusterSelection sel;
    sel.models.resize(l_grid.size());
    sel.diagnostics.resize(l_grid.size());
    parallel_for(l_grid.size(), [&](std::size_t t) {
        KMeansFitOptions o = options;
        o.seed = derive_seed(options.seed, l_grid[t]);
        sel.models[t] = kmeans_fit(f, l_grid[t], o);
        const auto sets = cluster_item_sets(sel.models[t], d);
        auto& diag = sel.diagnostics[t];
        diag.l = l_grid[t];
        diag.impurity = mean_pairwise_jaccard(sets);
        diag.entropy_difference = entropy_difference(cluster_sizes(sel.models[t]));
        diag.similarity_linf = similarity_stats(sets).linf;
        diag.inertia = sel.models[t].inertia;
    });

    std::vector<double> gap(l_grid.size());
    for (std::size_t t = 0; t < l_grid.size(); ++t) {
        gap[t] = sel.diagnostics[t].impurity - sel.diagnostics[t].entropy_difference;
    }
    std::vector<char> bracket(l_grid.size(), 0);
    for (std::size_t t = 0; t + 1 < l_grid.size(); ++t) {
        if ((gap[t] <= 0.0 && gap[t + 1] >= 0.0) || (gap[t] >= 0.0 && gap[t + 1] <= 0.0)) {
            bracket[t] = 1;
            bracket[t + 1] = 1;
        }
    }
    sel.intersection_found = std::find(bracket.begin(), bracket.end(), 1) != bracket.end();
    std::size_t best = l_grid.size();
    for (std::size_t t = 0; t < l_grid.size(); ++t) {
        if (sel.intersection_found && !bracket[t]) {
            continue;
        }
        if (best == l_grid.size() || std::abs(gap[t]) < std::abs(gap[best])) {
            best = t;
        }
    }
    sel.l = l_grid[best];
    return sel;
}

std::size_t nearest_centroid(const ClusterModel& model, std::span<const double> x) {
    if (x.size() != model.dim) {
        throw ContractViolation("point has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.dim));
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < model.l; ++j) {
        const auto c = model.centroid(j);
        double s = 0.0;
        for (std::size_t k = 0; k < model.dim; ++k) {
            s += (x[k] - c[k]) * (x[k] - c[k]);
        }
        if (s < best_d) {
            best_d = s;
            best = j;
        }
    }
    return best;
}

std::size_t assign_user(const ClusterModel& model, const ClassSet& cs,
                        std::span<const Index> user_support) {
    return nearest_centroid(model, transform_single(user_support, cs));
}

void write_model(std::ostream& out, const ClusterModel& model) {
    binary::write_magic(out, kModelMagic);
    binary::write_le<std::uint64_t>(out, model.l);
    binary::write_le<std::uint64_t>(out, model.dim);
    for (double v : model.centroids) {
        binary::write_le<double>(out, v);
    }
    for (std::size_t a : model.assignments) {
        binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a));
    }
}

ClusterModel read_model(std::istream& in) {
    binary::expect_magic(in, kModelMagic);
    ClusterModel model;
    model.l = binary::read_le<std::uint64_t>(in);
    model.dim = binary::read_le<std::uint64_t>(in);
    model.centroids.resize(model.l * model.dim);
    for (double& v : model.centroids) {
        v = binary::read_le<double>(in);
    }
    // assignments run to the end of the stream
    while (in.peek() != std::char_traits<char>::eof()) {
        const auto a = binary::read_le<std::uint32_t>(in);
        if (a >= model.l) {
            throw Error(ErrorKind::data, "cluster assignment out of range");
        }
        model.assignments.push_back(a);
    }
    return model;
}

void save_model(const std::string& path, const ClusterModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path);
    }
    write_model(out, model);
}

ClusterModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::data, "cannot read " + path);
    }
    return read_model(in);
}

namespace {

nlohmann::json maybe(double v) {
    return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

std::string fmt_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void save_quality(const std::string& path, const ClusterQuality& q) {
    nlohmann::json j;
    j["L"] = q.l;
    j["entropy_change"] = q.entropy_change;
    j["impurity"] = maybe(q.impurity);
    j["similarity_linf"] = maybe(q.similarity_linf);
    j["max_cluster_share"] = q.max_cluster_share();
    j["cluster_sizes"] = q.cluster_sizes;
    j["cooccurrence"] = q.cooccurrence;
    j["cooccurrence_cdf"] = cooccurrence_cdf(q.cooccurrence);
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path);
    }
    out << j.dump(1) << '\n';
}

void write_cluster_diagnostics_csv(std::ostream& out, const std::vector<ClusterDiagnostic>& rows) {
    out << "L,impurity,entropy_difference,similarity_linf\n";
    for (const auto& r : rows) {
        out << r.l << ',' << fmt_double(r.impurity) << ',' << fmt_double(r.entropy_difference)
            << ',' << fmt_double(r.similarity_linf) << '\n';
    }
}

}  // namespace covclust
