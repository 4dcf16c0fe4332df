#include "covclust/classes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "json.hpp"

#include "covclust/kmeans.hpp"
#include "covclust/metrics.hpp"
#include "covclust/parallel.hpp"
#include "covclust/random.hpp"

namespace covclust {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t distinct_rows(const ImportanceMatrix& w) {
    auto rows = w.w_rows;
    std::sort(rows.begin(), rows.end());
    return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

}  // namespace

double ClassSet::coverage() const {
    if (p == 0) {
        return 0.0;
    }
    std::vector<char> seen(p, 0);
    std::size_t covered = 0;
    for (const auto& c : classes) {
        for (Index k : c) {
            if (!seen[k]) {
                seen[k] = 1;
                ++covered;
            }
        }
    }
    return static_cast<double>(covered) / static_cast<double>(p);
}

RowGrouping group_importance_rows(const ImportanceMatrix& w, std::size_t k, std::uint64_t seed,
                                  std::size_t restarts) {
    if (w.w_rows.empty()) {
        throw ContractViolation("grouping needs a non-empty importance matrix");
    }
    if (k == 0 || k > w.w_rows.size()) {
        throw ContractViolation("grouping needs 1 <= K <= m (K = " + std::to_string(k) +
                                ", m = " + std::to_string(w.w_rows.size()) + ")");
    }
    RowGrouping g;
    g.requested_k = k;
    g.k = std::min(k, distinct_rows(w));

    const SparseBinaryMatrix mat = w.as_matrix();
    kmeans::Options opt;
    opt.k = g.k;
    opt.seed = seed;
    opt.restarts = restarts;
    opt.max_iter = 300;
    opt.tol = 1e-10;
    opt.repair = kmeans::EmptyClusterRepair::reseed_farthest_point;
    auto fit = kmeans::fit(kmeans::BinaryPoints(mat), opt);
    g.labels = std::move(fit.labels);
    g.within_ss = fit.inertia;
    return g;
}

ClassSet derive_classes(const RowGrouping& grouping, const ImportanceMatrix& w, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw ContractViolation("tau must lie in (0, 1]");
    }
    if (grouping.labels.size() != w.w_rows.size()) {
        throw ContractViolation("grouping does not cover the importance rows");
    }
    std::vector<std::vector<std::size_t>> members(grouping.k);
    for (std::size_t r = 0; r < grouping.labels.size(); ++r) {
        if (grouping.labels[r] >= grouping.k) {
            throw ContractViolation("group label out of range");
        }
        members[grouping.labels[r]].push_back(r);
    }

    ClassSet cs;
    cs.p = w.p;
    std::vector<std::size_t> counts(w.p);
    for (const auto& group : members) {
        if (group.empty()) {
            continue;
        }
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t r : group) {
            for (Index k : w.w_rows[r]) {
                ++counts[k];
            }
        }
        std::vector<Index> cls;
        const double size = static_cast<double>(group.size());
        for (std::size_t k = 0; k < w.p; ++k) {
            if (counts[k] > 0 && static_cast<double>(counts[k]) / size >= tau - 1e-12) {
                cls.push_back(static_cast<Index>(k));
            }
        }
        if (cls.empty()) {
            continue;
        }
        std::vector<std::size_t> subset;
        for (std::size_t r = 0; r < w.w_rows.size(); ++r) {
            const auto& row = w.w_rows[r];
            if (std::includes(row.begin(), row.end(), cls.begin(), cls.end())) {
                subset.push_back(r);
            }
        }
        const bool fallback = subset.empty();
        cs.classes.push_back(std::move(cls));
        cs.support_subsets.push_back(fallback ? group : std::move(subset));
        cs.subset_fallback.push_back(fallback);
    }
    if (cs.classes.empty()) {
        throw EmptyClassSetError("no category reaches frequency " + std::to_string(tau) +
                                 " in any group; lower tau");
    }
    return cs;
}

double class_entropy_difference(const ClassSet& cs) {
    std::vector<std::size_t> sizes;
    for (const auto& c : cs.classes) {
        sizes.push_back(c.size());
    }
    return entropy_difference(sizes);
}

double class_impurity(const ClassSet& cs) {
    return mean_pairwise_jaccard(cs.classes);
}

double class_objective(const ClassSet& cs, const ImportanceMatrix& w) {
    const std::size_t k = cs.k();
    if (cs.support_subsets.size() != k) {
        throw ContractViolation("class set has no support subsets");
    }
    const std::size_t p = w.p;
    std::vector<double> means(k * p, 0.0);
    std::vector<double> grand(p, 0.0);
    double total = 0.0;
    for (std::size_t u = 0; u < k; ++u) {
        const auto& subset = cs.support_subsets[u];
        if (subset.empty()) {
            throw ContractViolation("support subset " + std::to_string(u) + " is empty");
        }
        for (std::size_t r : subset) {
            for (Index c : w.w_rows.at(r)) {
                means[u * p + c] += 1.0;
                grand[c] += 1.0;
            }
        }
        for (std::size_t c = 0; c < p; ++c) {
            means[u * p + c] /= static_cast<double>(subset.size());
        }
        total += static_cast<double>(subset.size());
    }
    for (double& g : grand) {
        g /= total;
    }

    double between = 0.0;
    double within = 0.0;
    for (std::size_t u = 0; u < k; ++u) {
        const double* mu = means.data() + u * p;
        double mu_norm2 = 0.0;
        for (std::size_t c = 0; c < p; ++c) {
            between += (mu[c] - grand[c]) * (mu[c] - grand[c]);
            mu_norm2 += mu[c] * mu[c];
        }
        // ||x - mu||^2 = |x| - 2 sum_{c in x} mu_c + ||mu||^2 for 0/1 rows
        for (std::size_t r : cs.support_subsets[u]) {
            double d = mu_norm2;
            for (Index c : w.w_rows[r]) {
                d += 1.0 - 2.0 * mu[c];
            }
            within += std::max(d, 0.0);
        }
    }
    return between - within;
}

namespace {

struct Candidate {
    bool ok = false;
    ClassSet cs;
    ClassQuality quality;
    bool reduced = false;
    std::size_t requested = 0;
    std::string note;
};

Candidate evaluate_candidate(const ImportanceMatrix& w, std::size_t k, std::uint64_t seed,
                             double tau) {
    Candidate c;
    c.requested = k;
    const RowGrouping g = group_importance_rows(w, k, seed, 1);
    c.reduced = g.reduced();
    if (c.reduced) {
        c.note = "reduced to " + std::to_string(g.k) + " groups";
    }
    try {
        c.cs = derive_classes(g, w, tau);
    } catch (const EmptyClassSetError&) {
        c.note = "empty class set";
        return c;
    }
    c.ok = true;
    if (c.cs.k() < k && !c.reduced) {
        c.note = std::to_string(k - c.cs.k()) + " group(s) produced no class";
    }
    c.quality.entropy_difference = class_entropy_difference(c.cs);
    c.quality.impurity = c.cs.k() >= 2 ? class_impurity(c.cs) : kNaN;
    c.quality.objective = class_objective(c.cs, w);
    return c;
}

// A candidate that lost classes to tau stands for a smaller K, not this one.
bool feasible(const Candidate& c, const ClassSelectionOptions& o) {
    return c.ok && c.cs.k() == c.requested && !std::isnan(c.quality.impurity) && c.quality.impurity < o.eps_impurity &&
           c.quality.entropy_difference < o.eps_entropy;
}

}  // namespace

ClassSelection select_classes(const ImportanceMatrix& w, const ClassSelectionOptions& options) {
    const auto& grid = options.k_grid;
    const std::size_t m = w.w_rows.size();
    if (grid.empty()) {
        throw ContractViolation("class grid is empty");
    }
    for (std::size_t t = 0; t < grid.size(); ++t) {
        if (grid[t] < 2 || grid[t] > m || (t > 0 && grid[t] <= grid[t - 1])) {
            throw ContractViolation("class grid must be strictly increasing within [2, m = " +
                                    std::to_string(m) + "]");
        }
    }
    if (!(options.eps_impurity > 0.0) || !(options.eps_entropy > 0.0)) {
        throw ContractViolation("impurity and entropy bounds must be positive");
    }
    if (options.restarts == 0) {
        throw ContractViolation("restarts must be positive");
    }
    if (!(options.tau > 0.0 && options.tau <= 1.0)) {
        throw ContractViolation("tau must lie in (0, 1]");
    }

    const std::size_t r = options.restarts;
    std::vector<Candidate> cands(grid.size() * r);
    parallel_for(cands.size(), [&](std::size_t t) {
        const std::size_t k = grid[t / r];
        cands[t] = evaluate_candidate(w, k, derive_seed(options.seed, k, t % r), options.tau);
    });

    ClassSelection sel;
    std::size_t winner = cands.size();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        // Prefer feasible candidates, then the larger objective, then the earlier restart.
        std::size_t best = cands.size();
        for (std::size_t j = g * r; j < (g + 1) * r; ++j) {
            const auto& c = cands[j];
            if (!c.ok) {
                continue;
            }
            if (best == cands.size()) {
                best = j;
                continue;
            }
            const bool fb = feasible(cands[best], options);
            const bool fc = feasible(c, options);
            if ((fc && !fb) || (fc == fb && c.quality.objective > cands[best].quality.objective)) {
                best = j;
            }
        }
        ClassDiagnostic d;
        d.k = grid[g];
        if (best == cands.size()) {
            d.impurity = kNaN;
            d.entropy_difference = kNaN;
            d.objective = kNaN;
            d.note = cands[g * r].note;
        } else {
            const auto& c = cands[best];
            d.classes = c.cs.k();
            d.impurity = c.quality.impurity;
            d.entropy_difference = c.quality.entropy_difference;
            d.objective = c.quality.objective;
            d.coverage = c.cs.coverage();
            d.feasible = feasible(c, options);
            d.note = c.note;
            if (d.feasible && winner == cands.size()) {
                winner = best;
                sel.k = grid[g];
            }
        }
        sel.diagnostics.push_back(std::move(d));
    }
    if (winner == cands.size()) {
        throw InfeasibleSelection("no K on the grid has impurity < " +
                                      std::to_string(options.eps_impurity) + " and entropy difference < " +
                                      std::to_string(options.eps_entropy),
                                  sel.diagnostics);
    }
    sel.classes = std::move(cands[winner].cs);
    sel.quality = cands[winner].quality;
    return sel;
}

namespace {

std::string fmt_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json maybe(double v) {
    return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

}  // namespace

void write_class_diagnostics_csv(std::ostream& out, const std::vector<ClassDiagnostic>& rows) {
    out << "K,impurity,entropy_difference,objective\n";
    for (const auto& r : rows) {
        out << r.k << ',' << fmt_double(r.impurity) << ',' << fmt_double(r.entropy_difference)
            << ',' << fmt_double(r.objective) << '\n';
    }
}

void save_class_set(const std::string& path, const ClassSet& cs, const ClassQuality& quality) {
    nlohmann::json j;
    j["p"] = cs.p;
    j["classes"] = cs.classes;
    j["support_subsets"] = cs.support_subsets;
    std::vector<int> fb(cs.subset_fallback.begin(), cs.subset_fallback.end());
    j["subset_fallback"] = fb;
    j["coverage"] = cs.coverage();
    std::vector<double> frac;
    for (const auto& c : cs.classes) {
        frac.push_back(static_cast<double>(c.size()) / static_cast<double>(cs.p));
    }
    j["class_fraction_of_p"] = frac;
    j["quality"] = {{"entropy_difference", quality.entropy_difference},
                    {"impurity", maybe(quality.impurity)},
                    {"objective", quality.objective}};
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path);
    }
    out << j.dump(1) << '\n';
}

ClassSet load_class_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::data, "cannot read " + path);
    }
    const auto j = nlohmann::json::parse(in);
    ClassSet cs;
    cs.p = j.at("p").get<std::size_t>();
    cs.classes = j.at("classes").get<std::vector<std::vector<Index>>>();
    cs.support_subsets = j.at("support_subsets").get<std::vector<std::vector<std::size_t>>>();
    for (int f : j.at("subset_fallback").get<std::vector<int>>()) {
        cs.subset_fallback.push_back(f != 0);
    }
    for (const auto& c : cs.classes) {
        if (c.empty() || !std::is_sorted(c.begin(), c.end()) ||
            std::adjacent_find(c.begin(), c.end()) != c.end() || c.back() >= cs.p) {
            throw Error(ErrorKind::data, path + ": malformed class");
        }
    }
    return cs;
}

}  // namespace covclust
