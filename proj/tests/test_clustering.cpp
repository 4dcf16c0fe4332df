#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "covclust/clustering.hpp"
#include "covclust/error.hpp"
#include "covclust/metrics.hpp"
#include "covclust/parallel.hpp"
#include "support.hpp"

using namespace covclust;

namespace {

FeatureMatrix blobs(Rng& rng, std::size_t per_blob, std::vector<std::size_t>& labels) {
    FeatureMatrix f{2 * per_blob, 2, {}};
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            const double c = b == 0 ? 0.1 : 0.9;
            f.values.push_back(c + 0.05 * (rng.uniform() - 0.5));
            f.values.push_back(c + 0.05 * (rng.uniform() - 0.5));
            labels.push_back(b);
        }
    }
    return f;
}

ClusterModel model_from(std::vector<std::size_t> assignments, std::size_t l) {
    ClusterModel m;
    m.l = l;
    m.dim = 1;
    m.centroids.assign(l, 0.0);
    m.assignments = std::move(assignments);
    return m;
}

double inertia_oracle(const FeatureMatrix& f, const ClusterModel& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.n_rows; ++i) {
        for (std::size_t u = 0; u < f.k; ++u) {
            const double d = f(i, u) - m.centroids[m.assignments[i] * m.dim + u];
            s += d * d;
        }
    }
    return s;
}

}  // namespace

TEST_CASE("one cluster per point") {
    Rng rng(51);
    FeatureMatrix f{6, 2, {}};
    for (int i = 0; i < 12; ++i) {
        f.values.push_back(rng.uniform());
    }
    auto m = kmeans_fit(f, 6, {1, 2, 300, 1e-10});
    CHECK(m.inertia == doctest::Approx(0.0));
    CHECK(std::set<std::size_t>(m.assignments.begin(), m.assignments.end()).size() == 6);
}

TEST_CASE("single cluster is the grand mean") {
    FeatureMatrix f{4, 1, {1.0, 2.0, 3.0, 6.0}};
    auto m = kmeans_fit(f, 1, {});
    CHECK(m.centroids[0] == doctest::Approx(3.0));
    CHECK(m.inertia == doctest::Approx(4.0 + 1.0 + 0.0 + 9.0));
}

TEST_CASE("two blobs are separated and inertia is exact") {
    Rng rng(52);
    std::vector<std::size_t> truth;
    auto f = blobs(rng, 40, truth);
    auto m = kmeans_fit(f, 2, {3, 4, 300, 1e-10});
    CHECK(adjusted_rand_index(m.assignments, truth) == doctest::Approx(1.0));
    CHECK(m.inertia == doctest::Approx(inertia_oracle(f, m)).epsilon(1e-9));
    for (std::size_t t = 1; t < m.inertia_history.size(); ++t) {
        CHECK(m.inertia_history[t] <= m.inertia_history[t - 1] + 1e-12);
    }
}

TEST_CASE("every cluster keeps a member") {
    // Duplicated points make empty clusters likely without repair.
    FeatureMatrix f{10, 1, {0, 0, 0, 0, 0, 0, 1, 1, 5, 9}};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto m = kmeans_fit(f, 4, {seed, 2, 300, 1e-10});
        auto sizes = cluster_sizes(m);
        CHECK(std::count(sizes.begin(), sizes.end(), 0u) == 0);
    }
    CHECK_THROWS_AS(kmeans_fit(f, 11, {}), ContractViolation);
    CHECK_THROWS_AS(kmeans_fit(f, 0, {}), ContractViolation);
}

TEST_CASE("fit is independent of the thread count") {
    Rng rng(53);
    std::vector<std::size_t> truth;
    auto f = blobs(rng, 50, truth);
    set_thread_count(1);
    auto a = kmeans_fit(f, 5, {7, 3, 300, 1e-10});
    set_thread_count(3);
    auto b = kmeans_fit(f, 5, {7, 3, 300, 1e-10});
    set_thread_count(1);
    CHECK(a == b);
}

TEST_CASE("cluster entropy change") {
    CHECK(cluster_entropy_change(model_from({0, 1, 2, 0, 1, 2}, 3)) == 0.0);
    std::vector<std::size_t> a(100, 0);
    std::fill(a.begin() + 90, a.end(), 1);
    CHECK(std::abs(cluster_entropy_change(model_from(a, 2)) - 0.368) <= 0.001);
    CHECK(cluster_entropy_change(model_from({0, 0, 0}, 1)) == 0.0);
}

TEST_CASE("impurity and similarity on hand-built clusters") {
    SparseBinaryMatrix d(5, {{1}, {2}, {2, 3}, {0}, {4}});
    auto two = model_from({0, 0, 1, 1, 1}, 2);
    // E1 = {1,2}, E2 = {0,2,3,4}
    CHECK(cluster_impurity(two, d) == doctest::Approx(1.0 / 5.0));
    SparseBinaryMatrix pair(4, {{1, 2}, {2, 3}});
    CHECK(cluster_impurity(model_from({0, 1}, 2), pair) == 1.0 / 3.0);

    SparseBinaryMatrix disjoint(6, {{0}, {1, 2}, {3, 4, 5}});
    auto m3 = model_from({0, 1, 2}, 3);
    CHECK(cluster_impurity(m3, disjoint) == 0.0);
    auto s = similarity_stats(m3, disjoint);
    CHECK(s.linf == 0.0);
    CHECK(std::all_of(s.matrix.begin(), s.matrix.end(), [](double v) { return v == 0.0; }));

    SparseBinaryMatrix same(3, {{0, 2}, {0, 2}, {0, 2}});
    auto s3 = similarity_stats(m3, same);
    CHECK(s3.linf == 1.0);
    CHECK(s3.matrix[0] == 0.0);
    CHECK(s3.matrix[1] == 1.0);
    CHECK_THROWS_AS(cluster_impurity(model_from({0, 0, 0}, 1), same), UndefinedImpurity);
}

TEST_CASE("cluster metrics against brute force") {
    Rng rng(54);
    for (int trial = 0; trial < 10; ++trial) {
        auto d = testing::random_matrix(rng, 40, 20, 0.15);
        std::vector<std::size_t> a(40);
        for (std::size_t i = 0; i < 40; ++i) {
            a[i] = i < 4 ? i : rng.index(4);
        }
        auto m = model_from(a, 4);

        // Item sets and Jaccard from the dense matrix.
        std::vector<std::vector<bool>> used(4, std::vector<bool>(20, false));
        for (std::size_t i = 0; i < 40; ++i) {
            for (Index k = 0; k < 20; ++k) {
                if (d.contains(i, k)) {
                    used[a[i]][k] = true;
                }
            }
        }
        auto jac = [&](std::size_t x, std::size_t y) {
            double inter = 0;
            double uni = 0;
            for (std::size_t k = 0; k < 20; ++k) {
                inter += used[x][k] && used[y][k];
                uni += used[x][k] || used[y][k];
            }
            return uni == 0 ? 0.0 : inter / uni;
        };
        double sum = 0.0;
        std::vector<double> row(4, 0.0);
        for (std::size_t x = 0; x < 4; ++x) {
            for (std::size_t y = 0; y < 4; ++y) {
                if (x != y) {
                    row[x] += jac(x, y) / 3.0;
                    sum += x < y ? jac(x, y) : 0.0;
                }
            }
        }
        CHECK(std::abs(cluster_impurity(m, d) - sum / 6.0) <= 1e-12);
        CHECK(std::abs(similarity_stats(m, d).linf - *std::max_element(row.begin(), row.end())) <= 1e-12);

        std::vector<std::size_t> hist(4, 0);
        std::size_t present = 0;
        for (std::size_t k = 0; k < 20; ++k) {
            std::size_t f = 0;
            for (std::size_t x = 0; x < 4; ++x) {
                f += used[x][k];
            }
            if (f > 0) {
                ++hist[f - 1];
                ++present;
            }
        }
        const auto h = cooccurrence_histogram(m, d);
        CHECK(h == hist);
        std::size_t total = 0;
        for (auto c : h) {
            total += c;
        }
        CHECK(total == present);
        const auto cdf = cooccurrence_cdf(h);
        CHECK(cdf.back() == doctest::Approx(1.0));
    }
}

TEST_CASE("cooccurrence edge cases") {
    SparseBinaryMatrix d(4, {{0}, {1}, {2, 3}});
    CHECK(cooccurrence_histogram(model_from({0, 1, 2}, 3), d) == std::vector<std::size_t>{4, 0, 0});
    SparseBinaryMatrix shared(3, {{0, 1}, {0}, {0, 2}});
    CHECK(cooccurrence_histogram(model_from({0, 1, 2}, 3), shared) ==
          std::vector<std::size_t>{2, 0, 1});
}

TEST_CASE("L selection at the crossing") {
    Rng rng(55);
    std::vector<std::size_t> truth;
    auto f = blobs(rng, 30, truth);
    Rng r2(56);
    auto d = testing::random_matrix(r2, 60, 30, 0.1);
    const std::vector<std::size_t> grid{2, 3, 4, 6, 8, 12, 20, 30};
    auto sel = select_cluster_count(f, d, grid, {1, 2, 300, 1e-10});
    REQUIRE(sel.diagnostics.size() == grid.size());

    std::vector<double> gap;
    for (const auto& dg : sel.diagnostics) {
        gap.push_back(dg.impurity - dg.entropy_difference);
    }
    // Grid points on either side of a sign change; the closest to zero wins.
    std::vector<std::size_t> candidates;
    for (std::size_t t = 0; t + 1 < gap.size(); ++t) {
        if ((gap[t] <= 0) != (gap[t + 1] <= 0) || gap[t] == 0 || gap[t + 1] == 0) {
            candidates.push_back(t);
            candidates.push_back(t + 1);
        }
    }
    REQUIRE_FALSE(candidates.empty());
    CHECK(sel.intersection_found);
    std::size_t best = candidates[0];
    for (auto t : candidates) {
        if (std::abs(gap[t]) < std::abs(gap[best]) ||
            (std::abs(gap[t]) == std::abs(gap[best]) && t < best)) {
            best = t;
        }
    }
    CHECK(sel.l == grid[best]);
    CHECK(sel.models[best].l == sel.l);

    auto one = select_cluster_count(f, d, {5}, {1, 2, 300, 1e-10});
    CHECK(one.l == 5);
    CHECK_FALSE(one.intersection_found);
    CHECK_THROWS_AS(select_cluster_count(f, d, {5, 3}, {}), ContractViolation);
}

TEST_CASE("assignment of new users") {
    ClusterModel m;
    m.l = 2;
    m.dim = 2;
    m.centroids = {0.2, 0.2, 1.0, 1.0};
    m.assignments = {0, 1};
    ClassSet cs{6, {{0, 1, 2}, {3, 4, 5}}, {}, {}};
    CHECK(assign_user(m, cs, {}) == 0);
    const std::vector<Index> full{0, 1, 2, 3, 4, 5};
    CHECK(assign_user(m, cs, full) == 1);
    const std::vector<double> tie{0.6, 0.6};
    CHECK(nearest_centroid(m, tie) == 0);
}

TEST_CASE("training rows map back to their own cluster") {
    Rng rng(57);
    std::vector<std::size_t> truth;
    auto f = blobs(rng, 25, truth);
    auto m = kmeans_fit(f, 3, {2, 2, 300, 1e-12});
    for (std::size_t i = 0; i < f.n_rows; ++i) {
        CHECK(nearest_centroid(m, f.row(i)) == m.assignments[i]);
    }
}

TEST_CASE("model persistence and csv") {
    Rng rng(58);
    std::vector<std::size_t> truth;
    auto f = blobs(rng, 10, truth);
    auto m = kmeans_fit(f, 2, {});
    std::stringstream s;
    write_model(s, m);
    auto back = read_model(s);
    CHECK(back.l == m.l);
    CHECK(back.dim == m.dim);
    CHECK(back.centroids == m.centroids);
    CHECK(back.assignments == m.assignments);

    std::ostringstream csv;
    write_cluster_diagnostics_csv(csv, {{5, 0.1, 0.2, 0.3, 1.0}});
    CHECK(csv.str().rfind("L,impurity,entropy_difference,similarity_linf\n", 0) == 0);
}
