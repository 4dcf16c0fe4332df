#include "doctest.h"

#include <cmath>

#include "covclust/error.hpp"
#include "covclust/recommend.hpp"

using namespace covclust;

namespace {

ClusterModel one_cluster(std::size_t n) {
    ClusterModel m;
    m.l = 1;
    m.dim = 1;
    m.centroids = {0.0};
    m.assignments.assign(n, 0);
    return m;
}

FeatureMatrix line(std::vector<double> x) {
    return FeatureMatrix{x.size(), 1, std::move(x)};
}

}  // namespace

TEST_CASE("similarity vector") {
    auto two = similarity_vector(line({0.0, 2.0}), one_cluster(2), 0);
    CHECK(two.peers == std::vector<std::size_t>{1});
    CHECK(two.values == std::vector<double>{1.0});

    auto eq = similarity_vector(line({0.0, 1.0, -1.0, 1.0}), one_cluster(4), 0);
    for (double v : eq.values) {
        CHECK(v == doctest::Approx(1.0 / 3.0));
    }

    auto hand = similarity_vector(line({0.0, 1.0, 3.0}), one_cluster(3), 0);
    CHECK(hand.values[0] == doctest::Approx(0.75));
    CHECK(hand.values[1] == doctest::Approx(0.25));

    // Three peers at 1, 2, 3: raw (5, 4, 3)/6 sums to 2, rescaled to 1.
    auto three = similarity_vector(line({0.0, 1.0, 2.0, 3.0}), one_cluster(4), 0);
    CHECK(three.values[0] == doctest::Approx(5.0 / 12.0));
    CHECK(three.values[1] == doctest::Approx(4.0 / 12.0));
    CHECK(three.values[2] == doctest::Approx(3.0 / 12.0));

    auto same = similarity_vector(line({1.0, 1.0, 1.0}), one_cluster(3), 2);
    CHECK(same.values == std::vector<double>{0.5, 0.5});

    CHECK_THROWS_AS(similarity_vector(line({1.0}), one_cluster(1), 0), NoPeersError);
}

TEST_CASE("category prior") {
    SparseBinaryMatrix disjoint(3, {{0}, {2}});
    auto p = category_prior(disjoint, one_cluster(2), 0);
    CHECK(p.categories == std::vector<Index>{0, 2});
    CHECK(p.probabilities == std::vector<double>{0.5, 0.5});

    SparseBinaryMatrix d(2, {{0}, {0, 1}, {0}});
    auto q = category_prior(d, one_cluster(3), 0);
    CHECK(q.counts == std::vector<std::size_t>{3, 1});
    CHECK(q.probabilities[0] == 0.75);
    CHECK(q.probabilities[1] == 0.25);
}

TEST_CASE("scores on hand-built clusters") {
    // Anchor 0 uses {0}; its only peer uses {0, 1}.
    SparseBinaryMatrix d(3, {{0}, {0, 1}});
    auto r = score_categories(d, line({0.0, 1.0}), one_cluster(2), 0);
    REQUIRE(r.items.size() == 2);
    // p = (2/3, 1/3); the single peer has weight 1.
    CHECK(r.items[0].category == 0);
    CHECK(r.items[0].score == doctest::Approx(2.0 / 3.0));
    CHECK(r.items[0].used);
    CHECK(r.items[1].category == 1);
    CHECK(r.items[1].score == doctest::Approx(1.0 / 3.0));

    // Category 2 is used only by the anchor: no peer term.
    SparseBinaryMatrix solo(3, {{2}, {0}, {0}});
    auto s = score_categories(solo, line({0.0, 1.0, 2.0}), one_cluster(3), 0);
    for (const auto& item : s.items) {
        if (item.category == 2) {
            CHECK(item.score == 0.0);
        }
    }

    // Four members, distances 1, 2, 4 from the anchor: S = 7,
    // raw s = (6, 5, 3)/7, sum 2, so s = (6, 5, 3)/14.
    SparseBinaryMatrix four(4, {{0}, {1, 2}, {1}, {2, 3}});
    auto t = score_categories(four, line({0.0, 1.0, 2.0, 4.0}), one_cluster(4), 0);
    // counts: c0 1, c1 2, c2 2, c3 1 -> total 6
    const double s1 = 6.0 / 14.0;
    const double s2 = 5.0 / 14.0;
    const double s3 = 3.0 / 14.0;
    std::vector<double> expected{0.0, (2.0 / 6.0) * (s1 + s2), (2.0 / 6.0) * (s1 + s3),
                                 (1.0 / 6.0) * s3};
    for (const auto& item : t.items) {
        CHECK(std::abs(item.score - expected[item.category]) <= 1e-12);
    }
    CHECK(t.items[0].category == 1);
    for (std::size_t j = 1; j < t.items.size(); ++j) {
        CHECK(t.items[j - 1].score >= t.items[j].score);
    }
}

TEST_CASE("recommend truncation and exclusion") {
    SparseBinaryMatrix four(4, {{0}, {1, 2}, {1}, {2, 3}});
    auto f = line({0.0, 1.0, 2.0, 4.0});
    auto all = recommend(four, f, one_cluster(4), 0, 10, false);
    CHECK(all.items.size() == 4);
    CHECK(all.truncated);
    auto top = recommend(four, f, one_cluster(4), 0, 1, false);
    CHECK(top.items.size() == 1);
    CHECK(top.items[0].category == 1);
    CHECK_FALSE(top.truncated);
    auto fresh = recommend(four, f, one_cluster(4), 0, 10, true);
    for (const auto& item : fresh.items) {
        CHECK_FALSE(item.used);
    }

    SparseBinaryMatrix everything(2, {{0, 1}, {0}, {1}});
    auto none = recommend(everything, line({0.0, 1.0, 2.0}), one_cluster(3), 0, 5, true);
    CHECK(none.items.empty());
    CHECK(none.truncated);
}
