#include "doctest.h"

#include <sstream>

#include "covclust/error.hpp"
#include "covclust/sparse_matrix.hpp"
#include "support.hpp"

using namespace covclust;

namespace {

std::vector<Index> row_of(const SparseBinaryMatrix& d, std::size_t i) {
    auto r = d.row(i);
    return {r.begin(), r.end()};
}

}  // namespace

TEST_CASE("ingest: two users, two songs") {
    std::vector<Triplet> t{{"u1", "s1", 3}, {"u1", "s2", 1}, {"u2", "s1", 5}};
    auto res = ingest_triplets(t, 1);
    CHECK(res.matrix.n_rows() == 2);
    CHECK(res.matrix.n_cols() == 2);
    CHECK(row_of(res.matrix, 0) == std::vector<Index>{0, 1});
    CHECK(row_of(res.matrix, 1) == std::vector<Index>{0});
    CHECK(res.users.id(1) == "u2");
    CHECK(res.categories.id(1) == "s2");
}

TEST_CASE("ingest: repeated records aggregate before the threshold") {
    std::vector<Triplet> t{{"u1", "s1", 1}, {"u1", "s1", 1}};
    auto res = ingest_triplets(t, 2);
    CHECK(res.matrix.nnz() == 1);
    CHECK(res.matrix.contains(0, 0));
}

TEST_CASE("ingest: zero count keeps the entities but sets nothing") {
    std::vector<Triplet> t{{"u1", "s1", 0}};
    auto res = ingest_triplets(t, 1);
    CHECK(res.matrix.n_rows() == 1);
    CHECK(res.matrix.n_cols() == 1);
    CHECK(res.matrix.nnz() == 0);
}

TEST_CASE("ingest: text input and parse errors") {
    std::istringstream ok("u1\ts1\t2\nu2\ts2\t1\n");
    auto res = ingest_triplets(ok, 1);
    CHECK(res.matrix.nnz() == 2);

    std::istringstream bad("u1\ts1\tlots\n");
    CHECK_THROWS_AS(ingest_triplets(bad, 1), ParseError);

    std::istringstream empty("");
    CHECK_THROWS_AS(ingest_triplets(empty, 1), EmptyInputError);
}

TEST_CASE("construction rejects unsorted or out-of-range rows") {
    CHECK_THROWS_AS(SparseBinaryMatrix(3, {{1, 0}}), ContractViolation);
    CHECK_THROWS_AS(SparseBinaryMatrix(3, {{0, 0}}), ContractViolation);
    CHECK_THROWS_AS(SparseBinaryMatrix(3, {{3}}), ContractViolation);
}

TEST_CASE("hamming distance") {
    const std::vector<Index> a{0, 2};
    const std::vector<Index> b{0, 1};
    CHECK(hamming_distance({a, 4}, {b, 4}) == doctest::Approx(0.5));
    CHECK(hamming_distance({a, 4}, {a, 4}) == 0.0);
    const std::vector<Index> none;
    const std::vector<Index> all{0, 1, 2};
    CHECK(hamming_distance({none, 3}, {all, 3}) == 1.0);
}

TEST_CASE("sparsity report") {
    SparseBinaryMatrix d(3, {{0}, {0, 1}});
    auto r = sparsity_report(d);
    CHECK(r.row_sums == std::vector<std::size_t>{1, 2});
    CHECK(r.col_sums == std::vector<std::size_t>{2, 1, 0});
    CHECK(r.linf_D == 2);
    CHECK(r.linf_Dt == 2);
    CHECK(r.density == doctest::Approx(0.5));

    auto z = sparsity_report(SparseBinaryMatrix(3, {{}, {}, {}}));
    CHECK(z.nnz == 0);
    CHECK(z.density == 0.0);

    auto f = sparsity_report(SparseBinaryMatrix(2, {{0, 1}, {0, 1}}));
    CHECK(f.row_sums == std::vector<std::size_t>{2, 2});
    CHECK(f.density == 1.0);
}

TEST_CASE("density identity and hamming against a dense oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.index(30);
        const std::size_t p = 1 + rng.index(25);
        auto d = testing::random_matrix(rng, n, p, rng.uniform());
        auto r = sparsity_report(d);
        std::size_t total = 0;
        for (auto s : r.row_sums) {
            total += s;
        }
        CHECK(r.density * static_cast<double>(n * p) == doctest::Approx(static_cast<double>(total)));
        const auto i = rng.index(n);
        const auto j = rng.index(n);
        std::size_t mismatch = 0;
        for (Index k = 0; k < p; ++k) {
            mismatch += d.contains(i, k) != d.contains(j, k);
        }
        CHECK(hamming_distance(d.row_view(i), d.row_view(j)) ==
              doctest::Approx(static_cast<double>(mismatch) / static_cast<double>(p)));
    }
}

TEST_CASE("column index mirrors the rows") {
    Rng rng(5);
    auto d = testing::random_matrix(rng, 40, 15, 0.2);
    ColumnIndex ci(d);
    for (std::size_t k = 0; k < 15; ++k) {
        auto col = ci.col(k);
        CHECK(col.size() == d.col_sums()[k]);
        for (Index i : col) {
            CHECK(d.contains(i, static_cast<Index>(k)));
        }
    }
}

TEST_CASE("catalog is a dense bijection") {
    EntityCatalog c(EntityKind::user);
    CHECK(c.intern("b") == 0);
    CHECK(c.intern("a") == 1);
    CHECK(c.intern("b") == 0);
    CHECK(c.find("a") == Index{1});
    CHECK_FALSE(c.find("zz").has_value());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(*c.find(c.id(i)) == i);
    }
}

TEST_CASE("binary matrix and catalog round trip") {
    testing::TempDir tmp("sparse");
    Rng rng(3);
    auto d = testing::random_matrix(rng, 25, 12, 0.3);
    save_matrix(tmp.file("m.cvc"), d);
    CHECK(load_matrix(tmp.file("m.cvc")) == d);
    save_matrix(tmp.file("w.cvw"), d, kImportanceMagic);
    CHECK(load_matrix(tmp.file("w.cvw"), kImportanceMagic) == d);
    CHECK_THROWS(load_matrix(tmp.file("w.cvw")));

    EntityCatalog c(EntityKind::category, {"x", "y", "z"});
    save_catalog(tmp.file("c.json"), c);
    CHECK(load_catalog(tmp.file("c.json"), EntityKind::category).ids() == c.ids());
}

TEST_CASE("triplet writer round trips through ingest") {
    Rng rng(8);
    auto d = testing::random_matrix(rng, 10, 6, 0.5);
    EntityCatalog users(EntityKind::user, {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
    EntityCatalog cats(EntityKind::category, {"0", "1", "2", "3", "4", "5"});
    std::stringstream s;
    write_triplets(s, d, users, cats);
    auto back = ingest_triplets(s, 1);
    for (std::size_t i = 0; i < back.matrix.n_rows(); ++i) {
        const auto orig = *users.find(back.users.id(i));
        for (Index k : back.matrix.row(i)) {
            CHECK(d.contains(orig, *cats.find(back.categories.id(k))));
        }
        CHECK(back.matrix.row_popcount(i) == d.row_popcount(orig));
    }
}
