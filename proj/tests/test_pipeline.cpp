#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "covclust/error.hpp"
#include "covclust/pipeline.hpp"
#include "covclust/synthetic.hpp"
#include "support.hpp"

using namespace covclust;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_planted(const std::string& path) {
    synthetic::PlantedSpec spec;
    spec.n = 300;
    spec.p = 100;
    spec.classes = 5;
    spec.block = 20;
    spec.seed = 4;
    auto data = synthetic::planted_blocks(spec);
    std::vector<std::string> u;
    std::vector<std::string> c;
    for (std::size_t i = 0; i < spec.n; ++i) {
        u.push_back("user" + std::to_string(i));
    }
    for (std::size_t k = 0; k < spec.p; ++k) {
        c.push_back("item" + std::to_string(k));
    }
    std::ofstream out(path);
    write_triplets(out, data.matrix, EntityCatalog(EntityKind::user, u),
                   EntityCatalog(EntityKind::category, c));
}

PipelineConfig small_config(const testing::TempDir& tmp, const std::string& run) {
    std::istringstream text(
        "# small planted run\n"
        "m = 120\n"
        "seed = 5\n"
        "min_corr = 0.3\n"
        "lambda_policy = fixed\n"
        "lambda = 3\n"
        "link = logit\n"
        "k_grid = 2:8\n"
        "eps_impurity = 1\n"
        "eps_entropy = 1\n"
        "l_grid = 2,3,4,6\n"
        "restarts = 2\n");
    auto c = parse_config(text);
    c.input = tmp.file("usage.tsv");
    c.out_dir = tmp.file(run);
    return c;
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") {
            out[e.path().filename().string()] = slurp(e.path());
        }
    }
    return out;
}

}  // namespace

TEST_CASE("config parsing") {
    std::istringstream text("m=10 # trailing\n\nk_grid = 2:10:4\nl_grid=5,7\nlink=logit\n");
    auto c = parse_config(text);
    CHECK(c.m == 10);
    CHECK(c.k_grid == std::vector<std::size_t>{2, 6, 10});
    CHECK(c.l_grid == std::vector<std::size_t>{5, 7});
    CHECK(c.link == Link::logit);

    std::istringstream unknown("colour = red\n");
    CHECK_THROWS_AS(parse_config(unknown), ContractViolation);
    std::istringstream junk("m = ten\n");
    CHECK_THROWS_AS(parse_config(junk), ContractViolation);
    std::istringstream noeq("m 10\n");
    CHECK_THROWS_AS(parse_config(noeq), ContractViolation);
    CHECK(parse_value_grid("1, 0.1,0.01") == std::vector<double>{1.0, 0.1, 0.01});
}

TEST_CASE("config validation") {
    PipelineConfig c;
    c.input = "x";
    c.m = 10;
    c.k_grid = {2, 4};
    c.l_grid = {3};
    c.eps_impurity = 0.1;
    c.eps_entropy = 0.1;
    CHECK_NOTHROW(c.validate());
    auto bad = c;
    bad.k_grid = {4, 2};
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    bad = c;
    bad.eps_entropy = 0.0;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    bad = c;
    bad.lasso_tol = 0.0;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    bad = c;
    bad.l_grid.clear();
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("config hash tracks artifact settings only") {
    PipelineConfig a;
    a.m = 10;
    auto b = a;
    b.stop_after = "classes";
    b.out_dir = "elsewhere";
    CHECK(a.hash() == b.hash());
    b.tau = 0.6;
    CHECK(a.hash() != b.hash());
}

TEST_CASE("fnv-1a reference values") {
    CHECK(fnv1a("", 0) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a", 1) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar", 6) == 0x85944171f73967e8ULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("stage names") {
    for (Stage s : all_stages()) {
        CHECK(parse_stage(stage_name(s)) == s);
        CHECK_FALSE(stage_outputs(s).empty());
    }
    CHECK_THROWS_AS(parse_stage("nope"), ContractViolation);
}

TEST_CASE("end-to-end run, rerun and export") {
    testing::TempDir tmp("pipeline");
    write_planted(tmp.file("usage.tsv"));
    auto config = small_config(tmp, "run");

    std::vector<std::string> warnings;
    PipelineHooks hooks;
    hooks.log = [&](const std::string& level, const std::string& msg) {
        if (level == "warn") {
            warnings.push_back(msg);
        }
    };
    auto first = run_pipeline(config, hooks);
    CHECK(first.stages.size() == 7);
    CHECK(first.recomputed() == 7);
    CHECK(fs::exists(tmp.file("run/manifest.json")));
    for (Stage s : all_stages()) {
        for (const auto& f : stage_outputs(s)) {
            CHECK(fs::exists(fs::path(config.out_dir) / f));
        }
    }

    auto second = run_pipeline(config, hooks);
    CHECK(second.recomputed() == 0);
    CHECK(second.config_hash == first.config_hash);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(second.stages[i].outputs == first.stages[i].outputs);
    }

    // A tampered artifact is detected and rebuilt.
    {
        std::ofstream out(tmp.file("run/quality.json"));
        out << "{}";
    }
    auto third = run_pipeline(config, hooks);
    CHECK(third.recomputed() == 1);
    CHECK(third.stages.back().outputs == first.stages.back().outputs);

    auto exp = export_diagnostics(config.out_dir, tmp.file("csv"));
    CHECK(exp.written.size() == 4);
    CHECK(exp.not_ready.empty());
    auto header = [&](const std::string& name) {
        std::ifstream in(tmp.file("csv/" + name));
        std::string line;
        std::getline(in, line);
        return line;
    };
    CHECK(header("class_selection.csv") == "K,impurity,entropy_difference,objective");
    CHECK(header("cluster_selection.csv") == "L,impurity,entropy_difference,similarity_linf");
    CHECK(header("cluster_sizes.csv") == "cluster,size");
    CHECK(header("cooccurrence.csv") == "f,count");
}

TEST_CASE("stopped run exports only what exists, then resumes identically") {
    testing::TempDir tmp("resume");
    write_planted(tmp.file("usage.tsv"));
    auto full = small_config(tmp, "full");
    run_pipeline(full);

    auto part = small_config(tmp, "part");
    part.stop_after = "classes";
    auto m = run_pipeline(part);
    CHECK(m.stages.size() == 4);
    CHECK_FALSE(fs::exists(tmp.file("part/manifest.json")));

    auto exp = export_diagnostics(part.out_dir, tmp.file("csv"));
    CHECK(exp.written.size() == 1);
    CHECK(exp.not_ready == std::vector<std::string>{"cluster", "quality"});
    CHECK_THROWS_AS(export_table(part.out_dir, "cooccurrence", tmp.file("csv")), NotReadyError);

    part.stop_after.clear();
    auto resumed = run_pipeline(part);
    CHECK(resumed.recomputed() == 3);
    CHECK(artifacts(part.out_dir) == artifacts(full.out_dir));
}

TEST_CASE("stage errors name the stage") {
    testing::TempDir tmp("errors");
    write_planted(tmp.file("usage.tsv"));
    auto c = small_config(tmp, "big_m");
    c.m = 5000;
    try {
        run_pipeline(c);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "sample");
        CHECK(e.kind() == ErrorKind::data);
    }
    CHECK(fs::exists(tmp.file("big_m/matrix.cvc")));

    auto missing = small_config(tmp, "nothing");
    CHECK_THROWS_AS(run_stage(missing, Stage::transform), NotReadyError);
}

TEST_CASE("raw baseline") {
    Rng rng(61);
    auto d = testing::random_matrix(rng, 50, 20, 0.2);
    auto one = baseline_kmeans_raw(d, 1, 1, 1);
    CHECK(one.quality.cluster_sizes == std::vector<std::size_t>{50});
    CHECK(one.quality.max_cluster_share() == 1.0);
    auto five = baseline_kmeans_raw(d, 5, 1, 2);
    CHECK(five.model.dim == 20);
    CHECK(five.quality.cluster_sizes.size() == 5);
    CHECK_THROWS_AS(baseline_kmeans_raw(d, 51, 1, 1), ContractViolation);
}
