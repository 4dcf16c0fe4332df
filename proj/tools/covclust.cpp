// covclust: staged clustering of sparse binary usage data.
//
//   covclust synth --kind planted --output usage.tsv
//   covclust run --input usage.tsv --m 400 --k-grid 2:20 --eps-impurity 0.05
//       --eps-entropy 0.5 --l-grid 5:50:5
//   covclust recommend --user u17 --top-k 10 --exclude-used

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "covclust/error.hpp"
#include "covclust/parallel.hpp"
#include "covclust/pipeline.hpp"
#include "covclust/recommend.hpp"
#include "covclust/synthetic.hpp"

namespace fs = std::filesystem;
using namespace covclust;

namespace {

// Flag values kept as text and fed through apply_setting, so the config file
// and the command line share one parser.
struct Overrides {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void add(CLI::App* app, const std::string& flag, const std::string& key,
             const std::string& help) {
        options[key] = app->add_option(flag, values[key], help);
    }

    void apply(PipelineConfig& config) const {
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) {
                apply_setting(config, key, values.at(key));
            }
        }
    }
};

void add_ingest_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--input", "input", "usage triplets: user<TAB>category<TAB>count");
    o.add(app, "--min-count", "min_count", "drop triplets with a smaller count");
}

void add_sample_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--m", "m", "number of training rows");
    o.add(app, "--min-corr", "min_corr", "required column-average correlation");
    o.add(app, "--max-attempts", "max_attempts", "sampling attempts before giving up");
}

void add_importance_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--lambda-policy", "lambda_policy", "fixed | cv | broadcast");
    o.add(app, "--lambda", "lambda", "penalty for the fixed policy");
    o.add(app, "--grid", "lambda_grid", "descending lambda grid, comma separated");
    o.add(app, "--folds", "folds", "cross-validation folds");
    o.add(app, "--probe-rows", "probe_rows", "rows cross-validated by the broadcast policy");
    o.add(app, "--link", "link", "identity | logit");
    o.add(app, "--lasso-tol", "lasso_tol", "KKT tolerance");
    o.add(app, "--lasso-max-iter", "lasso_max_iter", "coordinate descent sweep cap");
    o.add(app, "--on-failure", "importance_failures", "drop | abort");
}

void add_classes_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--k-grid", "k_grid", "a:b[:step] or a,b,c");
    o.add(app, "--eps-impurity", "eps_impurity", "impurity bound");
    o.add(app, "--eps-entropy", "eps_entropy", "entropy-difference bound");
    o.add(app, "--tau", "tau", "within-group frequency threshold");
    o.add(app, "--class-restarts", "class_restarts", "groupings tried per K");
}

void add_cluster_flags(CLI::App* app, Overrides& o) {
    o.add(app, "--l-grid", "l_grid", "a:b[:step] or a,b,c");
    o.add(app, "--restarts", "restarts", "k-means restarts");
    o.add(app, "--kmeans-tol", "kmeans_tol", "centroid shift tolerance");
    o.add(app, "--kmeans-max-iter", "kmeans_max_iter", "Lloyd iteration cap");
}

void write_json(const nlohmann::json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path);
    }
    out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"covclust: cluster users of sparse binary usage data"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(kToolVersion));

    std::string config_path;
    std::string out_dir;
    std::string seed;
    std::size_t threads = 0;
    std::string log_level = "info";
    app.add_option("--config", config_path, "key=value settings file");
    app.add_option("--out-dir", out_dir, "artifact directory");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--threads", threads, "worker threads (0 = hardware)");
    app.add_option("--log-level", log_level, "debug | info | warn | error | off")
        ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

    Overrides over;
    bool force = false;

    auto* ingest = app.add_subcommand("ingest", "parse triplets into the binary matrix");
    add_ingest_flags(ingest, over);
    auto* sample = app.add_subcommand("sample", "draw the training rows");
    add_sample_flags(sample, over);
    auto* importance = app.add_subcommand("importance", "fit the per-row lasso regressions");
    add_importance_flags(importance, over);
    auto* classes = app.add_subcommand("classes", "derive and select category classes");
    add_classes_flags(classes, over);
    auto* transform = app.add_subcommand("transform", "map users onto class features");
    auto* cluster = app.add_subcommand("cluster", "select L and cluster the features");
    add_cluster_flags(cluster, over);
    auto* quality = app.add_subcommand("quality", "quality metrics of the chosen clustering");
    const std::map<CLI::App*, Stage> stage_commands{
        {ingest, Stage::ingest},       {sample, Stage::sample},   {importance, Stage::importance},
        {classes, Stage::classes},     {transform, Stage::transform}, {cluster, Stage::cluster},
        {quality, Stage::quality}};
    for (const auto& [cmd, stage] : stage_commands) {
        cmd->add_flag("--force", force, "recompute even when the stamp matches");
    }

    auto* run = app.add_subcommand("run", "every stage in order, resuming from stamps");
    add_ingest_flags(run, over);
    add_sample_flags(run, over);
    add_importance_flags(run, over);
    add_classes_flags(run, over);
    add_cluster_flags(run, over);
    over.add(run, "--stop-after", "stop_after", "stop once this stage is done");

    std::string user;
    std::size_t top_k = 10;
    bool exclude_used = false;
    std::string rec_output;
    auto* rec = app.add_subcommand("recommend", "score categories for one user");
    rec->add_option("--user", user, "user id as it appears in the input")->required();
    rec->add_option("--top-k", top_k, "number of categories");
    rec->add_flag("--exclude-used", exclude_used, "skip categories the user already has");
    rec->add_option("-o,--output", rec_output, "write JSON here instead of stdout");

    std::size_t baseline_l = 0;
    std::size_t baseline_restarts = 4;
    std::string baseline_output;
    auto* baseline = app.add_subcommand("baseline", "k-means on the raw 0/1 rows");
    baseline->add_option("--l", baseline_l, "cluster count")->required();
    baseline->add_option("--restarts", baseline_restarts, "k-means restarts");
    baseline->add_option("-o,--output", baseline_output,
                         "quality JSON (default <out-dir>/baseline_quality.json)");

    std::string export_dest;
    std::string export_table_name;
    auto* exp = app.add_subcommand("export", "diagnostics tables as CSV");
    exp->add_option("--dest", export_dest, "directory (default <out-dir>/diagnostics)");
    exp->add_option("--table", export_table_name,
                    "class_selection | cluster_selection | cluster_sizes | cooccurrence");

    std::string synth_kind = "planted";
    std::string synth_output;
    synthetic::PlantedSpec planted;
    synthetic::HeavyTailSpec heavy;
    auto* synth = app.add_subcommand("synth", "write a synthetic triplet file");
    synth->add_option("--kind", synth_kind, "planted | heavy")
        ->check(CLI::IsMember({"planted", "heavy"}));
    synth->add_option("-o,--output", synth_output, "triplet file")->required();
    synth->add_option("--n", planted.n, "users");
    synth->add_option("--p", planted.p, "categories");
    synth->add_option("--classes", planted.classes, "planted classes / groups");
    synth->add_option("--block", planted.block, "categories per planted class");
    synth->add_option("--activation", planted.activation, "in-class usage probability");
    synth->add_option("--noise", planted.noise, "background usage probability");
    synth->add_option("--exponent", heavy.exponent, "popularity power law exponent");
    synth->add_option("--mean-items", heavy.mean_items, "mean categories per user");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto logger = spdlog::stderr_color_mt("covclust");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::from_str(log_level));

    PipelineHooks hooks;
    hooks.log = [](const std::string& level, const std::string& msg) {
        if (level == "warn") {
            spdlog::warn(msg);
        } else {
            spdlog::info(msg);
        }
    };

    try {
        set_thread_count(threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads);

        PipelineConfig config;
        if (!config_path.empty()) {
            config = load_config(config_path);
        }
        if (!out_dir.empty()) {
            config.out_dir = out_dir;
        }
        if (!seed.empty()) {
            apply_setting(config, "seed", seed);
        }
        over.apply(config);

        for (const auto& [cmd, stage] : stage_commands) {
            if (cmd->parsed()) {
                const auto rec_stage = run_stage(config, stage, hooks, force);
                spdlog::info("{} {} in {:.2f}s", rec_stage.name,
                             rec_stage.skipped ? "skipped" : "done", rec_stage.seconds);
                return 0;
            }
        }

        if (run->parsed()) {
            const auto manifest = run_pipeline(config, hooks);
            spdlog::info("{} stage(s) recomputed, config {}", manifest.recomputed(),
                         manifest.config_hash);
            return 0;
        }

        const fs::path dir(config.out_dir);
        if (rec->parsed()) {
            for (const char* f : {"users.json", "matrix.cvc", "features.cvf", "model.cvm"}) {
                if (!fs::exists(dir / f)) {
                    throw NotReadyError(f == std::string("features.cvf") ? "transform"
                                        : f == std::string("model.cvm")  ? "cluster"
                                                                          : "ingest");
                }
            }
            const auto users = load_catalog((dir / "users.json").string(), EntityKind::user);
            const auto cats = load_catalog((dir / "categories.json").string(), EntityKind::category);
            const auto idx = users.find(user);
            if (!idx) {
                throw Error(ErrorKind::data, "unknown user '" + user + "'");
            }
            const auto d = load_matrix((dir / "matrix.cvc").string());
            const auto f = load_features((dir / "features.cvf").string());
            const auto model = load_model((dir / "model.cvm").string());
            const auto r = recommend(d, f, model, *idx, top_k, exclude_used);
            nlohmann::json items = nlohmann::json::array();
            for (const auto& item : r.items) {
                items.push_back({{"id", cats.id(item.category)}, {"score", item.score},
                                 {"used", item.used}});
            }
            if (r.truncated) {
                spdlog::warn("only {} candidate categories in the user's cluster", r.items.size());
            }
            write_json({{"user", user}, {"cluster", r.cluster}, {"items", items}}, rec_output);
            return 0;
        }

        if (baseline->parsed()) {
            const auto d = load_matrix((dir / "matrix.cvc").string());
            const auto b = baseline_kmeans_raw(d, baseline_l, config.seed, baseline_restarts);
            const auto path =
                baseline_output.empty() ? (dir / "baseline_quality.json").string() : baseline_output;
            save_quality(path, b.quality);
            spdlog::info("baseline L={} largest cluster share {:.4f}, entropy change {:.4f}",
                         baseline_l, b.quality.max_cluster_share(), b.quality.entropy_change);
            return 0;
        }

        if (exp->parsed()) {
            const auto dest = export_dest.empty() ? (dir / "diagnostics").string() : export_dest;
            if (!export_table_name.empty()) {
                std::cout << export_table(config.out_dir, export_table_name, dest) << '\n';
                return 0;
            }
            const auto r = export_diagnostics(config.out_dir, dest);
            for (const auto& w : r.written) {
                std::cout << w << '\n';
            }
            for (const auto& s : r.not_ready) {
                spdlog::warn("stage '{}' has not run; its tables were skipped", s);
            }
            return r.written.empty() ? exit_code(ErrorKind::data) : 0;
        }

        if (synth->parsed()) {
            synthetic::PlantedData data;
            if (!seed.empty()) {
                planted.seed = heavy.seed = config.seed;
            }
            if (synth_kind == "planted") {
                data = synthetic::planted_blocks(planted);
            } else {
                heavy.n = planted.n;
                heavy.p = planted.p;
                heavy.groups = planted.classes;
                data = synthetic::heavy_tailed(heavy);
            }
            std::vector<std::string> uids;
            std::vector<std::string> cids;
            for (std::size_t i = 0; i < data.matrix.n_rows(); ++i) {
                uids.push_back("u" + std::to_string(i));
            }
            for (std::size_t k = 0; k < data.matrix.n_cols(); ++k) {
                cids.push_back("c" + std::to_string(k));
            }
            std::ofstream out(synth_output);
            if (!out) {
                throw Error(ErrorKind::data, "cannot write " + synth_output);
            }
            write_triplets(out, data.matrix, EntityCatalog(EntityKind::user, uids),
                           EntityCatalog(EntityKind::category, cids));
            spdlog::info("wrote {} users, {} usage records", data.matrix.n_rows(),
                         data.matrix.nnz());
            return 0;
        }
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
