#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "covclust/clustering.hpp"
#include "covclust/importance.hpp"
#include "covclust/sparse_matrix.hpp"

namespace covclust {

inline constexpr const char* kToolVersion = "0.1.0";

enum class FailurePolicy { drop, abort };

struct PipelineConfig {
    std::string input;       // usage triplets (user \t item \t count)
    std::string out_dir = "covclust_out";
    std::uint64_t min_count = 1;

    std::size_t m = 0;       // training rows; required
    std::uint64_t seed = 0;
    double min_corr = 0.9;
    std::size_t max_attempts = 20;

    std::string lambda_policy = "broadcast";  // fixed | cv | broadcast
    double lambda = 0.1;
    std::vector<double> lambda_grid{1.0, 0.3, 0.1, 0.03, 0.01};
    std::size_t folds = 5;
    std::size_t probe_rows = 20;
    Link link = Link::identity;
    double lasso_tol = 1e-6;
    std::size_t lasso_max_iter = 10000;
    FailurePolicy importance_failures = FailurePolicy::drop;

    double tau = 0.5;
    std::vector<std::size_t> k_grid;
    double eps_impurity = 0.0;  // required
    double eps_entropy = 0.0;   // required
    std::size_t class_restarts = 4;

    std::vector<std::size_t> l_grid;
    std::size_t restarts = 4;
    double kmeans_tol = 1e-8;
    std::size_t kmeans_max_iter = 300;

    /// Not part of the hash: stop after this stage (empty = run everything).
    std::string stop_after;

    /// Throws ContractViolation on missing or inconsistent settings.
    void validate() const;
    /// Canonical key=value text of every setting that affects artifacts.
    std::string canonical() const;
    std::uint64_t hash() const;
};

/// Applies one key=value setting. Grids accept "a:b:step" or "a,b,c".
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);
/// Flat key=value file; '#' starts a comment.
PipelineConfig parse_config(std::istream& in, PipelineConfig base = {});
PipelineConfig load_config(const std::string& path, PipelineConfig base = {});

std::vector<std::size_t> parse_count_grid(const std::string& text);
std::vector<double> parse_value_grid(const std::string& text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::string& path);
std::string hex64(std::uint64_t v);

enum class Stage { ingest, sample, importance, classes, transform, cluster, quality };
const std::vector<Stage>& all_stages();
std::string stage_name(Stage s);
Stage parse_stage(const std::string& name);
/// Artifact files (relative to out_dir) produced by a stage.
std::vector<std::string> stage_outputs(Stage s);

struct StageRecord {
    std::string name;
    bool skipped = false;
    double seconds = 0.0;
    std::map<std::string, std::string> inputs;   // file -> hash
    std::map<std::string, std::string> outputs;  // file -> hash
};

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string config_hash;
    std::vector<StageRecord> stages;

    std::size_t recomputed() const;
};

struct PipelineHooks {
    /// level is "info" or "warn".
    std::function<void(const std::string& level, const std::string& message)> log;
};

/// Runs one stage, reusing its artifacts when the stamp matches.
StageRecord run_stage(const PipelineConfig& config, Stage stage, const PipelineHooks& hooks = {},
                      bool force = false);

/// ingest -> sample -> importance -> classes -> transform -> cluster -> quality,
/// then writes manifest.json. Stage errors are rethrown as StageError.
RunManifest run_pipeline(const PipelineConfig& config, const PipelineHooks& hooks = {});

void save_manifest(const std::string& path, const RunManifest& manifest);

struct BaselineResult {
    ClusterModel model;
    ClusterQuality quality;
};

/// k-means directly on the 0/1 rows of D.
BaselineResult baseline_kmeans_raw(const SparseBinaryMatrix& d, std::size_t l,
                                   std::uint64_t seed, std::size_t restarts);

struct DiagnosticsExport {
    std::vector<std::string> written;
    std::vector<std::string> not_ready;  // stages whose artifacts are missing
};

/// Writes class_selection.csv, cluster_selection.csv, cluster_sizes.csv and
/// cooccurrence.csv into dest from the artifacts in run_dir, skipping (and
/// listing) tables whose stage has not run.
DiagnosticsExport export_diagnostics(const std::string& run_dir, const std::string& dest);

/// One table by name ("class_selection", "cluster_selection",
/// "cluster_sizes", "cooccurrence"). Throws NotReadyError naming the stage.
std::string export_table(const std::string& run_dir, const std::string& table,
                         const std::string& dest);

}  // namespace covclust
