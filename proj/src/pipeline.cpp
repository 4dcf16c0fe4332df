#include "covclust/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "covclust/classes.hpp"
#include "covclust/error.hpp"
#include "covclust/kmeans.hpp"
#include "covclust/random.hpp"
#include "covclust/sampler.hpp"
#include "covclust/transform.hpp"

namespace fs = std::filesystem;

namespace covclust {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const auto t = trim(text);
    if constexpr (std::is_floating_point_v<T>) {
        try {
            std::size_t used = 0;
            v = static_cast<T>(std::stod(t, &used));
            if (used != t.size()) {
                throw std::invalid_argument(t);
            }
        } catch (const std::exception&) {
            throw ContractViolation("setting '" + key + "': not a number: '" + text + "'");
        }
    } else {
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
            throw ContractViolation("setting '" + key + "': not a non-negative integer: '" +
                                    text + "'");
        }
    }
    return v;
}

std::string brief(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        out.push_back(trim(cur));
    }
    return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) {
            s += ',';
        }
        if constexpr (std::is_floating_point_v<T>) {
            s += num(v[i]);
        } else {
            s += std::to_string(v[i]);
        }
    }
    return s;
}

}  // namespace

std::vector<std::size_t> parse_count_grid(const std::string& text) {
    std::vector<std::size_t> grid;
    if (text.find(':') != std::string::npos) {
        const auto parts = split(text, ':');
        if (parts.size() < 2 || parts.size() > 3) {
            throw ContractViolation("grid '" + text + "' must look like a:b or a:b:step");
        }
        const auto a = parse_number<std::size_t>("grid", parts[0]);
        const auto b = parse_number<std::size_t>("grid", parts[1]);
        const auto step = parts.size() == 3 ? parse_number<std::size_t>("grid", parts[2]) : 1;
        if (step == 0 || b < a) {
            throw ContractViolation("grid '" + text + "' is empty or has a zero step");
        }
        for (std::size_t v = a; v <= b; v += step) {
            grid.push_back(v);
        }
    } else {
        for (const auto& part : split(text, ',')) {
            grid.push_back(parse_number<std::size_t>("grid", part));
        }
    }
    return grid;
}

std::vector<double> parse_value_grid(const std::string& text) {
    std::vector<double> grid;
    for (const auto& part : split(text, ',')) {
        grid.push_back(parse_number<double>("grid", part));
    }
    return grid;
}

void apply_setting(PipelineConfig& c, const std::string& raw_key, const std::string& value) {
    std::string key = trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string v = trim(value);
    if (key == "input") {
        c.input = v;
    } else if (key == "out_dir") {
        c.out_dir = v;
    } else if (key == "min_count") {
        c.min_count = parse_number<std::uint64_t>(key, v);
    } else if (key == "m") {
        c.m = parse_number<std::size_t>(key, v);
    } else if (key == "seed") {
        c.seed = parse_number<std::uint64_t>(key, v);
    } else if (key == "min_corr") {
        c.min_corr = parse_number<double>(key, v);
    } else if (key == "max_attempts") {
        c.max_attempts = parse_number<std::size_t>(key, v);
    } else if (key == "lambda_policy") {
        if (v != "fixed" && v != "cv" && v != "broadcast") {
            throw ContractViolation("lambda_policy must be fixed, cv or broadcast");
        }
        c.lambda_policy = v;
    } else if (key == "lambda") {
        c.lambda = parse_number<double>(key, v);
    } else if (key == "lambda_grid" || key == "grid") {
        c.lambda_grid = parse_value_grid(v);
    } else if (key == "folds") {
        c.folds = parse_number<std::size_t>(key, v);
    } else if (key == "probe_rows") {
        c.probe_rows = parse_number<std::size_t>(key, v);
    } else if (key == "link") {
        if (v == "identity") {
            c.link = Link::identity;
        } else if (v == "logit") {
            c.link = Link::logit;
        } else {
            throw ContractViolation("link must be identity or logit");
        }
    } else if (key == "lasso_tol") {
        c.lasso_tol = parse_number<double>(key, v);
    } else if (key == "lasso_max_iter") {
        c.lasso_max_iter = parse_number<std::size_t>(key, v);
    } else if (key == "importance_failures") {
        if (v == "drop") {
            c.importance_failures = FailurePolicy::drop;
        } else if (v == "abort") {
            c.importance_failures = FailurePolicy::abort;
        } else {
            throw ContractViolation("importance_failures must be drop or abort");
        }
    } else if (key == "tau") {
        c.tau = parse_number<double>(key, v);
    } else if (key == "k_grid") {
        c.k_grid = parse_count_grid(v);
    } else if (key == "eps_impurity" || key == "eps1") {
        c.eps_impurity = parse_number<double>(key, v);
    } else if (key == "eps_entropy" || key == "eps2") {
        c.eps_entropy = parse_number<double>(key, v);
    } else if (key == "class_restarts") {
        c.class_restarts = parse_number<std::size_t>(key, v);
    } else if (key == "l_grid") {
        c.l_grid = parse_count_grid(v);
    } else if (key == "restarts") {
        c.restarts = parse_number<std::size_t>(key, v);
    } else if (key == "kmeans_tol") {
        c.kmeans_tol = parse_number<double>(key, v);
    } else if (key == "kmeans_max_iter") {
        c.kmeans_max_iter = parse_number<std::size_t>(key, v);
    } else if (key == "stop_after") {
        if (!v.empty()) {
            parse_stage(v);
        }
        c.stop_after = v;
    } else {
        throw ContractViolation("unknown setting '" + key + "'");
    }
}

PipelineConfig parse_config(std::istream& in, PipelineConfig base) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        if (trim(line).empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ContractViolation("config line " + std::to_string(lineno) + ": expected key=value");
        }
        apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

PipelineConfig load_config(const std::string& path, PipelineConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw ContractViolation("cannot read config file " + path);
    }
    return parse_config(in, std::move(base));
}

namespace {

bool ascending(const std::vector<std::size_t>& g) {
    for (std::size_t i = 1; i < g.size(); ++i) {
        if (g[i] <= g[i - 1]) {
            return false;
        }
    }
    return true;
}

// Settings that shape each stage's artifacts, in canonical text form.
std::string stage_settings(const PipelineConfig& c, Stage s) {
    std::string t;
    auto put = [&](const std::string& k, const std::string& v) { t += k + "=" + v + "\n"; };
    switch (s) {
    case Stage::ingest:
        put("min_count", std::to_string(c.min_count));
        break;
    case Stage::sample:
        put("m", std::to_string(c.m));
        put("seed", std::to_string(c.seed));
        put("min_corr", num(c.min_corr));
        put("max_attempts", std::to_string(c.max_attempts));
        break;
    case Stage::importance:
        put("seed", std::to_string(c.seed));
        put("lambda_policy", c.lambda_policy);
        if (c.lambda_policy == "fixed") {
            put("lambda", num(c.lambda));
        } else {
            put("lambda_grid", join(c.lambda_grid));
            put("folds", std::to_string(c.folds));
            if (c.lambda_policy == "broadcast") {
                put("probe_rows", std::to_string(c.probe_rows));
            }
        }
        put("link", c.link == Link::identity ? "identity" : "logit");
        put("lasso_tol", num(c.lasso_tol));
        put("lasso_max_iter", std::to_string(c.lasso_max_iter));
        put("importance_failures", c.importance_failures == FailurePolicy::drop ? "drop" : "abort");
        break;
    case Stage::classes:
        put("seed", std::to_string(c.seed));
        put("tau", num(c.tau));
        put("k_grid", join(c.k_grid));
        put("eps_impurity", num(c.eps_impurity));
        put("eps_entropy", num(c.eps_entropy));
        put("class_restarts", std::to_string(c.class_restarts));
        break;
    case Stage::transform:
        break;
    case Stage::cluster:
        put("seed", std::to_string(c.seed));
        put("l_grid", join(c.l_grid));
        put("restarts", std::to_string(c.restarts));
        put("kmeans_tol", num(c.kmeans_tol));
        put("kmeans_max_iter", std::to_string(c.kmeans_max_iter));
        break;
    case Stage::quality:
        break;
    }
    return t;
}

}  // namespace

void PipelineConfig::validate() const {
    if (input.empty()) {
        throw ContractViolation("input path is required");
    }
    if (m == 0) {
        throw ContractViolation("m (training rows) is required");
    }
    if (min_count == 0) {
        throw ContractViolation("min_count must be at least 1");
    }
    if (k_grid.empty() || !ascending(k_grid)) {
        throw ContractViolation("k_grid must be non-empty and strictly increasing");
    }
    if (l_grid.empty() || !ascending(l_grid)) {
        throw ContractViolation("l_grid must be non-empty and strictly increasing");
    }
    if (!(eps_impurity > 0.0) || !(eps_entropy > 0.0)) {
        throw ContractViolation("eps_impurity and eps_entropy are required and must be positive");
    }
    if (!(lasso_tol > 0.0) || !(kmeans_tol > 0.0)) {
        throw ContractViolation("tolerances must be positive");
    }
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw ContractViolation("tau must lie in (0, 1]");
    }
    if (lambda_policy == "fixed" && !(lambda > 0.0)) {
        throw ContractViolation("lambda must be positive");
    }
    if (lambda_policy != "fixed" && lambda_grid.empty()) {
        throw ContractViolation("lambda_grid is empty");
    }
    if (restarts == 0 || class_restarts == 0) {
        throw ContractViolation("restarts must be positive");
    }
}

std::string PipelineConfig::canonical() const {
    std::string t;
    for (Stage s : all_stages()) {
        t += "[" + stage_name(s) + "]\n" + stage_settings(*this, s);
    }
    return t;
}

std::uint64_t PipelineConfig::hash() const {
    const auto t = canonical();
    return fnv1a(t.data(), t.size());
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::data, "cannot read " + path);
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages{Stage::ingest,    Stage::sample,  Stage::importance,
                                           Stage::classes,   Stage::transform, Stage::cluster,
                                           Stage::quality};
    return stages;
}

std::string stage_name(Stage s) {
    switch (s) {
    case Stage::ingest:
        return "ingest";
    case Stage::sample:
        return "sample";
    case Stage::importance:
        return "importance";
    case Stage::classes:
        return "classes";
    case Stage::transform:
        return "transform";
    case Stage::cluster:
        return "cluster";
    case Stage::quality:
        return "quality";
    }
    return "?";
}

Stage parse_stage(const std::string& name) {
    for (Stage s : all_stages()) {
        if (stage_name(s) == name) {
            return s;
        }
    }
    throw ContractViolation("unknown stage '" + name + "'");
}

std::vector<std::string> stage_outputs(Stage s) {
    switch (s) {
    case Stage::ingest:
        return {"matrix.cvc", "users.json", "categories.json"};
    case Stage::sample:
        return {"sample.json"};
    case Stage::importance:
        return {"importance.cvw", "importance_fits.json"};
    case Stage::classes:
        return {"classes.json", "class_selection.csv"};
    case Stage::transform:
        return {"features.cvf"};
    case Stage::cluster:
        return {"model.cvm", "cluster_selection.csv", "cluster_selection.json"};
    case Stage::quality:
        return {"quality.json"};
    }
    return {};
}

namespace {

std::vector<std::string> stage_inputs(Stage s) {
    switch (s) {
    case Stage::ingest:
        return {};
    case Stage::sample:
        return {"matrix.cvc"};
    case Stage::importance:
        return {"matrix.cvc", "sample.json"};
    case Stage::classes:
        return {"importance.cvw"};
    case Stage::transform:
        return {"matrix.cvc", "classes.json"};
    case Stage::cluster:
        return {"matrix.cvc", "features.cvf"};
    case Stage::quality:
        return {"matrix.cvc", "model.cvm"};
    }
    return {};
}

Stage producer_of(const std::string& file) {
    for (Stage s : all_stages()) {
        const auto outs = stage_outputs(s);
        if (std::find(outs.begin(), outs.end(), file) != outs.end()) {
            return s;
        }
    }
    throw ContractViolation("no stage produces " + file);
}

void log(const PipelineHooks& hooks, const std::string& level, const std::string& msg) {
    if (hooks.log) {
        hooks.log(level, msg);
    }
}

template <class Fn>
void write_text(const fs::path& path, Fn&& body) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path.string());
    }
    body(out);
}

void execute(const PipelineConfig& c, Stage stage, const PipelineHooks& hooks) {
    const fs::path dir(c.out_dir);
    auto at = [&](const char* f) { return (dir / f).string(); };

    switch (stage) {
    case Stage::ingest: {
        std::ifstream in(c.input);
        if (!in) {
            throw Error(ErrorKind::data, "cannot read input " + c.input);
        }
        const auto res = ingest_triplets(in, c.min_count);
        save_matrix(at("matrix.cvc"), res.matrix);
        save_catalog(at("users.json"), res.users);
        save_catalog(at("categories.json"), res.categories);
        const auto rep = sparsity_report(res.matrix);
        log(hooks, "info",
            "ingested " + std::to_string(res.matrix.n_rows()) + " users x " +
                std::to_string(res.matrix.n_cols()) + " categories, density " + brief(rep.density));
        break;
    }
    case Stage::sample: {
        const auto d = load_matrix(at("matrix.cvc"));
        SamplerOptions so;
        so.min_corr = c.min_corr;
        so.max_attempts = c.max_attempts;
        const auto plan = sample_training_rows(d, c.m, c.seed, so);
        save_sample_plan(at("sample.json"), plan);
        log(hooks, "info",
            "sampled " + std::to_string(plan.m) + " rows, column-average correlation " +
                brief(plan.col_avg_correlation) + " after " + std::to_string(plan.attempts) +
                " attempt(s)");
        break;
    }
    case Stage::importance: {
        const auto d = load_matrix(at("matrix.cvc"));
        const auto plan = load_sample_plan(at("sample.json"));
        const auto dstar = d.select_rows(plan.row_ids);
        ImportanceOptions o;
        if (c.lambda_policy == "fixed") {
            o.policy = FixedLambda{c.lambda};
        } else if (c.lambda_policy == "cv") {
            o.policy = PerRowCrossValidated{c.lambda_grid, c.folds};
        } else {
            o.policy = BroadcastCrossValidated{c.lambda_grid, c.folds, c.probe_rows};
        }
        o.link = c.link;
        o.tol = c.lasso_tol;
        o.max_iter = c.lasso_max_iter;
        o.seed = derive_seed(c.seed, 0x696d70ULL);
        const auto res = estimate_importance(dstar, o);
        if (!res.complete()) {
            const std::string msg = std::to_string(res.failed.size()) + " of " +
                                    std::to_string(dstar.n_rows()) + " importance rows failed";
            if (c.importance_failures == FailurePolicy::abort) {
                throw Error(ErrorKind::numerical, msg);
            }
            log(hooks, "warn", msg + "; dropping them");
        }
        const auto [w, kept] = res.drop_failed();
        save_matrix(at("importance.cvw"), w.as_matrix(), kImportanceMagic);
        nlohmann::json j;
        j["kept_rows"] = kept;
        nlohmann::json fits = nlohmann::json::array();
        for (const auto& f : res.fits) {
            nlohmann::json r{{"row", f.row}, {"d_row", plan.row_ids[f.row]}, {"lambda", f.lambda},
                             {"kkt_violation", f.kkt_violation}, {"iterations", f.iterations},
                             {"failed", f.failed}};
            if (f.failed) {
                r["failure"] = f.failure;
            }
            fits.push_back(std::move(r));
        }
        j["fits"] = std::move(fits);
        write_text(dir / "importance_fits.json", [&](std::ostream& out) { out << j.dump(1) << '\n'; });
        break;
    }
    case Stage::classes: {
        const auto wm = load_matrix(at("importance.cvw"), kImportanceMagic);
        ImportanceMatrix w;
        w.m = wm.n_rows();
        w.p = wm.n_cols();
        w.w_rows = wm.to_row_sets();
        ClassSelectionOptions o;
        o.k_grid = c.k_grid;
        o.eps_impurity = c.eps_impurity;
        o.eps_entropy = c.eps_entropy;
        o.tau = c.tau;
        o.seed = derive_seed(c.seed, 0x636c73ULL);
        o.restarts = c.class_restarts;
        ClassSelection sel;
        try {
            sel = select_classes(w, o);
        } catch (const InfeasibleSelection& e) {
            write_text(dir / "class_selection.csv",
                       [&](std::ostream& out) { write_class_diagnostics_csv(out, e.diagnostics()); });
            throw;
        }
        for (const auto& d : sel.diagnostics) {
            if (!d.note.empty()) {
                log(hooks, "warn", "K=" + std::to_string(d.k) + ": " + d.note);
            }
        }
        const double cov = sel.classes.coverage();
        if (cov < 0.5) {
            log(hooks, "warn",
                "classes cover only " + brief(cov) + " of the categories; the rest are ignored by the transform");
        }
        save_class_set(at("classes.json"), sel.classes, sel.quality);
        write_text(dir / "class_selection.csv",
                   [&](std::ostream& out) { write_class_diagnostics_csv(out, sel.diagnostics); });
        log(hooks, "info", "selected K=" + std::to_string(sel.k) + " (" +
                               std::to_string(sel.classes.k()) + " classes)");
        break;
    }
    case Stage::transform: {
        const auto d = load_matrix(at("matrix.cvc"));
        const auto cs = load_class_set(at("classes.json"));
        save_features(at("features.cvf"), transform(d, cs));
        break;
    }
    case Stage::cluster: {
        const auto d = load_matrix(at("matrix.cvc"));
        const auto f = load_features(at("features.cvf"));
        KMeansFitOptions o;
        o.seed = derive_seed(c.seed, 0x6b6dULL);
        o.restarts = c.restarts;
        o.max_iter = c.kmeans_max_iter;
        o.tol = c.kmeans_tol;
        auto grid = c.l_grid;
        grid.erase(std::remove_if(grid.begin(), grid.end(),
                                  [&](std::size_t l) { return l > f.n_rows; }),
                   grid.end());
        if (grid.size() != c.l_grid.size()) {
            log(hooks, "warn", "dropped L values larger than the number of users");
        }
        const auto sel = select_cluster_count(f, d, grid, o);
        if (!sel.intersection_found) {
            log(hooks, "warn", "I(L) and M(L) do not cross on the grid; using the closest point");
        }
        const auto pos = static_cast<std::size_t>(
            std::find(grid.begin(), grid.end(), sel.l) - grid.begin());
        save_model(at("model.cvm"), sel.models[pos]);
        write_text(dir / "cluster_selection.csv",
                   [&](std::ostream& out) { write_cluster_diagnostics_csv(out, sel.diagnostics); });
        nlohmann::json j{{"L", sel.l}, {"intersection_found", sel.intersection_found}};
        write_text(dir / "cluster_selection.json", [&](std::ostream& out) { out << j.dump(1) << '\n'; });
        log(hooks, "info", "selected L=" + std::to_string(sel.l));
        break;
    }
    case Stage::quality: {
        const auto d = load_matrix(at("matrix.cvc"));
        const auto model = load_model(at("model.cvm"));
        const auto q = cluster_quality(model, d);
        save_quality(at("quality.json"), q);
        log(hooks, "info",
            "L=" + std::to_string(q.l) + " entropy change " + brief(q.entropy_change) +
                ", impurity " + brief(q.impurity) + ", largest cluster share " +
                brief(q.max_cluster_share()));
        break;
    }
    }
}

std::string stage_key(const PipelineConfig& c, Stage s, const std::map<std::string, std::string>& inputs) {
    std::string t = std::string(kToolVersion) + "\n" + stage_name(s) + "\n" + stage_settings(c, s);
    for (const auto& [file, h] : inputs) {
        t += file + "=" + h + "\n";
    }
    return hex64(fnv1a(t.data(), t.size()));
}

fs::path stamp_path(const PipelineConfig& c, Stage s) {
    return fs::path(c.out_dir) / ".stamps" / (stage_name(s) + ".json");
}

bool stamp_matches(const PipelineConfig& c, Stage s, const std::string& key,
                   std::map<std::string, std::string>& outputs) {
    const auto path = stamp_path(c, s);
    if (!fs::exists(path)) {
        return false;
    }
    nlohmann::json j;
    try {
        std::ifstream in(path);
        j = nlohmann::json::parse(in);
    } catch (const std::exception&) {
        return false;
    }
    if (j.value("key", "") != key) {
        return false;
    }
    for (const auto& file : stage_outputs(s)) {
        const auto p = fs::path(c.out_dir) / file;
        if (!fs::exists(p) || !j["outputs"].contains(file)) {
            return false;
        }
        const auto h = hex64(hash_file(p.string()));
        if (j["outputs"][file] != h) {
            return false;
        }
        outputs[file] = h;
    }
    return true;
}

}  // namespace

StageRecord run_stage(const PipelineConfig& c, Stage stage, const PipelineHooks& hooks, bool force) {
    StageRecord rec;
    rec.name = stage_name(stage);
    const fs::path dir(c.out_dir);
    fs::create_directories(dir / ".stamps");

    if (stage == Stage::ingest) {
        rec.inputs["input"] = hex64(hash_file(c.input));
    }
    for (const auto& file : stage_inputs(stage)) {
        const auto p = dir / file;
        if (!fs::exists(p)) {
            throw NotReadyError(stage_name(producer_of(file)));
        }
        rec.inputs[file] = hex64(hash_file(p.string()));
    }
    const auto key = stage_key(c, stage, rec.inputs);

    if (!force && stamp_matches(c, stage, key, rec.outputs)) {
        rec.skipped = true;
        log(hooks, "info", rec.name + ": up to date");
        return rec;
    }

    // Drop the stamp first so an interrupted stage is never mistaken for done.
    fs::remove(stamp_path(c, stage));
    const auto t0 = std::chrono::steady_clock::now();
    execute(c, stage, hooks);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json stamp;
    stamp["key"] = key;
    stamp["outputs"] = nlohmann::json::object();
    for (const auto& file : stage_outputs(stage)) {
        const auto h = hex64(hash_file((dir / file).string()));
        rec.outputs[file] = h;
        stamp["outputs"][file] = h;
    }
    write_text(stamp_path(c, stage), [&](std::ostream& out) { out << stamp.dump(1) << '\n'; });
    return rec;
}

std::size_t RunManifest::recomputed() const {
    return static_cast<std::size_t>(std::count_if(
        stages.begin(), stages.end(), [](const StageRecord& s) { return !s.skipped; }));
}

void save_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::json j;
    j["tool_version"] = manifest.tool_version;
    j["config_hash"] = manifest.config_hash;
    j["recomputed"] = manifest.recomputed();
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : manifest.stages) {
        stages.push_back({{"name", s.name},
                          {"skipped", s.skipped},
                          {"seconds", s.seconds},
                          {"inputs", s.inputs},
                          {"outputs", s.outputs}});
    }
    j["stages"] = std::move(stages);
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path);
    }
    out << j.dump(1) << '\n';
}

RunManifest run_pipeline(const PipelineConfig& config, const PipelineHooks& hooks) {
    config.validate();
    RunManifest manifest;
    manifest.config_hash = hex64(config.hash());
    for (Stage s : all_stages()) {
        try {
            manifest.stages.push_back(run_stage(config, s, hooks));
        } catch (const StageError&) {
            throw;
        } catch (const Error& e) {
            throw StageError(stage_name(s), e);
        }
        if (!config.stop_after.empty() && stage_name(s) == config.stop_after) {
            log(hooks, "info", "stopping after " + config.stop_after);
            return manifest;
        }
    }
    save_manifest((fs::path(config.out_dir) / "manifest.json").string(), manifest);
    return manifest;
}

BaselineResult baseline_kmeans_raw(const SparseBinaryMatrix& d, std::size_t l, std::uint64_t seed,
                                   std::size_t restarts) {
    if (l == 0 || l > d.n_rows()) {
        throw ContractViolation("cluster count L = " + std::to_string(l) + " must lie in [1, " +
                                std::to_string(d.n_rows()) + "]");
    }
    kmeans::Options o;
    o.k = l;
    o.seed = seed;
    o.restarts = restarts;
    o.repair = kmeans::EmptyClusterRepair::split_largest_inertia;
    auto fit = kmeans::fit(kmeans::BinaryPoints(d), o);
    BaselineResult r;
    r.model.l = l;
    r.model.dim = d.n_cols();
    r.model.centroids = std::move(fit.centroids);
    r.model.assignments = std::move(fit.labels);
    r.model.inertia = fit.inertia;
    r.model.iterations = fit.iterations;
    r.model.inertia_history = std::move(fit.inertia_history);
    r.quality = cluster_quality(r.model, d);
    return r;
}

std::string export_table(const std::string& run_dir, const std::string& table,
                         const std::string& dest) {
    const fs::path src(run_dir);
    const fs::path out = fs::path(dest) / (table + ".csv");
    fs::create_directories(dest);
    if (table == "class_selection" || table == "cluster_selection") {
        const auto file = src / (table + ".csv");
        if (!fs::exists(file)) {
            throw NotReadyError(table == "class_selection" ? "classes" : "cluster");
        }
        if (fs::absolute(file) != fs::absolute(out)) {
            fs::copy_file(file, out, fs::copy_options::overwrite_existing);
        }
        return out.string();
    }
    if (table == "cluster_sizes" || table == "cooccurrence") {
        const auto file = src / "quality.json";
        if (!fs::exists(file)) {
            throw NotReadyError("quality");
        }
        std::ifstream in(file);
        const auto j = nlohmann::json::parse(in);
        write_text(out, [&](std::ostream& o) {
            if (table == "cluster_sizes") {
                o << "cluster,size\n";
                const auto sizes = j.at("cluster_sizes").get<std::vector<std::size_t>>();
                for (std::size_t i = 0; i < sizes.size(); ++i) {
                    o << i << ',' << sizes[i] << '\n';
                }
            } else {
                o << "f,count\n";
                const auto hist = j.at("cooccurrence").get<std::vector<std::size_t>>();
                for (std::size_t f = 0; f < hist.size(); ++f) {
                    o << f + 1 << ',' << hist[f] << '\n';
                }
            }
        });
        return out.string();
    }
    throw ContractViolation("unknown diagnostics table '" + table + "'");
}

DiagnosticsExport export_diagnostics(const std::string& run_dir, const std::string& dest) {
    DiagnosticsExport r;
    for (const char* t : {"class_selection", "cluster_selection", "cluster_sizes", "cooccurrence"}) {
        try {
            r.written.push_back(export_table(run_dir, t, dest));
        } catch (const NotReadyError& e) {
            if (std::find(r.not_ready.begin(), r.not_ready.end(), e.stage()) == r.not_ready.end()) {
                r.not_ready.push_back(e.stage());
            }
        }
    }
    return r;
}

}  // namespace covclust
