#include "covclust/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "covclust/error.hpp"
#include "covclust/random.hpp"

namespace covclust {

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    if (n == 0 || b.size() != n) {
        throw ContractViolation("pearson_correlation: inputs must be non-empty and equal length");
    }
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 && sbb == 0.0) {
        return a == b ? 1.0 : 0.0;
    }
    if (saa == 0.0 || sbb == 0.0) {
        return 0.0;
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

namespace {

std::vector<std::size_t> eligible_pool(const SparseBinaryMatrix& d) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        if (d.row_popcount(i) > 0) {
            pool.push_back(i);
        }
    }
    return pool;
}

double mean_popcount(const SparseBinaryMatrix& d, const std::vector<std::size_t>& rows) {
    double total = 0.0;
    for (std::size_t r : rows) {
        total += static_cast<double>(d.row_popcount(r));
    }
    return total / static_cast<double>(rows.size());
}

}  // namespace

double popcount_ks_statistic(const SparseBinaryMatrix& d, const std::vector<std::size_t>& rows) {
    const auto pool = eligible_pool(d);
    std::vector<std::size_t> a;
    std::vector<std::size_t> b;
    for (std::size_t r : rows) {
        a.push_back(d.row_popcount(r));
    }
    for (std::size_t r : pool) {
        b.push_back(d.row_popcount(r));
    }
    if (a.empty() || b.empty()) {
        return 0.0;
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double worst = 0.0;
    std::size_t ia = 0;
    std::size_t ib = 0;
    while (ia < a.size() || ib < b.size()) {
        std::size_t v;
        if (ib >= b.size() || (ia < a.size() && a[ia] <= b[ib])) {
            v = a[ia];
        } else {
            v = b[ib];
        }
        while (ia < a.size() && a[ia] == v) {
            ++ia;
        }
        while (ib < b.size() && b[ib] == v) {
            ++ib;
        }
        const double fa = static_cast<double>(ia) / static_cast<double>(a.size());
        const double fb = static_cast<double>(ib) / static_cast<double>(b.size());
        worst = std::max(worst, std::abs(fa - fb));
    }
    return worst;
}

SamplePlan sample_training_rows(const SparseBinaryMatrix& d, std::size_t m, std::uint64_t seed,
                                const SamplerOptions& options) {
    if (m == 0) {
        throw ContractViolation("sample size m must be positive");
    }
    if (!(options.min_corr < 1.0) || options.max_attempts == 0 || options.popcount_bins == 0) {
        throw ContractViolation("sampler options out of range");
    }
    auto pool = eligible_pool(d);
    if (pool.size() < m) {
        throw InsufficientDataError("requested m = " + std::to_string(m) + " but only " +
                                    std::to_string(pool.size()) +
                                    " rows have at least one set column");
    }

    std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
        return d.row_popcount(a) < d.row_popcount(b);
    });

    // Equal-count quantile bins over the popcount order.
    const std::size_t n_bins = std::min(options.popcount_bins, pool.size());
    std::vector<std::size_t> bin_start(n_bins + 1);
    for (std::size_t b = 0; b <= n_bins; ++b) {
        bin_start[b] = b * pool.size() / n_bins;
    }

    // Largest-remainder proportional allocation.
    std::vector<std::size_t> alloc(n_bins);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        const double exact = static_cast<double>(m) *
                             static_cast<double>(bin_start[b + 1] - bin_start[b]) /
                             static_cast<double>(pool.size());
        alloc[b] = static_cast<std::size_t>(std::floor(exact));
        assigned += alloc[b];
        remainders.emplace_back(exact - std::floor(exact), b);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t t = 0; assigned < m; ++t) {
        ++alloc[remainders[t % remainders.size()].second];
        ++assigned;
    }

    std::vector<double> population_avg(d.n_cols());
    for (std::size_t k = 0; k < d.n_cols(); ++k) {
        population_avg[k] = static_cast<double>(d.col_sums()[k]) / static_cast<double>(d.n_rows());
    }
    const double pool_mean = mean_popcount(d, pool);

    double best_corr = -1.0;
    for (std::size_t attempt = 0; attempt < options.max_attempts; ++attempt) {
        Rng rng(derive_seed(seed, attempt));
        std::vector<std::size_t> chosen;
        chosen.reserve(m);
        for (std::size_t b = 0; b < n_bins; ++b) {
            std::vector<std::size_t> bin(pool.begin() + static_cast<std::ptrdiff_t>(bin_start[b]),
                                         pool.begin() + static_cast<std::ptrdiff_t>(bin_start[b + 1]));
            // Partial Fisher-Yates: the first alloc[b] slots are a uniform draw.
            for (std::size_t t = 0; t < alloc[b]; ++t) {
                std::swap(bin[t], bin[t + rng.index(bin.size() - t)]);
            }
            chosen.insert(chosen.end(), bin.begin(), bin.begin() + static_cast<std::ptrdiff_t>(alloc[b]));
        }
        std::sort(chosen.begin(), chosen.end());

        std::vector<double> sample_avg(d.n_cols(), 0.0);
        for (std::size_t r : chosen) {
            for (Index k : d.row(r)) {
                sample_avg[k] += 1.0;
            }
        }
        for (double& v : sample_avg) {
            v /= static_cast<double>(m);
        }
        const double corr = pearson_correlation(sample_avg, population_avg);
        const double ratio = mean_popcount(d, chosen) / pool_mean;
        best_corr = std::max(best_corr, corr);
        if (corr >= options.min_corr && ratio >= options.min_row_ratio &&
            ratio <= options.max_row_ratio) {
            SamplePlan plan;
            plan.m = m;
            plan.seed = seed;
            plan.row_ids = std::move(chosen);
            plan.col_avg_correlation = corr;
            plan.row_avg_ratio = ratio;
            plan.attempts = attempt + 1;
            return plan;
        }
    }
    throw SamplingFailure(best_corr, "no sample reached column-average correlation " +
                                         std::to_string(options.min_corr) + " in " +
                                         std::to_string(options.max_attempts) +
                                         " attempts (best " + std::to_string(best_corr) + ")");
}

void save_sample_plan(const std::string& path, const SamplePlan& plan) {
    nlohmann::json j;
    j["m"] = plan.m;
    j["seed"] = plan.seed;
    j["row_ids"] = plan.row_ids;
    j["diagnostics"] = {{"col_avg_correlation", plan.col_avg_correlation},
                        {"row_avg_ratio", plan.row_avg_ratio},
                        {"attempts", plan.attempts}};
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path);
    }
    out << j.dump(1) << '\n';
}

SamplePlan load_sample_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::data, "cannot read " + path);
    }
    const auto j = nlohmann::json::parse(in);
    SamplePlan plan;
    plan.m = j.at("m").get<std::size_t>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.row_ids = j.at("row_ids").get<std::vector<std::size_t>>();
    const auto& diag = j.at("diagnostics");
    plan.col_avg_correlation = diag.at("col_avg_correlation").get<double>();
    plan.row_avg_ratio = diag.at("row_avg_ratio").get<double>();
    plan.attempts = diag.at("attempts").get<std::size_t>();
    return plan;
}

}  // namespace covclust
