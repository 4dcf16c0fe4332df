#include "covclust/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "covclust/error.hpp"
#include "covclust/random.hpp"

namespace covclust::synthetic {

PlantedData planted_blocks(const PlantedSpec& spec) {
    if (spec.classes == 0 || spec.classes * spec.block > spec.p || spec.n == 0) {
        throw ContractViolation("planted blocks do not fit in p columns");
    }
    PlantedData out;
    for (std::size_t g = 0; g < spec.classes; ++g) {
        std::vector<Index> b;
        for (std::size_t c = g * spec.block; c < (g + 1) * spec.block; ++c) {
            b.push_back(static_cast<Index>(c));
        }
        out.blocks.push_back(std::move(b));
    }
    std::vector<std::vector<Index>> rows(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Rng rng(derive_seed(spec.seed, i));
        const std::size_t g = i % spec.classes;
        out.labels.push_back(g);
        const std::size_t lo = g * spec.block;
        const std::size_t hi = lo + spec.block;
        for (std::size_t c = 0; c < spec.p; ++c) {
            const double prob = (c >= lo && c < hi) ? spec.activation : spec.noise;
            if (rng.bernoulli(prob)) {
                rows[i].push_back(static_cast<Index>(c));
            }
        }
    }
    out.matrix = SparseBinaryMatrix(spec.p, rows);
    return out;
}

namespace {

// Inverse-CDF draw from a discrete distribution given its cumulative weights.
std::size_t draw(Rng& rng, const std::vector<double>& cum) {
    const double u = rng.uniform() * cum.back();
    return static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
}

std::vector<double> zipf_cumulative(std::size_t n, double exponent) {
    std::vector<double> cum(n);
    double run = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        run += std::pow(static_cast<double>(r + 1), -exponent);
        cum[r] = run;
    }
    return cum;
}

}  // namespace

PlantedData heavy_tailed(const HeavyTailSpec& spec) {
    if (spec.groups == 0 || spec.groups > spec.p || spec.n == 0 || !(spec.mean_items >= 1.0)) {
        throw ContractViolation("heavy-tailed generator parameters out of range");
    }
    const std::size_t block = spec.p / spec.groups;
    PlantedData out;
    for (std::size_t g = 0; g < spec.groups; ++g) {
        std::vector<Index> b;
        for (std::size_t c = g * block; c < (g + 1) * block; ++c) {
            b.push_back(static_cast<Index>(c));
        }
        out.blocks.push_back(std::move(b));
    }
    // Global popularity ranking: a fixed shuffle of the columns.
    std::vector<Index> ranking(spec.p);
    for (std::size_t c = 0; c < spec.p; ++c) {
        ranking[c] = static_cast<Index>(c);
    }
    Rng shuffler(derive_seed(spec.seed, 0xabcdefULL));
    shuffler.shuffle(std::span<Index>(ranking));
    const auto global_cum = zipf_cumulative(spec.p, spec.exponent);
    const auto block_cum = zipf_cumulative(block, spec.exponent);
    const double stop = 1.0 / spec.mean_items;

    std::vector<std::vector<Index>> rows(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Rng rng(derive_seed(spec.seed, i));
        const std::size_t g = i % spec.groups;
        out.labels.push_back(g);
        std::size_t items = 1;
        while (!rng.bernoulli(stop)) {
            ++items;
        }
        for (std::size_t t = 0; t < items; ++t) {
            Index c;
            if (rng.bernoulli(spec.own_share)) {
                c = static_cast<Index>(g * block + draw(rng, block_cum));
            } else {
                c = ranking[draw(rng, global_cum)];
            }
            rows[i].push_back(c);
        }
        std::sort(rows[i].begin(), rows[i].end());
        rows[i].erase(std::unique(rows[i].begin(), rows[i].end()), rows[i].end());
    }
    out.matrix = SparseBinaryMatrix(spec.p, rows);
    return out;
}

}  // namespace covclust::synthetic
