#include "covclust/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "covclust/error.hpp"

namespace covclust {

double entropy_difference(std::span<const std::size_t> sizes) {
    if (sizes.empty()) {
        throw ContractViolation("entropy difference of an empty size list");
    }
    double total = 0.0;
    for (std::size_t s : sizes) {
        total += static_cast<double>(s);
    }
    if (total <= 0.0) {
        throw ContractViolation("entropy difference needs a positive total size");
    }
    const double k = static_cast<double>(sizes.size());
    double m = 0.0;
    for (std::size_t s : sizes) {
        if (s == 0) {
            continue;
        }
        const double q = static_cast<double>(s) / total;
        m += q * std::log(k * q);
    }
    return std::max(m, 0.0);
}

double jaccard(std::span<const Index> a, std::span<const Index> b) {
    const std::size_t inter = intersection_size(a, b);
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double mean_pairwise_jaccard(const std::vector<std::vector<Index>>& sets) {
    const std::size_t k = sets.size();
    if (k < 2) {
        throw UndefinedImpurity("impurity needs at least two sets (got " + std::to_string(k) + ")");
    }
    double sum = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            sum += jaccard(sets[a], sets[b]);
        }
    }
    return sum * 2.0 / (static_cast<double>(k) * static_cast<double>(k - 1));
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) {
        throw ContractViolation("labelings differ in length");
    }
    auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    std::map<std::pair<std::size_t, std::size_t>, double> table;
    std::map<std::size_t, double> ra;
    std::map<std::size_t, double> rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    double index = 0.0;
    for (const auto& [key, c] : table) {
        index += pairs(c);
    }
    double sa = 0.0;
    double sb = 0.0;
    for (const auto& [key, c] : ra) {
        sa += pairs(c);
    }
    for (const auto& [key, c] : rb) {
        sb += pairs(c);
    }
    const double total = pairs(static_cast<double>(a.size()));
    const double expected = total > 0.0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) {
        return 1.0;
    }
    return (index - expected) / (max_index - expected);
}

}  // namespace covclust
