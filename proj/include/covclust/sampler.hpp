#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "covclust/sparse_matrix.hpp"

namespace covclust {

struct SamplePlan {
    std::size_t m = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> row_ids;  // sorted, distinct
    double col_avg_correlation = 0.0;  // Pearson, column averages of D* vs D
    double row_avg_ratio = 0.0;        // mean popcount of D* / mean popcount of the pool
    std::size_t attempts = 0;          // attempt that was accepted (1-based)
};

struct SamplerOptions {
    double min_corr = 0.9;
    std::size_t max_attempts = 20;
    std::size_t popcount_bins = 10;
    double min_row_ratio = 0.8;
    double max_row_ratio = 1.25;
};

/**
 * Draws m training rows from the rows of D with at least one set column.
 *
 * The pool is ordered by popcount and cut into equal-count quantile bins;
 * each bin receives a proportional share of m (largest remainders first) and
 * is sampled uniformly without replacement. An attempt is accepted when the
 * column averages of the sample correlate with those of D at min_corr or
 * better and the mean popcount stays within the row-ratio band; otherwise a
 * fresh sub-seed is tried, up to max_attempts.
 *
 * Throws InsufficientDataError when fewer than m rows are eligible and
 * SamplingFailure (with the best correlation seen) when no attempt passes.
 */
SamplePlan sample_training_rows(const SparseBinaryMatrix& d, std::size_t m, std::uint64_t seed,
                                const SamplerOptions& options = {});

/// Pearson correlation; 1 when both inputs are constant and equal, 0 when
/// exactly one is constant.
double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);

/// Two-sample Kolmogorov-Smirnov statistic between row popcounts of the
/// selected rows and of all rows in the pool.
double popcount_ks_statistic(const SparseBinaryMatrix& d, const std::vector<std::size_t>& rows);

void save_sample_plan(const std::string& path, const SamplePlan& plan);
SamplePlan load_sample_plan(const std::string& path);

}  // namespace covclust
