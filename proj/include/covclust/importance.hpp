#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "covclust/lasso.hpp"
#include "covclust/sparse_matrix.hpp"

namespace covclust {

/// Transform applied to pairwise distances before regressing them on the
/// per-category dissimilarity indicators.
enum class Link { identity, logit };

/**
 * The distance regression for one anchor row i of the training sample D*.
 *
 * Observations are the other rows j != i (kept in D* order, optionally
 * restricted to a subset for cross-validation). The response is
 * h(d(x_i, x_j)); design column k is the indicator x_jk XOR x_ik. The design
 * is never materialised: each column is derived from the column index of D*
 * and the anchor's bit, so memory stays proportional to nnz(D*).
 */
class RegressionInstance final : public LinearDesign {
public:
    RegressionInstance(std::shared_ptr<const SparseBinaryMatrix> dstar,
                       std::shared_ptr<const ColumnIndex> columns, std::size_t anchor,
                       Link link = Link::identity);

    /// Same anchor and link, observations limited to the given positions
    /// (indices into this instance's observation list).
    RegressionInstance restrict(std::span<const std::size_t> positions) const;

    std::size_t anchor_row() const { return anchor_; }
    Link link() const { return link_; }
    std::span<const double> responses() const { return responses_; }
    /// D* row index of each observation.
    std::span<const std::size_t> observation_rows() const { return obs_rows_; }

    /// Number of ones in design column k.
    std::size_t column_count(std::size_t k) const { return col_counts_[k]; }
    /// A column is inactive when it is all zero over the observations.
    bool is_active(std::size_t k) const { return col_counts_[k] > 0; }
    bool is_degenerate() const;

    /// Design entry for observation position j and column k.
    bool design(std::size_t j, std::size_t k) const;
    /// Sorted columns k with z_jk = 1 (the symmetric difference of the rows).
    std::vector<Index> design_row(std::size_t j) const;

    std::size_t n_obs() const override { return obs_rows_.size(); }
    std::size_t n_features() const override { return dstar_->n_cols(); }
    double column_norm2(std::size_t k) const override {
        return static_cast<double>(col_counts_[k]);
    }
    void column_gram(std::size_t k, std::span<double> out) const override;
    void transpose_times(std::span<const double> v, std::span<double> out) const override;
    void times(std::span<const double> beta, std::span<double> out) const override;

private:
    RegressionInstance(std::shared_ptr<const SparseBinaryMatrix> dstar,
                       std::shared_ptr<const ColumnIndex> columns, std::size_t anchor, Link link,
                       std::vector<std::size_t> obs_rows);
    void compute();
    bool anchor_has(std::size_t k) const { return anchor_bits_[k] != 0; }

    std::shared_ptr<const SparseBinaryMatrix> dstar_;
    std::shared_ptr<const ColumnIndex> columns_;
    std::size_t anchor_;
    Link link_;
    std::vector<std::size_t> obs_rows_;
    std::vector<std::int64_t> position_;  // D* row -> observation position, -1 when excluded
    std::vector<char> anchor_bits_;
    std::vector<double> responses_;
    std::vector<std::size_t> col_counts_;
};

/// Builds the regression for anchor i of D*. Needs m >= 3 and i < m.
RegressionInstance build_regression_instance(const SparseBinaryMatrix& dstar, std::size_t i,
                                             Link link = Link::identity);

/// h(d); the logit clamps d into [1/(2p), 1 - 1/(2p)].
double apply_link(Link link, double distance, std::size_t p);

LassoSolution lasso_fit(const RegressionInstance& instance, double lambda, double tol,
                        std::size_t max_iter);

struct CrossValidationOptions {
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    LassoOptions lasso{1e-6, 10000};
};

struct LambdaChoice {
    double lambda = 0.0;
    std::vector<double> cv_error;  // mean held-out squared error per grid value
};

/**
 * k-fold cross-validation over a strictly descending grid. Returns the
 * value with the smallest mean held-out squared error; equal errors go to
 * the larger lambda.
 */
LambdaChoice select_lambda(const RegressionInstance& instance, std::span<const double> grid,
                           const CrossValidationOptions& options);

struct FixedLambda {
    double lambda = 0.1;
};
/// Cross-validate every row independently.
struct PerRowCrossValidated {
    std::vector<double> grid;
    std::size_t folds = 5;
};
/// Cross-validate a subsample of rows and use their median choice for all.
struct BroadcastCrossValidated {
    std::vector<double> grid;
    std::size_t folds = 5;
    std::size_t probe_rows = 20;
};
using LambdaPolicy = std::variant<FixedLambda, PerRowCrossValidated, BroadcastCrossValidated>;

/**
 * The binary matrix W-hat (m x p): row i flags the categories whose lasso
 * coefficient survives in anchor i's distance regression.
 */
struct ImportanceMatrix {
    std::size_t m = 0;
    std::size_t p = 0;
    std::vector<std::vector<Index>> w_rows;
    /// Sparse coefficients per row, kept for diagnostics.
    std::vector<std::vector<std::pair<Index, double>>> betas;

    SparseBinaryMatrix as_matrix() const { return SparseBinaryMatrix(p, w_rows); }
};

struct RowFit {
    std::size_t row = 0;
    double lambda = 0.0;
    double kkt_violation = 0.0;
    std::size_t iterations = 0;
    bool failed = false;
    std::string failure;
};

struct ImportanceResult {
    ImportanceMatrix importance;
    std::vector<RowFit> fits;          // one per D* row
    std::vector<std::size_t> failed;   // rows whose fit failed; their W-hat row is empty

    bool complete() const { return failed.empty(); }
    /// W-hat without the failed rows, and the D* row index of each kept row.
    std::pair<ImportanceMatrix, std::vector<std::size_t>> drop_failed() const;
};

struct ImportanceOptions {
    LambdaPolicy policy = FixedLambda{};
    Link link = Link::identity;
    double tol = 1e-6;
    std::size_t max_iter = 10000;
    std::uint64_t seed = 0;
    double zero_threshold = 1e-10;
};

/// Fits every row of D* independently (row-parallel, order independent).
/// Per-row failures are reported in the result, never thrown.
ImportanceResult estimate_importance(const SparseBinaryMatrix& dstar,
                                     const ImportanceOptions& options);

}  // namespace covclust
