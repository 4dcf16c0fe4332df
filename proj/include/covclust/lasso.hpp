#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace covclust {

/**
 * Read-only access to a design matrix Z (n_obs x n_features) in the form a
 * covariance-update coordinate descent needs: column norms, full Gram rows
 * for columns that become active, and matrix-vector products for
 * recomputing residuals from scratch.
 */
class LinearDesign {
public:
    virtual ~LinearDesign() = default;

    virtual std::size_t n_obs() const = 0;
    virtual std::size_t n_features() const = 0;

    /// z_k . z_k
    virtual double column_norm2(std::size_t k) const = 0;
    /// out[l] = z_k . z_l for every feature l.
    virtual void column_gram(std::size_t k, std::span<double> out) const = 0;
    /// out[k] = z_k . v for every feature k.
    virtual void transpose_times(std::span<const double> v, std::span<double> out) const = 0;
    /// out[j] = z_j . beta for every observation j.
    virtual void times(std::span<const double> beta, std::span<double> out) const = 0;
};

/// Row-major dense design, for small problems and for tests.
class DenseDesign final : public LinearDesign {
public:
    DenseDesign(std::size_t n_obs, std::size_t n_features, std::vector<double> values);

    double operator()(std::size_t j, std::size_t k) const { return values_[j * cols_ + k]; }

    std::size_t n_obs() const override { return rows_; }
    std::size_t n_features() const override { return cols_; }
    double column_norm2(std::size_t k) const override;
    void column_gram(std::size_t k, std::span<double> out) const override;
    void transpose_times(std::span<const double> v, std::span<double> out) const override;
    void times(std::span<const double> beta, std::span<double> out) const override;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> values_;
};

struct LassoOptions {
    double tol = 1e-7;            // max KKT residual accepted at return
    std::size_t max_iter = 10000;  // cap on full coordinate sweeps
};

struct LassoSolution {
    std::vector<double> beta;
    double lambda = 0.0;
    std::size_t n_iterations = 0;
    double kkt_violation = 0.0;

    /// Features with |beta_k| above the numerical-zero threshold.
    std::vector<std::size_t> support(double threshold = 1e-10) const;
};

/**
 * Minimises  sum_j (y_j - z_j . beta)^2 + lambda * |beta|_1  (no intercept)
 * by cyclic coordinate descent with covariance updates.
 *
 * Returns once every coordinate satisfies the KKT conditions within
 * options.tol, where g_k = 2 z_k . (y - Z beta) must equal lambda*sign(beta_k)
 * on the support and satisfy |g_k| <= lambda off it. Throws NonConvergence
 * carrying the best iterate when max_iter sweeps are exhausted, and
 * DegenerateInstance when every design column is zero. The optional warm
 * start only changes the path taken, not the stationarity guarantee.
 */
LassoSolution lasso_fit(const LinearDesign& design, std::span<const double> y, double lambda,
                        const LassoOptions& options = {},
                        std::span<const double> warm_start = {});

/// Largest KKT residual of beta, recomputing the residual from scratch.
double kkt_violation(const LinearDesign& design, std::span<const double> y,
                     std::span<const double> beta, double lambda);

/// sum_j (y_j - z_j . beta)^2 + lambda * |beta|_1
double lasso_objective(const LinearDesign& design, std::span<const double> y,
                       std::span<const double> beta, double lambda);

/// sign(c) * max(|c| - t, 0)
inline double soft_threshold(double c, double t) {
    if (c > t) {
        return c - t;
    }
    if (c < -t) {
        return c + t;
    }
    return 0.0;
}

}  // namespace covclust
