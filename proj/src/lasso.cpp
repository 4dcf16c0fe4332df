#include "covclust/lasso.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "covclust/error.hpp"

namespace covclust {

DenseDesign::DenseDesign(std::size_t n_obs, std::size_t n_features, std::vector<double> values)
    : rows_(n_obs), cols_(n_features), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw ContractViolation("dense design: value count does not match shape");
    }
}

double DenseDesign::column_norm2(std::size_t k) const {
    double s = 0.0;
    for (std::size_t j = 0; j < rows_; ++j) {
        s += (*this)(j, k) * (*this)(j, k);
    }
    return s;
}

void DenseDesign::column_gram(std::size_t k, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < rows_; ++j) {
        const double zk = (*this)(j, k);
        if (zk == 0.0) {
            continue;
        }
        for (std::size_t l = 0; l < cols_; ++l) {
            out[l] += zk * (*this)(j, l);
        }
    }
}

void DenseDesign::transpose_times(std::span<const double> v, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < rows_; ++j) {
        for (std::size_t k = 0; k < cols_; ++k) {
            out[k] += (*this)(j, k) * v[j];
        }
    }
}

void DenseDesign::times(std::span<const double> beta, std::span<double> out) const {
    for (std::size_t j = 0; j < rows_; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < cols_; ++k) {
            s += (*this)(j, k) * beta[k];
        }
        out[j] = s;
    }
}

std::vector<std::size_t> LassoSolution::support(double threshold) const {
    std::vector<std::size_t> s;
    for (std::size_t k = 0; k < beta.size(); ++k) {
        if (std::abs(beta[k]) > threshold) {
            s.push_back(k);
        }
    }
    return s;
}

namespace {

// KKT residual of one coordinate given c = z_k . r.
double coordinate_kkt(double beta, double c, double lambda) {
    const double g = 2.0 * c;
    if (beta == 0.0) {
        return std::max(0.0, std::abs(g) - lambda);
    }
    return std::abs(g - (beta > 0 ? lambda : -lambda));
}

std::vector<double> residual_correlations(const LinearDesign& design, std::span<const double> y,
                                          std::span<const double> beta) {
    std::vector<double> fitted(design.n_obs());
    design.times(beta, fitted);
    for (std::size_t j = 0; j < fitted.size(); ++j) {
        fitted[j] = y[j] - fitted[j];
    }
    std::vector<double> c(design.n_features());
    design.transpose_times(fitted, c);
    return c;
}

class CoordinateDescent {
public:
    CoordinateDescent(const LinearDesign& design, std::span<const double> y, double lambda,
                      std::span<const double> warm_start)
        : design_(design),
          y_(y),
          lambda_(lambda),
          norm2_(design.n_features()),
          gram_(design.n_features()),
          beta_(design.n_features(), 0.0) {
        for (std::size_t k = 0; k < norm2_.size(); ++k) {
            norm2_[k] = design.column_norm2(k);
            if (norm2_[k] > 0.0) {
                eligible_.push_back(k);
            }
        }
        if (eligible_.empty()) {
            throw DegenerateInstance("every design column is zero");
        }
        if (!warm_start.empty()) {
            if (warm_start.size() != beta_.size()) {
                throw ContractViolation("warm start has wrong length");
            }
            for (std::size_t k : eligible_) {
                beta_[k] = warm_start[k];
            }
        }
        refresh();
    }

    void refresh() { corr_ = residual_correlations(design_, y_, beta_); }

    // One pass over the given coordinates; returns the largest KKT residual
    // seen before each update.
    double sweep(std::span<const std::size_t> coords) {
        double worst = 0.0;
        for (std::size_t k : coords) {
            worst = std::max(worst, coordinate_kkt(beta_[k], corr_[k], lambda_));
            update(k);
        }
        return worst;
    }

    double kkt(std::span<const std::size_t> coords) const {
        double worst = 0.0;
        for (std::size_t k : coords) {
            worst = std::max(worst, coordinate_kkt(beta_[k], corr_[k], lambda_));
        }
        return worst;
    }

    std::vector<std::size_t> active() const {
        std::vector<std::size_t> a;
        for (std::size_t k : eligible_) {
            if (beta_[k] != 0.0) {
                a.push_back(k);
            }
        }
        return a;
    }

    // Newton step on the active set: solve the KKT system for the current
    // sign pattern and move toward it, stopping where a coefficient would
    // cross zero. Plain cyclic sweeps crawl when active columns are nearly
    // collinear; this jumps to the restricted optimum in one solve.
    bool polish() {
        const auto a = active();
        const auto n = static_cast<Eigen::Index>(a.size());
        if (n == 0) {
            return false;
        }
        Eigen::MatrixXd g(n, n);
        Eigen::VectorXd cur(n);
        Eigen::VectorXd rhs(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& row = gram_row(a[i]);
            for (Eigen::Index j = 0; j < n; ++j) {
                g(i, j) = row[a[j]];
            }
            cur(i) = beta_[a[i]];
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sign = cur(i) > 0.0 ? 1.0 : -1.0;
            rhs(i) = corr_[a[i]] + g.row(i).dot(cur) - 0.5 * lambda_ * sign;
        }
        const Eigen::VectorXd x = g.completeOrthogonalDecomposition().solve(rhs);
        if (!x.allFinite()) {
            return false;
        }
        double t = 1.0;
        Eigen::Index hit = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (x(i) * cur(i) <= 0.0) {
                const double ti = cur(i) / (cur(i) - x(i));
                if (ti < t) {
                    t = ti;
                    hit = i;
                }
            }
        }
        Eigen::VectorXd next = cur + t * (x - cur);
        if (hit >= 0) {
            next(hit) = 0.0;
        }
        const Eigen::VectorXd step = next - cur;
        // Restricted objective change; reject steps that do not descend.
        const double change = step.dot(g * (next + cur)) - 2.0 * step.dot(rhs);
        if (!(change < 0.0)) {
            return false;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double delta = step(i);
            if (delta == 0.0) {
                continue;
            }
            const auto& row = gram_row(a[i]);
            for (std::size_t l = 0; l < corr_.size(); ++l) {
                corr_[l] -= row[l] * delta;
            }
            beta_[a[i]] = next(i);
        }
        return true;
    }

    const std::vector<std::size_t>& eligible() const { return eligible_; }
    const std::vector<double>& beta() const { return beta_; }

private:
    void update(std::size_t k) {
        const double old = beta_[k];
        const double c = corr_[k] + norm2_[k] * old;
        const double next = soft_threshold(c, 0.5 * lambda_) / norm2_[k];
        if (next == old) {
            return;
        }
        const double delta = next - old;
        const auto& g = gram_row(k);
        for (std::size_t l = 0; l < corr_.size(); ++l) {
            corr_[l] -= g[l] * delta;
        }
        beta_[k] = next;
    }

    const std::vector<double>& gram_row(std::size_t k) {
        auto& g = gram_[k];
        if (g.empty()) {
            g.resize(norm2_.size());
            design_.column_gram(k, g);
        }
        return g;
    }

    const LinearDesign& design_;
    std::span<const double> y_;
    double lambda_;
    std::vector<double> norm2_;
    std::vector<std::vector<double>> gram_;
    std::vector<std::size_t> eligible_;
    std::vector<double> beta_;
    std::vector<double> corr_;  // z_k . (y - Z beta), maintained incrementally
};

}  // namespace

LassoSolution lasso_fit(const LinearDesign& design, std::span<const double> y, double lambda,
                        const LassoOptions& options, std::span<const double> warm_start) {
    if (!(lambda > 0.0)) {
        throw ContractViolation("lambda must be positive");
    }
    if (y.size() != design.n_obs()) {
        throw ContractViolation("response length does not match design rows");
    }
    if (!(options.tol > 0.0) || options.max_iter == 0) {
        throw ContractViolation("lasso tolerance and iteration cap must be positive");
    }

    CoordinateDescent cd(design, y, lambda, warm_start);
    std::size_t sweeps = 0;
    double violation = cd.kkt(cd.eligible());

    while (sweeps < options.max_iter) {
        cd.sweep(cd.eligible());
        ++sweeps;

        // Settle the active set before paying for another full pass.
        auto active = cd.active();
        while (!active.empty() && sweeps < options.max_iter) {
            if (cd.kkt(active) <= 0.25 * options.tol) {
                break;
            }
            cd.sweep(active);
            ++sweeps;
            cd.polish();
            active = cd.active();
        }

        if (cd.kkt(cd.eligible()) <= 0.5 * options.tol) {
            // The incremental correlations drift; confirm against a fresh residual.
            cd.refresh();
            violation = cd.kkt(cd.eligible());
            if (violation <= options.tol) {
                return {cd.beta(), lambda, sweeps, violation};
            }
        }
    }

    cd.refresh();
    violation = cd.kkt(cd.eligible());
    if (violation <= options.tol) {
        return {cd.beta(), lambda, sweeps, violation};
    }
    throw NonConvergence(cd.beta(), violation, sweeps);
}

double kkt_violation(const LinearDesign& design, std::span<const double> y,
                     std::span<const double> beta, double lambda) {
    const auto c = residual_correlations(design, y, beta);
    double worst = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        worst = std::max(worst, coordinate_kkt(beta[k], c[k], lambda));
    }
    return worst;
}

double lasso_objective(const LinearDesign& design, std::span<const double> y,
                       std::span<const double> beta, double lambda) {
    std::vector<double> fitted(design.n_obs());
    design.times(beta, fitted);
    double loss = 0.0;
    for (std::size_t j = 0; j < fitted.size(); ++j) {
        loss += (y[j] - fitted[j]) * (y[j] - fitted[j]);
    }
    double l1 = 0.0;
    for (double b : beta) {
        l1 += std::abs(b);
    }
    return loss + lambda * l1;
}

}  // namespace covclust
