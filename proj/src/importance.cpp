#include "covclust/importance.hpp"

#include <algorithm>
#include <cmath>

#include "covclust/error.hpp"
#include "covclust/parallel.hpp"
#include "covclust/random.hpp"

namespace covclust {

RegressionInstance::RegressionInstance(std::shared_ptr<const SparseBinaryMatrix> dstar,
                                       std::shared_ptr<const ColumnIndex> columns,
                                       std::size_t anchor, Link link)
    : dstar_(std::move(dstar)), columns_(std::move(columns)), anchor_(anchor), link_(link) {
    if (anchor_ >= dstar_->n_rows()) {
        throw ContractViolation("anchor row " + std::to_string(anchor_) + " out of range");
    }
    obs_rows_.reserve(dstar_->n_rows() - 1);
    for (std::size_t r = 0; r < dstar_->n_rows(); ++r) {
        if (r != anchor_) {
            obs_rows_.push_back(r);
        }
    }
    compute();
}

RegressionInstance::RegressionInstance(std::shared_ptr<const SparseBinaryMatrix> dstar,
                                       std::shared_ptr<const ColumnIndex> columns,
                                       std::size_t anchor, Link link,
                                       std::vector<std::size_t> obs_rows)
    : dstar_(std::move(dstar)),
      columns_(std::move(columns)),
      anchor_(anchor),
      link_(link),
      obs_rows_(std::move(obs_rows)) {
    compute();
}

void RegressionInstance::compute() {
    const std::size_t p = dstar_->n_cols();
    anchor_bits_.assign(p, 0);
    for (Index k : dstar_->row(anchor_)) {
        anchor_bits_[k] = 1;
    }
    position_.assign(dstar_->n_rows(), -1);
    for (std::size_t j = 0; j < obs_rows_.size(); ++j) {
        position_[obs_rows_[j]] = static_cast<std::int64_t>(j);
    }

    const auto anchor_support = dstar_->row(anchor_);
    responses_.resize(obs_rows_.size());
    std::vector<std::size_t> present(p, 0);
    for (std::size_t j = 0; j < obs_rows_.size(); ++j) {
        const auto r = dstar_->row(obs_rows_[j]);
        const double d = hamming_distance({anchor_support, p}, {r, p});
        responses_[j] = apply_link(link_, d, p);
        for (Index k : r) {
            ++present[k];
        }
    }
    col_counts_.resize(p);
    for (std::size_t k = 0; k < p; ++k) {
        col_counts_[k] = anchor_has(k) ? obs_rows_.size() - present[k] : present[k];
    }
}

RegressionInstance RegressionInstance::restrict(std::span<const std::size_t> positions) const {
    std::vector<std::size_t> rows;
    rows.reserve(positions.size());
    for (std::size_t j : positions) {
        if (j >= obs_rows_.size()) {
            throw ContractViolation("observation position out of range");
        }
        rows.push_back(obs_rows_[j]);
    }
    return RegressionInstance(dstar_, columns_, anchor_, link_, std::move(rows));
}

bool RegressionInstance::is_degenerate() const {
    return std::all_of(col_counts_.begin(), col_counts_.end(),
                       [](std::size_t c) { return c == 0; });
}

bool RegressionInstance::design(std::size_t j, std::size_t k) const {
    return dstar_->contains(obs_rows_.at(j), static_cast<Index>(k)) != anchor_has(k);
}

std::vector<Index> RegressionInstance::design_row(std::size_t j) const {
    const auto a = dstar_->row(anchor_);
    const auto b = dstar_->row(obs_rows_.at(j));
    std::vector<Index> out;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                  std::back_inserter(out));
    return out;
}

void RegressionInstance::column_gram(std::size_t k, std::span<double> out) const {
    // A_k: observations holding a 1 in column k of D*. The design column is
    // A_k itself when the anchor lacks k and its complement otherwise.
    const std::size_t p = n_features();
    std::vector<std::size_t> within(p, 0);
    std::size_t a_size = 0;
    for (Index r : columns_->col(k)) {
        if (position_[r] < 0) {
            continue;
        }
        ++a_size;
        for (Index l : dstar_->row(r)) {
            ++within[l];
        }
    }
    const bool complemented = anchor_has(k);
    const std::size_t s_size = complemented ? obs_rows_.size() - a_size : a_size;
    for (std::size_t l = 0; l < p; ++l) {
        const std::size_t total = anchor_has(l) ? obs_rows_.size() - col_counts_[l]
                                                : col_counts_[l];  // ones of x_.l over obs
        const std::size_t ones_in_s = complemented ? total - within[l] : within[l];
        const std::size_t dot = anchor_has(l) ? s_size - ones_in_s : ones_in_s;
        out[l] = static_cast<double>(dot);
    }
}

void RegressionInstance::transpose_times(std::span<const double> v, std::span<double> out) const {
    const std::size_t p = n_features();
    std::vector<double> q(p, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < obs_rows_.size(); ++j) {
        total += v[j];
        for (Index k : dstar_->row(obs_rows_[j])) {
            q[k] += v[j];
        }
    }
    for (std::size_t k = 0; k < p; ++k) {
        out[k] = anchor_has(k) ? total - q[k] : q[k];
    }
}

void RegressionInstance::times(std::span<const double> beta, std::span<double> out) const {
    double base = 0.0;
    for (Index k : dstar_->row(anchor_)) {
        base += beta[k];
    }
    for (std::size_t j = 0; j < obs_rows_.size(); ++j) {
        double s = base;
        for (Index k : dstar_->row(obs_rows_[j])) {
            s += anchor_has(k) ? -beta[k] : beta[k];
        }
        out[j] = s;
    }
}

RegressionInstance build_regression_instance(const SparseBinaryMatrix& dstar, std::size_t i,
                                             Link link) {
    if (dstar.n_rows() < 3) {
        throw ContractViolation("regression needs at least 3 sampled rows");
    }
    if (i >= dstar.n_rows()) {
        throw ContractViolation("anchor row " + std::to_string(i) + " out of range");
    }
    auto shared = std::make_shared<const SparseBinaryMatrix>(dstar);
    auto columns = std::make_shared<const ColumnIndex>(*shared);
    return RegressionInstance(shared, columns, i, link);
}

double apply_link(Link link, double distance, std::size_t p) {
    if (link == Link::identity) {
        return distance;
    }
    const double eps = 0.5 / static_cast<double>(p);
    const double d = std::clamp(distance, eps, 1.0 - eps);
    return std::log(d / (1.0 - d));
}

LassoSolution lasso_fit(const RegressionInstance& instance, double lambda, double tol,
                        std::size_t max_iter) {
    return lasso_fit(instance, instance.responses(), lambda, LassoOptions{tol, max_iter});
}

// ---------------------------------------------------------------------------

namespace {

void check_grid(std::span<const double> grid) {
    if (grid.empty()) {
        throw ContractViolation("lambda grid is empty");
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (!(grid[g] > 0.0)) {
            throw ContractViolation("lambda grid values must be positive");
        }
        if (g > 0 && !(grid[g] < grid[g - 1])) {
            throw ContractViolation("lambda grid must be strictly descending");
        }
    }
}

double held_out_error(const RegressionInstance& test, std::span<const double> beta) {
    std::vector<double> pred(test.n_obs());
    test.times(beta, pred);
    double sse = 0.0;
    const auto y = test.responses();
    for (std::size_t j = 0; j < pred.size(); ++j) {
        sse += (y[j] - pred[j]) * (y[j] - pred[j]);
    }
    return pred.empty() ? 0.0 : sse / static_cast<double>(pred.size());
}

}  // namespace

LambdaChoice select_lambda(const RegressionInstance& instance, std::span<const double> grid,
                           const CrossValidationOptions& options) {
    check_grid(grid);
    if (instance.is_degenerate()) {
        throw DegenerateInstance("anchor row " + std::to_string(instance.anchor_row()) +
                                 ": every design column is zero");
    }
    const std::size_t n = instance.n_obs();
    if (options.folds < 2 || options.folds > n) {
        throw ContractViolation("fold count must lie in [2, m-1]");
    }

    LambdaChoice choice;
    choice.cv_error.assign(grid.size(), 0.0);
    if (grid.size() == 1) {
        choice.lambda = grid[0];
        return choice;
    }

    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < n; ++j) {
        order[j] = j;
    }
    Rng rng(options.seed);
    rng.shuffle(std::span<std::size_t>(order));

    for (std::size_t f = 0; f < options.folds; ++f) {
        std::vector<std::size_t> train;
        std::vector<std::size_t> test;
        for (std::size_t t = 0; t < n; ++t) {
            (t % options.folds == f ? test : train).push_back(order[t]);
        }
        std::sort(train.begin(), train.end());
        std::sort(test.begin(), test.end());
        const auto train_inst = instance.restrict(train);
        const auto test_inst = instance.restrict(test);

        std::vector<double> beta(instance.n_features(), 0.0);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            if (!train_inst.is_degenerate()) {
                try {
                    beta = lasso_fit(train_inst, train_inst.responses(), grid[g], options.lasso,
                                     beta)
                               .beta;
                } catch (const NonConvergence& e) {
                    beta = e.beta();
                }
            }
            choice.cv_error[g] += held_out_error(test_inst, beta) /
                                  static_cast<double>(options.folds);
        }
    }

    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        const double err = choice.cv_error[g];
        const double incumbent = choice.cv_error[best];
        if (err < incumbent && (incumbent - err) > 1e-12 * incumbent) {
            best = g;
        }
    }
    choice.lambda = grid[best];
    return choice;
}

// ---------------------------------------------------------------------------

std::pair<ImportanceMatrix, std::vector<std::size_t>> ImportanceResult::drop_failed() const {
    ImportanceMatrix kept;
    kept.p = importance.p;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < importance.m; ++i) {
        if (fits[i].failed) {
            continue;
        }
        kept.w_rows.push_back(importance.w_rows[i]);
        if (!importance.betas.empty()) {
            kept.betas.push_back(importance.betas[i]);
        }
        rows.push_back(i);
    }
    kept.m = kept.w_rows.size();
    return {std::move(kept), std::move(rows)};
}

namespace {

double broadcast_lambda(const std::shared_ptr<const SparseBinaryMatrix>& dstar,
                        const std::shared_ptr<const ColumnIndex>& columns,
                        const BroadcastCrossValidated& policy, const ImportanceOptions& options) {
    const std::size_t m = dstar->n_rows();
    std::vector<std::size_t> rows(m);
    for (std::size_t i = 0; i < m; ++i) {
        rows[i] = i;
    }
    Rng rng(derive_seed(options.seed, 0x70726f6265ULL));
    rng.shuffle(std::span<std::size_t>(rows));
    rows.resize(std::min(policy.probe_rows, m));
    std::sort(rows.begin(), rows.end());

    std::vector<double> chosen(rows.size(), 0.0);
    std::vector<char> usable(rows.size(), 0);
    parallel_for(rows.size(), [&](std::size_t t) {
        RegressionInstance inst(dstar, columns, rows[t], options.link);
        if (inst.is_degenerate()) {
            return;
        }
        CrossValidationOptions cv{policy.folds, derive_seed(options.seed, rows[t]),
                                  {options.tol, options.max_iter}};
        chosen[t] = select_lambda(inst, policy.grid, cv).lambda;
        usable[t] = 1;
    });
    std::vector<double> picks;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (usable[t]) {
            picks.push_back(chosen[t]);
        }
    }
    if (picks.empty()) {
        throw DegenerateInstance("no probe row supports cross-validation");
    }
    std::sort(picks.begin(), picks.end());
    return picks[picks.size() / 2];  // upper median: the sparser side
}

}  // namespace

ImportanceResult estimate_importance(const SparseBinaryMatrix& dstar,
                                     const ImportanceOptions& options) {
    if (dstar.n_rows() < 3) {
        throw ContractViolation("importance estimation needs at least 3 sampled rows");
    }
    auto shared = std::make_shared<const SparseBinaryMatrix>(dstar);
    auto columns = std::make_shared<const ColumnIndex>(*shared);
    const std::size_t m = dstar.n_rows();

    std::optional<double> global_lambda;
    const PerRowCrossValidated* per_row = nullptr;
    if (const auto* fixed = std::get_if<FixedLambda>(&options.policy)) {
        if (!(fixed->lambda > 0.0)) {
            throw ContractViolation("fixed lambda must be positive");
        }
        global_lambda = fixed->lambda;
    } else if (const auto* bc = std::get_if<BroadcastCrossValidated>(&options.policy)) {
        check_grid(bc->grid);
        global_lambda = broadcast_lambda(shared, columns, *bc, options);
    } else {
        per_row = &std::get<PerRowCrossValidated>(options.policy);
        check_grid(per_row->grid);
    }

    ImportanceResult result;
    result.importance.m = m;
    result.importance.p = dstar.n_cols();
    result.importance.w_rows.resize(m);
    result.importance.betas.resize(m);
    result.fits.resize(m);

    parallel_for(m, [&](std::size_t i) {
        RowFit& fit = result.fits[i];
        fit.row = i;
        RegressionInstance inst(shared, columns, i, options.link);
        if (inst.is_degenerate()) {
            fit.failed = true;
            fit.failure = "degenerate: every design column is zero";
            return;
        }
        try {
            double lambda = global_lambda.value_or(0.0);
            if (per_row != nullptr) {
                CrossValidationOptions cv{per_row->folds, derive_seed(options.seed, i),
                                          {options.tol, options.max_iter}};
                lambda = select_lambda(inst, per_row->grid, cv).lambda;
            }
            fit.lambda = lambda;
            const auto sol = lasso_fit(inst, lambda, options.tol, options.max_iter);
            fit.kkt_violation = sol.kkt_violation;
            fit.iterations = sol.n_iterations;
            for (std::size_t k = 0; k < sol.beta.size(); ++k) {
                if (std::abs(sol.beta[k]) > options.zero_threshold) {
                    result.importance.w_rows[i].push_back(static_cast<Index>(k));
                    result.importance.betas[i].emplace_back(static_cast<Index>(k), sol.beta[k]);
                }
            }
        } catch (const NonConvergence& e) {
            fit.failed = true;
            fit.kkt_violation = e.kkt_violation();
            fit.failure = e.what();
        } catch (const Error& e) {
            fit.failed = true;
            fit.failure = e.what();
        }
    });

    for (std::size_t i = 0; i < m; ++i) {
        if (result.fits[i].failed) {
            result.failed.push_back(i);
        }
    }
    return result;
}

}  // namespace covclust
