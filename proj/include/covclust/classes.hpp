#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "covclust/error.hpp"
#include "covclust/importance.hpp"
#include "covclust/sparse_matrix.hpp"

namespace covclust {

/// Covariate classes: K sets of category indices over p categories.
struct ClassSet {
    std::size_t p = 0;
    std::vector<std::vector<Index>> classes;
    /// For each class, the W-hat rows whose support contains the whole class
    /// (or the generating group when no row does).
    std::vector<std::vector<std::size_t>> support_subsets;
    /// True where support_subsets[u] fell back to the generating group.
    std::vector<bool> subset_fallback;

    std::size_t k() const { return classes.size(); }
    /// Fraction of the p categories that appear in at least one class.
    double coverage() const;
};

struct ClassQuality {
    double entropy_difference = 0.0;
    double impurity = 0.0;  // NaN when K < 2
    double objective = 0.0;
};

/// Partition of the W-hat rows.
struct RowGrouping {
    std::size_t k = 0;                 // groups actually produced
    std::size_t requested_k = 0;
    std::vector<std::size_t> labels;   // one per W-hat row, < k
    double within_ss = 0.0;

    bool reduced() const { return k < requested_k; }
};

/// k-means on W-hat rows as 0/1 vectors; best of `restarts` seeded runs by
/// within-group sum of squares. When W-hat has fewer than k distinct rows the
/// number of groups is reduced to that count (see RowGrouping::reduced).
RowGrouping group_importance_rows(const ImportanceMatrix& w, std::size_t k, std::uint64_t seed,
                                  std::size_t restarts);

/// C_u = columns set in at least a tau fraction of group u's rows. Empty
/// classes are dropped. Throws EmptyClassSetError when every class is empty.
ClassSet derive_classes(const RowGrouping& grouping, const ImportanceMatrix& w, double tau);

/// M(K) with pi_j = |C_j| / sum_u |C_u|.
double class_entropy_difference(const ClassSet& cs);
/// Mean pairwise Jaccard of the classes. Throws UndefinedImpurity when K < 2.
double class_impurity(const ClassSet& cs);
/// B_K - W_K over the rows of W-hat in each support subset.
double class_objective(const ClassSet& cs, const ImportanceMatrix& w);

struct ClassSelectionOptions {
    std::vector<std::size_t> k_grid;
    double eps_impurity = 0.0;
    double eps_entropy = 0.0;
    double tau = 0.5;
    std::uint64_t seed = 0;
    std::size_t restarts = 4;
};

struct ClassDiagnostic {
    std::size_t k = 0;            // grid value
    std::size_t classes = 0;      // non-empty classes actually derived
    double impurity = 0.0;        // NaN when undefined
    double entropy_difference = 0.0;
    double objective = 0.0;
    double coverage = 0.0;
    bool feasible = false;
    std::string note;             // reduced K, empty class set, ...
};

struct ClassSelection {
    std::size_t k = 0;
    ClassSet classes;
    ClassQuality quality;
    std::vector<ClassDiagnostic> diagnostics;
};

/// No grid value met both bounds.
class InfeasibleSelection : public Error {
public:
    InfeasibleSelection(const std::string& what, std::vector<ClassDiagnostic> diagnostics)
        : Error(ErrorKind::numerical, what), diagnostics_(std::move(diagnostics)) {}
    const std::vector<ClassDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<ClassDiagnostic> diagnostics_;
};

/**
 * Scans k_grid in ascending order. At each K, `restarts` independently seeded
 * groupings are turned into classes; a candidate is feasible when all K
 * groups yield a class, I(K) < eps_impurity and M(K) < eps_entropy. The
 * first K with a feasible candidate wins, and among its feasible candidates
 * the largest B_K - W_K.
 * Diagnostics cover the whole grid.
 */
ClassSelection select_classes(const ImportanceMatrix& w, const ClassSelectionOptions& options);

void write_class_diagnostics_csv(std::ostream& out, const std::vector<ClassDiagnostic>& rows);

void save_class_set(const std::string& path, const ClassSet& cs, const ClassQuality& quality);
ClassSet load_class_set(const std::string& path);

}  // namespace covclust
