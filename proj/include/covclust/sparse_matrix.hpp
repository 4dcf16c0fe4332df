#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace covclust {

using Index = std::uint32_t;

/// One row of a binary matrix: the sorted set of columns holding a 1, plus
/// the ambient dimension p the row lives in.
struct BinaryRow {
    std::span<const Index> support;
    std::size_t dim = 0;
};

/**
 * An n x p matrix of zeros and ones stored as compressed sorted row sets.
 *
 * Immutable once built. Column popcounts are accumulated at construction
 * because the sampler compares column averages of a sample against them.
 */
class SparseBinaryMatrix {
public:
    SparseBinaryMatrix() = default;

    /// Builds from per-row index lists. Each list must be strictly increasing
    /// with entries < n_cols; throws ContractViolation otherwise.
    SparseBinaryMatrix(std::size_t n_cols, const std::vector<std::vector<Index>>& rows);

    /// Builds from raw CSR arrays (offsets has n_rows + 1 entries). Validated.
    SparseBinaryMatrix(std::size_t n_cols, std::vector<std::size_t> offsets,
                       std::vector<Index> indices);

    std::size_t n_rows() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t n_cols() const { return n_cols_; }
    std::size_t nnz() const { return indices_.size(); }

    std::span<const Index> row(std::size_t i) const {
        return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    BinaryRow row_view(std::size_t i) const { return {row(i), n_cols_}; }
    std::size_t row_popcount(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
    bool contains(std::size_t i, Index col) const;

    std::span<const std::size_t> col_sums() const { return col_sums_; }

    /// New matrix with the given rows, in the given order.
    SparseBinaryMatrix select_rows(std::span<const std::size_t> rows) const;

    /// New matrix with column k mapped to perm[k]. perm must be a permutation.
    SparseBinaryMatrix permute_columns(std::span<const Index> perm) const;

    std::vector<std::vector<Index>> to_row_sets() const;

    friend bool operator==(const SparseBinaryMatrix& a, const SparseBinaryMatrix& b) {
        return a.n_cols_ == b.n_cols_ && a.offsets_ == b.offsets_ && a.indices_ == b.indices_;
    }

private:
    void validate_and_accumulate();

    std::size_t n_cols_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<Index> indices_;
    std::vector<std::size_t> col_sums_;
};

/// Column-major companion index of a SparseBinaryMatrix: for each column the
/// sorted list of rows holding a 1.
class ColumnIndex {
public:
    explicit ColumnIndex(const SparseBinaryMatrix& m);

    std::size_t n_cols() const { return offsets_.size() - 1; }
    std::span<const Index> col(std::size_t k) const {
        return {rows_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<Index> rows_;
};

enum class EntityKind { user, category };

/// Dense bijection between external ids and row/column indices.
class EntityCatalog {
public:
    explicit EntityCatalog(EntityKind kind = EntityKind::user) : kind_(kind) {}
    EntityCatalog(EntityKind kind, std::vector<std::string> ids);

    EntityKind kind() const { return kind_; }
    std::size_t size() const { return ids_.size(); }

    /// Index of id, registering it at the end when new.
    Index intern(std::string_view id);
    std::optional<Index> find(std::string_view id) const;
    const std::string& id(std::size_t index) const { return ids_.at(index); }
    const std::vector<std::string>& ids() const { return ids_; }

private:
    EntityKind kind_;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, Index> lookup_;
};

struct SparsityReport {
    std::vector<std::size_t> row_sums;
    std::vector<std::size_t> col_sums;
    std::size_t linf_D = 0;   // max row sum
    std::size_t linf_Dt = 0;  // max column sum
    std::size_t nnz = 0;
    double density = 0.0;
};

SparsityReport sparsity_report(const SparseBinaryMatrix& d);

/// |x symmetric-difference y| / p. Throws ContractViolation when the rows
/// come from different dimensions or p is zero.
double hamming_distance(BinaryRow x, BinaryRow y);

/// Cardinality of the symmetric difference of two sorted index sets.
std::size_t symmetric_difference_size(std::span<const Index> a, std::span<const Index> b);
std::size_t intersection_size(std::span<const Index> a, std::span<const Index> b);

// ---------------------------------------------------------------------------
// Ingestion

struct Triplet {
    std::string user;
    std::string item;
    std::uint64_t count = 0;
};

struct IngestResult {
    SparseBinaryMatrix matrix;
    EntityCatalog users{EntityKind::user};
    EntityCatalog categories{EntityKind::category};
};

/// Parses tab-separated "user<TAB>item<TAB>count" lines. Lines starting with
/// '#' and blank lines are skipped. Throws ParseError with the 1-based line.
std::vector<Triplet> parse_triplets(std::istream& in);

/// Aggregates counts per (user, item) and sets a cell when the total reaches
/// min_count. Entities are indexed in order of first appearance, including
/// those whose counts never reach the threshold.
IngestResult ingest_triplets(std::span<const Triplet> records, std::uint64_t min_count = 1);
IngestResult ingest_triplets(std::istream& in, std::uint64_t min_count = 1);

/// Emits one "user<TAB>item<TAB>1" line per set cell.
void write_triplets(std::ostream& out, const SparseBinaryMatrix& d, const EntityCatalog& users,
                    const EntityCatalog& categories);

// ---------------------------------------------------------------------------
// Persistence

inline constexpr std::string_view kMatrixMagic = "CVC1";
inline constexpr std::string_view kImportanceMagic = "CVW1";

/// Magic, little-endian u64 (n_rows, n_cols, nnz), then each row as a u32
/// length followed by its sorted u32 indices.
void write_matrix(std::ostream& out, const SparseBinaryMatrix& d,
                  std::string_view magic = kMatrixMagic);
SparseBinaryMatrix read_matrix(std::istream& in, std::string_view magic = kMatrixMagic);

void save_matrix(const std::string& path, const SparseBinaryMatrix& d,
                 std::string_view magic = kMatrixMagic);
SparseBinaryMatrix load_matrix(const std::string& path, std::string_view magic = kMatrixMagic);

/// Catalog as a JSON array of ids in index order.
void save_catalog(const std::string& path, const EntityCatalog& catalog);
EntityCatalog load_catalog(const std::string& path, EntityKind kind);

}  // namespace covclust
