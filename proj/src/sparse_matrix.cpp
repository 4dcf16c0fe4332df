#include "covclust/sparse_matrix.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "json.hpp"

#include "covclust/binary_io.hpp"
#include "covclust/error.hpp"

namespace covclust {

SparseBinaryMatrix::SparseBinaryMatrix(std::size_t n_cols,
                                       const std::vector<std::vector<Index>>& rows)
    : n_cols_(n_cols) {
    offsets_.clear();
    offsets_.reserve(rows.size() + 1);
    offsets_.push_back(0);
    for (const auto& r : rows) {
        indices_.insert(indices_.end(), r.begin(), r.end());
        offsets_.push_back(indices_.size());
    }
    validate_and_accumulate();
}

SparseBinaryMatrix::SparseBinaryMatrix(std::size_t n_cols, std::vector<std::size_t> offsets,
                                       std::vector<Index> indices)
    : n_cols_(n_cols), offsets_(std::move(offsets)), indices_(std::move(indices)) {
    if (offsets_.empty() || offsets_.front() != 0 || offsets_.back() != indices_.size()) {
        throw ContractViolation("malformed row offsets");
    }
    validate_and_accumulate();
}

void SparseBinaryMatrix::validate_and_accumulate() {
    col_sums_.assign(n_cols_, 0);
    for (std::size_t i = 0; i + 1 < offsets_.size(); ++i) {
        if (offsets_[i + 1] < offsets_[i]) {
            throw ContractViolation("row offsets must be non-decreasing");
        }
        const auto r = row(i);
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (r[k] >= n_cols_) {
                throw ContractViolation("column index " + std::to_string(r[k]) +
                                        " out of range in row " + std::to_string(i));
            }
            if (k > 0 && r[k] <= r[k - 1]) {
                throw ContractViolation("row " + std::to_string(i) +
                                        " is not strictly increasing");
            }
            ++col_sums_[r[k]];
        }
    }
}

bool SparseBinaryMatrix::contains(std::size_t i, Index col) const {
    const auto r = row(i);
    return std::binary_search(r.begin(), r.end(), col);
}

SparseBinaryMatrix SparseBinaryMatrix::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::size_t> offsets{0};
    offsets.reserve(rows.size() + 1);
    std::vector<Index> indices;
    for (std::size_t r : rows) {
        if (r >= n_rows()) {
            throw ContractViolation("row " + std::to_string(r) + " out of range");
        }
        const auto src = row(r);
        indices.insert(indices.end(), src.begin(), src.end());
        offsets.push_back(indices.size());
    }
    return SparseBinaryMatrix(n_cols_, std::move(offsets), std::move(indices));
}

SparseBinaryMatrix SparseBinaryMatrix::permute_columns(std::span<const Index> perm) const {
    if (perm.size() != n_cols_) {
        throw ContractViolation("permutation length must equal n_cols");
    }
    std::vector<std::vector<Index>> rows(n_rows());
    for (std::size_t i = 0; i < n_rows(); ++i) {
        for (Index k : row(i)) {
            rows[i].push_back(perm[k]);
        }
        std::sort(rows[i].begin(), rows[i].end());
    }
    return SparseBinaryMatrix(n_cols_, rows);
}

std::vector<std::vector<Index>> SparseBinaryMatrix::to_row_sets() const {
    std::vector<std::vector<Index>> rows(n_rows());
    for (std::size_t i = 0; i < n_rows(); ++i) {
        rows[i].assign(row(i).begin(), row(i).end());
    }
    return rows;
}

ColumnIndex::ColumnIndex(const SparseBinaryMatrix& m) : offsets_(m.n_cols() + 1, 0) {
    const auto sums = m.col_sums();
    for (std::size_t k = 0; k < m.n_cols(); ++k) {
        offsets_[k + 1] = offsets_[k] + sums[k];
    }
    rows_.resize(m.nnz());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < m.n_rows(); ++i) {
        for (Index k : m.row(i)) {
            rows_[cursor[k]++] = static_cast<Index>(i);
        }
    }
}

EntityCatalog::EntityCatalog(EntityKind kind, std::vector<std::string> ids) : kind_(kind) {
    for (auto& id : ids) {
        if (find(id)) {
            throw Error(ErrorKind::data, "duplicate id in catalog: " + id);
        }
        intern(id);
    }
}

Index EntityCatalog::intern(std::string_view id) {
    std::string key(id);
    auto [it, inserted] = lookup_.try_emplace(key, static_cast<Index>(ids_.size()));
    if (inserted) {
        ids_.push_back(std::move(key));
    }
    return it->second;
}

std::optional<Index> EntityCatalog::find(std::string_view id) const {
    auto it = lookup_.find(std::string(id));
    if (it == lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

SparsityReport sparsity_report(const SparseBinaryMatrix& d) {
    SparsityReport report;
    report.row_sums.resize(d.n_rows());
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        report.row_sums[i] = d.row_popcount(i);
        report.linf_D = std::max(report.linf_D, report.row_sums[i]);
    }
    report.col_sums.assign(d.col_sums().begin(), d.col_sums().end());
    for (std::size_t s : report.col_sums) {
        report.linf_Dt = std::max(report.linf_Dt, s);
    }
    report.nnz = d.nnz();
    const double cells = static_cast<double>(d.n_rows()) * static_cast<double>(d.n_cols());
    report.density = cells > 0 ? static_cast<double>(d.nnz()) / cells : 0.0;
    return report;
}

std::size_t intersection_size(std::span<const Index> a, std::span<const Index> b) {
    std::size_t count = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++count;
            ++ia;
            ++ib;
        }
    }
    return count;
}

std::size_t symmetric_difference_size(std::span<const Index> a, std::span<const Index> b) {
    return a.size() + b.size() - 2 * intersection_size(a, b);
}

double hamming_distance(BinaryRow x, BinaryRow y) {
    if (x.dim != y.dim) {
        throw ContractViolation("hamming_distance: dimension mismatch (" +
                                std::to_string(x.dim) + " vs " + std::to_string(y.dim) + ")");
    }
    if (x.dim == 0) {
        throw ContractViolation("hamming_distance: zero dimension");
    }
    return static_cast<double>(symmetric_difference_size(x.support, y.support)) /
           static_cast<double>(x.dim);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

}  // namespace

std::vector<Triplet> parse_triplets(std::istream& in) {
    std::vector<Triplet> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto fields = split_tabs(line);
        if (fields.size() != 3) {
            throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                          std::to_string(fields.size()));
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw ParseError(line_no, "empty user or item id");
        }
        Triplet t{std::string(fields[0]), std::string(fields[1]), 0};
        const auto count = fields[2];
        const auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), t.count);
        if (ec != std::errc() || ptr != count.data() + count.size()) {
            throw ParseError(line_no, "count is not a non-negative integer: '" +
                                          std::string(count) + "'");
        }
        records.push_back(std::move(t));
    }
    return records;
}

IngestResult ingest_triplets(std::span<const Triplet> records, std::uint64_t min_count) {
    if (min_count < 1) {
        throw ContractViolation("min_count must be at least 1");
    }
    if (records.empty()) {
        throw EmptyInputError("no usage records in input");
    }
    IngestResult result;
    std::map<std::pair<Index, Index>, std::uint64_t> totals;
    for (const auto& t : records) {
        const Index u = result.users.intern(t.user);
        const Index c = result.categories.intern(t.item);
        totals[{u, c}] += t.count;
    }
    std::vector<std::vector<Index>> rows(result.users.size());
    for (const auto& [cell, total] : totals) {
        if (total >= min_count) {
            rows[cell.first].push_back(cell.second);  // map order keeps rows sorted
        }
    }
    result.matrix = SparseBinaryMatrix(result.categories.size(), rows);
    return result;
}

IngestResult ingest_triplets(std::istream& in, std::uint64_t min_count) {
    const auto records = parse_triplets(in);
    return ingest_triplets(records, min_count);
}

void write_triplets(std::ostream& out, const SparseBinaryMatrix& d, const EntityCatalog& users,
                    const EntityCatalog& categories) {
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        for (Index k : d.row(i)) {
            out << users.id(i) << '\t' << categories.id(k) << "\t1\n";
        }
    }
}

// ---------------------------------------------------------------------------

void write_matrix(std::ostream& out, const SparseBinaryMatrix& d, std::string_view magic) {
    binary::write_magic(out, magic);
    binary::write_le<std::uint64_t>(out, d.n_rows());
    binary::write_le<std::uint64_t>(out, d.n_cols());
    binary::write_le<std::uint64_t>(out, d.nnz());
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        const auto r = d.row(i);
        binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.size()));
        for (Index k : r) {
            binary::write_le<std::uint32_t>(out, k);
        }
    }
}

SparseBinaryMatrix read_matrix(std::istream& in, std::string_view magic) {
    binary::expect_magic(in, magic);
    const auto n_rows = binary::read_le<std::uint64_t>(in);
    const auto n_cols = binary::read_le<std::uint64_t>(in);
    const auto nnz = binary::read_le<std::uint64_t>(in);
    std::vector<std::size_t> offsets{0};
    offsets.reserve(n_rows + 1);
    std::vector<Index> indices;
    indices.reserve(nnz);
    for (std::uint64_t i = 0; i < n_rows; ++i) {
        const auto len = binary::read_le<std::uint32_t>(in);
        for (std::uint32_t k = 0; k < len; ++k) {
            indices.push_back(binary::read_le<std::uint32_t>(in));
        }
        offsets.push_back(indices.size());
    }
    if (indices.size() != nnz) {
        throw Error(ErrorKind::data, "matrix file nnz header does not match its rows");
    }
    try {
        return SparseBinaryMatrix(n_cols, std::move(offsets), std::move(indices));
    } catch (const ContractViolation& e) {
        throw Error(ErrorKind::data, std::string("corrupt matrix file: ") + e.what());
    }
}

void save_matrix(const std::string& path, const SparseBinaryMatrix& d, std::string_view magic) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path);
    }
    write_matrix(out, d, magic);
}

SparseBinaryMatrix load_matrix(const std::string& path, std::string_view magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::data, "cannot read " + path);
    }
    return read_matrix(in, magic);
}

void save_catalog(const std::string& path, const EntityCatalog& catalog) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path);
    }
    out << nlohmann::json(catalog.ids()).dump() << '\n';
}

EntityCatalog load_catalog(const std::string& path, EntityKind kind) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::data, "cannot read " + path);
    }
    return EntityCatalog(kind, nlohmann::json::parse(in).get<std::vector<std::string>>());
}

}  // namespace covclust
