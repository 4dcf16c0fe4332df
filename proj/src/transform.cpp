#include "covclust/transform.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "covclust/binary_io.hpp"
#include "covclust/error.hpp"
#include "covclust/parallel.hpp"

namespace covclust {

namespace {

// category -> classes containing it
std::vector<std::vector<std::size_t>> invert(const ClassSet& cs) {
    std::vector<std::vector<std::size_t>> owners(cs.p);
    for (std::size_t u = 0; u < cs.k(); ++u) {
        if (cs.classes[u].empty()) {
            throw ContractViolation("class " + std::to_string(u) + " is empty");
        }
        for (Index c : cs.classes[u]) {
            if (c >= cs.p) {
                throw ContractViolation("class index " + std::to_string(c) + " >= p");
            }
            owners[c].push_back(u);
        }
    }
    return owners;
}

void load_row(std::span<const Index> support, const ClassSet& cs,
              const std::vector<std::vector<std::size_t>>& owners, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (Index c : support) {
        for (std::size_t u : owners[c]) {
            out[u] += 1.0;
        }
    }
    for (std::size_t u = 0; u < cs.k(); ++u) {
        out[u] /= static_cast<double>(cs.classes[u].size());
    }
}

}  // namespace

FeatureMatrix transform(const SparseBinaryMatrix& d, const ClassSet& cs) {
    if (d.n_cols() != cs.p) {
        throw ContractViolation("matrix has " + std::to_string(d.n_cols()) +
                                " columns but the class set expects p = " + std::to_string(cs.p));
    }
    const auto owners = invert(cs);
    FeatureMatrix f;
    f.n_rows = d.n_rows();
    f.k = cs.k();
    f.values.assign(f.n_rows * f.k, 0.0);
    parallel_for(f.n_rows, [&](std::size_t i) {
        load_row(d.row(i), cs, owners, std::span<double>(f.values.data() + i * f.k, f.k));
    });
    return f;
}

std::vector<double> transform_single(std::span<const Index> support, const ClassSet& cs) {
    for (Index c : support) {
        if (c >= cs.p) {
            throw ContractViolation("category index " + std::to_string(c) + " >= p");
        }
    }
    const auto owners = invert(cs);
    std::vector<double> out(cs.k());
    load_row(support, cs, owners, out);
    return out;
}

void write_features(std::ostream& out, const FeatureMatrix& f) {
    binary::write_magic(out, kFeatureMagic);
    binary::write_le<std::uint64_t>(out, f.n_rows);
    binary::write_le<std::uint64_t>(out, f.k);
    for (double v : f.values) {
        binary::write_le<double>(out, v);
    }
}

FeatureMatrix read_features(std::istream& in) {
    binary::expect_magic(in, kFeatureMagic);
    FeatureMatrix f;
    f.n_rows = binary::read_le<std::uint64_t>(in);
    f.k = binary::read_le<std::uint64_t>(in);
    f.values.resize(f.n_rows * f.k);
    for (double& v : f.values) {
        v = binary::read_le<double>(in);
    }
    return f;
}

void save_features(const std::string& path, const FeatureMatrix& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::data, "cannot write " + path);
    }
    write_features(out, f);
}

FeatureMatrix load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::data, "cannot read " + path);
    }
    return read_features(in);
}

void write_features_csv(std::ostream& out, const FeatureMatrix& f) {
    for (std::size_t u = 0; u < f.k; ++u) {
        out << (u ? "," : "") << "class_" << u;
    }
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < f.n_rows; ++i) {
        for (std::size_t u = 0; u < f.k; ++u) {
            std::snprintf(buf, sizeof buf, "%.17g", f(i, u));
            out << (u ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace covclust
