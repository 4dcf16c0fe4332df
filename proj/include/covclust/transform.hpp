#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covclust/classes.hpp"
#include "covclust/sparse_matrix.hpp"

namespace covclust {

/// Dense n x K matrix of class loadings, row-major.
struct FeatureMatrix {
    std::size_t n_rows = 0;
    std::size_t k = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t u) const { return values[i * k + u]; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * k, k}; }

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Entry (i, u) = |support(row i) n C_u| / |C_u|.
FeatureMatrix transform(const SparseBinaryMatrix& d, const ClassSet& cs);

/// Loadings of a single sorted support set; identical to one row of transform.
std::vector<double> transform_single(std::span<const Index> support, const ClassSet& cs);

inline constexpr std::string_view kFeatureMagic = "CVF1";

void write_features(std::ostream& out, const FeatureMatrix& f);
FeatureMatrix read_features(std::istream& in);
void save_features(const std::string& path, const FeatureMatrix& f);
FeatureMatrix load_features(const std::string& path);
void write_features_csv(std::ostream& out, const FeatureMatrix& f);

}  // namespace covclust
