#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "covclust/sparse_matrix.hpp"

// Generators for planted test data.
namespace covclust::synthetic {

struct PlantedSpec {
    std::size_t n = 2000;
    std::size_t p = 500;
    std::size_t classes = 10;
    std::size_t block = 50;       // categories per planted class
    double activation = 0.3;      // P(user uses a category of its own class)
    double noise = 0.005;         // P(user uses any other category)
    std::uint64_t seed = 1;
};

struct PlantedData {
    SparseBinaryMatrix matrix;
    std::vector<std::size_t> labels;         // planted group of each user
    std::vector<std::vector<Index>> blocks;  // planted class contents
};

/// User i belongs to group i mod classes; class g owns columns
/// [g*block, (g+1)*block). Columns beyond classes*block are noise only.
PlantedData planted_blocks(const PlantedSpec& spec);

struct HeavyTailSpec {
    std::size_t n = 2000;
    std::size_t p = 500;
    std::size_t groups = 10;
    double exponent = 1.1;      // Zipf exponent of category popularity
    double mean_items = 12.0;   // mean items per user (geometric, at least 1)
    double own_share = 0.8;     // chance an item comes from the user's own block
    std::uint64_t seed = 1;
};

/// Users draw items from a Zipf-weighted block of their own group, mixed with
/// draws from a global Zipf ranking over all p categories.
PlantedData heavy_tailed(const HeavyTailSpec& spec);

}  // namespace covclust::synthetic
