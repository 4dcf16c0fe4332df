#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "covclust/random.hpp"
#include "covclust/sparse_matrix.hpp"

namespace testing {

inline covclust::SparseBinaryMatrix random_matrix(covclust::Rng& rng, std::size_t n,
                                                  std::size_t p, double density) {
    std::vector<std::vector<covclust::Index>> rows(n);
    for (auto& r : rows) {
        for (std::size_t k = 0; k < p; ++k) {
            if (rng.bernoulli(density)) {
                r.push_back(static_cast<covclust::Index>(k));
            }
        }
    }
    return covclust::SparseBinaryMatrix(p, rows);
}

inline std::vector<covclust::Index> random_set(covclust::Rng& rng, std::size_t p, double density) {
    std::vector<covclust::Index> s;
    for (std::size_t k = 0; k < p; ++k) {
        if (rng.bernoulli(density)) {
            s.push_back(static_cast<covclust::Index>(k));
        }
    }
    return s;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("covclust_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testing
