#pragma once

#include "sparselets/image.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline std::filesystem::path data_dir() { return SPARSELETS_DATA_DIR; }
inline std::filesystem::path corpus_manifest() { return data_dir() / "corpus" / "manifest.txt"; }

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::path(SPARSELETS_SCRATCH_DIR) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline sparselets::Image random_image(int n, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sd);
    sparselets::Image img(n, n);
    for (double& v : img.values()) v = g(rng);
    return img;
}

inline double max_abs_diff(const sparselets::Image& a, const sparselets::Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace testing
