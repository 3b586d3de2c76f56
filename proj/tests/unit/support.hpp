#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

#include "sdperl/dataset.hpp"

namespace testsupport {

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("sdperl_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Random labeled matrix; labels alternate to keep both classes present.
inline sdperl::FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    sdperl::FeatureMatrix m;
    for (std::size_t c = 0; c < cols; ++c) m.feature_names.push_back("f" + std::to_string(c));
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> row(cols);
        for (auto& v : row) v = dist(gen);
        m.rows.push_back(std::move(row));
        m.labels.push_back(static_cast<int>(r % 2));
    }
    return m;
}

// Planted-signal dataset: the first `informative` features get a
// class-conditional mean shift of `shift` standard deviations.
inline sdperl::FeatureMatrix synthetic_defects(std::size_t rows, std::size_t cols,
                                               std::size_t informative, double shift,
                                               double defect_rate, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    sdperl::FeatureMatrix m;
    for (std::size_t c = 0; c < cols; ++c) m.feature_names.push_back("f" + std::to_string(c));
    for (std::size_t r = 0; r < rows; ++r) {
        const int label = unif(gen) < defect_rate ? 1 : 0;
        std::vector<double> row(cols);
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] = noise(gen) + (label == 1 && c < informative ? shift : 0.0);
        }
        m.rows.push_back(std::move(row));
        m.labels.push_back(label);
    }
    // ensure both classes exist
    m.labels[0] = 0;
    m.labels[1] = 1;
    return m;
}

}  // namespace testsupport
