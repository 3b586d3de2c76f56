#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "sdperl/dataset.hpp"

namespace sdperl {

// Per-feature label-conditional statistics (population variance).
struct StatVector {
    double mean_benign = 0;
    double var_benign = 0;
    double mean_defective = 0;
    double var_defective = 0;
};

// One representation vector per feature: the one-hot cluster codes for every
// k in [k_start, k_end], then the raw 4-entry statistic vector.
struct EmbeddingTable {
    std::vector<Eigen::VectorXd> vectors;
    int dim = 0;
    int k_start = 0;
    int k_end = 0;
    bool standardized_stats = true;
    std::vector<std::vector<int>> cluster_labels;  // per k, per feature (audit)
    std::vector<double> silhouettes;               // per k
};

std::vector<StatVector> statistical_vectors(const FeatureMatrix& train);

// Lloyd's algorithm, k-means++ seeding, at most 300 iterations, empty
// clusters reseeded to the point farthest from its assigned center.
// Points are the rows of `points`; returns one label in [0,k) per row.
std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed);

// Clustering runs on z-scored statistic vectors when `standardize` is set
// (the stored tail of each embedding is always the raw statistics).
EmbeddingTable build_embeddings(const FeatureMatrix& train, int k_start, int k_end,
                                std::uint64_t seed, bool standardize = true);

// One CSV row per feature plus a JSON manifest (dim, range, seed,
// standardization flag, per-k silhouette).
void save_embeddings(const EmbeddingTable& table, const std::vector<std::string>& feature_names,
                     const std::filesystem::path& csv_path, const std::filesystem::path& manifest_path);

}  // namespace sdperl
