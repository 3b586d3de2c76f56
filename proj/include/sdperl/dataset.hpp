#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sdperl {

// Labeled numeric table: rows are files, columns are features, label is the
// binary defect flag (0 benign, 1 defective).
struct FeatureMatrix {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<std::string> source_ids;  // optional, empty or one per row

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_features() const { return feature_names.size(); }
    std::size_t count_label(int label) const;
};

struct SplitConfig {
    double eval_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct SplitResult {
    FeatureMatrix train;
    FeatureMatrix eval;
    std::uint64_t used_seed = 0;
};

// CSV I/O. UTF-8, comma separated, first line header, '.' decimal reals.
// A column named `id_column` (when present and distinct from the label
// column) is read into source_ids instead of the features.
FeatureMatrix load_feature_matrix(const std::filesystem::path& path,
                                  const std::string& label_column = "Bug",
                                  const std::string& id_column = "path");

void save_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path,
                         const std::string& label_column = "Bug",
                         const std::string& id_column = "path");

// Shuffle rows and split off round(eval_fraction * n) rows for evaluation,
// retrying with seed+1, seed+2, ... until the eval side contains at least one
// defective row. Row order within each side follows the input. The shuffle is
// a Fisher-Yates pass driven by Rng(derive_seed(seed, "split")).
SplitResult resplit_until_defective(const FeatureMatrix& matrix, const SplitConfig& cfg);

// SMOTE oversampling of the minority class up to an exact class balance.
// Each synthetic row is x_i + u * (x_nn - x_i) with u uniform in [0,1), x_i a
// random minority row and x_nn one of its k nearest minority neighbours in
// raw-feature Euclidean distance. k is clamped to minority size - 1.
FeatureMatrix smote_oversample(const FeatureMatrix& train, int k_neighbors, std::uint64_t seed);

// Persists train.csv + eval.csv + split.json (used_seed, eval_fraction).
void save_split(const SplitResult& split, double eval_fraction, const std::filesystem::path& dir,
                const std::string& label_column = "Bug");

}  // namespace sdperl
