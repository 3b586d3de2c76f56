#include "sdperl/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "sdperl/errors.hpp"
#include "sdperl/io_util.hpp"
#include "sdperl/rng.hpp"

namespace sdperl {

std::vector<StatVector> statistical_vectors(const FeatureMatrix& train) {
    const std::size_t n_def = train.count_label(1);
    const std::size_t n_ben = train.n_rows() - n_def;
    if (n_def == 0 || n_ben == 0) {
        throw DataError("statistical vectors need both labels in the training split");
    }

    const std::size_t f = train.n_features();
    std::vector<StatVector> out(f);
    // Two-pass mean/variance per label partition.
    std::vector<double> sum0(f, 0), sum1(f, 0);
    for (std::size_t r = 0; r < train.n_rows(); ++r) {
        auto& sum = train.labels[r] == 1 ? sum1 : sum0;
        for (std::size_t c = 0; c < f; ++c) sum[c] += train.rows[r][c];
    }
    for (std::size_t c = 0; c < f; ++c) {
        out[c].mean_benign = sum0[c] / static_cast<double>(n_ben);
        out[c].mean_defective = sum1[c] / static_cast<double>(n_def);
    }
    for (std::size_t r = 0; r < train.n_rows(); ++r) {
        const bool def = train.labels[r] == 1;
        for (std::size_t c = 0; c < f; ++c) {
            const double d = train.rows[r][c] - (def ? out[c].mean_defective : out[c].mean_benign);
            (def ? out[c].var_defective : out[c].var_benign) += d * d;
        }
    }
    for (std::size_t c = 0; c < f; ++c) {
        out[c].var_benign /= static_cast<double>(n_ben);
        out[c].var_defective /= static_cast<double>(n_def);
    }
    return out;
}

namespace {

std::size_t count_distinct_rows(const Eigen::MatrixXd& points) {
    std::set<std::vector<double>> seen;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        std::vector<double> row(points.cols());
        for (Eigen::Index j = 0; j < points.cols(); ++j) row[static_cast<std::size_t>(j)] = points(i, j);
        seen.insert(std::move(row));
    }
    return seen.size();
}

int nearest_center(const Eigen::MatrixXd& centers, const Eigen::RowVectorXd& p) {
    int best = 0;
    double best_d = (centers.row(0) - p).squaredNorm();
    for (Eigen::Index c = 1; c < centers.rows(); ++c) {
        const double d = (centers.row(c) - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace

std::vector<int> kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
    const Eigen::Index n = points.rows();
    if (k < 1) throw ConfigError("kmeans: k must be positive");
    if (static_cast<std::size_t>(k) > count_distinct_rows(points)) {
        throw DataError("kmeans: k=" + std::to_string(k) + " exceeds the number of distinct points");
    }

    Rng rng(seed);
    Eigen::MatrixXd centers(k, points.cols());

    // k-means++ seeding.
    centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < c; ++j) best = std::min(best, (points.row(i) - centers.row(j)).squaredNorm());
            d2[static_cast<std::size_t>(i)] = best;
            total += best;
        }
        Eigen::Index pick;
        if (total > 0.0) pick = static_cast<Eigen::Index>(rng.weighted_index(d2));
        else pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        centers.row(c) = points.row(pick);
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < 300; ++iter) {
        // Assignment (ties to the lowest center id).
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = nearest_center(centers, points.row(i));
            if (c != labels[static_cast<std::size_t>(i)]) {
                labels[static_cast<std::size_t>(i)] = c;
                changed = true;
            }
        }

        // Reseed empty clusters with the globally farthest point.
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int l : labels) ++counts[static_cast<std::size_t>(l)];
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
                if (d > far_d && counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] > 1) {
                    far_d = d;
                    far = i;
                }
            }
            --counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
            labels[static_cast<std::size_t>(far)] = c;
            ++counts[static_cast<std::size_t>(c)];
            centers.row(c) = points.row(far);
            changed = true;
        }

        if (!changed && iter > 0) break;

        // Center update.
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
        for (Eigen::Index i = 0; i < n; ++i) sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
            }
        }
    }
    return labels;
}

namespace {

// Mean silhouette over all points; singleton clusters contribute 0.
double silhouette_score(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k) {
    const Eigen::Index n = points.rows();
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int li = labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(li)] <= 1) continue;  // contributes 0
        std::vector<double> mean_d(static_cast<std::size_t>(k), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            mean_d[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] +=
                (points.row(i) - points.row(j)).norm();
        }
        double a = mean_d[static_cast<std::size_t>(li)] / (counts[static_cast<std::size_t>(li)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == li || counts[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, mean_d[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)]);
        }
        if (std::isfinite(b) && std::max(a, b) > 0) total += (b - a) / std::max(a, b);
    }
    return n > 0 ? total / static_cast<double>(n) : 0.0;
}

}  // namespace

EmbeddingTable build_embeddings(const FeatureMatrix& train, int k_start, int k_end,
                                std::uint64_t seed, bool standardize) {
    if (k_start < 2 || k_start > k_end) {
        throw ConfigError("embedding range requires 2 <= k_start <= k_end");
    }
    const std::size_t f = train.n_features();
    if (static_cast<std::size_t>(k_end) > f) {
        throw ConfigError("k_end exceeds the feature count");
    }

    const std::vector<StatVector> stats = statistical_vectors(train);
    Eigen::MatrixXd raw(f, 4);
    for (std::size_t i = 0; i < f; ++i) {
        raw(static_cast<Eigen::Index>(i), 0) = stats[i].mean_benign;
        raw(static_cast<Eigen::Index>(i), 1) = stats[i].var_benign;
        raw(static_cast<Eigen::Index>(i), 2) = stats[i].mean_defective;
        raw(static_cast<Eigen::Index>(i), 3) = stats[i].var_defective;
    }

    Eigen::MatrixXd cluster_input = raw;
    if (standardize) {
        for (Eigen::Index c = 0; c < 4; ++c) {
            const double mean = cluster_input.col(c).mean();
            const double var = (cluster_input.col(c).array() - mean).square().mean();
            const double sd = std::sqrt(var);
            // A column that is constant up to rounding must not be rescaled:
            // dividing by a noise-level sd would blow rounding error up to
            // full-scale coordinates.
            const double scale = std::max(1.0, cluster_input.col(c).cwiseAbs().maxCoeff());
            if (sd > 1e-12 * scale) {
                cluster_input.col(c) = (cluster_input.col(c).array() - mean) / sd;
            }
        }
    }

    EmbeddingTable table;
    table.k_start = k_start;
    table.k_end = k_end;
    table.standardized_stats = standardize;
    int one_hot_dim = 0;
    for (int k = k_start; k <= k_end; ++k) one_hot_dim += k;
    table.dim = one_hot_dim + 4;

    table.vectors.assign(f, Eigen::VectorXd::Zero(table.dim));
    int offset = 0;
    for (int k = k_start; k <= k_end; ++k) {
        const std::vector<int> labels =
            kmeans(cluster_input, k, derive_seed(seed, "kmeans_k" + std::to_string(k)));
        for (std::size_t i = 0; i < f; ++i) {
            table.vectors[i](offset + labels[i]) = 1.0;
        }
        table.silhouettes.push_back(silhouette_score(cluster_input, labels, k));
        table.cluster_labels.push_back(labels);
        offset += k;
    }
    for (std::size_t i = 0; i < f; ++i) {
        table.vectors[i].tail(4) = raw.row(static_cast<Eigen::Index>(i)).transpose();
    }
    return table;
}

void save_embeddings(const EmbeddingTable& table, const std::vector<std::string>& feature_names,
                     const std::filesystem::path& csv_path, const std::filesystem::path& manifest_path) {
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write embeddings: " + csv_path.string());
    out << "feature";
    for (int d = 0; d < table.dim; ++d) out << ",v" << d;
    out << '\n';
    for (std::size_t i = 0; i < table.vectors.size(); ++i) {
        out << (i < feature_names.size() ? feature_names[i] : "f" + std::to_string(i));
        for (int d = 0; d < table.dim; ++d) out << ',' << format_double(table.vectors[i](d));
        out << '\n';
    }

    nlohmann::json manifest;
    manifest["dim"] = table.dim;
    manifest["k_start"] = table.k_start;
    manifest["k_end"] = table.k_end;
    manifest["standardized_stats"] = table.standardized_stats;
    nlohmann::json sil = nlohmann::json::object();
    for (std::size_t i = 0; i < table.silhouettes.size(); ++i) {
        sil["k" + std::to_string(table.k_start + static_cast<int>(i))] = table.silhouettes[i];
    }
    manifest["silhouette"] = sil;
    std::ofstream mout(manifest_path);
    if (!mout) throw DataError("cannot write manifest: " + manifest_path.string());
    mout << manifest.dump(2) << '\n';
}

}  // namespace sdperl
