#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "sdperl/embedder.hpp"
#include "sdperl/errors.hpp"
#include "support.hpp"

using sdperl::build_embeddings;
using sdperl::FeatureMatrix;
using sdperl::kmeans;
using sdperl::statistical_vectors;

namespace {

FeatureMatrix matrix_from_columns(const std::vector<std::vector<double>>& cols,
                                  const std::vector<int>& labels) {
    FeatureMatrix m;
    for (std::size_t c = 0; c < cols.size(); ++c) m.feature_names.push_back("f" + std::to_string(c));
    for (std::size_t r = 0; r < labels.size(); ++r) {
        std::vector<double> row(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) row[c] = cols[c][r];
        m.rows.push_back(std::move(row));
        m.labels.push_back(labels[r]);
    }
    return m;
}

double wcss(const Eigen::MatrixXd& pts, const std::vector<int>& labels, int k) {
    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(k, pts.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        centers.row(labels[static_cast<std::size_t>(i)]) += pts.row(i);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) /= counts[static_cast<std::size_t>(c)];
    }
    double s = 0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        s += (pts.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    return s;
}

}  // namespace

TEST_CASE("statistical vectors on two-point partitions") {
    const auto m = matrix_from_columns({{1, 3, 2, 2}}, {0, 0, 1, 1});
    const auto s = statistical_vectors(m);
    REQUIRE(s.size() == 1);
    CHECK(s[0].mean_benign == doctest::Approx(2.0));
    CHECK(s[0].var_benign == doctest::Approx(1.0));
    CHECK(s[0].mean_defective == doctest::Approx(2.0));
    CHECK(s[0].var_defective == doctest::Approx(0.0));
}

TEST_CASE("constant feature has zero variances and the constant as means") {
    const auto m = matrix_from_columns({{7, 7, 7, 7}}, {0, 1, 0, 1});
    const auto s = statistical_vectors(m);
    CHECK(s[0].mean_benign == 7.0);
    CHECK(s[0].mean_defective == 7.0);
    CHECK(s[0].var_benign == 0.0);
    CHECK(s[0].var_defective == 0.0);
}

TEST_CASE("statistical vectors match an independent two-pass oracle") {
    const auto m = testsupport::random_matrix(40, 5, 99);
    const auto s = statistical_vectors(m);
    for (std::size_t c = 0; c < 5; ++c) {
        for (int label = 0; label < 2; ++label) {
            std::vector<double> vals;
            for (std::size_t r = 0; r < m.n_rows(); ++r) {
                if (m.labels[r] == label) vals.push_back(m.rows[r][c]);
            }
            double mean = 0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0;
            for (double v : vals) var += (v - mean) * (v - mean);
            var /= static_cast<double>(vals.size());
            const double got_mean = label == 0 ? s[c].mean_benign : s[c].mean_defective;
            const double got_var = label == 0 ? s[c].var_benign : s[c].var_defective;
            CHECK(got_mean == doctest::Approx(mean).epsilon(1e-12));
            CHECK(got_var == doctest::Approx(var).epsilon(1e-12));
        }
    }
}

TEST_CASE("statistical vectors require both labels") {
    auto m = testsupport::random_matrix(6, 2, 1);
    for (auto& l : m.labels) l = 0;
    CHECK_THROWS_AS(statistical_vectors(m), sdperl::DataError);
}

TEST_CASE("kmeans separates two well-spaced groups") {
    Eigen::MatrixXd pts(4, 2);
    pts << 0, 0, 0, 1, 10, 10, 10, 11;
    const auto labels = kmeans(pts, 2, 5);
    CHECK(labels[0] == labels[1]);
    CHECK(labels[2] == labels[3]);
    CHECK(labels[0] != labels[2]);
}

TEST_CASE("kmeans with k equal to distinct points isolates every point") {
    Eigen::MatrixXd pts(5, 3);
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> d(-5, 5);
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) pts(i, j) = d(gen);
    }
    const auto labels = kmeans(pts, 5, 1);
    std::set<int> distinct(labels.begin(), labels.end());
    CHECK(distinct.size() == 5);
    CHECK(wcss(pts, labels, 5) == doctest::Approx(0.0));
}

TEST_CASE("kmeans rejects k above the distinct point count") {
    Eigen::MatrixXd pts(4, 2);
    pts << 1, 1, 1, 1, 2, 2, 2, 2;
    CHECK_THROWS_AS(kmeans(pts, 3, 0), sdperl::DataError);
}

TEST_CASE("kmeans beats 50 random assignments on wcss") {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> d(-3, 3);
    Eigen::MatrixXd pts(20, 4);
    for (Eigen::Index i = 0; i < 20; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) pts(i, j) = d(gen);
    }
    const auto labels = kmeans(pts, 3, 7);
    const double ours = wcss(pts, labels, 3);
    std::uniform_int_distribution<int> lab(0, 2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> random_labels(20);
        std::set<int> used;
        for (auto& l : random_labels) {
            l = lab(gen);
            used.insert(l);
        }
        if (used.size() < 3) continue;  // wcss with empty clusters is not comparable
        CHECK(ours <= wcss(pts, random_labels, 3) + 1e-9);
    }
}

TEST_CASE("embedding span 5..14 gives the 99-dimensional table") {
    const auto m = testsupport::synthetic_defects(60, 20, 5, 1.0, 0.3, 17);
    const auto table = build_embeddings(m, 5, 14, 3);
    CHECK(table.dim == 99);
    for (const auto& v : table.vectors) CHECK(v.size() == 99);
}

TEST_CASE("minimal range: dim 6 with exactly one hot slot per k-block") {
    const auto m = matrix_from_columns({{1, 2, 9, 4}, {5, 1, 2, 8}, {9, 9, 1, 1}}, {0, 0, 1, 1});
    const auto table = build_embeddings(m, 2, 2, 1);
    CHECK(table.dim == 6);
    for (const auto& v : table.vectors) {
        CHECK(v.head(2).sum() == doctest::Approx(1.0));
        CHECK((v(0) == 0.0 || v(0) == 1.0));
        CHECK((v(1) == 0.0 || v(1) == 1.0));
    }
}

TEST_CASE("features with identical statistics share an embedding") {
    const auto m = matrix_from_columns({{1, 2, 3, 4}, {1, 2, 3, 4}, {9, 0, 2, 7}}, {0, 0, 1, 1});
    const auto table = build_embeddings(m, 2, 2, 5);
    CHECK(table.vectors[0] == table.vectors[1]);
}

TEST_CASE("embedding dim follows 4 + sum k over random ranges") {
    std::mt19937 gen(23);
    const auto m = testsupport::synthetic_defects(50, 30, 4, 1.0, 0.3, 5);
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_int_distribution<int> lo(2, 6);
        std::uniform_int_distribution<int> len(0, 4);
        const int k_start = lo(gen);
        const int k_end = k_start + len(gen);
        const auto table = build_embeddings(m, k_start, k_end, static_cast<std::uint64_t>(trial));
        int expected = 4;
        for (int k = k_start; k <= k_end; ++k) expected += k;
        REQUIRE(table.dim == expected);
        for (const auto& v : table.vectors) {
            int offset = 0;
            for (int k = k_start; k <= k_end; ++k) {
                double block = 0;
                for (int j = 0; j < k; ++j) {
                    const double e = v(offset + j);
                    REQUIRE((e == 0.0 || e == 1.0));
                    block += e;
                }
                REQUIRE(block == 1.0);
                offset += k;
            }
        }
    }
}

TEST_CASE("embeddings are deterministic and permutation co-membership survives") {
    // Three clearly separated groups of statistic vectors.
    std::vector<std::vector<double>> cols;
    std::vector<int> labels = {0, 0, 0, 1, 1, 1};
    for (int g = 0; g < 3; ++g) {
        for (int rep = 0; rep < 3; ++rep) {
            std::vector<double> col(6);
            for (std::size_t r = 0; r < 6; ++r) {
                col[r] = 100.0 * g + static_cast<double>(r) + 0.01 * rep;
            }
            cols.push_back(col);
        }
    }
    const auto m = matrix_from_columns(cols, labels);
    const auto a = build_embeddings(m, 3, 3, 42);
    const auto b = build_embeddings(m, 3, 3, 42);
    for (std::size_t i = 0; i < a.vectors.size(); ++i) REQUIRE(a.vectors[i] == b.vectors[i]);

    // Reverse the feature order; co-membership per k must be preserved.
    std::vector<std::vector<double>> rev(cols.rbegin(), cols.rend());
    const auto p = build_embeddings(matrix_from_columns(rev, labels), 3, 3, 42);
    const std::size_t n = cols.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const bool same_a = a.cluster_labels[0][i] == a.cluster_labels[0][j];
            const bool same_p = p.cluster_labels[0][n - 1 - i] == p.cluster_labels[0][n - 1 - j];
            CHECK(same_a == same_p);
        }
    }
}

TEST_CASE("embedding manifest and csv are written") {
    testsupport::TempDir dir("embed_save");
    const auto m = testsupport::synthetic_defects(40, 10, 3, 1.0, 0.3, 9);
    const auto table = build_embeddings(m, 2, 4, 1);
    sdperl::save_embeddings(table, m.feature_names, dir.path / "emb.csv", dir.path / "emb.json");
    const auto manifest = testsupport::read_file(dir.path / "emb.json");
    CHECK(manifest.find("\"dim\": 13") != std::string::npos);
    CHECK(manifest.find("silhouette") != std::string::npos);
    const auto csv = testsupport::read_file(dir.path / "emb.csv");
    CHECK(csv.find("feature,v0") == 0);
}
