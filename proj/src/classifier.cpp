#include "sdperl/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "sdperl/errors.hpp"

namespace sdperl {

double EvalMetrics::value(RewardMetric metric) const {
    switch (metric) {
        case RewardMetric::F1: return f1;
        case RewardMetric::Auc: return auc.value_or(0.0);
        case RewardMetric::Accuracy: return accuracy;
    }
    return f1;
}

namespace {

constexpr double kLambda = 1e-3;
constexpr int kSteps = 500;
constexpr double kLearningRate = 0.1;

void check_subset(const FeatureMatrix& m, const std::vector<int>& subset) {
    if (subset.empty()) throw ConfigError("feature subset must be non-empty");
    std::set<int> seen;
    for (int id : subset) {
        if (id < 0 || static_cast<std::size_t>(id) >= m.n_features()) {
            throw DataError("feature id " + std::to_string(id) + " out of range");
        }
        if (!seen.insert(id).second) {
            throw DataError("duplicate feature id " + std::to_string(id) + " in subset");
        }
    }
}

Eigen::MatrixXd select_standardized(const FeatureMatrix& m, const std::vector<int>& subset,
                                    const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
    const Eigen::Index n = static_cast<Eigen::Index>(m.n_rows());
    const Eigen::Index d = static_cast<Eigen::Index>(subset.size());
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
            x(r, c) = (m.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(subset[static_cast<std::size_t>(c)])] -
                       mean(c)) / sd(c);
        }
    }
    return x;
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
    return 1.0 / (1.0 + (-z.array()).exp());
}

}  // namespace

double TrainedClassifier::score_row(const std::vector<double>& full_row) const {
    const Eigen::Index d = static_cast<Eigen::Index>(feature_subset.size());
    double z = weights(d);  // bias
    for (Eigen::Index c = 0; c < d; ++c) {
        const double v =
            (full_row[static_cast<std::size_t>(feature_subset[static_cast<std::size_t>(c)])] - mean(c)) /
            stddev(c);
        z += weights(c) * v;
    }
    return 1.0 / (1.0 + std::exp(-z));
}

TrainedClassifier train_classifier(const FeatureMatrix& train, const std::vector<int>& subset,
                                   std::uint64_t /*seed*/, ClassifierFamily family) {
    if (family != ClassifierFamily::Logistic) {
        throw ConfigError("unsupported classifier family");
    }
    check_subset(train, subset);
    const std::size_t n_def = train.count_label(1);
    if (n_def == 0 || n_def == train.n_rows()) {
        throw DataError("training split must contain both labels");
    }

    const Eigen::Index n = static_cast<Eigen::Index>(train.n_rows());
    const Eigen::Index d = static_cast<Eigen::Index>(subset.size());

    TrainedClassifier clf;
    clf.feature_subset = subset;
    clf.mean = Eigen::VectorXd::Zero(d);
    clf.stddev = Eigen::VectorXd::Ones(d);
    for (Eigen::Index c = 0; c < d; ++c) {
        double s = 0;
        for (std::size_t r = 0; r < train.n_rows(); ++r) {
            s += train.rows[r][static_cast<std::size_t>(subset[static_cast<std::size_t>(c)])];
        }
        const double mu = s / static_cast<double>(n);
        double v = 0;
        for (std::size_t r = 0; r < train.n_rows(); ++r) {
            const double diff = train.rows[r][static_cast<std::size_t>(subset[static_cast<std::size_t>(c)])] - mu;
            v += diff * diff;
        }
        clf.mean(c) = mu;
        const double sd = std::sqrt(v / static_cast<double>(n));
        // Near-constant columns keep sd 1 so rounding noise is not amplified.
        double scale = 1.0;
        for (std::size_t r = 0; r < train.n_rows(); ++r) {
            scale = std::max(scale,
                             std::abs(train.rows[r][static_cast<std::size_t>(subset[static_cast<std::size_t>(c)])]));
        }
        if (sd > 1e-12 * scale) clf.stddev(c) = sd;
    }

    const Eigen::MatrixXd x = select_standardized(train, subset, clf.mean, clf.stddev);
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) y(r) = train.labels[static_cast<std::size_t>(r)];

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int step = 0; step < kSteps; ++step) {
        const Eigen::VectorXd p = sigmoid(x * w + Eigen::VectorXd::Constant(n, b));
        const Eigen::VectorXd err = p - y;
        const Eigen::VectorXd gw = x.transpose() * err * inv_n + kLambda * w;
        const double gb = err.sum() * inv_n;
        w -= kLearningRate * gw;
        b -= kLearningRate * gb;
    }

    clf.weights = Eigen::VectorXd(d + 1);
    clf.weights.head(d) = w;
    clf.weights(d) = b;
    return clf;
}

EvalMetrics evaluate(const TrainedClassifier& clf, const FeatureMatrix& eval) {
    if (eval.n_rows() == 0) throw DataError("evaluation split is empty");

    std::vector<double> scores(eval.n_rows());
    for (std::size_t r = 0; r < eval.n_rows(); ++r) scores[r] = clf.score_row(eval.rows[r]);

    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t r = 0; r < eval.n_rows(); ++r) {
        const bool pred = scores[r] >= 0.5;
        const bool truth = eval.labels[r] == 1;
        if (pred && truth) ++tp;
        else if (pred && !truth) ++fp;
        else if (!pred && truth) ++fn;
        else ++tn;
    }

    EvalMetrics m;
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(eval.n_rows());
    const std::size_t pos = eval.count_label(1);
    if (pos > 0 && pos < eval.n_rows()) m.auc = auc_score(eval.labels, scores);
    return m;
}

double auc_score(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size()) throw ConfigError("labels/scores length mismatch");
    const std::size_t n = labels.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l == 1 ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("AUC needs both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks over tie groups, 1-based.
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
        i = j + 1;
    }

    double rank_sum_pos = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] == 1) rank_sum_pos += rank[r];
    }
    const double np = static_cast<double>(n_pos);
    return (rank_sum_pos - np * (np + 1) / 2.0) / (np * static_cast<double>(n_neg));
}

void save_model(const TrainedClassifier& clf, const std::vector<std::string>& feature_names,
                const std::filesystem::path& path) {
    nlohmann::json j;
    j["family"] = "logistic";
    j["feature_ids"] = clf.feature_subset;
    nlohmann::json names = nlohmann::json::array();
    for (int id : clf.feature_subset) {
        names.push_back(static_cast<std::size_t>(id) < feature_names.size()
                            ? feature_names[static_cast<std::size_t>(id)]
                            : "f" + std::to_string(id));
    }
    j["feature_names"] = names;
    j["weights"] = std::vector<double>(clf.weights.data(), clf.weights.data() + clf.weights.size());
    j["mean"] = std::vector<double>(clf.mean.data(), clf.mean.data() + clf.mean.size());
    j["stddev"] = std::vector<double>(clf.stddev.data(), clf.stddev.data() + clf.stddev.size());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model: " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace sdperl
