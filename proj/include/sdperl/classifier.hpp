#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sdperl/dataset.hpp"

namespace sdperl {

enum class ClassifierFamily { Logistic };
enum class RewardMetric { F1, Auc, Accuracy };

// Defective (label 1) is the positive class throughout.
struct EvalMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double accuracy = 0;
    std::optional<double> auc;  // undefined when the eval split is single-class

    double value(RewardMetric metric) const;
};

struct TrainedClassifier {
    std::vector<int> feature_subset;  // ordered distinct ids into the full feature space
    Eigen::VectorXd weights;          // one per subset feature, bias last
    Eigen::VectorXd mean;             // training-split standardization
    Eigen::VectorXd stddev;           // zero-variance columns keep sd 1

    double score_row(const std::vector<double>& full_row) const;  // sigmoid output
};

// L2-regularized logistic regression (lambda 1e-3, bias unregularized) fit by
// 500 full-batch gradient-descent steps at learning rate 0.1 from zero
// weights, on z-scored selected columns. The fit is deterministic; `seed` is
// accepted for interface stability with stochastic families.
TrainedClassifier train_classifier(const FeatureMatrix& train, const std::vector<int>& subset,
                                   std::uint64_t seed = 0,
                                   ClassifierFamily family = ClassifierFamily::Logistic);

// Hard predictions at threshold 0.5 (score >= 0.5 is defective).
EvalMetrics evaluate(const TrainedClassifier& clf, const FeatureMatrix& eval);

// Mann-Whitney AUC: (concordant + 0.5 * tied) / (n_pos * n_neg), computed via
// average ranks. Requires both classes.
double auc_score(const std::vector<int>& labels, const std::vector<double>& scores);

// Persists weights + subset as JSON (model.json layout).
void save_model(const TrainedClassifier& clf, const std::vector<std::string>& feature_names,
                const std::filesystem::path& path);

}  // namespace sdperl
