#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdperl/agent.hpp"
#include "sdperl/classifier.hpp"
#include "sdperl/dataset.hpp"
#include "sdperl/embedder.hpp"
#include "sdperl/environment.hpp"
#include "sdperl/pheromone.hpp"
#include "sdperl/stats.hpp"

namespace sdperl {

enum class PheromoneMode { Vanilla, Pheromone, PheromoneBestAction };

struct ExperimentConfig {
    StateMode mode = StateMode::Custom;
    PheromoneMode pheromone_mode = PheromoneMode::Vanilla;
    int m = 20;
    long timesteps = 30000;
    int k_start = 5;
    int k_end = 14;
    std::uint64_t seed = 0;
    double eval_fraction = 0.2;
    int smote_k = 5;
    std::string train_csv;
    std::string test_csv;
    std::string out_dir;
    std::string label_column = "Bug";
    ClassifierFamily classifier = ClassifierFamily::Logistic;
    RewardMetric metric = RewardMetric::F1;
    bool standardize_stats = true;
    double pheromone_temperature = 0.05;
    int hidden_dim = 16;
    int num_layers = 4;
    int num_heads = 4;
    std::string resume_checkpoint;

    void validate() const;  // throws ConfigError on static violations
};

ExperimentConfig config_from_json_file(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

struct EpisodeRecord {
    std::vector<int> subset;
    double score = 0;  // end-of-episode evaluation score (the CR signal)
};

struct RunReport {
    ExperimentConfig config;
    std::vector<std::string> feature_names;
    std::vector<EpisodeRecord> history;
    std::vector<double> episode_scores;
    std::vector<int> best_subset;
    double best_score = 0;
    std::vector<int> test_subset;  // per pheromone_mode selection
    EvalMetrics final_metrics;     // later-version test evaluation
    TrainedClassifier final_classifier;
    PheromoneTable pheromone{1};
    std::vector<LogRow> training_log;
    Policy policy{};
    std::uint64_t split_seed = 0;
    double wall_clock_seconds = 0;
};

// Algorithm-1 pipeline end to end: load, resplit, SMOTE, (Custom) embed,
// train the PPO agent for the timestep budget while tracking the best
// episode, then select the test-time subset, fit the final classifier on the
// SMOTE-balanced full earlier-version data and score the later version.
RunReport run_experiment(const ExperimentConfig& cfg);

std::vector<int> select_test_features(PheromoneMode mode, const PheromoneTable& table,
                                      const std::vector<EpisodeRecord>& history, int m);

// Pooled-variance two-sample t-test over the groups' best scores.
TTestResult compare_settings(const std::vector<RunReport>& a, const std::vector<RunReport>& b);
TTestResult compare_run_dirs(const std::vector<std::filesystem::path>& a,
                             const std::vector<std::filesystem::path>& b);

struct SweepRow {
    int m = 0;
    double best_score = 0;
    EvalMetrics metrics;
};

// One run per distinct M (duplicates dropped with a warning), each with a
// seed derived from the base seed and M.
std::vector<SweepRow> sweep_feature_count(const ExperimentConfig& base, const std::vector<int>& m_values);

void emit_report(const RunReport& report, const std::filesystem::path& dir);
void emit_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& dir);

// Single-polyline SVG chart, deterministic output.
void write_line_chart_svg(const std::filesystem::path& path, const std::vector<double>& ys,
                          const std::string& title);

}  // namespace sdperl
