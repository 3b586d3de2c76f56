#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sdperl/classifier.hpp"
#include "sdperl/dataset.hpp"
#include "sdperl/embedder.hpp"
#include "sdperl/pheromone.hpp"
#include "sdperl/rng.hpp"

namespace sdperl {

enum class StateMode { Simple, Custom };

// Ordered set of selected feature representations, zero rows past the filled
// prefix. In Simple mode slot vectors are feature one-hots; in Custom mode
// they are the embedding-table rows.
struct EpisodeState {
    StateMode mode = StateMode::Custom;
    int capacity = 0;
    Eigen::MatrixXd slots;  // capacity x slot_dim
    std::vector<int> selected_ids;
    int seeded_count = 0;
    double prev_cumulative = 0;  // CR_{t-1}

    int filled() const { return static_cast<int>(selected_ids.size()); }
    bool done() const { return filled() == capacity; }
};

struct StepOutcome {
    int feature_id = -1;
    double td_reward = 0;   // R_t = CR_t - CR_{t-1}
    double cumulative = 0;  // CR_t
    bool done = false;
    EvalMetrics metrics;
};

struct LogRow {
    long timestep = 0;
    long episode = 0;
    int feature_id = -1;
    double td_reward = 0;
    double cumulative = 0;
    double f1 = 0;
    double auc = 0;  // NaN when undefined
};

// One environment per training run. Steps are strictly sequential: resolve
// the action to a concrete unselected feature, retrain the classifier oracle
// on the grown subset, evaluate, and emit the TD reward. When a pheromone
// table is attached, episodes are seeded from it and agent-selected steps
// update it.
class Environment {
  public:
    Environment(StateMode mode, int capacity, const FeatureMatrix& train, const FeatureMatrix& eval,
                const EmbeddingTable* embeddings, PheromoneTable* pheromone,
                RewardMetric metric = RewardMetric::F1, double pheromone_temperature = 0.05);

    EpisodeState reset(Rng& rng);
    int resolve_action(const Eigen::VectorXd& action, const EpisodeState& state) const;
    StepOutcome step(EpisodeState& state, const Eigen::VectorXd& action);

    int slot_dim() const { return slot_dim_; }
    int n_features() const { return n_features_; }
    int seeded_per_episode() const;
    int agent_steps_per_episode() const { return capacity_ - seeded_per_episode(); }
    const std::vector<LogRow>& log() const { return log_; }
    void set_episode_index(long episode) { episode_ = episode; }

  private:
    Eigen::VectorXd slot_vector(int feature_id) const;
    double oracle_score(const std::vector<int>& subset, EvalMetrics* metrics_out) const;

    StateMode mode_;
    int capacity_;
    const FeatureMatrix& train_;
    const FeatureMatrix& eval_;
    const EmbeddingTable* embeddings_;
    PheromoneTable* pheromone_;
    RewardMetric metric_;
    double temperature_;
    int n_features_;
    int slot_dim_;
    long timestep_ = 0;
    long episode_ = 0;
    std::vector<LogRow> log_;
};

}  // namespace sdperl
