#include "sdperl/environment.hpp"

#include <cmath>
#include <limits>

#include "sdperl/errors.hpp"

namespace sdperl {

Environment::Environment(StateMode mode, int capacity, const FeatureMatrix& train,
                         const FeatureMatrix& eval, const EmbeddingTable* embeddings,
                         PheromoneTable* pheromone, RewardMetric metric, double pheromone_temperature)
    : mode_(mode),
      capacity_(capacity),
      train_(train),
      eval_(eval),
      embeddings_(embeddings),
      pheromone_(pheromone),
      metric_(metric),
      temperature_(pheromone_temperature),
      n_features_(static_cast<int>(train.n_features())) {
    if (capacity_ < 1) throw ConfigError("episode capacity must be positive");
    if (capacity_ > n_features_) {
        throw ConfigError("episode capacity exceeds the feature count");
    }
    if (train_.n_features() != eval_.n_features()) {
        throw DataError("train and eval splits disagree on the feature space");
    }
    if (mode_ == StateMode::Custom) {
        if (!embeddings_ || embeddings_->vectors.size() != train.n_features()) {
            throw ConfigError("Custom mode needs an embedding table covering every feature");
        }
        slot_dim_ = embeddings_->dim;
    } else {
        slot_dim_ = n_features_;
    }
}

int Environment::seeded_per_episode() const {
    return pheromone_ ? capacity_ / 3 : 0;
}

Eigen::VectorXd Environment::slot_vector(int feature_id) const {
    if (mode_ == StateMode::Custom) {
        return embeddings_->vectors[static_cast<std::size_t>(feature_id)];
    }
    Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(n_features_);
    one_hot(feature_id) = 1.0;
    return one_hot;
}

double Environment::oracle_score(const std::vector<int>& subset, EvalMetrics* metrics_out) const {
    const TrainedClassifier clf = train_classifier(train_, subset);
    const EvalMetrics metrics = evaluate(clf, eval_);
    if (metrics_out) *metrics_out = metrics;
    return metrics.value(metric_);
}

EpisodeState Environment::reset(Rng& rng) {
    EpisodeState state;
    state.mode = mode_;
    state.capacity = capacity_;
    state.slots = Eigen::MatrixXd::Zero(capacity_, slot_dim_);
    state.seeded_count = 0;
    state.prev_cumulative = 0.0;

    if (pheromone_) {
        const int seeded = seeded_per_episode();
        if (seeded > 0) {
            state.selected_ids = pheromone_->sample_seed_features(seeded, rng, temperature_);
            state.seeded_count = seeded;
            for (int i = 0; i < seeded; ++i) {
                state.slots.row(i) = slot_vector(state.selected_ids[static_cast<std::size_t>(i)]);
            }
            // Seed quality is the CR baseline, so the first agent step is
            // credited only with its own improvement.
            state.prev_cumulative = oracle_score(state.selected_ids, nullptr);
        }
    }
    return state;
}

int Environment::resolve_action(const Eigen::VectorXd& action, const EpisodeState& state) const {
    if (state.done()) throw DataError("all features are already selected");
    if (action.size() != slot_dim_) {
        throw ConfigError("action dimension " + std::to_string(action.size()) + " does not match " +
                          std::to_string(slot_dim_));
    }

    std::vector<bool> selected(static_cast<std::size_t>(n_features_), false);
    for (int id : state.selected_ids) selected[static_cast<std::size_t>(id)] = true;

    int best = -1;
    if (mode_ == StateMode::Custom) {
        double best_d = std::numeric_limits<double>::infinity();
        for (int id = 0; id < n_features_; ++id) {
            if (selected[static_cast<std::size_t>(id)]) continue;
            const double d =
                (embeddings_->vectors[static_cast<std::size_t>(id)] - action).squaredNorm();
            if (d < best_d) {  // ties keep the lower id
                best_d = d;
                best = id;
            }
        }
    } else {
        double best_score = -std::numeric_limits<double>::infinity();
        for (int id = 0; id < n_features_; ++id) {
            if (selected[static_cast<std::size_t>(id)]) continue;
            if (action(id) > best_score) {  // ties keep the lower id
                best_score = action(id);
                best = id;
            }
        }
    }
    return best;
}

StepOutcome Environment::step(EpisodeState& state, const Eigen::VectorXd& action) {
    const int feature_id = resolve_action(action, state);

    state.slots.row(state.filled()) = slot_vector(feature_id);
    state.selected_ids.push_back(feature_id);

    StepOutcome out;
    out.feature_id = feature_id;
    try {
        out.cumulative = oracle_score(state.selected_ids, &out.metrics);
    } catch (const std::exception& e) {
        throw DataError("classifier oracle failed at timestep " + std::to_string(timestep_ + 1) +
                        " (episode " + std::to_string(episode_) + ", feature " +
                        std::to_string(feature_id) + "): " + e.what());
    }
    out.td_reward = out.cumulative - state.prev_cumulative;
    out.done = state.done();
    state.prev_cumulative = out.cumulative;

    if (pheromone_) pheromone_->update(feature_id, out.td_reward);

    ++timestep_;
    log_.push_back({timestep_, episode_, feature_id, out.td_reward, out.cumulative, out.metrics.f1,
                    out.metrics.auc.value_or(std::numeric_limits<double>::quiet_NaN())});
    return out;
}

}  // namespace sdperl
