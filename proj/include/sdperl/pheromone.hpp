#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdperl/rng.hpp"

namespace sdperl {

// Per-feature quality evidence: cumulative TD reward and selection count.
// The derived average cum_reward / count is the pheromone level; no
// evaporation is applied.
class PheromoneTable {
  public:
    explicit PheromoneTable(int n_features);

    int size() const { return static_cast<int>(cum_reward_.size()); }
    void update(int feature_id, double td_reward);
    double cum_reward(int feature_id) const;
    long count(int feature_id) const;
    double total_reward() const;

    // cum_reward / count, or nullopt while the feature has no evidence.
    std::optional<double> average_level(int feature_id) const;

    // `count` distinct ids. Features with evidence are drawn without
    // replacement with probability proportional to
    // softmax(normalized average / temperature) where averages are min-max
    // normalized; any remaining slots are filled uniformly from the
    // unvisited features.
    std::vector<int> sample_seed_features(int count, Rng& rng, double temperature = 0.05) const;

    // Ids of the k largest averages, no-evidence treated as -inf, ties to the
    // lower id.
    std::vector<int> top_k(int k) const;

    void save_csv(const std::filesystem::path& path, const std::vector<std::string>& names) const;

  private:
    void check_id(int feature_id) const;

    std::vector<double> cum_reward_;
    std::vector<long> count_;
};

}  // namespace sdperl
