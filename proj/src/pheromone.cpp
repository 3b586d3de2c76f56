#include "sdperl/pheromone.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "sdperl/errors.hpp"
#include "sdperl/io_util.hpp"

namespace sdperl {

PheromoneTable::PheromoneTable(int n_features) {
    if (n_features < 1) throw ConfigError("pheromone table needs at least one feature");
    cum_reward_.assign(static_cast<std::size_t>(n_features), 0.0);
    count_.assign(static_cast<std::size_t>(n_features), 0);
}

void PheromoneTable::check_id(int feature_id) const {
    if (feature_id < 0 || feature_id >= size()) {
        throw DataError("feature id " + std::to_string(feature_id) + " out of range [0, " +
                        std::to_string(size()) + ")");
    }
}

void PheromoneTable::update(int feature_id, double td_reward) {
    check_id(feature_id);
    cum_reward_[static_cast<std::size_t>(feature_id)] += td_reward;
    ++count_[static_cast<std::size_t>(feature_id)];
}

double PheromoneTable::cum_reward(int feature_id) const {
    check_id(feature_id);
    return cum_reward_[static_cast<std::size_t>(feature_id)];
}

long PheromoneTable::count(int feature_id) const {
    check_id(feature_id);
    return count_[static_cast<std::size_t>(feature_id)];
}

double PheromoneTable::total_reward() const {
    return std::accumulate(cum_reward_.begin(), cum_reward_.end(), 0.0);
}

std::optional<double> PheromoneTable::average_level(int feature_id) const {
    check_id(feature_id);
    const std::size_t i = static_cast<std::size_t>(feature_id);
    if (count_[i] == 0) return std::nullopt;
    return cum_reward_[i] / static_cast<double>(count_[i]);
}

std::vector<int> PheromoneTable::sample_seed_features(int count, Rng& rng, double temperature) const {
    if (count < 1) throw ConfigError("seed feature count must be positive");
    if (count > size()) {
        throw DataError("cannot sample " + std::to_string(count) + " distinct features from " +
                        std::to_string(size()));
    }
    if (temperature <= 0) throw ConfigError("temperature must be positive");

    std::vector<int> visited, unvisited;
    for (int i = 0; i < size(); ++i) {
        (count_[static_cast<std::size_t>(i)] > 0 ? visited : unvisited).push_back(i);
    }

    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));

    if (!visited.empty()) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int i : visited) {
            const double a = *average_level(i);
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
        std::vector<double> weights(visited.size());
        for (std::size_t j = 0; j < visited.size(); ++j) {
            const double a = *average_level(visited[j]);
            const double norm = hi > lo ? (a - lo) / (hi - lo) : 0.0;
            weights[j] = std::exp(norm / temperature);
        }
        while (out.size() < static_cast<std::size_t>(count) && !visited.empty()) {
            const std::size_t j = rng.weighted_index(weights);
            out.push_back(visited[j]);
            visited.erase(visited.begin() + static_cast<std::ptrdiff_t>(j));
            weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(j));
        }
    }
    while (out.size() < static_cast<std::size_t>(count)) {
        const std::size_t j = static_cast<std::size_t>(rng.below(unvisited.size()));
        out.push_back(unvisited[j]);
        unvisited.erase(unvisited.begin() + static_cast<std::ptrdiff_t>(j));
    }
    return out;
}

std::vector<int> PheromoneTable::top_k(int k) const {
    if (k < 0 || k > size()) throw DataError("top_k: k out of range");
    std::vector<int> ids(static_cast<std::size_t>(size()));
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        const double av = average_level(a).value_or(-std::numeric_limits<double>::infinity());
        const double bv = average_level(b).value_or(-std::numeric_limits<double>::infinity());
        if (av != bv) return av > bv;
        return a < b;
    });
    ids.resize(static_cast<std::size_t>(k));
    return ids;
}

void PheromoneTable::save_csv(const std::filesystem::path& path,
                              const std::vector<std::string>& names) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write pheromone table: " + path.string());
    out << "feature_id,name,cum_reward,count,average\n";
    for (int i = 0; i < size(); ++i) {
        const auto avg = average_level(i);
        out << i << ',' << (static_cast<std::size_t>(i) < names.size() ? names[static_cast<std::size_t>(i)] : "")
            << ',' << format_double(cum_reward_[static_cast<std::size_t>(i)]) << ','
            << count_[static_cast<std::size_t>(i)] << ',' << (avg ? format_double(*avg) : "NA") << '\n';
    }
}

}  // namespace sdperl
