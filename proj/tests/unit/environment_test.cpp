#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "sdperl/environment.hpp"
#include "sdperl/errors.hpp"
#include "support.hpp"

using sdperl::EmbeddingTable;
using sdperl::Environment;
using sdperl::EpisodeState;
using sdperl::FeatureMatrix;
using sdperl::PheromoneTable;
using sdperl::Rng;
using sdperl::StateMode;

namespace {

struct Fixture {
    FeatureMatrix train;
    FeatureMatrix eval;
    EmbeddingTable embeddings;

    explicit Fixture(std::size_t features = 12, unsigned seed = 7) {
        auto full = testsupport::synthetic_defects(80, features, 3, 1.5, 0.35, seed);
        const auto split = sdperl::resplit_until_defective(full, {0.25, 0});
        train = sdperl::smote_oversample(split.train, 3, 1);
        eval = split.eval;
        embeddings = sdperl::build_embeddings(train, 2, 3, seed);
    }
};

int env_features(const Fixture& fx) { return static_cast<int>(fx.train.n_features()); }

// Embedding table with hand-placed vectors.
EmbeddingTable manual_table(const std::vector<Eigen::VectorXd>& vectors) {
    EmbeddingTable t;
    t.vectors = vectors;
    t.dim = static_cast<int>(vectors.front().size());
    t.k_start = 2;
    t.k_end = 2;
    return t;
}

}  // namespace

TEST_CASE("vanilla reset is the all-zero state with zero baseline") {
    Fixture fx;
    Environment env(StateMode::Custom, 5, fx.train, fx.eval, &fx.embeddings, nullptr);
    Rng rng(1);
    const EpisodeState state = env.reset(rng);
    CHECK(state.filled() == 0);
    CHECK(state.seeded_count == 0);
    CHECK(state.prev_cumulative == 0.0);
    CHECK(state.slots.rows() == 5);
    CHECK(state.slots.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pheromone reset seeds one third of the slots") {
    Fixture fx;
    PheromoneTable pheromone(env_features(fx));
    Environment env(StateMode::Custom, 6, fx.train, fx.eval, &fx.embeddings, &pheromone);
    Rng rng(2);
    const EpisodeState state = env.reset(rng);
    CHECK(state.seeded_count == 2);
    CHECK(state.filled() == 2);
    CHECK(std::set<int>(state.selected_ids.begin(), state.selected_ids.end()).size() == 2);
    for (int i = 0; i < 2; ++i) {
        const Eigen::VectorXd expected =
            fx.embeddings.vectors[static_cast<std::size_t>(state.selected_ids[static_cast<std::size_t>(i)])];
        CHECK((state.slots.row(i).transpose() - expected).cwiseAbs().maxCoeff() == 0.0);
    }
    for (int i = 2; i < 6; ++i) CHECK(state.slots.row(i).cwiseAbs().maxCoeff() == 0.0);
    // baseline equals the oracle score of the seeded subset
    const auto clf = sdperl::train_classifier(fx.train, state.selected_ids);
    const auto metrics = sdperl::evaluate(clf, fx.eval);
    CHECK(state.prev_cumulative == doctest::Approx(metrics.f1).epsilon(1e-12));
}

TEST_CASE("an action equal to an unselected embedding resolves to that feature") {
    Fixture fx;
    Environment env(StateMode::Custom, 4, fx.train, fx.eval, &fx.embeddings, nullptr);
    Rng rng(3);
    const EpisodeState state = env.reset(rng);
    const Eigen::VectorXd action = fx.embeddings.vectors[9];
    CHECK(env.resolve_action(action, state) == 9);
}

TEST_CASE("equidistant actions break ties to the lower feature id") {
    FeatureMatrix train, eval;
    train.feature_names = {"a", "b", "c", "d"};
    eval.feature_names = train.feature_names;
    for (int r = 0; r < 8; ++r) {
        train.rows.push_back({1.0 * r, 2.0 * r, 3.0 * r, 0.5 * r});
        train.labels.push_back(r % 2);
        eval.rows.push_back({1.0 * r, 2.0 * r, 3.0 * r, 0.5 * r});
        eval.labels.push_back(r % 2);
    }
    std::vector<Eigen::VectorXd> vecs(4, Eigen::VectorXd::Zero(2));
    vecs[0] << 0.0, 5.0;
    vecs[1] << -1.0, 0.0;  // distance 1 from the origin action
    vecs[2] << 0.0, 5.0;
    vecs[3] << 1.0, 0.0;  // also distance 1
    const auto table = manual_table(vecs);
    Environment env(StateMode::Custom, 2, train, eval, &table, nullptr);
    Rng rng(4);
    EpisodeState state = env.reset(rng);
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
    CHECK(env.resolve_action(origin, state) == 1);  // ids 1 and 3 tie, lower id wins
}

TEST_CASE("resolution matches a brute-force scan over random embeddings") {
    std::mt19937 gen(23);
    std::normal_distribution<double> d(0, 2);
    const int n = 50, dim = 7;
    std::vector<Eigen::VectorXd> vecs;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v(dim);
        for (int j = 0; j < dim; ++j) v(j) = d(gen);
        vecs.push_back(v);
    }
    auto full = testsupport::synthetic_defects(60, static_cast<std::size_t>(n), 5, 1.0, 0.3, 3);
    const auto table = manual_table(vecs);
    Environment env(StateMode::Custom, 10, full, full, &table, nullptr);
    Rng rng(5);
    EpisodeState state = env.reset(rng);
    state.selected_ids = {3, 17, 40};

    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd action(dim);
        for (int j = 0; j < dim; ++j) action(j) = d(gen);
        int expected = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int id = 0; id < n; ++id) {
            if (id == 3 || id == 17 || id == 40) continue;
            const double dist = (vecs[static_cast<std::size_t>(id)] - action).squaredNorm();
            if (dist < best) {
                best = dist;
                expected = id;
            }
        }
        CHECK(env.resolve_action(action, state) == expected);
    }
}

TEST_CASE("simple mode argmax agrees with custom mode on the one-hot basis") {
    auto full = testsupport::synthetic_defects(60, 6, 2, 1.2, 0.3, 9);
    const auto split = sdperl::resplit_until_defective(full, {0.25, 0});
    const auto train = sdperl::smote_oversample(split.train, 3, 1);

    std::vector<Eigen::VectorXd> basis;
    for (int i = 0; i < 6; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(6);
        v(i) = 1.0;
        basis.push_back(v);
    }
    const auto identity_table = manual_table(basis);
    Environment custom(StateMode::Custom, 3, train, split.eval, &identity_table, nullptr);
    Environment simple(StateMode::Simple, 3, train, split.eval, nullptr, nullptr);

    std::mt19937 gen(31);
    std::uniform_real_distribution<double> d(0, 1);
    Rng rng(6);
    EpisodeState cs = custom.reset(rng);
    EpisodeState ss = simple.reset(rng);
    cs.selected_ids = {2};
    ss.selected_ids = {2};
    for (int trial = 0; trial < 40; ++trial) {
        Eigen::VectorXd action(6);
        for (int j = 0; j < 6; ++j) action(j) = d(gen);
        // argmin ||a - e_i||^2 = argmax a_i on the unit basis
        CHECK(custom.resolve_action(action, cs) == simple.resolve_action(action, ss));
    }
}

TEST_CASE("stepping accumulates telescoping rewards and stops at capacity") {
    Fixture fx;
    PheromoneTable pheromone(env_features(fx));
    Environment env(StateMode::Custom, 5, fx.train, fx.eval, &fx.embeddings, &pheromone);
    Rng rng(8);
    EpisodeState state = env.reset(rng);
    const double initial = state.prev_cumulative;

    std::mt19937 gen(17);
    std::normal_distribution<double> d(0, 1);
    double reward_sum = 0;
    double last_cumulative = initial;
    while (!state.done()) {
        Eigen::VectorXd action(fx.embeddings.dim);
        for (int j = 0; j < fx.embeddings.dim; ++j) action(j) = d(gen);
        const auto out = env.step(state, action);
        reward_sum += out.td_reward;
        last_cumulative = out.cumulative;
    }
    CHECK(state.filled() == 5);
    CHECK(std::set<int>(state.selected_ids.begin(), state.selected_ids.end()).size() == 5);
    CHECK(reward_sum == doctest::Approx(last_cumulative - initial).epsilon(1e-12));
    CHECK_THROWS_AS(env.step(state, Eigen::VectorXd::Zero(fx.embeddings.dim)), sdperl::DataError);

    // agent-selected steps updated the pheromone table
    long total_count = 0;
    for (int i = 0; i < pheromone.size(); ++i) total_count += pheromone.count(i);
    CHECK(total_count == 5 - state.seeded_count);
}

TEST_CASE("the first unseeded step is rewarded with the full score") {
    Fixture fx;
    Environment env(StateMode::Custom, 3, fx.train, fx.eval, &fx.embeddings, nullptr);
    Rng rng(9);
    EpisodeState state = env.reset(rng);
    const auto out = env.step(state, fx.embeddings.vectors[0]);
    CHECK(out.feature_id == 0);
    CHECK(out.td_reward == doctest::Approx(out.cumulative).epsilon(1e-12));
    CHECK(out.metrics.f1 >= 0.0);
}

TEST_CASE("a feature that leaves the score unchanged earns zero reward") {
    // Duplicate columns: adding the copy cannot change the classifier output.
    FeatureMatrix train;
    train.feature_names = {"a", "a_copy", "b"};
    std::mt19937 gen(3);
    std::normal_distribution<double> d(0, 1);
    for (int r = 0; r < 60; ++r) {
        const int label = r % 3 == 0 ? 1 : 0;
        const double x = d(gen) + (label == 1 ? 1.5 : 0.0);
        train.rows.push_back({x, x, d(gen)});
        train.labels.push_back(label);
    }
    const auto split = sdperl::resplit_until_defective(train, {0.3, 0});
    const auto bal = sdperl::smote_oversample(split.train, 3, 1);

    std::vector<Eigen::VectorXd> vecs(3, Eigen::VectorXd::Zero(2));
    vecs[0] << 1.0, 0.0;
    vecs[1] << 0.0, 1.0;
    vecs[2] << -1.0, 0.0;
    const auto table = manual_table(vecs);
    Environment env(StateMode::Custom, 2, bal, split.eval, &table, nullptr);
    Rng rng(10);
    EpisodeState state = env.reset(rng);
    env.step(state, vecs[0]);

    // "a_copy" standardizes to the same column as "a"; the fitted score is
    // unchanged up to symmetric weight sharing, so the TD reward is ~0.
    const auto out = env.step(state, vecs[1]);
    CHECK(out.feature_id == 1);
    CHECK(std::abs(out.td_reward) < 1e-9);
}

TEST_CASE("environment validates its configuration") {
    Fixture fx;
    CHECK_THROWS_AS(
        Environment(StateMode::Custom, 0, fx.train, fx.eval, &fx.embeddings, nullptr),
        sdperl::ConfigError);
    CHECK_THROWS_AS(
        Environment(StateMode::Custom, 1000, fx.train, fx.eval, &fx.embeddings, nullptr),
        sdperl::ConfigError);
    CHECK_THROWS_AS(Environment(StateMode::Custom, 3, fx.train, fx.eval, nullptr, nullptr),
                    sdperl::ConfigError);
    Environment env(StateMode::Custom, 3, fx.train, fx.eval, &fx.embeddings, nullptr);
    Rng rng(11);
    EpisodeState state = env.reset(rng);
    CHECK_THROWS_AS(env.resolve_action(Eigen::VectorXd::Zero(3), state), sdperl::ConfigError);
}
