#include <doctest.h>

#include <cmath>
#include <random>

#include "sdperl/agent.hpp"
#include "sdperl/autodiff.hpp"
#include "support.hpp"

using sdperl::ad::Mat;
using sdperl::ad::Tape;
using sdperl::compute_gae;
using sdperl::gaussian_log_prob;
using sdperl::Policy;
using sdperl::PpoAgent;
using sdperl::PpoHyperparams;
using sdperl::RolloutBuffer;
using sdperl::Rng;
using sdperl::Transition;

namespace {

RolloutBuffer toy_buffer(const Policy& policy, int steps, unsigned seed, double reward_scale = 1.0) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> d(0, 1);
    RolloutBuffer buffer;
    const int slots = policy.actor.cfg.slots;
    const int dim = policy.actor.cfg.input_dim;
    for (int s = 0; s < steps; ++s) {
        Transition tr;
        tr.filled = s % (slots + 1);
        tr.slots = Mat::Zero(slots, dim);
        for (int r = 0; r < tr.filled; ++r) {
            for (int c = 0; c < dim; ++c) tr.slots(r, c) = d(gen);
        }
        tr.action = Eigen::VectorXd::NullaryExpr(dim, [&](Eigen::Index) { return d(gen); });
        const Eigen::RowVectorXd mean = forward_inference(policy.actor, tr.slots, tr.filled);
        tr.log_prob = gaussian_log_prob(tr.action, mean.transpose(),
                                        policy.log_std.row(0).transpose());
        tr.value = forward_inference(policy.critic, tr.slots, tr.filled)(0);
        tr.reward = reward_scale * d(gen);
        tr.done = (s + 1) % slots == 0 || s + 1 == steps;
        buffer.steps.push_back(std::move(tr));
    }
    return buffer;
}

}  // namespace

TEST_CASE("gae collapses to one-step td at lambda 0") {
    const std::vector<double> r = {1.0, 0.5, -0.25, 2.0};
    const std::vector<double> v = {0.3, -0.1, 0.7, 0.2};
    const std::vector<bool> d = {false, false, false, true};
    const auto [adv, ret] = compute_gae(r, v, d, 0.9, 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double next = i + 1 < r.size() && !d[i] ? v[i + 1] : 0.0;
        CHECK(adv[i] == doctest::Approx(r[i] + 0.9 * next - v[i]).epsilon(1e-12));
        CHECK(ret[i] == doctest::Approx(adv[i] + v[i]).epsilon(1e-12));
    }
}

TEST_CASE("gae is myopic at gamma 0") {
    const std::vector<double> r = {1.0, -2.0, 0.5};
    const std::vector<double> v = {0.4, 0.1, -0.3};
    const std::vector<bool> d = {false, false, true};
    const auto [adv, ret] = compute_gae(r, v, d, 0.0, 0.95);
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(adv[i] == doctest::Approx(r[i] - v[i]).epsilon(1e-12));
    }
}

TEST_CASE("gae matches an independent recursion on a random sequence") {
    std::mt19937 gen(17);
    std::normal_distribution<double> noise(0, 1);
    const double gamma = 0.99, lambda = 0.95;
    std::vector<double> r(10), v(10);
    std::vector<bool> d(10, false);
    for (int i = 0; i < 10; ++i) {
        r[static_cast<std::size_t>(i)] = noise(gen);
        v[static_cast<std::size_t>(i)] = noise(gen);
    }
    d[4] = true;
    d[9] = true;

    const auto [adv, ret] = compute_gae(r, v, d, gamma, lambda);

    // direct recursion written independently
    std::vector<double> expected(10);
    double acc = 0;
    for (int i = 9; i >= 0; --i) {
        const auto u = static_cast<std::size_t>(i);
        const double nv = (i < 9 && !d[u]) ? v[u + 1] : 0.0;
        const double delta = r[u] + gamma * nv * (d[u] ? 0.0 : 1.0) - v[u];
        acc = delta + gamma * lambda * (d[u] ? 0.0 : 1.0) * acc;
        expected[u] = acc;
    }
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(adv[i] == doctest::Approx(expected[i]).epsilon(1e-12));
        CHECK(ret[i] == doctest::Approx(expected[i] + v[i]).epsilon(1e-12));
    }
}

TEST_CASE("sampling at the clamp floor returns the mean") {
    Rng rng(5);
    Eigen::VectorXd mean(3);
    mean << 1.0, -2.0, 0.5;
    const Eigen::VectorXd log_std = Eigen::VectorXd::Constant(3, -20.0);
    const auto s = sdperl::sample_action(mean, log_std, rng);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(s.action(i) == doctest::Approx(mean(i)).epsilon(1e-7));
}

TEST_CASE("log prob of the mean matches the closed form") {
    Eigen::VectorXd mean(4);
    mean << 0.2, -1.0, 3.0, 0.0;
    Eigen::VectorXd log_std(4);
    log_std << 0.1, -0.3, 0.5, 0.0;
    const double got = gaussian_log_prob(mean, mean, log_std);
    const double expected = -log_std.sum() - 0.5 * 4.0 * std::log(2.0 * M_PI);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sample mean converges to the gaussian mean") {
    Rng rng(11);
    Eigen::VectorXd mean(2);
    mean << 0.7, -0.4;
    Eigen::VectorXd log_std(2);
    log_std << 0.0, -1.0;
    const int n = 100000;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < n; ++i) acc += sdperl::sample_action(mean, log_std, rng).action;
    acc /= n;
    for (Eigen::Index i = 0; i < 2; ++i) {
        const double se = std::exp(log_std(i)) / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(acc(i) - mean(i)) < 4.0 * se);
    }
}

TEST_CASE("clipped surrogate has zero gradient wrt a saturated ratio") {
    const double eps = 0.2, advantage = 1.5;
    Tape tape;
    const int ratio = tape.param(Mat::Constant(1, 1, 1.0 + 2.0 * eps));
    const int unclipped = tape.scale(ratio, advantage);
    const int clipped = tape.scale(tape.clip(ratio, 1.0 - eps, 1.0 + eps), advantage);
    const int surrogate = tape.sum(tape.min_(unclipped, clipped));
    tape.backward(surrogate);
    CHECK(tape.grad(ratio)(0, 0) == 0.0);

    // negative advantage keeps the unclipped branch active
    Tape tape2;
    const int ratio2 = tape2.param(Mat::Constant(1, 1, 1.0 + 2.0 * eps));
    const int u2 = tape2.scale(ratio2, -advantage);
    const int c2 = tape2.scale(tape2.clip(ratio2, 1.0 - eps, 1.0 + eps), -advantage);
    const int s2 = tape2.sum(tape2.min_(u2, c2));
    tape2.backward(s2);
    CHECK(tape2.grad(ratio2)(0, 0) == doctest::Approx(-advantage));
}

TEST_CASE("zero advantages leave the actor untouched while the critic moves") {
    Policy policy = Policy::make(3, 3, 3, 8, 1, 2, 21);
    PpoHyperparams hp;
    hp.update_epochs = 2;
    hp.minibatch_size = 8;
    PpoAgent agent(policy, hp);

    RolloutBuffer buffer = toy_buffer(agent.policy(), 9, 3, 0.0);
    // Constant rewards and values force every advantage to the same value;
    // normalization then maps them all to zero.
    for (auto& tr : buffer.steps) {
        tr.reward = 0.0;
        tr.value = 0.0;
        tr.done = true;  // each step its own episode: A = r - V = 0
    }

    const Eigen::VectorXd actor_before = [&] {
        Eigen::VectorXd flat;
        std::vector<sdperl::ad::Mat*> params = agent.policy().actor.parameters();
        std::size_t total = 0;
        for (auto* p : params) total += static_cast<std::size_t>(p->size());
        flat.resize(static_cast<Eigen::Index>(total));
        Eigen::Index at = 0;
        for (auto* p : params) {
            flat.segment(at, p->size()) = Eigen::Map<const Eigen::VectorXd>(p->data(), p->size());
            at += p->size();
        }
        return flat;
    }();
    const Eigen::VectorXd critic_before = [&] {
        std::vector<sdperl::ad::Mat*> params = agent.policy().critic.parameters();
        std::size_t total = 0;
        for (auto* p : params) total += static_cast<std::size_t>(p->size());
        Eigen::VectorXd flat(static_cast<Eigen::Index>(total));
        Eigen::Index at = 0;
        for (auto* p : params) {
            flat.segment(at, p->size()) = Eigen::Map<const Eigen::VectorXd>(p->data(), p->size());
            at += p->size();
        }
        return flat;
    }();

    Rng rng(2);
    const auto diag = agent.update(buffer, rng);
    CHECK_FALSE(diag.aborted);
    CHECK(diag.policy_loss == doctest::Approx(0.0));

    Eigen::Index at = 0;
    for (auto* p : agent.policy().actor.parameters()) {
        for (Eigen::Index i = 0; i < p->size(); ++i) {
            REQUIRE(p->data()[i] == actor_before(at + i));
        }
        at += p->size();
    }
    double critic_change = 0;
    at = 0;
    for (auto* p : agent.policy().critic.parameters()) {
        for (Eigen::Index i = 0; i < p->size(); ++i) {
            critic_change += std::abs(p->data()[i] - critic_before(at + i));
        }
        at += p->size();
    }
    CHECK(critic_change > 0);
}

TEST_CASE("a zero learning rate leaves every parameter bit-identical") {
    Policy policy = Policy::make(3, 3, 3, 8, 1, 2, 31);
    PpoHyperparams hp;
    hp.learning_rate = 0.0;
    hp.update_epochs = 3;
    PpoAgent agent(policy, hp);
    const Eigen::VectorXd before = agent.policy().flatten_parameters();

    RolloutBuffer buffer = toy_buffer(agent.policy(), 9, 4);
    Rng rng(7);
    const auto diag = agent.update(buffer, rng);
    CHECK_FALSE(diag.aborted);
    const Eigen::VectorXd after = agent.policy().flatten_parameters();
    for (Eigen::Index i = 0; i < before.size(); ++i) REQUIRE(before(i) == after(i));
}

TEST_CASE("at theta_old every ratio is one so nothing clips in the first minibatch") {
    Policy policy = Policy::make(3, 3, 3, 8, 1, 2, 41);
    PpoHyperparams hp;
    hp.update_epochs = 1;
    hp.minibatch_size = 64;  // single minibatch per epoch
    hp.learning_rate = 0.0;  // keep theta == theta_old throughout
    PpoAgent agent(policy, hp);
    RolloutBuffer buffer = toy_buffer(agent.policy(), 12, 8);
    Rng rng(9);
    const auto diag = agent.update(buffer, rng);
    CHECK(diag.clip_fraction == 0.0);
    CHECK(diag.approx_kl == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("non-finite rewards abort the update") {
    Policy policy = Policy::make(3, 3, 3, 8, 1, 2, 51);
    PpoAgent agent(policy, PpoHyperparams{});
    RolloutBuffer buffer = toy_buffer(agent.policy(), 6, 5);
    buffer.steps[2].reward = std::numeric_limits<double>::infinity();
    Rng rng(3);
    const auto diag = agent.update(buffer, rng);
    CHECK(diag.aborted);
}

TEST_CASE("ppo loss gradient matches finite differences on a toy policy") {
    Policy policy = Policy::make(3, 2, 3, 4, 1, 4, 61);
    PpoHyperparams hp;
    RolloutBuffer buffer = toy_buffer(policy, 6, 12);
    {
        std::vector<double> r(buffer.steps.size()), v(buffer.steps.size());
        std::vector<bool> d(buffer.steps.size());
        for (std::size_t i = 0; i < buffer.steps.size(); ++i) {
            r[i] = buffer.steps[i].reward;
            v[i] = buffer.steps[i].value;
            d[i] = buffer.steps[i].done;
        }
        auto [adv, ret] = compute_gae(r, v, d, hp.gamma, hp.gae_lambda);
        buffer.advantages = adv;
        buffer.returns = ret;
    }

    // Build the minibatch loss once on a tape, then probe parameters.
    auto loss_value = [&](Policy& p) {
        double surrogate = 0, vloss = 0;
        for (std::size_t i = 0; i < buffer.steps.size(); ++i) {
            const Transition& tr = buffer.steps[i];
            const Eigen::RowVectorXd mean = forward_inference(p.actor, tr.slots, tr.filled);
            const Eigen::VectorXd ls = p.log_std.row(0).transpose().array().max(-20.0).min(2.0);
            const double lp = gaussian_log_prob(tr.action, mean.transpose(), ls);
            const double ratio = std::exp(lp - tr.log_prob);
            const double clipped = std::clamp(ratio, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps);
            surrogate += std::min(ratio * buffer.advantages[i], clipped * buffer.advantages[i]);
            const double value = forward_inference(p.critic, tr.slots, tr.filled)(0);
            vloss += (value - buffer.returns[i]) * (value - buffer.returns[i]);
        }
        const double n = static_cast<double>(buffer.steps.size());
        const double entropy = p.log_std.row(0).array().max(-20.0).min(2.0).sum() +
                               0.5 * 3.0 * (1.0 + std::log(2.0 * M_PI));
        return -surrogate / n + hp.value_coef * vloss / n - hp.entropy_coef * entropy;
    };

    // analytic gradient via the tape
    Tape tape;
    sdperl::TapedNetwork actor = register_network(tape, policy.actor);
    sdperl::TapedNetwork critic = register_network(tape, policy.critic);
    const int log_std_param = tape.param(policy.log_std);
    const int log_std_id = tape.clip(log_std_param, -20.0, 2.0);
    int surrogate_acc = -1, value_acc = -1;
    for (std::size_t i = 0; i < buffer.steps.size(); ++i) {
        const Transition& tr = buffer.steps[i];
        const int mean_row = forward(tape, actor, tr.slots, tr.filled);
        const int action_row = tape.constant(tr.action.transpose());
        const int diff = tape.sub(action_row, mean_row);
        const int z2 = tape.mul(tape.mul(diff, diff), tape.exp_(tape.scale(log_std_id, -2.0)));
        const int log_prob = tape.add_const(
            tape.sub(tape.scale(tape.sum(z2), -0.5), tape.sum(log_std_id)),
            -0.5 * std::log(2.0 * M_PI) * 3.0);
        const int ratio = tape.exp_(tape.add_const(log_prob, -tr.log_prob));
        const int unclipped = tape.scale(ratio, buffer.advantages[i]);
        const int clipped = tape.scale(tape.clip(ratio, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps),
                                       buffer.advantages[i]);
        const int surrogate = tape.min_(unclipped, clipped);
        surrogate_acc = surrogate_acc < 0 ? surrogate : tape.add(surrogate_acc, surrogate);
        const int value_row = forward(tape, critic, tr.slots, tr.filled);
        const int verr = tape.add_const(value_row, -buffer.returns[i]);
        const int vl = tape.mul(verr, verr);
        value_acc = value_acc < 0 ? vl : tape.add(value_acc, vl);
    }
    const double n = static_cast<double>(buffer.steps.size());
    const int loss = tape.add(tape.scale(surrogate_acc, -1.0 / n),
                              tape.scale(value_acc, hp.value_coef / n));
    tape.backward(loss);

    std::mt19937 gen(77);
    const auto params = policy.parameters();
    int checked = 0;
    for (int probe = 0; probe < 40; ++probe) {
        const auto pi = static_cast<std::size_t>(gen() % params.size());
        Mat& mat = *params[pi];
        if (mat.size() == 0) continue;
        const auto flat_idx = static_cast<Eigen::Index>(gen() % static_cast<unsigned long>(mat.size()));
        const double original = mat.data()[flat_idx];
        const double h = 1e-4;
        mat.data()[flat_idx] = original + h;
        const double up = loss_value(policy);
        mat.data()[flat_idx] = original - h;
        const double down = loss_value(policy);
        mat.data()[flat_idx] = original;
        const double fd = (up - down) / (2.0 * h);

        int node = -1;
        if (pi < actor.ids.size()) node = actor.ids[pi];
        else if (pi < actor.ids.size() + critic.ids.size()) node = critic.ids[pi - actor.ids.size()];
        else node = log_std_param;
        const double got = tape.grad(node).data()[flat_idx];
        const double denom = std::max({std::abs(fd), std::abs(got), 1e-6});
        if (std::abs(fd - got) > 1e-10) {
            CHECK(std::abs(fd - got) / denom < 1e-3);
        }
        ++checked;
    }
    CHECK(checked > 30);
}

TEST_CASE("updates are deterministic given the seed") {
    auto run = [] {
        Policy policy = Policy::make(3, 3, 3, 8, 1, 2, 71);
        PpoAgent agent(policy, PpoHyperparams{});
        RolloutBuffer buffer = toy_buffer(agent.policy(), 9, 14);
        Rng rng(55);
        agent.update(buffer, rng);
        return agent.policy().flatten_parameters();
    };
    const Eigen::VectorXd a = run();
    const Eigen::VectorXd b = run();
    for (Eigen::Index i = 0; i < a.size(); ++i) REQUIRE(a(i) == b(i));
}
