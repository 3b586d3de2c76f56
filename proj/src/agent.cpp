#include "sdperl/agent.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

#include "sdperl/errors.hpp"

namespace sdperl {

namespace {
constexpr double kLogTwoPi = 1.8378770664093453;  // log(2*pi)
}

std::pair<std::vector<double>, std::vector<double>> compute_gae(const std::vector<double>& rewards,
                                                                const std::vector<double>& values,
                                                                const std::vector<bool>& dones,
                                                                double gamma, double lambda) {
    const std::size_t n = rewards.size();
    if (values.size() != n || dones.size() != n) {
        throw ConfigError("compute_gae: input lengths differ");
    }
    std::vector<double> advantages(n, 0.0), returns(n, 0.0);
    double running = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double not_done = dones[i] ? 0.0 : 1.0;
        const double next_value = i + 1 < n ? values[i + 1] : 0.0;
        const double delta = rewards[i] + gamma * next_value * not_done - values[i];
        running = delta + gamma * lambda * not_done * running;
        advantages[i] = running;
        returns[i] = advantages[i] + values[i];
    }
    return {std::move(advantages), std::move(returns)};
}

double gaussian_log_prob(const Eigen::VectorXd& action, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std) {
    const Eigen::ArrayXd sigma = log_std.array().exp();
    const Eigen::ArrayXd z = (action - mean).array() / sigma;
    return -0.5 * z.square().sum() - log_std.sum() -
           0.5 * kLogTwoPi * static_cast<double>(action.size());
}

ActionSample sample_action(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std, Rng& rng) {
    ActionSample out;
    out.action.resize(mean.size());
    const Eigen::ArrayXd sigma = log_std.array().exp();
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        out.action(i) = mean(i) + sigma(i) * rng.normal();
    }
    out.log_prob = gaussian_log_prob(out.action, mean, log_std);
    return out;
}

AdamOptimizer::AdamOptimizer(Eigen::Index n_params, double lr)
    : lr_(lr), m_(Eigen::VectorXd::Zero(n_params)), v_(Eigen::VectorXd::Zero(n_params)) {}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_.array() + (1.0 - beta2_) * grad.array().square();
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
}

PpoAgent::PpoAgent(Policy policy, PpoHyperparams hp)
    : policy_(std::move(policy)), hp_(hp), opt_(policy_.flatten_parameters().size(), hp.learning_rate) {}

Eigen::VectorXd PpoAgent::clamped_log_std() const {
    return policy_.log_std.row(0)
        .transpose()
        .array()
        .max(hp_.log_std_min)
        .min(hp_.log_std_max)
        .matrix();
}

PpoAgent::ActResult PpoAgent::act(const Eigen::MatrixXd& slots, int filled, Rng& rng) {
    ActResult out;
    const Eigen::RowVectorXd mean = forward_inference(policy_.actor, slots, filled);
    const auto sample = sample_action(mean.transpose(), clamped_log_std(), rng);
    out.action = sample.action;
    out.log_prob = sample.log_prob;
    out.value = forward_inference(policy_.critic, slots, filled)(0);
    return out;
}

UpdateDiagnostics PpoAgent::update(RolloutBuffer& buffer, Rng& rng) {
    UpdateDiagnostics diag;
    const std::size_t n = buffer.steps.size();
    if (n == 0) return diag;

    {
        std::vector<double> rewards(n), values(n);
        std::vector<bool> dones(n);
        for (std::size_t i = 0; i < n; ++i) {
            rewards[i] = buffer.steps[i].reward;
            values[i] = buffer.steps[i].value;
            dones[i] = buffer.steps[i].done;
        }
        auto [adv, ret] = compute_gae(rewards, values, dones, hp_.gamma, hp_.gae_lambda);
        buffer.advantages = std::move(adv);
        buffer.returns = std::move(ret);
    }
    if (hp_.normalize_advantages) {
        double mean = 0;
        for (double a : buffer.advantages) mean += a;
        mean /= static_cast<double>(n);
        double var = 0;
        for (double a : buffer.advantages) var += (a - mean) * (a - mean);
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var) + 1e-8;
        for (double& a : buffer.advantages) a = (a - mean) / sd;
    }

    const int action_dim = policy_.action_dim();
    const double entropy_const = 0.5 * static_cast<double>(action_dim) * (1.0 + kLogTwoPi);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    double clip_events = 0, kl_sum = 0, loss_sum = 0, policy_sum = 0, value_sum = 0, entropy_sum = 0;
    long sample_count = 0;

    for (int epoch = 0; epoch < hp_.update_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(hp_.minibatch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(hp_.minibatch_size));
            const auto batch = static_cast<double>(stop - start);

            ad::Tape tape;
            TapedNetwork actor = register_network(tape, policy_.actor);
            TapedNetwork critic = register_network(tape, policy_.critic);
            const int log_std_param = tape.param(policy_.log_std);
            const int log_std_id = tape.clip(log_std_param, hp_.log_std_min, hp_.log_std_max);

            int surrogate_acc = -1;
            int value_acc = -1;
            for (std::size_t bi = start; bi < stop; ++bi) {
                const Transition& tr = buffer.steps[order[bi]];
                const double advantage = buffer.advantages[order[bi]];

                const int mean_row = forward(tape, actor, tr.slots, tr.filled);
                const int action_row = tape.constant(tr.action.transpose());
                const int diff = tape.sub(action_row, mean_row);
                const int z2 = tape.mul(tape.mul(diff, diff),
                                        tape.exp_(tape.scale(log_std_id, -2.0)));
                int log_prob = tape.add_const(
                    tape.sub(tape.scale(tape.sum(z2), -0.5), tape.sum(log_std_id)),
                    -0.5 * kLogTwoPi * action_dim);

                const int ratio = tape.exp_(tape.add_const(log_prob, -tr.log_prob));
                const int unclipped = tape.scale(ratio, advantage);
                const int clipped =
                    tape.scale(tape.clip(ratio, 1.0 - hp_.clip_eps, 1.0 + hp_.clip_eps), advantage);
                const int surrogate = tape.min_(unclipped, clipped);
                surrogate_acc = surrogate_acc < 0 ? surrogate : tape.add(surrogate_acc, surrogate);

                const int value_row = forward(tape, critic, tr.slots, tr.filled);
                const int verr = tape.add_const(value_row, -buffer.returns[order[bi]]);
                const int vloss = tape.mul(verr, verr);
                value_acc = value_acc < 0 ? vloss : tape.add(value_acc, vloss);

                // rollout-time diagnostics, no tape needed
                const double r = tape.value(ratio)(0, 0);
                clip_events += std::abs(r - 1.0) > hp_.clip_eps ? 1.0 : 0.0;
                kl_sum += (r - 1.0) - std::log(std::max(r, 1e-12));
                ++sample_count;
            }

            const int policy_term = tape.scale(surrogate_acc, -1.0 / batch);
            const int value_term = tape.scale(value_acc, hp_.value_coef / batch);
            const int entropy_term =
                tape.add_const(tape.sum(log_std_id), entropy_const);  // Gaussian entropy
            const int loss = tape.sub(tape.add(policy_term, value_term),
                                      tape.scale(entropy_term, hp_.entropy_coef));

            const double loss_value = tape.value(loss)(0, 0);
            if (!std::isfinite(loss_value)) {
                diag.aborted = true;
                diag.loss = loss_value;
                return diag;
            }
            loss_sum += loss_value;
            policy_sum += tape.value(policy_term)(0, 0);
            value_sum += tape.value(value_term)(0, 0);
            entropy_sum += tape.value(entropy_term)(0, 0);

            tape.backward(loss);

            // Gather the flat gradient in parameters() order.
            const auto params = policy_.parameters();
            Eigen::VectorXd flat_grad(policy_.flatten_parameters().size());
            Eigen::Index at = 0;
            std::size_t tape_idx = 0;
            auto append_grad = [&](int node_id, const ad::Mat& shape) {
                const ad::Mat& g = tape.grad(node_id);
                assert(g.rows() == shape.rows() && g.cols() == shape.cols());
                flat_grad.segment(at, shape.size()) =
                    Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
                at += shape.size();
            };
            for (int id : actor.ids) append_grad(id, *params[tape_idx++]);
            for (int id : critic.ids) append_grad(id, *params[tape_idx++]);
            append_grad(log_std_param, policy_.log_std);

            const double norm = flat_grad.norm();
            if (norm > hp_.max_grad_norm && norm > 0) {
                flat_grad *= hp_.max_grad_norm / norm;
            }

            Eigen::VectorXd flat = policy_.flatten_parameters();
            opt_.step(flat, flat_grad);
            policy_.unflatten_parameters(flat);
            ++diag.minibatches;
        }
    }

    if (diag.minibatches > 0) {
        diag.loss = loss_sum / diag.minibatches;
        diag.policy_loss = policy_sum / diag.minibatches;
        diag.value_loss = value_sum / diag.minibatches;
        diag.entropy = entropy_sum / diag.minibatches;
    }
    if (sample_count > 0) {
        diag.clip_fraction = clip_events / static_cast<double>(sample_count);
        diag.approx_kl = kl_sum / static_cast<double>(sample_count);
    }
    return diag;
}

}  // namespace sdperl
