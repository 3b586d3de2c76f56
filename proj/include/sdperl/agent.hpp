#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdperl/policy.hpp"
#include "sdperl/rng.hpp"

namespace sdperl {

struct PpoHyperparams {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double learning_rate = 3e-4;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    int update_epochs = 10;
    int minibatch_size = 64;
    int buffer_episodes = 10;
    double max_grad_norm = 0.5;
    double log_std_min = -20.0;
    double log_std_max = 2.0;
    bool normalize_advantages = true;
};

struct Transition {
    Eigen::MatrixXd slots;  // state snapshot before the step
    int filled = 0;
    Eigen::VectorXd action;
    double log_prob = 0;
    double value = 0;
    double reward = 0;
    bool done = false;
};

struct RolloutBuffer {
    std::vector<Transition> steps;
    std::vector<double> advantages;
    std::vector<double> returns;

    void clear() {
        steps.clear();
        advantages.clear();
        returns.clear();
    }
};

// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
// A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
// returns = A + V. The value beyond the last entry bootstraps as 0 (buffers
// end on episode boundaries).
std::pair<std::vector<double>, std::vector<double>> compute_gae(const std::vector<double>& rewards,
                                                                const std::vector<double>& values,
                                                                const std::vector<bool>& dones,
                                                                double gamma, double lambda);

struct ActionSample {
    Eigen::VectorXd action;
    double log_prob = 0;
};

// Diagonal Gaussian draw with the exact log-density at the sample.
ActionSample sample_action(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std, Rng& rng);

double gaussian_log_prob(const Eigen::VectorXd& action, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std);

struct UpdateDiagnostics {
    double loss = 0;
    double policy_loss = 0;
    double value_loss = 0;
    double entropy = 0;
    double clip_fraction = 0;
    double approx_kl = 0;
    int minibatches = 0;
    bool aborted = false;  // non-finite loss stopped the update
};

// First-order adaptive-moment optimizer over the flattened parameter vector.
class AdamOptimizer {
  public:
    AdamOptimizer(Eigen::Index n_params, double lr);
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

  private:
    double lr_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
};

class PpoAgent {
  public:
    PpoAgent(Policy policy, PpoHyperparams hp);

    // Rollout-time action: actor mean -> Gaussian sample, plus the critic
    // value of the state.
    struct ActResult {
        Eigen::VectorXd action;
        double log_prob = 0;
        double value = 0;
    };
    ActResult act(const Eigen::MatrixXd& slots, int filled, Rng& rng);

    // Computes GAE (and normalizes advantages when configured), then runs the
    // clipped-surrogate update over shuffled minibatches.
    UpdateDiagnostics update(RolloutBuffer& buffer, Rng& rng);

    Policy& policy() { return policy_; }
    const Policy& policy() const { return policy_; }
    const PpoHyperparams& hyperparams() const { return hp_; }

  private:
    Eigen::VectorXd clamped_log_std() const;

    Policy policy_;
    PpoHyperparams hp_;
    AdamOptimizer opt_;
};

}  // namespace sdperl
