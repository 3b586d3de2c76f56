#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdperl/autodiff.hpp"
#include "sdperl/rng.hpp"

namespace sdperl {

// Transformer trunk shape. `slots` is the episode capacity M; the sequence
// fed to the trunk is the M slot tokens plus one all-zero readout token whose
// final hidden state feeds the output head.
struct NetworkConfig {
    int input_dim = 0;
    int slots = 0;
    int out_dim = 0;
    int hidden = 16;
    int layers = 4;
    int heads = 4;
    int ff = 64;
    double head_gain = 1.0;  // orthogonal gain of the final output layer

    int head_dim() const { return hidden / heads; }
    int seq_len() const { return slots + 1; }
};

struct AttentionHead {
    ad::Mat wq, wk, wv;  // hidden x head_dim
    ad::Mat bq, bk, bv;  // 1 x head_dim
    ad::Mat wo;          // head_dim x hidden
};

struct TransformerLayer {
    std::vector<AttentionHead> heads;
    ad::Mat bo;                    // 1 x hidden, shared output bias
    ad::Mat ln1_g, ln1_b, ln2_g, ln2_b;
    ad::Mat ff1, ff1_b, ff2, ff2_b;
};

// All learnable tensors of one network (actor or critic).
struct Network {
    NetworkConfig cfg;
    ad::Mat w_in, b_in;     // input projection
    ad::Mat pos;            // (slots+1) x hidden learned positions
    std::vector<TransformerLayer> layers;
    ad::Mat ln_f_g, ln_f_b;
    ad::Mat mlp1, mlp1_b;   // readout head
    ad::Mat mlp2, mlp2_b;

    // Orthogonal projections (gain sqrt(2), head at cfg.head_gain), zero
    // biases, unit layer-norm gains, N(0, 0.02) positions.
    void init(Rng& rng);

    // Stable enumeration of every tensor, used by the optimizer, the
    // finite-difference checks and the checkpoint format.
    std::vector<ad::Mat*> parameters();
    std::vector<const ad::Mat*> parameters() const;
};

// Ids of one network's parameters registered on a tape, in parameters() order.
struct TapedNetwork {
    const NetworkConfig* cfg = nullptr;
    std::vector<int> ids;
};

TapedNetwork register_network(ad::Tape& tape, Network& net);

// Forward pass for one state: `slots` is the M x input_dim slot matrix,
// `filled` the number of occupied leading slots. Returns the node holding the
// 1 x out_dim head output. Attention from any token is restricted to the
// filled slots plus the token itself, so padding content never reaches the
// readout and state tokens never see the readout token.
int forward(ad::Tape& tape, const TapedNetwork& net, const Eigen::MatrixXd& slots, int filled);

// Plain forward without gradient bookkeeping (rollout path).
Eigen::RowVectorXd forward_inference(const Network& net, const Eigen::MatrixXd& slots, int filled);

// Actor + critic + state-independent action log-std (1 x action_dim).
struct Policy {
    Network actor;
    Network critic;
    ad::Mat log_std;

    static Policy make(int input_dim, int slots, int action_dim, int hidden, int layers, int heads,
                       std::uint64_t seed);

    int action_dim() const { return static_cast<int>(log_std.cols()); }

    std::vector<ad::Mat*> parameters();  // actor, critic, then log_std
    std::vector<const ad::Mat*> parameters() const;
    Eigen::VectorXd flatten_parameters() const;
    void unflatten_parameters(const Eigen::VectorXd& flat);
};

}  // namespace sdperl
