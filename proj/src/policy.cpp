#include "sdperl/policy.hpp"

#include <cassert>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sdperl/errors.hpp"

namespace sdperl {

namespace {

ad::Mat gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    ad::Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
    }
    return m;
}

// Orthogonal init: QR of a gaussian draw, sign-fixed by the R diagonal.
ad::Mat orthogonal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double gain) {
    const bool transpose = rows < cols;
    const Eigen::Index r = transpose ? cols : rows;
    const Eigen::Index c = transpose ? rows : cols;
    ad::Mat g = gaussian(rng, r, c);
    Eigen::HouseholderQR<ad::Mat> qr(g);
    ad::Mat q = qr.householderQ() * ad::Mat::Identity(r, c);
    ad::Mat rm = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < c; ++i) {
        if (rm(i, i) < 0) q.col(i) = -q.col(i);
    }
    if (transpose) q.transposeInPlace();
    return gain * q;
}

}  // namespace

void Network::init(Rng& rng) {
    const double g = std::sqrt(2.0);
    const int h = cfg.hidden;
    const int dh = cfg.head_dim();
    if (h % cfg.heads != 0) throw ConfigError("hidden dim must be divisible by the head count");

    w_in = orthogonal(rng, cfg.input_dim, h, g);
    b_in = ad::Mat::Zero(1, h);
    pos = 0.02 * gaussian(rng, cfg.seq_len(), h);

    layers.assign(static_cast<std::size_t>(cfg.layers), TransformerLayer{});
    for (auto& layer : layers) {
        layer.heads.assign(static_cast<std::size_t>(cfg.heads), AttentionHead{});
        for (auto& head : layer.heads) {
            head.wq = orthogonal(rng, h, dh, g);
            head.wk = orthogonal(rng, h, dh, g);
            head.wv = orthogonal(rng, h, dh, g);
            head.bq = ad::Mat::Zero(1, dh);
            head.bk = ad::Mat::Zero(1, dh);
            head.bv = ad::Mat::Zero(1, dh);
            head.wo = orthogonal(rng, dh, h, g);
        }
        layer.bo = ad::Mat::Zero(1, h);
        layer.ln1_g = ad::Mat::Ones(1, h);
        layer.ln1_b = ad::Mat::Zero(1, h);
        layer.ln2_g = ad::Mat::Ones(1, h);
        layer.ln2_b = ad::Mat::Zero(1, h);
        layer.ff1 = orthogonal(rng, h, cfg.ff, g);
        layer.ff1_b = ad::Mat::Zero(1, cfg.ff);
        layer.ff2 = orthogonal(rng, cfg.ff, h, g);
        layer.ff2_b = ad::Mat::Zero(1, h);
    }

    ln_f_g = ad::Mat::Ones(1, h);
    ln_f_b = ad::Mat::Zero(1, h);
    mlp1 = orthogonal(rng, h, h, g);
    mlp1_b = ad::Mat::Zero(1, h);
    mlp2 = orthogonal(rng, h, cfg.out_dim, cfg.head_gain);
    mlp2_b = ad::Mat::Zero(1, cfg.out_dim);
}

std::vector<ad::Mat*> Network::parameters() {
    std::vector<ad::Mat*> out = {&w_in, &b_in, &pos};
    for (auto& layer : layers) {
        for (auto& head : layer.heads) {
            out.push_back(&head.wq);
            out.push_back(&head.bq);
            out.push_back(&head.wk);
            out.push_back(&head.bk);
            out.push_back(&head.wv);
            out.push_back(&head.bv);
            out.push_back(&head.wo);
        }
        out.push_back(&layer.bo);
        out.push_back(&layer.ln1_g);
        out.push_back(&layer.ln1_b);
        out.push_back(&layer.ln2_g);
        out.push_back(&layer.ln2_b);
        out.push_back(&layer.ff1);
        out.push_back(&layer.ff1_b);
        out.push_back(&layer.ff2);
        out.push_back(&layer.ff2_b);
    }
    out.push_back(&ln_f_g);
    out.push_back(&ln_f_b);
    out.push_back(&mlp1);
    out.push_back(&mlp1_b);
    out.push_back(&mlp2);
    out.push_back(&mlp2_b);
    return out;
}

std::vector<const ad::Mat*> Network::parameters() const {
    auto mut = const_cast<Network*>(this)->parameters();
    return std::vector<const ad::Mat*>(mut.begin(), mut.end());
}

TapedNetwork register_network(ad::Tape& tape, Network& net) {
    TapedNetwork taped;
    taped.cfg = &net.cfg;
    for (ad::Mat* p : net.parameters()) taped.ids.push_back(tape.param(*p));
    return taped;
}

namespace {

// Mirrors Network::parameters() ordering.
struct TapedIndex {
    const std::vector<int>& ids;
    std::size_t next = 0;
    int take() { return ids[next++]; }
};

// allow(q, k) = k is a filled slot, or k == q.
ad::Mat attention_mask(int seq_len, int filled) {
    ad::Mat allow = ad::Mat::Zero(seq_len, seq_len);
    for (int q = 0; q < seq_len; ++q) {
        for (int k = 0; k < seq_len; ++k) {
            if (k < filled || k == q) allow(q, k) = 1.0;
        }
    }
    return allow;
}

}  // namespace

int forward(ad::Tape& tape, const TapedNetwork& net, const Eigen::MatrixXd& slots, int filled) {
    const NetworkConfig& cfg = *net.cfg;
    if (slots.rows() != cfg.slots || slots.cols() != cfg.input_dim) {
        throw ConfigError("state shape does not match the network configuration");
    }
    if (filled < 0 || filled > cfg.slots) throw ConfigError("filled count out of range");

    const int seq = cfg.seq_len();
    ad::Mat tokens = ad::Mat::Zero(seq, cfg.input_dim);
    tokens.topRows(cfg.slots) = slots;  // readout token stays all-zero

    TapedIndex idx{net.ids};
    const int w_in = idx.take(), b_in = idx.take(), pos = idx.take();

    const int x = tape.constant(std::move(tokens));
    int h = tape.add(tape.add_rowvec(tape.matmul(x, w_in), b_in), pos);

    const ad::Mat allow = attention_mask(seq, filled);
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));

    for (int layer = 0; layer < cfg.layers; ++layer) {
        std::vector<int> head_params;
        for (int hd = 0; hd < cfg.heads; ++hd) {
            for (int p = 0; p < 7; ++p) head_params.push_back(idx.take());
        }
        const int bo = idx.take();
        const int ln1_g = idx.take(), ln1_b = idx.take();
        const int ln2_g = idx.take(), ln2_b = idx.take();
        const int ff1 = idx.take(), ff1_b = idx.take();
        const int ff2 = idx.take(), ff2_b = idx.take();

        const int a_in = tape.layer_norm_rows(h, ln1_g, ln1_b);
        int attn = -1;
        for (int hd = 0; hd < cfg.heads; ++hd) {
            const int* hp = head_params.data() + 7 * hd;
            const int q = tape.add_rowvec(tape.matmul(a_in, hp[0]), hp[1]);
            const int k = tape.add_rowvec(tape.matmul(a_in, hp[2]), hp[3]);
            const int v = tape.add_rowvec(tape.matmul(a_in, hp[4]), hp[5]);
            const int scores = tape.scale(tape.matmul_bt(q, k), inv_sqrt_dh);
            const int weights = tape.masked_softmax_rows(scores, allow);
            const int mixed = tape.matmul(tape.matmul(weights, v), hp[6]);
            attn = attn < 0 ? mixed : tape.add(attn, mixed);
        }
        attn = tape.add_rowvec(attn, bo);
        h = tape.add(h, attn);

        const int f_in = tape.layer_norm_rows(h, ln2_g, ln2_b);
        const int f_mid = tape.tanh_(tape.add_rowvec(tape.matmul(f_in, ff1), ff1_b));
        const int f_out = tape.add_rowvec(tape.matmul(f_mid, ff2), ff2_b);
        h = tape.add(h, f_out);
    }

    const int ln_f_g = idx.take(), ln_f_b = idx.take();
    const int mlp1 = idx.take(), mlp1_b = idx.take();
    const int mlp2 = idx.take(), mlp2_b = idx.take();

    const int readout = tape.row(tape.layer_norm_rows(h, ln_f_g, ln_f_b), seq - 1);
    const int mid = tape.tanh_(tape.add_rowvec(tape.matmul(readout, mlp1), mlp1_b));
    return tape.add_rowvec(tape.matmul(mid, mlp2), mlp2_b);
}

Eigen::RowVectorXd forward_inference(const Network& net, const Eigen::MatrixXd& slots, int filled) {
    ad::Tape tape;
    TapedNetwork taped;
    taped.cfg = &net.cfg;
    for (const ad::Mat* p : net.parameters()) {
        taped.ids.push_back(tape.constant(*p));
    }
    const int out = forward(tape, taped, slots, filled);
    return tape.value(out).row(0);
}

Policy Policy::make(int input_dim, int slots, int action_dim, int hidden, int layers, int heads,
                    std::uint64_t seed) {
    Policy p;
    p.actor.cfg = NetworkConfig{input_dim, slots, action_dim, hidden, layers, heads, 4 * hidden, 0.01};
    p.critic.cfg = NetworkConfig{input_dim, slots, 1, hidden, layers, heads, 4 * hidden, 1.0};
    Rng actor_rng(derive_seed(seed, "policy_init_actor"));
    Rng critic_rng(derive_seed(seed, "policy_init_critic"));
    p.actor.init(actor_rng);
    p.critic.init(critic_rng);
    p.log_std = ad::Mat::Zero(1, action_dim);
    return p;
}

std::vector<ad::Mat*> Policy::parameters() {
    std::vector<ad::Mat*> out = actor.parameters();
    auto critic_params = critic.parameters();
    out.insert(out.end(), critic_params.begin(), critic_params.end());
    out.push_back(&log_std);
    return out;
}

std::vector<const ad::Mat*> Policy::parameters() const {
    auto mut = const_cast<Policy*>(this)->parameters();
    return std::vector<const ad::Mat*>(mut.begin(), mut.end());
}

Eigen::VectorXd Policy::flatten_parameters() const {
    std::size_t total = 0;
    for (const ad::Mat* p : parameters()) total += static_cast<std::size_t>(p->size());
    Eigen::VectorXd flat(static_cast<Eigen::Index>(total));
    Eigen::Index at = 0;
    for (const ad::Mat* p : parameters()) {
        flat.segment(at, p->size()) = Eigen::Map<const Eigen::VectorXd>(p->data(), p->size());
        at += p->size();
    }
    return flat;
}

void Policy::unflatten_parameters(const Eigen::VectorXd& flat) {
    Eigen::Index at = 0;
    for (ad::Mat* p : parameters()) {
        Eigen::Map<Eigen::VectorXd>(p->data(), p->size()) = flat.segment(at, p->size());
        at += p->size();
    }
    if (at != flat.size()) throw ConfigError("parameter vector size mismatch");
}

namespace {

nlohmann::json network_shape(const Network& net) {
    nlohmann::json j;
    j["input_dim"] = net.cfg.input_dim;
    j["slots"] = net.cfg.slots;
    j["out_dim"] = net.cfg.out_dim;
    j["hidden"] = net.cfg.hidden;
    j["layers"] = net.cfg.layers;
    j["heads"] = net.cfg.heads;
    j["ff"] = net.cfg.ff;
    return j;
}

void require_same_shape(const nlohmann::json& stored, const nlohmann::json& current,
                        const std::string& which) {
    if (stored != current) {
        throw DataError("checkpoint shape mismatch for the " + which + " network: stored " +
                        stored.dump() + ", configured " + current.dump());
    }
}

}  // namespace

void Policy::save_checkpoint(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["actor"] = network_shape(actor);
    j["critic"] = network_shape(critic);
    j["action_dim"] = action_dim();
    const Eigen::VectorXd flat = flatten_parameters();
    j["parameters"] = std::vector<double>(flat.data(), flat.data() + flat.size());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out << j.dump() << '\n';
}

void Policy::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    nlohmann::json j;
    in >> j;
    require_same_shape(j.at("actor"), network_shape(actor), "actor");
    require_same_shape(j.at("critic"), network_shape(critic), "critic");
    if (j.at("action_dim").get<int>() != action_dim()) {
        throw DataError("checkpoint action dimension mismatch");
    }
    const auto values = j.at("parameters").get<std::vector<double>>();
    const Eigen::VectorXd flat =
        Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (flat.size() != flatten_parameters().size()) {
        throw DataError("checkpoint parameter count mismatch");
    }
    unflatten_parameters(flat);
}

}  // namespace sdperl
