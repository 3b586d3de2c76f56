#include "sdperl/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace sdperl::ad {

int Tape::push(Node n) {
    if (n.op != Op::Leaf) {
        n.needs_grad = (n.a >= 0 && wants(n.a)) || (n.b >= 0 && wants(n.b)) || (n.c >= 0 && wants(n.c));
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Mat value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

int Tape::param(Mat value) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = true;
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    assert(value(a).cols() == value(b).rows());
    n.value = value(a) * value(b);
    return push(std::move(n));
}

int Tape::matmul_bt(int a, int b) {
    Node n;
    n.op = Op::MatMulBt;
    n.a = a;
    n.b = b;
    assert(value(a).cols() == value(b).cols());
    n.value = value(a) * value(b).transpose();
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    assert(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols());
    n.value = value(a) + value(b);
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    assert(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols());
    n.value = value(a) - value(b);
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    assert(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols());
    n.value = value(a).cwiseProduct(value(b));
    return push(std::move(n));
}

int Tape::add_rowvec(int a, int b) {
    Node n;
    n.op = Op::AddRowVec;
    n.a = a;
    n.b = b;
    assert(value(b).rows() == 1 && value(a).cols() == value(b).cols());
    n.value = value(a).rowwise() + value(b).row(0);
    return push(std::move(n));
}

int Tape::scale(int a, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.s0 = s;
    n.value = value(a) * s;
    return push(std::move(n));
}

int Tape::add_const(int a, double c) {
    Node n;
    n.op = Op::AddConst;
    n.a = a;
    n.s0 = c;
    n.value = value(a).array() + c;
    return push(std::move(n));
}

int Tape::tanh_(int a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a;
    n.value = value(a).array().tanh();
    return push(std::move(n));
}

int Tape::exp_(int a) {
    Node n;
    n.op = Op::Exp;
    n.a = a;
    n.value = value(a).array().exp();
    return push(std::move(n));
}

int Tape::clip(int a, double lo, double hi) {
    Node n;
    n.op = Op::Clip;
    n.a = a;
    n.s0 = lo;
    n.s1 = hi;
    n.value = value(a).array().max(lo).min(hi);
    return push(std::move(n));
}

int Tape::min_(int a, int b) {
    Node n;
    n.op = Op::Min;
    n.a = a;
    n.b = b;
    assert(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols());
    n.value = value(a).cwiseMin(value(b));
    return push(std::move(n));
}

int Tape::row(int a, int r) {
    Node n;
    n.op = Op::Row;
    n.a = a;
    n.s0 = static_cast<double>(r);
    n.value = value(a).row(r);
    return push(std::move(n));
}

int Tape::sum(int a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    n.value = Mat::Constant(1, 1, value(a).sum());
    return push(std::move(n));
}

int Tape::mean(int a) {
    Node n;
    n.op = Op::Mean;
    n.a = a;
    n.value = Mat::Constant(1, 1, value(a).mean());
    return push(std::move(n));
}

int Tape::masked_softmax_rows(int a, Mat allow) {
    Node n;
    n.op = Op::MaskedSoftmax;
    n.a = a;
    const Mat& x = value(a);
    assert(allow.rows() == x.rows() && allow.cols() == x.cols());
    Mat y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (allow(r, c) != 0.0) m = std::max(m, x(r, c));
        }
        double total = 0;
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double e = allow(r, c) != 0.0 ? std::exp(x(r, c) - m) : 0.0;
            y(r, c) = e;
            total += e;
        }
        assert(total > 0 && "softmax row fully masked");
        y.row(r) /= total;
    }
    n.value = y;
    n.aux = std::move(allow);
    return push(std::move(n));
}

int Tape::layer_norm_rows(int x, int gain, int bias) {
    Node n;
    n.op = Op::LayerNorm;
    n.a = x;
    n.b = gain;
    n.c = bias;
    const Mat& v = value(x);
    assert(value(gain).rows() == 1 && value(gain).cols() == v.cols());
    assert(value(bias).rows() == 1 && value(bias).cols() == v.cols());
    Mat xhat(v.rows(), v.cols());
    Mat inv(v.rows(), 1);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double mu = v.row(r).mean();
        const double var = (v.row(r).array() - mu).square().mean();
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv(r, 0) = is;
        xhat.row(r) = (v.row(r).array() - mu) * is;
    }
    n.value = (xhat.array().rowwise() * value(gain).row(0).array()).rowwise() +
              value(bias).row(0).array();
    n.aux = std::move(xhat);
    n.aux2 = std::move(inv);
    return push(std::move(n));
}

void Tape::backward(int root) {
    assert(value(root).rows() == 1 && value(root).cols() == 1);
    for (auto& n : nodes_) {
        if (n.needs_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    }
    auto& r = nodes_[static_cast<std::size_t>(root)];
    if (!r.needs_grad) return;
    r.grad(0, 0) = 1.0;

    for (int id = root; id >= 0; --id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad || n.op == Op::Leaf) continue;
        const Mat& g = n.grad;
        auto acc = [&](int parent, const Mat& contribution) {
            if (parent >= 0 && wants(parent)) {
                nodes_[static_cast<std::size_t>(parent)].grad += contribution;
            }
        };
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul:
                acc(n.a, g * value(n.b).transpose());
                acc(n.b, value(n.a).transpose() * g);
                break;
            case Op::MatMulBt:
                acc(n.a, g * value(n.b));
                acc(n.b, g.transpose() * value(n.a));
                break;
            case Op::Add:
                acc(n.a, g);
                acc(n.b, g);
                break;
            case Op::Sub:
                acc(n.a, g);
                acc(n.b, -g);
                break;
            case Op::Mul:
                acc(n.a, g.cwiseProduct(value(n.b)));
                acc(n.b, g.cwiseProduct(value(n.a)));
                break;
            case Op::AddRowVec:
                acc(n.a, g);
                acc(n.b, g.colwise().sum());
                break;
            case Op::Scale:
                acc(n.a, g * n.s0);
                break;
            case Op::AddConst:
                acc(n.a, g);
                break;
            case Op::Tanh:
                acc(n.a, g.cwiseProduct((1.0 - n.value.array().square()).matrix()));
                break;
            case Op::Exp:
                acc(n.a, g.cwiseProduct(n.value));
                break;
            case Op::Clip: {
                const Mat& x = value(n.a);
                Mat inside = ((x.array() >= n.s0) && (x.array() <= n.s1)).cast<double>();
                acc(n.a, g.cwiseProduct(inside));
                break;
            }
            case Op::Min: {
                const Mat& xa = value(n.a);
                const Mat& xb = value(n.b);
                Mat pick_a = (xa.array() <= xb.array()).cast<double>();
                acc(n.a, g.cwiseProduct(pick_a));
                acc(n.b, g.cwiseProduct((1.0 - pick_a.array()).matrix()));
                break;
            }
            case Op::Row: {
                Mat d = Mat::Zero(value(n.a).rows(), value(n.a).cols());
                d.row(static_cast<Eigen::Index>(n.s0)) = g;
                acc(n.a, d);
                break;
            }
            case Op::Sum:
                acc(n.a, Mat::Constant(value(n.a).rows(), value(n.a).cols(), g(0, 0)));
                break;
            case Op::Mean:
                acc(n.a, Mat::Constant(value(n.a).rows(), value(n.a).cols(),
                                        g(0, 0) / static_cast<double>(value(n.a).size())));
                break;
            case Op::MaskedSoftmax: {
                // dx = y * (dy - sum(dy * y)) per row; masked slots have y = 0.
                const Mat& y = n.value;
                Mat dx(y.rows(), y.cols());
                for (Eigen::Index r = 0; r < y.rows(); ++r) {
                    const double dot = (g.row(r).array() * y.row(r).array()).sum();
                    dx.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
                }
                acc(n.a, dx);
                break;
            }
            case Op::LayerNorm: {
                const Mat& xhat = n.aux;
                const Mat& inv = n.aux2;
                const Eigen::Index d = n.value.cols();
                acc(n.b, (g.array() * xhat.array()).colwise().sum().matrix());
                acc(n.c, g.colwise().sum());
                if (n.a >= 0 && wants(n.a)) {
                    Mat t = g.array().rowwise() * value(n.b).row(0).array();
                    Mat dx(t.rows(), t.cols());
                    for (Eigen::Index r = 0; r < t.rows(); ++r) {
                        const double mean_t = t.row(r).mean();
                        const double mean_tx = (t.row(r).array() * xhat.row(r).array()).mean();
                        dx.row(r) = inv(r, 0) * (t.row(r).array() - mean_t -
                                                 xhat.row(r).array() * mean_tx)
                                                    .matrix();
                        (void)d;
                    }
                    nodes_[static_cast<std::size_t>(n.a)].grad += dx;
                }
                break;
            }
        }
    }
}

}  // namespace sdperl::ad
