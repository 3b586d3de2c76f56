#pragma once

#include <vector>

#include <Eigen/Dense>

namespace sdperl::ad {

using Mat = Eigen::MatrixXd;

// Minimal reverse-mode tape over dense matrices. Nodes are appended in
// topological order; backward() walks them in reverse. Scalars are 1x1
// matrices. All shapes are fixed at node creation; mismatches are programming
// errors and assert.
class Tape {
  public:
    // Leaves.
    int constant(Mat value);
    int param(Mat value);  // participates in gradients

    // y = a @ b
    int matmul(int a, int b);
    // y = a @ b^T
    int matmul_bt(int a, int b);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);  // elementwise
    // each row of a gets the 1xN row vector b added
    int add_rowvec(int a, int b);
    int scale(int a, double s);
    int add_const(int a, double c);
    int neg(int a) { return scale(a, -1.0); }
    int tanh_(int a);
    int exp_(int a);
    int clip(int a, double lo, double hi);
    int min_(int a, int b);  // elementwise
    int row(int a, int r);   // 1xN view of row r
    int sum(int a);          // 1x1
    int mean(int a);         // 1x1
    // row-wise softmax over entries where allow != 0; disallowed outputs are 0
    int masked_softmax_rows(int a, Mat allow);
    // row-wise layer norm with 1xN gain/bias
    int layer_norm_rows(int x, int gain, int bias);

    const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Mat& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    // Seeds d(root)/d(root) = 1 (root must be 1x1) and accumulates gradients
    // into every node reachable from parameters.
    void backward(int root);

    std::size_t size() const { return nodes_.size(); }

  private:
    enum class Op {
        Leaf,
        MatMul,
        MatMulBt,
        Add,
        Sub,
        Mul,
        AddRowVec,
        Scale,
        AddConst,
        Tanh,
        Exp,
        Clip,
        Min,
        Row,
        Sum,
        Mean,
        MaskedSoftmax,
        LayerNorm,
    };

    struct Node {
        Op op = Op::Leaf;
        int a = -1;
        int b = -1;
        int c = -1;      // layer norm bias
        double s0 = 0;   // scalar payloads (scale factor, clip bounds, row index)
        double s1 = 0;
        Mat value;
        Mat grad;
        Mat aux;   // op-specific cache (softmax output mask, layernorm x-hat)
        Mat aux2;  // layernorm inverse stddev per row
        bool needs_grad = false;
    };

    int push(Node n);
    bool wants(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

    static constexpr double kLayerNormEps = 1e-5;

    std::vector<Node> nodes_;
};

}  // namespace sdperl::ad
