#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dcseg/tensor.hpp"

namespace dcseg {

/// Reverse-mode gradient tape over a fixed primitive set.
///
/// Nodes are evaluated eagerly as they are recorded; backward() replays the
/// tape in reverse and accumulates gradients into every recorded node.
/// Reductions run in fixed row-major order, so results are deterministic
/// within one build.
class Tape {
  public:
    enum class Op {
        Input,
        Param,
        Conv2d,          // x:[Cin,H,W], w:[Cout,Cin,k,k], zero pad (k-1)/2
        Relu,
        Add,             // same shape, or [C] broadcast over [C,H,W], or [1]
        Mul,
        ScalarMul,
        Exp,
        Log,
        Sum,             // all elements -> [1]
        Mean,
        MaxReduce,       // all elements -> [1]
        Matmul,          // a:[M,K] x b:[K,N] -> [M,N]; b may be rank-1 [K]
        LogSoftmaxRows,  // [N,K], log-sum-exp with max subtraction
        GatherRows,      // [N,D] + indices -> [M,D]
        L2NormalizeRows, // [N,D] (or [D] as a single row)
        GlobalAvgPool,   // [C,H,W] -> [C]
        NearestUpsample, // [C,H,W] -> [C,fH,fW]
        PixelsToRows,    // [C,H,W] -> [H*W,C]
    };

    struct Node {
        Op op;
        std::vector<int> inputs;
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        int iattr = 0;        // stride / upsample factor
        double sattr = 0.0;   // scalar multiplier
        std::vector<int> indices;
        std::string name;
    };

    int input(Tensor t, std::string name = "");
    int param(Tensor t, std::string name);

    int conv2d(int x, int w, int stride);
    int relu(int x);
    int add(int a, int b);
    int mul(int a, int b);
    int scalar_mul(int x, double s);
    int exp_(int x);
    int log_(int x);
    int sum(int x);
    int mean(int x);
    int max_reduce(int x);
    int matmul(int a, int b);
    int log_softmax_rows(int x);
    int gather_rows(int x, std::vector<int> indices);
    int l2_normalize_rows(int x);
    int global_avg_pool(int x);
    int nearest_upsample(int x, int factor);
    int pixels_to_rows(int x);

    const Tensor& value(int id) const { return nodes_[check(id)].value; }
    const Tensor& grad(int id) const { return nodes_[check(id)].grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Seed the output node and propagate to every reachable node.
    /// Parameters the output does not depend on keep zero gradients.
    void backward(int output, const Tensor& seed);

    /// Inject an externally computed gradient (e.g. from an analytic loss
    /// kernel) without clearing already accumulated seeds.
    void accumulate_grad(int id, const Tensor& g);

    /// Propagate all injected seeds down the tape in one reverse sweep.
    void run_backward();

    void zero_grads();

  private:
    int push(Node n);
    int check(int id) const;
    void backprop_node(int id);

    std::vector<Node> nodes_;
    bool backward_ready_ = false;
};

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// `f` must be scalar-valued; `analytic` holds df/dx at `point`.
double finite_diff_check(const std::function<double(const Tensor&)>& f, const Tensor& point,
                         const Tensor& analytic, double step);

}  // namespace dcseg
