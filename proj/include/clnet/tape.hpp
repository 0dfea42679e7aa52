#pragma once

#include <array>
#include <deque>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "clnet/tensor.hpp"

namespace clnet {

// Handle into a Tape node.
struct Var {
    int id = -1;
    bool ok() const { return id >= 0; }
};

// Reverse-mode autodiff over Tensors. Nodes are appended in topological
// order; backward() walks them in reverse. Everything is double precision so
// finite-difference checks hold tight tolerances.
//
// Anchor-indexed losses assume the grid layout from geometry.hpp:
// flat anchor index = (iy*W + ix)*k + a, classification logits in channels
// (2a, 2a+1) and regression offsets in channels (4a..4a+3).
class Tape {
public:
    // Constant leaf; never receives gradient.
    Var input(Tensor value);
    // Trainable leaf tied to external storage. Gradients accumulate on the
    // tape and are read back via param_grads().
    Var param(Tensor* storage);
    // Leaf that wants a gradient but is not a parameter (e.g. probing inputs).
    Var leaf(Tensor value);

    const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
    const Tensor& grad(Var v) const;

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double k);
    Var add_scalar(Var a, Var s); // s has shape [1], broadcast over a
    Var relu(Var a);
    Var tanh(Var a);
    Var sum(Var a); // scalar [1]

    Var reshape(Var a, std::vector<int> shape);
    Var slice(Var a, int offset, int len); // 1-D view copy
    Var concat(const std::vector<Var>& parts);

    Var linear(Var x, Var w, Var b);             // x[n], w[m,n], b[m] -> [m]
    Var conv2d(Var x, Var w, Var b, int stride); // x[Cin,H,W], w[Cout,Cin,kh,kw]
    Var dw_xcorr(Var x, Var z);                  // depth-wise valid correlation
    Var pointwise_affine(Var x, Var w, Var b);   // 1x1 conv, w[Cout,Cin]
    Var scale_rows(Var w, Var v);                // w[m,n] * v[m] broadcast
    Var scale_cols(Var w, Var v);                // w[m,n] * v[n] broadcast

    // Per-channel batch norm on [C,H,W]. training=true normalizes with the
    // map's own spatial statistics (and reports them through batch_mean/var
    // when non-null); training=false uses the provided running statistics.
    Var batchnorm(Var x, Var gamma, Var beta, const Tensor& running_mean,
                  const Tensor& running_var, bool training, double eps = 1e-5,
                  Tensor* batch_mean = nullptr, Tensor* batch_var = nullptr);

    // Channel-wise mean then population std over the listed spatial positions
    // (flat y*W+x, repeats allowed): [C,H,W] -> [2C].
    Var set_mean_std(Var m, const std::vector<int>& positions);

    // Mean binary softmax cross-entropy over (anchor index, label in {0,1}).
    Var softmax_ce(Var logits, int anchors_per_cell,
                   const std::vector<std::pair<int, int>>& samples);
    // Mean over anchors of the summed smooth-L1 of the 4 offset residuals.
    Var smooth_l1(Var loc, int anchors_per_cell,
                  const std::vector<std::pair<int, std::array<double, 4>>>& samples);

    void backward(Var loss);

    // (storage, accumulated gradient) for every param leaf, in creation order.
    std::vector<std::pair<Tensor*, const Tensor*>> param_grads() const;

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void()> back;
        bool requires_grad = false;
        Tensor* storage = nullptr;
    };

    // deque keeps value/grad references stable while nodes keep arriving
    std::deque<Node> nodes_;
    std::vector<int> params_;
    std::unordered_map<Tensor*, int> param_ids_;

    Var push(Tensor value, bool requires_grad);
    bool wants(Var v) const { return nodes_[static_cast<size_t>(v.id)].requires_grad; }
    Tensor& grad_buf(Var v);
};

// Piecewise smooth-L1: 0.5 r^2 for |r|<1, |r|-0.5 otherwise.
double smooth_l1_scalar(double r);

} // namespace clnet
