#pragma once

#include <functional>
#include <vector>

#include "dehaze/tensor.hpp"

namespace dehaze {

using Var = int;

/// Reverse-mode tape. One tape per optimization step: ops append nodes, a
/// single backward() pass runs the recorded closures in reverse order.
class Tape {
public:
    Var leaf(Tensor value, bool track = false);

    const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v)].value; }
    bool tracked(Var v) const { return nodes_[static_cast<std::size_t>(v)].track; }

    /// Gradient buffer, allocated (zero) on first access.
    Tensor& grad(Var v);
    bool has_grad(Var v) const { return nodes_[static_cast<std::size_t>(v)].grad_alloc; }

    /// Seeds d(root)/d(root) = 1 and propagates. root must be a scalar node.
    void backward(Var root);

    std::size_t node_count() const { return nodes_.size(); }

    // Used by op implementations.
    Var emit(Tensor value, bool track, std::function<void(Tape&)> back);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool track = false;
        bool grad_alloc = false;
        std::function<void(Tape&)> back;
    };
    std::vector<Node> nodes_;
};

// --- structural ---
Var detach(Tape& t, Var x);
Var concat_channels(Tape& t, Var a, Var b);  // N×C×H×W along C

// --- convolution family (N×C×H×W activations) ---
// w: Cout×Cin×K×K, b: Cout. Zero padding, floor output size.
Var conv2d(Tape& t, Var x, Var w, Var b, int stride, int pad);
// w: Cin×Cout×K×K. out = (in-1)*stride - 2*pad + k + out_pad.
Var conv_transpose2d(Tape& t, Var x, Var w, Var b, int stride, int pad, int out_pad);
Var instance_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);

// --- pointwise ---
Var relu(Tape& t, Var x);
Var leaky_relu(Tape& t, Var x, double slope);
Var tanh_op(Tape& t, Var x);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var affine(Tape& t, Var x, double scale, double shift);
Var abs_op(Tape& t, Var x);
Var square(Tape& t, Var x);

// --- resampling ---
Var upsample_nearest2x(Tape& t, Var x);
Var resize_bilinear(Tape& t, Var x, int out_h, int out_w);

// --- reductions ---
Var mean_all(Tape& t, Var x);  // -> scalar [1]
Var weighted_sum(Tape& t, const std::vector<Var>& terms, const std::vector<double>& weights);

/// Windowed minimum over channels and a patch×patch neighborhood (replicate
/// borders), per pixel: N×C×H×W -> N×1×H×W. Soft mode uses a sharpness-scaled
/// log-sum-exp with exact gradients; hard mode routes the gradient to the
/// first minimizer in scan order.
Var window_channel_min(Tape& t, Var x, int patch, bool soft, double sharpness);

/// mean|horizontal forward diff| + mean|vertical forward diff|, scalar.
Var tv_l1(Tape& t, Var x);

}  // namespace dehaze
