#pragma once

// Minimal reverse-mode autodiff over Tensor values.
//
// A Var is a node in a dynamically built graph. Ops record a backward closure
// only when some input requires a gradient, so inference graphs cost no more
// than the forward math. Gradients reaching parameter leaves are collected in
// a GradStore keyed by the Parameter they were read from.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "garmentgen/tensor.hpp"

namespace garmentgen {

struct Parameter;

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;
    const Parameter* param = nullptr;

    Tensor& grad_buffer();
};

using Var = std::shared_ptr<Node>;

/// Accumulated parameter gradients, keyed by parameter name.
using GradStore = std::map<std::string, Tensor>;

/// Disables gradient recording on this thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

Var constant(Tensor value);
Var leaf(Tensor value, bool requires_grad);
Var param_leaf(const Parameter& p);

/// Backpropagate d(root)/d(.) scaled by `seed` and add parameter gradients to
/// `grads`. `root` must be a scalar (shape [1]).
void backward(const Var& root, GradStore& grads, double seed = 1.0);

namespace ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var reshape(const Var& a, Shape shape);
Var silu(const Var& a);

/// x [Cin,H,W], w [Cout,Cin,k,k], b [Cout] -> [Cout,H,W], same padding.
Var conv2d(const Var& x, const Var& w, const Var& b);
/// x [C,H,W]; per-group statistics over (channels in group) x H x W.
Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps = 1e-5);
/// x [N,in], w [out,in], b [out] (b may be null) -> [N,out].
Var linear(const Var& x, const Var& w, const Var& b);
/// x [C,H,W] + v[C] broadcast over space.
Var add_channel_bias(const Var& x, const Var& v);
Var avg_pool2(const Var& x);
Var upsample2(const Var& x);
Var concat_channels(const Var& a, const Var& b);
/// [C,H,W] -> [H*W, C]
Var to_tokens(const Var& x);
/// [H*W, C] -> [C,H,W]
Var from_tokens(const Var& x, int height, int width);
/// Row concatenation of [n1,d] and [n2,d].
Var concat_rows(const Var& a, const Var& b);
/// softmax(Q K^T / sqrt(d_head)) V per head; Q [sq,d], K,V [sk,d].
Var attention(const Var& q, const Var& k, const Var& v, int heads = 1);
/// Mean over all elements of (a - target)^2 -> [1].
Var mse(const Var& a, const Tensor& target);

}  // namespace ops
}  // namespace garmentgen
