#include "garmentgen/autograd.hpp"

#include <cmath>
#include <unordered_set>

#include "garmentgen/kernels.hpp"
#include "garmentgen/params.hpp"

namespace garmentgen {

namespace {
thread_local bool g_grad_enabled = true;

bool any_requires(std::initializer_list<const Var*> vs) {
    if (!g_grad_enabled) return false;
    for (const Var* v : vs)
        if (*v && (*v)->requires_grad) return true;
    return false;
}

Var make_node(Tensor value, std::initializer_list<const Var*> inputs) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = any_requires(inputs);
    if (n->requires_grad)
        for (const Var* v : inputs)
            if (*v) n->inputs.push_back(*v);
    return n;
}

bool wants(const Var& v) { return v && v->requires_grad; }
}  // namespace

Tensor& Node::grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor::like(value);
    return grad;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

Var leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad && g_grad_enabled;
    return n;
}

Var param_leaf(const Parameter& p) {
    auto n = leaf(p.value, p.trainable);
    n->param = &p;
    return n;
}

void backward(const Var& root, GradStore& grads, double seed) {
    if (root->value.size() != 1) throw ShapeError("backward: root must be scalar");
    if (!root->requires_grad) return;

    // Iterative post-order DFS -> topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->inputs.size()) {
            Node* next = node->inputs[idx++].get();
            if (next->requires_grad && seen.insert(next).second) stack.emplace_back(next, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->grad_buffer()[0] += seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->grad.empty()) continue;
        if (n->backward) n->backward(*n);
        if (n->param) {
            auto& g = grads[n->param->name];
            if (g.shape() != n->grad.shape()) g = Tensor::like(n->grad);
            g += n->grad;
        }
    }
    // Interior nodes release their buffers; leaves keep grads for inspection.
    for (Node* n : order) {
        if (n->inputs.empty()) continue;
        n->grad = Tensor();
        n->backward = nullptr;
    }
}

namespace ops {

Var add(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "add");
    auto out = make_node(a->value + b->value, {&a, &b});
    if (out->requires_grad)
        out->backward = [a, b](Node& n) {
            if (wants(a)) a->grad_buffer() += n.grad;
            if (wants(b)) b->grad_buffer() += n.grad;
        };
    return out;
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "sub");
    auto out = make_node(a->value - b->value, {&a, &b});
    if (out->requires_grad)
        out->backward = [a, b](Node& n) {
            if (wants(a)) a->grad_buffer() += n.grad;
            if (wants(b)) b->grad_buffer() -= n.grad;
        };
    return out;
}

Var scale(const Var& a, double s) {
    auto out = make_node(a->value * s, {&a});
    if (out->requires_grad)
        out->backward = [a, s](Node& n) { a->grad_buffer() += n.grad * s; };
    return out;
}

Var reshape(const Var& a, Shape shape) {
    auto out = make_node(a->value.reshaped(std::move(shape)), {&a});
    if (out->requires_grad)
        out->backward = [a](Node& n) {
            auto& g = a->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        };
    return out;
}

Var silu(const Var& a) {
    Tensor y = Tensor::like(a->value);
    const auto& x = a->value;
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / (1.0 + std::exp(-x[i]));
    auto out = make_node(std::move(y), {&a});
    if (out->requires_grad)
        out->backward = [a](Node& n) {
            auto& g = a->grad_buffer();
            const auto& x = a->value;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-x[i]));
                g[i] += n.grad[i] * s * (1.0 + x[i] * (1.0 - s));
            }
        };
    return out;
}

Var conv2d(const Var& x, const Var& w, const Var& b) {
    const auto& xs = x->value.shape();
    const auto& ws = w->value.shape();
    if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3] || ws[2] % 2 == 0)
        throw ShapeError("conv2d: bad shapes x" + shape_str(xs) + " w" + shape_str(ws));
    if (b && b->value.size() != static_cast<std::size_t>(ws[0])) throw ShapeError("conv2d: bias size");
    const kernels::ConvGeom g{xs[0], ws[0], xs[1], xs[2], ws[2]};
    Tensor y({g.out_channels, g.height, g.width});
    kernels::active::conv2d_forward(g, x->value.ptr(), w->value.ptr(), b ? b->value.ptr() : nullptr, y.ptr());
    auto out = make_node(std::move(y), {&x, &w, &b});
    if (out->requires_grad)
        out->backward = [x, w, b, g](Node& n) {
            kernels::active::conv2d_backward(g, x->value.ptr(), w->value.ptr(), n.grad.ptr(),
                                             wants(x) ? x->grad_buffer().ptr() : nullptr,
                                             wants(w) ? w->grad_buffer().ptr() : nullptr,
                                             wants(b) ? b->grad_buffer().ptr() : nullptr);
        };
    return out;
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps) {
    const auto& xs = x->value.shape();
    if (xs.size() != 3 || xs[0] % groups != 0) throw ShapeError("group_norm: channels not divisible by groups");
    const kernels::NormGeom g{xs[0], xs[1] * xs[2], groups, eps};
    Tensor y(xs);
    auto stats = std::make_shared<std::vector<double>>(2 * static_cast<std::size_t>(groups));
    kernels::active::group_norm_forward(g, x->value.ptr(), gamma->value.ptr(), beta->value.ptr(), y.ptr(),
                                        stats->data(), stats->data() + groups);
    auto out = make_node(std::move(y), {&x, &gamma, &beta});
    if (out->requires_grad)
        out->backward = [x, gamma, beta, g, stats](Node& n) {
            kernels::active::group_norm_backward(g, x->value.ptr(), gamma->value.ptr(), stats->data(),
                                                 stats->data() + g.groups, n.grad.ptr(),
                                                 wants(x) ? x->grad_buffer().ptr() : nullptr,
                                                 wants(gamma) ? gamma->grad_buffer().ptr() : nullptr,
                                                 wants(beta) ? beta->grad_buffer().ptr() : nullptr);
        };
    return out;
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const auto& xs = x->value.shape();
    const auto& ws = w->value.shape();
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
        throw ShapeError("linear: bad shapes x" + shape_str(xs) + " w" + shape_str(ws));
    const int rows = xs[0], in = xs[1], outd = ws[0];
    Tensor y({rows, outd});
    kernels::active::linear_forward(rows, in, outd, x->value.ptr(), w->value.ptr(), b ? b->value.ptr() : nullptr,
                                    y.ptr());
    auto out = make_node(std::move(y), {&x, &w, &b});
    if (out->requires_grad)
        out->backward = [x, w, b, rows, in, outd](Node& n) {
            kernels::active::linear_backward(rows, in, outd, x->value.ptr(), w->value.ptr(), n.grad.ptr(),
                                             wants(x) ? x->grad_buffer().ptr() : nullptr,
                                             wants(w) ? w->grad_buffer().ptr() : nullptr,
                                             wants(b) ? b->grad_buffer().ptr() : nullptr);
        };
    return out;
}

Var add_channel_bias(const Var& x, const Var& v) {
    const auto& xs = x->value.shape();
    if (xs.size() != 3 || v->value.size() != static_cast<std::size_t>(xs[0]))
        throw ShapeError("add_channel_bias: bad shapes");
    const int c = xs[0];
    const int hw = xs[1] * xs[2];
    Tensor y = x->value;
    for (int ch = 0; ch < c; ++ch)
        for (int s = 0; s < hw; ++s) y[static_cast<std::size_t>(ch) * hw + s] += v->value[ch];
    auto out = make_node(std::move(y), {&x, &v});
    if (out->requires_grad)
        out->backward = [x, v, c, hw](Node& n) {
            if (wants(x)) x->grad_buffer() += n.grad;
            if (wants(v)) {
                auto& g = v->grad_buffer();
                for (int ch = 0; ch < c; ++ch) {
                    double s = 0.0;
                    for (int i = 0; i < hw; ++i) s += n.grad[static_cast<std::size_t>(ch) * hw + i];
                    g[ch] += s;
                }
            }
        };
    return out;
}

Var avg_pool2(const Var& x) {
    const auto& xs = x->value.shape();
    if (xs.size() != 3 || xs[1] % 2 || xs[2] % 2) throw ShapeError("avg_pool2: odd spatial size " + shape_str(xs));
    const int c = xs[0], h = xs[1] / 2, w = xs[2] / 2;
    Tensor y({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                y.at(ch, i, j) = 0.25 * (x->value.at(ch, 2 * i, 2 * j) + x->value.at(ch, 2 * i, 2 * j + 1) +
                                         x->value.at(ch, 2 * i + 1, 2 * j) + x->value.at(ch, 2 * i + 1, 2 * j + 1));
    auto out = make_node(std::move(y), {&x});
    if (out->requires_grad)
        out->backward = [x, c, h, w](Node& n) {
            auto& g = x->grad_buffer();
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const double v = 0.25 * n.grad.at(ch, i, j);
                        g.at(ch, 2 * i, 2 * j) += v;
                        g.at(ch, 2 * i, 2 * j + 1) += v;
                        g.at(ch, 2 * i + 1, 2 * j) += v;
                        g.at(ch, 2 * i + 1, 2 * j + 1) += v;
                    }
        };
    return out;
}

Var upsample2(const Var& x) {
    const auto& xs = x->value.shape();
    if (xs.size() != 3) throw ShapeError("upsample2: expected [C,H,W]");
    const int c = xs[0], h = xs[1], w = xs[2];
    Tensor y({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < 2 * h; ++i)
            for (int j = 0; j < 2 * w; ++j) y.at(ch, i, j) = x->value.at(ch, i / 2, j / 2);
    auto out = make_node(std::move(y), {&x});
    if (out->requires_grad)
        out->backward = [x, c, h, w](Node& n) {
            auto& g = x->grad_buffer();
            for (int ch = 0; ch < c; ++ch)
                for (int i = 0; i < 2 * h; ++i)
                    for (int j = 0; j < 2 * w; ++j) g.at(ch, i / 2, j / 2) += n.grad.at(ch, i, j);
        };
    return out;
}

Var concat_channels(const Var& a, const Var& b) {
    const auto& as = a->value.shape();
    const auto& bs = b->value.shape();
    if (as.size() != 3 || bs.size() != 3 || as[1] != bs[1] || as[2] != bs[2])
        throw ShapeError("concat_channels: " + shape_str(as) + " vs " + shape_str(bs));
    std::vector<double> v(a->value.vec());
    v.insert(v.end(), b->value.vec().begin(), b->value.vec().end());
    auto out = make_node(Tensor({as[0] + bs[0], as[1], as[2]}, std::move(v)), {&a, &b});
    if (out->requires_grad)
        out->backward = [a, b](Node& n) {
            const std::size_t na = a->value.size();
            if (wants(a)) {
                auto& g = a->grad_buffer();
                for (std::size_t i = 0; i < na; ++i) g[i] += n.grad[i];
            }
            if (wants(b)) {
                auto& g = b->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[na + i];
            }
        };
    return out;
}

Var to_tokens(const Var& x) {
    const auto& xs = x->value.shape();
    if (xs.size() != 3) throw ShapeError("to_tokens: expected [C,H,W]");
    const int c = xs[0], hw = xs[1] * xs[2];
    Tensor y({hw, c});
    for (int ch = 0; ch < c; ++ch)
        for (int s = 0; s < hw; ++s) y[static_cast<std::size_t>(s) * c + ch] = x->value[static_cast<std::size_t>(ch) * hw + s];
    auto out = make_node(std::move(y), {&x});
    if (out->requires_grad)
        out->backward = [x, c, hw](Node& n) {
            auto& g = x->grad_buffer();
            for (int ch = 0; ch < c; ++ch)
                for (int s = 0; s < hw; ++s)
                    g[static_cast<std::size_t>(ch) * hw + s] += n.grad[static_cast<std::size_t>(s) * c + ch];
        };
    return out;
}

Var from_tokens(const Var& x, int height, int width) {
    const auto& xs = x->value.shape();
    if (xs.size() != 2 || xs[0] != height * width) throw ShapeError("from_tokens: token count mismatch");
    const int c = xs[1], hw = xs[0];
    Tensor y({c, height, width});
    for (int ch = 0; ch < c; ++ch)
        for (int s = 0; s < hw; ++s) y[static_cast<std::size_t>(ch) * hw + s] = x->value[static_cast<std::size_t>(s) * c + ch];
    auto out = make_node(std::move(y), {&x});
    if (out->requires_grad)
        out->backward = [x, c, hw](Node& n) {
            auto& g = x->grad_buffer();
            for (int ch = 0; ch < c; ++ch)
                for (int s = 0; s < hw; ++s)
                    g[static_cast<std::size_t>(s) * c + ch] += n.grad[static_cast<std::size_t>(ch) * hw + s];
        };
    return out;
}

Var concat_rows(const Var& a, const Var& b) {
    const auto& as = a->value.shape();
    const auto& bs = b->value.shape();
    if (as.size() != 2 || bs.size() != 2 || as[1] != bs[1])
        throw ShapeError("concat_rows: " + shape_str(as) + " vs " + shape_str(bs));
    std::vector<double> v(a->value.vec());
    v.insert(v.end(), b->value.vec().begin(), b->value.vec().end());
    auto out = make_node(Tensor({as[0] + bs[0], as[1]}, std::move(v)), {&a, &b});
    if (out->requires_grad)
        out->backward = [a, b](Node& n) {
            const std::size_t na = a->value.size();
            if (wants(a)) {
                auto& g = a->grad_buffer();
                for (std::size_t i = 0; i < na; ++i) g[i] += n.grad[i];
            }
            if (wants(b)) {
                auto& g = b->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[na + i];
            }
        };
    return out;
}

Var attention(const Var& q, const Var& k, const Var& v, int heads) {
    const auto& qs = q->value.shape();
    const auto& ks = k->value.shape();
    const auto& vs = v->value.shape();
    if (qs.size() != 2 || ks.size() != 2 || vs.size() != 2 || qs[1] != ks[1] || ks != vs)
        throw ShapeError("attention: Q" + shape_str(qs) + " K" + shape_str(ks) + " V" + shape_str(vs));
    if (heads < 1 || qs[1] % heads) throw ShapeError("attention: dim not divisible by heads");
    if (ks[0] == 0) throw ShapeError("attention: empty key sequence");
    const kernels::AttnGeom g{qs[0], ks[0], qs[1], heads};
    Tensor y({qs[0], qs[1]});
    auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(heads) * g.q_len * g.kv_len);
    kernels::active::attention_forward(g, q->value.ptr(), k->value.ptr(), v->value.ptr(), y.ptr(), probs->data());
    auto out = make_node(std::move(y), {&q, &k, &v});
    if (out->requires_grad)
        out->backward = [q, k, v, g, probs](Node& n) {
            kernels::active::attention_backward(g, q->value.ptr(), k->value.ptr(), v->value.ptr(), probs->data(),
                                                n.grad.ptr(), wants(q) ? q->grad_buffer().ptr() : nullptr,
                                                wants(k) ? k->grad_buffer().ptr() : nullptr,
                                                wants(v) ? v->grad_buffer().ptr() : nullptr);
        };
    return out;
}

Var mse(const Var& a, const Tensor& target) {
    require_same_shape(a->value, target, "mse");
    const double n = static_cast<double>(target.size());
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = a->value[i] - target[i];
        s += d * d;
    }
    auto out = make_node(Tensor({1}, {s / n}), {&a});
    if (out->requires_grad)
        out->backward = [a, target, n](Node& node) {
            auto& g = a->grad_buffer();
            const double go = node.grad[0];
            for (std::size_t i = 0; i < target.size(); ++i) g[i] += go * 2.0 * (a->value[i] - target[i]) / n;
        };
    return out;
}

}  // namespace ops
}  // namespace garmentgen
