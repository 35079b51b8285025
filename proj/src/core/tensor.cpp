#include "core/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace mmgan {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

namespace {

thread_local bool g_grad_enabled = true;

int64_t shape_numel(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const std::vector<int64_t>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::shared_ptr<TensorImpl> new_impl(std::vector<int64_t> shape) {
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
    impl->shape = std::move(shape);
    return impl;
}

bool tensor_requires_grad(const Tensor& t) {
    return t.defined() && (t.impl()->requires_grad || t.impl()->node != nullptr);
}

// Attach a grad node to `out` if grad mode is on and any input needs grad.
void attach_node(Tensor& out, std::string name, std::vector<Tensor> inputs,
                 std::function<std::vector<Tensor>(const Tensor&, const std::vector<char>&)> backward);

struct NodeEx : GradNode {
    std::function<std::vector<Tensor>(const Tensor&, const std::vector<char>&)> backward_masked;
};

void attach_node(Tensor& out, std::string name, std::vector<Tensor> inputs,
                 std::function<std::vector<Tensor>(const Tensor&, const std::vector<char>&)> backward) {
    if (!g_grad_enabled) return;
    bool any = false;
    for (const auto& in : inputs)
        if (tensor_requires_grad(in)) { any = true; break; }
    if (!any) return;
    auto node = std::make_shared<NodeEx>();
    node->name = std::move(name);
    node->inputs = std::move(inputs);
    node->backward_masked = std::move(backward);
    out.impl()->node = node;
}

} // namespace

// ---- Tensor basics ----

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    return Tensor(new_impl(std::move(shape)));
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
    auto t = zeros(std::move(shape));
    std::fill(t.impl()->data.begin(), t.impl()->data.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) {
    return full({1}, value);
}

Tensor Tensor::from_data(std::vector<int64_t> shape, std::vector<double> data) {
    check(shape_numel(shape) == static_cast<int64_t>(data.size()),
          "from_data: shape " + shape_str(shape) + " does not match data size");
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data.assign(data.begin(), data.end());
    return Tensor(impl);
}

int64_t Tensor::numel() const { return shape_numel(impl_->shape); }

double Tensor::item() const {
    check(numel() == 1, "item(): tensor is not scalar");
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return tensor_requires_grad(*this); }

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;   // copy; detached views are rare and small here
    return Tensor(impl);
}

Tensor Tensor::clone() const { return detach(); }

Tensor Tensor::grad() const {
    if (!impl_->grad) return Tensor();
    return Tensor(impl_->grad);
}

void Tensor::zero_grad() { impl_->grad = nullptr; }

void Tensor::accumulate_grad(const Tensor& g) {
    check(g.shape() == impl_->shape, "accumulate_grad: shape mismatch");
    if (!impl_->grad) {
        impl_->grad = std::make_shared<TensorImpl>();
        impl_->grad->shape = impl_->shape;
        impl_->grad->data = g.impl()->data;
        return;
    }
    auto& dst = impl_->grad->data;
    const auto& src = g.impl()->data;
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// ---- grad mode ----

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

GradModeGuard::GradModeGuard(bool enabled) : prev_(g_grad_enabled) { g_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { g_grad_enabled = prev_; }

// ---- autograd engine ----

namespace {

void topo_order(const std::shared_ptr<TensorImpl>& root,
                std::vector<std::shared_ptr<TensorImpl>>& order) {
    std::unordered_set<TensorImpl*> visited;
    // iterative post-order: (impl, child_index)
    std::vector<std::pair<std::shared_ptr<TensorImpl>, size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [impl, idx] = stack.back();
        auto* node = impl->node.get();
        if (!node || idx >= node->inputs.size()) {
            order.push_back(impl);
            stack.pop_back();
            continue;
        }
        auto child = node->inputs[idx].impl();
        ++idx;
        if (child && child->node && !visited.count(child.get())) {
            visited.insert(child.get());
            stack.emplace_back(child, 0);
        }
    }
    std::reverse(order.begin(), order.end());   // root first
}

// Runs reverse accumulation from `root`, returning accumulated grads for
// every impl in `targets` (plus leaves if collect_leaves).
std::unordered_map<TensorImpl*, Tensor> run_backward(
        const Tensor& root, const std::unordered_set<TensorImpl*>& targets,
        bool collect_leaves, bool create_graph) {
    check(root.defined() && root.numel() == 1, "autograd: root must be a scalar");
    std::unordered_map<TensorImpl*, Tensor> grads;
    if (!root.impl()->node) {
        return grads;
    }
    std::vector<std::shared_ptr<TensorImpl>> order;
    topo_order(root.impl(), order);

    // Needed-set: an impl needs a gradient if it is a target/leaf-target or
    // feeds one through the graph. Process inputs-before-consumers.
    std::unordered_map<TensorImpl*, char> needed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* impl = it->get();
        char need = 0;
        if (targets.count(impl)) need = 1;
        if (collect_leaves && !impl->node && impl->requires_grad) need = 1;
        if (impl->node) {
            for (const auto& in : impl->node->inputs) {
                if (!in.defined()) continue;
                auto f = needed.find(in.impl().get());
                if (f != needed.end() && f->second) { need = 1; break; }
                if (targets.count(in.impl().get())) { need = 1; break; }
                if (collect_leaves && !in.impl()->node && in.impl()->requires_grad) { need = 1; break; }
            }
        }
        needed[impl] = need;
    }

    grads[root.impl().get()] = Tensor::full(root.shape(), 1.0);

    GradModeGuard guard(create_graph);
    for (const auto& impl : order) {
        auto* node = static_cast<NodeEx*>(impl->node.get());
        if (!node) continue;
        auto git = grads.find(impl.get());
        if (git == grads.end()) continue;
        Tensor gout = git->second;
        std::vector<char> needs(node->inputs.size(), 0);
        bool any = false;
        for (size_t i = 0; i < node->inputs.size(); ++i) {
            const auto& in = node->inputs[i];
            if (!in.defined()) continue;
            TensorImpl* ip = in.impl().get();
            char n = 0;
            if (in.impl()->node) {
                auto f = needed.find(ip);
                n = (f != needed.end() && f->second) ? 1 : 0;
            } else if (targets.count(ip) || (collect_leaves && in.impl()->requires_grad)) {
                n = 1;
            }
            needs[i] = n;
            any = any || n;
        }
        if (!any) continue;
        auto gs = node->backward_masked(gout, needs);
        check(gs.size() == node->inputs.size(),
              "autograd: op '" + node->name + "' returned wrong grad count");
        for (size_t i = 0; i < gs.size(); ++i) {
            if (!needs[i] || !gs[i].defined()) continue;
            TensorImpl* ip = node->inputs[i].impl().get();
            check(gs[i].shape() == node->inputs[i].shape(),
                  "autograd: op '" + node->name + "' grad shape mismatch for input " +
                  std::to_string(i) + ": " + shape_str(gs[i].shape()) + " vs " +
                  shape_str(node->inputs[i].shape()));
            auto f = grads.find(ip);
            if (f == grads.end()) grads[ip] = gs[i];
            else f->second = add(f->second, gs[i]);
        }
        // Keep memory bounded: the accumulated grad for this interior impl is
        // no longer needed once its node has been processed.
        if (!targets.count(impl.get())) grads.erase(impl.get());
    }
    return grads;
}

} // namespace

std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs,
                         bool create_graph) {
    std::unordered_set<TensorImpl*> targets;
    for (const auto& in : inputs) targets.insert(in.impl().get());
    auto grads = run_backward(output, targets, /*collect_leaves=*/false, create_graph);
    std::vector<Tensor> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) {
        auto f = grads.find(in.impl().get());
        if (f != grads.end()) out.push_back(f->second);
        else out.push_back(Tensor::zeros(in.shape()));
    }
    return out;
}

void backward(const Tensor& loss) {
    auto grads = run_backward(loss, {}, /*collect_leaves=*/true, /*create_graph=*/false);
    // run_backward erases interior grads; remaining entries are leaves.
    for (auto& [impl, g] : grads) {
        if (!impl->node && impl->requires_grad) {
            if (!impl->grad) {
                impl->grad = std::make_shared<TensorImpl>();
                impl->grad->shape = impl->shape;
                impl->grad->data = g.impl()->data;
            } else {
                auto& dst = impl->grad->data;
                const auto& src = g.impl()->data;
                for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
            }
        }
    }
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
          " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    attach_node(out, "add", {a, b}, [](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{g, g};
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "sub: shape mismatch");
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    attach_node(out, "sub", {a, b}, [](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{g, neg(g)};
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mul: shape mismatch");
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    attach_node(out, "mul", {a, b}, [a, b](const Tensor& g, const std::vector<char>& needs) {
        std::vector<Tensor> gs(2);
        if (needs[0]) gs[0] = mul(g, b);
        if (needs[1]) gs[1] = mul(g, a);
        return gs;
    });
    return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * s;
    attach_node(out, "scale", {a}, [s](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{scale(g, s)};
    });
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + s;
    attach_node(out, "add_scalar", {a}, [](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{g};
    });
    return out;
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor out = Tensor::zeros(x.shape());
    Tensor mask = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    double* pm = mask.data();
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) {
        if (px[i] >= 0) { po[i] = px[i]; pm[i] = 1.0; }
        else { po[i] = px[i] * slope; pm[i] = slope; }
    }
    attach_node(out, "leaky_relu", {x}, [mask](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{mul(g, mask)};
    });
    return out;
}

Tensor softplus(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    Tensor sig = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    double* ps = sig.data();
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) {
        double v = px[i];
        po[i] = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
        ps[i] = 1.0 / (1.0 + std::exp(-v));
    }
    attach_node(out, "softplus", {x}, [sig](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{mul(g, sig)};
    });
    return out;
}

// ---- reductions / shape ----

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    const double* px = x.data();
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) acc += px[i];
    Tensor out = Tensor::scalar(acc);
    auto shape = x.shape();
    attach_node(out, "sum", {x}, [shape](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{broadcast_scalar(g, shape)};
    });
    return out;
}

Tensor mean(const Tensor& x) {
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor broadcast_scalar(const Tensor& s, std::vector<int64_t> shape) {
    check(s.numel() == 1, "broadcast_scalar: source must be scalar");
    Tensor out = Tensor::full(shape, s.data()[0]);
    attach_node(out, "broadcast_scalar", {s}, [](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{sum(g)};
    });
    return out;
}

Tensor reshape(const Tensor& x, std::vector<int64_t> shape) {
    check(shape_numel(shape) == x.numel(), "reshape: numel mismatch");
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = shape;
    impl->data = x.impl()->data;    // copy
    Tensor out(impl);
    auto orig = x.shape();
    attach_node(out, "reshape", {x}, [orig](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{reshape(g, orig)};
    });
    return out;
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = Tensor::zeros({m, n});
    CMapMat ma(a.data(), m, k), mb(b.data(), k, n);
    MapMat mo(out.data(), m, n);
    mo.noalias() = ma * mb;
    attach_node(out, "matmul", {a, b}, [a, b](const Tensor& g, const std::vector<char>& needs) {
        std::vector<Tensor> gs(2);
        if (needs[0]) gs[0] = matmul(g, transpose2d(b));
        if (needs[1]) gs[1] = matmul(transpose2d(a), g);
        return gs;
    });
    return out;
}

Tensor transpose2d(const Tensor& a) {
    check(a.ndim() == 2, "transpose2d: rank-2 tensor expected");
    int64_t m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros({n, m});
    CMapMat ma(a.data(), m, n);
    MapMat mo(out.data(), n, m);
    mo = ma.transpose();
    attach_node(out, "transpose2d", {a}, [](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{transpose2d(g)};
    });
    return out;
}

// ---- bias / channel ops ----

namespace {
void channel_dims(const Tensor& x, int64_t& batch, int64_t& ch, int64_t& sp) {
    check(x.ndim() == 2 || x.ndim() == 4, "expected [B,C] or [B,C,H,W], got " + shape_str(x.shape()));
    batch = x.dim(0);
    ch = x.dim(1);
    sp = x.ndim() == 4 ? x.dim(2) * x.dim(3) : 1;
}
} // namespace

Tensor bias_add(const Tensor& x, const Tensor& b) {
    int64_t bs, ch, sp;
    channel_dims(x, bs, ch, sp);
    check(b.ndim() == 1 && b.dim(0) == ch, "bias_add: bias shape mismatch");
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < bs; ++i)
        for (int64_t c = 0; c < ch; ++c) {
            double bv = pb[c];
            const double* src = px + (i * ch + c) * sp;
            double* dst = po + (i * ch + c) * sp;
            for (int64_t s = 0; s < sp; ++s) dst[s] = src[s] + bv;
        }
    attach_node(out, "bias_add", {x, b}, [](const Tensor& g, const std::vector<char>& needs) {
        std::vector<Tensor> gs(2);
        if (needs[0]) gs[0] = g;
        if (needs[1]) gs[1] = sum_to_channels(g);
        return gs;
    });
    return out;
}

Tensor sum_to_channels(const Tensor& x) {
    int64_t bs, ch, sp;
    channel_dims(x, bs, ch, sp);
    Tensor out = Tensor::zeros({ch});
    const double* px = x.data();
    double* po = out.data();
    for (int64_t i = 0; i < bs; ++i)
        for (int64_t c = 0; c < ch; ++c) {
            const double* src = px + (i * ch + c) * sp;
            double acc = 0.0;
            for (int64_t s = 0; s < sp; ++s) acc += src[s];
            po[c] += acc;
        }
    auto shape = x.shape();
    attach_node(out, "sum_to_channels", {x}, [shape](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{broadcast_channels(g, shape)};
    });
    return out;
}

Tensor broadcast_channels(const Tensor& b, std::vector<int64_t> shape) {
    check(shape.size() == 2 || shape.size() == 4, "broadcast_channels: bad target shape");
    int64_t bs = shape[0], ch = shape[1];
    int64_t sp = shape.size() == 4 ? shape[2] * shape[3] : 1;
    check(b.ndim() == 1 && b.dim(0) == ch, "broadcast_channels: channel mismatch");
    Tensor out = Tensor::zeros(shape);
    const double* pb = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < bs; ++i)
        for (int64_t c = 0; c < ch; ++c) {
            double v = pb[c];
            double* dst = po + (i * ch + c) * sp;
            for (int64_t s = 0; s < sp; ++s) dst[s] = v;
        }
    attach_node(out, "broadcast_channels", {b}, [](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{sum_to_channels(g)};
    });
    return out;
}

Tensor channel_scale(const Tensor& x, const Tensor& s) {
    int64_t bs, ch, sp;
    channel_dims(x, bs, ch, sp);
    check(s.ndim() == 2 && s.dim(0) == bs && s.dim(1) == ch,
          "channel_scale: scale must be [B,C]");
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    const double* ps = s.data();
    double* po = out.data();
    for (int64_t i = 0; i < bs; ++i)
        for (int64_t c = 0; c < ch; ++c) {
            double sv = ps[i * ch + c];
            const double* src = px + (i * ch + c) * sp;
            double* dst = po + (i * ch + c) * sp;
            for (int64_t k = 0; k < sp; ++k) dst[k] = src[k] * sv;
        }
    attach_node(out, "channel_scale", {x, s}, [x, s](const Tensor& g, const std::vector<char>& needs) {
        std::vector<Tensor> gs(2);
        if (needs[0]) gs[0] = channel_scale(g, s);
        if (needs[1]) gs[1] = spatial_dot(x, g);
        return gs;
    });
    return out;
}

Tensor spatial_dot(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "spatial_dot: shape mismatch");
    int64_t bs, ch, sp;
    channel_dims(a, bs, ch, sp);
    Tensor out = Tensor::zeros({bs, ch});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int64_t i = 0; i < bs; ++i)
        for (int64_t c = 0; c < ch; ++c) {
            const double* x = pa + (i * ch + c) * sp;
            const double* y = pb + (i * ch + c) * sp;
            double acc = 0.0;
            for (int64_t k = 0; k < sp; ++k) acc += x[k] * y[k];
            po[i * ch + c] = acc;
        }
    attach_node(out, "spatial_dot", {a, b}, [a, b](const Tensor& g, const std::vector<char>& needs) {
        std::vector<Tensor> gs(2);
        if (needs[0]) gs[0] = channel_scale(b, g);
        if (needs[1]) gs[1] = channel_scale(a, g);
        return gs;
    });
    return out;
}

// ---- convolution family ----

namespace {

// col is [C*kh*kw, OH*OW], row-major.
void im2col(const double* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int stride, int pad, int64_t OH, int64_t OW, double* col) {
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t i = 0; i < kh; ++i) {
            for (int64_t j = 0; j < kw; ++j) {
                double* row = col + ((c * kh + i) * kw + j) * (OH * OW);
                for (int64_t oy = 0; oy < OH; ++oy) {
                    int64_t iy = oy * stride - pad + i;
                    if (iy < 0 || iy >= H) {
                        std::memset(row + oy * OW, 0, sizeof(double) * static_cast<size_t>(OW));
                        continue;
                    }
                    const double* src = x + (c * H + iy) * W;
                    for (int64_t ox = 0; ox < OW; ++ox) {
                        int64_t ix = ox * stride - pad + j;
                        row[oy * OW + ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int stride, int pad, int64_t OH, int64_t OW, double* x) {
    for (int64_t c = 0; c < C; ++c) {
        for (int64_t i = 0; i < kh; ++i) {
            for (int64_t j = 0; j < kw; ++j) {
                const double* row = col + ((c * kh + i) * kw + j) * (OH * OW);
                for (int64_t oy = 0; oy < OH; ++oy) {
                    int64_t iy = oy * stride - pad + i;
                    if (iy < 0 || iy >= H) continue;
                    double* dst = x + (c * H + iy) * W;
                    for (int64_t ox = 0; ox < OW; ++ox) {
                        int64_t ix = ox * stride - pad + j;
                        if (ix >= 0 && ix < W) dst[ix] += row[oy * OW + ox];
                    }
                }
            }
        }
    }
}

void conv_out_size(int64_t H, int64_t W, int64_t kh, int64_t kw, int stride, int pad,
                   int64_t& OH, int64_t& OW) {
    OH = (H + 2 * pad - kh) / stride + 1;
    OW = (W + 2 * pad - kw) / stride + 1;
    check(OH >= 1 && OW >= 1, "conv2d: output would be empty");
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
    check(x.ndim() == 4 && w.ndim() == 4, "conv2d: rank-4 tensors expected");
    check(x.dim(1) == w.dim(1), "conv2d: channel mismatch (input " +
          std::to_string(x.dim(1)) + ", weight expects " + std::to_string(w.dim(1)) + ")");
    int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int64_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    int64_t OH, OW;
    conv_out_size(H, W, kh, kw, stride, pad, OH, OW);
    Tensor out = Tensor::zeros({B, O, OH, OW});
    int64_t ckk = C * kh * kw;
    DataVec col(static_cast<size_t>(ckk * OH * OW));
    CMapMat wm(w.data(), O, ckk);
    for (int64_t b = 0; b < B; ++b) {
        im2col(x.data() + b * C * H * W, C, H, W, kh, kw, stride, pad, OH, OW, col.data());
        CMapMat cm(col.data(), ckk, OH * OW);
        MapMat om(out.data() + b * O * OH * OW, O, OH * OW);
        om.noalias() = wm * cm;
    }
    attach_node(out, "conv2d", {x, w},
                [x, w, stride, pad, H, W, kh, kw](const Tensor& g, const std::vector<char>& needs) {
        std::vector<Tensor> gs(2);
        if (needs[0]) gs[0] = conv2d_input_grad(g, w, stride, pad, H, W);
        if (needs[1]) gs[1] = conv2d_weight_grad(x, g, stride, pad, kh, kw);
        return gs;
    });
    return out;
}

Tensor conv2d_input_grad(const Tensor& g, const Tensor& w, int stride, int pad,
                         int64_t in_h, int64_t in_w) {
    check(g.ndim() == 4 && w.ndim() == 4 && g.dim(1) == w.dim(0),
          "conv2d_input_grad: shape mismatch");
    int64_t B = g.dim(0), O = g.dim(1), OH = g.dim(2), OW = g.dim(3);
    int64_t C = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    Tensor out = Tensor::zeros({B, C, in_h, in_w});
    int64_t ckk = C * kh * kw;
    DataVec col(static_cast<size_t>(ckk * OH * OW));
    CMapMat wm(w.data(), O, ckk);
    for (int64_t b = 0; b < B; ++b) {
        CMapMat gm(g.data() + b * O * OH * OW, O, OH * OW);
        MapMat cm(col.data(), ckk, OH * OW);
        cm.noalias() = wm.transpose() * gm;
        col2im_add(col.data(), C, in_h, in_w, kh, kw, stride, pad, OH, OW,
                   out.data() + b * C * in_h * in_w);
    }
    attach_node(out, "conv2d_input_grad", {g, w},
                [g, w, stride, pad](const Tensor& gg, const std::vector<char>& needs) {
        std::vector<Tensor> gs(2);
        if (needs[0]) gs[0] = conv2d(gg, w, stride, pad);
        if (needs[1]) gs[1] = conv2d_weight_grad(gg, g, stride, pad, w.dim(2), w.dim(3));
        return gs;
    });
    return out;
}

Tensor conv2d_weight_grad(const Tensor& x, const Tensor& g, int stride, int pad,
                          int64_t kh, int64_t kw) {
    check(x.ndim() == 4 && g.ndim() == 4 && x.dim(0) == g.dim(0),
          "conv2d_weight_grad: shape mismatch");
    int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int64_t O = g.dim(1), OH = g.dim(2), OW = g.dim(3);
    Tensor out = Tensor::zeros({O, C, kh, kw});
    int64_t ckk = C * kh * kw;
    DataVec col(static_cast<size_t>(ckk * OH * OW));
    MapMat om(out.data(), O, ckk);
    for (int64_t b = 0; b < B; ++b) {
        im2col(x.data() + b * C * H * W, C, H, W, kh, kw, stride, pad, OH, OW, col.data());
        CMapMat cm(col.data(), ckk, OH * OW);
        CMapMat gm(g.data() + b * O * OH * OW, O, OH * OW);
        om.noalias() += gm * cm.transpose();
    }
    attach_node(out, "conv2d_weight_grad", {x, g},
                [x, g, stride, pad, kh, kw](const Tensor& gw, const std::vector<char>& needs) {
        std::vector<Tensor> gs(2);
        if (needs[0]) gs[0] = conv2d_input_grad(g, gw, stride, pad, x.dim(2), x.dim(3));
        if (needs[1]) gs[1] = conv2d(x, gw, stride, pad);
        return gs;
    });
    return out;
}

// ---- resampling ----

namespace {

// 1D bilinear 2x upsample (half-pixel centers): out[2i] = .75 in[i] + .25 in[i-1],
// out[2i+1] = .75 in[i] + .25 in[i+1], clamped at edges.
void up1d(const double* in, int64_t n, double* out) {
    for (int64_t i = 0; i < n; ++i) {
        int64_t lo = std::max<int64_t>(i - 1, 0);
        int64_t hi = std::min<int64_t>(i + 1, n - 1);
        out[2 * i] = 0.75 * in[i] + 0.25 * in[lo];
        out[2 * i + 1] = 0.75 * in[i] + 0.25 * in[hi];
    }
}

void up1d_adj(const double* gout, int64_t n, double* gin) {
    std::fill(gin, gin + n, 0.0);
    for (int64_t i = 0; i < n; ++i) {
        int64_t lo = std::max<int64_t>(i - 1, 0);
        int64_t hi = std::min<int64_t>(i + 1, n - 1);
        gin[i] += 0.75 * gout[2 * i];
        gin[lo] += 0.25 * gout[2 * i];
        gin[i] += 0.75 * gout[2 * i + 1];
        gin[hi] += 0.25 * gout[2 * i + 1];
    }
}

} // namespace

Tensor upsample2x(const Tensor& x) {
    check(x.ndim() == 4, "upsample2x: rank-4 tensor expected");
    int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor out = Tensor::zeros({B, C, 2 * H, 2 * W});
    std::vector<double> rowbuf(static_cast<size_t>(2 * W));
    std::vector<double> colin(static_cast<size_t>(H)), colout(static_cast<size_t>(2 * H));
    std::vector<double> tmp(static_cast<size_t>(H * 2 * W));
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* src = x.data() + bc * H * W;
        double* dst = out.data() + bc * 4 * H * W;
        for (int64_t y = 0; y < H; ++y) {
            up1d(src + y * W, W, rowbuf.data());
            std::memcpy(tmp.data() + y * 2 * W, rowbuf.data(), sizeof(double) * static_cast<size_t>(2 * W));
        }
        for (int64_t xcol = 0; xcol < 2 * W; ++xcol) {
            for (int64_t y = 0; y < H; ++y) colin[static_cast<size_t>(y)] = tmp[y * 2 * W + xcol];
            up1d(colin.data(), H, colout.data());
            for (int64_t y = 0; y < 2 * H; ++y) dst[y * 2 * W + xcol] = colout[static_cast<size_t>(y)];
        }
    }
    attach_node(out, "upsample2x", {x}, [](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{upsample2x_adjoint(g)};
    });
    return out;
}

Tensor upsample2x_adjoint(const Tensor& x) {
    check(x.ndim() == 4 && x.dim(2) % 2 == 0 && x.dim(3) % 2 == 0,
          "upsample2x_adjoint: even spatial dims expected");
    int64_t B = x.dim(0), C = x.dim(1), H2 = x.dim(2), W2 = x.dim(3);
    int64_t H = H2 / 2, W = W2 / 2;
    Tensor out = Tensor::zeros({B, C, H, W});
    std::vector<double> tmp(static_cast<size_t>(H * W2));
    std::vector<double> colin(static_cast<size_t>(H2)), colout(static_cast<size_t>(H));
    std::vector<double> rowout(static_cast<size_t>(W));
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* src = x.data() + bc * H2 * W2;
        double* dst = out.data() + bc * H * W;
        for (int64_t xcol = 0; xcol < W2; ++xcol) {
            for (int64_t y = 0; y < H2; ++y) colin[static_cast<size_t>(y)] = src[y * W2 + xcol];
            up1d_adj(colin.data(), H, colout.data());
            for (int64_t y = 0; y < H; ++y) tmp[y * W2 + xcol] = colout[static_cast<size_t>(y)];
        }
        for (int64_t y = 0; y < H; ++y) {
            up1d_adj(tmp.data() + y * W2, W, rowout.data());
            std::memcpy(dst + y * W, rowout.data(), sizeof(double) * static_cast<size_t>(W));
        }
    }
    attach_node(out, "upsample2x_adjoint", {x}, [](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{upsample2x(g)};
    });
    return out;
}

// ---- channel concat / slice ----

static Tensor embed_channels(const Tensor& x, int64_t c0, int64_t total_c);

Tensor concat_channels(const std::vector<Tensor>& xs) {
    check(!xs.empty(), "concat_channels: empty input list");
    int64_t B = xs[0].dim(0);
    int64_t H = xs[0].ndim() == 4 ? xs[0].dim(2) : 1;
    int64_t W = xs[0].ndim() == 4 ? xs[0].dim(3) : 1;
    int64_t total = 0;
    for (const auto& t : xs) {
        check(t.ndim() == xs[0].ndim() && t.dim(0) == B, "concat_channels: batch mismatch");
        if (t.ndim() == 4)
            check(t.dim(2) == H && t.dim(3) == W, "concat_channels: spatial mismatch");
        total += t.dim(1);
    }
    std::vector<int64_t> shape = xs[0].ndim() == 4
        ? std::vector<int64_t>{B, total, H, W} : std::vector<int64_t>{B, total};
    Tensor out = Tensor::zeros(shape);
    int64_t sp = H * W;
    double* po = out.data();
    int64_t off = 0;
    for (const auto& t : xs) {
        int64_t c = t.dim(1);
        const double* pt = t.data();
        for (int64_t b = 0; b < B; ++b)
            std::memcpy(po + (b * total + off) * sp, pt + b * c * sp,
                        sizeof(double) * static_cast<size_t>(c * sp));
        off += c;
    }
    std::vector<int64_t> offsets;
    offsets.reserve(xs.size());
    int64_t o = 0;
    for (const auto& t : xs) { offsets.push_back(o); o += t.dim(1); }
    attach_node(out, "concat_channels", xs,
                [xs, offsets](const Tensor& g, const std::vector<char>& needs) {
        std::vector<Tensor> gs(xs.size());
        for (size_t i = 0; i < xs.size(); ++i)
            if (needs[i]) gs[i] = slice_channels(g, offsets[i], offsets[i] + xs[i].dim(1));
        return gs;
    });
    return out;
}

Tensor slice_channels(const Tensor& x, int64_t c0, int64_t c1) {
    check(x.ndim() == 2 || x.ndim() == 4, "slice_channels: rank-2/4 tensor expected");
    check(0 <= c0 && c0 < c1 && c1 <= x.dim(1), "slice_channels: range out of bounds");
    int64_t B = x.dim(0), C = x.dim(1);
    int64_t sp = x.ndim() == 4 ? x.dim(2) * x.dim(3) : 1;
    int64_t c = c1 - c0;
    std::vector<int64_t> shape = x.ndim() == 4
        ? std::vector<int64_t>{B, c, x.dim(2), x.dim(3)} : std::vector<int64_t>{B, c};
    Tensor out = Tensor::zeros(shape);
    const double* px = x.data();
    double* po = out.data();
    for (int64_t b = 0; b < B; ++b)
        std::memcpy(po + b * c * sp, px + (b * C + c0) * sp,
                    sizeof(double) * static_cast<size_t>(c * sp));
    attach_node(out, "slice_channels", {x}, [c0, C](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{embed_channels(g, c0, C)};
    });
    return out;
}

static Tensor embed_channels(const Tensor& x, int64_t c0, int64_t total_c) {
    int64_t B = x.dim(0), c = x.dim(1);
    int64_t sp = x.ndim() == 4 ? x.dim(2) * x.dim(3) : 1;
    std::vector<int64_t> shape = x.ndim() == 4
        ? std::vector<int64_t>{B, total_c, x.dim(2), x.dim(3)} : std::vector<int64_t>{B, total_c};
    Tensor out = Tensor::zeros(shape);
    const double* px = x.data();
    double* po = out.data();
    for (int64_t b = 0; b < B; ++b)
        std::memcpy(po + (b * total_c + c0) * sp, px + b * c * sp,
                    sizeof(double) * static_cast<size_t>(c * sp));
    attach_node(out, "embed_channels", {x}, [c0, c](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{slice_channels(g, c0, c0 + c)};
    });
    return out;
}

// ---- image-space linear ops ----

namespace {

std::vector<double> gaussian_kernel_1d(double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double acc = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<size_t>(i + radius)] = v;
        acc += v;
    }
    for (auto& v : k) v /= acc;
    return k;
}

} // namespace

Tensor gaussian_blur(const Tensor& x, double sigma) {
    check(x.ndim() == 4, "gaussian_blur: rank-4 tensor expected");
    if (sigma <= 0.0) return x;
    auto kern = gaussian_kernel_1d(sigma);
    int radius = static_cast<int>(kern.size() / 2);
    int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor out = Tensor::zeros(x.shape());
    std::vector<double> tmp(static_cast<size_t>(H * W));
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* src = x.data() + bc * H * W;
        double* dst = out.data() + bc * H * W;
        // horizontal
        for (int64_t y = 0; y < H; ++y)
            for (int64_t xc = 0; xc < W; ++xc) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    int64_t xi = xc + t;
                    if (xi >= 0 && xi < W) acc += kern[static_cast<size_t>(t + radius)] * src[y * W + xi];
                }
                tmp[static_cast<size_t>(y * W + xc)] = acc;
            }
        // vertical
        for (int64_t y = 0; y < H; ++y)
            for (int64_t xc = 0; xc < W; ++xc) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    int64_t yi = y + t;
                    if (yi >= 0 && yi < H) acc += kern[static_cast<size_t>(t + radius)] * tmp[static_cast<size_t>(yi * W + xc)];
                }
                dst[y * W + xc] = acc;
            }
    }
    // symmetric kernel with zero padding: the operator is self-adjoint
    attach_node(out, "gaussian_blur", {x}, [sigma](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{gaussian_blur(g, sigma)};
    });
    return out;
}

Tensor affine_warp(const Tensor& x, const std::vector<double>& mats) {
    check(x.ndim() == 4, "affine_warp: rank-4 tensor expected");
    int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    check(mats.size() == static_cast<size_t>(B * 6), "affine_warp: expected B*6 matrix entries");
    Tensor out = Tensor::zeros(x.shape());
    double cx = (W - 1) * 0.5, cy = (H - 1) * 0.5;
    for (int64_t b = 0; b < B; ++b) {
        const double* m = mats.data() + b * 6;
        for (int64_t y = 0; y < H; ++y) {
            double yo = y - cy;
            for (int64_t xc = 0; xc < W; ++xc) {
                double xo = xc - cx;
                double u = m[0] * xo + m[1] * yo + m[2] + cx;
                double v = m[3] * xo + m[4] * yo + m[5] + cy;
                int64_t x0 = static_cast<int64_t>(std::floor(u));
                int64_t y0 = static_cast<int64_t>(std::floor(v));
                double fx = u - x0, fy = v - y0;
                for (int64_t c = 0; c < C; ++c) {
                    const double* src = x.data() + (b * C + c) * H * W;
                    auto at = [&](int64_t yy, int64_t xx) -> double {
                        return (yy >= 0 && yy < H && xx >= 0 && xx < W) ? src[yy * W + xx] : 0.0;
                    };
                    double val = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                                 fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
                    out.data()[((b * C + c) * H + y) * W + xc] = val;
                }
            }
        }
    }
    attach_node(out, "affine_warp", {x}, [mats](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{affine_warp_adjoint(g, mats)};
    });
    return out;
}

Tensor affine_warp_adjoint(const Tensor& x, const std::vector<double>& mats) {
    check(x.ndim() == 4, "affine_warp_adjoint: rank-4 tensor expected");
    int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    check(mats.size() == static_cast<size_t>(B * 6), "affine_warp_adjoint: expected B*6 entries");
    Tensor out = Tensor::zeros(x.shape());
    double cx = (W - 1) * 0.5, cy = (H - 1) * 0.5;
    for (int64_t b = 0; b < B; ++b) {
        const double* m = mats.data() + b * 6;
        for (int64_t y = 0; y < H; ++y) {
            double yo = y - cy;
            for (int64_t xc = 0; xc < W; ++xc) {
                double xo = xc - cx;
                double u = m[0] * xo + m[1] * yo + m[2] + cx;
                double v = m[3] * xo + m[4] * yo + m[5] + cy;
                int64_t x0 = static_cast<int64_t>(std::floor(u));
                int64_t y0 = static_cast<int64_t>(std::floor(v));
                double fx = u - x0, fy = v - y0;
                for (int64_t c = 0; c < C; ++c) {
                    double g = x.data()[((b * C + c) * H + y) * W + xc];
                    double* dst = out.data() + (b * C + c) * H * W;
                    auto put = [&](int64_t yy, int64_t xx, double wgt) {
                        if (yy >= 0 && yy < H && xx >= 0 && xx < W) dst[yy * W + xx] += wgt * g;
                    };
                    put(y0, x0, (1 - fy) * (1 - fx));
                    put(y0, x0 + 1, (1 - fy) * fx);
                    put(y0 + 1, x0, fy * (1 - fx));
                    put(y0 + 1, x0 + 1, fy * fx);
                }
            }
        }
    }
    attach_node(out, "affine_warp_adjoint", {x}, [mats](const Tensor& g, const std::vector<char>&) {
        return std::vector<Tensor>{affine_warp(g, mats)};
    });
    return out;
}

Tensor color_transform(const Tensor& x, const std::vector<double>& mats) {
    check(x.ndim() == 4 && x.dim(1) == 3, "color_transform: [B,3,H,W] tensor expected");
    int64_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
    check(mats.size() == static_cast<size_t>(B * 12), "color_transform: expected B*12 entries");
    Tensor out = Tensor::zeros(x.shape());
    int64_t sp = H * W;
    for (int64_t b = 0; b < B; ++b) {
        const double* m = mats.data() + b * 12;
        const double* r = x.data() + (b * 3 + 0) * sp;
        const double* g = x.data() + (b * 3 + 1) * sp;
        const double* bl = x.data() + (b * 3 + 2) * sp;
        double* orr = out.data() + (b * 3 + 0) * sp;
        double* og = out.data() + (b * 3 + 1) * sp;
        double* ob = out.data() + (b * 3 + 2) * sp;
        for (int64_t i = 0; i < sp; ++i) {
            orr[i] = m[0] * r[i] + m[1] * g[i] + m[2] * bl[i] + m[3];
            og[i] = m[4] * r[i] + m[5] * g[i] + m[6] * bl[i] + m[7];
            ob[i] = m[8] * r[i] + m[9] * g[i] + m[10] * bl[i] + m[11];
        }
    }
    attach_node(out, "color_transform", {x}, [mats](const Tensor& g, const std::vector<char>&) {
        int64_t B = static_cast<int64_t>(mats.size()) / 12;
        std::vector<double> mt(mats.size(), 0.0);
        for (int64_t b = 0; b < B; ++b) {
            const double* m = mats.data() + b * 12;
            double* t = mt.data() + b * 12;
            // transpose of the 3x3 part, zero offset
            t[0] = m[0]; t[1] = m[4]; t[2] = m[8];
            t[4] = m[1]; t[5] = m[5]; t[6] = m[9];
            t[8] = m[2]; t[9] = m[6]; t[10] = m[10];
        }
        return std::vector<Tensor>{color_transform(g, mt)};
    });
    return out;
}

// ---- utilities ----

bool all_finite(const Tensor& x) {
    const double* p = x.data();
    int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

Tensor ones_like_shape(const std::vector<int64_t>& shape) {
    return Tensor::full(shape, 1.0);
}

} // namespace mmgan
