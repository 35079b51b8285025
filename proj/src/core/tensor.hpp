#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mmgan {

// Dense double-precision tensor with define-by-run reverse-mode autodiff.
// Backward functions are themselves composed of tensor ops, so grad() with
// create_graph=true yields differentiable gradients (needed for R1).
class Tensor;

struct GradNode {
    std::string name;
    std::vector<Tensor> inputs;
    // Given grad w.r.t. this node's output, return grads w.r.t. each input
    // (an undefined Tensor means "no gradient for this input").
    std::function<std::vector<Tensor>(const Tensor&)> backward;
};

// Fixed 64-byte alignment for all tensor storage. With vectorized BLAS-style
// kernels the rounding of a reduction can depend on the buffer's alignment;
// pinning it keeps repeated forward passes bit-identical.
template <typename T, std::size_t Align>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(Align));
    }
    template <class U>
    struct rebind { using other = AlignedAllocator<U, Align>; };
    bool operator==(const AlignedAllocator&) const { return true; }
    bool operator!=(const AlignedAllocator&) const { return false; }
};

using DataVec = std::vector<double, AlignedAllocator<double, 64>>;

struct TensorImpl {
    std::vector<int64_t> shape;
    DataVec data;
    std::shared_ptr<GradNode> node;     // null for leaves / constants
    bool requires_grad = false;         // leaf flag
    std::shared_ptr<TensorImpl> grad;   // accumulated by backward()
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, double value);
    static Tensor scalar(double value);
    static Tensor from_data(std::vector<int64_t> shape, std::vector<double> data);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int64_t>& shape() const { return impl_->shape; }
    int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(impl_->shape.size()); }
    int64_t numel() const;

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    double item() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v) { impl_->requires_grad = v; return *this; }
    bool is_leaf() const { return impl_->node == nullptr; }

    Tensor detach() const;
    Tensor clone() const;

    // Leaf gradient accumulated by backward(); undefined if none.
    Tensor grad() const;
    void zero_grad();
    void accumulate_grad(const Tensor& g);

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// ---- grad mode ----

bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
private:
    bool prev_;
};

class GradModeGuard {
public:
    explicit GradModeGuard(bool enabled);
    ~GradModeGuard();
private:
    bool prev_;
};

// ---- autograd entry points ----

// d(output)/d(inputs); output must be scalar. With create_graph the returned
// tensors carry their own graphs and can be differentiated again.
std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs,
                         bool create_graph = false);

// Accumulates into .grad of every reachable leaf with requires_grad.
void backward(const Tensor& loss);

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);         // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);         // same shape
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor square(const Tensor& a);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor softplus(const Tensor& x);

// ---- reductions / shape ----
Tensor sum(const Tensor& x);                          // -> scalar
Tensor mean(const Tensor& x);                         // -> scalar
Tensor broadcast_scalar(const Tensor& s, std::vector<int64_t> shape);
Tensor reshape(const Tensor& x, std::vector<int64_t> shape);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);      // [M,K]x[K,N]
Tensor transpose2d(const Tensor& a);

// ---- bias / channel ops (x is [B,C,H,W] or [B,C]) ----
Tensor bias_add(const Tensor& x, const Tensor& b);    // b is [C]
Tensor sum_to_channels(const Tensor& x);              // -> [C]
Tensor broadcast_channels(const Tensor& b, std::vector<int64_t> shape);
Tensor channel_scale(const Tensor& x, const Tensor& s);   // x [B,C,H,W], s [B,C]
Tensor spatial_dot(const Tensor& a, const Tensor& b);     // -> [B,C]

// ---- convolution family ----
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
Tensor conv2d_input_grad(const Tensor& g, const Tensor& w, int stride, int pad,
                         int64_t in_h, int64_t in_w);
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& g, int stride, int pad,
                          int64_t kh, int64_t kw);

// ---- resampling / channel layout ----
Tensor upsample2x(const Tensor& x);                   // bilinear, align half-pixel
Tensor upsample2x_adjoint(const Tensor& x);
Tensor concat_channels(const std::vector<Tensor>& xs);
Tensor slice_channels(const Tensor& x, int64_t c0, int64_t c1);

// ---- image-space linear ops ----
Tensor gaussian_blur(const Tensor& x, double sigma);
// Inverse-map affine warp. mats is [B,6] row-major (a b tx; c d ty) mapping
// centered output pixel coords to centered input coords; zero outside.
Tensor affine_warp(const Tensor& x, const std::vector<double>& mats);
Tensor affine_warp_adjoint(const Tensor& x, const std::vector<double>& mats);
// Per-sample 3x4 color matrix on the channel dim (x is [B,3,H,W], mats [B,12]).
Tensor color_transform(const Tensor& x, const std::vector<double>& mats);

// ---- utilities (no grad) ----
bool all_finite(const Tensor& x);
Tensor ones_like_shape(const std::vector<int64_t>& shape);

} // namespace mmgan
