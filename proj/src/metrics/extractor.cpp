#include "metrics/extractor.hpp"

#include "core/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mmgan {

namespace {

constexpr double kLeakySlope = 0.2;

Tensor randn_tensor(Rng& rng, std::vector<int64_t> shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal(0.0, stddev);
    return t;
}

} // namespace

BuiltinExtractor::BuiltinExtractor() {
    Rng rng(0);
    const int64_t chans[4] = {3, 16, 32, 64};
    for (int i = 0; i < 3; ++i) {
        int64_t cin = chans[i], cout = chans[i + 1];
        conv_w_.push_back(randn_tensor(rng, {cout, cin, 3, 3},
                                       std::sqrt(2.0 / static_cast<double>(cin * 9))));
        conv_b_.push_back(randn_tensor(rng, {cout}, 0.1));
    }
}

Tensor BuiltinExtractor::extract(const Tensor& images) {
    if (images.ndim() != 4)
        throw std::invalid_argument("extract: [B,C,H,W] tensor expected");
    NoGradGuard ng;    // frozen network, never differentiated
    int64_t B = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
    Tensor x = images;
    if (C == 1) {
        x = concat_channels({images, images, images});
    } else if (C != 3) {
        throw std::invalid_argument("extract: 1 or 3 channels expected, got " +
                                    std::to_string(C));
    }
    if (H < 8 || W < 8)
        throw std::invalid_argument("extract: images must be at least 8x8");
    for (int i = 0; i < 3; ++i)
        x = leaky_relu(bias_add(conv2d(x, conv_w_[i], 2, 1), conv_b_[i]), kLeakySlope);

    // global average pool -> [B, 64]
    int64_t F = x.dim(1), sp = x.dim(2) * x.dim(3);
    Tensor out = Tensor::zeros({B, F});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t f = 0; f < F; ++f) {
            const double* p = x.data() + (b * F + f) * sp;
            double acc = 0;
            for (int64_t i = 0; i < sp; ++i) acc += p[i];
            out.data()[b * F + f] = acc / static_cast<double>(sp);
        }
    return out;
}

} // namespace mmgan
