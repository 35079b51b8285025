#pragma once

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "core/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mmgan {

// One style-modulated synthesis block: per-channel input scaling by an affine
// transform of w, 3x3 convolution, bias, leaky nonlinearity, and a running
// magnitude normalizer. Optionally upsamples its input 2x first.
struct SynthesisBlock {
    Tensor style_w;     // [w_dim, Cin]
    Tensor style_b;     // [Cin], init 1 so the initial modulation is identity
    Tensor conv_w;      // [Cout, Cin, 3, 3]
    Tensor conv_b;      // [Cout]
    Tensor ema_mag;     // [1], running mean-square of activations
    bool upsample_before = false;
};

struct BranchHead {
    std::vector<SynthesisBlock> blocks;
    Tensor out_w;       // [C_m, C_last, 1, 1]
    Tensor out_b;       // [C_m]
};

// Mapping network (2 FC layers) + shared trunk + per-modality branches.
class Generator {
public:
    Generator(const TrainConfig& cfg, Rng& rng);

    // z -> w
    Tensor map_latent(const Tensor& z) const;

    // w -> one image per configured modality. When `training` the running
    // magnitude estimates are updated. `trunk_capture`, when non-null,
    // receives the shared trunk activation tensor.
    ModalityTuple synthesize(const Tensor& w, bool training = false,
                             Tensor* trunk_capture = nullptr);

    ModalityTuple generate(const Tensor& z, bool training = false);

    // All trainable tensors, stable order, prefixed names.
    void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
    // Non-trainable state (running magnitude estimates).
    void visit_buffers(const std::function<void(const std::string&, Tensor&)>& fn);

    int64_t latent_dim() const { return latent_dim_; }
    int64_t w_dim() const { return w_dim_; }
    int trunk_blocks() const { return static_cast<int>(trunk_.size()); }
    int branch_blocks() const { return branches_.empty() ? 0
                                : static_cast<int>(branches_[0].blocks.size()); }
    const std::vector<ModalitySpec>& modalities() const { return modalities_; }

    // Sample a batch of standard-normal latent codes.
    Tensor sample_latents(int64_t batch, Rng& rng) const;

private:
    Tensor run_block(SynthesisBlock& blk, const Tensor& x, const Tensor& w, bool training);

    std::vector<ModalitySpec> modalities_;
    int64_t latent_dim_ = 0;
    int64_t w_dim_ = 0;
    int64_t resolution_ = 0;
    double ema_decay_ = 0.999;

    Tensor map_w1_, map_b1_, map_w2_, map_b2_;
    Tensor fourier_;                 // [C0, 4, 4] fixed coordinate features
    std::vector<SynthesisBlock> trunk_;
    std::vector<BranchHead> branches_;   // one per modality, config order
};

// (1-t) * w_a + t * w_b; t must lie in [0, 1].
Tensor interpolate_w(const Tensor& w_a, const Tensor& w_b, double t);

} // namespace mmgan
