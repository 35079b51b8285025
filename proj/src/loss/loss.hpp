#pragma once

#include "core/tensor.hpp"
#include "core/types.hpp"

#include <functional>

namespace mmgan {

struct LossConfig {
    double r1_gamma = 1.0;
    int r1_interval = 16;
    double blur_sigma_init = 2.0;
    int64_t blur_ramp_images = 50000;
};

// Non-saturating logistic generator loss: mean over batch, sum over heads of
// softplus(-logit). Throws on non-finite input.
Tensor g_loss(const Tensor& fake_logits);

// mean_B sum_K [ softplus(-real) + softplus(fake) ]
Tensor d_loss(const Tensor& real_logits, const Tensor& fake_logits);

// Real-side per-sample weights [B, K]; each column must sum to 1 over the
// samples it includes (entries of excluded samples are exactly 0). The fake
// side is averaged over the full batch for every head.
Tensor d_loss_weighted(const Tensor& real_logits, const Tensor& fake_logits,
                       const Tensor& real_weights);

// gamma/2 * E_b ||d(sum logits)/d(inputs)||^2 over all modality tensors of the
// tuple. Returns a graph-carrying scalar (differentiable w.r.t. D parameters).
Tensor r1_penalty(const std::function<Tensor(const ModalityTuple&)>& d_fn,
                  const ModalityTuple& real_batch, double gamma);

// Linear ramp from blur_sigma_init at 0 images to 0 at blur_ramp_images.
double blur_sigma(int64_t step_images, const LossConfig& cfg);

} // namespace mmgan
