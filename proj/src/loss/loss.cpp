#include "loss/loss.hpp"

#include <stdexcept>

namespace mmgan {

namespace {

void require_finite(const Tensor& t, const char* what) {
    if (!all_finite(t))
        throw std::invalid_argument(std::string(what) + ": non-finite logits");
}

} // namespace

Tensor g_loss(const Tensor& fake_logits) {
    require_finite(fake_logits, "g_loss");
    if (fake_logits.ndim() != 2)
        throw std::invalid_argument("g_loss: logits must be [B, K]");
    int64_t batch = fake_logits.dim(0);
    return scale(sum(softplus(neg(fake_logits))), 1.0 / static_cast<double>(batch));
}

Tensor d_loss(const Tensor& real_logits, const Tensor& fake_logits) {
    require_finite(real_logits, "d_loss");
    require_finite(fake_logits, "d_loss");
    if (real_logits.ndim() != 2 || fake_logits.ndim() != 2 ||
        real_logits.shape() != fake_logits.shape())
        throw std::invalid_argument("d_loss: logits must be matching [B, K]");
    int64_t batch = real_logits.dim(0);
    auto real_term = sum(softplus(neg(real_logits)));
    auto fake_term = sum(softplus(fake_logits));
    return scale(add(real_term, fake_term), 1.0 / static_cast<double>(batch));
}

Tensor d_loss_weighted(const Tensor& real_logits, const Tensor& fake_logits,
                       const Tensor& real_weights) {
    require_finite(real_logits, "d_loss_weighted");
    require_finite(fake_logits, "d_loss_weighted");
    if (real_weights.shape() != real_logits.shape())
        throw std::invalid_argument("d_loss_weighted: weights must match logits shape");
    int64_t batch = fake_logits.dim(0);
    auto real_term = sum(mul(softplus(neg(real_logits)), real_weights));
    auto fake_term = scale(sum(softplus(fake_logits)), 1.0 / static_cast<double>(batch));
    return add(real_term, fake_term);
}

Tensor r1_penalty(const std::function<Tensor(const ModalityTuple&)>& d_fn,
                  const ModalityTuple& real_batch, double gamma) {
    if (real_batch.images.empty())
        throw std::invalid_argument("r1_penalty: empty tuple");
    int64_t batch = real_batch.batch();
    ModalityTuple probe;
    probe.names = real_batch.names;
    std::vector<Tensor> inputs;
    for (const auto& img : real_batch.images) {
        Tensor x = img.detach();
        x.set_requires_grad(true);
        probe.images.push_back(x);
        inputs.push_back(x);
    }
    Tensor logits = d_fn(probe);
    require_finite(logits, "r1_penalty");
    auto grads = grad(sum(logits), inputs, /*create_graph=*/true);
    Tensor acc;
    for (const auto& g : grads) {
        Tensor term = sum(square(g));
        acc = acc.defined() ? add(acc, term) : term;
    }
    return scale(acc, 0.5 * gamma / static_cast<double>(batch));
}

double blur_sigma(int64_t step_images, const LossConfig& cfg) {
    if (step_images < 0)
        throw std::invalid_argument("blur_sigma: negative image count");
    if (step_images >= cfg.blur_ramp_images) return 0.0;
    double frac = static_cast<double>(step_images) /
                  static_cast<double>(cfg.blur_ramp_images);
    return cfg.blur_sigma_init * (1.0 - frac);
}

} // namespace mmgan
