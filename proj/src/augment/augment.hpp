#pragma once

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "core/types.hpp"

#include <vector>

namespace mmgan {

// One sampled set of transform parameters, applied identically to every
// modality of a tuple. Color parameters act on color-augmentable modalities
// only. Each sub-op is present independently with probability p.
struct AugmentPlan {
    // pixel blitting / geometric (shared across modalities)
    bool xflip = false;
    bool rot90 = false;
    int rot90_k = 0;
    bool int_translate = false;
    int itx = 0, ity = 0;
    bool iso_scale = false;
    double scale_factor = 1.0;
    bool rotation = false;
    double angle = 0.0;
    bool aniso_scale = false;
    double aniso_ratio = 1.0;
    bool frac_translate = false;
    double ftx = 0.0, fty = 0.0;

    // color (gated to color-augmentable modalities)
    bool brightness = false;
    double brightness_shift = 0.0;
    bool contrast = false;
    double contrast_factor = 1.0;
    bool luma_flip = false;
    bool hue_rotate = false;
    double hue_angle = 0.0;
    bool saturation = false;
    double saturation_factor = 1.0;

    // image-space corruption (shared parameters; noise realization is
    // deterministic per modality via noise_seed)
    bool noise = false;
    double noise_sigma = 0.0;
    uint64_t noise_seed = 0;
    bool cutout = false;
    double cut_cx = 0.5, cut_cy = 0.5;

    bool has_geometric() const {
        return xflip || rot90 || int_translate || iso_scale || rotation ||
               aniso_scale || frac_translate;
    }
    bool has_color() const {
        return brightness || contrast || luma_flip || hue_rotate || saturation;
    }
    bool has_corruption() const { return noise || cutout; }
    bool identity() const { return !has_geometric() && !has_color() && !has_corruption(); }

    // inverse-map 2x3 matrix of the composed geometric transform, in centered
    // pixel coordinates for a size x size image
    std::vector<double> inverse_matrix(int64_t size) const;
    // 3x4 color matrix (3x3 + offset) of the composed color transform
    std::vector<double> color_matrix() const;
};

// Adaptive-p controller driven by a discriminator-overfitting signal (running
// mean of sign of real logits); p >= stop_threshold signals end of training.
struct AdaController {
    double p = 0.0;
    double target = 0.6;
    double adjust_step = 0.01;
    double overfit_estimate = 0.0;
    double estimate_decay = 0.9;
    double stop_threshold = 0.7;
};

void update_p(AdaController& ctrl, const Tensor& real_logits);
bool should_stop(const AdaController& ctrl);

class Augmenter {
public:
    Augmenter(std::vector<ModalitySpec> modalities, int64_t resolution);

    AugmentPlan sample_plan(double p, Rng& rng) const;
    std::vector<AugmentPlan> sample_plans(int64_t batch, double p, Rng& rng) const;

    // Applies one plan per sample to every modality present in the tuple.
    // Differentiable with respect to the input images.
    ModalityTuple apply(const std::vector<AugmentPlan>& plans,
                        const ModalityTuple& tuple) const;

private:
    bool color_augmentable(const std::string& name) const;
    std::vector<ModalitySpec> modalities_;
    int64_t resolution_ = 0;
};

} // namespace mmgan
