#pragma once

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "core/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mmgan {

// One discriminator head: strided conv stack down to 4x4, then a linear logit.
struct DiscHead {
    std::string name;       // "fd.<modality>" or "cd"
    int64_t in_channels = 0;
    std::vector<Tensor> conv_w;     // first conv stride 1, rest stride 2
    std::vector<Tensor> conv_b;
    Tensor fc_w;            // [C*4*4, 1]
    Tensor fc_b;            // [1]
};

// M fidelity heads (one per modality) plus one consistency head on the
// channel-concatenated tuple; score_all concatenates their logits.
class Discriminator {
public:
    Discriminator(const TrainConfig& cfg, Rng& rng);

    // [B, C_m, H, W] -> [B] logits for modality m's fidelity head.
    Tensor score_fidelity(const std::string& modality, const Tensor& images);

    // Full tuple -> [B] logits from the consistency head.
    Tensor score_consistency(const ModalityTuple& tuple);

    // [B, K]: fidelity logits in modality order, then the consistency logit.
    // K depends on the configured discriminator mode.
    Tensor score_all(const ModalityTuple& tuple);

    int num_heads() const;      // K
    DiscriminatorMode mode() const { return mode_; }

    void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);

    // Parameters of one head only (gradient-coverage checks).
    void visit_head_params(const std::string& head_name,
                           const std::function<void(const std::string&, Tensor&)>& fn);

private:
    Tensor run_head(DiscHead& head, const Tensor& x);
    Tensor concat_tuple(const ModalityTuple& tuple) const;

    std::vector<ModalitySpec> modalities_;
    DiscriminatorMode mode_;
    int64_t resolution_ = 0;
    std::vector<DiscHead> fidelity_;    // modality order; empty in CD_ONLY
    std::vector<DiscHead> consistency_; // one head, empty in FD_ONLY
};

} // namespace mmgan
