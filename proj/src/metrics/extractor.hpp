#pragma once

#include "core/tensor.hpp"

#include <vector>

namespace mmgan {

// Maps image batches to feature vectors for distribution statistics.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual int64_t feature_dim() const = 0;
    // [B, C, H, W] -> [B, F]
    virtual Tensor extract(const Tensor& images) = 0;
};

// Fixed randomly-initialized 3-block strided conv encoder with global average
// pooling, shared by every modality (single-channel input replicated to 3).
// The weights are derived from seed 0 and never trained, so feature-space
// distances are stable across runs and builds.
class BuiltinExtractor : public FeatureExtractor {
public:
    BuiltinExtractor();
    int64_t feature_dim() const override { return 64; }
    Tensor extract(const Tensor& images) override;

private:
    std::vector<Tensor> conv_w_;
    std::vector<Tensor> conv_b_;
};

} // namespace mmgan
