#include "discriminator/discriminator.hpp"

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

int64_t disc_channels(const TrainConfig& cfg, int64_t res) {
    return std::max<int64_t>(8, std::min(cfg.disc_channel_max, cfg.disc_channel_base / res));
}

DiscHead make_head(const TrainConfig& cfg, Rng& rng, std::string name, int64_t in_channels) {
    DiscHead head;
    head.name = std::move(name);
    head.in_channels = in_channels;
    int64_t res = cfg.resolution;
    int64_t cin = in_channels;
    int64_t cout = disc_channels(cfg, res);
    head.conv_w.push_back(randn_tensor(rng, {cout, cin, 3, 3},
                                       std::sqrt(2.0 / static_cast<double>(cin * 9))));
    head.conv_b.push_back(Tensor::zeros({cout}));
    while (res > 4) {
        cin = cout;
        cout = disc_channels(cfg, res / 2);
        head.conv_w.push_back(randn_tensor(rng, {cout, cin, 3, 3},
                                           std::sqrt(2.0 / static_cast<double>(cin * 9))));
        head.conv_b.push_back(Tensor::zeros({cout}));
        res /= 2;
    }
    head.fc_w = randn_tensor(rng, {cout * 4 * 4, 1},
                             std::sqrt(1.0 / static_cast<double>(cout * 16)));
    head.fc_b = Tensor::zeros({1});
    return head;
}

} // namespace

Discriminator::Discriminator(const TrainConfig& cfg, Rng& rng)
    : modalities_(cfg.modalities), mode_(cfg.discriminator_mode),
      resolution_(cfg.resolution) {
    if (mode_ != DiscriminatorMode::CD_ONLY)
        for (const auto& m : modalities_)
            fidelity_.push_back(make_head(cfg, rng, "fd." + m.name, m.channels));
    if (mode_ != DiscriminatorMode::FD_ONLY) {
        int64_t total = 0;
        for (const auto& m : modalities_) total += m.channels;
        consistency_.push_back(make_head(cfg, rng, "cd", total));
    }
}

Tensor Discriminator::run_head(DiscHead& head, const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != head.in_channels)
        throw std::invalid_argument(
            "discriminator head '" + head.name + "' expects " +
            std::to_string(head.in_channels) + " input channels, got " +
            (x.ndim() == 4 ? std::to_string(x.dim(1)) : std::string("rank!=4")));
    if (x.dim(2) != resolution_ || x.dim(3) != resolution_)
        throw std::invalid_argument("discriminator head '" + head.name +
                                    "': resolution mismatch");
    Tensor h = x;
    for (size_t i = 0; i < head.conv_w.size(); ++i) {
        int stride = i == 0 ? 1 : 2;
        h = leaky_relu(bias_add(conv2d(h, head.conv_w[i], stride, 1), head.conv_b[i]),
                       kLeakySlope);
    }
    int64_t batch = h.dim(0);
    h = reshape(h, {batch, h.numel() / batch});
    return bias_add(matmul(h, head.fc_w), head.fc_b);   // [B, 1]
}

Tensor Discriminator::concat_tuple(const ModalityTuple& tuple) const {
    std::vector<Tensor> parts;
    for (const auto& m : modalities_) {
        if (!tuple.has(m.name))
            throw std::invalid_argument("score: tuple is missing modality '" + m.name + "'");
        const Tensor& img = tuple.get(m.name);
        if (img.dim(1) != m.channels)
            throw std::invalid_argument("score: modality '" + m.name + "' has wrong channels");
        parts.push_back(img);
    }
    // fixed canonical concatenation order: config modality order
    return concat_channels(parts);
}

Tensor Discriminator::score_fidelity(const std::string& modality, const Tensor& images) {
    if (mode_ == DiscriminatorMode::CD_ONLY)
        throw std::logic_error("score_fidelity: no fidelity heads in CD_ONLY mode");
    for (size_t i = 0; i < modalities_.size(); ++i)
        if (modalities_[i].name == modality)
            return reshape(run_head(fidelity_[i], images), {images.dim(0)});
    throw std::invalid_argument("score_fidelity: unknown modality '" + modality + "'");
}

Tensor Discriminator::score_consistency(const ModalityTuple& tuple) {
    if (mode_ == DiscriminatorMode::FD_ONLY)
        throw std::logic_error("score_consistency: no consistency head in FD_ONLY mode");
    Tensor x = concat_tuple(tuple);
    return reshape(run_head(consistency_[0], x), {x.dim(0)});
}

Tensor Discriminator::score_all(const ModalityTuple& tuple) {
    std::vector<Tensor> logits;     // each [B, 1]
    if (mode_ != DiscriminatorMode::CD_ONLY) {
        for (size_t i = 0; i < modalities_.size(); ++i) {
            if (!tuple.has(modalities_[i].name))
                throw std::invalid_argument("score_all: tuple is missing modality '" +
                                            modalities_[i].name + "'");
            logits.push_back(run_head(fidelity_[i], tuple.get(modalities_[i].name)));
        }
    }
    if (mode_ != DiscriminatorMode::FD_ONLY)
        logits.push_back(run_head(consistency_[0], concat_tuple(tuple)));
    return concat_channels(logits);     // [B, K]
}

int Discriminator::num_heads() const {
    switch (mode_) {
        case DiscriminatorMode::FD_ONLY: return static_cast<int>(modalities_.size());
        case DiscriminatorMode::CD_ONLY: return 1;
        case DiscriminatorMode::CD_PLUS_FD: return static_cast<int>(modalities_.size()) + 1;
    }
    return 0;
}

void Discriminator::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
    auto visit_head = [&](DiscHead& head) {
        for (size_t i = 0; i < head.conv_w.size(); ++i) {
            fn("d." + head.name + ".conv" + std::to_string(i) + ".w", head.conv_w[i]);
            fn("d." + head.name + ".conv" + std::to_string(i) + ".b", head.conv_b[i]);
        }
        fn("d." + head.name + ".fc.w", head.fc_w);
        fn("d." + head.name + ".fc.b", head.fc_b);
    };
    for (auto& h : fidelity_) visit_head(h);
    for (auto& h : consistency_) visit_head(h);
}

void Discriminator::visit_head_params(
        const std::string& head_name,
        const std::function<void(const std::string&, Tensor&)>& fn) {
    auto visit_head = [&](DiscHead& head) {
        if (head.name != head_name) return;
        for (size_t i = 0; i < head.conv_w.size(); ++i) {
            fn(head.name + ".conv" + std::to_string(i) + ".w", head.conv_w[i]);
            fn(head.name + ".conv" + std::to_string(i) + ".b", head.conv_b[i]);
        }
        fn(head.name + ".fc.w", head.fc_w);
        fn(head.name + ".fc.b", head.fc_b);
    };
    for (auto& h : fidelity_) visit_head(h);
    for (auto& h : consistency_) visit_head(h);
}

} // namespace mmgan
