#pragma once

#include "core/tensor.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmgan {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModalitySpec {
    std::string name;
    int64_t channels = 0;
    bool color_augmentable = false;
};

// Aligned multi-channel images for one batch of samples across all configured
// modalities; values are normalized to [-1, 1].
struct ModalityTuple {
    std::vector<std::string> names;     // canonical order, fixed by config
    std::vector<Tensor> images;         // each [B, C_m, H, W]

    int64_t batch() const { return images.empty() ? 0 : images[0].dim(0); }
    int64_t resolution() const { return images.empty() ? 0 : images[0].dim(2); }

    const Tensor& get(const std::string& name) const {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return images[i];
        throw std::out_of_range("ModalityTuple: no modality named '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& n : names)
            if (n == name) return true;
        return false;
    }
};

enum class DiscriminatorMode { FD_ONLY, CD_ONLY, CD_PLUS_FD };
enum class AugmentationMode { NONE, FIXED_P, ADAPTIVE };

struct TrainConfig {
    std::vector<ModalitySpec> modalities;
    int64_t resolution = 32;
    int64_t latent_dim = 64;        // l
    int64_t w_dim = 64;
    int trunk_layers = 5;
    int branch_layers = 3;
    int branch_index = 6;           // 1-based first branch layer
    int64_t channel_max = 32;
    int64_t channel_base = 512;     // channels at a given res = min(max, base/res)
    int64_t disc_channel_max = 64;
    int64_t disc_channel_base = 1024;

    DiscriminatorMode discriminator_mode = DiscriminatorMode::CD_PLUS_FD;

    AugmentationMode augmentation_mode = AugmentationMode::ADAPTIVE;
    double fixed_p = 0.0;
    double ada_target = 0.6;
    double ada_step = 0.0;          // 0 = derive from ada_traverse_images
    int ada_interval = 4;
    int64_t ada_traverse_images = 500000;
    double ada_stop_threshold = 0.7;

    double r1_gamma = 1.0;
    int r1_interval = 16;
    double blur_sigma_init = 2.0;
    int64_t blur_ramp_images = 50000;

    double beta1 = 0.0;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    double g_lr = 0.0025;
    double d_lr = 0.0025;
    int64_t batch_size = 16;
    uint64_t seed = 0;

    int64_t max_steps = 0;          // 0 = no step limit
    int64_t max_images = 50000;
    int64_t checkpoint_interval_steps = 500;
    int64_t metric_interval_images = 1000;
    int64_t metric_samples = 256;

    bool ema_generator = false;
    bool equalized_lr = false;      // accepted but unsupported at this scale
    bool minibatch_stddev = false;  // accepted but unsupported at this scale
    bool strict_determinism = true;
    bool lowpass_free_upsampling = true;  // no-op default, see synthesis blocks

    // data
    std::string data_source = "procedural";  // "procedural" or a manifest path
    int64_t data_num_samples = 2000;
    std::vector<std::string> data_classes = {"warmroom", "coolroom", "boxworld"};
    bool per_image_depth_norm = true;

    // fine-tuning
    std::string finetune_holdout_class;
    double finetune_paired_percent = 10.0;
    bool finetune_ada = false;

    int total_layers() const { return trunk_layers + branch_layers; }
    double effective_ada_step() const {
        if (ada_step > 0.0) return ada_step;
        return static_cast<double>(batch_size * ada_interval) /
               static_cast<double>(ada_traverse_images);
    }

    const ModalitySpec* find_modality(const std::string& name) const {
        for (const auto& m : modalities)
            if (m.name == name) return &m;
        return nullptr;
    }
    int64_t total_channels() const {
        int64_t c = 0;
        for (const auto& m : modalities) c += m.channels;
        return c;
    }

    void validate() const;
};

using ConfigMap = std::map<std::string, std::string>;

// Declarative key/value config with dotted nesting; '#' starts a comment.
ConfigMap parse_config_file(const std::string& path);
void apply_overrides(ConfigMap& map, const std::vector<std::string>& overrides);
TrainConfig config_from_map(const ConfigMap& map);
// Full inverse of config_from_map; config_from_map(config_to_map(c)) == c.
ConfigMap config_to_map(const TrainConfig& cfg);
std::string config_canonical_dump(const TrainConfig& cfg);
uint64_t config_hash(const TrainConfig& cfg);

} // namespace mmgan
