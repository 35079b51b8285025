#pragma once

// Small three-modality configuration shared by the network-level tests.

#include "core/types.hpp"

namespace mmgan::testutil {

inline TrainConfig tiny_config(int64_t resolution = 8) {
    TrainConfig cfg;
    cfg.modalities = {{"rgb", 3, true}, {"depth", 1, false}, {"normal", 3, false}};
    cfg.resolution = resolution;
    cfg.latent_dim = 8;
    cfg.w_dim = 8;
    cfg.trunk_layers = 2;
    cfg.branch_layers = 2;
    cfg.branch_index = 3;
    cfg.channel_max = 8;
    cfg.channel_base = 64;
    cfg.disc_channel_max = 8;
    cfg.disc_channel_base = 64;
    cfg.batch_size = 2;
    return cfg;
}

} // namespace mmgan::testutil
