#pragma once

#include "core/tensor.hpp"

#include <string>
#include <vector>

namespace mmgan {

// One rendered scene. Depth is kept in raw world units; rgb and the encoded
// normal components live in [-1, 1].
struct SceneSample {
    Tensor rgb;         // [3, H, W]
    Tensor depth_raw;   // [1, H, W], > 0
    Tensor normal;      // [3, H, W], unit vectors
    std::string scene_class;
    bool paired = true;
};

// Known procedural scene classes.
const std::vector<std::string>& procedural_classes();

// Orthographic room renderer: floor and back wall planes plus 1-4 boxes and
// spheres, analytic normals, fixed directional light, per-class palette.
// Deterministic in (seed, resolution, scene_class).
SceneSample generate_scene(uint64_t seed, int64_t resolution,
                           const std::string& scene_class);

} // namespace mmgan
