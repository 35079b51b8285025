#include "data/procedural.hpp"

#include "core/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace mmgan {

namespace {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

Vec3 normalized(Vec3 v) {
    double len = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    return {v.x / len, v.y / len, v.z / len};
}

struct Box {
    double cu, cv, hu, hv, zfront;
    Vec3 albedo;
};

struct Sphere {
    double cu, cv, cz, r;
    Vec3 albedo;
};

struct Palette {
    Vec3 objects[4];
    Vec3 floor;
    Vec3 wall;
    double wall_slant;
    bool boxes_only;
};

uint64_t class_hash(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Palette palette_for(const std::string& cls) {
    if (cls == "warmroom")
        return {{{0.90, 0.40, 0.20}, {0.95, 0.75, 0.30}, {0.80, 0.30, 0.40}, {0.85, 0.60, 0.45}},
                {0.70, 0.50, 0.35},
                {0.95, 0.85, 0.70},
                0.3,
                false};
    if (cls == "coolroom")
        return {{{0.25, 0.50, 0.90}, {0.30, 0.80, 0.85}, {0.50, 0.40, 0.90}, {0.35, 0.65, 0.75}},
                {0.40, 0.45, 0.55},
                {0.75, 0.85, 0.95},
                -0.3,
                false};
    if (cls == "boxworld")
        return {{{0.80, 0.20, 0.20}, {0.20, 0.80, 0.20}, {0.20, 0.20, 0.80}, {0.80, 0.80, 0.20}},
                {0.50, 0.50, 0.50},
                {0.85, 0.85, 0.85},
                0.0,
                true};
    if (cls == "nightlab")
        return {{{0.30, 0.30, 0.60}, {0.55, 0.25, 0.60}, {0.25, 0.55, 0.60}, {0.45, 0.45, 0.70}},
                {0.25, 0.28, 0.35},
                {0.40, 0.45, 0.60},
                0.15,
                false};
    throw std::invalid_argument("generate_scene: unknown scene class '" + cls + "'");
}

Vec3 jitter(Vec3 base, Rng& rng) {
    auto clamp01 = [](double v) { return std::min(1.0, std::max(0.05, v)); };
    return {clamp01(base.x + rng.uniform(-0.05, 0.05)),
            clamp01(base.y + rng.uniform(-0.05, 0.05)),
            clamp01(base.z + rng.uniform(-0.05, 0.05))};
}

} // namespace

const std::vector<std::string>& procedural_classes() {
    static const std::vector<std::string> kClasses = {"warmroom", "coolroom", "boxworld"};
    return kClasses;
}

SceneSample generate_scene(uint64_t seed, int64_t resolution,
                           const std::string& scene_class) {
    if (resolution < 4)
        throw std::invalid_argument("generate_scene: resolution must be >= 4");
    Palette pal = palette_for(scene_class);
    Rng rng(seed ^ class_hash(scene_class));

    int n_objects = 1 + static_cast<int>(rng.below(4));
    std::vector<Box> boxes;
    std::vector<Sphere> spheres;
    for (int i = 0; i < n_objects; ++i) {
        Vec3 albedo = jitter(pal.objects[rng.below(4)], rng);
        bool make_box = pal.boxes_only || rng.bernoulli(0.5);
        if (make_box) {
            Box b;
            b.cu = rng.uniform(-0.6, 0.6);
            b.cv = rng.uniform(-0.2, 0.8);
            b.hu = rng.uniform(0.10, 0.35);
            b.hv = rng.uniform(0.10, 0.35);
            b.zfront = rng.uniform(1.0, 2.2);
            b.albedo = albedo;
            boxes.push_back(b);
        } else {
            Sphere s;
            s.cu = rng.uniform(-0.6, 0.6);
            s.cv = rng.uniform(-0.2, 0.8);
            s.r = rng.uniform(0.15, 0.40);
            s.cz = rng.uniform(1.6, 2.8);
            s.albedo = albedo;
            spheres.push_back(s);
        }
    }

    const Vec3 light = normalized({-0.3, -0.4, 0.85});
    const double ambient = 0.35, diffuse = 0.65;

    int64_t H = resolution, W = resolution;
    SceneSample out;
    out.scene_class = scene_class;
    out.rgb = Tensor::zeros({3, H, W});
    out.depth_raw = Tensor::zeros({1, H, W});
    out.normal = Tensor::zeros({3, H, W});

    for (int64_t y = 0; y < H; ++y) {
        double v = (static_cast<double>(y) + 0.5) / static_cast<double>(H) * 2.0 - 1.0;
        for (int64_t x = 0; x < W; ++x) {
            double u = (static_cast<double>(x) + 0.5) / static_cast<double>(W) * 2.0 - 1.0;

            // background: back wall vs floor, nearer surface wins
            double z_wall = 4.2 + pal.wall_slant * u;
            double z_floor = 2.6 - 1.8 * v;
            double z;
            Vec3 n, albedo;
            if (z_floor < z_wall) {
                z = z_floor;
                n = normalized({0.0, 1.8, 1.0});
                albedo = pal.floor;
            } else {
                z = z_wall;
                n = normalized({-pal.wall_slant, 0.0, 1.0});
                albedo = pal.wall;
            }

            for (const auto& b : boxes) {
                if (std::abs(u - b.cu) <= b.hu && std::abs(v - b.cv) <= b.hv &&
                    b.zfront < z) {
                    z = b.zfront;
                    n = {0.0, 0.0, 1.0};
                    albedo = b.albedo;
                }
            }
            for (const auto& s : spheres) {
                double du = u - s.cu, dv = v - s.cv;
                double d2 = du * du + dv * dv;
                if (d2 >= s.r * s.r) continue;
                double dz = std::sqrt(s.r * s.r - d2);
                double zs = s.cz - dz;
                if (zs < z) {
                    z = zs;
                    n = {-du / s.r, -dv / s.r, dz / s.r};
                    albedo = s.albedo;
                }
            }

            double diff = std::max(0.0, n.x * light.x + n.y * light.y + n.z * light.z);
            double shade = ambient + diffuse * diff;
            int64_t i = y * W + x;
            out.rgb.data()[0 * H * W + i] = 2.0 * albedo.x * shade - 1.0;
            out.rgb.data()[1 * H * W + i] = 2.0 * albedo.y * shade - 1.0;
            out.rgb.data()[2 * H * W + i] = 2.0 * albedo.z * shade - 1.0;
            out.depth_raw.data()[i] = z;
            out.normal.data()[0 * H * W + i] = n.x;
            out.normal.data()[1 * H * W + i] = n.y;
            out.normal.data()[2 * H * W + i] = n.z;
        }
    }
    return out;
}

} // namespace mmgan
