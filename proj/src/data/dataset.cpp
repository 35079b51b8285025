#include "data/dataset.hpp"

#include "data/depth.hpp"
#include "data/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mmgan {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

uint64_t mix_seed(uint64_t seed, uint64_t index) {
    // splitmix64 over a per-index stream offset
    uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

uint8_t to_byte(double v) {
    double s = (v + 1.0) * 0.5 * 255.0;
    return static_cast<uint8_t>(std::lround(std::clamp(s, 0.0, 255.0)));
}

Tensor normalize_against_range(const Tensor& raw, double dmin, double dmax) {
    Tensor out = Tensor::zeros(raw.shape());
    double range = dmax - dmin;
    if (range <= 0.0) {
        for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = -1.0;
        return out;
    }
    for (int64_t i = 0; i < raw.numel(); ++i)
        out.data()[i] = std::clamp((raw.data()[i] - dmin) / range * 2.0 - 1.0, -1.0, 1.0);
    return out;
}

} // namespace

void Dataset::recompute_depth_range() {
    bool first = true;
    for (const auto& s : samples) {
        if (!s.paired || !s.depth_raw.defined()) continue;
        for (int64_t i = 0; i < s.depth_raw.numel(); ++i) {
            double v = s.depth_raw.data()[i];
            if (first) {
                global_dmin = global_dmax = v;
                first = false;
            } else {
                global_dmin = std::min(global_dmin, v);
                global_dmax = std::max(global_dmax, v);
            }
        }
    }
}

Dataset make_procedural_dataset(int64_t count, int64_t resolution,
                                const std::vector<std::string>& classes,
                                uint64_t seed) {
    if (count <= 0) throw std::invalid_argument("make_procedural_dataset: count must be > 0");
    if (classes.empty())
        throw std::invalid_argument("make_procedural_dataset: no classes given");
    Dataset ds;
    ds.samples.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        const std::string& cls = classes[static_cast<size_t>(i) % classes.size()];
        ds.samples.push_back(
            generate_scene(mix_seed(seed, static_cast<uint64_t>(i)), resolution, cls));
    }
    ds.recompute_depth_range();
    return ds;
}

DomainSplit split_domains(const Dataset& dataset, const std::string& holdout_class,
                          double paired_percent) {
    if (paired_percent <= 0.0 || paired_percent > 100.0)
        throw std::invalid_argument("split_domains: paired percent must be in (0, 100]");
    DomainSplit split;
    std::vector<const SceneSample*> holdout;
    for (const auto& s : dataset.samples) {
        if (s.scene_class == holdout_class)
            holdout.push_back(&s);
        else
            split.source.samples.push_back(s);
    }
    if (holdout.empty())
        throw std::invalid_argument("split_domains: no samples of class '" +
                                    holdout_class + "'");
    size_t n = holdout.size();
    size_t paired = static_cast<size_t>(
        std::ceil(paired_percent / 100.0 * static_cast<double>(n)));
    paired = std::min(paired, n);
    for (size_t i = 0; i < n; ++i) {
        SceneSample s = *holdout[i];
        if (i < paired) {
            s.paired = true;
            split.target_paired.samples.push_back(std::move(s));
        } else {
            s.paired = false;
            s.depth_raw = Tensor();
            s.normal = Tensor();
            split.target_unpaired.samples.push_back(std::move(s));
        }
    }
    split.source.recompute_depth_range();
    split.target_paired.recompute_depth_range();
    return split;
}

ModalityTuple assemble_batch(const Dataset& dataset, const std::vector<size_t>& indices,
                             const std::vector<ModalitySpec>& modalities,
                             bool per_image_depth_norm) {
    if (indices.empty()) throw std::invalid_argument("assemble_batch: empty index list");
    int64_t B = static_cast<int64_t>(indices.size());
    ModalityTuple out;
    for (const auto& mod : modalities) {
        const SceneSample& probe = dataset.samples.at(indices[0]);
        int64_t H = probe.rgb.dim(1), W = probe.rgb.dim(2);
        Tensor stacked = Tensor::zeros({B, mod.channels, H, W});
        for (int64_t b = 0; b < B; ++b) {
            const SceneSample& s = dataset.samples.at(indices[static_cast<size_t>(b)]);
            Tensor img;
            if (mod.name == "rgb") {
                img = s.rgb;
            } else if (mod.name == "depth") {
                if (!s.paired || !s.depth_raw.defined())
                    throw std::invalid_argument("assemble_batch: sample has no depth");
                img = per_image_depth_norm
                    ? normalize_depth(s.depth_raw).normalized
                    : normalize_against_range(s.depth_raw, dataset.global_dmin,
                                              dataset.global_dmax);
            } else if (mod.name == "normal") {
                if (!s.paired || !s.normal.defined())
                    throw std::invalid_argument("assemble_batch: sample has no normals");
                img = s.normal;
            } else {
                throw std::invalid_argument("assemble_batch: unknown modality '" +
                                            mod.name + "'");
            }
            if (img.dim(0) != mod.channels || img.dim(1) != H || img.dim(2) != W)
                throw std::invalid_argument("assemble_batch: shape mismatch for '" +
                                            mod.name + "'");
            std::copy(img.data(), img.data() + img.numel(),
                      stacked.data() + b * img.numel());
        }
        out.names.push_back(mod.name);
        out.images.push_back(stacked);
    }
    return out;
}

std::vector<size_t> sample_indices(size_t dataset_size, int64_t batch, Rng& rng) {
    if (dataset_size == 0) throw std::invalid_argument("sample_indices: empty dataset");
    std::vector<size_t> idx(static_cast<size_t>(batch));
    for (auto& i : idx) i = static_cast<size_t>(rng.below(dataset_size));
    return idx;
}

Dataset load_external(const std::string& manifest_path, int64_t resolution) {
    std::ifstream in(manifest_path);
    if (!in) throw IOError("cannot open manifest: " + manifest_path);
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IOError("manifest parse error in " + manifest_path + ": " + e.what());
    }
    if (!manifest.is_array())
        throw IOError("manifest must be a json array: " + manifest_path);

    fs::path base = fs::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return (fp.is_absolute() ? fp : base / fp).string();
    };

    Dataset ds;
    for (const auto& rec : manifest) {
        if (!rec.contains("rgb"))
            throw IOError("manifest record without rgb path in " + manifest_path);
        SceneSample s;
        s.scene_class = rec.value("class", "external");

        int64_t w = 0, h = 0;
        std::string rgb_path = resolve(rec["rgb"].get<std::string>());
        auto rgb8 = read_png_rgb8(rgb_path, w, h);
        Tensor rgb = Tensor::zeros({3, h, w});
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x)
                for (int64_t c = 0; c < 3; ++c)
                    rgb.data()[(c * h + y) * w + x] =
                        rgb8[static_cast<size_t>((y * w + x) * 3 + c)] / 255.0 * 2.0 - 1.0;
        s.rgb = resize_bilinear(rgb, resolution, resolution);

        if (rec.contains("depth")) {
            std::string dpath = resolve(rec["depth"].get<std::string>());
            auto d16 = read_png_gray16(dpath, w, h);
            double dmin = 0.0, dmax = 65535.0;
            std::ifstream side(dpath + ".json");
            if (side) {
                json meta;
                try {
                    side >> meta;
                } catch (const json::exception& e) {
                    throw IOError("sidecar parse error for " + dpath + ": " + e.what());
                }
                dmin = meta.value("dmin", 0.0);
                dmax = meta.value("dmax", 65535.0);
            }
            Tensor depth = Tensor::zeros({1, h, w});
            for (int64_t i = 0; i < h * w; ++i)
                depth.data()[i] = dmin + d16[static_cast<size_t>(i)] / 65535.0 * (dmax - dmin);
            s.depth_raw = resize_bilinear(depth, resolution, resolution);
        }

        if (rec.contains("normal")) {
            std::string npath = resolve(rec["normal"].get<std::string>());
            auto n8 = read_png_rgb8(npath, w, h);
            Tensor n = Tensor::zeros({3, h, w});
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x)
                    for (int64_t c = 0; c < 3; ++c)
                        n.data()[(c * h + y) * w + x] =
                            n8[static_cast<size_t>((y * w + x) * 3 + c)] / 255.0 * 2.0 - 1.0;
            n = resize_bilinear(n, resolution, resolution);
            // restore unit length lost to 8-bit quantization / resampling
            int64_t sp = resolution * resolution;
            for (int64_t i = 0; i < sp; ++i) {
                double nx = n.data()[i], ny = n.data()[sp + i], nz = n.data()[2 * sp + i];
                double len = std::sqrt(nx * nx + ny * ny + nz * nz);
                if (len < 1e-6) {
                    n.data()[i] = 0.0;
                    n.data()[sp + i] = 0.0;
                    n.data()[2 * sp + i] = 1.0;
                } else {
                    n.data()[i] = nx / len;
                    n.data()[sp + i] = ny / len;
                    n.data()[2 * sp + i] = nz / len;
                }
            }
            s.normal = n;
        }

        s.paired = s.depth_raw.defined();
        ds.samples.push_back(std::move(s));
    }
    ds.recompute_depth_range();
    return ds;
}

void export_dataset(const Dataset& dataset, const std::string& dir) {
    fs::create_directories(dir);
    json manifest = json::array();
    char idbuf[32];
    for (size_t i = 0; i < dataset.samples.size(); ++i) {
        const SceneSample& s = dataset.samples[i];
        std::snprintf(idbuf, sizeof(idbuf), "s%06zu", i);
        std::string id(idbuf);
        json rec;
        rec["id"] = id;
        rec["class"] = s.scene_class;

        int64_t H = s.rgb.dim(1), W = s.rgb.dim(2);
        std::vector<uint8_t> rgb8(static_cast<size_t>(H * W * 3));
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                for (int64_t c = 0; c < 3; ++c)
                    rgb8[static_cast<size_t>((y * W + x) * 3 + c)] =
                        to_byte(s.rgb.data()[(c * H + y) * W + x]);
        std::string rgb_name = id + "_rgb.png";
        write_png_rgb8((fs::path(dir) / rgb_name).string(), W, H, rgb8);
        rec["rgb"] = rgb_name;

        if (s.paired && s.depth_raw.defined()) {
            DepthNorm dn = normalize_depth(s.depth_raw);
            std::vector<uint16_t> d16(static_cast<size_t>(H * W));
            for (int64_t i2 = 0; i2 < H * W; ++i2)
                d16[static_cast<size_t>(i2)] = static_cast<uint16_t>(
                    std::lround((dn.normalized.data()[i2] + 1.0) * 0.5 * 65535.0));
            std::string depth_name = id + "_depth.png";
            std::string depth_path = (fs::path(dir) / depth_name).string();
            write_png_gray16(depth_path, W, H, d16);
            json side;
            side["dmin"] = dn.dmin;
            side["dmax"] = dn.dmax;
            std::ofstream(depth_path + ".json") << side.dump(2) << "\n";
            rec["depth"] = depth_name;
        }
        if (s.paired && s.normal.defined()) {
            std::vector<uint8_t> n8(static_cast<size_t>(H * W * 3));
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x)
                    for (int64_t c = 0; c < 3; ++c)
                        n8[static_cast<size_t>((y * W + x) * 3 + c)] =
                            to_byte(s.normal.data()[(c * H + y) * W + x]);
            std::string normal_name = id + "_normal.png";
            write_png_rgb8((fs::path(dir) / normal_name).string(), W, H, n8);
            rec["normal"] = normal_name;
        }
        manifest.push_back(std::move(rec));
    }
    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw IOError("cannot write manifest in " + dir);
    mf << manifest.dump(2) << "\n";
}

} // namespace mmgan
