#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/rng.hpp"
#include "data/dataset.hpp"
#include "data/depth.hpp"
#include "data/image_io.hpp"
#include "data/procedural.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace mmgan;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

double angular_error_deg(double ax, double ay, double az, double bx, double by, double bz) {
    double dot = ax * bx + ay * by + az * bz;
    double la = std::sqrt(ax * ax + ay * ay + az * az);
    double lb = std::sqrt(bx * bx + by * by + bz * bz);
    double c = std::clamp(dot / (la * lb), -1.0, 1.0);
    return std::acos(c) * 180.0 / kPi;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mmgan_data_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

} // namespace

TEST_CASE("depth normalization maps recorded range onto [-1, 1]") {
    Tensor d = Tensor::from_data({1, 1, 2}, {0.0, 65535.0});
    auto n = normalize_depth(d);
    CHECK(n.normalized.data()[0] == -1.0);
    CHECK(n.normalized.data()[1] == 1.0);
    CHECK(n.dmin == 0.0);
    CHECK(n.dmax == 65535.0);

    Tensor d3 = Tensor::from_data({1, 1, 3}, {0.0, 32767.5, 65535.0});
    auto n3 = normalize_depth(d3);
    CHECK(n3.normalized.data()[0] == doctest::Approx(-1.0));
    CHECK(n3.normalized.data()[1] == doctest::Approx(0.0));
    CHECK(n3.normalized.data()[2] == doctest::Approx(1.0));

    Tensor flat = Tensor::full({1, 4, 4}, 7.0);
    auto nf = normalize_depth(flat);
    for (int64_t i = 0; i < nf.normalized.numel(); ++i)
        CHECK(nf.normalized.data()[i] == -1.0);
}

TEST_CASE("depth denormalization inverts normalization") {
    Rng rng(1);
    Tensor d = Tensor::zeros({1, 8, 8});
    for (int64_t i = 0; i < d.numel(); ++i) d.data()[i] = 0.5 + 4.0 * rng.uniform();
    auto n = normalize_depth(d);
    Tensor back = denormalize_depth(n.normalized, n.dmin, n.dmax);
    for (int64_t i = 0; i < d.numel(); ++i)
        CHECK(std::abs(back.data()[i] - d.data()[i]) / d.data()[i] < 1e-4);

    Tensor lo = Tensor::from_data({1, 1, 1}, {-1.0});
    CHECK(denormalize_depth(lo, 2.5, 9.0).data()[0] == doctest::Approx(2.5));
    Tensor hi = Tensor::from_data({1, 1, 1}, {1.0});
    CHECK(denormalize_depth(hi, 0.0, 9.0).data()[0] == doctest::Approx(9.0));
    CHECK_THROWS_AS(denormalize_depth(lo, 3.0, 3.0), std::invalid_argument);
}

TEST_CASE("normals from depth on analytic surfaces") {
    const int64_t res = 32;
    double h = 2.0 / static_cast<double>(res);

    Tensor flat = Tensor::full({1, res, res}, 3.0);
    Tensor nf = normals_from_depth(flat);
    for (int64_t i = 0; i < res * res; ++i) {
        CHECK(nf.data()[i] == 0.0);
        CHECK(nf.data()[res * res + i] == 0.0);
        CHECK(nf.data()[2 * res * res + i] == 1.0);
    }

    // z = u (unit slope in world coordinates) -> n = (-1, 0, 1)/sqrt(2)
    Tensor ramp = Tensor::zeros({1, res, res});
    for (int64_t y = 0; y < res; ++y)
        for (int64_t x = 0; x < res; ++x)
            ramp.data()[y * res + x] = 2.0 + (static_cast<double>(x) + 0.5) * h;
    Tensor nr = normals_from_depth(ramp);
    double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int64_t y = 1; y < res - 1; ++y)
        for (int64_t x = 1; x < res - 1; ++x) {
            int64_t i = y * res + x;
            CHECK(nr.data()[i] == doctest::Approx(-inv_sqrt2).epsilon(1e-9));
            CHECK(nr.data()[res * res + i] == doctest::Approx(0.0).epsilon(1e-9));
            CHECK(nr.data()[2 * res * res + i] == doctest::Approx(inv_sqrt2).epsilon(1e-9));
        }

    // hemisphere bulging toward the camera, analytic sphere normals
    double r = 0.7, cz = 3.0;
    Tensor hemi = Tensor::zeros({1, res, res});
    for (int64_t y = 0; y < res; ++y)
        for (int64_t x = 0; x < res; ++x) {
            double u = (static_cast<double>(x) + 0.5) * h - 1.0;
            double v = (static_cast<double>(y) + 0.5) * h - 1.0;
            double d2 = u * u + v * v;
            hemi.data()[y * res + x] =
                d2 < r * r ? cz - std::sqrt(r * r - d2) : cz;
        }
    Tensor nh = normals_from_depth(hemi);
    double sum_err = 0.0;
    int64_t count = 0;
    for (int64_t y = 1; y < res - 1; ++y)
        for (int64_t x = 1; x < res - 1; ++x) {
            double u = (static_cast<double>(x) + 0.5) * h - 1.0;
            double v = (static_cast<double>(y) + 0.5) * h - 1.0;
            double d2 = u * u + v * v;
            if (d2 > 0.6 * r * r) continue;     // stay clear of the steep rim
            double dz = std::sqrt(r * r - d2);
            int64_t i = y * res + x;
            sum_err += angular_error_deg(nh.data()[i], nh.data()[res * res + i],
                                         nh.data()[2 * res * res + i],
                                         -u / r, -v / r, dz / r);
            ++count;
        }
    REQUIRE(count > 0);
    CHECK(sum_err / static_cast<double>(count) < 2.0);
}

TEST_CASE("scene generation is deterministic and satisfies tuple invariants") {
    auto a = generate_scene(42, 16, "warmroom");
    auto b = generate_scene(42, 16, "warmroom");
    CHECK(tensors_equal(a.rgb, b.rgb));
    CHECK(tensors_equal(a.depth_raw, b.depth_raw));
    CHECK(tensors_equal(a.normal, b.normal));
    CHECK_THROWS_AS(generate_scene(1, 16, "atrium"), std::invalid_argument);

    // fuzz: every emitted sample is in-range with unit normals, positive depth
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        const auto& cls = procedural_classes()[seed % 3];
        auto s = generate_scene(seed, 8, cls);
        for (int64_t i = 0; i < s.rgb.numel(); ++i) {
            CHECK(s.rgb.data()[i] >= -1.0);
            CHECK(s.rgb.data()[i] <= 1.0);
        }
        for (int64_t i = 0; i < s.depth_raw.numel(); ++i)
            CHECK(s.depth_raw.data()[i] > 0.0);
        int64_t sp = 8 * 8;
        for (int64_t i = 0; i < sp; ++i) {
            double nx = s.normal.data()[i];
            double ny = s.normal.data()[sp + i];
            double nz = s.normal.data()[2 * sp + i];
            CHECK(std::abs(std::sqrt(nx * nx + ny * ny + nz * nz) - 1.0) < 1e-4);
        }
    }
}

TEST_CASE("the floor region renders as an exact analytic ramp") {
    const int64_t res = 32;
    for (uint64_t seed : {0u, 7u, 99u}) {
        auto s = generate_scene(seed, res, "coolroom");
        // the bottom row is always closer than any object can reach
        int64_t y = res - 1;
        double v = (static_cast<double>(y) + 0.5) / res * 2.0 - 1.0;
        double expect = 2.6 - 1.8 * v;
        double len = std::sqrt(1.8 * 1.8 + 1.0);
        for (int64_t x = 0; x < res; ++x) {
            CHECK(s.depth_raw.data()[y * res + x] == doctest::Approx(expect).epsilon(1e-12));
            CHECK(s.normal.data()[(0 * res + y) * res + x] == doctest::Approx(0.0));
            CHECK(s.normal.data()[(1 * res + y) * res + x] ==
                  doctest::Approx(1.8 / len).epsilon(1e-12));
            CHECK(s.normal.data()[(2 * res + y) * res + x] ==
                  doctest::Approx(1.0 / len).epsilon(1e-12));
        }
    }
}

TEST_CASE("rendered normals agree with the depth-derived oracle on smooth regions") {
    const int64_t res = 32;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        for (const auto& cls : procedural_classes()) {
            auto s = generate_scene(seed, res, cls);
            Tensor derived = normals_from_depth(s.depth_raw);
            const double* z = s.depth_raw.data();
            double sum_err = 0;
            int64_t count = 0;
            for (int64_t y = 1; y < res - 1; ++y)
                for (int64_t x = 1; x < res - 1; ++x) {
                    double zc = z[y * res + x];
                    double gap = std::max(
                        std::max(std::abs(z[y * res + x - 1] - zc),
                                 std::abs(z[y * res + x + 1] - zc)),
                        std::max(std::abs(z[(y - 1) * res + x] - zc),
                                 std::abs(z[(y + 1) * res + x] - zc)));
                    if (gap > 0.3) continue;    // depth discontinuity / steep rim
                    // creases where two surfaces meet at similar depth show up
                    // as second-difference spikes rather than jumps
                    double lap_x = std::abs(z[y * res + x - 1] + z[y * res + x + 1] - 2 * zc);
                    double lap_y = std::abs(z[(y - 1) * res + x] + z[(y + 1) * res + x] - 2 * zc);
                    if (lap_x > 0.05 || lap_y > 0.05) continue;
                    int64_t i = y * res + x;
                    int64_t sp = res * res;
                    sum_err += angular_error_deg(
                        derived.data()[i], derived.data()[sp + i], derived.data()[2 * sp + i],
                        s.normal.data()[i], s.normal.data()[sp + i], s.normal.data()[2 * sp + i]);
                    ++count;
                }
            REQUIRE(count > 0);
            INFO("class ", cls, " seed ", seed);
            CHECK(sum_err / static_cast<double>(count) < 5.0);
        }
    }
}

TEST_CASE("procedural datasets balance classes exactly and are reproducible") {
    auto classes = procedural_classes();
    Dataset ds = make_procedural_dataset(9, 8, classes, 5);
    REQUIRE(ds.size() == 9);
    int counts[3] = {0, 0, 0};
    for (size_t i = 0; i < 9; ++i) {
        CHECK(ds.samples[i].scene_class == classes[i % 3]);
        for (size_t c = 0; c < 3; ++c)
            if (ds.samples[i].scene_class == classes[c]) ++counts[c];
    }
    for (int c = 0; c < 3; ++c) CHECK(counts[c] == 3);

    Dataset ds2 = make_procedural_dataset(9, 8, classes, 5);
    CHECK(tensors_equal(ds.samples[4].rgb, ds2.samples[4].rgb));
    CHECK(ds.global_dmax > ds.global_dmin);
}

TEST_CASE("domain splits hold out one class with a ceiling paired quota") {
    auto classes = procedural_classes();
    Dataset ds = make_procedural_dataset(3000, 8, classes, 6);
    auto split = split_domains(ds, "boxworld", 10.0);
    CHECK(split.source.size() == 2000);
    CHECK(split.target_paired.size() == 100);
    CHECK(split.target_unpaired.size() == 900);
    for (const auto& s : split.source.samples) CHECK(s.scene_class != "boxworld");
    for (const auto& s : split.target_paired.samples) {
        CHECK(s.scene_class == "boxworld");
        CHECK(s.paired);
        CHECK(s.depth_raw.defined());
    }
    for (const auto& s : split.target_unpaired.samples) {
        CHECK_FALSE(s.paired);
        CHECK_FALSE(s.depth_raw.defined());
        CHECK(s.rgb.defined());
    }

    auto all = split_domains(ds, "warmroom", 100.0);
    CHECK(all.target_paired.size() == 1000);
    CHECK(all.target_unpaired.size() == 0);

    Dataset small = make_procedural_dataset(120, 8, classes, 7);
    auto tiny = split_domains(small, "coolroom", 5.0);   // 40 holdout, ceil(2.0) = 2
    CHECK(tiny.target_paired.size() == 2);
    CHECK(tiny.target_unpaired.size() == 38);

    CHECK_THROWS_AS(split_domains(ds, "atrium", 10.0), std::invalid_argument);
    CHECK_THROWS_AS(split_domains(ds, "boxworld", 0.0), std::invalid_argument);
}

TEST_CASE("batch assembly stacks normalized modalities") {
    auto classes = procedural_classes();
    Dataset ds = make_procedural_dataset(6, 8, classes, 8);
    std::vector<ModalitySpec> mods = {{"rgb", 3, true}, {"depth", 1, false},
                                      {"normal", 3, false}};
    auto tuple = assemble_batch(ds, {0, 2, 5}, mods);
    CHECK(tuple.get("rgb").shape() == std::vector<int64_t>{3, 3, 8, 8});
    CHECK(tuple.get("depth").shape() == std::vector<int64_t>{3, 1, 8, 8});
    CHECK(tuple.get("normal").shape() == std::vector<int64_t>{3, 3, 8, 8});

    // per-image depth normalization: each sample's map spans exactly [-1, 1]
    const Tensor& d = tuple.get("depth");
    for (int64_t b = 0; b < 3; ++b) {
        double lo = 1e9, hi = -1e9;
        for (int64_t i = 0; i < 64; ++i) {
            lo = std::min(lo, d.data()[b * 64 + i]);
            hi = std::max(hi, d.data()[b * 64 + i]);
        }
        CHECK(lo == doctest::Approx(-1.0));
        CHECK(hi == doctest::Approx(1.0));
    }

    // rgb passes through untouched
    for (int64_t i = 0; i < 3 * 64; ++i)
        CHECK(tuple.get("rgb").data()[i] == ds.samples[0].rgb.data()[i]);

    auto split = split_domains(ds, "boxworld", 50.0);
    Dataset& unpaired = split.target_unpaired;
    REQUIRE(unpaired.size() > 0);
    CHECK_THROWS_AS(assemble_batch(unpaired, {0}, mods), std::invalid_argument);
    std::vector<ModalitySpec> rgb_only = {{"rgb", 3, true}};
    CHECK(assemble_batch(unpaired, {0}, rgb_only).get("rgb").dim(0) == 1);
}

TEST_CASE("png round-trips for 8-bit rgb and 16-bit grayscale") {
    TempDir tmp;
    Rng rng(9);
    int64_t w = 13, h = 7;
    std::vector<uint8_t> rgb(static_cast<size_t>(w * h * 3));
    for (auto& v : rgb) v = static_cast<uint8_t>(rng.below(256));
    std::string p1 = (tmp.path / "a.png").string();
    write_png_rgb8(p1, w, h, rgb);
    int64_t rw = 0, rh = 0;
    auto back = read_png_rgb8(p1, rw, rh);
    CHECK(rw == w);
    CHECK(rh == h);
    CHECK(back == rgb);

    std::vector<uint16_t> gray(static_cast<size_t>(w * h));
    for (auto& v : gray) v = static_cast<uint16_t>(rng.below(65536));
    std::string p2 = (tmp.path / "d.png").string();
    write_png_gray16(p2, w, h, gray);
    auto gback = read_png_gray16(p2, rw, rh);
    CHECK(gback == gray);

    std::string missing = (tmp.path / "nope.png").string();
    try {
        int64_t mw, mh;
        read_png_rgb8(missing, mw, mh);
        FAIL("expected IOError");
    } catch (const IOError& e) {
        CHECK(std::string(e.what()).find("nope.png") != std::string::npos);
    }
}

TEST_CASE("export and reload round-trips a dataset through the manifest") {
    TempDir tmp;
    auto classes = procedural_classes();
    Dataset ds = make_procedural_dataset(3, 16, classes, 10);
    std::string dir = (tmp.path / "out").string();
    export_dataset(ds, dir);

    Dataset back = load_external(dir + "/manifest.json", 16);
    REQUIRE(back.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(back.samples[i].scene_class == ds.samples[i].scene_class);
        CHECK(back.samples[i].paired);
        double max_rgb = 0, max_depth_rel = 0, max_norm = 0;
        for (int64_t j = 0; j < ds.samples[i].rgb.numel(); ++j)
            max_rgb = std::max(max_rgb, std::abs(back.samples[i].rgb.data()[j] -
                                                 ds.samples[i].rgb.data()[j]));
        for (int64_t j = 0; j < ds.samples[i].depth_raw.numel(); ++j)
            max_depth_rel = std::max(
                max_depth_rel, std::abs(back.samples[i].depth_raw.data()[j] -
                                        ds.samples[i].depth_raw.data()[j]) /
                                   ds.samples[i].depth_raw.data()[j]);
        for (int64_t j = 0; j < ds.samples[i].normal.numel(); ++j)
            max_norm = std::max(max_norm, std::abs(back.samples[i].normal.data()[j] -
                                                   ds.samples[i].normal.data()[j]));
        CHECK(max_rgb < 1.5 / 255.0);       // 8-bit quantization
        CHECK(max_depth_rel < 1e-3);        // 16-bit quantization
        CHECK(max_norm < 2.0 / 255.0);
    }

    // a manifest entry pointing at a missing depth file names the file
    std::ofstream bad(tmp.path / "bad_manifest.json");
    bad << R"([{"id":"x","class":"warmroom","rgb":"out/s000000_rgb.png",)"
        << R"("depth":"out/missing_depth.png"}])";
    bad.close();
    try {
        load_external((tmp.path / "bad_manifest.json").string(), 16);
        FAIL("expected IOError");
    } catch (const IOError& e) {
        CHECK(std::string(e.what()).find("missing_depth.png") != std::string::npos);
    }
}

TEST_CASE("bilinear resize preserves constants and halves a ramp cleanly") {
    Tensor c = Tensor::full({2, 8, 8}, 0.25);
    Tensor rc = resize_bilinear(c, 4, 4);
    for (int64_t i = 0; i < rc.numel(); ++i) CHECK(rc.data()[i] == doctest::Approx(0.25));

    Tensor ramp = Tensor::zeros({1, 1, 8});
    for (int64_t x = 0; x < 8; ++x) ramp.data()[x] = static_cast<double>(x);
    Tensor down = resize_bilinear(ramp, 1, 4);
    // pixel centers average adjacent pairs: 0.5, 2.5, 4.5, 6.5
    for (int64_t x = 0; x < 4; ++x)
        CHECK(down.data()[x] == doctest::Approx(0.5 + 2.0 * static_cast<double>(x)));
}
