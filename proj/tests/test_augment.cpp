#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "augment/augment.hpp"
#include "gradcheck.hpp"

#include <cmath>

using namespace mmgan;

namespace {

std::vector<ModalitySpec> three_modalities() {
    return {{"rgb", 3, true}, {"depth", 1, false}, {"normal", 3, false}};
}

ModalityTuple random_tuple(int64_t batch, int64_t res, uint64_t seed) {
    Rng rng(seed);
    ModalityTuple t;
    t.names = {"rgb", "depth", "normal"};
    for (int64_t c : {3, 1, 3}) {
        Tensor img = Tensor::zeros({batch, c, res, res});
        for (int64_t i = 0; i < img.numel(); ++i) img.data()[i] = rng.uniform(-1.0, 1.0);
        t.images.push_back(img);
    }
    return t;
}

// depth encodes the column index; rgb and normal carry distinct channel ramps
ModalityTuple ramp_tuple(int64_t res) {
    ModalityTuple t;
    t.names = {"rgb", "depth", "normal"};
    for (int64_t c : {3, 1, 3}) {
        Tensor img = Tensor::zeros({1, c, res, res});
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t y = 0; y < res; ++y)
                for (int64_t x = 0; x < res; ++x)
                    img.data()[(ch * res + y) * res + x] =
                        static_cast<double>(x) + 100.0 * static_cast<double>(ch);
        t.images.push_back(img);
    }
    return t;
}

bool tuples_equal(const ModalityTuple& a, const ModalityTuple& b) {
    if (a.names != b.names) return false;
    for (size_t m = 0; m < a.images.size(); ++m) {
        if (a.images[m].shape() != b.images[m].shape()) return false;
        for (int64_t i = 0; i < a.images[m].numel(); ++i)
            if (a.images[m].data()[i] != b.images[m].data()[i]) return false;
    }
    return true;
}

int count_subops(const AugmentPlan& p) {
    return p.xflip + p.rot90 + p.int_translate + p.iso_scale + p.rotation +
           p.aniso_scale + p.frac_translate + p.brightness + p.contrast +
           p.luma_flip + p.hue_rotate + p.saturation + p.noise + p.cutout;
}

} // namespace

TEST_CASE("plan sampling hits the configured inclusion probability") {
    Augmenter aug(three_modalities(), 8);
    Rng rng(1);
    CHECK(aug.sample_plan(0.0, rng).identity());
    CHECK(count_subops(aug.sample_plan(1.0, rng)) == 14);

    // p = 0.3 over 10000 draws: per-op inclusion frequency within +-0.02
    const int n = 10000;
    int counts[14] = {0};
    for (int i = 0; i < n; ++i) {
        AugmentPlan p = aug.sample_plan(0.3, rng);
        bool flags[14] = {p.xflip, p.rot90, p.int_translate, p.iso_scale, p.rotation,
                          p.aniso_scale, p.frac_translate, p.brightness, p.contrast,
                          p.luma_flip, p.hue_rotate, p.saturation, p.noise, p.cutout};
        for (int k = 0; k < 14; ++k) counts[k] += flags[k];
    }
    for (int k = 0; k < 14; ++k) {
        double freq = static_cast<double>(counts[k]) / n;
        INFO("sub-op ", k, " freq ", freq);
        CHECK(std::abs(freq - 0.3) < 0.02);
    }
    CHECK_THROWS_AS(aug.sample_plan(1.5, rng), std::invalid_argument);
}

TEST_CASE("identity plans return the input element-exact") {
    Augmenter aug(three_modalities(), 8);
    auto t = random_tuple(2, 8, 2);
    std::vector<AugmentPlan> plans(2);
    CHECK(tuples_equal(aug.apply(plans, t), t));
}

TEST_CASE("x-flip reverses the column ramp identically in every modality") {
    const int64_t res = 8;
    Augmenter aug(three_modalities(), res);
    auto t = ramp_tuple(res);
    AugmentPlan plan;
    plan.xflip = true;
    auto out = aug.apply({plan}, t);
    for (size_t m = 0; m < out.images.size(); ++m) {
        const Tensor& img = out.images[m];
        int64_t ch = img.dim(1);
        for (int64_t c = 0; c < ch; ++c)
            for (int64_t y = 0; y < res; ++y)
                for (int64_t x = 0; x < res; ++x)
                    CHECK(img.data()[(c * res + y) * res + x] ==
                          static_cast<double>(res - 1 - x) + 100.0 * static_cast<double>(c));
    }
}

TEST_CASE("quarter rotation and integer translation land exactly") {
    const int64_t res = 8;
    Augmenter aug(three_modalities(), res);
    auto t = ramp_tuple(res);

    AugmentPlan rot;
    rot.rot90 = true;
    rot.rot90_k = 2;    // 180 degrees: both axes reversed
    auto r = aug.apply({rot}, t);
    const Tensor& depth = r.get("depth");
    for (int64_t y = 0; y < res; ++y)
        for (int64_t x = 0; x < res; ++x)
            CHECK(depth.data()[y * res + x] == static_cast<double>(res - 1 - x));

    AugmentPlan tr;
    tr.int_translate = true;
    tr.itx = 2;
    tr.ity = 0;
    auto s = aug.apply({tr}, t);
    const Tensor& d2 = s.get("depth");
    for (int64_t y = 0; y < res; ++y)
        for (int64_t x = 0; x < res; ++x) {
            double expect = (x - 2 >= 0) ? static_cast<double>(x - 2) : 0.0;
            CHECK(d2.data()[y * res + x] == expect);
        }
}

TEST_CASE("color-only plans leave non-color modalities element-exact") {
    Augmenter aug(three_modalities(), 8);
    auto t = random_tuple(2, 8, 3);
    AugmentPlan plan;
    plan.brightness = true;
    plan.brightness_shift = 0.25;
    plan.saturation = true;
    plan.saturation_factor = 1.7;
    plan.hue_rotate = true;
    plan.hue_angle = 0.9;
    auto out = aug.apply({plan, plan}, t);

    for (int64_t i = 0; i < t.get("depth").numel(); ++i)
        CHECK(out.get("depth").data()[i] == t.get("depth").data()[i]);
    for (int64_t i = 0; i < t.get("normal").numel(); ++i)
        CHECK(out.get("normal").data()[i] == t.get("normal").data()[i]);

    double diff = 0;
    for (int64_t i = 0; i < t.get("rgb").numel(); ++i)
        diff += std::abs(out.get("rgb").data()[i] - t.get("rgb").data()[i]);
    CHECK(diff > 1e-6);
}

TEST_CASE("brightness shift is an exact per-pixel offset on rgb") {
    Augmenter aug(three_modalities(), 8);
    auto t = random_tuple(1, 8, 4);
    AugmentPlan plan;
    plan.brightness = true;
    plan.brightness_shift = -0.3;
    auto out = aug.apply({plan}, t);
    for (int64_t i = 0; i < t.get("rgb").numel(); ++i)
        CHECK(out.get("rgb").data()[i] ==
              doctest::Approx(t.get("rgb").data()[i] - 0.3).epsilon(1e-12));
}

TEST_CASE("grayscale conversion fixed points: saturation 0 projects onto luma") {
    // with saturation factor 0 all three channels collapse to the channel mean
    Augmenter aug(three_modalities(), 8);
    auto t = random_tuple(1, 8, 5);
    AugmentPlan plan;
    plan.saturation = true;
    plan.saturation_factor = 0.0;
    auto out = aug.apply({plan}, t);
    const Tensor& rgb_in = t.get("rgb");
    const Tensor& rgb_out = out.get("rgb");
    int64_t sp = 8 * 8;
    for (int64_t i = 0; i < sp; ++i) {
        double mean = (rgb_in.data()[i] + rgb_in.data()[sp + i] + rgb_in.data()[2 * sp + i]) / 3.0;
        for (int64_t c = 0; c < 3; ++c)
            CHECK(rgb_out.data()[c * sp + i] == doctest::Approx(mean).epsilon(1e-10));
    }
}

TEST_CASE("tuple application equals per-modality application for any plan") {
    Augmenter aug(three_modalities(), 8);
    Rng rng(6);
    for (int rep = 0; rep < 20; ++rep) {
        auto t = random_tuple(2, 8, 100 + static_cast<uint64_t>(rep));
        auto plans = aug.sample_plans(2, 0.5, rng);
        auto whole = aug.apply(plans, t);
        for (size_t m = 0; m < t.names.size(); ++m) {
            ModalityTuple solo;
            solo.names = {t.names[m]};
            solo.images = {t.images[m]};
            auto solo_out = aug.apply(plans, solo);
            for (int64_t i = 0; i < whole.images[m].numel(); ++i)
                CHECK(whole.images[m].data()[i] == solo_out.images[0].data()[i]);
        }
    }
}

TEST_CASE("cutout zeroes a shared square and noise matches its advertised scale") {
    const int64_t res = 16;
    Augmenter aug(three_modalities(), res);
    ModalityTuple t;
    t.names = {"rgb", "depth", "normal"};
    for (int64_t c : {3, 1, 3}) t.images.push_back(Tensor::full({1, c, res, res}, 1.0));

    AugmentPlan plan;
    plan.cutout = true;
    plan.cut_cx = 0.5;
    plan.cut_cy = 0.5;
    auto out = aug.apply({plan}, t);
    // the same pixels are zeroed in every modality
    for (const auto& img : out.images) {
        int64_t zeros = 0;
        for (int64_t i = 0; i < res * res; ++i) zeros += img.data()[i] == 0.0;
        CHECK(zeros == (res / 2) * (res / 2));
    }

    AugmentPlan np;
    np.noise = true;
    np.noise_sigma = 0.05;
    np.noise_seed = 1234;
    auto noisy = aug.apply({np}, t);
    double var = 0;
    int64_t n = noisy.get("rgb").numel();
    for (int64_t i = 0; i < n; ++i) {
        double d = noisy.get("rgb").data()[i] - 1.0;
        var += d * d;
    }
    var /= static_cast<double>(n);
    CHECK(std::sqrt(var) == doctest::Approx(0.05).epsilon(0.25));
    // deterministic for a fixed seed
    auto noisy2 = aug.apply({np}, t);
    CHECK(tuples_equal(noisy, noisy2));
}

TEST_CASE("augmentation keeps gradients with respect to its input") {
    Augmenter aug(three_modalities(), 4);
    Rng rng(7);
    auto plans = aug.sample_plans(1, 1.0, rng);

    auto f = [&](const std::vector<Tensor>& xs) {
        ModalityTuple t;
        t.names = {"rgb", "depth", "normal"};
        t.images = {xs[0], xs[1], xs[2]};
        auto out = aug.apply(plans, t);
        Tensor acc;
        for (const auto& img : out.images) {
            Tensor s = sum(square(img));
            acc = acc.defined() ? add(acc, s) : s;
        }
        return acc;
    };
    auto t = random_tuple(1, 4, 8);
    auto res = testutil::gradcheck(f, {t.images[0], t.images[1], t.images[2]}, 1e-6);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("adaptive controller follows the overfit signal") {
    AdaController up;
    up.adjust_step = 0.05;
    Tensor positive = Tensor::full({8, 2}, 3.0);
    double prev = up.p;
    for (int i = 0; i < 200; ++i) {
        update_p(up, positive);
        CHECK(up.p >= prev);
        prev = up.p;
    }
    CHECK(up.p == 1.0);

    AdaController down;
    down.p = 0.5;
    down.adjust_step = 0.05;
    Tensor negative = Tensor::full({8, 2}, -3.0);
    prev = down.p;
    for (int i = 0; i < 200; ++i) {
        update_p(down, negative);
        CHECK(down.p <= prev);
        prev = down.p;
    }
    CHECK(down.p == 0.0);

    // estimate at the target is a fixed point of the control law
    AdaController fixed;
    fixed.p = 0.4;
    fixed.overfit_estimate = fixed.target;
    fixed.estimate_decay = 0.5;     // keeps the estimate bit-exact at the target
    // 10 logits, 8 positive and 2 negative: mean sign exactly 0.6
    Tensor balanced = Tensor::from_data({10, 1}, {1, 1, 1, 1, 1, 1, 1, 1, -1, -1});
    for (int i = 0; i < 50; ++i) update_p(fixed, balanced);
    CHECK(fixed.p == 0.4);
}

TEST_CASE("stop rule triggers at the threshold") {
    AdaController c;
    c.stop_threshold = 0.7;
    c.p = 0.69;
    CHECK_FALSE(should_stop(c));
    c.p = 0.70;
    CHECK(should_stop(c));
    c.p = 1.0;
    CHECK(should_stop(c));
}
