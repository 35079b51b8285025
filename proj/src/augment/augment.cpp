#include "augment/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmgan {

namespace {

constexpr double kPi = 3.14159265358979323846;

// affine map p -> A p + t on centered pixel coordinates
struct Affine {
    double a = 1, b = 0, c = 0, d = 1;  // row-major 2x2
    double tx = 0, ty = 0;

    // this after other: (this o other)(p) = this(other(p))
    Affine after(const Affine& o) const {
        Affine r;
        r.a = a * o.a + b * o.c;
        r.b = a * o.b + b * o.d;
        r.c = c * o.a + d * o.c;
        r.d = c * o.b + d * o.d;
        r.tx = a * o.tx + b * o.ty + tx;
        r.ty = c * o.tx + d * o.ty + ty;
        return r;
    }
};

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

void mat3_identity(double m[9]) {
    for (int i = 0; i < 9; ++i) m[i] = 0.0;
    m[0] = m[4] = m[8] = 1.0;
}

// out = a * b for row-major 3x3
void mat3_mul(const double a[9], const double b[9], double out[9]) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
            out[i * 3 + j] = s;
        }
}

} // namespace

std::vector<double> AugmentPlan::inverse_matrix(int64_t size) const {
    (void)size;
    // forward order: xflip, rot90, integer translate, isotropic scale,
    // rotation, anisotropic scale, fractional translate. The warp consumes
    // the inverse map, so compose the per-op inverses in reverse order.
    Affine inv;   // identity
    auto prepend = [&](const Affine& op_inv) { inv = inv.after(op_inv); };
    if (xflip) prepend({-1, 0, 0, 1, 0, 0});
    if (rot90) {
        int k = ((rot90_k % 4) + 4) % 4;
        // inverse of rotation by k*90 deg is rotation by -k*90 deg
        static const int cs[4] = {1, 0, -1, 0}, sn[4] = {0, 1, 0, -1};
        double ct = cs[k], st = -sn[k];
        prepend({ct, -st, st, ct, 0, 0});
    }
    if (int_translate)
        prepend({1, 0, 0, 1, -static_cast<double>(itx), -static_cast<double>(ity)});
    if (iso_scale) {
        double s = 1.0 / scale_factor;
        prepend({s, 0, 0, s, 0, 0});
    }
    if (rotation) {
        double ct = std::cos(-angle), st = std::sin(-angle);
        prepend({ct, -st, st, ct, 0, 0});
    }
    if (aniso_scale)
        prepend({1.0 / aniso_ratio, 0, 0, aniso_ratio, 0, 0});
    if (frac_translate)
        prepend({1, 0, 0, 1, -ftx, -fty});
    return {inv.a, inv.b, inv.tx, inv.c, inv.d, inv.ty};
}

std::vector<double> AugmentPlan::color_matrix() const {
    // forward composition C_n ... C_1 x + t, about the [-1, 1] value range
    double A[9], t[3] = {0, 0, 0};
    mat3_identity(A);
    const double v = 1.0 / std::sqrt(3.0);    // luma axis (1,1,1)/sqrt(3)
    auto apply = [&](const double M[9], const double off[3]) {
        double tmp[9];
        mat3_mul(M, A, tmp);
        std::copy(tmp, tmp + 9, A);
        double nt[3];
        for (int i = 0; i < 3; ++i)
            nt[i] = M[i * 3] * t[0] + M[i * 3 + 1] * t[1] + M[i * 3 + 2] * t[2] + off[i];
        std::copy(nt, nt + 3, t);
    };
    if (brightness) {
        double I[9];
        mat3_identity(I);
        double off[3] = {brightness_shift, brightness_shift, brightness_shift};
        apply(I, off);
    }
    if (contrast) {
        double M[9] = {contrast_factor, 0, 0, 0, contrast_factor, 0, 0, 0, contrast_factor};
        double off[3] = {0, 0, 0};
        apply(M, off);
    }
    if (luma_flip) {
        double M[9];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                M[i * 3 + j] = (i == j ? 1.0 : 0.0) - 2.0 * v * v;
        double off[3] = {0, 0, 0};
        apply(M, off);
    }
    if (hue_rotate) {
        // Rodrigues rotation about the unit luma axis
        double ct = std::cos(hue_angle), st = std::sin(hue_angle);
        double M[9];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double kij = v * v;
                double eps = 0.0;    // cross-product matrix entry
                if (i != j) {
                    // [k]x for k = (v,v,v): entries +/- v with sign of Levi-Civita
                    int sgn = ((j - i + 3) % 3 == 1) ? -1 : 1;
                    eps = sgn * v;
                }
                M[i * 3 + j] = ct * (i == j ? 1.0 : 0.0) + st * eps + (1 - ct) * kij;
            }
        double off[3] = {0, 0, 0};
        apply(M, off);
    }
    if (saturation) {
        double M[9];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double p = v * v;
                M[i * 3 + j] = p + ((i == j ? 1.0 : 0.0) - p) * saturation_factor;
            }
        double off[3] = {0, 0, 0};
        apply(M, off);
    }
    return {A[0], A[1], A[2], t[0], A[3], A[4], A[5], t[1], A[6], A[7], A[8], t[2]};
}

void update_p(AdaController& ctrl, const Tensor& real_logits) {
    double mean_sign = 0.0;
    int64_t n = real_logits.numel();
    if (n == 0) throw std::invalid_argument("update_p: empty logits");
    for (int64_t i = 0; i < n; ++i) {
        double x = real_logits.data()[i];
        mean_sign += (x > 0) - (x < 0);
    }
    mean_sign /= static_cast<double>(n);
    ctrl.overfit_estimate = ctrl.estimate_decay * ctrl.overfit_estimate +
                            (1.0 - ctrl.estimate_decay) * mean_sign;
    if (ctrl.overfit_estimate > ctrl.target)
        ctrl.p += ctrl.adjust_step;
    else if (ctrl.overfit_estimate < ctrl.target)
        ctrl.p -= ctrl.adjust_step;
    ctrl.p = std::clamp(ctrl.p, 0.0, 1.0);
}

bool should_stop(const AdaController& ctrl) { return ctrl.p >= ctrl.stop_threshold; }

Augmenter::Augmenter(std::vector<ModalitySpec> modalities, int64_t resolution)
    : modalities_(std::move(modalities)), resolution_(resolution) {
    if (resolution_ < 4)
        throw std::invalid_argument("Augmenter: resolution must be >= 4");
}

bool Augmenter::color_augmentable(const std::string& name) const {
    for (const auto& m : modalities_)
        if (m.name == name) return m.color_augmentable && m.channels == 3;
    throw std::invalid_argument("Augmenter: unknown modality '" + name + "'");
}

AugmentPlan Augmenter::sample_plan(double p, Rng& rng) const {
    if (p < 0.0 || p > 1.0)
        throw std::invalid_argument("sample_plan: p must be in [0, 1]");
    AugmentPlan plan;
    int64_t max_shift = std::max<int64_t>(1, resolution_ / 8);
    plan.xflip = rng.bernoulli(p);
    if ((plan.rot90 = rng.bernoulli(p)))
        plan.rot90_k = static_cast<int>(rng.below(4));
    if ((plan.int_translate = rng.bernoulli(p))) {
        plan.itx = static_cast<int>(rng.below(2 * max_shift + 1)) - static_cast<int>(max_shift);
        plan.ity = static_cast<int>(rng.below(2 * max_shift + 1)) - static_cast<int>(max_shift);
    }
    if ((plan.iso_scale = rng.bernoulli(p)))
        plan.scale_factor = std::exp2(rng.normal(0.0, 0.2));
    if ((plan.rotation = rng.bernoulli(p)))
        plan.angle = rng.uniform(-kPi, kPi);
    if ((plan.aniso_scale = rng.bernoulli(p)))
        plan.aniso_ratio = std::exp2(rng.normal(0.0, 0.2));
    if ((plan.frac_translate = rng.bernoulli(p))) {
        plan.ftx = rng.normal(0.0, 0.125) * static_cast<double>(resolution_);
        plan.fty = rng.normal(0.0, 0.125) * static_cast<double>(resolution_);
    }
    if ((plan.brightness = rng.bernoulli(p)))
        plan.brightness_shift = rng.normal(0.0, 0.2);
    if ((plan.contrast = rng.bernoulli(p)))
        plan.contrast_factor = std::exp2(rng.normal(0.0, 0.5));
    plan.luma_flip = rng.bernoulli(p);
    if ((plan.hue_rotate = rng.bernoulli(p)))
        plan.hue_angle = rng.uniform(-kPi, kPi);
    if ((plan.saturation = rng.bernoulli(p)))
        plan.saturation_factor = std::exp2(rng.normal(0.0, 1.0));
    if ((plan.noise = rng.bernoulli(p))) {
        plan.noise_sigma = std::abs(rng.normal(0.0, 0.1));
        plan.noise_seed = rng.next_u64();
    }
    if ((plan.cutout = rng.bernoulli(p))) {
        plan.cut_cx = rng.uniform();
        plan.cut_cy = rng.uniform();
    }
    return plan;
}

std::vector<AugmentPlan> Augmenter::sample_plans(int64_t batch, double p, Rng& rng) const {
    std::vector<AugmentPlan> plans;
    plans.reserve(static_cast<size_t>(batch));
    for (int64_t i = 0; i < batch; ++i) plans.push_back(sample_plan(p, rng));
    return plans;
}

ModalityTuple Augmenter::apply(const std::vector<AugmentPlan>& plans,
                               const ModalityTuple& tuple) const {
    if (tuple.images.empty()) throw std::invalid_argument("augment apply: empty tuple");
    int64_t batch = tuple.batch();
    if (static_cast<int64_t>(plans.size()) != batch)
        throw std::invalid_argument("augment apply: need one plan per sample");
    int64_t size = tuple.resolution();

    bool any_geom = false, any_color = false, any_noise = false, any_cut = false;
    for (const auto& pl : plans) {
        any_geom |= pl.has_geometric();
        any_color |= pl.has_color();
        any_noise |= pl.noise;
        any_cut |= pl.cutout;
    }

    std::vector<double> warp_mats;
    if (any_geom) {
        warp_mats.reserve(static_cast<size_t>(batch) * 6);
        for (const auto& pl : plans) {
            auto m = pl.inverse_matrix(size);
            warp_mats.insert(warp_mats.end(), m.begin(), m.end());
        }
    }
    std::vector<double> color_mats;
    if (any_color) {
        color_mats.reserve(static_cast<size_t>(batch) * 12);
        for (const auto& pl : plans) {
            auto m = pl.color_matrix();
            color_mats.insert(color_mats.end(), m.begin(), m.end());
        }
    }

    // per-sample spatial cutout mask, replicated over channels per modality
    std::vector<double> cut_plane;
    if (any_cut) {
        cut_plane.assign(static_cast<size_t>(batch * size * size), 1.0);
        int64_t half = size / 4;    // cutout square has side size/2
        for (int64_t b = 0; b < batch; ++b) {
            const auto& pl = plans[static_cast<size_t>(b)];
            if (!pl.cutout) continue;
            int64_t cx = static_cast<int64_t>(std::floor(pl.cut_cx * size));
            int64_t cy = static_cast<int64_t>(std::floor(pl.cut_cy * size));
            int64_t x0 = std::max<int64_t>(0, cx - half), x1 = std::min(size, cx + half);
            int64_t y0 = std::max<int64_t>(0, cy - half), y1 = std::min(size, cy + half);
            for (int64_t y = y0; y < y1; ++y)
                for (int64_t x = x0; x < x1; ++x)
                    cut_plane[static_cast<size_t>((b * size + y) * size + x)] = 0.0;
        }
    }

    ModalityTuple out;
    out.names = tuple.names;
    for (size_t mi = 0; mi < tuple.names.size(); ++mi) {
        const std::string& name = tuple.names[mi];
        Tensor x = tuple.images[mi];
        int64_t channels = x.dim(1);
        if (any_geom) x = affine_warp(x, warp_mats);
        if (any_color && color_augmentable(name)) x = color_transform(x, color_mats);
        if (any_noise) {
            // deterministic per (plan seed, modality): applying to the tuple
            // matches applying to the modality alone
            Tensor noise = Tensor::zeros(x.shape());
            int64_t per = channels * size * size;
            for (int64_t b = 0; b < batch; ++b) {
                const auto& pl = plans[static_cast<size_t>(b)];
                if (!pl.noise) continue;
                Rng nrng(pl.noise_seed ^ fnv1a(name));
                double* dst = noise.data() + b * per;
                for (int64_t i = 0; i < per; ++i) dst[i] = nrng.normal(0.0, pl.noise_sigma);
            }
            x = add(x, noise);
        }
        if (any_cut) {
            Tensor mask = Tensor::zeros(x.shape());
            int64_t sp = size * size;
            for (int64_t b = 0; b < batch; ++b)
                for (int64_t c = 0; c < channels; ++c)
                    std::copy(cut_plane.begin() + b * sp, cut_plane.begin() + (b + 1) * sp,
                              mask.data() + (b * channels + c) * sp);
            x = mul(x, mask);
        }
        out.images.push_back(x);
    }
    return out;
}

} // namespace mmgan
