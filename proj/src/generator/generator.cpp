#include "generator/generator.hpp"

#include <cmath>
#include <stdexcept>

namespace mmgan {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLeakySlope = 0.2;

Tensor randn_tensor(Rng& rng, std::vector<int64_t> shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal(0.0, stddev);
    return t;
}

int64_t channels_for_res(const TrainConfig& cfg, int64_t res) {
    return std::max<int64_t>(4, std::min(cfg.channel_max, cfg.channel_base / res));
}

// Deterministic sinusoidal coordinate features replacing a learned constant
// input: per channel a fixed frequency/orientation/phase over the 4x4 grid.
Tensor make_fourier_features(int64_t channels, int64_t res) {
    Tensor t = Tensor::zeros({channels, res, res});
    for (int64_t c = 0; c < channels; ++c) {
        double theta = 2.399963229728653 * static_cast<double>(c);   // golden angle
        double cycles = 0.5 + 0.25 * static_cast<double>(c % 8);
        double fx = std::cos(theta) * cycles;
        double fy = std::sin(theta) * cycles;
        double phase = 1.7 * static_cast<double>(c);
        for (int64_t y = 0; y < res; ++y)
            for (int64_t x = 0; x < res; ++x) {
                double u = static_cast<double>(x) / static_cast<double>(res);
                double v = static_cast<double>(y) / static_cast<double>(res);
                t.data()[(c * res + y) * res + x] =
                    std::sin(2.0 * kPi * (fx * u + fy * v) + phase);
            }
    }
    return t;
}

SynthesisBlock make_block(Rng& rng, int64_t w_dim, int64_t cin, int64_t cout, bool up) {
    SynthesisBlock blk;
    blk.style_w = randn_tensor(rng, {w_dim, cin}, std::sqrt(1.0 / static_cast<double>(w_dim)));
    blk.style_b = Tensor::full({cin}, 1.0);
    blk.conv_w = randn_tensor(rng, {cout, cin, 3, 3},
                              std::sqrt(2.0 / static_cast<double>(cin * 9)));
    blk.conv_b = Tensor::zeros({cout});
    blk.ema_mag = Tensor::full({1}, 1.0);
    blk.upsample_before = up;
    return blk;
}

} // namespace

Generator::Generator(const TrainConfig& cfg, Rng& rng) {
    modalities_ = cfg.modalities;
    latent_dim_ = cfg.latent_dim;
    w_dim_ = cfg.w_dim;
    resolution_ = cfg.resolution;

    map_w1_ = randn_tensor(rng, {latent_dim_, w_dim_},
                           std::sqrt(1.0 / static_cast<double>(latent_dim_)));
    map_b1_ = Tensor::zeros({w_dim_});
    map_w2_ = randn_tensor(rng, {w_dim_, w_dim_},
                           std::sqrt(1.0 / static_cast<double>(w_dim_)));
    map_b2_ = Tensor::zeros({w_dim_});

    int total = cfg.total_layers();
    int n_up = 0;
    for (int64_t r = 4; r < cfg.resolution; r *= 2) ++n_up;
    if (total < 2 * n_up)
        throw ConfigError("config: need at least " + std::to_string(2 * n_up) +
                          " layers for resolution " + std::to_string(cfg.resolution));

    // Upsamples sit before layers total-1, total-3, ... (1-based), so the last
    // two layers always run at full resolution.
    std::vector<bool> up_before(static_cast<size_t>(total + 1), false);
    for (int k = 0; k < n_up; ++k) up_before[static_cast<size_t>(total - 1 - 2 * k)] = true;

    std::vector<int64_t> in_res(static_cast<size_t>(total + 1));
    std::vector<int64_t> out_ch(static_cast<size_t>(total + 1));
    int64_t res = 4;
    for (int i = 1; i <= total; ++i) {
        if (up_before[static_cast<size_t>(i)]) res *= 2;
        in_res[static_cast<size_t>(i)] = res;
        out_ch[static_cast<size_t>(i)] = channels_for_res(cfg, res);
    }

    int64_t c0 = channels_for_res(cfg, 4);
    fourier_ = make_fourier_features(c0, 4);

    auto in_ch = [&](int i) { return i == 1 ? c0 : out_ch[static_cast<size_t>(i - 1)]; };

    int k = cfg.branch_index;
    for (int i = 1; i < k; ++i)
        trunk_.push_back(make_block(rng, w_dim_, in_ch(i), out_ch[static_cast<size_t>(i)],
                                    up_before[static_cast<size_t>(i)]));
    for (const auto& mod : modalities_) {
        BranchHead head;
        for (int i = k; i <= total; ++i)
            head.blocks.push_back(make_block(rng, w_dim_, in_ch(i),
                                             out_ch[static_cast<size_t>(i)],
                                             up_before[static_cast<size_t>(i)]));
        int64_t c_last = out_ch[static_cast<size_t>(total)];
        head.out_w = randn_tensor(rng, {mod.channels, c_last, 1, 1},
                                  std::sqrt(1.0 / static_cast<double>(c_last)));
        head.out_b = Tensor::zeros({mod.channels});
        branches_.push_back(std::move(head));
    }
}

Tensor Generator::map_latent(const Tensor& z) const {
    if (z.ndim() != 2 || z.dim(1) != latent_dim_)
        throw std::invalid_argument("map_latent: latent must be [B," +
                                    std::to_string(latent_dim_) + "], got " +
                                    (z.ndim() == 2 ? std::to_string(z.dim(1)) : std::string("rank!=2")));
    auto h = leaky_relu(bias_add(matmul(z, map_w1_), map_b1_), kLeakySlope);
    return leaky_relu(bias_add(matmul(h, map_w2_), map_b2_), kLeakySlope);
}

Tensor Generator::run_block(SynthesisBlock& blk, const Tensor& x_in, const Tensor& w,
                            bool training) {
    Tensor x = x_in;
    if (blk.upsample_before) x = upsample2x(x);
    Tensor style = bias_add(matmul(w, blk.style_w), blk.style_b);
    x = channel_scale(x, style);
    x = conv2d(x, blk.conv_w, 1, 1);
    x = bias_add(x, blk.conv_b);
    x = leaky_relu(x, kLeakySlope);
    // scale by the running magnitude estimate, then update it in training mode
    double ema = blk.ema_mag.data()[0];
    x = scale(x, 1.0 / std::sqrt(ema + 1e-8));
    if (training) {
        double ms = 0.0;
        {
            NoGradGuard ng;
            const Tensor& raw = x;   // post-scale magnitude, relative update
            const double* p = raw.data();
            for (int64_t i = 0; i < raw.numel(); ++i) ms += p[i] * p[i];
            ms = ms / static_cast<double>(raw.numel()) * (ema + 1e-8);
        }
        blk.ema_mag.data()[0] = ema_decay_ * ema + (1.0 - ema_decay_) * ms;
    }
    return x;
}

ModalityTuple Generator::synthesize(const Tensor& w, bool training, Tensor* trunk_capture) {
    if (w.ndim() != 2 || w.dim(1) != w_dim_)
        throw std::invalid_argument("synthesize: w must be [B," + std::to_string(w_dim_) + "]");
    int64_t batch = w.dim(0);

    // broadcast the fixed input features over the batch
    Tensor x = Tensor::zeros({batch, fourier_.dim(0), fourier_.dim(1), fourier_.dim(2)});
    for (int64_t b = 0; b < batch; ++b)
        std::copy(fourier_.data(), fourier_.data() + fourier_.numel(),
                  x.data() + b * fourier_.numel());

    for (auto& blk : trunk_) x = run_block(blk, x, w, training);
    if (trunk_capture) *trunk_capture = x;

    ModalityTuple out;
    for (size_t m = 0; m < modalities_.size(); ++m) {
        Tensor xb = x;      // the shared trunk activations feed every branch
        for (auto& blk : branches_[m].blocks) xb = run_block(blk, xb, w, training);
        Tensor img = bias_add(conv2d(xb, branches_[m].out_w, 1, 0), branches_[m].out_b);
        out.names.push_back(modalities_[m].name);
        out.images.push_back(img);
    }
    return out;
}

ModalityTuple Generator::generate(const Tensor& z, bool training) {
    return synthesize(map_latent(z), training);
}

Tensor Generator::sample_latents(int64_t batch, Rng& rng) const {
    Tensor z = Tensor::zeros({batch, latent_dim_});
    for (int64_t i = 0; i < z.numel(); ++i) z.data()[i] = rng.normal();
    return z;
}

void Generator::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("g.map.w1", map_w1_);
    fn("g.map.b1", map_b1_);
    fn("g.map.w2", map_w2_);
    fn("g.map.b2", map_b2_);
    auto visit_block = [&](const std::string& prefix, SynthesisBlock& blk) {
        fn(prefix + ".style_w", blk.style_w);
        fn(prefix + ".style_b", blk.style_b);
        fn(prefix + ".conv_w", blk.conv_w);
        fn(prefix + ".conv_b", blk.conv_b);
    };
    for (size_t i = 0; i < trunk_.size(); ++i)
        visit_block("g.trunk." + std::to_string(i), trunk_[i]);
    for (size_t m = 0; m < branches_.size(); ++m) {
        std::string mp = "g.branch." + modalities_[m].name;
        for (size_t i = 0; i < branches_[m].blocks.size(); ++i)
            visit_block(mp + "." + std::to_string(i), branches_[m].blocks[i]);
        fn(mp + ".out_w", branches_[m].out_w);
        fn(mp + ".out_b", branches_[m].out_b);
    }
}

void Generator::visit_buffers(const std::function<void(const std::string&, Tensor&)>& fn) {
    for (size_t i = 0; i < trunk_.size(); ++i)
        fn("g.trunk." + std::to_string(i) + ".ema_mag", trunk_[i].ema_mag);
    for (size_t m = 0; m < branches_.size(); ++m)
        for (size_t i = 0; i < branches_[m].blocks.size(); ++i)
            fn("g.branch." + modalities_[m].name + "." + std::to_string(i) + ".ema_mag",
               branches_[m].blocks[i].ema_mag);
}

Tensor interpolate_w(const Tensor& w_a, const Tensor& w_b, double t) {
    if (w_a.shape() != w_b.shape())
        throw std::invalid_argument("interpolate_w: shape mismatch");
    if (t < 0.0 || t > 1.0)
        throw std::invalid_argument("interpolate_w: t=" + std::to_string(t) +
                                    " outside [0,1]");
    return add(scale(w_a, 1.0 - t), scale(w_b, t));
}

} // namespace mmgan
