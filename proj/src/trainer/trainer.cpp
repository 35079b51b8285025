#include "trainer/trainer.hpp"

#include "data/depth.hpp"
#include "data/image_io.hpp"
#include "loss/loss.hpp"
#include "metrics/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mmgan {

namespace {

void zero_grads(std::vector<std::pair<std::string, Tensor>>& params) {
    for (auto& [name, t] : params) t.zero_grad();
}

// Row subset of a tuple as fresh value-only tensors.
ModalityTuple select_rows(const ModalityTuple& t, const std::vector<int64_t>& rows) {
    ModalityTuple out;
    out.names = t.names;
    int64_t B = t.batch();
    for (const auto& img : t.images) {
        int64_t per = img.numel() / B;
        std::vector<int64_t> shape = img.shape();
        shape[0] = static_cast<int64_t>(rows.size());
        Tensor sel = Tensor::zeros(shape);
        for (size_t r = 0; r < rows.size(); ++r)
            std::memcpy(sel.data() + static_cast<int64_t>(r) * per,
                        img.data() + rows[r] * per,
                        static_cast<size_t>(per) * sizeof(double));
        out.images.push_back(sel);
    }
    return out;
}

std::string format_logits(const Tensor& logits) {
    std::ostringstream os;
    os.precision(6);
    int64_t n = std::min<int64_t>(logits.numel(), 16);
    for (int64_t i = 0; i < n; ++i) os << (i ? " " : "") << logits.data()[i];
    if (logits.numel() > n) os << " ...";
    return os.str();
}

Tensor detach_copy(const Tensor& t) {
    Tensor out = Tensor::zeros(t.shape());
    std::memcpy(out.data(), t.data(), static_cast<size_t>(t.numel()) * sizeof(double));
    return out;
}

} // namespace

void Adam::step(const std::vector<std::pair<std::string, Tensor>>& params) {
    ++t;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (const auto& [name, param] : params) {
        Tensor& mm = m[name];
        Tensor& vv = v[name];
        if (!mm.defined()) mm = Tensor::zeros(param.shape());
        if (!vv.defined()) vv = Tensor::zeros(param.shape());
        Tensor g = param.grad();
        Tensor p = param;   // shared-impl handle; data writes hit the parameter
        for (int64_t i = 0; i < param.numel(); ++i) {
            double gi = g.defined() ? g.data()[i] : 0.0;
            double mi = beta1 * mm.data()[i] + (1.0 - beta1) * gi;
            double vi = beta2 * vv.data()[i] + (1.0 - beta2) * gi * gi;
            mm.data()[i] = mi;
            vv.data()[i] = vi;
            p.data()[i] -= lr * (mi / c1) / (std::sqrt(vi / c2) + eps);
        }
    }
}

void Adam::reset() {
    t = 0;
    m.clear();
    v.clear();
}

TrainState::TrainState(const TrainConfig& config)
    : cfg(config),
      rng(config.seed),
      aug(config.modalities, config.resolution) {
    cfg.validate();
    gen = std::make_unique<Generator>(cfg, rng);
    disc = std::make_unique<Discriminator>(cfg, rng);
    gen->visit_params([](const std::string&, Tensor& t) { t.set_requires_grad(true); });
    disc->visit_params([](const std::string&, Tensor& t) { t.set_requires_grad(true); });
    ada.target = cfg.ada_target;
    ada.adjust_step = cfg.effective_ada_step();
    ada.stop_threshold = cfg.ada_stop_threshold;
    g_opt = Adam(cfg.g_lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    d_opt = Adam(cfg.d_lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
}

double TrainState::current_p(bool finetuning) const {
    switch (cfg.augmentation_mode) {
        case AugmentationMode::NONE: return 0.0;
        case AugmentationMode::FIXED_P: return cfg.fixed_p;
        case AugmentationMode::ADAPTIVE:
            if (finetuning && !cfg.finetune_ada) return 0.0;
            return ada.p;
    }
    return 0.0;
}

std::vector<std::pair<std::string, Tensor>> TrainState::g_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    gen->visit_params([&](const std::string& n, Tensor& t) { out.emplace_back(n, t); });
    return out;
}

std::vector<std::pair<std::string, Tensor>> TrainState::d_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    disc->visit_params([&](const std::string& n, Tensor& t) { out.emplace_back(n, t); });
    return out;
}

namespace {

StepStats step_impl(TrainState& st, const ModalityTuple& real,
                    const std::vector<uint8_t>* paired) {
    const TrainConfig& cfg = st.cfg;
    int64_t B = real.batch();
    if (B < 1) throw std::invalid_argument("train_step: empty batch");
    bool ft = paired != nullptr;
    std::vector<int64_t> paired_rows, unpaired_rows;
    if (ft) {
        if (static_cast<int64_t>(paired->size()) != B)
            throw std::invalid_argument("finetune_step: one flag per sample required");
        for (int64_t b = 0; b < B; ++b)
            ((*paired)[static_cast<size_t>(b)] ? paired_rows : unpaired_rows).push_back(b);
        if (paired_rows.empty())
            throw std::invalid_argument(
                "finetune_step: no paired samples; the consistency head has no real data");
    }
    int64_t n_paired = ft ? static_cast<int64_t>(paired_rows.size()) : B;

    double p = st.current_p(ft);
    LossConfig lc{cfg.r1_gamma, cfg.r1_interval, cfg.blur_sigma_init, cfg.blur_ramp_images};
    double sigma = blur_sigma(st.images_seen, lc);

    auto process = [&](const ModalityTuple& t) {
        ModalityTuple out = t;
        if (sigma > 0.0)
            for (auto& img : out.images) img = gaussian_blur(img, sigma);
        if (p > 0.0) out = st.aug.apply(st.aug.sample_plans(B, p, st.rng), out);
        return out;
    };
    auto score_all_fn = [&](const ModalityTuple& t) { return st.disc->score_all(t); };

    StepStats stats;
    stats.blur = sigma;
    stats.p = p;

    auto gp = st.g_params();
    auto dp = st.d_params();

    // ---- discriminator update ----
    zero_grads(dp);
    Tensor z = st.gen->sample_latents(B, st.rng);
    ModalityTuple fake_raw;
    {
        NoGradGuard ng;
        fake_raw = st.gen->generate(z, false);
    }
    ModalityTuple real_in = process(real);
    ModalityTuple fake_in = process(fake_raw);
    Tensor real_logits = st.disc->score_all(real_in);
    Tensor fake_logits = st.disc->score_all(fake_in);
    if (!all_finite(real_logits) || !all_finite(fake_logits))
        throw std::runtime_error("train_step: non-finite logits at step " +
                                 std::to_string(st.step) + " (p=" + std::to_string(p) +
                                 ", real=[" + format_logits(real_logits) +
                                 "], fake=[" + format_logits(fake_logits) + "])");

    Tensor dl;
    if (ft) {
        int64_t K = real_logits.dim(1);
        Tensor weights = Tensor::zeros({B, K});
        int64_t col = 0;
        if (st.disc->mode() != DiscriminatorMode::CD_ONLY) {
            for (const auto& m : cfg.modalities) {
                bool everywhere = m.name == "rgb";
                double cnt = static_cast<double>(everywhere ? B : n_paired);
                for (int64_t b = 0; b < B; ++b) {
                    bool included = everywhere || (*paired)[static_cast<size_t>(b)];
                    weights.data()[b * K + col] = included ? 1.0 / cnt : 0.0;
                }
                ++col;
            }
        }
        if (st.disc->mode() != DiscriminatorMode::FD_ONLY) {
            for (int64_t b = 0; b < B; ++b)
                weights.data()[b * K + col] = (*paired)[static_cast<size_t>(b)]
                    ? 1.0 / static_cast<double>(n_paired) : 0.0;
        }
        dl = d_loss_weighted(real_logits, fake_logits, weights);
    } else {
        dl = d_loss(real_logits, fake_logits);
    }

    Tensor d_total = dl;
    if (cfg.r1_gamma > 0.0 && st.step % cfg.r1_interval == 0) {
        Tensor r1;
        if (!ft) {
            r1 = r1_penalty(score_all_fn, real_in, cfg.r1_gamma);
        } else {
            // the consistency head (and the non-RGB fidelity heads) must not
            // see unpaired samples, so the penalty splits per subset
            ModalityTuple rp = select_rows(real_in, paired_rows);
            r1 = scale(r1_penalty(score_all_fn, rp, cfg.r1_gamma),
                       static_cast<double>(n_paired) / static_cast<double>(B));
            if (!unpaired_rows.empty() &&
                st.disc->mode() != DiscriminatorMode::CD_ONLY && real_in.has("rgb")) {
                ModalityTuple ru = select_rows(real_in, unpaired_rows);
                auto rgb_fn = [&](const ModalityTuple& t) {
                    return st.disc->score_fidelity("rgb", t.get("rgb"));
                };
                r1 = add(r1, scale(r1_penalty(rgb_fn, ru, cfg.r1_gamma),
                                   static_cast<double>(unpaired_rows.size()) /
                                       static_cast<double>(B)));
            }
        }
        stats.r1 = r1.item();
        // lazy schedule: each application stands in for r1_interval steps
        d_total = add(d_total, scale(r1, static_cast<double>(cfg.r1_interval)));
    }
    stats.d_loss = dl.item();
    backward(d_total);
    st.d_opt.step(dp);

    bool ada_active = cfg.augmentation_mode == AugmentationMode::ADAPTIVE &&
                      (!ft || cfg.finetune_ada);
    if (ada_active && (st.step + 1) % cfg.ada_interval == 0) {
        Tensor rl = detach_copy(real_logits);
        if (st.ada_update) st.ada_update(st.ada, rl);
        else update_p(st.ada, rl);
    }
    stats.real_sign = st.ada.overfit_estimate;

    // ---- generator update ----
    zero_grads(gp);
    zero_grads(dp);
    Tensor z2 = st.gen->sample_latents(B, st.rng);
    ModalityTuple fake2 = st.gen->generate(z2, true);
    Tensor gl = g_loss(st.disc->score_all(process(fake2)));
    stats.g_loss = gl.item();
    backward(gl);
    st.g_opt.step(gp);
    zero_grads(dp);

    ++st.step;
    st.images_seen += B;
    return stats;
}

} // namespace

StepStats train_step(TrainState& st, const ModalityTuple& real) {
    return step_impl(st, real, nullptr);
}

StepStats finetune_step(TrainState& st, const ModalityTuple& real,
                        const std::vector<uint8_t>& paired) {
    return step_impl(st, real, &paired);
}

FinetuneBatch sample_finetune_batch(const Dataset& paired_pool,
                                    const Dataset& unpaired_pool,
                                    const TrainConfig& cfg, Rng& rng) {
    if (paired_pool.size() == 0)
        throw std::invalid_argument(
            "sample_finetune_batch: empty paired pool; the consistency head is untrainable");
    int64_t B = cfg.batch_size;
    int64_t np = unpaired_pool.size() == 0 ? B : (B + 1) / 2;
    int64_t nu = B - np;

    auto pi = sample_indices(paired_pool.size(), np, rng);
    ModalityTuple pt = assemble_batch(paired_pool, pi, cfg.modalities,
                                      cfg.per_image_depth_norm);

    FinetuneBatch out;
    out.tuple.names = pt.names;
    for (size_t m = 0; m < pt.images.size(); ++m) {
        std::vector<int64_t> shape = pt.images[m].shape();
        int64_t per = pt.images[m].numel() / np;
        shape[0] = B;
        Tensor full = Tensor::zeros(shape);
        std::memcpy(full.data(), pt.images[m].data(),
                    static_cast<size_t>(np * per) * sizeof(double));
        out.tuple.images.push_back(full);
    }
    if (nu > 0) {
        const ModalitySpec* rgb = cfg.find_modality("rgb");
        if (!rgb)
            throw std::invalid_argument("sample_finetune_batch: unpaired data carries rgb only");
        auto ui = sample_indices(unpaired_pool.size(), nu, rng);
        ModalityTuple ut = assemble_batch(unpaired_pool, ui, {*rgb},
                                          cfg.per_image_depth_norm);
        Tensor& dst = out.tuple.images[static_cast<size_t>(
            std::find(out.tuple.names.begin(), out.tuple.names.end(), "rgb") -
            out.tuple.names.begin())];
        int64_t per = dst.numel() / B;
        std::memcpy(dst.data() + np * per, ut.get("rgb").data(),
                    static_cast<size_t>(nu * per) * sizeof(double));
    }
    out.paired.assign(static_cast<size_t>(B), 0);
    for (int64_t b = 0; b < np; ++b) out.paired[static_cast<size_t>(b)] = 1;
    return out;
}

namespace {

// Generated tuples stacked per modality, value-only, fixed latent stream so
// successive evaluations are paired comparisons.
ModalityTuple generate_eval_samples(TrainState& st, int64_t n) {
    const TrainConfig& cfg = st.cfg;
    Rng erng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    ModalityTuple out;
    for (const auto& m : cfg.modalities) {
        out.names.push_back(m.name);
        out.images.push_back(Tensor::zeros({n, m.channels, cfg.resolution, cfg.resolution}));
    }
    int64_t done = 0;
    NoGradGuard ng;
    while (done < n) {
        int64_t b = std::min<int64_t>(cfg.batch_size, n - done);
        Tensor z = st.gen->sample_latents(b, erng);
        ModalityTuple fake = st.gen->generate(z, false);
        for (size_t m = 0; m < out.images.size(); ++m) {
            int64_t per = fake.images[m].numel() / b;
            std::memcpy(out.images[m].data() + done * per, fake.images[m].data(),
                        static_cast<size_t>(b * per) * sizeof(double));
        }
        done += b;
    }
    return out;
}

Tensor clamp_unit(const Tensor& t) {
    Tensor out = Tensor::zeros(t.shape());
    for (int64_t i = 0; i < t.numel(); ++i)
        out.data()[i] = std::clamp(t.data()[i], -1.0, 1.0);
    return out;
}

} // namespace

MetricReport evaluate(TrainState& st, const Dataset& data) {
    const TrainConfig& cfg = st.cfg;
    int64_t n = std::min<int64_t>(cfg.metric_samples, static_cast<int64_t>(data.size()));
    if (n < 2) throw std::invalid_argument("evaluate: need at least 2 reference samples");

    std::vector<size_t> idx(static_cast<size_t>(n));
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    ModalityTuple real = assemble_batch(data, idx, cfg.modalities, cfg.per_image_depth_norm);
    ModalityTuple fake = generate_eval_samples(st, n);

    MetricReport rep;
    rep.step = st.step;
    rep.images_seen = st.images_seen;

    BuiltinExtractor ex;
    for (size_t m = 0; m < real.names.size(); ++m)
        rep.fid[real.names[m]] = fid(real.images[m], fake.images[m], ex);

    if (fake.has("depth") && fake.has("normal")) {
        double dmin = st.data_dmin, dmax = st.data_dmax;
        if (!(dmax > dmin)) { dmin = 1.0; dmax = 2.0; }
        Tensor depth_raw = denormalize_depth(clamp_unit(fake.get("depth")), dmin, dmax);
        for (int64_t i = 0; i < depth_raw.numel(); ++i)
            depth_raw.data()[i] = std::max(depth_raw.data()[i], 1e-3);
        const Tensor& normals = fake.get("normal");

        rep.normal = angular_errors(normals, normals_from_depth(depth_raw));

        // reference depth re-integrated from the generated normals, anchored
        // to each predicted map's mean (the offset is unrecoverable)
        Tensor ref = depth_from_normals(normals);
        int64_t HW = cfg.resolution * cfg.resolution;
        double total = 0.0;
        for (int64_t b = 0; b < n; ++b) {
            const double* pd = depth_raw.data() + b * HW;
            double mean = 0.0;
            for (int64_t i = 0; i < HW; ++i) mean += pd[i];
            mean /= static_cast<double>(HW);
            Tensor pred_i = Tensor::zeros({1, cfg.resolution, cfg.resolution});
            Tensor ref_i = Tensor::zeros({1, cfg.resolution, cfg.resolution});
            for (int64_t i = 0; i < HW; ++i) {
                pred_i.data()[i] = pd[i];
                ref_i.data()[i] = std::max(ref.data()[b * HW + i] + mean, 1e-3);
            }
            total += sie(pred_i, ref_i);
        }
        rep.sie = total / static_cast<double>(n);
    }
    return rep;
}

namespace {

std::string csv_columns(const TrainConfig& cfg) {
    std::ostringstream os;
    os << "step,images_seen,d_loss,g_loss,r1,p,blur_sigma,overfit_estimate";
    for (const auto& m : cfg.modalities) os << ",fid_" << m.name;
    os << ",sie,normal_mean_deg,normal_median_deg";
    return os.str();
}

void csv_write_row(std::ofstream& csv, const TrainConfig& cfg, int64_t step,
                   int64_t images, const StepStats* s, const MetricReport* rep) {
    csv << step << "," << images;
    if (s)
        csv << "," << s->d_loss << "," << s->g_loss << "," << s->r1 << "," << s->p
            << "," << s->blur << "," << s->real_sign;
    else
        csv << ",,,,,,";
    if (rep) {
        for (const auto& m : cfg.modalities) {
            auto it = rep->fid.find(m.name);
            csv << ",";
            if (it != rep->fid.end()) csv << it->second;
        }
        csv << "," << rep->sie << "," << rep->normal.mean_deg << ","
            << rep->normal.median_deg;
    } else {
        for (size_t i = 0; i < cfg.modalities.size() + 3; ++i) csv << ",";
    }
    csv << "\n";
    csv.flush();
}

// Shared body of train() and finetune(): the loops differ only in how a
// batch is drawn and stepped.
TrainResult run_loop(TrainState& st, const Dataset& metric_data,
                     const std::string& out_dir, bool finetuning,
                     const std::function<StepStats()>& do_step) {
    const TrainConfig& cfg = st.cfg;
    TrainResult res;

    std::ofstream csv;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        csv.open(out_dir + "/metrics.csv");
        if (!csv) throw std::runtime_error("train: cannot write " + out_dir + "/metrics.csv");
        csv << csv_columns(cfg) << "\n";
    }

    auto emit_metrics = [&](const StepStats* s) {
        MetricReport rep = evaluate(st, metric_data);
        res.history.push_back(rep);
        if (csv.is_open()) csv_write_row(csv, cfg, st.step, st.images_seen, s, &rep);
        return rep;
    };
    emit_metrics(nullptr);

    int64_t next_metric = st.images_seen + cfg.metric_interval_images;
    bool ada_stops = cfg.augmentation_mode == AugmentationMode::ADAPTIVE &&
                     (!finetuning || cfg.finetune_ada);
    while (true) {
        if (cfg.max_steps > 0 && st.step >= cfg.max_steps) {
            res.stop_reason = "max_steps";
            break;
        }
        if (cfg.max_images > 0 && st.images_seen >= cfg.max_images) {
            res.stop_reason = "max_images";
            break;
        }
        if (ada_stops && should_stop(st.ada)) {
            res.stop_reason = "ada_threshold";
            break;
        }

        StepStats s = do_step();
        res.losses.push_back(s);
        ++res.steps;

        bool metric_now = cfg.metric_interval_images > 0 && st.images_seen >= next_metric;
        if (metric_now) {
            emit_metrics(&s);
            while (next_metric <= st.images_seen) next_metric += cfg.metric_interval_images;
        } else if (csv.is_open()) {
            csv_write_row(csv, cfg, st.step, st.images_seen, &s, nullptr);
        }

        if (!out_dir.empty() && cfg.checkpoint_interval_steps > 0 &&
            st.step % cfg.checkpoint_interval_steps == 0) {
            save_state(st, out_dir + "/checkpoint_" + std::to_string(st.step) + ".ckpt");
            ModalityTuple grid = generate_eval_samples(st, std::min<int64_t>(16, cfg.batch_size * 2));
            write_sample_grids(grid, grid.batch(),
                               out_dir + "/samples_" + std::to_string(st.step));
        }
    }

    emit_metrics(nullptr);
    if (!out_dir.empty()) save_state(st, out_dir + "/checkpoint_final.ckpt");
    return res;
}

} // namespace

TrainResult train(TrainState& st, const Dataset& data, const std::string& out_dir) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (data.global_dmax > data.global_dmin) {
        st.data_dmin = data.global_dmin;
        st.data_dmax = data.global_dmax;
    }
    return run_loop(st, data, out_dir, false, [&]() {
        auto idx = sample_indices(data.size(), st.cfg.batch_size, st.rng);
        ModalityTuple batch =
            assemble_batch(data, idx, st.cfg.modalities, st.cfg.per_image_depth_norm);
        return train_step(st, batch);
    });
}

TrainResult finetune(TrainState& st, const DomainSplit& split, const Dataset& eval_data,
                     const std::string& out_dir) {
    if (eval_data.size() == 0) throw std::invalid_argument("finetune: empty evaluation set");
    st.g_opt.reset();
    st.d_opt.reset();
    if (split.target_paired.global_dmax > split.target_paired.global_dmin) {
        st.data_dmin = split.target_paired.global_dmin;
        st.data_dmax = split.target_paired.global_dmax;
    }
    return run_loop(st, eval_data, out_dir, true, [&]() {
        FinetuneBatch fb =
            sample_finetune_batch(split.target_paired, split.target_unpaired, st.cfg, st.rng);
        return finetune_step(st, fb.tuple, fb.paired);
    });
}

std::string synthesize_dataset(TrainState& st, int64_t count, const std::string& dir) {
    const TrainConfig& cfg = st.cfg;
    if (count < 1) throw std::invalid_argument("synthesize_dataset: count must be positive");
    double dmin = st.data_dmin, dmax = st.data_dmax;
    if (!(dmax > dmin)) { dmin = 1.0; dmax = 2.0; }

    Dataset out;
    Rng srng(cfg.seed ^ 0xda3e39cb94b95bdbull);
    NoGradGuard ng;
    int64_t done = 0;
    while (done < count) {
        int64_t b = std::min<int64_t>(cfg.batch_size, count - done);
        Tensor z = st.gen->sample_latents(b, srng);
        ModalityTuple fake = st.gen->generate(z, false);
        int64_t HW = cfg.resolution * cfg.resolution;
        for (int64_t i = 0; i < b; ++i) {
            SceneSample ss;
            ss.scene_class = "synthetic";
            ss.paired = true;
            if (fake.has("rgb")) {
                ss.rgb = Tensor::zeros({3, cfg.resolution, cfg.resolution});
                const double* src = fake.get("rgb").data() + i * 3 * HW;
                for (int64_t k = 0; k < 3 * HW; ++k)
                    ss.rgb.data()[k] = std::clamp(src[k], -1.0, 1.0);
            }
            if (fake.has("depth")) {
                Tensor norm = Tensor::zeros({1, cfg.resolution, cfg.resolution});
                const double* src = fake.get("depth").data() + i * HW;
                for (int64_t k = 0; k < HW; ++k)
                    norm.data()[k] = std::clamp(src[k], -1.0, 1.0);
                ss.depth_raw = denormalize_depth(norm, dmin, dmax);
            }
            if (fake.has("normal")) {
                ss.normal = Tensor::zeros({3, cfg.resolution, cfg.resolution});
                const double* src = fake.get("normal").data() + i * 3 * HW;
                for (int64_t k = 0; k < HW; ++k) {
                    double nx = src[k], ny = src[HW + k], nz = src[2 * HW + k];
                    double len = std::sqrt(nx * nx + ny * ny + nz * nz);
                    if (len < 1e-9) { nx = 0; ny = 0; nz = 1; len = 1; }
                    ss.normal.data()[k] = nx / len;
                    ss.normal.data()[HW + k] = ny / len;
                    ss.normal.data()[2 * HW + k] = nz / len;
                }
            }
            out.samples.push_back(std::move(ss));
        }
        done += b;
    }
    out.recompute_depth_range();
    export_dataset(out, dir);
    return dir + "/manifest.json";
}

std::vector<ModalityTuple> interpolation_frames(TrainState& st, int num_codes, int fps) {
    const TrainConfig& cfg = st.cfg;
    if (num_codes < 2)
        throw std::invalid_argument("interpolation_frames: need at least 2 codes");
    if (fps < 1) throw std::invalid_argument("interpolation_frames: fps must be positive");

    Rng irng(cfg.seed ^ 0x6a09e667f3bcc909ull);
    NoGradGuard ng;
    Tensor z = st.gen->sample_latents(num_codes, irng);
    Tensor w = st.gen->map_latent(z);
    int64_t wd = w.dim(1);

    auto row = [&](int i) {
        Tensor r = Tensor::zeros({1, wd});
        std::memcpy(r.data(), w.data() + i * wd, static_cast<size_t>(wd) * sizeof(double));
        return r;
    };

    std::vector<ModalityTuple> frames;
    frames.reserve(static_cast<size_t>((num_codes - 1) * fps));
    for (int seg = 0; seg + 1 < num_codes; ++seg) {
        Tensor wa = row(seg), wb = row(seg + 1);
        for (int j = 0; j < fps; ++j) {
            double t = static_cast<double>(j) / static_cast<double>(fps);
            frames.push_back(st.gen->synthesize(interpolate_w(wa, wb, t), false));
        }
    }
    return frames;
}

void save_state(const TrainState& st, const std::string& path) {
    auto& self = const_cast<TrainState&>(st);
    Checkpoint ck;
    ck.meta["format"] = "mmgan.train_state";
    nlohmann::json cfg_json;
    for (const auto& [k, v] : config_to_map(st.cfg)) cfg_json[k] = v;
    ck.meta["config"] = cfg_json;
    ck.meta["step"] = st.step;
    ck.meta["images_seen"] = st.images_seen;
    ck.meta["rng"] = st.rng.serialize();
    ck.meta["ada"] = {{"p", st.ada.p},
                      {"target", st.ada.target},
                      {"adjust_step", st.ada.adjust_step},
                      {"overfit_estimate", st.ada.overfit_estimate},
                      {"estimate_decay", st.ada.estimate_decay},
                      {"stop_threshold", st.ada.stop_threshold}};
    ck.meta["g_opt_t"] = st.g_opt.t;
    ck.meta["d_opt_t"] = st.d_opt.t;
    ck.meta["g_lr"] = st.g_opt.lr;
    ck.meta["d_lr"] = st.d_opt.lr;
    ck.meta["data_dmin"] = st.data_dmin;
    ck.meta["data_dmax"] = st.data_dmax;

    self.gen->visit_params([&](const std::string& n, Tensor& t) { ck.add("g." + n, t); });
    self.gen->visit_buffers([&](const std::string& n, Tensor& t) { ck.add("gbuf." + n, t); });
    self.disc->visit_params([&](const std::string& n, Tensor& t) { ck.add("d." + n, t); });
    for (const auto& [n, t] : st.g_opt.m) ck.add("opt.g.m." + n, t);
    for (const auto& [n, t] : st.g_opt.v) ck.add("opt.g.v." + n, t);
    for (const auto& [n, t] : st.d_opt.m) ck.add("opt.d.m." + n, t);
    for (const auto& [n, t] : st.d_opt.v) ck.add("opt.d.v." + n, t);
    ck.save(path);
}

TrainState load_state(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    if (ck.meta.value("format", "") != "mmgan.train_state")
        throw CheckpointError("load_state: '" + path + "' is not a training checkpoint");

    ConfigMap cm;
    for (const auto& [k, v] : ck.meta.at("config").items()) cm[k] = v.get<std::string>();
    TrainState st(config_from_map(cm));

    auto restore = [&](const std::string& prefix, const std::string& n, Tensor& t) {
        const Tensor& src = ck.require(prefix + n);
        if (src.shape() != t.shape())
            throw CheckpointError("load_state: shape mismatch for '" + prefix + n + "'");
        std::memcpy(t.data(), src.data(), static_cast<size_t>(t.numel()) * sizeof(double));
    };
    st.gen->visit_params([&](const std::string& n, Tensor& t) { restore("g.", n, t); });
    st.gen->visit_buffers([&](const std::string& n, Tensor& t) { restore("gbuf.", n, t); });
    st.disc->visit_params([&](const std::string& n, Tensor& t) { restore("d.", n, t); });

    for (const auto& [name, t] : ck.arrays) {
        auto take = [&](const std::string& prefix, std::map<std::string, Tensor>& dst) {
            if (name.rfind(prefix, 0) == 0) dst[name.substr(prefix.size())] = t.clone();
        };
        take("opt.g.m.", st.g_opt.m);
        take("opt.g.v.", st.g_opt.v);
        take("opt.d.m.", st.d_opt.m);
        take("opt.d.v.", st.d_opt.v);
    }
    st.g_opt.t = ck.meta.value("g_opt_t", 0);
    st.d_opt.t = ck.meta.value("d_opt_t", 0);
    st.g_opt.lr = ck.meta.value("g_lr", st.cfg.g_lr);
    st.d_opt.lr = ck.meta.value("d_lr", st.cfg.d_lr);

    st.step = ck.meta.value("step", 0);
    st.images_seen = ck.meta.value("images_seen", 0);
    st.rng = Rng::deserialize(ck.meta.at("rng").get<std::string>());
    const auto& ada = ck.meta.at("ada");
    st.ada.p = ada.at("p");
    st.ada.target = ada.at("target");
    st.ada.adjust_step = ada.at("adjust_step");
    st.ada.overfit_estimate = ada.at("overfit_estimate");
    st.ada.estimate_decay = ada.at("estimate_decay");
    st.ada.stop_threshold = ada.at("stop_threshold");
    st.data_dmin = ck.meta.value("data_dmin", 0.0);
    st.data_dmax = ck.meta.value("data_dmax", 1.0);
    return st;
}

void write_sample_grids(const ModalityTuple& tuple, int64_t count,
                        const std::string& prefix) {
    int64_t B = std::min<int64_t>(count, tuple.batch());
    if (B < 1) throw std::invalid_argument("write_sample_grids: empty tuple");
    int64_t cols = static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(B))));
    int64_t rows = (B + cols - 1) / cols;

    for (size_t m = 0; m < tuple.names.size(); ++m) {
        const Tensor& img = tuple.images[m];
        int64_t C = img.dim(1), H = img.dim(2), W = img.dim(3);
        std::vector<uint8_t> canvas(static_cast<size_t>(rows * H * cols * W * 3), 0);
        for (int64_t b = 0; b < B; ++b) {
            int64_t gy = (b / cols) * H, gx = (b % cols) * W;
            const double* src = img.data() + b * C * H * W;
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x)
                    for (int64_t c = 0; c < 3; ++c) {
                        double v = src[std::min(c, C - 1) * H * W + y * W + x];
                        v = std::clamp((v + 1.0) * 127.5, 0.0, 255.0);
                        canvas[static_cast<size_t>(
                            (((gy + y) * cols * W) + gx + x) * 3 + c)] =
                            static_cast<uint8_t>(std::lround(v));
                    }
        }
        write_png_rgb8(prefix + "_" + tuple.names[m] + ".png", cols * W, rows * H, canvas);
    }
}

} // namespace mmgan
