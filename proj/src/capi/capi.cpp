#include "mmgan/mmgan.h"

#include "core/checkpoint.hpp"
#include "core/types.hpp"
#include "data/dataset.hpp"
#include "data/image_io.hpp"
#include "plot/plot.hpp"
#include "trainer/trainer.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

using namespace mmgan;

struct mmgan_session {
    TrainConfig cfg;
    std::vector<std::string> overrides;
    std::optional<TrainState> state;
    std::string last_error;
    std::string stop_reason;

    TrainState& ensure_state() {
        if (!state) state.emplace(cfg);
        return *state;
    }
};

namespace {

std::string g_create_error;

mmgan_status set_error(mmgan_session* s, mmgan_status code, const std::string& msg) {
    if (s) s->last_error = msg;
    else g_create_error = msg;
    return code;
}

// Exceptions map onto the exit-code contract: config 2, runtime 3, io 4.
template <typename Fn>
mmgan_status guarded(mmgan_session* s, Fn&& fn) {
    try {
        fn();
        if (s) s->last_error.clear();
        return MMGAN_OK;
    } catch (const ConfigError& e) {
        return set_error(s, MMGAN_ERR_CONFIG, e.what());
    } catch (const IOError& e) {
        return set_error(s, MMGAN_ERR_IO, e.what());
    } catch (const CheckpointError& e) {
        return set_error(s, MMGAN_ERR_IO, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return set_error(s, MMGAN_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return set_error(s, MMGAN_ERR_RUNTIME, e.what());
    }
}

std::vector<std::string> collect(const char* const* overrides, size_t n) {
    std::vector<std::string> out;
    for (size_t i = 0; i < n; ++i)
        if (overrides && overrides[i]) out.emplace_back(overrides[i]);
    return out;
}

Dataset load_configured_dataset(const TrainConfig& cfg) {
    if (cfg.data_source == "procedural")
        return make_procedural_dataset(cfg.data_num_samples, cfg.resolution,
                                       cfg.data_classes, cfg.seed);
    return load_external(cfg.data_source, cfg.resolution);
}

void require_arch_match(const TrainConfig& a, const TrainConfig& b) {
    bool same = a.resolution == b.resolution && a.latent_dim == b.latent_dim &&
                a.w_dim == b.w_dim && a.trunk_layers == b.trunk_layers &&
                a.branch_layers == b.branch_layers && a.branch_index == b.branch_index &&
                a.channel_max == b.channel_max && a.channel_base == b.channel_base &&
                a.disc_channel_max == b.disc_channel_max &&
                a.disc_channel_base == b.disc_channel_base &&
                a.discriminator_mode == b.discriminator_mode &&
                a.modalities.size() == b.modalities.size();
    if (same)
        for (size_t i = 0; i < a.modalities.size(); ++i)
            same = same && a.modalities[i].name == b.modalities[i].name &&
                   a.modalities[i].channels == b.modalities[i].channels;
    if (!same)
        throw ConfigError("overrides must not change the architecture of a checkpoint");
}

} // namespace

extern "C" {

const char* mmgan_last_error(const mmgan_session* session) {
    return session ? session->last_error.c_str() : g_create_error.c_str();
}

mmgan_status mmgan_session_create(const char* config_path,
                                  const char* const* overrides, size_t n_overrides,
                                  mmgan_session** out) {
    if (!out) return set_error(nullptr, MMGAN_ERR_CONFIG, "output pointer is null");
    *out = nullptr;
    return guarded(nullptr, [&]() {
        ConfigMap map;
        if (config_path) map = parse_config_file(config_path);
        auto ovs = collect(overrides, n_overrides);
        apply_overrides(map, ovs);
        auto s = std::make_unique<mmgan_session>();
        s->cfg = config_from_map(map);
        s->overrides = std::move(ovs);
        *out = s.release();
    });
}

mmgan_status mmgan_session_from_checkpoint(const char* checkpoint_path,
                                           const char* const* overrides,
                                           size_t n_overrides, mmgan_session** out) {
    if (!out) return set_error(nullptr, MMGAN_ERR_CONFIG, "output pointer is null");
    *out = nullptr;
    if (!checkpoint_path)
        return set_error(nullptr, MMGAN_ERR_CONFIG, "checkpoint path is null");
    return guarded(nullptr, [&]() {
        auto s = std::make_unique<mmgan_session>();
        s->state.emplace(load_state(checkpoint_path));
        s->overrides = collect(overrides, n_overrides);

        ConfigMap map = config_to_map(s->state->cfg);
        apply_overrides(map, s->overrides);
        TrainConfig merged = config_from_map(map);
        require_arch_match(s->state->cfg, merged);
        s->cfg = merged;
        s->state->cfg = merged;
        *out = s.release();
    });
}

void mmgan_session_destroy(mmgan_session* session) { delete session; }

mmgan_status mmgan_train(mmgan_session* s, const char* out_dir) {
    if (!s) return MMGAN_ERR_CONFIG;
    return guarded(s, [&]() {
        Dataset data = load_configured_dataset(s->cfg);
        TrainResult res = train(s->ensure_state(), data, out_dir ? out_dir : "");
        s->stop_reason = res.stop_reason;
    });
}

mmgan_status mmgan_finetune(mmgan_session* s, const char* out_dir) {
    if (!s) return MMGAN_ERR_CONFIG;
    return guarded(s, [&]() {
        if (s->cfg.finetune_holdout_class.empty())
            throw ConfigError("finetune.holdout_class is not set");
        Dataset data = load_configured_dataset(s->cfg);
        DomainSplit split = split_domains(data, s->cfg.finetune_holdout_class,
                                          s->cfg.finetune_paired_percent);
        Dataset eval_set;
        for (const auto& sample : data.samples)
            if (sample.scene_class == s->cfg.finetune_holdout_class)
                eval_set.samples.push_back(sample);
        eval_set.recompute_depth_range();
        TrainResult res = finetune(s->ensure_state(), split, eval_set,
                                   out_dir ? out_dir : "");
        s->stop_reason = res.stop_reason;
    });
}

const char* mmgan_stop_reason(const mmgan_session* s) {
    return s ? s->stop_reason.c_str() : "";
}

mmgan_status mmgan_sample(mmgan_session* s, int64_t count, const char* out_dir) {
    if (!s) return MMGAN_ERR_CONFIG;
    return guarded(s, [&]() {
        if (count < 1) throw ConfigError("sample count must be positive");
        if (!out_dir) throw ConfigError("output directory is required");
        TrainState& st = s->ensure_state();
        std::filesystem::create_directories(out_dir);
        NoGradGuard ng;
        Rng srng(st.cfg.seed ^ 0xbb67ae8584caa73bull);
        Tensor z = st.gen->sample_latents(count, srng);
        ModalityTuple tuple = st.gen->generate(z, false);
        write_sample_grids(tuple, count, std::string(out_dir) + "/samples");
    });
}

mmgan_status mmgan_interpolate(mmgan_session* s, int num_codes, int fps,
                               const char* out_dir) {
    if (!s) return MMGAN_ERR_CONFIG;
    return guarded(s, [&]() {
        if (!out_dir) throw ConfigError("output directory is required");
        TrainState& st = s->ensure_state();
        std::filesystem::create_directories(out_dir);
        auto frames = interpolation_frames(st, num_codes, fps);
        char name[32];
        for (size_t i = 0; i < frames.size(); ++i) {
            std::snprintf(name, sizeof(name), "/frame_%05zu", i);
            write_sample_grids(frames[i], 1, std::string(out_dir) + name);
        }
    });
}

mmgan_status mmgan_evaluate(mmgan_session* s, const char* out_dir, char** table_out) {
    if (!s) return MMGAN_ERR_CONFIG;
    if (table_out) *table_out = nullptr;
    return guarded(s, [&]() {
        Dataset data = load_configured_dataset(s->cfg);
        TrainState& st = s->ensure_state();
        if (!(st.data_dmax > st.data_dmin) && data.global_dmax > data.global_dmin) {
            st.data_dmin = data.global_dmin;
            st.data_dmax = data.global_dmax;
        }
        MetricReport rep = evaluate(st, data);
        if (out_dir) {
            std::filesystem::create_directories(out_dir);
            std::ofstream csv(std::string(out_dir) + "/report.csv");
            csv << rep.csv_header() << "\n" << rep.csv_row() << "\n";
            std::ofstream txt(std::string(out_dir) + "/report.txt");
            txt << rep.table();
            if (!csv || !txt) throw IOError("cannot write report files");
        }
        if (table_out) {
            std::string table = rep.table();
            *table_out = static_cast<char*>(std::malloc(table.size() + 1));
            if (*table_out) std::memcpy(*table_out, table.c_str(), table.size() + 1);
        }
    });
}

mmgan_status mmgan_make_dataset(mmgan_session* s, const char* out_dir) {
    if (!s) return MMGAN_ERR_CONFIG;
    return guarded(s, [&]() {
        if (!out_dir) throw ConfigError("output directory is required");
        Dataset data = make_procedural_dataset(s->cfg.data_num_samples, s->cfg.resolution,
                                               s->cfg.data_classes, s->cfg.seed);
        export_dataset(data, out_dir);
    });
}

mmgan_status mmgan_export_rgbd(mmgan_session* s, int64_t count, const char* out_dir) {
    if (!s) return MMGAN_ERR_CONFIG;
    return guarded(s, [&]() {
        if (!out_dir) throw ConfigError("output directory is required");
        synthesize_dataset(s->ensure_state(), count, out_dir);
    });
}

mmgan_status mmgan_plot(const char* csv_path, const char* out_dir) {
    return guarded(nullptr, [&]() {
        if (!csv_path || !out_dir) throw ConfigError("csv path and output directory are required");
        plot_metrics(csv_path, out_dir);
    });
}

void mmgan_string_free(char* s) { std::free(s); }

} // extern "C"
