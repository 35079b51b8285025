// Command-line front end. Links only the shared C API.
#include <mmgan/mmgan.h>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

namespace {

struct Common {
    std::string config;
    std::string checkpoint;
    std::string out;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool with_config = true) {
    if (with_config)
        cmd->add_option("--config", c.config, "config file (key = value lines)");
    cmd->add_option("--checkpoint", c.checkpoint, "training checkpoint to load");
    const char* env_out = std::getenv("MMGAN_OUT");
    if (env_out) c.out = env_out;
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--set", c.overrides, "config override key=value (repeatable)");
    cmd->allow_extras();    // bare --dotted.key value pairs become overrides
}

// Leftover args of the form "--key value" or "--key=value" are config
// overrides; anything else is a usage error.
int absorb_extras(CLI::App* cmd, Common& c) {
    std::vector<std::string> extras = cmd->remaining();
    for (size_t i = 0; i < extras.size(); ++i) {
        std::string tok = extras[i];
        if (tok.rfind("--", 0) != 0) {
            std::fprintf(stderr, "error: unexpected argument '%s'\n", tok.c_str());
            return MMGAN_ERR_CONFIG;
        }
        tok = tok.substr(2);
        if (tok.find('=') != std::string::npos) {
            c.overrides.push_back(tok);
        } else if (i + 1 < extras.size()) {
            c.overrides.push_back(tok + "=" + extras[++i]);
        } else {
            std::fprintf(stderr, "error: option '--%s' needs a value\n", tok.c_str());
            return MMGAN_ERR_CONFIG;
        }
    }
    return MMGAN_OK;
}

using SessionPtr = std::unique_ptr<mmgan_session, decltype(&mmgan_session_destroy)>;

int open_session(const Common& c, bool need_checkpoint, SessionPtr& out) {
    std::vector<const char*> ovs;
    for (const auto& o : c.overrides) ovs.push_back(o.c_str());
    mmgan_session* raw = nullptr;
    mmgan_status st;
    if (!c.checkpoint.empty()) {
        st = mmgan_session_from_checkpoint(c.checkpoint.c_str(), ovs.data(), ovs.size(),
                                           &raw);
    } else if (need_checkpoint) {
        std::fprintf(stderr, "error: this command requires --checkpoint\n");
        return MMGAN_ERR_CONFIG;
    } else {
        st = mmgan_session_create(c.config.empty() ? nullptr : c.config.c_str(),
                                  ovs.data(), ovs.size(), &raw);
    }
    if (st != MMGAN_OK) {
        std::fprintf(stderr, "error: %s\n", mmgan_last_error(nullptr));
        return st;
    }
    out = SessionPtr(raw, &mmgan_session_destroy);
    return MMGAN_OK;
}

int finish(mmgan_session* s, mmgan_status st) {
    if (st != MMGAN_OK) std::fprintf(stderr, "error: %s\n", mmgan_last_error(s));
    return st;
}

int require_out(const Common& c) {
    if (c.out.empty()) {
        std::fprintf(stderr, "error: --out (or MMGAN_OUT) is required\n");
        return MMGAN_ERR_CONFIG;
    }
    return MMGAN_OK;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal RGB/depth/normal GAN toolkit"};
    app.require_subcommand(1);

    Common train_c, finetune_c, sample_c, interp_c, eval_c, mkdata_c, export_c;
    std::string plot_csv, plot_out;
    int64_t sample_count = 16, export_count = 256;
    int codes = 11, fps = 60;

    auto* train_cmd = app.add_subcommand("train", "adversarial training");
    add_common(train_cmd, train_c);
    auto* finetune_cmd = app.add_subcommand("finetune", "cross-domain fine-tuning");
    add_common(finetune_cmd, finetune_c);
    auto* sample_cmd = app.add_subcommand("sample", "PNG grids of generated tuples");
    add_common(sample_cmd, sample_c);
    sample_cmd->add_option("--count", sample_count, "tuples per grid");
    auto* interp_cmd = app.add_subcommand("interpolate", "latent-path frame sequence");
    add_common(interp_cmd, interp_c);
    interp_cmd->add_option("--codes", codes, "latent codes along the path");
    interp_cmd->add_option("--fps", fps, "frames per code-to-code segment");
    auto* eval_cmd = app.add_subcommand("evaluate", "metric report for a generator");
    add_common(eval_cmd, eval_c);
    auto* mkdata_cmd = app.add_subcommand("make-dataset", "export a procedural dataset");
    add_common(mkdata_cmd, mkdata_c);
    auto* export_cmd = app.add_subcommand("export-rgbd", "synthesize an RGBD dataset");
    add_common(export_cmd, export_c);
    export_cmd->add_option("--count", export_count, "tuples to synthesize");
    auto* plot_cmd = app.add_subcommand("plot", "charts from a metrics csv");
    plot_cmd->add_option("--csv", plot_csv, "metrics.csv path")->required();
    const char* env_out = std::getenv("MMGAN_OUT");
    if (env_out) plot_out = env_out;
    plot_cmd->add_option("--out", plot_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : MMGAN_ERR_CONFIG;
    }

    auto run = [&](CLI::App* cmd, Common& c, bool need_ckpt,
                   auto&& body) -> int {
        if (int rc = absorb_extras(cmd, c)) return rc;
        SessionPtr s(nullptr, &mmgan_session_destroy);
        if (int rc = open_session(c, need_ckpt, s)) return rc;
        return body(s.get());
    };

    if (train_cmd->parsed())
        return run(train_cmd, train_c, false, [&](mmgan_session* s) {
            if (int rc = require_out(train_c)) return rc;
            int rc = finish(s, mmgan_train(s, train_c.out.c_str()));
            if (rc == MMGAN_OK) std::printf("stopped: %s\n", mmgan_stop_reason(s));
            return rc;
        });
    if (finetune_cmd->parsed())
        return run(finetune_cmd, finetune_c, false, [&](mmgan_session* s) {
            if (int rc = require_out(finetune_c)) return rc;
            int rc = finish(s, mmgan_finetune(s, finetune_c.out.c_str()));
            if (rc == MMGAN_OK) std::printf("stopped: %s\n", mmgan_stop_reason(s));
            return rc;
        });
    if (sample_cmd->parsed())
        return run(sample_cmd, sample_c, false, [&](mmgan_session* s) {
            if (int rc = require_out(sample_c)) return rc;
            return finish(s, mmgan_sample(s, sample_count, sample_c.out.c_str()));
        });
    if (interp_cmd->parsed())
        return run(interp_cmd, interp_c, false, [&](mmgan_session* s) {
            if (int rc = require_out(interp_c)) return rc;
            return finish(s, mmgan_interpolate(s, codes, fps, interp_c.out.c_str()));
        });
    if (eval_cmd->parsed())
        return run(eval_cmd, eval_c, false, [&](mmgan_session* s) {
            char* table = nullptr;
            int rc = finish(s, mmgan_evaluate(
                s, eval_c.out.empty() ? nullptr : eval_c.out.c_str(), &table));
            if (rc == MMGAN_OK && table) std::printf("%s", table);
            mmgan_string_free(table);
            return rc;
        });
    if (mkdata_cmd->parsed())
        return run(mkdata_cmd, mkdata_c, false, [&](mmgan_session* s) {
            if (int rc = require_out(mkdata_c)) return rc;
            return finish(s, mmgan_make_dataset(s, mkdata_c.out.c_str()));
        });
    if (export_cmd->parsed())
        return run(export_cmd, export_c, false, [&](mmgan_session* s) {
            if (int rc = require_out(export_c)) return rc;
            return finish(s, mmgan_export_rgbd(s, export_count, export_c.out.c_str()));
        });
    if (plot_cmd->parsed()) {
        if (plot_out.empty()) {
            std::fprintf(stderr, "error: --out (or MMGAN_OUT) is required\n");
            return MMGAN_ERR_CONFIG;
        }
        mmgan_status st = mmgan_plot(plot_csv.c_str(), plot_out.c_str());
        if (st != MMGAN_OK) std::fprintf(stderr, "error: %s\n", mmgan_last_error(nullptr));
        return st;
    }
    return MMGAN_ERR_CONFIG;
}
