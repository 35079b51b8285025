#include "core/types.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mmgan {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

int64_t to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return i;
    } catch (...) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

struct Reader {
    const ConfigMap& map;
    mutable std::vector<std::string> unknown;

    bool has(const std::string& k) const { return map.count(k) > 0; }
    std::string str(const std::string& k, const std::string& def) const {
        auto it = map.find(k);
        return it == map.end() ? def : it->second;
    }
    double num(const std::string& k, double def) const {
        auto it = map.find(k);
        return it == map.end() ? def : to_double(k, it->second);
    }
    int64_t integer(const std::string& k, int64_t def) const {
        auto it = map.find(k);
        return it == map.end() ? def : to_int(k, it->second);
    }
    bool flag(const std::string& k, bool def) const {
        auto it = map.find(k);
        return it == map.end() ? def : to_bool(k, it->second);
    }
};

ModalitySpec standard_modality(const std::string& name) {
    if (name == "rgb") return {"rgb", 3, true};
    if (name == "depth") return {"depth", 1, false};
    if (name == "normal") return {"normal", 3, false};
    throw ConfigError("config: modality '" + name +
                      "' is not a standard name; use name:channels[:color]");
}

} // namespace

ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    ConfigMap map;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: " + path + ":" + std::to_string(lineno) + ": empty key");
        map[key] = value;
    }
    return map;
}

void apply_overrides(ConfigMap& map, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + ov + "': expected key=value");
        std::string key = trim(ov.substr(0, eq));
        // CLI flags use hyphens; config keys use underscores
        std::replace(key.begin(), key.end(), '-', '_');
        map[key] = trim(ov.substr(eq + 1));
    }
}

TrainConfig config_from_map(const ConfigMap& map) {
    Reader r{map, {}};
    TrainConfig cfg;

    std::string mods = r.str("modalities", "rgb,depth,normal");
    cfg.modalities.clear();
    for (const auto& entry : split(mods, ',')) {
        if (entry.empty()) continue;
        auto parts = split(entry, ':');
        if (parts.size() == 1) {
            cfg.modalities.push_back(standard_modality(parts[0]));
        } else {
            ModalitySpec m;
            m.name = parts[0];
            m.channels = to_int("modalities", parts[1]);
            m.color_augmentable = parts.size() > 2 && parts[2] == "color";
            cfg.modalities.push_back(m);
        }
    }

    cfg.resolution = r.integer("resolution", cfg.resolution);
    cfg.latent_dim = r.integer("latent_dim", cfg.latent_dim);
    cfg.w_dim = r.integer("w_dim", cfg.w_dim);
    cfg.trunk_layers = static_cast<int>(r.integer("trunk_layers", cfg.trunk_layers));
    cfg.branch_layers = static_cast<int>(r.integer("branch_layers", cfg.branch_layers));
    cfg.branch_index = static_cast<int>(r.integer("branch_index", cfg.branch_index));
    cfg.channel_max = r.integer("channel_max", cfg.channel_max);
    cfg.channel_base = r.integer("channel_base", cfg.channel_base);
    cfg.disc_channel_max = r.integer("disc_channel_max", cfg.disc_channel_max);
    cfg.disc_channel_base = r.integer("disc_channel_base", cfg.disc_channel_base);

    std::string dm = r.str("discriminator_mode", "cd_plus_fd");
    if (dm == "fd_only" || dm == "fd") cfg.discriminator_mode = DiscriminatorMode::FD_ONLY;
    else if (dm == "cd_only" || dm == "cd") cfg.discriminator_mode = DiscriminatorMode::CD_ONLY;
    else if (dm == "cd_plus_fd" || dm == "cd+fd") cfg.discriminator_mode = DiscriminatorMode::CD_PLUS_FD;
    else throw ConfigError("config: discriminator_mode must be fd_only|cd_only|cd_plus_fd");

    std::string am = r.str("augmentation_mode", "adaptive");
    if (am == "none") cfg.augmentation_mode = AugmentationMode::NONE;
    else if (am == "fixed_p") cfg.augmentation_mode = AugmentationMode::FIXED_P;
    else if (am == "adaptive") cfg.augmentation_mode = AugmentationMode::ADAPTIVE;
    else throw ConfigError("config: augmentation_mode must be none|fixed_p|adaptive");

    cfg.fixed_p = r.num("fixed_p", cfg.fixed_p);
    cfg.ada_target = r.num("ada_target", cfg.ada_target);
    cfg.ada_step = r.num("ada_step", cfg.ada_step);
    cfg.ada_interval = static_cast<int>(r.integer("ada_interval", cfg.ada_interval));
    cfg.ada_traverse_images = r.integer("ada_traverse_images", cfg.ada_traverse_images);
    cfg.ada_stop_threshold = r.num("ada_stop_threshold", cfg.ada_stop_threshold);

    cfg.r1_gamma = r.num("r1_gamma", cfg.r1_gamma);
    cfg.r1_interval = static_cast<int>(r.integer("r1_interval", cfg.r1_interval));
    cfg.blur_sigma_init = r.num("blur_sigma_init", cfg.blur_sigma_init);
    cfg.blur_ramp_images = r.integer("blur_ramp_images", cfg.blur_ramp_images);

    cfg.beta1 = r.num("beta1", cfg.beta1);
    cfg.beta2 = r.num("beta2", cfg.beta2);
    cfg.adam_eps = r.num("adam_eps", cfg.adam_eps);
    cfg.g_lr = r.num("g_lr", cfg.g_lr);
    cfg.d_lr = r.num("d_lr", cfg.d_lr);
    cfg.batch_size = r.integer("batch_size", cfg.batch_size);
    cfg.seed = static_cast<uint64_t>(r.integer("seed", static_cast<int64_t>(cfg.seed)));

    cfg.max_steps = r.integer("trainer.max_steps", cfg.max_steps);
    cfg.max_images = r.integer("trainer.max_images", cfg.max_images);
    cfg.checkpoint_interval_steps = r.integer("trainer.checkpoint_interval_steps",
                                              cfg.checkpoint_interval_steps);
    cfg.metric_interval_images = r.integer("trainer.metric_interval_images",
                                           cfg.metric_interval_images);
    cfg.metric_samples = r.integer("trainer.metric_samples", cfg.metric_samples);

    cfg.ema_generator = r.flag("ema_generator", cfg.ema_generator);
    cfg.equalized_lr = r.flag("equalized_lr", cfg.equalized_lr);
    cfg.minibatch_stddev = r.flag("minibatch_stddev", cfg.minibatch_stddev);
    cfg.strict_determinism = r.flag("strict_determinism", cfg.strict_determinism);
    cfg.lowpass_free_upsampling = r.flag("lowpass_free_upsampling", cfg.lowpass_free_upsampling);

    cfg.data_source = r.str("data.source", cfg.data_source);
    cfg.data_num_samples = r.integer("data.num_samples", cfg.data_num_samples);
    if (r.has("data.classes")) cfg.data_classes = split(r.str("data.classes", ""), ',');
    cfg.per_image_depth_norm = r.flag("data.per_image_depth_norm", cfg.per_image_depth_norm);

    cfg.finetune_holdout_class = r.str("finetune.holdout_class", cfg.finetune_holdout_class);
    cfg.finetune_paired_percent = r.num("finetune.paired_percent", cfg.finetune_paired_percent);
    cfg.finetune_ada = r.flag("finetune.ada", cfg.finetune_ada);

    cfg.validate();
    return cfg;
}

void TrainConfig::validate() const {
    if (modalities.empty()) throw ConfigError("config: at least one modality required");
    for (size_t i = 0; i < modalities.size(); ++i) {
        const auto& m = modalities[i];
        if (m.channels < 1)
            throw ConfigError("config: modality '" + m.name + "' must have channels >= 1");
        for (size_t j = i + 1; j < modalities.size(); ++j)
            if (modalities[j].name == m.name)
                throw ConfigError("config: duplicate modality name '" + m.name + "'");
        if (m.name == "rgb" && m.channels != 3)
            throw ConfigError("config: modality 'rgb' must have 3 channels");
        if (m.name == "depth" && m.channels != 1)
            throw ConfigError("config: modality 'depth' must have 1 channel");
        if (m.name == "normal" && m.channels != 3)
            throw ConfigError("config: modality 'normal' must have 3 channels");
    }
    if (resolution < 8 || (resolution & (resolution - 1)) != 0)
        throw ConfigError("config: resolution must be a power of two >= 8");
    if (latent_dim < 1 || w_dim < 1)
        throw ConfigError("config: latent_dim and w_dim must be positive");
    if (trunk_layers < 0 || branch_layers < 1)
        throw ConfigError("config: need trunk_layers >= 0 and branch_layers >= 1");
    if (branch_index < 1 || branch_index > total_layers())
        throw ConfigError("config: branch_index " + std::to_string(branch_index) +
                          " outside layer range [1, " + std::to_string(total_layers()) + "]");
    if (ada_stop_threshold <= 0.0 || ada_stop_threshold > 1.0)
        throw ConfigError("config: ada_stop_threshold must lie in (0, 1]");
    if (fixed_p < 0.0 || fixed_p > 1.0)
        throw ConfigError("config: fixed_p must lie in [0, 1]");
    if (g_lr <= 0.0 || d_lr <= 0.0)
        throw ConfigError("config: learning rates must be > 0");
    if (r1_gamma <= 0.0) throw ConfigError("config: r1_gamma must be > 0");
    if (r1_interval < 1) throw ConfigError("config: r1_interval must be >= 1");
    if (blur_sigma_init < 0.0) throw ConfigError("config: blur_sigma_init must be >= 0");
    if (blur_ramp_images < 1) throw ConfigError("config: blur_ramp_images must be >= 1");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (ada_interval < 1) throw ConfigError("config: ada_interval must be >= 1");
    if (ada_traverse_images < 1) throw ConfigError("config: ada_traverse_images must be >= 1");
    if (equalized_lr)
        throw ConfigError("config: equalized_lr is not supported by this build");
    if (minibatch_stddev)
        throw ConfigError("config: minibatch_stddev is not supported by this build");
    if (finetune_paired_percent <= 0.0 || finetune_paired_percent > 100.0)
        throw ConfigError("config: finetune.paired_percent must lie in (0, 100]");
}

ConfigMap config_to_map(const TrainConfig& cfg) {
    ConfigMap m;
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    std::ostringstream mods;
    for (size_t i = 0; i < cfg.modalities.size(); ++i) {
        const auto& mo = cfg.modalities[i];
        mods << (i ? "," : "") << mo.name << ":" << mo.channels
             << (mo.color_augmentable ? ":color" : "");
    }
    m["modalities"] = mods.str();
    m["resolution"] = std::to_string(cfg.resolution);
    m["latent_dim"] = std::to_string(cfg.latent_dim);
    m["w_dim"] = std::to_string(cfg.w_dim);
    m["trunk_layers"] = std::to_string(cfg.trunk_layers);
    m["branch_layers"] = std::to_string(cfg.branch_layers);
    m["branch_index"] = std::to_string(cfg.branch_index);
    m["channel_max"] = std::to_string(cfg.channel_max);
    m["channel_base"] = std::to_string(cfg.channel_base);
    m["disc_channel_max"] = std::to_string(cfg.disc_channel_max);
    m["disc_channel_base"] = std::to_string(cfg.disc_channel_base);
    m["discriminator_mode"] =
        cfg.discriminator_mode == DiscriminatorMode::FD_ONLY   ? "fd_only"
        : cfg.discriminator_mode == DiscriminatorMode::CD_ONLY ? "cd_only"
                                                               : "cd_plus_fd";
    m["augmentation_mode"] =
        cfg.augmentation_mode == AugmentationMode::NONE      ? "none"
        : cfg.augmentation_mode == AugmentationMode::FIXED_P ? "fixed_p"
                                                             : "adaptive";
    m["fixed_p"] = num(cfg.fixed_p);
    m["ada_target"] = num(cfg.ada_target);
    m["ada_step"] = num(cfg.ada_step);
    m["ada_interval"] = std::to_string(cfg.ada_interval);
    m["ada_traverse_images"] = std::to_string(cfg.ada_traverse_images);
    m["ada_stop_threshold"] = num(cfg.ada_stop_threshold);
    m["r1_gamma"] = num(cfg.r1_gamma);
    m["r1_interval"] = std::to_string(cfg.r1_interval);
    m["blur_sigma_init"] = num(cfg.blur_sigma_init);
    m["blur_ramp_images"] = std::to_string(cfg.blur_ramp_images);
    m["beta1"] = num(cfg.beta1);
    m["beta2"] = num(cfg.beta2);
    m["adam_eps"] = num(cfg.adam_eps);
    m["g_lr"] = num(cfg.g_lr);
    m["d_lr"] = num(cfg.d_lr);
    m["batch_size"] = std::to_string(cfg.batch_size);
    m["seed"] = std::to_string(cfg.seed);
    m["trainer.max_steps"] = std::to_string(cfg.max_steps);
    m["trainer.max_images"] = std::to_string(cfg.max_images);
    m["trainer.checkpoint_interval_steps"] = std::to_string(cfg.checkpoint_interval_steps);
    m["trainer.metric_interval_images"] = std::to_string(cfg.metric_interval_images);
    m["trainer.metric_samples"] = std::to_string(cfg.metric_samples);
    m["ema_generator"] = cfg.ema_generator ? "true" : "false";
    m["equalized_lr"] = cfg.equalized_lr ? "true" : "false";
    m["minibatch_stddev"] = cfg.minibatch_stddev ? "true" : "false";
    m["strict_determinism"] = cfg.strict_determinism ? "true" : "false";
    m["lowpass_free_upsampling"] = cfg.lowpass_free_upsampling ? "true" : "false";
    m["data.source"] = cfg.data_source;
    m["data.num_samples"] = std::to_string(cfg.data_num_samples);
    std::ostringstream cls;
    for (size_t i = 0; i < cfg.data_classes.size(); ++i)
        cls << (i ? "," : "") << cfg.data_classes[i];
    m["data.classes"] = cls.str();
    m["data.per_image_depth_norm"] = cfg.per_image_depth_norm ? "true" : "false";
    m["finetune.holdout_class"] = cfg.finetune_holdout_class;
    m["finetune.paired_percent"] = num(cfg.finetune_paired_percent);
    m["finetune.ada"] = cfg.finetune_ada ? "true" : "false";
    return m;
}

std::string config_canonical_dump(const TrainConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "modalities=";
    for (size_t i = 0; i < cfg.modalities.size(); ++i) {
        const auto& m = cfg.modalities[i];
        os << (i ? "," : "") << m.name << ":" << m.channels
           << (m.color_augmentable ? ":color" : "");
    }
    os << "\nresolution=" << cfg.resolution
       << "\nlatent_dim=" << cfg.latent_dim
       << "\nw_dim=" << cfg.w_dim
       << "\ntrunk_layers=" << cfg.trunk_layers
       << "\nbranch_layers=" << cfg.branch_layers
       << "\nbranch_index=" << cfg.branch_index
       << "\nchannel_max=" << cfg.channel_max
       << "\nchannel_base=" << cfg.channel_base
       << "\ndisc_channel_max=" << cfg.disc_channel_max
       << "\ndisc_channel_base=" << cfg.disc_channel_base
       << "\ndiscriminator_mode=" << static_cast<int>(cfg.discriminator_mode)
       << "\naugmentation_mode=" << static_cast<int>(cfg.augmentation_mode)
       << "\nfixed_p=" << cfg.fixed_p
       << "\nada_target=" << cfg.ada_target
       << "\nada_step=" << cfg.ada_step
       << "\nada_interval=" << cfg.ada_interval
       << "\nada_traverse_images=" << cfg.ada_traverse_images
       << "\nada_stop_threshold=" << cfg.ada_stop_threshold
       << "\nr1_gamma=" << cfg.r1_gamma
       << "\nr1_interval=" << cfg.r1_interval
       << "\nblur_sigma_init=" << cfg.blur_sigma_init
       << "\nblur_ramp_images=" << cfg.blur_ramp_images
       << "\nbeta1=" << cfg.beta1
       << "\nbeta2=" << cfg.beta2
       << "\nadam_eps=" << cfg.adam_eps
       << "\ng_lr=" << cfg.g_lr
       << "\nd_lr=" << cfg.d_lr
       << "\nbatch_size=" << cfg.batch_size
       << "\nseed=" << cfg.seed
       << "\n";
    return os.str();
}

uint64_t config_hash(const TrainConfig& cfg) {
    // FNV-1a over the canonical dump
    std::string s = config_canonical_dump(cfg);
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace mmgan
