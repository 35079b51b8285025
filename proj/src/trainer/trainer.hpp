#pragma once

#include "augment/augment.hpp"
#include "core/checkpoint.hpp"
#include "core/rng.hpp"
#include "core/types.hpp"
#include "data/dataset.hpp"
#include "discriminator/discriminator.hpp"
#include "generator/generator.hpp"
#include "metrics/metrics.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mmgan {

// Adam with per-parameter moment state, keyed by the visitor names so the
// state survives checkpointing.
class Adam {
public:
    Adam() = default;
    Adam(double lr, double beta1, double beta2, double eps)
        : lr(lr), beta1(beta1), beta2(beta2), eps(eps) {}

    // Applies one update from the accumulated gradients; missing gradients
    // count as zero. Parameters without an entry get fresh zero moments.
    void step(const std::vector<std::pair<std::string, Tensor>>& params);
    void reset();

    double lr = 0.0025;
    double beta1 = 0.0;
    double beta2 = 0.99;
    double eps = 1e-8;
    int64_t t = 0;
    std::map<std::string, Tensor> m, v;
};

struct StepStats {
    double d_loss = 0.0;
    double g_loss = 0.0;
    double r1 = 0.0;            // penalty value when applied this step, else 0
    double blur = 0.0;
    double p = 0.0;
    double real_sign = 0.0;     // controller's overfit estimate after the step
};

// Everything one training run owns: networks, optimizers, augmentation
// controller, RNG stream, and counters.
struct TrainState {
    TrainConfig cfg;
    Rng rng;
    std::unique_ptr<Generator> gen;
    std::unique_ptr<Discriminator> disc;
    Augmenter aug;
    AdaController ada;
    Adam g_opt, d_opt;
    int64_t step = 0;
    int64_t images_seen = 0;
    // raw depth range of the training data, used to undo normalization when
    // emitting samples and computing depth metrics
    double data_dmin = 0.0;
    double data_dmax = 1.0;

    // test hook: replaces the default controller update when set
    std::function<void(AdaController&, const Tensor&)> ada_update;

    explicit TrainState(const TrainConfig& config);

    double current_p(bool finetuning = false) const;
    std::vector<std::pair<std::string, Tensor>> g_params();
    std::vector<std::pair<std::string, Tensor>> d_params();
};

// One D update then one G update on a batch of complete tuples.
StepStats train_step(TrainState& st, const ModalityTuple& real);

struct FinetuneBatch {
    ModalityTuple tuple;                // missing modalities zero-filled
    std::vector<uint8_t> paired;        // per-sample flag
};

// ceil(B/2) paired + floor(B/2) unpaired samples; all paired when the
// unpaired pool is empty; empty paired pool is an error.
FinetuneBatch sample_finetune_batch(const Dataset& paired_pool,
                                    const Dataset& unpaired_pool,
                                    const TrainConfig& cfg, Rng& rng);

// train_step variant where the consistency head and the non-RGB fidelity
// heads see real-side loss from the paired samples only.
StepStats finetune_step(TrainState& st, const ModalityTuple& real,
                        const std::vector<uint8_t>& paired);

struct TrainResult {
    std::string stop_reason;            // max_steps | max_images | ada_threshold
    int64_t steps = 0;
    std::vector<StepStats> losses;      // one entry per step
    std::vector<MetricReport> history;  // metric cadence entries
};

// Distribution metrics of the current generator against a reference dataset.
MetricReport evaluate(TrainState& st, const Dataset& data);

// Full loop: batches from `data`, periodic metrics/checkpoints/sample grids
// under out_dir (no artifacts when out_dir is empty).
TrainResult train(TrainState& st, const Dataset& data, const std::string& out_dir);

// Fine-tuning loop over a domain split; resets both optimizers first.
// Metrics are computed against eval_data (complete tuples of the target
// domain) so runs with different paired fractions stay comparable.
TrainResult finetune(TrainState& st, const DomainSplit& split, const Dataset& eval_data,
                     const std::string& out_dir);

// Generates count tuples and writes them in the dataset export format.
// Returns the manifest path.
std::string synthesize_dataset(TrainState& st, int64_t count, const std::string& dir);

// (num_codes - 1) * fps tuples along piecewise-linear paths in w space.
std::vector<ModalityTuple> interpolation_frames(TrainState& st, int num_codes, int fps);

// Full-state serialization: parameters, buffers, optimizer moments,
// controller, counters, and the RNG stream.
void save_state(const TrainState& st, const std::string& path);
TrainState load_state(const std::string& path);

// First `count` samples of every modality as one PNG per modality
// (<prefix>_<modality>.png), tiled roughly square.
void write_sample_grids(const ModalityTuple& tuple, int64_t count,
                        const std::string& prefix);

} // namespace mmgan
