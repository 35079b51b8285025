#pragma once

#include "core/rng.hpp"
#include "core/types.hpp"
#include "data/procedural.hpp"

#include <string>
#include <vector>

namespace mmgan {

struct Dataset {
    std::vector<SceneSample> samples;
    // range over all depth maps, for dataset-level normalization
    double global_dmin = 0.0;
    double global_dmax = 0.0;

    size_t size() const { return samples.size(); }
    void recompute_depth_range();
};

// count samples, classes assigned round-robin (exact class balance), scene
// seeds derived from (seed, index).
Dataset make_procedural_dataset(int64_t count, int64_t resolution,
                                const std::vector<std::string>& classes,
                                uint64_t seed);

struct DomainSplit {
    Dataset source;             // every class except the holdout
    Dataset target_paired;      // holdout samples with all modalities
    Dataset target_unpaired;    // holdout samples reduced to RGB only
};

// Holds out one class as the target domain; ceil(p% * N) of its samples stay
// paired, the rest keep RGB only.
DomainSplit split_domains(const Dataset& dataset, const std::string& holdout_class,
                          double paired_percent);

// Stacks the requested samples into a ModalityTuple, normalizing depth
// (per image, or against the dataset range when per_image_depth_norm=false)
// and encoding normals as-is. Requested modalities must be a subset of
// rgb/depth/normal.
ModalityTuple assemble_batch(const Dataset& dataset, const std::vector<size_t>& indices,
                             const std::vector<ModalitySpec>& modalities,
                             bool per_image_depth_norm = true);

// Uniformly random batch of indices.
std::vector<size_t> sample_indices(size_t dataset_size, int64_t batch, Rng& rng);

// JSON manifest loader: one record per sample with id, class, rgb path and
// optional depth (16-bit png + dmin/dmax sidecar) and normal paths. Images
// are resized to `resolution`.
Dataset load_external(const std::string& manifest_path, int64_t resolution);

// Writes PNGs plus a manifest.json into dir (rgb/normal 8-bit, depth 16-bit
// with a json sidecar recording the raw range).
void export_dataset(const Dataset& dataset, const std::string& dir);

} // namespace mmgan
