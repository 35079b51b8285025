#pragma once

#include "core/tensor.hpp"
#include "metrics/extractor.hpp"

#include <map>
#include <string>

namespace mmgan {

struct FeatureStats {
    Tensor mean;    // [F]
    Tensor cov;     // [F, F], sample covariance (n-1 denominator)
    int64_t count = 0;
};

// Statistics of extractor features over an image batch (>= 2 images).
FeatureStats feature_stats(const Tensor& images, FeatureExtractor& extractor);
// Same, over precomputed feature rows [N, F].
FeatureStats feature_stats_from_features(const Tensor& features);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^1/2), the matrix square root
// evaluated through the symmetric product Sa^1/2 Sb Sa^1/2 with negative
// eigenvalues clamped to zero. If clamped_magnitude is given it receives the
// total clamped eigenvalue mass.
double frechet_distance(const FeatureStats& a, const FeatureStats& b,
                        double* clamped_magnitude = nullptr);

double fid(const Tensor& real_images, const Tensor& gen_images,
           FeatureExtractor& extractor);

// Scale-invariant log-depth error over the masked pixels (variance of
// log(pred) - log(ref)). mask is optional; entries > 0.5 are valid. Depths
// inside the mask must be strictly positive.
double sie(const Tensor& pred_depth, const Tensor& ref_depth,
           const Tensor& mask = Tensor());

struct AngularStats {
    double mean_deg = 0.0;
    double median_deg = 0.0;
    std::map<double, double> pct_within;    // gamma -> percentage
    int64_t degenerate = 0;                 // excluded pixels
    int64_t evaluated = 0;
};

// Per-pixel angle between predicted and reference normals over the mask, in
// degrees; thresholds 11.25 / 22.5 / 30. Pixels whose vectors are too short
// to normalize are excluded; more than 50% degenerate is an error.
AngularStats angular_errors(const Tensor& pred_normals, const Tensor& ref_normals,
                            const Tensor& mask = Tensor());

struct MetricReport {
    int64_t step = 0;
    int64_t images_seen = 0;
    std::map<std::string, double> fid;      // per modality
    double sie = 0.0;
    AngularStats normal;

    std::string csv_header() const;
    std::string csv_row() const;
    std::string table() const;
};

} // namespace mmgan
