#include "metrics/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mmgan {

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kGammas[3] = {11.25, 22.5, 30.0};

using Mat = Eigen::MatrixXd;

Mat to_eigen(const Tensor& t, int64_t rows, int64_t cols) {
    Mat m(rows, cols);
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) m(r, c) = t.data()[r * cols + c];
    return m;
}

// symmetric PSD square root with negative eigenvalues clamped; adds the
// clamped mass to *clamped if non-null
Mat psd_sqrt(const Mat& a, double* clamped) {
    Mat sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) < 0.0) {
            if (clamped) *clamped += -ev(i);
            ev(i) = 0.0;
        }
    }
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

} // namespace

FeatureStats feature_stats_from_features(const Tensor& features) {
    if (features.ndim() != 2)
        throw std::invalid_argument("feature_stats: [N,F] feature rows expected");
    int64_t n = features.dim(0), f = features.dim(1);
    if (n < 2) throw std::invalid_argument("feature_stats: need at least 2 samples");

    FeatureStats st;
    st.count = n;
    st.mean = Tensor::zeros({f});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < f; ++j) st.mean.data()[j] += features.data()[i * f + j];
    for (int64_t j = 0; j < f; ++j) st.mean.data()[j] /= static_cast<double>(n);

    st.cov = Tensor::zeros({f, f});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t a = 0; a < f; ++a) {
            double da = features.data()[i * f + a] - st.mean.data()[a];
            for (int64_t b = a; b < f; ++b) {
                double db = features.data()[i * f + b] - st.mean.data()[b];
                st.cov.data()[a * f + b] += da * db;
            }
        }
    for (int64_t a = 0; a < f; ++a)
        for (int64_t b = a; b < f; ++b) {
            double v = st.cov.data()[a * f + b] / static_cast<double>(n - 1);
            st.cov.data()[a * f + b] = v;
            st.cov.data()[b * f + a] = v;
        }
    return st;
}

FeatureStats feature_stats(const Tensor& images, FeatureExtractor& extractor) {
    if (images.ndim() != 4 || images.dim(0) < 2)
        throw std::invalid_argument("feature_stats: need a batch of at least 2 images");
    return feature_stats_from_features(extractor.extract(images));
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b,
                        double* clamped_magnitude) {
    if (!a.mean.defined() || !b.mean.defined() || a.mean.numel() != b.mean.numel())
        throw std::invalid_argument("frechet_distance: feature dimension mismatch");
    int64_t f = a.mean.numel();
    double clamped = 0.0;

    double mean_term = 0.0;
    for (int64_t i = 0; i < f; ++i) {
        double d = a.mean.data()[i] - b.mean.data()[i];
        mean_term += d * d;
    }

    Mat sa = to_eigen(a.cov, f, f);
    Mat sb = to_eigen(b.cov, f, f);
    Mat ra = psd_sqrt(sa, &clamped);
    Mat inner = ra * sb * ra;
    Mat root = psd_sqrt(inner, &clamped);

    double dist = mean_term + sa.trace() + sb.trace() - 2.0 * root.trace();
    if (clamped_magnitude) *clamped_magnitude = clamped;
    return std::max(0.0, dist);
}

double fid(const Tensor& real_images, const Tensor& gen_images,
           FeatureExtractor& extractor) {
    return frechet_distance(feature_stats(real_images, extractor),
                            feature_stats(gen_images, extractor));
}

double sie(const Tensor& pred_depth, const Tensor& ref_depth, const Tensor& mask) {
    if (pred_depth.shape() != ref_depth.shape())
        throw std::invalid_argument("sie: shape mismatch");
    if (mask.defined() && mask.numel() != pred_depth.numel())
        throw std::invalid_argument("sie: mask size mismatch");

    double sum = 0.0, sum_sq = 0.0;
    int64_t n = 0;
    for (int64_t i = 0; i < pred_depth.numel(); ++i) {
        if (mask.defined() && mask.data()[i] <= 0.5) continue;
        double p = pred_depth.data()[i], r = ref_depth.data()[i];
        if (!(p > 0.0) || !(r > 0.0))
            throw std::invalid_argument("sie: non-positive depth inside mask");
        double z = std::log(p) - std::log(r);
        sum += z;
        sum_sq += z * z;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("sie: empty mask");
    double dn = static_cast<double>(n);
    return sum_sq / dn - (sum * sum) / (dn * dn);
}

AngularStats angular_errors(const Tensor& pred_normals, const Tensor& ref_normals,
                            const Tensor& mask) {
    if (pred_normals.shape() != ref_normals.shape())
        throw std::invalid_argument("angular_errors: shape mismatch");
    std::vector<int64_t> s = pred_normals.shape();
    int64_t B = 1, H = 0, W = 0;
    if (s.size() == 3 && s[0] == 3) {
        H = s[1];
        W = s[2];
    } else if (s.size() == 4 && s[1] == 3) {
        B = s[0];
        H = s[2];
        W = s[3];
    } else {
        throw std::invalid_argument("angular_errors: expected [3,H,W] or [B,3,H,W]");
    }
    if (mask.defined() && mask.numel() != B * H * W)
        throw std::invalid_argument("angular_errors: mask size mismatch");

    std::vector<double> angles;
    angles.reserve(static_cast<size_t>(B * H * W));
    int64_t degenerate = 0, considered = 0;
    for (int64_t b = 0; b < B; ++b) {
        const double* p = pred_normals.data() + b * 3 * H * W;
        const double* r = ref_normals.data() + b * 3 * H * W;
        for (int64_t i = 0; i < H * W; ++i) {
            if (mask.defined() && mask.data()[b * H * W + i] <= 0.5) continue;
            ++considered;
            double px = p[i], py = p[H * W + i], pz = p[2 * H * W + i];
            double rx = r[i], ry = r[H * W + i], rz = r[2 * H * W + i];
            double lp = std::sqrt(px * px + py * py + pz * pz);
            double lr = std::sqrt(rx * rx + ry * ry + rz * rz);
            if (lp < 1e-6 || lr < 1e-6) {
                ++degenerate;
                continue;
            }
            double c = (px * rx + py * ry + pz * rz) / (lp * lr);
            angles.push_back(std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / kPi);
        }
    }
    if (considered == 0) throw std::invalid_argument("angular_errors: empty mask");
    if (degenerate * 2 > considered)
        throw std::runtime_error("angular_errors: more than half of the pixels are degenerate");

    AngularStats st;
    st.degenerate = degenerate;
    st.evaluated = static_cast<int64_t>(angles.size());
    double sum = 0.0;
    int64_t within[3] = {0, 0, 0};
    for (double a : angles) {
        sum += a;
        for (int k = 0; k < 3; ++k) within[k] += a <= kGammas[k];
    }
    st.mean_deg = sum / static_cast<double>(angles.size());
    for (int k = 0; k < 3; ++k)
        st.pct_within[kGammas[k]] =
            100.0 * static_cast<double>(within[k]) / static_cast<double>(angles.size());

    std::sort(angles.begin(), angles.end());
    size_t n = angles.size();
    st.median_deg = (n % 2 == 1) ? angles[n / 2]
                                 : 0.5 * (angles[n / 2 - 1] + angles[n / 2]);
    return st;
}

std::string MetricReport::csv_header() const {
    std::ostringstream os;
    os << "step,images_seen";
    for (const auto& [name, _] : fid) os << ",fid_" << name;
    os << ",sie,normal_mean_deg,normal_median_deg";
    for (const auto& [gamma, _] : normal.pct_within) os << ",pct_within_" << gamma;
    return os.str();
}

std::string MetricReport::csv_row() const {
    std::ostringstream os;
    os << step << "," << images_seen;
    for (const auto& [_, v] : fid) os << "," << v;
    os << "," << sie << "," << normal.mean_deg << "," << normal.median_deg;
    for (const auto& [_, v] : normal.pct_within) os << "," << v;
    return os.str();
}

std::string MetricReport::table() const {
    std::ostringstream os;
    os << "step " << step << " (" << images_seen << " images)\n";
    for (const auto& [name, v] : fid) os << "  fid[" << name << "] = " << v << "\n";
    os << "  sie = " << sie << "\n";
    os << "  normal angular error: mean " << normal.mean_deg << " deg, median "
       << normal.median_deg << " deg\n";
    for (const auto& [gamma, v] : normal.pct_within)
        os << "  within " << gamma << " deg: " << v << "%\n";
    return os.str();
}

} // namespace mmgan
