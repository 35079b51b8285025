#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/rng.hpp"
#include "data/procedural.hpp"
#include "metrics/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>

using namespace mmgan;

namespace {

// Pixels-as-features stub, usable on tiny images the builtin encoder rejects.
struct FlattenExtractor : FeatureExtractor {
    int64_t dim;
    explicit FlattenExtractor(int64_t d) : dim(d) {}
    int64_t feature_dim() const override { return dim; }
    Tensor extract(const Tensor& images) override {
        int64_t b = images.dim(0);
        return reshape(images, {b, images.numel() / b});
    }
};

FeatureStats stats_of(std::vector<int64_t> shape, std::vector<double> vals) {
    return feature_stats_from_features(Tensor::from_data(std::move(shape), std::move(vals)));
}

FeatureStats diag_stats(std::vector<double> mean, std::vector<double> var) {
    FeatureStats st;
    int64_t f = static_cast<int64_t>(mean.size());
    st.mean = Tensor::from_data({f}, mean);
    st.cov = Tensor::zeros({f, f});
    for (int64_t i = 0; i < f; ++i) st.cov.data()[i * f + i] = var[static_cast<size_t>(i)];
    st.count = 2;
    return st;
}

// independent route: trace of sqrt(Sa*Sb) through the general (complex)
// eigendecomposition of the nonsymmetric product
double trace_sqrt_product(const FeatureStats& a, const FeatureStats& b) {
    int64_t f = a.mean.numel();
    Eigen::MatrixXd sa(f, f), sb(f, f);
    for (int64_t i = 0; i < f; ++i)
        for (int64_t j = 0; j < f; ++j) {
            sa(i, j) = a.cov.data()[i * f + j];
            sb(i, j) = b.cov.data()[i * f + j];
        }
    Eigen::EigenSolver<Eigen::MatrixXd> es(sa * sb);
    double tr = 0.0;
    for (int64_t i = 0; i < f; ++i) tr += std::sqrt(es.eigenvalues()(i)).real();
    return tr;
}

FeatureStats random_psd_stats(int64_t f, Rng& rng) {
    FeatureStats st;
    st.mean = Tensor::zeros({f});
    for (int64_t i = 0; i < f; ++i) st.mean.data()[i] = rng.normal();
    Eigen::MatrixXd m(f, f);
    for (int64_t i = 0; i < f; ++i)
        for (int64_t j = 0; j < f; ++j) m(i, j) = rng.normal();
    Eigen::MatrixXd psd = m.transpose() * m / static_cast<double>(f) +
                          0.01 * Eigen::MatrixXd::Identity(f, f);
    st.cov = Tensor::zeros({f, f});
    for (int64_t i = 0; i < f; ++i)
        for (int64_t j = 0; j < f; ++j) st.cov.data()[i * f + j] = psd(i, j);
    st.count = 2 * f;
    return st;
}

Tensor unit_normal_image(int64_t res, double nx, double ny, double nz) {
    double len = std::sqrt(nx * nx + ny * ny + nz * nz);
    Tensor t = Tensor::zeros({3, res, res});
    for (int64_t i = 0; i < res * res; ++i) {
        t.data()[i] = nx / len;
        t.data()[res * res + i] = ny / len;
        t.data()[2 * res * res + i] = nz / len;
    }
    return t;
}

} // namespace

TEST_CASE("feature statistics match brute-force mean and covariance") {
    // two identical images -> zero covariance
    FlattenExtractor flat(4);
    Tensor same = Tensor::zeros({2, 1, 2, 2});
    for (int64_t i = 0; i < 8; ++i) same.data()[i] = static_cast<double>(i % 4);
    auto st = feature_stats(same, flat);
    for (int64_t i = 0; i < 16; ++i) CHECK(st.cov.data()[i] == 0.0);

    // 5 random feature vectors against direct summation
    Rng rng(1);
    int64_t n = 5, f = 3;
    std::vector<double> feats(static_cast<size_t>(n * f));
    for (auto& v : feats) v = rng.normal();
    auto st2 = stats_of({n, f}, feats);
    for (int64_t j = 0; j < f; ++j) {
        double mu = 0;
        for (int64_t i = 0; i < n; ++i) mu += feats[static_cast<size_t>(i * f + j)];
        mu /= static_cast<double>(n);
        CHECK(st2.mean.data()[j] == doctest::Approx(mu).epsilon(1e-10));
        for (int64_t k = 0; k < f; ++k) {
            double muk = 0;
            for (int64_t i = 0; i < n; ++i) muk += feats[static_cast<size_t>(i * f + k)];
            muk /= static_cast<double>(n);
            double cov = 0;
            for (int64_t i = 0; i < n; ++i)
                cov += (feats[static_cast<size_t>(i * f + j)] - mu) *
                       (feats[static_cast<size_t>(i * f + k)] - muk);
            cov /= static_cast<double>(n - 1);
            CHECK(st2.cov.data()[j * f + k] == doctest::Approx(cov).epsilon(1e-10));
        }
    }

    // 1x1x1 images {-1, +1}: mean 0, sample variance 2
    FlattenExtractor flat1(1);
    Tensor two = Tensor::from_data({2, 1, 1, 1}, {-1.0, 1.0});
    auto st3 = feature_stats(two, flat1);
    CHECK(st3.mean.data()[0] == 0.0);
    CHECK(st3.cov.data()[0] == doctest::Approx(2.0));

    Tensor one = Tensor::zeros({1, 1, 1, 1});
    CHECK_THROWS_AS(feature_stats(one, flat1), std::invalid_argument);
}

TEST_CASE("frechet distance closed forms and symmetry") {
    auto a = diag_stats({0.0}, {1.0});
    CHECK(frechet_distance(a, a) < 1e-8);
    auto b = diag_stats({1.0}, {1.0});
    CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-10));

    auto c = diag_stats({0.0, 0.0}, {1.0, 1.0});
    auto d = diag_stats({3.0, 4.0}, {4.0, 9.0});
    CHECK(frechet_distance(c, d) == doctest::Approx(30.0).epsilon(1e-10));

    Rng rng(2);
    for (int rep = 0; rep < 10; ++rep) {
        auto x = random_psd_stats(6, rng);
        auto y = random_psd_stats(6, rng);
        double xy = frechet_distance(x, y);
        double yx = frechet_distance(y, x);
        CHECK(std::abs(xy - yx) < 1e-8);
        CHECK(xy >= 0.0);

        // cross-check the symmetric-sqrt route against the complex
        // eigendecomposition of the plain product
        double expected = 0.0;
        for (int64_t i = 0; i < 6; ++i) {
            double dm = x.mean.data()[i] - y.mean.data()[i];
            expected += dm * dm;
            expected += x.cov.data()[i * 6 + i] + y.cov.data()[i * 6 + i];
        }
        expected -= 2.0 * trace_sqrt_product(x, y);
        CHECK(xy == doctest::Approx(expected).epsilon(1e-8));
    }

    CHECK_THROWS_AS(frechet_distance(a, c), std::invalid_argument);
}

TEST_CASE("fid separates a distribution from noise but not from itself") {
    BuiltinExtractor ex;
    const int64_t n = 512, res = 16;
    Tensor all = Tensor::zeros({2 * n, 3, res, res});
    for (int64_t i = 0; i < 2 * n; ++i) {
        auto s = generate_scene(static_cast<uint64_t>(1000 + i), res,
                                procedural_classes()[static_cast<size_t>(i) % 3]);
        std::copy(s.rgb.data(), s.rgb.data() + s.rgb.numel(),
                  all.data() + i * s.rgb.numel());
    }
    Tensor half_a = Tensor::zeros({n, 3, res, res});
    Tensor half_b = Tensor::zeros({n, 3, res, res});
    int64_t per = 3 * res * res;
    std::copy(all.data(), all.data() + n * per, half_a.data());
    std::copy(all.data() + n * per, all.data() + 2 * n * per, half_b.data());

    CHECK(fid(half_a, half_a, ex) < 1e-6);

    Rng rng(3);
    Tensor noise = Tensor::zeros({n, 3, res, res});
    for (int64_t i = 0; i < noise.numel(); ++i) noise.data()[i] = rng.uniform(-1.0, 1.0);

    double fid_self = fid(half_a, half_b, ex);
    double fid_noise = fid(half_a, noise, ex);
    INFO("halves ", fid_self, " noise ", fid_noise);
    CHECK(fid_self < 0.1 * fid_noise);
}

TEST_CASE("scale-invariant depth error values and invariance") {
    Rng rng(4);
    Tensor ref = Tensor::zeros({1, 6, 6});
    for (int64_t i = 0; i < ref.numel(); ++i) ref.data()[i] = 0.5 + 4.0 * rng.uniform();

    CHECK(sie(ref, ref) == 0.0);
    Tensor doubled = Tensor::zeros(ref.shape());
    for (int64_t i = 0; i < ref.numel(); ++i) doubled.data()[i] = 2.0 * ref.data()[i];
    CHECK(sie(doubled, ref) < 1e-9);

    // two pixels with log-ratios {0, ln 2}
    Tensor p2 = Tensor::from_data({1, 1, 2}, {1.0, 2.0});
    Tensor r2 = Tensor::from_data({1, 1, 2}, {1.0, 1.0});
    double ln2 = std::log(2.0);
    CHECK(sie(p2, r2) == doctest::Approx(ln2 * ln2 / 4.0).epsilon(1e-9));

    // invariance under independent positive rescaling of both arguments
    Tensor pred = Tensor::zeros(ref.shape());
    for (int64_t i = 0; i < ref.numel(); ++i) pred.data()[i] = 0.5 + 4.0 * rng.uniform();
    double base = sie(pred, ref);
    for (int rep = 0; rep < 20; ++rep) {
        double a = std::exp(rng.normal()), b = std::exp(rng.normal());
        Tensor pa = Tensor::zeros(ref.shape()), rb = Tensor::zeros(ref.shape());
        for (int64_t i = 0; i < ref.numel(); ++i) {
            pa.data()[i] = a * pred.data()[i];
            rb.data()[i] = b * ref.data()[i];
        }
        CHECK(std::abs(sie(pa, rb) - base) < 1e-9);
    }

    Tensor bad = Tensor::from_data({1, 1, 2}, {1.0, -0.5});
    CHECK_THROWS_AS(sie(bad, r2), std::invalid_argument);

    // masked-out pixels are ignored entirely (including invalid values there)
    Tensor mask = Tensor::from_data({1, 1, 2}, {1.0, 0.0});
    CHECK(sie(bad, r2, mask) == 0.0);
}

TEST_CASE("angular error statistics on constructed normal maps") {
    const int64_t res = 4;
    Tensor up = unit_normal_image(res, 0, 0, 1);
    auto same = angular_errors(up, up);
    CHECK(same.mean_deg == doctest::Approx(0.0));
    CHECK(same.median_deg == doctest::Approx(0.0));
    for (const auto& [gamma, pct] : same.pct_within) CHECK(pct == doctest::Approx(100.0));

    Tensor side = unit_normal_image(res, 1, 0, 0);
    auto ninety = angular_errors(side, up);
    CHECK(ninety.mean_deg == doctest::Approx(90.0));
    CHECK(ninety.median_deg == doctest::Approx(90.0));
    for (const auto& [gamma, pct] : ninety.pct_within) CHECK(pct == doctest::Approx(0.0));

    // half the pixels at 0 degrees, half at 20
    double rad20 = 20.0 * 3.14159265358979323846 / 180.0;
    Tensor mixed = Tensor::zeros({3, res, res});
    for (int64_t i = 0; i < res * res; ++i) {
        bool second = i >= res * res / 2;
        mixed.data()[i] = second ? std::sin(rad20) : 0.0;
        mixed.data()[res * res + i] = 0.0;
        mixed.data()[2 * res * res + i] = second ? std::cos(rad20) : 1.0;
    }
    auto half = angular_errors(mixed, up);
    CHECK(half.mean_deg == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(half.median_deg == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(half.pct_within[11.25] == doctest::Approx(50.0));
    CHECK(half.pct_within[22.5] == doctest::Approx(100.0));
    CHECK(half.pct_within[30.0] == doctest::Approx(100.0));
    // monotone in gamma
    double prev = -1.0;
    for (const auto& [gamma, pct] : half.pct_within) {
        CHECK(pct >= prev);
        prev = pct;
    }

    // degenerate pixels: excluded and counted; majority-degenerate is an error
    Tensor mostly_zero = Tensor::zeros({3, res, res});
    for (int64_t i = 0; i < 3; ++i) mostly_zero.data()[2 * res * res + i] = 1.0;
    CHECK_THROWS_AS(angular_errors(mostly_zero, up), std::runtime_error);

    Tensor few_zero = up.clone();
    few_zero.data()[2 * res * res + 0] = 0.0;   // one degenerate pixel
    auto cnt = angular_errors(few_zero, up);
    CHECK(cnt.degenerate == 1);
    CHECK(cnt.evaluated == res * res - 1);
}

TEST_CASE("builtin extractor is deterministic, channel-tolerant, and sensitive") {
    BuiltinExtractor a, b;
    Rng rng(5);
    Tensor imgs = Tensor::zeros({2, 3, 8, 8});
    for (int64_t i = 0; i < imgs.numel(); ++i) imgs.data()[i] = rng.uniform(-1.0, 1.0);

    Tensor fa = a.extract(imgs);
    Tensor fb = b.extract(imgs);
    CHECK(fa.shape() == std::vector<int64_t>{2, 64});
    for (int64_t i = 0; i < fa.numel(); ++i) CHECK(fa.data()[i] == fb.data()[i]);

    // single-channel input is replicated, matching an explicit 3-channel copy
    Tensor gray = Tensor::zeros({2, 1, 8, 8});
    for (int64_t i = 0; i < gray.numel(); ++i) gray.data()[i] = rng.uniform(-1.0, 1.0);
    Tensor rep = concat_channels({gray, gray, gray});
    Tensor fg = a.extract(gray);
    Tensor fr = a.extract(rep);
    for (int64_t i = 0; i < fg.numel(); ++i) CHECK(fg.data()[i] == fr.data()[i]);

    // distinct inputs land on distinct features
    Tensor shifted = imgs.clone();
    for (int64_t i = 0; i < shifted.numel(); ++i) shifted.data()[i] += 0.1;
    Tensor fs = a.extract(shifted);
    double diff = 0;
    for (int64_t i = 0; i < fs.numel(); ++i) diff += std::abs(fs.data()[i] - fa.data()[i]);
    CHECK(diff > 1e-3);

    Tensor tiny = Tensor::zeros({2, 3, 4, 4});
    CHECK_THROWS_AS(a.extract(tiny), std::invalid_argument);
    Tensor five = Tensor::zeros({2, 5, 8, 8});
    CHECK_THROWS_AS(a.extract(five), std::invalid_argument);
}

TEST_CASE("metric report serializes consistent csv columns") {
    MetricReport rep;
    rep.step = 7;
    rep.images_seen = 112;
    rep.fid["rgb"] = 1.5;
    rep.fid["depth"] = 2.5;
    rep.sie = 0.01;
    rep.normal.mean_deg = 5.0;
    rep.normal.median_deg = 4.0;
    rep.normal.pct_within[11.25] = 90.0;
    rep.normal.pct_within[22.5] = 95.0;
    rep.normal.pct_within[30.0] = 99.0;

    auto count_commas = [](const std::string& s) {
        return std::count(s.begin(), s.end(), ',');
    };
    CHECK(count_commas(rep.csv_header()) == count_commas(rep.csv_row()));
    CHECK(rep.csv_header().find("fid_rgb") != std::string::npos);
    CHECK(rep.table().find("sie") != std::string::npos);
}
