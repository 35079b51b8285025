#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/rng.hpp"
#include "discriminator/discriminator.hpp"
#include "loss/loss.hpp"
#include "tiny_config.hpp"

#include <cmath>
#include <map>

using namespace mmgan;
using testutil::tiny_config;

namespace {

ModalityTuple random_tuple(int64_t batch, int64_t res, uint64_t seed) {
    Rng rng(seed);
    ModalityTuple t;
    t.names = {"rgb", "depth", "normal"};
    for (int64_t c : {3, 1, 3}) {
        Tensor img = Tensor::zeros({batch, c, res, res});
        for (int64_t i = 0; i < img.numel(); ++i) img.data()[i] = rng.normal(0.0, 0.5);
        t.images.push_back(img);
    }
    return t;
}

} // namespace

TEST_CASE("head count K follows the discriminator mode") {
    auto cfg = tiny_config();
    Rng rng(1);
    {
        cfg.discriminator_mode = DiscriminatorMode::CD_PLUS_FD;
        Discriminator d(cfg, rng);
        CHECK(d.num_heads() == 4);
        CHECK(d.score_all(random_tuple(2, 8, 5)).shape() == std::vector<int64_t>{2, 4});
    }
    {
        cfg.discriminator_mode = DiscriminatorMode::CD_ONLY;
        Discriminator d(cfg, rng);
        CHECK(d.num_heads() == 1);
        CHECK(d.score_all(random_tuple(2, 8, 5)).shape() == std::vector<int64_t>{2, 1});
    }
    {
        auto cfg2 = tiny_config();
        cfg2.modalities = {{"rgb", 3, true}, {"depth", 1, false}};
        cfg2.discriminator_mode = DiscriminatorMode::FD_ONLY;
        Discriminator d(cfg2, rng);
        CHECK(d.num_heads() == 2);
        ModalityTuple t = random_tuple(2, 8, 5);
        t.names.pop_back();
        t.images.pop_back();
        CHECK(d.score_all(t).shape() == std::vector<int64_t>{2, 2});
    }
}

TEST_CASE("fidelity scoring validates channels and returns one logit per sample") {
    auto cfg = tiny_config();
    Rng rng(2);
    Discriminator d(cfg, rng);
    auto t = random_tuple(4, 8, 6);
    Tensor logits = d.score_fidelity("depth", t.get("depth"));
    CHECK(logits.shape() == std::vector<int64_t>{4});
    CHECK(all_finite(logits));
    CHECK_THROWS_AS(d.score_fidelity("depth", t.get("rgb")), std::invalid_argument);
    CHECK_THROWS_AS(d.score_fidelity("albedo", t.get("rgb")), std::invalid_argument);
}

TEST_CASE("mode-specific scoring paths reject the disabled heads") {
    auto cfg = tiny_config();
    Rng rng(3);
    cfg.discriminator_mode = DiscriminatorMode::CD_ONLY;
    Discriminator cd(cfg, rng);
    auto t = random_tuple(2, 8, 7);
    CHECK_THROWS_AS(cd.score_fidelity("rgb", t.get("rgb")), std::logic_error);

    cfg.discriminator_mode = DiscriminatorMode::FD_ONLY;
    Discriminator fd(cfg, rng);
    CHECK_THROWS_AS(fd.score_consistency(t), std::logic_error);
}

TEST_CASE("consistency head consumes the full tuple and requires every modality") {
    auto cfg = tiny_config();
    Rng rng(4);
    Discriminator d(cfg, rng);
    auto t = random_tuple(3, 8, 8);
    Tensor logits = d.score_consistency(t);
    CHECK(logits.shape() == std::vector<int64_t>{3});

    ModalityTuple missing;
    missing.names = {"rgb", "depth"};
    missing.images = {t.get("rgb"), t.get("depth")};
    CHECK_THROWS_AS(d.score_consistency(missing), std::invalid_argument);
}

TEST_CASE("zeroing a head's final layer forces its logits to zero") {
    auto cfg = tiny_config();
    Rng rng(5);
    Discriminator d(cfg, rng);
    d.visit_head_params("fd.depth", [](const std::string& name, Tensor& t) {
        if (name == "fd.depth.fc.w" || name == "fd.depth.fc.b")
            for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = 0.0;
    });
    d.visit_head_params("cd", [](const std::string& name, Tensor& t) {
        if (name == "cd.fc.w" || name == "cd.fc.b")
            for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = 0.0;
    });
    auto t = random_tuple(4, 8, 9);
    Tensor fd_logits = d.score_fidelity("depth", t.get("depth"));
    Tensor cd_logits = d.score_consistency(t);
    for (int64_t b = 0; b < 4; ++b) {
        CHECK(fd_logits.data()[b] == 0.0);
        CHECK(cd_logits.data()[b] == 0.0);
    }
}

TEST_CASE("score_all columns equal the standalone head outputs") {
    auto cfg = tiny_config();
    Rng rng(6);
    Discriminator d(cfg, rng);
    auto t = random_tuple(3, 8, 10);
    Tensor all = d.score_all(t);    // [3, 4]
    std::vector<Tensor> heads = {
        d.score_fidelity("rgb", t.get("rgb")),
        d.score_fidelity("depth", t.get("depth")),
        d.score_fidelity("normal", t.get("normal")),
        d.score_consistency(t),
    };
    for (int64_t b = 0; b < 3; ++b)
        for (int64_t k = 0; k < 4; ++k)
            CHECK(all.data()[b * 4 + k] == heads[static_cast<size_t>(k)].data()[b]);
}

TEST_CASE("consistency head reacts to a depth swap between tuples") {
    auto cfg = tiny_config();
    Rng rng(7);
    Discriminator d(cfg, rng);
    auto a = random_tuple(2, 8, 11);
    auto b = random_tuple(2, 8, 12);

    Tensor before = d.score_consistency(a);
    ModalityTuple swapped = a;
    swapped.images[1] = b.get("depth");
    Tensor after = d.score_consistency(swapped);
    double diff = 0;
    for (int64_t i = 0; i < 2; ++i) diff += std::abs(before.data()[i] - after.data()[i]);
    CHECK(diff > 1e-9);

    // fidelity heads of untouched modalities are unaffected by the swap
    Tensor rgb_before = d.score_fidelity("rgb", a.get("rgb"));
    Tensor rgb_after = d.score_fidelity("rgb", swapped.get("rgb"));
    for (int64_t i = 0; i < 2; ++i) CHECK(rgb_before.data()[i] == rgb_after.data()[i]);
}

TEST_CASE("a joint loss reaches every head's parameters") {
    auto cfg = tiny_config();
    Rng rng(8);
    Discriminator d(cfg, rng);
    d.visit_params([](const std::string&, Tensor& t) { t.set_requires_grad(true); });

    auto real = random_tuple(2, 8, 13);
    auto fake = random_tuple(2, 8, 14);
    Tensor loss = d_loss(d.score_all(real), d.score_all(fake));
    backward(loss);

    for (const char* head : {"fd.rgb", "fd.depth", "fd.normal", "cd"}) {
        double norm = 0;
        d.visit_head_params(head, [&](const std::string&, Tensor& t) {
            Tensor g = t.grad();
            if (!g.defined()) return;
            for (int64_t i = 0; i < g.numel(); ++i) norm += g.data()[i] * g.data()[i];
        });
        INFO("head ", head);
        CHECK(norm > 0.0);
    }
}
