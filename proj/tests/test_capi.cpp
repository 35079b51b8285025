#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mmgan/mmgan.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("mmgan_capi_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

const char* kTinyOverrides[] = {
    "resolution=8",       "latent_dim=8",      "w_dim=8",
    "trunk_layers=2",     "branch_layers=2",   "branch_index=3",
    "channel_max=8",      "channel_base=64",   "disc_channel_max=8",
    "disc_channel_base=64", "batch_size=2",    "data.num_samples=12",
    "trainer.metric_samples=8", "trainer.max_steps=2",
    "trainer.checkpoint_interval_steps=0", "trainer.metric_interval_images=0",
    "augmentation_mode=none", "blur_sigma_init=0",
};
const size_t kTinyCount = sizeof(kTinyOverrides) / sizeof(kTinyOverrides[0]);

mmgan_session* tiny_session(std::vector<const char*> extra = {}) {
    std::vector<const char*> ovs(kTinyOverrides, kTinyOverrides + kTinyCount);
    ovs.insert(ovs.end(), extra.begin(), extra.end());
    mmgan_session* s = nullptr;
    REQUIRE(mmgan_session_create(nullptr, ovs.data(), ovs.size(), &s) == MMGAN_OK);
    return s;
}

} // namespace

TEST_CASE("status codes separate config, runtime, and io failures") {
    mmgan_session* s = nullptr;
    const char* bad[] = {"resolution=7"};
    CHECK(mmgan_session_create(nullptr, bad, 1, &s) == MMGAN_ERR_CONFIG);
    CHECK(s == nullptr);
    CHECK(std::strlen(mmgan_last_error(nullptr)) > 0);

    CHECK(mmgan_session_create("/does/not/exist.cfg", nullptr, 0, &s) ==
          MMGAN_ERR_CONFIG);
    CHECK(mmgan_session_from_checkpoint("/does/not/exist.ckpt", nullptr, 0, &s) ==
          MMGAN_ERR_IO);
    CHECK(mmgan_plot("/does/not/exist.csv", "/tmp") == MMGAN_ERR_IO);

    s = tiny_session();
    CHECK(mmgan_sample(s, -3, "/tmp") == MMGAN_ERR_CONFIG);
    CHECK(std::string(mmgan_last_error(s)).find("count") != std::string::npos);
    mmgan_session_destroy(s);
}

TEST_CASE("train, reload, and downstream verbs round-trip through the api") {
    TempDir dir("roundtrip");
    mmgan_session* s = tiny_session();
    REQUIRE(mmgan_train(s, dir.str().c_str()) == MMGAN_OK);
    CHECK(std::string(mmgan_stop_reason(s)) == "max_steps");
    CHECK(std::filesystem::exists(dir.path / "metrics.csv"));
    std::string ckpt = (dir.path / "checkpoint_final.ckpt").string();
    CHECK(std::filesystem::exists(ckpt));
    mmgan_session_destroy(s);

    mmgan_session* r = nullptr;
    REQUIRE(mmgan_session_from_checkpoint(ckpt.c_str(), nullptr, 0, &r) == MMGAN_OK);

    std::string sdir = dir.str() + "/samples";
    CHECK(mmgan_sample(r, 4, sdir.c_str()) == MMGAN_OK);
    CHECK(std::filesystem::exists(sdir + "/samples_rgb.png"));
    CHECK(std::filesystem::exists(sdir + "/samples_depth.png"));

    std::string idir = dir.str() + "/frames";
    CHECK(mmgan_interpolate(r, 2, 3, idir.c_str()) == MMGAN_OK);
    CHECK(std::filesystem::exists(idir + "/frame_00002_normal.png"));
    CHECK(!std::filesystem::exists(idir + "/frame_00003_rgb.png"));

    char* table = nullptr;
    std::string edir = dir.str() + "/eval";
    CHECK(mmgan_evaluate(r, edir.c_str(), &table) == MMGAN_OK);
    REQUIRE(table != nullptr);
    CHECK(std::string(table).find("fid[rgb]") != std::string::npos);
    mmgan_string_free(table);
    CHECK(std::filesystem::exists(edir + "/report.csv"));
    CHECK(std::filesystem::exists(edir + "/report.txt"));

    std::string xdir = dir.str() + "/synth";
    CHECK(mmgan_export_rgbd(r, 3, xdir.c_str()) == MMGAN_OK);
    CHECK(std::filesystem::exists(xdir + "/manifest.json"));

    std::string pdir = dir.str() + "/plots";
    CHECK(mmgan_plot((dir.path / "metrics.csv").string().c_str(), pdir.c_str()) ==
          MMGAN_OK);
    CHECK(std::filesystem::exists(pdir + "/losses.png"));
    mmgan_session_destroy(r);
}

TEST_CASE("checkpoint sessions accept runtime but not architecture overrides") {
    TempDir dir("arch");
    mmgan_session* s = tiny_session();
    REQUIRE(mmgan_train(s, dir.str().c_str()) == MMGAN_OK);
    std::string ckpt = (dir.path / "checkpoint_final.ckpt").string();
    mmgan_session_destroy(s);

    mmgan_session* ok = nullptr;
    const char* runtime[] = {"trainer.max_steps=5", "g_lr=0.001"};
    CHECK(mmgan_session_from_checkpoint(ckpt.c_str(), runtime, 2, &ok) == MMGAN_OK);
    mmgan_session_destroy(ok);

    mmgan_session* bad = nullptr;
    const char* arch[] = {"resolution=16"};
    CHECK(mmgan_session_from_checkpoint(ckpt.c_str(), arch, 1, &bad) ==
          MMGAN_ERR_CONFIG);
    CHECK(bad == nullptr);
    CHECK(std::string(mmgan_last_error(nullptr)).find("architecture") !=
          std::string::npos);
}

TEST_CASE("finetuning through the api needs a holdout class") {
    TempDir dir("ft");
    mmgan_session* s = tiny_session();
    CHECK(mmgan_finetune(s, dir.str().c_str()) == MMGAN_ERR_CONFIG);
    mmgan_session_destroy(s);

    mmgan_session* f = tiny_session({"finetune.holdout_class=boxworld",
                                     "finetune.paired_percent=50"});
    CHECK(mmgan_finetune(f, dir.str().c_str()) == MMGAN_OK);
    CHECK(std::string(mmgan_stop_reason(f)) == "max_steps");
    mmgan_session_destroy(f);
}
