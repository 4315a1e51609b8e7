// Exercises the shared library through its C header only.
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "udalm/udalm.h"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("udalm_capi_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string take(char* s) {
    std::string out = s ? s : "";
    udalm_string_free(s);
    return out;
}

const char* kTinyConfig = R"({
  "schema_version": 1,
  "profile": "desk",
  "seed": 3,
  "model": {"num_landmarks": 3, "embed_dim": 16, "num_decoder_layers": 1, "num_heads": 2,
            "input_size": [32, 32], "backbone_width": 4},
  "optimizer": {"epochs_per_round": 1, "decay_epochs": [], "batch_size": 4},
  "curriculum": {"rounds": 2},
  "synth": {"num_landmarks": 3, "n_source": 4, "n_target": 4, "n_test": 3},
  "data": {"source_manifest": "data/manifests/source_train.json",
           "target_manifest": "data/manifests/target_train.json",
           "test_manifest": "data/manifests/target_test.json"}
})";

}  // namespace

TEST_CASE("version and error reporting") {
    CHECK(std::string(udalm_version()).size() > 0);
    udalm_config* cfg = nullptr;
    CHECK(udalm_config_profile("laptop", &cfg) == UDALM_ERR_CONFIG);
    CHECK(cfg == nullptr);
    CHECK(std::string(udalm_last_error()).find("laptop") != std::string::npos);
    CHECK(udalm_config_profile("desk", nullptr) == UDALM_ERR_INVALID_ARGUMENT);
    CHECK(udalm_config_load("/nonexistent/config.json", &cfg) == UDALM_ERR_CONFIG);
    udalm_model* m = nullptr;
    CHECK(udalm_model_load("/nonexistent/x.udalm", &m) == UDALM_ERR_LOAD);
    CHECK(udalm_synth(nullptr, "/tmp") == UDALM_ERR_INVALID_ARGUMENT);
    udalm_config_free(nullptr);
    udalm_model_free(nullptr);
}

TEST_CASE("profiles serialize to json") {
    udalm_config* cfg = nullptr;
    REQUIRE(udalm_config_profile("full_scale", &cfg) == UDALM_OK);
    CHECK(udalm_config_set_seed(cfg, 42) == UDALM_OK);
    char* json = nullptr;
    REQUIRE(udalm_config_to_json(cfg, &json) == UDALM_OK);
    const std::string text = take(json);
    CHECK(text.find("\"seed\": 42") != std::string::npos);
    CHECK(text.find("\"num_landmarks\": 19") != std::string::npos);
    udalm_config_free(cfg);
}

TEST_CASE("full workflow through the C API") {
    const fs::path root = fresh_dir("workflow");
    std::ofstream(root / "config.json") << kTinyConfig;
    udalm_config* cfg = nullptr;
    REQUIRE(udalm_config_load((root / "config.json").c_str(), &cfg) == UDALM_OK);
    REQUIRE(udalm_synth(cfg, (root / "data").c_str()) == UDALM_OK);
    CHECK(fs::exists(root / "data" / "manifests" / "target_test.json"));

    const fs::path run = root / "run";
    char* ckpt = nullptr;
    REQUIRE(udalm_train_source(cfg, run.c_str(), &ckpt) == UDALM_OK);
    const std::string round0 = take(ckpt);
    CHECK(fs::exists(round0));

    int last = -1;
    REQUIRE(udalm_adapt(cfg, run.c_str(), nullptr, -1, &last) == UDALM_OK);
    CHECK(last == 2);
    CHECK(fs::exists(run / "pseudo_labels" / "round_02.json"));

    char* test_manifest = nullptr;
    REQUIRE(udalm_config_test_manifest(cfg, &test_manifest) == UDALM_OK);
    const std::string manifest = take(test_manifest);
    const double radii[] = {1.0, 2.0};
    char* report = nullptr;
    REQUIRE(udalm_eval((run / "checkpoints" / "round_02.udalm").c_str(), manifest.c_str(), radii, 2, run.c_str(),
                       "adapted", &report) == UDALM_OK);
    CHECK(take(report).find("mre_mm") != std::string::npos);
    CHECK(fs::exists(run / "eval" / "adapted.md"));

    char* table = nullptr;
    REQUIRE(udalm_pseudo_labels_show((run / "pseudo_labels" / "round_01.json").c_str(), nullptr, &table) == UDALM_OK);
    CHECK(take(table).find("tgt") != std::string::npos);
    CHECK(udalm_pseudo_labels_show((run / "pseudo_labels" / "round_01.json").c_str(), "nope", &table) ==
          UDALM_ERR_INPUT);

    char* report_path = nullptr;
    REQUIRE(udalm_report(run.c_str(), cfg, &report_path) == UDALM_OK);
    CHECK(fs::exists(take(report_path)));

    udalm_model* model = nullptr;
    REQUIRE(udalm_model_load((run / "checkpoints" / "round_02.udalm").c_str(), &model) == UDALM_OK);
    CHECK(udalm_model_num_landmarks(model) == 3);
    CHECK(udalm_model_input_width(model) == 32);
    std::vector<double> pixels(64 * 48, 0.5), coords(6), conf(3);
    REQUIRE(udalm_model_predict(model, pixels.data(), 64, 48, coords.data(), conf.data()) == UDALM_OK);
    for (int l = 0; l < 3; ++l) {
        CHECK(coords[2 * l] >= 0.0);
        CHECK(coords[2 * l] <= 64.0);
        CHECK(coords[2 * l + 1] <= 48.0);
        CHECK(conf[l] >= 0.0);
        CHECK(conf[l] <= 1.0);
    }
    CHECK(udalm_model_predict(model, pixels.data(), 0, 48, coords.data(), conf.data()) == UDALM_ERR_INVALID_ARGUMENT);
    udalm_model_free(model);
    udalm_config_free(cfg);
}
