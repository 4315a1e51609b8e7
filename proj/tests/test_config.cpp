#include <doctest.h>

#include "test_util.hpp"
#include "udalm/config.hpp"
#include "udalm/error.hpp"

using namespace udalm;
using nlohmann::json;

namespace {

std::string config_error(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("profiles validate and round trip") {
    for (const ExperimentConfig& c : {ExperimentConfig::full_scale(), ExperimentConfig::desk()}) {
        c.validate();
        const json j = to_json(c);
        CHECK(to_json(config_from_json(j)) == j);
    }
}

TEST_CASE("full-scale defaults") {
    const ExperimentConfig c = ExperimentConfig::full_scale();
    CHECK(c.model.num_landmarks == 19);
    CHECK(c.model.input_width == 640);
    CHECK(c.model.input_height == 800);
    CHECK(c.weights.lambda_s == 100.0);
    CHECK(c.weights.lambda_o == 0.02);
    CHECK(c.weights.lambda_d == 0.01);
    CHECK(c.curriculum.delta == 0.2);
    CHECK(c.curriculum.total_rounds() == 5);
    CHECK(c.optimizer.lr == 2e-4);
    CHECK(c.optimizer.epochs_per_round == 720);
    CHECK(c.optimizer.batch_size == 10);
    CHECK(c.optimizer.decay_epochs == std::vector<int>{480, 640});
    CHECK(c.eval.radii_mm == std::vector<double>{2.0, 2.5, 3.0, 4.0});
}

TEST_CASE("partial configs fill from the profile") {
    const ExperimentConfig c = config_from_json({{"schema_version", 1}, {"profile", "desk"}, {"seed", 11}});
    CHECK(c.seed == 11);
    CHECK(to_json(c)["model"] == to_json(ExperimentConfig::desk())["model"]);
}

TEST_CASE("schema errors carry the field path") {
    CHECK(config_error({{"schema_version", 2}}).find("schema_version") != std::string::npos);
    CHECK(config_error({{"profile", "desk"}}).find("schema_version") != std::string::npos);
    CHECK(config_error({{"schema_version", 1}, {"profile", "laptop"}}).find("profile") != std::string::npos);
    CHECK(config_error({{"schema_version", 1}, {"loss", {{"lambda_x", 1.0}}}}).find("loss.lambda_x") != std::string::npos);
    CHECK(config_error({{"schema_version", 1}, {"curriculum", {{"delta", "big"}}}}).find("curriculum.delta") !=
          std::string::npos);
    CHECK(config_error({{"schema_version", 1}, {"bogus", 1}}).find("bogus") != std::string::npos);
    CHECK(config_error({{"schema_version", 1}, {"optimizer", {{"batch_size", 0}}}}).find("optimizer.batch_size") !=
          std::string::npos);
    CHECK(config_error({{"schema_version", 1}, {"curriculum", {{"selection", "random"}}}}).find("curriculum.selection") !=
          std::string::npos);
}

TEST_CASE("curriculum round count and learning-rate schedule") {
    CurriculumConfig c;
    c.delta = 0.3;
    CHECK(c.total_rounds() == 4);
    c.rounds = 2;
    CHECK(c.total_rounds() == 2);
    OptimizerConfig o;
    CHECK(o.lr_at(0) == 2e-4);
    CHECK(o.lr_at(479) == 2e-4);
    CHECK(o.lr_at(480) == doctest::Approx(2e-5));
    CHECK(o.lr_at(700) == doctest::Approx(2e-6));
}

TEST_CASE("config files round trip") {
    const auto dir = testutil::temp_dir("config");
    ExperimentConfig c = ExperimentConfig::desk();
    c.seed = 99;
    c.curriculum.selection = SelectionMode::image_dynamic;
    save_config(c, dir / "c.json");
    CHECK(to_json(load_config(dir / "c.json")) == to_json(c));
    CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}
