#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "udalm/data.hpp"
#include "udalm/model.hpp"
#include "udalm/objectives.hpp"

namespace udalm {

enum class SelectionMode {
    landmark_dynamic,  // per-landmark top-r percentile (LAST)
    landmark_fixed,    // per-landmark confidence > fixed τ
    image_dynamic,     // whole images ranked by mean confidence (vanilla self-training)
    none,              // no pseudo-labels; target data only feeds the domain classifier
};

std::string to_string(SelectionMode mode);
SelectionMode selection_from_string(const std::string& name);

enum class MreMode { pooled, per_image };

struct CurriculumConfig {
    double delta = 0.2;
    int rounds = 0;  // 0 → ⌈1/Δ⌉
    SelectionMode selection = SelectionMode::landmark_dynamic;
    double fixed_threshold = 0.4;
    bool round0_dal = true;
    bool reinit_each_round = false;

    int total_rounds() const;
};

struct OptimizerConfig {
    double lr = 2e-4;
    std::vector<int> decay_epochs{480, 640};
    double decay_factor = 10.0;  // lr is divided by this at each decay epoch
    int epochs_per_round = 720;
    int batch_size = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    double lr_at(int epoch) const;
};

struct DataPaths {
    std::string source_manifest;
    std::string target_manifest;
    std::string test_manifest;
};

struct EvalConfig {
    std::vector<double> radii_mm{2.0, 2.5, 3.0, 4.0};
    MreMode mre_mode = MreMode::pooled;
};

struct ExperimentConfig {
    static constexpr int kSchemaVersion = 1;

    ModelConfig model;
    LossWeights weights;
    CurriculumConfig curriculum;
    OptimizerConfig optimizer;
    AugmentConfig augment;
    double target_sigma = 1.5;  // Gaussian width in grid cells
    DataPaths data;
    SynthConfig synth;
    EvalConfig eval;
    std::uint64_t seed = 0;
    bool deterministic = true;

    void validate() const;

    /// Full-scale settings of the cephalometric setup (640×800, 19 landmarks).
    static ExperimentConfig full_scale();
    /// CPU-sized profile on 64×64 synthetic data with 6 landmarks.
    static ExperimentConfig desk();
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Strict parse: unknown keys and wrong types raise ConfigError naming the field path.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace udalm
