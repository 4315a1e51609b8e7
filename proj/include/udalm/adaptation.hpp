#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "udalm/config.hpp"
#include "udalm/data.hpp"
#include "udalm/model.hpp"
#include "udalm/objectives.hpp"

namespace udalm {

inline constexpr int kSourceLabel = 0;
inline constexpr int kTargetLabel = 1;

struct PseudoLabelRecord {
    std::string image_id;
    std::vector<Point> coords;        // model input pixels
    std::vector<double> confidences;  // [0,1]
    LandmarkMask mask;
    int round = 0;
};

struct CurriculumState {
    double delta = 0.2;
    int round = 1;
    double ratio = 0.2;
    std::vector<double> thresholds;  // τ^l_r per landmark
    std::vector<int> selected;       // selections per landmark
};

/// r = min(1, Δ·t).
double curriculum_ratio(int round, double delta);

/// One record per image, decoded with the current model; masks are left empty.
std::vector<PseudoLabelRecord> generate_pseudo_labels(const Model& model, const Dataset& targets, int round);

/// Per landmark: k = max(1, ⌊r·M⌋) highest confidences are selected (ties by
/// image id), τ^l_r is the k-th highest. Writes masks into the records.
CurriculumState dynamic_thresholds(std::vector<PseudoLabelRecord>& records, double ratio);

/// Fixed-threshold selection (confidence > τ); returns per-landmark counts.
std::vector<int> fixed_threshold_selection(std::vector<PseudoLabelRecord>& records, double tau);

/// Image-level selection: the top max(1, ⌊r·M⌋) images by mean confidence get all-ones masks.
std::vector<int> image_level_selection(std::vector<PseudoLabelRecord>& records, double ratio);

/// Applies the configured selection for a round and returns the resulting state.
CurriculumState select_pseudo_labels(std::vector<PseudoLabelRecord>& records, const CurriculumConfig& cfg, int round);

struct TotalLossItem {
    const ModelOutput* output = nullptr;
    const EncodedTargets* targets = nullptr;
    const LandmarkMask* mask = nullptr;
    double domain_prob = 0.5;
    int domain_label = kSourceLabel;
};

/// Masked base loss over the batch plus λ_D times the batch-mean domain loss.
double total_loss(std::span<const TotalLossItem> batch, const LossWeights& weights);

/// Adam with per-parameter first and second moments.
class Adam {
public:
    Adam() = default;
    explicit Adam(const ParameterStore& params);

    void reset();
    void step(ParameterStore& params, const std::vector<Tensor>& grads, double lr, const OptimizerConfig& cfg);

    std::int64_t steps = 0;
    std::vector<Tensor> first;
    std::vector<Tensor> second;
};

/// Everything needed to continue training bit-for-bit.
struct RunState {
    Model model;
    Adam optimizer;
    int round = -1;  // last completed round
    std::mt19937_64 rng;

    RunState(Model m, std::uint64_t seed) : model(std::move(m)), optimizer(model.parameters()), rng(seed) {}
};

struct RoundArtifacts {
    int round = 0;
    double ratio = 0.0;
    std::vector<PseudoLabelRecord> pseudo_labels;
    CurriculumState curriculum;
    std::vector<double> epoch_losses;
};

using RoundCallback = std::function<void(const RunState&, const RoundArtifacts&)>;

/// Resizes to the model input; target labels are dropped so training cannot see them.
Dataset prepare_for_training(const Dataset& samples, const ModelConfig& model, bool keep_labels);

/// Fresh state: model initialized from cfg.seed, RNG seeded from cfg.seed.
RunState initial_state(const ExperimentConfig& cfg);

/// Trains one round in place. Round 0 uses source labels only; later rounds take
/// the pseudo-labels (with masks) for the target samples.
std::vector<double> train_round(RunState& state, const ExperimentConfig& cfg, const Dataset& source,
                                const Dataset& target, const std::vector<PseudoLabelRecord>& pseudo, int round);

/// Runs rounds state.round+1 … last_round (−1 → curriculum total). Inputs must be
/// prepared with prepare_for_training. An empty source set is a ConfigError.
void run_adaptation(RunState& state, const ExperimentConfig& cfg, const Dataset& source, const Dataset& target,
                    int last_round = -1, const RoundCallback& on_round = {});

}  // namespace udalm
