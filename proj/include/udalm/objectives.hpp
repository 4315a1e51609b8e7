#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "udalm/autograd.hpp"
#include "udalm/image.hpp"
#include "udalm/model.hpp"
#include "udalm/tensor.hpp"

namespace udalm {

/// m ∈ {0,1}^L; entry l gates every loss term of landmark l.
using LandmarkMask = std::vector<std::uint8_t>;

inline LandmarkMask all_ones_mask(int num_landmarks) { return LandmarkMask(static_cast<std::size_t>(num_landmarks), 1); }
inline LandmarkMask all_zeros_mask(int num_landmarks) { return LandmarkMask(static_cast<std::size_t>(num_landmarks), 0); }
int count_selected(const LandmarkMask& mask);

struct ScoreTarget {
    Tensor values;                      // L×H×W in [0,1]
    std::vector<std::uint8_t> support;  // L×H×W, 1 where values > 0
};

struct OffsetTarget {
    Tensor values;  // L×2×H×W grid units; meaningful only on the score support
};

struct EncodedTargets {
    ScoreTarget score;
    OffsetTarget offset;
    Tensor coords_norm;  // L×2, landmarks divided by the input size
};

struct LossWeights {
    double lambda_s = 100.0;
    double lambda_o = 0.02;
    double lambda_d = 0.01;

    void validate() const;
};

/// Gaussian score targets (σ in grid units, window half-width floor(3σ) cells) and
/// offsets c − (g + 0.5) on the supported cells.
EncodedTargets encode_targets(std::span<const Point> landmarks_px, int grid_h, int grid_w, int stride, double sigma);

// Each loss optionally writes d(loss)/d(pred) into grad (same layout as pred).
// Normalization divides by what the mask keeps, so an empty mask yields 0.

/// Mean |pred − gt| over masked landmarks and both axes. pred/gt are L×2.
double loss_coord(std::span<const double> pred, std::span<const double> gt, const LandmarkMask& mask,
                  std::span<double> grad = {});

/// Mean squared error over all cells of the masked channels.
double loss_score(std::span<const double> pred, const ScoreTarget& target, const LandmarkMask& mask,
                  std::span<double> grad = {});

/// Mean |pred − target| over the supported cells (both axes) of masked landmarks.
double loss_offset(std::span<const double> pred, const OffsetTarget& target, const ScoreTarget& support,
                   const LandmarkMask& mask, std::span<double> grad = {});

/// −d log p − (1 − d) log(1 − p), p clamped to [1e-7, 1 − 1e-7].
double loss_domain(double prob, int label, double* grad = nullptr);
/// Batch mean of the above.
double loss_domain(std::span<const double> probs, std::span<const int> labels, std::span<double> grad = {});

struct BaseLossTerms {
    double score = 0.0;
    double offset = 0.0;
    double coord = 0.0;

    double weighted(const LossWeights& w) const { return w.lambda_s * score + w.lambda_o * offset + coord; }
};

/// Masked per-sample base loss terms for a model output.
BaseLossTerms loss_base_terms(const ModelOutput& output, const EncodedTargets& targets, const LandmarkMask& mask);
double loss_base(const ModelOutput& output, const EncodedTargets& targets, const LandmarkMask& mask,
                 const LossWeights& weights);
/// Unmasked per-sample loss (plain means over every landmark).
double loss_base_unmasked(const ModelOutput& output, const EncodedTargets& targets, const LossWeights& weights);

struct BatchItem {
    const ModelOutput* output = nullptr;
    const EncodedTargets* targets = nullptr;
    const LandmarkMask* mask = nullptr;
};
/// Mean over samples whose mask keeps at least one landmark; 0 if none do.
double loss_base_batch(std::span<const BatchItem> batch, const LossWeights& weights);

/// Graph node holding the weighted masked base loss of one sample.
Var base_loss_node(Graph& graph, const ModelVars& vars, const EncodedTargets& targets, const LandmarkMask& mask,
                   const LossWeights& weights);
/// Graph node holding the binary cross-entropy of a domain probability.
Var domain_loss_node(Graph& graph, Var prob, int label);

}  // namespace udalm
