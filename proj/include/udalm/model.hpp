#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "udalm/autograd.hpp"
#include "udalm/image.hpp"
#include "udalm/tensor.hpp"

namespace udalm {

enum class BackboneKind {
    tiny,  // plain conv stack, desk scale
    full,  // residual encoder to stride 32 followed by three 2× deconvolutions
};

std::string to_string(BackboneKind kind);
BackboneKind backbone_from_string(const std::string& name);

struct ModelConfig {
    int num_landmarks = 19;
    int embed_dim = 256;
    int num_decoder_layers = 3;
    int num_heads = 8;
    int stride = 4;
    BackboneKind backbone = BackboneKind::full;
    int input_width = 640;
    int input_height = 800;
    // First-stage channel count of the backbone.
    int backbone_width = 32;
    // Build the GAP + FC domain classifier.
    bool domain_head = true;

    int grid_width() const { return input_width / stride; }
    int grid_height() const { return input_height / stride; }

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
};

/// Raw head outputs for one image.
struct ModelOutput {
    Tensor features;       // C×H×W
    Tensor coarse_coords;  // L×2, (x, y) normalized to [0,1]
    Tensor score_maps;     // L×H×W
    Tensor offset_maps;    // L×2×H×W, grid units, channel 0 = x
};

struct Prediction {
    std::vector<Point> coords;       // input-resolution pixels
    std::vector<double> confidences;  // [0,1]
};

struct GridIndex {
    int gx = 0;
    int gy = 0;
    bool operator==(const GridIndex&) const = default;
};

/// Graph handles produced by Model::forward.
struct ModelVars {
    Var features;
    Var coarse;
    Var scores;
    Var offsets;
    Var domain_prob;  // invalid unless requested and the head exists
};

class Model {
public:
    Model(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    ParameterStore& parameters() { return params_; }
    const ParameterStore& parameters() const { return params_; }

    /// Records the forward pass for one image. The domain head is attached
    /// through a gradient reversal node when with_domain is set.
    ModelVars forward(Graph& graph, const Image& image, bool with_domain = false) const;

    /// Evaluation-mode forward without gradient tracking.
    ModelOutput forward(const Image& image) const;
    Prediction predict(const Image& image) const;

    /// Domain probability D(GAP(f)) for a C×H×W feature map.
    double domain_classify(const Tensor& features) const;
    Var domain_head(Graph& graph, Var features) const;
    bool has_domain_head() const { return config_.domain_head; }

private:
    int p(const std::string& name) const;
    void build_backbone(std::uint64_t& stream);
    Var backbone(Graph& g, Var x) const;
    Var decoder(Graph& g, Var features) const;
    Var attention_block(Graph& g, const std::string& prefix, Var query, Var key, Var value) const;

    ModelConfig config_;
    ParameterStore params_;
    Tensor position_encoding_;  // (H·W)×C
    int backbone_blocks_ = 0;
};

Model build_model(const ModelConfig& config, std::uint64_t seed);

/// Fixed 2D sinusoidal encoding, (H·W)×C; first half of the channels encode y, second half x.
Tensor sine_position_encoding(int grid_h, int grid_w, int channels);

/// Cell containing a pixel coordinate, clamped to the grid.
GridIndex project_to_grid(Point coord_px, int stride, int grid_h, int grid_w);

/// Refined coordinates and confidences read at the projection of the coarse coordinates.
Prediction decode_prediction(const ModelOutput& output, int stride, int input_width, int input_height);

/// Score-map argmax decoding; diagnostic only.
Prediction decode_argmax(const ModelOutput& output, int stride, int input_width, int input_height);

}  // namespace udalm
