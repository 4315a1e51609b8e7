#include "udalm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "udalm/error.hpp"

namespace udalm {

namespace {

std::uint64_t splitmix(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Tensor normal_init(std::vector<int> shape, double stddev, std::uint64_t& stream) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(splitmix(stream));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.data) v = dist(rng);
    return t;
}

Tensor uniform_init(std::vector<int> shape, double bound, std::uint64_t& stream) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(splitmix(stream));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.data) v = dist(rng);
    return t;
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_int(int v) {
    int n = 0;
    while ((1 << n) < v) ++n;
    return n;
}

// Input normalization applied inside the network.
constexpr double kPixelMean = 0.5;
constexpr double kPixelScale = 4.0;

}  // namespace

std::string to_string(BackboneKind kind) { return kind == BackboneKind::tiny ? "tiny" : "full"; }

BackboneKind backbone_from_string(const std::string& name) {
    if (name == "tiny") return BackboneKind::tiny;
    if (name == "full") return BackboneKind::full;
    throw ConfigError("unknown backbone kind '" + name + "' (expected tiny or full)");
}

void ModelConfig::validate() const {
    if (num_landmarks < 1) throw ConfigError("model.num_landmarks must be >= 1");
    if (embed_dim < 8) throw ConfigError("model.embed_dim must be >= 8");
    if (embed_dim % 4 != 0) throw ConfigError("model.embed_dim must be a multiple of 4");
    if (num_decoder_layers < 1) throw ConfigError("model.num_decoder_layers must be >= 1");
    if (num_heads < 1 || embed_dim % num_heads != 0)
        throw ConfigError("model.num_heads must divide model.embed_dim");
    if (!is_power_of_two(stride)) throw ConfigError("model.stride must be a power of two");
    if (backbone_width < 1) throw ConfigError("model.backbone_width must be >= 1");
    if (input_width <= 0 || input_height <= 0) throw ConfigError("model.input_size must be positive");
    if (input_width % stride != 0 || input_height % stride != 0)
        throw ConfigError("model.input_size " + std::to_string(input_width) + "x" + std::to_string(input_height) +
                          " is not divisible by stride " + std::to_string(stride));
    if (backbone == BackboneKind::full) {
        if (stride > 32) throw ConfigError("full backbone supports stride <= 32");
        if (input_width % 32 != 0 || input_height % 32 != 0)
            throw ConfigError("full backbone needs input size divisible by 32");
    }
}

Tensor sine_position_encoding(int grid_h, int grid_w, int channels) {
    Tensor pe({grid_h * grid_w, channels});
    const int half = channels / 2;
    const double two_pi = 2.0 * std::numbers::pi;
    for (int y = 0; y < grid_h; ++y) {
        for (int x = 0; x < grid_w; ++x) {
            const double pos[2] = {(y + 0.5) / grid_h * two_pi, (x + 0.5) / grid_w * two_pi};
            double* row = pe.ptr() + static_cast<std::size_t>(y * grid_w + x) * channels;
            for (int axis = 0; axis < 2; ++axis) {
                for (int j = 0; j < half; ++j) {
                    const double freq = std::pow(10000.0, 2.0 * (j / 2) / half);
                    const double v = pos[axis] / freq;
                    row[axis * half + j] = (j % 2 == 0) ? std::sin(v) : std::cos(v);
                }
            }
        }
    }
    return pe;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    std::uint64_t stream = seed * 0x2545f4914f6cdd1dULL + 17;
    const int c = config_.embed_dim;
    const int l = config_.num_landmarks;

    build_backbone(stream);

    // Local refinement heads: 1×1 convolutions on f.
    params_.add("score.w", normal_init({l, c, 1, 1}, 0.01, stream));
    params_.add("score.b", Tensor({l}));
    params_.add("offset.w", normal_init({2 * l, c, 1, 1}, 0.01, stream));
    params_.add("offset.b", Tensor({2 * l}));

    // Global localization: landmark queries and a stack of decoder layers.
    params_.add("queries", normal_init({l, c}, 1.0, stream));
    const double lin = std::sqrt(6.0 / (2.0 * c));
    const double ffn_bound = std::sqrt(6.0 / (3.0 * c));
    for (int i = 0; i < config_.num_decoder_layers; ++i) {
        const std::string pre = "decoder." + std::to_string(i) + ".";
        for (const char* block : {"self", "cross"}) {
            for (const char* proj : {"q", "k", "v", "o"}) {
                params_.add(pre + block + "." + proj + ".w", uniform_init({c, c}, lin, stream));
                params_.add(pre + block + "." + proj + ".b", Tensor({c}));
            }
        }
        params_.add(pre + "ffn.w1", uniform_init({2 * c, c}, ffn_bound, stream));
        params_.add(pre + "ffn.b1", Tensor({2 * c}));
        params_.add(pre + "ffn.w2", uniform_init({c, 2 * c}, ffn_bound, stream));
        params_.add(pre + "ffn.b2", Tensor({c}));
        for (const char* norm : {"norm1", "norm2", "norm3"}) {
            params_.add(pre + norm + ".g", Tensor({c}, 1.0));
            params_.add(pre + norm + ".b", Tensor({c}));
        }
    }
    params_.add("coord.w1", uniform_init({c, c}, lin, stream));
    params_.add("coord.b1", Tensor({c}));
    params_.add("coord.w2", uniform_init({2, c}, std::sqrt(6.0 / (c + 2.0)), stream));
    params_.add("coord.b2", Tensor({2}));

    if (config_.domain_head) {
        params_.add("domain.fc.w", uniform_init({c, c}, lin, stream));
        params_.add("domain.fc.b", Tensor({c}));
        params_.add("domain.out.w", uniform_init({1, c}, std::sqrt(6.0 / (c + 1.0)), stream));
        params_.add("domain.out.b", Tensor({1}));
    }

    position_encoding_ = sine_position_encoding(config_.grid_height(), config_.grid_width(), c);
}

void Model::build_backbone(std::uint64_t& stream) {
    const int c = config_.embed_dim;
    const int w = config_.backbone_width;
    auto conv = [&](const std::string& name, int cout, int cin, int k) {
        params_.add(name + ".w", normal_init({cout, cin, k, k}, std::sqrt(2.0 / (cin * k * k)), stream));
        params_.add(name + ".b", Tensor({cout}));
    };
    if (config_.backbone == BackboneKind::tiny) {
        // conv blocks: one at full resolution, one per 2× downsampling, one projecting to C.
        const int downs = log2_int(config_.stride);
        backbone_blocks_ = std::max(4, downs + 2);
        int cin = 1;
        for (int b = 0; b < backbone_blocks_; ++b) {
            const bool last = b == backbone_blocks_ - 1;
            const int cout = last ? c : (b == 0 ? w : 2 * w);
            conv("backbone." + std::to_string(b), cout, cin, 3);
            cin = cout;
        }
        return;
    }
    // Residual encoder: stem (÷2) then four stages (÷2 each) to stride 32, then
    // deconvolutions back up to the configured stride.
    conv("backbone.stem", w, 1, 3);
    int cin = w;
    for (int s = 0; s < 4; ++s) {
        const int cout = w << std::min(s + 1, 3);
        const std::string pre = "backbone.stage" + std::to_string(s);
        conv(pre + ".conv1", cout, cin, 3);
        conv(pre + ".conv2", cout, cout, 3);
        conv(pre + ".skip", cout, cin, 1);
        cin = cout;
    }
    const int ups = 5 - log2_int(config_.stride);
    for (int u = 0; u < ups; ++u) {
        const int cout = 2 * w;
        const std::string name = "backbone.up" + std::to_string(u);
        params_.add(name + ".w", normal_init({cin, cout, 4, 4}, std::sqrt(2.0 / (cin * 4.0)), stream));
        params_.add(name + ".b", Tensor({cout}));
        cin = cout;
    }
    conv("backbone.proj", c, cin, 1);
    backbone_blocks_ = ups;
}

int Model::p(const std::string& name) const {
    const int idx = params_.find(name);
    if (idx < 0) throw InputError("model has no parameter named " + name);
    return idx;
}

Var Model::backbone(Graph& g, Var x) const {
    auto conv = [&](Var in, const std::string& name, int stride, int pad) {
        return g.conv2d(in, g.parameter(params_, p(name + ".w")), g.parameter(params_, p(name + ".b")), stride, pad);
    };
    if (config_.backbone == BackboneKind::tiny) {
        int remaining = log2_int(config_.stride);
        Var h = x;
        for (int b = 0; b < backbone_blocks_; ++b) {
            const bool down = b > 0 && remaining > 0;
            if (down) --remaining;
            h = g.relu(conv(h, "backbone." + std::to_string(b), down ? 2 : 1, 1));
        }
        return h;
    }
    Var h = g.relu(conv(x, "backbone.stem", 2, 1));
    for (int s = 0; s < 4; ++s) {
        const std::string pre = "backbone.stage" + std::to_string(s);
        Var a = g.relu(conv(h, pre + ".conv1", 2, 1));
        a = conv(a, pre + ".conv2", 1, 1);
        h = g.relu(g.add(a, conv(h, pre + ".skip", 2, 0)));
    }
    for (int u = 0; u < backbone_blocks_; ++u) {
        const std::string name = "backbone.up" + std::to_string(u);
        h = g.relu(g.conv_transpose2d(h, g.parameter(params_, p(name + ".w")), g.parameter(params_, p(name + ".b")), 2, 1));
    }
    return g.relu(conv(h, "backbone.proj", 1, 0));
}

Var Model::attention_block(Graph& g, const std::string& prefix, Var query, Var key, Var value) const {
    auto lin = [&](Var in, const std::string& name) {
        return g.linear(in, g.parameter(params_, p(prefix + name + ".w")), g.parameter(params_, p(prefix + name + ".b")));
    };
    Var attended = g.attention(lin(query, ".q"), lin(key, ".k"), lin(value, ".v"), config_.num_heads);
    return lin(attended, ".o");
}

Var Model::decoder(Graph& g, Var features) const {
    auto param = [&](const std::string& name) { return g.parameter(params_, p(name)); };
    Var memory = g.to_tokens(features);
    Var keys = g.add_constant(memory, position_encoding_);
    Var tgt = param("queries");
    for (int i = 0; i < config_.num_decoder_layers; ++i) {
        const std::string pre = "decoder." + std::to_string(i) + ".";
        auto norm = [&](Var x, const char* n) {
            return g.layer_norm(x, param(pre + n + ".g"), param(pre + n + ".b"));
        };
        tgt = norm(g.add(tgt, attention_block(g, pre + "self", tgt, tgt, tgt)), "norm1");
        tgt = norm(g.add(tgt, attention_block(g, pre + "cross", tgt, keys, memory)), "norm2");
        Var ff = g.relu(g.linear(tgt, param(pre + "ffn.w1"), param(pre + "ffn.b1")));
        ff = g.linear(ff, param(pre + "ffn.w2"), param(pre + "ffn.b2"));
        tgt = norm(g.add(tgt, ff), "norm3");
    }
    Var h = g.relu(g.linear(tgt, param("coord.w1"), param("coord.b1")));
    return g.sigmoid(g.linear(h, param("coord.w2"), param("coord.b2")));
}

Var Model::domain_head(Graph& g, Var features) const {
    if (!config_.domain_head) throw InputError("model was built without a domain head");
    auto param = [&](const std::string& name) { return g.parameter(params_, p(name)); };
    Var pooled = g.global_avg_pool(g.grl(features));
    Var h = g.relu(g.linear(pooled, param("domain.fc.w"), param("domain.fc.b")));
    return g.sigmoid(g.linear(h, param("domain.out.w"), param("domain.out.b")));
}

ModelVars Model::forward(Graph& g, const Image& image, bool with_domain) const {
    if (image.width != config_.input_width || image.height != config_.input_height)
        throw InputError("image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                         ", model expects " + std::to_string(config_.input_width) + "x" +
                         std::to_string(config_.input_height));
    Tensor input({1, image.height, image.width});
    for (std::size_t i = 0; i < input.size(); ++i) input.data[i] = (image.pixels[i] - kPixelMean) * kPixelScale;

    ModelVars out;
    out.features = backbone(g, g.constant(std::move(input)));
    out.scores = g.conv2d(out.features, g.parameter(params_, p("score.w")), g.parameter(params_, p("score.b")), 1, 0);
    out.offsets = g.conv2d(out.features, g.parameter(params_, p("offset.w")), g.parameter(params_, p("offset.b")), 1, 0);
    out.coarse = decoder(g, out.features);
    if (with_domain && config_.domain_head) out.domain_prob = domain_head(g, out.features);
    return out;
}

ModelOutput Model::forward(const Image& image) const {
    Graph g(false);
    const ModelVars vars = forward(g, image, false);
    const int l = config_.num_landmarks;
    const int gh = config_.grid_height(), gw = config_.grid_width();
    ModelOutput out;
    out.features = g.value(vars.features);
    out.coarse_coords = g.value(vars.coarse);
    out.score_maps = g.value(vars.scores);
    out.score_maps.shape = {l, gh, gw};
    out.offset_maps = g.value(vars.offsets);
    out.offset_maps.shape = {l, 2, gh, gw};
    return out;
}

Prediction Model::predict(const Image& image) const {
    return decode_prediction(forward(image), config_.stride, config_.input_width, config_.input_height);
}

double Model::domain_classify(const Tensor& features) const {
    Graph g(false);
    Var prob = domain_head(g, g.constant(features));
    return g.value(prob).data[0];
}

Model build_model(const ModelConfig& config, std::uint64_t seed) { return Model(config, seed); }

GridIndex project_to_grid(Point coord_px, int stride, int grid_h, int grid_w) {
    auto cell = [stride](double v, int n) {
        const double f = std::floor(v / stride);
        if (!(f >= 0.0)) return 0;  // also catches NaN
        if (f > n - 1) return n - 1;
        return static_cast<int>(f);
    };
    return {cell(coord_px.x, grid_w), cell(coord_px.y, grid_h)};
}

Prediction decode_prediction(const ModelOutput& output, int stride, int input_width, int input_height) {
    const int l = output.score_maps.dim(0);
    const int gh = output.score_maps.dim(1), gw = output.score_maps.dim(2);
    const std::size_t plane = static_cast<std::size_t>(gh) * gw;
    Prediction pred;
    pred.coords.resize(static_cast<std::size_t>(l));
    pred.confidences.resize(static_cast<std::size_t>(l));
    for (int i = 0; i < l; ++i) {
        const Point coarse{output.coarse_coords.data[2 * i] * input_width,
                           output.coarse_coords.data[2 * i + 1] * input_height};
        const GridIndex g = project_to_grid(coarse, stride, gh, gw);
        const std::size_t cell = static_cast<std::size_t>(g.gy) * gw + g.gx;
        const double ox = output.offset_maps.data[(2 * static_cast<std::size_t>(i)) * plane + cell];
        const double oy = output.offset_maps.data[(2 * static_cast<std::size_t>(i) + 1) * plane + cell];
        pred.coords[i] = {std::clamp((g.gx + ox + 0.5) * stride, 0.0, static_cast<double>(input_width)),
                          std::clamp((g.gy + oy + 0.5) * stride, 0.0, static_cast<double>(input_height))};
        pred.confidences[i] = std::clamp(output.score_maps.data[static_cast<std::size_t>(i) * plane + cell], 0.0, 1.0);
    }
    return pred;
}

Prediction decode_argmax(const ModelOutput& output, int stride, int input_width, int input_height) {
    const int l = output.score_maps.dim(0);
    const int gh = output.score_maps.dim(1), gw = output.score_maps.dim(2);
    const std::size_t plane = static_cast<std::size_t>(gh) * gw;
    Prediction pred;
    for (int i = 0; i < l; ++i) {
        const double* s = output.score_maps.ptr() + static_cast<std::size_t>(i) * plane;
        const std::size_t best = static_cast<std::size_t>(std::max_element(s, s + plane) - s);
        const int gx = static_cast<int>(best % gw), gy = static_cast<int>(best / gw);
        const double ox = output.offset_maps.data[(2 * static_cast<std::size_t>(i)) * plane + best];
        const double oy = output.offset_maps.data[(2 * static_cast<std::size_t>(i) + 1) * plane + best];
        pred.coords.push_back({std::clamp((gx + ox + 0.5) * stride, 0.0, static_cast<double>(input_width)),
                               std::clamp((gy + oy + 0.5) * stride, 0.0, static_cast<double>(input_height))});
        pred.confidences.push_back(std::clamp(s[best], 0.0, 1.0));
    }
    return pred;
}

}  // namespace udalm
