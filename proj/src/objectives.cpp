#include "udalm/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "udalm/error.hpp"

namespace udalm {

namespace {

constexpr double kProbEps = 1e-7;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_mask(const LandmarkMask& mask, std::size_t landmarks) {
    if (mask.size() != landmarks)
        throw InputError("mask has " + std::to_string(mask.size()) + " entries, expected " + std::to_string(landmarks));
}

}  // namespace

int count_selected(const LandmarkMask& mask) {
    return static_cast<int>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

void LossWeights::validate() const {
    if (!(lambda_s >= 0.0) || !(lambda_o >= 0.0) || !(lambda_d >= 0.0))
        throw ConfigError("loss weights must be non-negative");
}

EncodedTargets encode_targets(std::span<const Point> landmarks_px, int grid_h, int grid_w, int stride, double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("target sigma must be positive");
    const int l = static_cast<int>(landmarks_px.size());
    const std::size_t plane = static_cast<std::size_t>(grid_h) * grid_w;
    EncodedTargets t;
    t.score.values = Tensor({l, grid_h, grid_w});
    t.score.support.assign(static_cast<std::size_t>(l) * plane, 0);
    t.offset.values = Tensor({l, 2, grid_h, grid_w});
    t.coords_norm = Tensor({l, 2});
    const int radius = static_cast<int>(std::floor(3.0 * sigma));
    const double denom = 2.0 * sigma * sigma;
    for (int i = 0; i < l; ++i) {
        const double cx = landmarks_px[i].x / stride;
        const double cy = landmarks_px[i].y / stride;
        t.coords_norm.data[2 * i] = landmarks_px[i].x / (static_cast<double>(grid_w) * stride);
        t.coords_norm.data[2 * i + 1] = landmarks_px[i].y / (static_cast<double>(grid_h) * stride);
        const int gx0 = std::clamp(static_cast<int>(std::floor(cx)), 0, grid_w - 1);
        const int gy0 = std::clamp(static_cast<int>(std::floor(cy)), 0, grid_h - 1);
        for (int gy = std::max(0, gy0 - radius); gy <= std::min(grid_h - 1, gy0 + radius); ++gy) {
            for (int gx = std::max(0, gx0 - radius); gx <= std::min(grid_w - 1, gx0 + radius); ++gx) {
                const double dx = gx + 0.5 - cx;
                const double dy = gy + 0.5 - cy;
                const double v = std::exp(-(dx * dx + dy * dy) / denom);
                if (!(v > 0.0)) continue;
                const std::size_t cell = static_cast<std::size_t>(gy) * grid_w + gx;
                t.score.values.data[static_cast<std::size_t>(i) * plane + cell] = v;
                t.score.support[static_cast<std::size_t>(i) * plane + cell] = 1;
                t.offset.values.data[(2 * static_cast<std::size_t>(i)) * plane + cell] = -dx;
                t.offset.values.data[(2 * static_cast<std::size_t>(i) + 1) * plane + cell] = -dy;
            }
        }
    }
    return t;
}

double loss_coord(std::span<const double> pred, std::span<const double> gt, const LandmarkMask& mask,
                  std::span<double> grad) {
    if (pred.size() != gt.size() || pred.size() != 2 * mask.size()) throw InputError("loss_coord shape mismatch");
    const int n = count_selected(mask);
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    if (n == 0) return 0.0;
    const double norm = 1.0 / (2.0 * n);
    double sum = 0.0;
    for (std::size_t l = 0; l < mask.size(); ++l) {
        if (!mask[l]) continue;
        for (std::size_t a = 0; a < 2; ++a) {
            const double d = pred[2 * l + a] - gt[2 * l + a];
            sum += std::abs(d);
            if (!grad.empty()) grad[2 * l + a] = norm * sign(d);
        }
    }
    return sum * norm;
}

double loss_score(std::span<const double> pred, const ScoreTarget& target, const LandmarkMask& mask,
                  std::span<double> grad) {
    const std::size_t l = mask.size();
    if (pred.size() != target.values.size() || target.values.dim(0) != static_cast<int>(l))
        throw InputError("loss_score shape mismatch");
    const std::size_t plane = pred.size() / std::max<std::size_t>(l, 1);
    const int n = count_selected(mask);
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    if (n == 0) return 0.0;
    const double norm = 1.0 / (static_cast<double>(n) * plane);
    double sum = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
        if (!mask[i]) continue;
        for (std::size_t c = i * plane; c < (i + 1) * plane; ++c) {
            const double d = pred[c] - target.values.data[c];
            sum += d * d;
            if (!grad.empty()) grad[c] = 2.0 * norm * d;
        }
    }
    return sum * norm;
}

double loss_offset(std::span<const double> pred, const OffsetTarget& target, const ScoreTarget& support,
                   const LandmarkMask& mask, std::span<double> grad) {
    const std::size_t l = mask.size();
    if (pred.size() != target.values.size() || support.support.size() * 2 != pred.size())
        throw InputError("loss_offset shape mismatch");
    check_mask(mask, static_cast<std::size_t>(support.values.dim(0)));
    const std::size_t plane = support.support.size() / std::max<std::size_t>(l, 1);
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    std::size_t cells = 0;
    for (std::size_t i = 0; i < l; ++i)
        if (mask[i])
            for (std::size_t c = 0; c < plane; ++c) cells += support.support[i * plane + c];
    if (cells == 0) return 0.0;
    const double norm = 1.0 / (2.0 * static_cast<double>(cells));
    double sum = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
        if (!mask[i]) continue;
        for (std::size_t c = 0; c < plane; ++c) {
            if (!support.support[i * plane + c]) continue;
            for (std::size_t a = 0; a < 2; ++a) {
                const std::size_t idx = (2 * i + a) * plane + c;
                const double d = pred[idx] - target.values.data[idx];
                sum += std::abs(d);
                if (!grad.empty()) grad[idx] = norm * sign(d);
            }
        }
    }
    return sum * norm;
}

double loss_domain(double prob, int label, double* grad) {
    if (label != 0 && label != 1) throw InputError("domain label must be 0 or 1");
    const double clamped = std::clamp(prob, kProbEps, 1.0 - kProbEps);
    const bool inside = clamped == prob;
    if (grad) *grad = inside ? (label ? -1.0 / clamped : 1.0 / (1.0 - clamped)) : 0.0;
    return label ? -std::log(clamped) : -std::log(1.0 - clamped);
}

double loss_domain(std::span<const double> probs, std::span<const int> labels, std::span<double> grad) {
    if (probs.size() != labels.size() || probs.empty()) throw InputError("loss_domain batch mismatch");
    const double inv = 1.0 / static_cast<double>(probs.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double g = 0.0;
        sum += loss_domain(probs[i], labels[i], &g);
        if (!grad.empty()) grad[i] = g * inv;
    }
    return sum * inv;
}

BaseLossTerms loss_base_terms(const ModelOutput& output, const EncodedTargets& targets, const LandmarkMask& mask) {
    check_mask(mask, static_cast<std::size_t>(output.score_maps.dim(0)));
    BaseLossTerms t;
    t.score = loss_score(output.score_maps.span(), targets.score, mask);
    t.offset = loss_offset(output.offset_maps.span(), targets.offset, targets.score, mask);
    t.coord = loss_coord(output.coarse_coords.span(), targets.coords_norm.span(), mask);
    return t;
}

double loss_base(const ModelOutput& output, const EncodedTargets& targets, const LandmarkMask& mask,
                 const LossWeights& weights) {
    return loss_base_terms(output, targets, mask).weighted(weights);
}

double loss_base_unmasked(const ModelOutput& output, const EncodedTargets& targets, const LossWeights& weights) {
    const Tensor& s = output.score_maps;
    double score = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double d = s.data[i] - targets.score.values.data[i];
        score += d * d;
    }
    score /= static_cast<double>(s.size());

    const std::size_t plane = targets.score.support.size() / static_cast<std::size_t>(s.dim(0));
    double offset = 0.0;
    std::size_t terms = 0;
    for (std::size_t idx = 0; idx < output.offset_maps.size(); ++idx) {
        const std::size_t landmark = idx / (2 * plane);
        const std::size_t cell = idx % plane;
        if (!targets.score.support[landmark * plane + cell]) continue;
        offset += std::abs(output.offset_maps.data[idx] - targets.offset.values.data[idx]);
        ++terms;
    }
    offset = terms ? offset / static_cast<double>(terms) : 0.0;

    double coord = 0.0;
    for (std::size_t i = 0; i < output.coarse_coords.size(); ++i)
        coord += std::abs(output.coarse_coords.data[i] - targets.coords_norm.data[i]);
    coord /= static_cast<double>(output.coarse_coords.size());
    return weights.lambda_s * score + weights.lambda_o * offset + coord;
}

double loss_base_batch(std::span<const BatchItem> batch, const LossWeights& weights) {
    double sum = 0.0;
    int used = 0;
    for (const BatchItem& item : batch) {
        if (count_selected(*item.mask) == 0) continue;
        sum += loss_base(*item.output, *item.targets, *item.mask, weights);
        ++used;
    }
    return used ? sum / used : 0.0;
}

Var base_loss_node(Graph& graph, const ModelVars& vars, const EncodedTargets& targets, const LandmarkMask& mask,
                   const LossWeights& weights) {
    const Tensor& scores = graph.value(vars.scores);
    const Tensor& offsets = graph.value(vars.offsets);
    const Tensor& coarse = graph.value(vars.coarse);
    check_mask(mask, static_cast<std::size_t>(coarse.dim(0)));

    auto g_score = std::make_shared<Tensor>(scores.shape);
    auto g_offset = std::make_shared<Tensor>(offsets.shape);
    auto g_coord = std::make_shared<Tensor>(coarse.shape);
    const double v = weights.lambda_s * loss_score(scores.span(), targets.score, mask, g_score->span()) +
                     weights.lambda_o * loss_offset(offsets.span(), targets.offset, targets.score, mask, g_offset->span()) +
                     loss_coord(coarse.span(), targets.coords_norm.span(), mask, g_coord->span());
    const double ls = weights.lambda_s, lo = weights.lambda_o;
    const Var parents[] = {vars.scores, vars.offsets, vars.coarse};
    return graph.custom(Tensor({1}, v), parents,
                        [=, s = vars.scores, o = vars.offsets, c = vars.coarse](Graph& g, const Tensor& dy) {
                            const double up = dy.data[0];
                            auto accumulate = [&](Var var, const Tensor& local, double w) {
                                if (!g.requires_grad(var)) return;
                                Tensor& d = g.grad_buffer(var);
                                for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += up * w * local.data[i];
                            };
                            accumulate(s, *g_score, ls);
                            accumulate(o, *g_offset, lo);
                            accumulate(c, *g_coord, 1.0);
                        });
}

Var domain_loss_node(Graph& graph, Var prob, int label) {
    double local = 0.0;
    const double v = loss_domain(graph.value(prob).data.at(0), label, &local);
    const Var parents[] = {prob};
    return graph.custom(Tensor({1}, v), parents, [prob, local](Graph& g, const Tensor& dy) {
        g.grad_buffer(prob).data[0] += dy.data[0] * local;
    });
}

}  // namespace udalm
