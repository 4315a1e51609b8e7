#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "udalm/error.hpp"
#include "udalm/objectives.hpp"

using namespace udalm;

namespace {

ModelOutput output_from_targets(const EncodedTargets& t) {
    ModelOutput out;
    out.coarse_coords = t.coords_norm;
    out.score_maps = t.score.values;
    out.offset_maps = t.offset.values;
    return out;
}

}  // namespace

TEST_CASE("encode_targets peak and offset examples") {
    const Point lm[] = {{18.0, 10.0}};
    const EncodedTargets t = encode_targets(lm, 200, 160, 4, 1.5);
    const std::size_t plane = 200 * 160;
    const std::size_t peak = 2 * 160 + 4;
    CHECK(t.score.values.data[peak] == 1.0);
    for (double v : t.score.values.data) CHECK(v <= 1.0);
    CHECK(t.offset.values.data[peak] == 0.0);
    CHECK(t.offset.values.data[plane + peak] == 0.0);
    // Neighbour (5,2): offset (4.5 − 5.5, 0) decodes back to 18.
    const std::size_t right = 2 * 160 + 5;
    CHECK(t.offset.values.data[right] == doctest::Approx(-1.0));
    CHECK(t.offset.values.data[plane + right] == doctest::Approx(0.0));
    CHECK((5 + t.offset.values.data[right] + 0.5) * 4 == doctest::Approx(18.0));
    CHECK(t.coords_norm.data[0] == doctest::Approx(18.0 / 640.0));
    CHECK(t.coords_norm.data[1] == doctest::Approx(10.0 / 800.0));
}

TEST_CASE("score target is symmetric about a cell-centered landmark") {
    const Point lm[] = {{34.0, 30.0}};  // grid (8.5, 7.5): center of cell (8,7)
    const EncodedTargets t = encode_targets(lm, 16, 16, 4, 1.0);
    auto at = [&](int x, int y) { return t.score.values.data[static_cast<std::size_t>(y * 16 + x)]; };
    for (int d = 1; d <= 3; ++d) {
        CHECK(at(8 + d, 7) == doctest::Approx(at(8 - d, 7)).epsilon(1e-15));
        CHECK(at(8, 7 + d) == doctest::Approx(at(8, 7 - d)).epsilon(1e-15));
        CHECK(at(8 + d, 7) == doctest::Approx(std::exp(-d * d / 2.0)));
    }
}

TEST_CASE("score support is limited to the truncated window") {
    const Point lm[] = {{34.0, 30.0}};
    for (double sigma : {1.0, 1.5}) {
        const EncodedTargets t = encode_targets(lm, 16, 16, 4, sigma);
        const int half = static_cast<int>(std::floor(3 * sigma));
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                const bool inside = std::abs(x - 8) <= half && std::abs(y - 7) <= half;
                CHECK(static_cast<bool>(t.score.support[static_cast<std::size_t>(y * 16 + x)]) == inside);
            }
    }
    const EncodedTargets narrow = encode_targets(lm, 16, 16, 4, 0.25);
    int count = 0;
    for (auto s : narrow.score.support) count += s;
    CHECK(count == 1);
}

TEST_CASE("offset targets decode exactly at every supported cell") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 63.999);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Point> lms{{u(rng), u(rng)}, {u(rng), u(rng)}};
        const EncodedTargets t = encode_targets(lms, 16, 16, 4, 1.5);
        for (int l = 0; l < 2; ++l)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) {
                    const std::size_t cell = static_cast<std::size_t>(l * 256 + y * 16 + x);
                    if (!t.score.support[cell]) continue;
                    const std::size_t ox = static_cast<std::size_t>(l * 512 + y * 16 + x);
                    CHECK(std::abs((x + t.offset.values.data[ox] + 0.5) * 4 - lms[static_cast<std::size_t>(l)].x) < 1e-9);
                    CHECK(std::abs((y + t.offset.values.data[ox + 256] + 0.5) * 4 - lms[static_cast<std::size_t>(l)].y) < 1e-9);
                }
    }
}

TEST_CASE("encode then decode recovers landmark positions") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Point> lms;
        for (int l = 0; l < 4; ++l) lms.push_back({u(rng) * 64.0, u(rng) * 48.0});
        const EncodedTargets t = encode_targets(lms, 12, 16, 4, 1.0);
        const Prediction p = decode_prediction(output_from_targets(t), 4, 64, 48);
        for (std::size_t l = 0; l < lms.size(); ++l) {
            CHECK(std::abs(p.coords[l].x - lms[l].x) < 1e-6);
            CHECK(std::abs(p.coords[l].y - lms[l].y) < 1e-6);
        }
    }
}

TEST_CASE("loss_coord examples") {
    const std::vector<double> gt{0.0, 0.0, 0.0, 0.0};
    const std::vector<double> pred{0.1, 0.1, 0.3, 0.3};
    CHECK(loss_coord(gt, gt, all_ones_mask(2)) == 0.0);
    CHECK(loss_coord(pred, gt, all_ones_mask(2)) == doctest::Approx(0.2));
    CHECK(loss_coord(pred, gt, LandmarkMask{1, 0}) == doctest::Approx(0.1));
    CHECK(loss_coord(pred, gt, all_zeros_mask(2)) == 0.0);
}

TEST_CASE("loss_score examples") {
    const Point lm[] = {{10.0, 6.0}, {3.0, 20.0}};
    const EncodedTargets t = encode_targets(lm, 8, 8, 4, 1.0);
    Buffer pred = t.score.values.data;
    CHECK(loss_score(pred, t.score, all_ones_mask(2)) == 0.0);
    for (double& v : pred) v += 0.1;
    CHECK(loss_score(pred, t.score, all_ones_mask(2)) == doctest::Approx(0.01));
    CHECK(loss_score(pred, t.score, all_zeros_mask(2)) == 0.0);
}

TEST_CASE("loss_offset examples") {
    const Point lm[] = {{10.0, 6.0}};
    const EncodedTargets t = encode_targets(lm, 8, 8, 4, 1.0);
    Buffer pred = t.offset.values.data;
    for (std::size_t i = 0; i < 64; ++i)
        if (!t.score.support[i]) {
            pred[i] = 1e3;
            pred[64 + i] = -7.0;
        }
    CHECK(loss_offset(pred, t.offset, t.score, all_ones_mask(1)) == 0.0);
    for (std::size_t i = 0; i < 64; ++i)
        if (t.score.support[i]) {
            pred[i] += 0.5;
            pred[64 + i] += 0.5;
        }
    CHECK(loss_offset(pred, t.offset, t.score, all_ones_mask(1)) == doctest::Approx(0.5));
    CHECK(loss_offset(pred, t.offset, t.score, all_zeros_mask(1)) == 0.0);
}

TEST_CASE("loss_domain examples") {
    CHECK(loss_domain(0.5, 0) == doctest::Approx(std::log(2.0)));
    CHECK(loss_domain(0.5, 1) == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(loss_domain(0.9, 1) == doctest::Approx(0.1054).epsilon(1e-3));
    CHECK(loss_domain(1.0, 1) < 1e-6);
    CHECK(loss_domain(0.0, 0) < 1e-6);
    // Clamped, so saturated wrong answers stay finite.
    CHECK(std::isfinite(loss_domain(0.0, 1)));
    CHECK(loss_domain(0.0, 1) == doctest::Approx(-std::log(1e-7)));
    const std::vector<double> probs{0.9, 0.5};
    const std::vector<int> labels{1, 0};
    CHECK(loss_domain(probs, labels) == doctest::Approx((-std::log(0.9) + std::log(2.0)) / 2));
}

TEST_CASE("loss gradients match central differences") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Point lm[] = {{10.3, 6.7}, {22.1, 17.9}};
    const EncodedTargets t = encode_targets(lm, 8, 8, 4, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const LandmarkMask mask{1, static_cast<std::uint8_t>(trial % 2)};
        std::vector<double> gt(4), x(4);
        for (int i = 0; i < 4; ++i) {
            gt[static_cast<std::size_t>(i)] = u(rng);
            x[static_cast<std::size_t>(i)] = gt[static_cast<std::size_t>(i)] + (u(rng) > 0 ? 0.3 : -0.3) + 0.1 * u(rng);
        }
        CHECK(testutil::gradient_check([&](std::span<const double> p, std::span<double> g) { return loss_coord(p, gt, mask, g); }, x) < 1e-4);

        std::vector<double> s(t.score.values.size());
        for (double& v : s) v = u(rng);
        CHECK(testutil::gradient_check([&](std::span<const double> p, std::span<double> g) { return loss_score(p, t.score, mask, g); }, s) < 1e-4);

        std::vector<double> o(t.offset.values.data.begin(), t.offset.values.data.end());
        for (double& v : o) v += (u(rng) > 0 ? 0.2 : -0.2) + 0.1 * u(rng);
        CHECK(testutil::gradient_check([&](std::span<const double> p, std::span<double> g) { return loss_offset(p, t.offset, t.score, mask, g); }, o) < 1e-4);

        const double prob = 0.05 + 0.9 * (u(rng) + 1) / 2;
        const int label = trial % 2;
        CHECK(testutil::gradient_check([&](std::span<const double> p, std::span<double> g) {
            double gr = 0.0;
            const double v = loss_domain(p[0], label, g.empty() ? nullptr : &gr);
            if (!g.empty()) g[0] = gr;
            return v;
        }, {prob}) < 1e-4);
    }
}

TEST_CASE("loss_base combines the terms with the configured weights") {
    BaseLossTerms terms{0.01, 0.5, 0.2};
    CHECK(terms.weighted(LossWeights{}) == doctest::Approx(1.21));
}

TEST_CASE("all-ones mask equals the unmasked code path") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Point> lm{{20.0 + 10 * u(rng), 12.0 + 10 * u(rng)}, {40.0 + 10 * u(rng), 44.0 + 10 * u(rng)}, {9.0, 50.0}};
        const EncodedTargets t = encode_targets(lm, 16, 16, 4, 1.0);
        ModelOutput out = output_from_targets(t);
        for (double& v : out.coarse_coords.data) v += 0.1 * u(rng);
        for (double& v : out.score_maps.data) v += u(rng);
        for (double& v : out.offset_maps.data) v += u(rng);
        const double masked = loss_base(out, t, all_ones_mask(3), LossWeights{});
        const double plain = loss_base_unmasked(out, t, LossWeights{});
        CHECK(std::abs(masked - plain) <= 1e-12);
    }
}

TEST_CASE("masking keeps only the selected landmarks' contributions") {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<Point> lm{{20.0, 12.0}, {40.0, 44.0}, {9.0, 50.0}};
    const EncodedTargets t = encode_targets(lm, 16, 16, 4, 1.0);
    ModelOutput out = output_from_targets(t);
    for (double& v : out.coarse_coords.data) v += 0.1 * u(rng);
    for (double& v : out.score_maps.data) v += u(rng);
    // Perturb only landmark 2; masking it out must hide the change.
    const BaseLossTerms before = loss_base_terms(out, t, LandmarkMask{1, 1, 0});
    for (std::size_t i = 2 * 256; i < 3 * 256; ++i) out.score_maps.data[i] += 5.0;
    out.coarse_coords.data[4] += 0.3;
    const BaseLossTerms after = loss_base_terms(out, t, LandmarkMask{1, 1, 0});
    CHECK(before.score == after.score);
    CHECK(before.coord == after.coord);
    // Per-landmark masked-mean: the two-landmark loss is the mean of the singles.
    const double a = loss_base_terms(out, t, LandmarkMask{1, 0, 0}).score;
    const double b = loss_base_terms(out, t, LandmarkMask{0, 1, 0}).score;
    CHECK(after.score == doctest::Approx((a + b) / 2));
}

TEST_CASE("batch reduction skips samples with empty masks") {
    std::vector<Point> lm{{20.0, 12.0}};
    const EncodedTargets t = encode_targets(lm, 8, 8, 4, 1.0);
    ModelOutput out = output_from_targets(t);
    for (double& v : out.score_maps.data) v += 0.2;
    const LandmarkMask on = all_ones_mask(1), off = all_zeros_mask(1);
    const BatchItem one[] = {{&out, &t, &on}};
    const BatchItem mixed[] = {{&out, &t, &on}, {&out, &t, &off}};
    const BatchItem none[] = {{&out, &t, &off}};
    CHECK(loss_base_batch(mixed, LossWeights{}) == loss_base_batch(one, LossWeights{}));
    CHECK(loss_base_batch(none, LossWeights{}) == 0.0);
}

TEST_CASE("graph loss nodes match the plain losses and zero masks give zero gradients") {
    ModelConfig mc;
    mc.num_landmarks = 2;
    mc.embed_dim = 8;
    mc.num_decoder_layers = 1;
    mc.num_heads = 2;
    mc.backbone = BackboneKind::tiny;
    mc.input_width = 32;
    mc.input_height = 32;
    mc.backbone_width = 4;
    const Model model(mc, 3);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(32, 32);
    for (double& v : img.pixels) v = u(rng);
    std::vector<Point> lm{{10.0, 12.0}, {25.0, 5.0}};
    const EncodedTargets t = encode_targets(lm, 8, 8, 4, 1.0);

    Graph g;
    const ModelVars vars = model.forward(g, img, true);
    const Var base = base_loss_node(g, vars, t, all_ones_mask(2), LossWeights{});
    const double expected = loss_base(model.forward(img), t, all_ones_mask(2), LossWeights{});
    CHECK(g.value(base).data[0] == doctest::Approx(expected).epsilon(1e-12));

    Graph g0;
    const ModelVars v0 = model.forward(g0, img, true);
    const Var zero = base_loss_node(g0, v0, t, all_zeros_mask(2), LossWeights{});
    CHECK(g0.value(zero).data[0] == 0.0);
    g0.backward(zero);
    std::vector<Tensor> grads;
    for (const Parameter& p : model.parameters().all()) grads.emplace_back(p.value.shape);
    g0.accumulate_parameter_grads(grads);
    for (const Tensor& gr : grads)
        for (double v : gr.data) CHECK(v == 0.0);
}

TEST_CASE("loss weights must be non-negative") {
    LossWeights w;
    w.lambda_o = -1.0;
    CHECK_THROWS_AS(w.validate(), ConfigError);
}
