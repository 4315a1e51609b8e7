#include "udalm/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "udalm/error.hpp"

namespace udalm {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int selection_count(double ratio, std::size_t m) {
    const int k = static_cast<int>(std::floor(ratio * static_cast<double>(m) + 1e-9));
    return std::max(1, std::min(k, static_cast<int>(m)));
}

std::size_t landmark_count(const std::vector<PseudoLabelRecord>& records) {
    const std::size_t l = records.front().confidences.size();
    for (const auto& r : records)
        if (r.confidences.size() != l) throw InputError("pseudo-label records disagree on landmark count");
    return l;
}

// Descending confidence for one landmark; ties resolved by image id.
std::vector<std::size_t> rank_records(const std::vector<PseudoLabelRecord>& records, std::size_t landmark) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ca = records[a].confidences[landmark], cb = records[b].confidences[landmark];
        if (ca != cb) return ca > cb;
        return records[a].image_id < records[b].image_id;
    });
    return order;
}

struct TrainItem {
    const ImageSample* sample = nullptr;
    const std::vector<Point>* landmarks = nullptr;  // null: unlabeled
    LandmarkMask mask;
    int domain_label = kSourceLabel;
};

}  // namespace

double curriculum_ratio(int round, double delta) {
    if (round < 1) throw ConfigError("curriculum round must be >= 1");
    return std::min(1.0, delta * round);
}

std::vector<PseudoLabelRecord> generate_pseudo_labels(const Model& model, const Dataset& targets, int round) {
    std::vector<PseudoLabelRecord> records;
    records.reserve(targets.size());
    for (const ImageSample& s : targets) {
        Prediction p = model.predict(s.image);
        PseudoLabelRecord r;
        r.image_id = s.id;
        r.coords = std::move(p.coords);
        r.confidences = std::move(p.confidences);
        r.round = round;
        records.push_back(std::move(r));
    }
    return records;
}

CurriculumState dynamic_thresholds(std::vector<PseudoLabelRecord>& records, double ratio) {
    if (!(ratio > 0.0)) throw ConfigError("selection ratio must be positive");
    if (records.empty()) throw InputError("dynamic_thresholds needs at least one record");
    const std::size_t l = landmark_count(records);
    const int k = selection_count(std::min(ratio, 1.0), records.size());
    CurriculumState state;
    state.ratio = ratio;
    state.thresholds.assign(l, 0.0);
    state.selected.assign(l, k);
    for (auto& r : records) r.mask.assign(l, 0);
    for (std::size_t lm = 0; lm < l; ++lm) {
        const auto order = rank_records(records, lm);
        state.thresholds[lm] = records[order[static_cast<std::size_t>(k - 1)]].confidences[lm];
        for (int i = 0; i < k; ++i) records[order[static_cast<std::size_t>(i)]].mask[lm] = 1;
    }
    return state;
}

std::vector<int> fixed_threshold_selection(std::vector<PseudoLabelRecord>& records, double tau) {
    if (records.empty()) return {};
    const std::size_t l = landmark_count(records);
    std::vector<int> counts(l, 0);
    for (auto& r : records) {
        r.mask.assign(l, 0);
        for (std::size_t lm = 0; lm < l; ++lm)
            if (r.confidences[lm] > tau) {
                r.mask[lm] = 1;
                ++counts[lm];
            }
    }
    return counts;
}

std::vector<int> image_level_selection(std::vector<PseudoLabelRecord>& records, double ratio) {
    if (records.empty()) return {};
    const std::size_t l = landmark_count(records);
    const int k = selection_count(std::min(ratio, 1.0), records.size());
    std::vector<double> mean(records.size(), 0.0);
    for (std::size_t i = 0; i < records.size(); ++i)
        mean[i] = std::accumulate(records[i].confidences.begin(), records[i].confidences.end(), 0.0) / static_cast<double>(l);
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (mean[a] != mean[b]) return mean[a] > mean[b];
        return records[a].image_id < records[b].image_id;
    });
    for (auto& r : records) r.mask.assign(l, 0);
    for (int i = 0; i < k; ++i) records[order[static_cast<std::size_t>(i)]].mask.assign(l, 1);
    return std::vector<int>(l, k);
}

CurriculumState select_pseudo_labels(std::vector<PseudoLabelRecord>& records, const CurriculumConfig& cfg, int round) {
    CurriculumState state;
    const double ratio = curriculum_ratio(round, cfg.delta);
    if (!records.empty()) {
        const std::size_t l = landmark_count(records);
        switch (cfg.selection) {
            case SelectionMode::landmark_dynamic:
                state = dynamic_thresholds(records, ratio);
                break;
            case SelectionMode::landmark_fixed:
                state.selected = fixed_threshold_selection(records, cfg.fixed_threshold);
                state.thresholds.assign(l, cfg.fixed_threshold);
                break;
            case SelectionMode::image_dynamic:
                state.selected = image_level_selection(records, ratio);
                state.thresholds.assign(l, 0.0);
                break;
            case SelectionMode::none:
                for (auto& r : records) r.mask.assign(l, 0);
                state.selected.assign(l, 0);
                state.thresholds.assign(l, 1.0);
                break;
        }
    }
    state.delta = cfg.delta;
    state.round = round;
    state.ratio = ratio;
    return state;
}

double total_loss(std::span<const TotalLossItem> batch, const LossWeights& weights) {
    if (batch.empty()) return 0.0;
    std::vector<BatchItem> base;
    std::vector<double> probs;
    std::vector<int> labels;
    for (const TotalLossItem& item : batch) {
        base.push_back({item.output, item.targets, item.mask});
        probs.push_back(item.domain_prob);
        labels.push_back(item.domain_label);
    }
    return loss_base_batch(base, weights) + weights.lambda_d * loss_domain(probs, labels);
}

Adam::Adam(const ParameterStore& params) {
    for (const Parameter& p : params.all()) {
        first.emplace_back(p.value.shape);
        second.emplace_back(p.value.shape);
    }
}

void Adam::reset() {
    steps = 0;
    for (Tensor& t : first) std::fill(t.data.begin(), t.data.end(), 0.0);
    for (Tensor& t : second) std::fill(t.data.begin(), t.data.end(), 0.0);
}

void Adam::step(ParameterStore& params, const std::vector<Tensor>& grads, double lr, const OptimizerConfig& cfg) {
    ++steps;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(steps));
    for (int i = 0; i < params.size(); ++i) {
        Tensor& value = params.at(i).value;
        const Tensor& g = grads[static_cast<std::size_t>(i)];
        Tensor& m = first[static_cast<std::size_t>(i)];
        Tensor& v = second[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < value.size(); ++j) {
            m.data[j] = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * g.data[j];
            v.data[j] = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * g.data[j] * g.data[j];
            value.data[j] -= lr * (m.data[j] / c1) / (std::sqrt(v.data[j] / c2) + cfg.eps);
        }
    }
}

Dataset prepare_for_training(const Dataset& samples, const ModelConfig& model, bool keep_labels) {
    Dataset out;
    out.reserve(samples.size());
    for (const ImageSample& s : samples) {
        ImageSample r = resize_with_labels(s, model.input_width, model.input_height);
        if (!keep_labels) r.landmarks.reset();
        out.push_back(std::move(r));
    }
    return out;
}

RunState initial_state(const ExperimentConfig& cfg) {
    return RunState(build_model(cfg.model, cfg.seed), mix(cfg.seed, 0x7261696eULL));
}

std::vector<double> train_round(RunState& state, const ExperimentConfig& cfg, const Dataset& source,
                                const Dataset& target, const std::vector<PseudoLabelRecord>& pseudo, int round) {
    const int l = cfg.model.num_landmarks;
    const bool use_target = !target.empty() && (round > 0 || cfg.curriculum.round0_dal);
    const bool dal = use_target && state.model.has_domain_head();
    if (round > 0 && pseudo.size() != target.size()) throw InputError("pseudo-label count does not match the target set");

    std::vector<TrainItem> sources, targets;
    for (const ImageSample& s : source) {
        if (!s.landmarks) throw InputError("source sample '" + s.id + "' has no landmarks");
        if (static_cast<int>(s.landmarks->size()) != l) throw InputError("source sample '" + s.id + "' landmark count mismatch");
        sources.push_back({&s, &*s.landmarks, all_ones_mask(l), kSourceLabel});
    }
    if (use_target) {
        for (std::size_t i = 0; i < target.size(); ++i) {
            if (round > 0)
                targets.push_back({&target[i], &pseudo[i].coords, pseudo[i].mask, kTargetLabel});
            else
                targets.push_back({&target[i], nullptr, all_zeros_mask(l), kTargetLabel});
        }
    }

    ParameterStore& params = state.model.parameters();
    std::vector<Tensor> grads;
    for (const Parameter& p : params.all()) grads.emplace_back(p.value.shape);
    state.optimizer.reset();

    const OptimizerConfig& opt = cfg.optimizer;
    std::vector<double> epoch_losses;
    const int source_per_epoch = target.empty() ? static_cast<int>(sources.size())
                                                : std::max(static_cast<int>(sources.size()), static_cast<int>(target.size()));
    for (int epoch = 0; epoch < opt.epochs_per_round; ++epoch) {
        std::vector<const TrainItem*> pool;
        for (int idx : oversample_source(static_cast<int>(sources.size()), source_per_epoch, state.rng))
            pool.push_back(&sources[static_cast<std::size_t>(idx)]);
        for (const TrainItem& t : targets) pool.push_back(&t);
        std::shuffle(pool.begin(), pool.end(), state.rng);
        const std::uint64_t epoch_seed = state.rng();
        const double lr = opt.lr_at(epoch);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < pool.size(); start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end = std::min(pool.size(), start + static_cast<std::size_t>(opt.batch_size));
            const double batch = static_cast<double>(end - start);

            struct Prepared {
                Augmented aug;
                LandmarkMask mask;
                int label;
            };
            std::vector<Prepared> prepared;
            int valid = 0;
            for (std::size_t pos = start; pos < end; ++pos) {
                const TrainItem& item = *pool[pos];
                std::mt19937_64 sample_rng(mix(epoch_seed, pos));
                const std::span<const Point> pts = item.landmarks ? std::span<const Point>(*item.landmarks)
                                                                  : std::span<const Point>();
                Prepared p{augment(item.sample->image, pts, cfg.augment, sample_rng), item.mask, item.domain_label};
                if (item.landmarks)
                    for (int i = 0; i < l; ++i) p.mask[static_cast<std::size_t>(i)] &= p.aug.inside[static_cast<std::size_t>(i)];
                if (count_selected(p.mask) > 0) ++valid;
                prepared.push_back(std::move(p));
            }

            for (Tensor& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
            for (const Prepared& p : prepared) {
                const bool supervised = count_selected(p.mask) > 0;
                if (!supervised && !dal) continue;
                Graph graph;
                const ModelVars vars = state.model.forward(graph, p.aug.image, dal);
                std::vector<std::pair<Var, double>> roots;
                if (supervised) {
                    const EncodedTargets targets_enc = encode_targets(p.aug.landmarks, cfg.model.grid_height(),
                                                                      cfg.model.grid_width(), cfg.model.stride,
                                                                      cfg.target_sigma);
                    const Var base = base_loss_node(graph, vars, targets_enc, p.mask, cfg.weights);
                    roots.emplace_back(base, 1.0 / valid);
                    loss_sum += graph.value(base).data[0] / valid;
                }
                if (dal) {
                    const Var dom = domain_loss_node(graph, vars.domain_prob, p.label);
                    roots.emplace_back(dom, cfg.weights.lambda_d / batch);
                    loss_sum += cfg.weights.lambda_d * graph.value(dom).data[0] / batch;
                }
                graph.backward(roots);
                graph.accumulate_parameter_grads(grads);
            }
            state.optimizer.step(params, grads, lr, opt);
        }
        epoch_losses.push_back(loss_sum);
    }
    return epoch_losses;
}

void run_adaptation(RunState& state, const ExperimentConfig& cfg, const Dataset& source, const Dataset& target,
                    int last_round, const RoundCallback& on_round) {
    if (source.empty()) throw ConfigError("adaptation needs a non-empty labeled source set");
    const int total = cfg.curriculum.total_rounds();
    int last = last_round < 0 ? total : std::min(last_round, total);
    if (target.empty()) last = 0;
    for (int round = state.round + 1; round <= last; ++round) {
        if (round > 0 && cfg.curriculum.reinit_each_round) {
            state.model = build_model(cfg.model, mix(cfg.seed, static_cast<std::uint64_t>(round)));
            state.optimizer = Adam(state.model.parameters());
        }
        RoundArtifacts art;
        art.round = round;
        if (round > 0) {
            art.pseudo_labels = generate_pseudo_labels(state.model, target, round);
            art.curriculum = select_pseudo_labels(art.pseudo_labels, cfg.curriculum, round);
            art.ratio = art.curriculum.ratio;
        }
        art.epoch_losses = train_round(state, cfg, source, target, art.pseudo_labels, round);
        state.round = round;
        if (on_round) on_round(state, art);
    }
}

}  // namespace udalm
