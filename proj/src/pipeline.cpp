#include "udalm/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>
#include <sstream>

#include "udalm/error.hpp"

namespace udalm {

namespace fs = std::filesystem;

namespace {

std::string round_name(const char* stem, int round, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%02d%s", stem, round, ext);
    return buf;
}

struct PreparedData {
    Dataset source;
    Dataset target;
};

PreparedData load_training_data(const ExperimentConfig& cfg) {
    if (cfg.data.source_manifest.empty()) throw ConfigError("data.source_manifest is required");
    PreparedData d;
    d.source = prepare_for_training(load_dataset(cfg.data.source_manifest, cfg.model.num_landmarks), cfg.model, true);
    if (!cfg.data.target_manifest.empty())
        d.target = prepare_for_training(load_dataset(cfg.data.target_manifest, cfg.model.num_landmarks), cfg.model, false);
    return d;
}

std::string loss_log(const RoundArtifacts& art) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch\tloss\n";
    for (std::size_t e = 0; e < art.epoch_losses.size(); ++e) os << e << '\t' << art.epoch_losses[e] << '\n';
    return os.str();
}

void persist_round(const RunLayout& layout, const ExperimentConfig& cfg, const RunState& state,
                   const RoundArtifacts& art) {
    if (art.round > 0) {
        PseudoLabelFile f{art.round, art.ratio, art.curriculum.thresholds, art.curriculum.selected, art.pseudo_labels};
        save_pseudo_labels(layout.pseudo_labels(art.round), f);
    }
    write_text_file(layout.round_log(art.round), loss_log(art));
    save_checkpoint(layout.checkpoint(art.round), cfg, state);
}

void require_same_model(const ModelConfig& a, const ModelConfig& b) {
    if (model_config_to_json(a) != model_config_to_json(b))
        throw ConfigError("checkpoint model settings differ from the config");
}

}  // namespace

fs::path RunLayout::checkpoint(int round) const { return root / "checkpoints" / round_name("round", round, ".udalm"); }
fs::path RunLayout::pseudo_labels(int round) const {
    return root / "pseudo_labels" / round_name("round", round, ".json");
}
fs::path RunLayout::round_log(int round) const { return root / "logs" / round_name("round", round, ".tsv"); }

int RunLayout::latest_round() const {
    const fs::path dir = root / "checkpoints";
    if (!fs::is_directory(dir)) return -1;
    int best = -1;
    static const std::regex pattern(R"(round_(\d+)\.udalm)");
    for (const auto& e : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = e.path().filename().string();
        if (std::regex_match(name, m, pattern)) best = std::max(best, std::stoi(m[1].str()));
    }
    return best;
}

ExperimentConfig load_run_config(const fs::path& path) {
    ExperimentConfig cfg = load_config(path);
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    for (std::string* p : {&cfg.data.source_manifest, &cfg.data.target_manifest, &cfg.data.test_manifest})
        if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
    return cfg;
}

fs::path cmd_synth(const ExperimentConfig& cfg, const fs::path& out) {
    SynthConfig sc = cfg.synth;
    if (sc.num_landmarks != cfg.model.num_landmarks)
        throw ConfigError("synth.num_landmarks must equal model.num_landmarks");
    write_synth(synth_generate(sc), out);
    return out / "manifests";
}

fs::path cmd_train_source(const ExperimentConfig& cfg, const fs::path& out) {
    const RunLayout layout{out};
    const PreparedData data = load_training_data(cfg);
    save_config(cfg, layout.config());
    RunState state = initial_state(cfg);
    run_adaptation(state, cfg, data.source, data.target, 0,
                   [&](const RunState& s, const RoundArtifacts& art) { persist_round(layout, cfg, s, art); });
    return layout.checkpoint(0);
}

AdaptOutcome cmd_adapt(const ExperimentConfig& cfg, const fs::path& out, const std::optional<fs::path>& init_checkpoint,
                       int max_round) {
    const RunLayout layout{out};
    const PreparedData data = load_training_data(cfg);
    if (data.target.empty()) throw ConfigError("adapt needs data.target_manifest");

    std::optional<RunState> state;
    const int latest = layout.latest_round();
    if (latest >= 0) {
        LoadedCheckpoint ck = load_checkpoint(layout.checkpoint(latest));
        require_same_model(ck.config.model, cfg.model);
        state.emplace(std::move(ck.state));
    } else if (init_checkpoint) {
        LoadedCheckpoint ck = load_checkpoint(*init_checkpoint);
        require_same_model(ck.config.model, cfg.model);
        state.emplace(std::move(ck.state));
    } else {
        state.emplace(initial_state(cfg));
    }
    save_config(cfg, layout.config());

    AdaptOutcome outcome;
    outcome.first_round = state->round + 1;
    run_adaptation(*state, cfg, data.source, data.target, max_round,
                   [&](const RunState& s, const RoundArtifacts& art) { persist_round(layout, cfg, s, art); });
    outcome.last_round = state->round;
    if (state->round >= 0 && !fs::exists(layout.checkpoint(state->round))) save_checkpoint(layout.checkpoint(state->round), cfg, *state);
    outcome.checkpoint = layout.checkpoint(state->round);
    return outcome;
}

EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& manifest, const EvalConfig& eval, const fs::path& out,
                    const std::string& name) {
    const LoadedCheckpoint ck = load_checkpoint(checkpoint);
    const Dataset samples = load_dataset(manifest, ck.config.model.num_landmarks);
    const EvalReport report = evaluate_model(ck.state.model, samples, eval);
    const RunLayout layout{out};
    write_text_file(layout.eval_dir() / (name + ".json"), report_to_json(report).dump(2) + "\n");
    write_text_file(layout.eval_dir() / (name + ".md"),
                    format_table({{name, report}}) + "\n" + format_subdomain_table(report));
    write_subdomain_plot(report, layout.eval_dir() / (name + "_subdomains.png"));
    return report;
}

std::string cmd_pseudo_labels_show(const fs::path& file, const std::string& image_id) {
    const PseudoLabelFile f = load_pseudo_labels(file);
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof buf, "round %d  r=%.3f  images=%zu\n", f.round, f.ratio, f.records.size());
    os << buf << "landmark\tthreshold\tselected\n";
    for (std::size_t l = 0; l < f.thresholds.size(); ++l) {
        std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%d\n", l, f.thresholds[l], l < f.selected.size() ? f.selected[l] : 0);
        os << buf;
    }
    os << "\nimage_id\tlandmark\tx\ty\tconfidence\tmask\n";
    bool found = image_id.empty();
    for (const PseudoLabelRecord& r : f.records) {
        if (!image_id.empty() && r.image_id != image_id) continue;
        found = true;
        for (std::size_t l = 0; l < r.coords.size(); ++l) {
            std::snprintf(buf, sizeof buf, "%s\t%zu\t%.3f\t%.3f\t%.6f\t%d\n", r.image_id.c_str(), l, r.coords[l].x,
                          r.coords[l].y, r.confidences[l], static_cast<int>(r.mask[l]));
            os << buf;
        }
    }
    if (!found) throw InputError("image '" + image_id + "' is not in " + file.string());
    return os.str();
}

fs::path cmd_report(const fs::path& run_dir, const std::optional<ExperimentConfig>& cfg) {
    const RunLayout layout{run_dir};
    std::vector<std::pair<std::string, EvalReport>> rows;
    if (fs::is_directory(layout.eval_dir())) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(layout.eval_dir()))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& p : files)
            rows.emplace_back(p.stem().string(), report_from_json(nlohmann::json::parse(read_text_file(p))));
    }
    if (rows.empty() && !cfg) throw InputError("no evaluation results under " + layout.eval_dir().string());

    std::ostringstream md;
    md << "# Run report\n\n";
    if (!rows.empty()) {
        md << "## Target test metrics\n\n" << format_table(rows) << "\n";
        for (const auto& [name, rep] : rows) {
            md << "## Subdomains: " << name << "\n\n" << format_subdomain_table(rep) << "\n";
            write_subdomain_plot(rep, layout.report_dir() / (name + "_subdomains.png"));
            md << "![" << name << "](" << name << "_subdomains.png)\n\n";
        }
    }
    if (cfg && !cfg->data.source_manifest.empty() && !cfg->data.target_manifest.empty()) {
        const Dataset a = load_dataset(cfg->data.source_manifest);
        const Dataset b = load_dataset(cfg->data.target_manifest);
        const HistogramReport h = histogram_report(a, b, layout.report_dir(), "histogram");
        char buf[160];
        std::snprintf(buf, sizeof buf, "mean intensity: source %.4f, target %.4f\n\n", h.a.mean, h.b.mean);
        md << "## Intensity histograms\n\n" << buf << "![histogram](histogram.png)\n";
    }
    const fs::path path = layout.report_dir() / "report.md";
    write_text_file(path, md.str());
    return path;
}

}  // namespace udalm
