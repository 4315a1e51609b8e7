#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "udalm/artifacts.hpp"
#include "udalm/config.hpp"
#include "udalm/evaluation.hpp"

namespace udalm {

/// Run directory layout.
struct RunLayout {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "config.json"; }
    std::filesystem::path checkpoint(int round) const;
    std::filesystem::path pseudo_labels(int round) const;
    std::filesystem::path round_log(int round) const;
    std::filesystem::path eval_dir() const { return root / "eval"; }
    std::filesystem::path report_dir() const { return root / "report"; }

    /// Highest round with a checkpoint, or −1.
    int latest_round() const;
};

/// Loads a config and resolves relative data paths against its directory.
ExperimentConfig load_run_config(const std::filesystem::path& path);

/// Writes {source/, target/, manifests/} under out and returns the manifest directory.
std::filesystem::path cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Round 0 only; returns the round-0 checkpoint path.
std::filesystem::path cmd_train_source(const ExperimentConfig& cfg, const std::filesystem::path& out);

struct AdaptOutcome {
    int first_round = 0;
    int last_round = -1;
    std::filesystem::path checkpoint;
};

/// Continues from the newest checkpoint under out, else from init_checkpoint, else
/// from scratch. Stops after max_round (−1: curriculum end).
AdaptOutcome cmd_adapt(const ExperimentConfig& cfg, const std::filesystem::path& out,
                       const std::optional<std::filesystem::path>& init_checkpoint = std::nullopt,
                       int max_round = -1);

/// Writes <name>.json, <name>.md and <name>_subdomains.png under out/eval.
EvalReport cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
                    const EvalConfig& eval, const std::filesystem::path& out, const std::string& name);

/// Text table of one pseudo-label file, optionally limited to one image.
std::string cmd_pseudo_labels_show(const std::filesystem::path& file, const std::string& image_id = "");

/// Collects eval/*.json into report/report.md plus plots; adds a source/target
/// histogram when the config names both manifests. Returns the report path.
std::filesystem::path cmd_report(const std::filesystem::path& run_dir, const std::optional<ExperimentConfig>& cfg);

}  // namespace udalm
