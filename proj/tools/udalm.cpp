// Command-line front end over the udalm C interface.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "udalm/udalm.h"

namespace {

struct Failure {
    int code;
};

void check(udalm_status s) {
    if (s != UDALM_OK) {
        std::cerr << "error: " << udalm_last_error() << "\n";
        throw Failure{static_cast<int>(s)};
    }
}

std::string take(char* s) {
    std::string out = s ? s : "";
    udalm_string_free(s);
    return out;
}

struct Common {
    std::string config;
    std::optional<unsigned long long> seed;
    bool deterministic = false;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
    auto* opt = cmd->add_option("--config", c.config, "Experiment config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("--seed", c.seed, "Override the config seed");
    cmd->add_flag("--deterministic", c.deterministic, "Force deterministic mode");
    cmd->add_option("--out", c.out, "Output directory (default: $UDALM_OUT)");
}

std::string out_dir(const Common& c) {
    if (!c.out.empty()) return c.out;
    if (const char* env = std::getenv("UDALM_OUT"); env && *env) return env;
    std::cerr << "error: --out is required when UDALM_OUT is unset\n";
    throw Failure{UDALM_ERR_INVALID_ARGUMENT};
}

udalm_config* open_config(const Common& c) {
    udalm_config* cfg = nullptr;
    if (c.config.empty()) return nullptr;
    check(udalm_config_load(c.config.c_str(), &cfg));
    if (c.seed) check(udalm_config_set_seed(cfg, *c.seed));
    if (c.deterministic) check(udalm_config_set_deterministic(cfg, 1));
    return cfg;
}

struct ConfigHandle {
    udalm_config* ptr = nullptr;
    ~ConfigHandle() { udalm_config_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised domain adaptation for anatomical landmark detection"};
    app.require_subcommand(1);

    Common synth_opts, train_opts, adapt_opts, eval_opts, report_opts;

    auto* synth = app.add_subcommand("synth", "Generate the synthetic source/target benchmark");
    add_common(synth, synth_opts, true);

    auto* train = app.add_subcommand("train-source", "Train round 0 and write its checkpoint");
    add_common(train, train_opts, true);

    auto* adapt = app.add_subcommand("adapt", "Run self-training rounds, resuming from the newest checkpoint");
    add_common(adapt, adapt_opts, true);
    int rounds = -1;
    std::string init_checkpoint;
    adapt->add_option("--rounds", rounds, "Stop after this round (default: curriculum end)");
    adapt->add_option("--checkpoint", init_checkpoint, "Starting checkpoint when the output has none");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled manifest");
    add_common(eval, eval_opts, false);
    std::string eval_checkpoint, eval_manifest, eval_name = "eval";
    std::vector<double> radii;
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint to evaluate")->required();
    eval->add_option("--manifest", eval_manifest, "Manifest (default: the config's test manifest)");
    eval->add_option("--name", eval_name, "Report name");
    eval->add_option("--radii", radii, "SDR radii in mm (default 2 2.5 3 4)");

    auto* pl = app.add_subcommand("pseudo-labels", "Inspect pseudo-label files");
    pl->require_subcommand(1);
    auto* show = pl->add_subcommand("show", "Print one round's pseudo-labels");
    std::string pl_file, pl_image;
    show->add_option("file", pl_file, "Pseudo-label file")->required();
    show->add_option("--image", pl_image, "Only this image id");

    auto* report = app.add_subcommand("report", "Build tables and plots for a run directory");
    add_common(report, report_opts, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            ConfigHandle cfg{open_config(synth_opts)};
            const std::string out = out_dir(synth_opts);
            check(udalm_synth(cfg.ptr, out.c_str()));
            std::cout << "wrote synthetic benchmark to " << out << "\n";
        } else if (train->parsed()) {
            ConfigHandle cfg{open_config(train_opts)};
            char* path = nullptr;
            check(udalm_train_source(cfg.ptr, out_dir(train_opts).c_str(), &path));
            std::cout << "checkpoint " << take(path) << "\n";
        } else if (adapt->parsed()) {
            ConfigHandle cfg{open_config(adapt_opts)};
            int last = -1;
            check(udalm_adapt(cfg.ptr, out_dir(adapt_opts).c_str(), init_checkpoint.empty() ? nullptr : init_checkpoint.c_str(),
                              rounds, &last));
            std::cout << "completed through round " << last << "\n";
        } else if (eval->parsed()) {
            ConfigHandle cfg{open_config(eval_opts)};
            std::string manifest = eval_manifest;
            if (manifest.empty()) {
                if (!cfg.ptr) {
                    std::cerr << "error: eval needs --manifest or --config\n";
                    return UDALM_ERR_INVALID_ARGUMENT;
                }
                char* path = nullptr;
                check(udalm_config_test_manifest(cfg.ptr, &path));
                manifest = take(path);
                if (manifest.empty()) {
                    std::cerr << "error: config has no data.test_manifest; pass --manifest\n";
                    return UDALM_ERR_INVALID_ARGUMENT;
                }
            }
            char* json = nullptr;
            check(udalm_eval(eval_checkpoint.c_str(), manifest.c_str(), radii.empty() ? nullptr : radii.data(), radii.size(),
                             out_dir(eval_opts).c_str(), eval_name.c_str(), &json));
            std::cout << take(json) << "\n";
        } else if (show->parsed()) {
            char* text = nullptr;
            check(udalm_pseudo_labels_show(pl_file.c_str(), pl_image.empty() ? nullptr : pl_image.c_str(), &text));
            std::cout << take(text);
        } else if (report->parsed()) {
            ConfigHandle cfg{open_config(report_opts)};
            char* path = nullptr;
            check(udalm_report(out_dir(report_opts).c_str(), cfg.ptr, &path));
            std::cout << "report " << take(path) << "\n";
        }
    } catch (const Failure& f) {
        return f.code;
    }
    return 0;
}
