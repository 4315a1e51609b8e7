#include "udalm/udalm.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "udalm/error.hpp"
#include "udalm/pipeline.hpp"

struct udalm_config {
    udalm::ExperimentConfig cfg;
};

struct udalm_model {
    udalm::Model model;
};

namespace {

thread_local std::string g_last_error;

udalm_status fail(udalm_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename F>
udalm_status guard(F&& f) {
    try {
        g_last_error.clear();
        f();
        return UDALM_OK;
    } catch (const udalm::ConfigError& e) {
        return fail(UDALM_ERR_CONFIG, e.what());
    } catch (const udalm::LoadError& e) {
        return fail(UDALM_ERR_LOAD, e.what());
    } catch (const udalm::InputError& e) {
        return fail(UDALM_ERR_INPUT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(UDALM_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(UDALM_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(UDALM_ERR_INTERNAL, "unknown error");
    }
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* udalm_last_error(void) { return g_last_error.c_str(); }
const char* udalm_version(void) { return "1.0.0"; }
void udalm_string_free(char* s) { std::free(s); }

udalm_status udalm_config_load(const char* path, udalm_config** out) {
    if (!path || !out) return fail(UDALM_ERR_INVALID_ARGUMENT, "path and out must not be null");
    return guard([&] { *out = new udalm_config{udalm::load_run_config(path)}; });
}

udalm_status udalm_config_profile(const char* profile, udalm_config** out) {
    if (!profile || !out) return fail(UDALM_ERR_INVALID_ARGUMENT, "profile and out must not be null");
    const std::string name = profile;
    if (name == "desk") return guard([&] { *out = new udalm_config{udalm::ExperimentConfig::desk()}; });
    if (name == "full_scale") return guard([&] { *out = new udalm_config{udalm::ExperimentConfig::full_scale()}; });
    return fail(UDALM_ERR_CONFIG, "unknown profile '" + name + "'");
}

udalm_status udalm_config_set_seed(udalm_config* cfg, unsigned long long seed) {
    if (!cfg) return fail(UDALM_ERR_INVALID_ARGUMENT, "config must not be null");
    cfg->cfg.seed = seed;
    cfg->cfg.synth.seed = seed;
    g_last_error.clear();
    return UDALM_OK;
}

udalm_status udalm_config_set_deterministic(udalm_config* cfg, int deterministic) {
    if (!cfg) return fail(UDALM_ERR_INVALID_ARGUMENT, "config must not be null");
    cfg->cfg.deterministic = deterministic != 0;
    g_last_error.clear();
    return UDALM_OK;
}

udalm_status udalm_config_to_json(const udalm_config* cfg, char** out_json) {
    if (!cfg || !out_json) return fail(UDALM_ERR_INVALID_ARGUMENT, "config and out must not be null");
    return guard([&] { *out_json = dup(udalm::to_json(cfg->cfg).dump(2)); });
}

udalm_status udalm_config_test_manifest(const udalm_config* cfg, char** out_path) {
    if (!cfg || !out_path) return fail(UDALM_ERR_INVALID_ARGUMENT, "config and out must not be null");
    return guard([&] { *out_path = dup(cfg->cfg.data.test_manifest); });
}

void udalm_config_free(udalm_config* cfg) { delete cfg; }

udalm_status udalm_synth(const udalm_config* cfg, const char* out_dir) {
    if (!cfg || !out_dir) return fail(UDALM_ERR_INVALID_ARGUMENT, "config and out_dir must not be null");
    return guard([&] { udalm::cmd_synth(cfg->cfg, out_dir); });
}

udalm_status udalm_train_source(const udalm_config* cfg, const char* out_dir, char** out_checkpoint) {
    if (!cfg || !out_dir) return fail(UDALM_ERR_INVALID_ARGUMENT, "config and out_dir must not be null");
    return guard([&] {
        const auto path = udalm::cmd_train_source(cfg->cfg, out_dir);
        if (out_checkpoint) *out_checkpoint = dup(path.string());
    });
}

udalm_status udalm_adapt(const udalm_config* cfg, const char* out_dir, const char* init_checkpoint, int max_round,
                         int* out_last_round) {
    if (!cfg || !out_dir) return fail(UDALM_ERR_INVALID_ARGUMENT, "config and out_dir must not be null");
    return guard([&] {
        std::optional<std::filesystem::path> init;
        if (init_checkpoint && *init_checkpoint) init = init_checkpoint;
        const auto outcome = udalm::cmd_adapt(cfg->cfg, out_dir, init, max_round);
        if (out_last_round) *out_last_round = outcome.last_round;
    });
}

udalm_status udalm_eval(const char* checkpoint, const char* manifest, const double* radii_mm, size_t n_radii,
                        const char* out_dir, const char* name, char** out_json) {
    if (!checkpoint || !manifest || !out_dir || !name)
        return fail(UDALM_ERR_INVALID_ARGUMENT, "checkpoint, manifest, out_dir and name must not be null");
    if (n_radii > 0 && !radii_mm) return fail(UDALM_ERR_INVALID_ARGUMENT, "radii_mm is null");
    return guard([&] {
        udalm::EvalConfig eval;
        if (n_radii > 0) eval.radii_mm.assign(radii_mm, radii_mm + n_radii);
        for (double r : eval.radii_mm)
            if (!(r > 0.0)) throw udalm::ConfigError("radii must be positive");
        const auto report = udalm::cmd_eval(checkpoint, manifest, eval, out_dir, name);
        if (out_json) *out_json = dup(udalm::report_to_json(report).dump(2));
    });
}

udalm_status udalm_pseudo_labels_show(const char* file, const char* image_id, char** out_text) {
    if (!file || !out_text) return fail(UDALM_ERR_INVALID_ARGUMENT, "file and out must not be null");
    return guard([&] { *out_text = dup(udalm::cmd_pseudo_labels_show(file, image_id ? image_id : "")); });
}

udalm_status udalm_report(const char* run_dir, const udalm_config* cfg, char** out_path) {
    if (!run_dir) return fail(UDALM_ERR_INVALID_ARGUMENT, "run_dir must not be null");
    return guard([&] {
        std::optional<udalm::ExperimentConfig> c;
        if (cfg) c = cfg->cfg;
        const auto path = udalm::cmd_report(run_dir, c);
        if (out_path) *out_path = dup(path.string());
    });
}

udalm_status udalm_model_load(const char* checkpoint, udalm_model** out) {
    if (!checkpoint || !out) return fail(UDALM_ERR_INVALID_ARGUMENT, "checkpoint and out must not be null");
    return guard([&] { *out = new udalm_model{udalm::load_checkpoint(checkpoint).state.model}; });
}

void udalm_model_free(udalm_model* model) { delete model; }

int udalm_model_num_landmarks(const udalm_model* model) { return model ? model->model.config().num_landmarks : -1; }
int udalm_model_input_width(const udalm_model* model) { return model ? model->model.config().input_width : -1; }
int udalm_model_input_height(const udalm_model* model) { return model ? model->model.config().input_height : -1; }

udalm_status udalm_model_predict(const udalm_model* model, const double* pixels, int width, int height,
                                 double* coords_xy, double* confidences) {
    if (!model || !pixels || !coords_xy || !confidences)
        return fail(UDALM_ERR_INVALID_ARGUMENT, "model, pixels and outputs must not be null");
    if (width <= 0 || height <= 0) return fail(UDALM_ERR_INVALID_ARGUMENT, "image size must be positive");
    return guard([&] {
        udalm::ImageSample s;
        s.image.width = width;
        s.image.height = height;
        s.image.pixels.assign(pixels, pixels + static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
        s.original_width = width;
        s.original_height = height;
        const auto& mc = model->model.config();
        const udalm::ImageSample r = udalm::resize_with_labels(s, mc.input_width, mc.input_height);
        const udalm::Prediction p = model->model.predict(r.image);
        for (std::size_t l = 0; l < p.coords.size(); ++l) {
            const udalm::Point q = r.to_original(p.coords[l]);
            coords_xy[2 * l] = q.x;
            coords_xy[2 * l + 1] = q.y;
            confidences[l] = p.confidences[l];
        }
    });
}

}  // extern "C"
