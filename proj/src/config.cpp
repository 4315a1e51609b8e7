#include "udalm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "udalm/error.hpp"

using nlohmann::json;

namespace udalm {

namespace {

// Walks one JSON object, remembering which keys were consumed so that leftovers
// can be reported with their full path.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    void read(const char* key, int& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) throw ConfigError(field(key) + " must be an integer");
            out = v->get<int>();
        }
    }
    void read(const char* key, std::uint64_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
                throw ConfigError(field(key) + " must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void read(const char* key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) throw ConfigError(field(key) + " must be a number");
            out = v->get<double>();
        }
    }
    void read(const char* key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) throw ConfigError(field(key) + " must be a boolean");
            out = v->get<bool>();
        }
    }
    void read(const char* key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) throw ConfigError(field(key) + " must be a string");
            out = v->get<std::string>();
        }
    }
    template <class T>
    void read(const char* key, std::vector<T>& out) {
        if (const json* v = take(key)) {
            if (!v->is_array()) throw ConfigError(field(key) + " must be an array");
            std::vector<T> tmp;
            for (std::size_t i = 0; i < v->size(); ++i) {
                const json& e = (*v)[i];
                const bool ok = std::is_integral_v<T> ? e.is_number_integer() : e.is_number();
                if (!ok) throw ConfigError(field(key) + "[" + std::to_string(i) + "] has the wrong type");
                tmp.push_back(e.get<T>());
            }
            out = std::move(tmp);
        }
    }

    Reader child(const char* key) {
        const json* v = take(key);
        static const json empty = json::object();
        return Reader(v ? *v : empty, field(key));
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw ConfigError("unknown key " + field(item.key().c_str()));
    }

private:
    const json* take(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    std::string where() const { return path_.empty() ? "config" : path_; }
    std::string field(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_model(Reader r, ModelConfig& m) {
    r.read("num_landmarks", m.num_landmarks);
    r.read("embed_dim", m.embed_dim);
    r.read("num_decoder_layers", m.num_decoder_layers);
    r.read("num_heads", m.num_heads);
    r.read("stride", m.stride);
    std::string kind = to_string(m.backbone);
    r.read("backbone", kind);
    try {
        m.backbone = backbone_from_string(kind);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("model.backbone: ") + e.what());
    }
    std::vector<int> size{m.input_width, m.input_height};
    r.read("input_size", size);
    if (size.size() != 2) throw ConfigError("model.input_size must be [width, height]");
    m.input_width = size[0];
    m.input_height = size[1];
    r.read("backbone_width", m.backbone_width);
    r.read("domain_head", m.domain_head);
    r.finish();
}

}  // namespace

std::string to_string(SelectionMode mode) {
    switch (mode) {
        case SelectionMode::landmark_dynamic: return "landmark_dynamic";
        case SelectionMode::landmark_fixed: return "landmark_fixed";
        case SelectionMode::image_dynamic: return "image_dynamic";
        case SelectionMode::none: return "none";
    }
    return "?";
}

SelectionMode selection_from_string(const std::string& name) {
    for (SelectionMode m : {SelectionMode::landmark_dynamic, SelectionMode::landmark_fixed, SelectionMode::image_dynamic,
                            SelectionMode::none})
        if (to_string(m) == name) return m;
    throw ConfigError("curriculum.selection: unknown mode '" + name + "'");
}

int CurriculumConfig::total_rounds() const {
    if (rounds > 0) return rounds;
    return static_cast<int>(std::ceil(1.0 / delta - 1e-9));
}

double OptimizerConfig::lr_at(int epoch) const {
    double lr_now = lr;
    for (int e : decay_epochs)
        if (epoch >= e) lr_now /= decay_factor;
    return lr_now;
}

void ExperimentConfig::validate() const {
    model.validate();
    weights.validate();
    augment.validate();
    if (!(curriculum.delta > 0.0 && curriculum.delta <= 1.0)) throw ConfigError("curriculum.delta must lie in (0,1]");
    if (curriculum.rounds < 0) throw ConfigError("curriculum.rounds must be >= 0");
    if (!(optimizer.lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
    if (optimizer.epochs_per_round < 1) throw ConfigError("optimizer.epochs_per_round must be >= 1");
    if (optimizer.batch_size < 1) throw ConfigError("optimizer.batch_size must be >= 1");
    if (!(optimizer.decay_factor >= 1.0)) throw ConfigError("optimizer.decay_factor must be >= 1");
    for (int e : optimizer.decay_epochs)
        if (e < 0 || e >= optimizer.epochs_per_round)
            throw ConfigError("optimizer.decay_epochs entries must lie in [0, epochs_per_round)");
    if (!(target_sigma > 0.0)) throw ConfigError("loss.sigma must be positive");
    if (eval.radii_mm.empty()) throw ConfigError("eval.radii_mm must not be empty");
    for (double r : eval.radii_mm)
        if (!(r > 0.0)) throw ConfigError("eval.radii_mm entries must be positive");
}

ExperimentConfig ExperimentConfig::full_scale() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::desk() {
    ExperimentConfig c;
    c.model.num_landmarks = 6;
    c.model.embed_dim = 32;
    c.model.num_decoder_layers = 2;
    c.model.num_heads = 4;
    c.model.stride = 4;
    c.model.backbone = BackboneKind::tiny;
    c.model.input_width = 64;
    c.model.input_height = 64;
    c.model.backbone_width = 16;
    c.optimizer.lr = 1e-3;
    c.optimizer.epochs_per_round = 30;
    c.optimizer.decay_epochs = {20, 26};
    c.target_sigma = 1.0;
    c.synth.num_landmarks = 6;
    c.synth.size = 64;
    return c;
}

json model_config_to_json(const ModelConfig& m) {
    return {{"num_landmarks", m.num_landmarks},
            {"embed_dim", m.embed_dim},
            {"num_decoder_layers", m.num_decoder_layers},
            {"num_heads", m.num_heads},
            {"stride", m.stride},
            {"backbone", to_string(m.backbone)},
            {"input_size", {m.input_width, m.input_height}},
            {"backbone_width", m.backbone_width},
            {"domain_head", m.domain_head}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig m;
    read_model(Reader(j, "model"), m);
    m.validate();
    return m;
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = ExperimentConfig::kSchemaVersion;
    j["seed"] = c.seed;
    j["deterministic"] = c.deterministic;
    j["model"] = model_config_to_json(c.model);
    j["loss"] = {{"lambda_s", c.weights.lambda_s},
                 {"lambda_o", c.weights.lambda_o},
                 {"lambda_d", c.weights.lambda_d},
                 {"sigma", c.target_sigma}};
    j["curriculum"] = {{"delta", c.curriculum.delta},
                       {"rounds", c.curriculum.rounds},
                       {"selection", to_string(c.curriculum.selection)},
                       {"fixed_threshold", c.curriculum.fixed_threshold},
                       {"round0_dal", c.curriculum.round0_dal},
                       {"reinit_each_round", c.curriculum.reinit_each_round}};
    j["optimizer"] = {{"method", "adam"},
                      {"lr", c.optimizer.lr},
                      {"decay_epochs", c.optimizer.decay_epochs},
                      {"decay_factor", c.optimizer.decay_factor},
                      {"epochs_per_round", c.optimizer.epochs_per_round},
                      {"batch_size", c.optimizer.batch_size},
                      {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2},
                      {"eps", c.optimizer.eps}};
    const AugmentConfig& a = c.augment;
    j["augment"] = {{"enabled", a.enabled},
                    {"scale_range", {a.scale_min, a.scale_max}},
                    {"translate_max", a.translate_max},
                    {"rotate_max_deg", a.rotate_max_deg},
                    {"occlusion_max_count", a.occlusion_max_count},
                    {"occlusion_max_fraction", a.occlusion_max_fraction},
                    {"occlusion_value", a.occlusion_value},
                    {"blur_prob", a.blur_prob},
                    {"blur_kernel_range", {a.blur_kernel_min, a.blur_kernel_max}}};
    j["data"] = {{"source_manifest", c.data.source_manifest},
                 {"target_manifest", c.data.target_manifest},
                 {"test_manifest", c.data.test_manifest}};
    const ShiftParams& s = c.synth.shift;
    j["synth"] = {{"seed", c.synth.seed},
                  {"n_source", c.synth.n_source},
                  {"n_target", c.synth.n_target},
                  {"n_test", c.synth.n_test},
                  {"num_landmarks", c.synth.num_landmarks},
                  {"size", c.synth.size},
                  {"spacing_mm", c.synth.spacing_mm},
                  {"source_noise_std", c.synth.source_noise_std},
                  {"shift",
                   {{"gamma", s.gamma},
                    {"brightness", s.brightness},
                    {"contrast", s.contrast},
                    {"noise_std", s.noise_std},
                    {"blur_sigma", s.blur_sigma},
                    {"shape_scale", s.shape_scale},
                    {"bump_scale", s.bump_scale},
                    {"subdomains", s.subdomains},
                    {"subdomain_spread", s.subdomain_spread}}}};
    j["eval"] = {{"radii_mm", c.eval.radii_mm},
                 {"mre_mode", c.eval.mre_mode == MreMode::pooled ? "pooled" : "per_image"}};
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    Reader root(j, "");
    int version = -1;
    root.read("schema_version", version);
    if (version != ExperimentConfig::kSchemaVersion)
        throw ConfigError("schema_version must be " + std::to_string(ExperimentConfig::kSchemaVersion));
    std::string profile = "full_scale";
    root.read("profile", profile);
    ExperimentConfig c;
    if (profile == "desk")
        c = ExperimentConfig::desk();
    else if (profile != "full_scale")
        throw ConfigError("profile must be 'desk' or 'full_scale'");

    root.read("seed", c.seed);
    root.read("deterministic", c.deterministic);
    read_model(root.child("model"), c.model);
    {
        Reader r = root.child("loss");
        r.read("lambda_s", c.weights.lambda_s);
        r.read("lambda_o", c.weights.lambda_o);
        r.read("lambda_d", c.weights.lambda_d);
        r.read("sigma", c.target_sigma);
        r.finish();
    }
    {
        Reader r = root.child("curriculum");
        r.read("delta", c.curriculum.delta);
        r.read("rounds", c.curriculum.rounds);
        std::string sel = to_string(c.curriculum.selection);
        r.read("selection", sel);
        c.curriculum.selection = selection_from_string(sel);
        r.read("fixed_threshold", c.curriculum.fixed_threshold);
        r.read("round0_dal", c.curriculum.round0_dal);
        r.read("reinit_each_round", c.curriculum.reinit_each_round);
        r.finish();
    }
    {
        Reader r = root.child("optimizer");
        std::string method = "adam";
        r.read("method", method);
        if (method != "adam") throw ConfigError("optimizer.method must be 'adam'");
        r.read("lr", c.optimizer.lr);
        r.read("decay_epochs", c.optimizer.decay_epochs);
        r.read("decay_factor", c.optimizer.decay_factor);
        r.read("epochs_per_round", c.optimizer.epochs_per_round);
        r.read("batch_size", c.optimizer.batch_size);
        r.read("beta1", c.optimizer.beta1);
        r.read("beta2", c.optimizer.beta2);
        r.read("eps", c.optimizer.eps);
        r.finish();
    }
    {
        Reader r = root.child("augment");
        AugmentConfig& a = c.augment;
        r.read("enabled", a.enabled);
        std::vector<double> scale{a.scale_min, a.scale_max};
        r.read("scale_range", scale);
        if (scale.size() != 2) throw ConfigError("augment.scale_range must be [min, max]");
        a.scale_min = scale[0];
        a.scale_max = scale[1];
        r.read("translate_max", a.translate_max);
        r.read("rotate_max_deg", a.rotate_max_deg);
        r.read("occlusion_max_count", a.occlusion_max_count);
        r.read("occlusion_max_fraction", a.occlusion_max_fraction);
        r.read("occlusion_value", a.occlusion_value);
        r.read("blur_prob", a.blur_prob);
        std::vector<int> kernel{a.blur_kernel_min, a.blur_kernel_max};
        r.read("blur_kernel_range", kernel);
        if (kernel.size() != 2) throw ConfigError("augment.blur_kernel_range must be [min, max]");
        a.blur_kernel_min = kernel[0];
        a.blur_kernel_max = kernel[1];
        r.finish();
    }
    {
        Reader r = root.child("data");
        r.read("source_manifest", c.data.source_manifest);
        r.read("target_manifest", c.data.target_manifest);
        r.read("test_manifest", c.data.test_manifest);
        r.finish();
    }
    {
        Reader r = root.child("synth");
        SynthConfig& s = c.synth;
        r.read("seed", s.seed);
        r.read("n_source", s.n_source);
        r.read("n_target", s.n_target);
        r.read("n_test", s.n_test);
        r.read("num_landmarks", s.num_landmarks);
        r.read("size", s.size);
        r.read("spacing_mm", s.spacing_mm);
        r.read("source_noise_std", s.source_noise_std);
        Reader sh = r.child("shift");
        sh.read("gamma", s.shift.gamma);
        sh.read("brightness", s.shift.brightness);
        sh.read("contrast", s.shift.contrast);
        sh.read("noise_std", s.shift.noise_std);
        sh.read("blur_sigma", s.shift.blur_sigma);
        sh.read("shape_scale", s.shift.shape_scale);
        sh.read("bump_scale", s.shift.bump_scale);
        sh.read("subdomains", s.shift.subdomains);
        sh.read("subdomain_spread", s.shift.subdomain_spread);
        sh.finish();
        r.finish();
    }
    {
        Reader r = root.child("eval");
        r.read("radii_mm", c.eval.radii_mm);
        std::string mode = c.eval.mre_mode == MreMode::pooled ? "pooled" : "per_image";
        r.read("mre_mode", mode);
        if (mode == "pooled")
            c.eval.mre_mode = MreMode::pooled;
        else if (mode == "per_image")
            c.eval.mre_mode = MreMode::per_image;
        else
            throw ConfigError("eval.mre_mode must be 'pooled' or 'per_image'");
        r.finish();
    }
    root.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config " + path.string());
    out << to_json(cfg).dump(2) << '\n';
}

}  // namespace udalm
