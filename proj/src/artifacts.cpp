#include "udalm/artifacts.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "udalm/error.hpp"

namespace udalm {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw InputError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

template <typename T>
void put(std::string& buf, T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos, const std::string& what) {
    if (pos + sizeof(T) > buf.size()) throw LoadError("checkpoint truncated while reading " + what);
    T value;
    std::memcpy(&value, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

void put_tensor(std::string& buf, const Tensor& t) {
    buf.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
}

void take_tensor(const std::string& buf, std::size_t& pos, Tensor& t, const std::string& what) {
    const std::size_t bytes = t.data.size() * sizeof(double);
    if (pos + bytes > buf.size()) throw LoadError("checkpoint truncated while reading " + what);
    std::memcpy(t.data.data(), buf.data() + pos, bytes);
    pos += bytes;
}

json points_to_json(const std::vector<Point>& pts) {
    json arr = json::array();
    for (const Point& p : pts) arr.push_back({p.x, p.y});
    return arr;
}

}  // namespace

void write_text_file(const std::filesystem::path& path, const std::string& text) { write_atomic(path, text); }

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg, const RunState& state) {
    const ParameterStore& params = state.model.parameters();
    json header;
    header["config"] = to_json(cfg);
    header["model"] = model_config_to_json(state.model.config());
    header["round"] = state.round;
    std::ostringstream rng;
    rng << state.rng;
    header["rng"] = rng.str();
    header["adam_steps"] = state.optimizer.steps;
    json entries = json::array();
    for (const Parameter& p : params.all()) entries.push_back({{"name", p.name}, {"shape", p.value.shape}});
    header["parameters"] = entries;
    const std::string text = header.dump();

    std::string buf(kCheckpointMagic, 6);
    put<std::uint32_t>(buf, kCheckpointVersion);
    put<std::uint64_t>(buf, text.size());
    buf += text;
    for (const Parameter& p : params.all()) put_tensor(buf, p.value);
    for (const Tensor& t : state.optimizer.first) put_tensor(buf, t);
    for (const Tensor& t : state.optimizer.second) put_tensor(buf, t);
    write_atomic(path, buf);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw LoadError("checkpoint '" + path.string() + "' does not exist");
    const std::string buf = read_text_file(path);
    if (buf.size() < 6 || buf.compare(0, 6, kCheckpointMagic) != 0)
        throw LoadError("'" + path.string() + "' is not a checkpoint (bad magic)");
    std::size_t pos = 6;
    const auto version = take<std::uint32_t>(buf, pos, "version");
    if (version != kCheckpointVersion)
        throw LoadError("unsupported checkpoint version " + std::to_string(version));
    const auto len = take<std::uint64_t>(buf, pos, "header length");
    if (pos + len > buf.size()) throw LoadError("checkpoint truncated while reading header");
    json header;
    try {
        header = json::parse(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                             buf.begin() + static_cast<std::ptrdiff_t>(pos + len));
    } catch (const json::exception& e) {
        throw LoadError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    pos += len;

    try {
        ExperimentConfig cfg = config_from_json(header.at("config"));
        cfg.model = model_config_from_json(header.at("model"));
        LoadedCheckpoint out{cfg, RunState(build_model(cfg.model, cfg.seed), 0)};
        RunState& st = out.state;
        st.round = header.at("round").get<int>();
        std::istringstream rng(header.at("rng").get<std::string>());
        rng >> st.rng;
        if (!rng) throw LoadError("checkpoint RNG state is malformed");
        st.optimizer.steps = header.at("adam_steps").get<std::int64_t>();

        ParameterStore& params = st.model.parameters();
        const json& entries = header.at("parameters");
        if (static_cast<int>(entries.size()) != params.size())
            throw LoadError("checkpoint parameter count does not match the model");
        for (int i = 0; i < params.size(); ++i) {
            const json& e = entries[static_cast<std::size_t>(i)];
            Parameter& p = params.at(i);
            if (e.at("name").get<std::string>() != p.name || e.at("shape").get<std::vector<int>>() != p.value.shape)
                throw LoadError("checkpoint parameter '" + e.at("name").get<std::string>() + "' does not match the model");
        }
        for (int i = 0; i < params.size(); ++i) take_tensor(buf, pos, params.at(i).value, "parameters");
        for (Tensor& t : st.optimizer.first) take_tensor(buf, pos, t, "optimizer state");
        for (Tensor& t : st.optimizer.second) take_tensor(buf, pos, t, "optimizer state");
        if (pos != buf.size()) throw LoadError("checkpoint has trailing bytes");
        return out;
    } catch (const json::exception& e) {
        throw LoadError(std::string("checkpoint header is malformed: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(std::string("checkpoint config is invalid: ") + e.what());
    }
}

json pseudo_labels_to_json(const PseudoLabelFile& file) {
    json records = json::array();
    for (const PseudoLabelRecord& r : file.records)
        records.push_back({{"image_id", r.image_id},
                           {"round", r.round},
                           {"r", file.ratio},
                           {"coords", points_to_json(r.coords)},
                           {"confidences", r.confidences},
                           {"mask", r.mask},
                           {"thresholds", file.thresholds}});
    return {{"format", "udalm-pseudo-labels"},
            {"version", kPseudoLabelVersion},
            {"round", file.round},
            {"r", file.ratio},
            {"coord_space", "model_input_px"},
            {"thresholds", file.thresholds},
            {"selected", file.selected},
            {"records", records}};
}

PseudoLabelFile pseudo_labels_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != "udalm-pseudo-labels") throw LoadError("not a pseudo-label file");
        const int version = j.at("version").get<int>();
        if (version != kPseudoLabelVersion) throw LoadError("unsupported pseudo-label version " + std::to_string(version));
        PseudoLabelFile f;
        f.round = j.at("round").get<int>();
        f.ratio = j.at("r").get<double>();
        f.thresholds = j.at("thresholds").get<std::vector<double>>();
        f.selected = j.at("selected").get<std::vector<int>>();
        for (const json& e : j.at("records")) {
            PseudoLabelRecord r;
            r.image_id = e.at("image_id").get<std::string>();
            r.round = e.at("round").get<int>();
            for (const json& c : e.at("coords")) r.coords.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
            r.confidences = e.at("confidences").get<std::vector<double>>();
            r.mask = e.at("mask").get<LandmarkMask>();
            if (r.coords.size() != r.confidences.size() || r.mask.size() != r.confidences.size())
                throw LoadError("pseudo-label record '" + r.image_id + "' has inconsistent lengths");
            f.records.push_back(std::move(r));
        }
        return f;
    } catch (const json::exception& e) {
        throw LoadError(std::string("malformed pseudo-label file: ") + e.what());
    }
}

void save_pseudo_labels(const std::filesystem::path& path, const PseudoLabelFile& file) {
    write_atomic(path, pseudo_labels_to_json(file).dump(1) + "\n");
}

PseudoLabelFile load_pseudo_labels(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return pseudo_labels_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        throw LoadError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

}  // namespace udalm
