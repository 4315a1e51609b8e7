#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "udalm/adaptation.hpp"
#include "udalm/config.hpp"

namespace udalm {

inline constexpr char kCheckpointMagic[] = "UDALM1";
inline constexpr int kCheckpointVersion = 1;
inline constexpr int kPseudoLabelVersion = 1;

// Layout: magic (6 bytes), u32 version, u64 header length, JSON header,
// then little-endian doubles: parameters, Adam first moments, Adam second moments.
void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& cfg, const RunState& state);

struct LoadedCheckpoint {
    ExperimentConfig config;
    RunState state;
};

/// Throws LoadError for a missing, truncated or foreign file.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

struct PseudoLabelFile {
    int round = 0;
    double ratio = 0.0;
    std::vector<double> thresholds;
    std::vector<int> selected;
    std::vector<PseudoLabelRecord> records;
};

nlohmann::json pseudo_labels_to_json(const PseudoLabelFile& file);
PseudoLabelFile pseudo_labels_from_json(const nlohmann::json& j);
void save_pseudo_labels(const std::filesystem::path& path, const PseudoLabelFile& file);
PseudoLabelFile load_pseudo_labels(const std::filesystem::path& path);

/// Writes text through a temporary file and a rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace udalm
