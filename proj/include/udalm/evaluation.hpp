#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "udalm/config.hpp"
#include "udalm/data.hpp"
#include "udalm/model.hpp"

namespace udalm {

/// Radial errors (mm) of one image in original pixel space.
struct ImageErrors {
    std::string image_id;
    std::string subdomain;
    std::vector<double> errors_mm;
};

struct GroupMetrics {
    double mre_mm = 0.0;
    std::map<double, double> sdr;  // radius mm → percent
    int n_images = 0;
};

struct EvalReport {
    double mre_mm = 0.0;
    std::map<double, double> sdr;
    std::vector<double> per_landmark_mre;
    std::map<std::string, GroupMetrics> per_subdomain;
    int n_images = 0;
};

/// error_l = sqrt((Δx·sx)² + (Δy·sy)²).
std::vector<double> radial_errors(std::span<const Point> preds, std::span<const Point> gts, double spacing_x,
                                  double spacing_y);

/// Pooled (or per-image) MRE and SDR(ρ) = 100·|{e ≤ ρ}| / total. Empty input is an InputError.
EvalReport aggregate(std::span<const ImageErrors> images, std::span<const double> radii_mm,
                     MreMode mode = MreMode::pooled);

/// Overall report plus one entry per subdomain tag; untagged samples form the group "all".
EvalReport subdomain_report(std::span<const ImageErrors> images, std::span<const double> radii_mm,
                            MreMode mode = MreMode::pooled);

/// Predictions for samples at their current resolution mapped back to original pixels.
/// Samples must be labeled.
std::vector<ImageErrors> evaluate_errors(const Model& model, const Dataset& samples);
EvalReport evaluate_model(const Model& model, const Dataset& samples, const EvalConfig& cfg);

struct Histogram {
    std::vector<double> density;  // sums to 1
    double mean = 0.0;
};

Histogram intensity_histogram(const Dataset& samples, int bins = 256);

struct HistogramReport {
    Histogram a;
    Histogram b;
    double max_bin_difference = 0.0;
};

/// Writes <stem>.txt (numeric table) and <stem>.png (curves) under out_dir.
HistogramReport histogram_report(const Dataset& a, const Dataset& b, const std::filesystem::path& out_dir,
                                 const std::string& stem = "histogram", int bins = 256,
                                 const std::string& label_a = "source", const std::string& label_b = "target");

/// Bar chart of per-subdomain MRE.
void write_subdomain_plot(const EvalReport& report, const std::filesystem::path& path);

/// Markdown table rows: one per named report.
std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows);
std::string format_subdomain_table(const EvalReport& report);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace udalm
