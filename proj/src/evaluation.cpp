#include "udalm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "udalm/error.hpp"

namespace udalm {

namespace {

std::string radius_label(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", r);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

GroupMetrics group_metrics(std::span<const ImageErrors> images, std::span<const double> radii, MreMode mode,
                           std::vector<double>* per_landmark) {
    if (images.empty()) throw InputError("aggregate needs at least one image");
    GroupMetrics g;
    g.n_images = static_cast<int>(images.size());
    std::size_t total = 0;
    double pooled = 0.0, per_image = 0.0;
    std::size_t l = images.front().errors_mm.size();
    std::vector<double> lm_sum(l, 0.0);
    std::vector<int> lm_n(l, 0);
    for (const ImageErrors& im : images) {
        if (im.errors_mm.empty()) throw InputError("image '" + im.image_id + "' has no errors");
        const double s = std::accumulate(im.errors_mm.begin(), im.errors_mm.end(), 0.0);
        pooled += s;
        per_image += s / static_cast<double>(im.errors_mm.size());
        total += im.errors_mm.size();
        if (im.errors_mm.size() > l) {
            l = im.errors_mm.size();
            lm_sum.resize(l, 0.0);
            lm_n.resize(l, 0);
        }
        for (std::size_t i = 0; i < im.errors_mm.size(); ++i) {
            lm_sum[i] += im.errors_mm[i];
            ++lm_n[i];
        }
    }
    g.mre_mm = mode == MreMode::pooled ? pooled / static_cast<double>(total)
                                       : per_image / static_cast<double>(images.size());
    for (double r : radii) {
        if (!(r >= 0.0)) throw InputError("radius must be non-negative");
        std::size_t hits = 0;
        for (const ImageErrors& im : images)
            for (double e : im.errors_mm)
                if (e <= r) ++hits;
        g.sdr[r] = 100.0 * static_cast<double>(hits) / static_cast<double>(total);
    }
    if (per_landmark) {
        per_landmark->assign(l, 0.0);
        for (std::size_t i = 0; i < l; ++i) (*per_landmark)[i] = lm_n[i] ? lm_sum[i] / lm_n[i] : 0.0;
    }
    return g;
}

cv::Mat blank_canvas(int w, int h) { return cv::Mat(h, w, CV_8UC3, cv::Scalar(255, 255, 255)); }

void write_png(const cv::Mat& img, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), img)) throw InputError("cannot write plot '" + path.string() + "'");
}

}  // namespace

std::vector<double> radial_errors(std::span<const Point> preds, std::span<const Point> gts, double spacing_x,
                                  double spacing_y) {
    if (preds.size() != gts.size()) throw InputError("prediction and ground-truth landmark counts differ");
    if (!(spacing_x > 0.0) || !(spacing_y > 0.0)) throw InputError("pixel spacing must be positive");
    std::vector<double> out(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double dx = (preds[i].x - gts[i].x) * spacing_x;
        const double dy = (preds[i].y - gts[i].y) * spacing_y;
        out[i] = std::sqrt(dx * dx + dy * dy);
    }
    return out;
}

EvalReport aggregate(std::span<const ImageErrors> images, std::span<const double> radii_mm, MreMode mode) {
    EvalReport r;
    const GroupMetrics g = group_metrics(images, radii_mm, mode, &r.per_landmark_mre);
    r.mre_mm = g.mre_mm;
    r.sdr = g.sdr;
    r.n_images = g.n_images;
    return r;
}

EvalReport subdomain_report(std::span<const ImageErrors> images, std::span<const double> radii_mm, MreMode mode) {
    EvalReport r = aggregate(images, radii_mm, mode);
    std::map<std::string, std::vector<ImageErrors>> groups;
    for (const ImageErrors& im : images) groups[im.subdomain.empty() ? "all" : im.subdomain].push_back(im);
    for (const auto& [tag, members] : groups) r.per_subdomain[tag] = group_metrics(members, radii_mm, mode, nullptr);
    return r;
}

std::vector<ImageErrors> evaluate_errors(const Model& model, const Dataset& samples) {
    const ModelConfig& mc = model.config();
    std::vector<ImageErrors> out;
    out.reserve(samples.size());
    for (const ImageSample& s : samples) {
        if (!s.landmarks) throw InputError("evaluation sample '" + s.id + "' has no landmarks");
        const ImageSample resized = resize_with_labels(s, mc.input_width, mc.input_height);
        const Prediction p = model.predict(resized.image);
        std::vector<Point> pred, gt;
        for (const Point& q : p.coords) pred.push_back(resized.to_original(q));
        for (const Point& q : *s.landmarks) gt.push_back(s.to_original(q));
        out.push_back({s.id, s.subdomain, radial_errors(pred, gt, s.spacing_x, s.spacing_y)});
    }
    return out;
}

EvalReport evaluate_model(const Model& model, const Dataset& samples, const EvalConfig& cfg) {
    const auto errors = evaluate_errors(model, samples);
    return subdomain_report(errors, cfg.radii_mm, cfg.mre_mode);
}

Histogram intensity_histogram(const Dataset& samples, int bins) {
    if (samples.empty()) throw InputError("histogram needs a non-empty dataset");
    if (bins < 1) throw InputError("histogram needs at least one bin");
    Histogram h;
    h.density.assign(static_cast<std::size_t>(bins), 0.0);
    double total = 0.0, sum = 0.0;
    for (const ImageSample& s : samples)
        for (double v : s.image.pixels) {
            const int b = std::clamp(static_cast<int>(std::floor(v * bins)), 0, bins - 1);
            h.density[static_cast<std::size_t>(b)] += 1.0;
            sum += v;
            total += 1.0;
        }
    for (double& d : h.density) d /= total;
    h.mean = sum / total;
    return h;
}

HistogramReport histogram_report(const Dataset& a, const Dataset& b, const std::filesystem::path& out_dir,
                                 const std::string& stem, int bins, const std::string& label_a,
                                 const std::string& label_b) {
    HistogramReport rep{intensity_histogram(a, bins), intensity_histogram(b, bins), 0.0};
    for (int i = 0; i < bins; ++i)
        rep.max_bin_difference = std::max(rep.max_bin_difference,
                                          std::abs(rep.a.density[static_cast<std::size_t>(i)] -
                                                   rep.b.density[static_cast<std::size_t>(i)]));
    std::filesystem::create_directories(out_dir);
    std::ofstream table(out_dir / (stem + ".txt"));
    if (!table) throw InputError("cannot write histogram table under '" + out_dir.string() + "'");
    table << "# mean " << label_a << " " << fixed(rep.a.mean, 6) << " " << label_b << " " << fixed(rep.b.mean, 6)
          << "\n";
    table << "bin_lo\tbin_hi\t" << label_a << "\t" << label_b << "\n";
    for (int i = 0; i < bins; ++i)
        table << fixed(static_cast<double>(i) / bins, 6) << '\t' << fixed(static_cast<double>(i + 1) / bins, 6)
              << '\t' << fixed(rep.a.density[static_cast<std::size_t>(i)], 8) << '\t'
              << fixed(rep.b.density[static_cast<std::size_t>(i)], 8) << '\n';

    const int w = 640, h = 360, margin = 40;
    cv::Mat img = blank_canvas(w, h);
    double peak = 1e-12;
    for (int i = 0; i < bins; ++i)
        peak = std::max({peak, rep.a.density[static_cast<std::size_t>(i)], rep.b.density[static_cast<std::size_t>(i)]});
    auto curve = [&](const Histogram& hist, const cv::Scalar& color) {
        std::vector<cv::Point> pts;
        for (int i = 0; i < bins; ++i) {
            const double x = margin + (w - 2 * margin) * (i + 0.5) / bins;
            const double y = h - margin - (h - 2 * margin) * hist.density[static_cast<std::size_t>(i)] / peak;
            pts.emplace_back(static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)));
        }
        cv::polylines(img, pts, false, color, 1, cv::LINE_AA);
    };
    cv::rectangle(img, {margin, margin}, {w - margin, h - margin}, cv::Scalar(0, 0, 0));
    curve(rep.a, cv::Scalar(200, 90, 30));
    curve(rep.b, cv::Scalar(30, 60, 220));
    cv::putText(img, label_a, {margin + 8, margin + 18}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(200, 90, 30), 1);
    cv::putText(img, label_b, {margin + 8, margin + 36}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(30, 60, 220), 1);
    cv::putText(img, "intensity 0..1", {w / 2 - 50, h - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1);
    write_png(img, out_dir / (stem + ".png"));
    return rep;
}

void write_subdomain_plot(const EvalReport& report, const std::filesystem::path& path) {
    const int n = std::max<int>(1, static_cast<int>(report.per_subdomain.size()));
    const int w = std::max(320, 90 * n + 80), h = 360, margin = 40;
    cv::Mat img = blank_canvas(w, h);
    double peak = report.mre_mm;
    for (const auto& [tag, g] : report.per_subdomain) peak = std::max(peak, g.mre_mm);
    peak = std::max(peak, 1e-9) * 1.15;
    cv::line(img, {margin, h - margin}, {w - margin / 2, h - margin}, cv::Scalar(0, 0, 0));
    const int slot = (w - margin - margin / 2) / n;
    int i = 0;
    for (const auto& [tag, g] : report.per_subdomain) {
        const int x0 = margin + i * slot + slot / 6, x1 = margin + (i + 1) * slot - slot / 6;
        const int top = h - margin - static_cast<int>(std::lround((h - 2 * margin) * g.mre_mm / peak));
        cv::rectangle(img, {x0, top}, {x1, h - margin}, cv::Scalar(180, 120, 60), cv::FILLED);
        cv::putText(img, fixed(g.mre_mm, 2), {x0, top - 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1);
        cv::putText(img, tag, {x0, h - margin + 16}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1);
        ++i;
    }
    const int mean_y = h - margin - static_cast<int>(std::lround((h - 2 * margin) * report.mre_mm / peak));
    cv::line(img, {margin, mean_y}, {w - margin / 2, mean_y}, cv::Scalar(40, 40, 220), 1, cv::LINE_AA);
    cv::putText(img, "MRE mm (line: overall)", {margin, 20}, cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1);
    write_png(img, path);
}

std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::vector<double> radii;
    for (const auto& [name, r] : rows)
        for (const auto& [rad, v] : r.sdr)
            if (std::find(radii.begin(), radii.end(), rad) == radii.end()) radii.push_back(rad);
    std::sort(radii.begin(), radii.end());
    std::ostringstream os;
    os << "| Method | MRE (mm) |";
    for (double rad : radii) os << " SDR " << radius_label(rad) << "mm (%) |";
    os << "\n|---|---:|";
    for (std::size_t i = 0; i < radii.size(); ++i) os << "---:|";
    os << "\n";
    for (const auto& [name, r] : rows) {
        os << "| " << name << " | " << fixed(r.mre_mm, 2) << " |";
        for (double rad : radii) {
            const auto it = r.sdr.find(rad);
            os << " " << (it == r.sdr.end() ? std::string("-") : fixed(it->second, 2)) << " |";
        }
        os << "\n";
    }
    return os.str();
}

std::string format_subdomain_table(const EvalReport& report) {
    std::ostringstream os;
    os << "| Subdomain | Images | MRE (mm) |";
    for (const auto& [rad, v] : report.sdr) os << " SDR " << radius_label(rad) << "mm (%) |";
    os << "\n|---|---:|---:|";
    for (std::size_t i = 0; i < report.sdr.size(); ++i) os << "---:|";
    os << "\n";
    auto row = [&](const std::string& name, const GroupMetrics& g) {
        os << "| " << name << " | " << g.n_images << " | " << fixed(g.mre_mm, 2) << " |";
        for (const auto& [rad, v] : report.sdr) {
            const auto it = g.sdr.find(rad);
            os << " " << (it == g.sdr.end() ? std::string("-") : fixed(it->second, 2)) << " |";
        }
        os << "\n";
    };
    for (const auto& [tag, g] : report.per_subdomain) row(tag, g);
    row("overall", GroupMetrics{report.mre_mm, report.sdr, report.n_images});
    return os.str();
}

namespace {

nlohmann::json sdr_to_json(const std::map<double, double>& sdr) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [r, v] : sdr) arr.push_back({{"radius_mm", r}, {"percent", v}});
    return arr;
}

std::map<double, double> sdr_from_json(const nlohmann::json& j) {
    std::map<double, double> out;
    for (const auto& e : j) out[e.at("radius_mm").get<double>()] = e.at("percent").get<double>();
    return out;
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["mre_mm"] = report.mre_mm;
    j["sdr"] = sdr_to_json(report.sdr);
    j["per_landmark_mre"] = report.per_landmark_mre;
    j["n_images"] = report.n_images;
    nlohmann::json sub = nlohmann::json::object();
    for (const auto& [tag, g] : report.per_subdomain)
        sub[tag] = {{"mre_mm", g.mre_mm}, {"sdr", sdr_to_json(g.sdr)}, {"n_images", g.n_images}};
    j["per_subdomain"] = sub;
    return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.mre_mm = j.at("mre_mm").get<double>();
        r.sdr = sdr_from_json(j.at("sdr"));
        r.per_landmark_mre = j.at("per_landmark_mre").get<std::vector<double>>();
        r.n_images = j.at("n_images").get<int>();
        if (j.contains("per_subdomain"))
            for (const auto& [tag, g] : j.at("per_subdomain").items())
                r.per_subdomain[tag] = {g.at("mre_mm").get<double>(), sdr_from_json(g.at("sdr")),
                                        g.at("n_images").get<int>()};
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("malformed report: ") + e.what());
    }
}

}  // namespace udalm
