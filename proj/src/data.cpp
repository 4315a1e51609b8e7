#include "udalm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "udalm/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace udalm {

namespace {

constexpr const char* kManifestFormat = "udalm-manifest";
constexpr int kManifestVersion = 1;

cv::Mat to_mat(const Image& image) {
    cv::Mat m(image.height, image.width, CV_64F);
    std::copy(image.pixels.begin(), image.pixels.end(), m.ptr<double>());
    return m;
}

Image from_mat(const cv::Mat& m) {
    cv::Mat d;
    m.convertTo(d, CV_64F);
    Image out(d.cols, d.rows);
    for (int y = 0; y < d.rows; ++y) std::copy(d.ptr<double>(y), d.ptr<double>(y) + d.cols, &out.at(0, y));
    return out;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

bool inside_image(Point p, int w, int h) { return p.x >= 0.0 && p.x < w && p.y >= 0.0 && p.y < h; }

double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a + std::numbers::pi, two_pi);
    if (a < 0) a += two_pi;
    return a - std::numbers::pi;
}

std::string indexed(const std::string& prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04d", prefix.c_str(), i);
    return buf;
}

struct Anatomy {
    Point center;
    double radius = 0.0;
    double a2 = 0.0, p2 = 0.0, a3 = 0.0, p3 = 0.0;
    std::vector<double> angles;   // landmark angles
    std::vector<double> heights;  // signed feature amplitude (px)
    std::vector<double> widths;   // angular width (rad)
    double rim = 0.0;
    double texture_phase = 0.0;

    double base_radius(double theta) const {
        return radius * (1.0 + a2 * std::cos(2.0 * theta + p2) + a3 * std::cos(3.0 * theta + p3));
    }
    double contour_radius(double theta) const {
        double r = base_radius(theta);
        for (std::size_t l = 0; l < angles.size(); ++l) {
            const double d = wrap_angle(theta - angles[l]);
            r += heights[l] * std::exp(-d * d / (2.0 * widths[l] * widths[l]));
        }
        return r;
    }
    Point landmark(std::size_t l) const {
        const double r = contour_radius(angles[l]);
        return {center.x + r * std::cos(angles[l]), center.y + r * std::sin(angles[l])};
    }
};

Anatomy sample_anatomy(std::mt19937_64& rng, int num_landmarks, int size, const ShiftParams& shift) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    Anatomy a;
    a.center = {size * 0.5 + n(rng) * 0.03 * size, size * 0.5 + n(rng) * 0.03 * size};
    a.radius = size * (0.22 + 0.05 * u(rng)) * shift.shape_scale;
    a.a2 = 0.08 * (2.0 * u(rng) - 1.0);
    a.a3 = 0.05 * (2.0 * u(rng) - 1.0);
    a.p2 = 2.0 * std::numbers::pi * u(rng);
    a.p3 = 2.0 * std::numbers::pi * u(rng);
    const double phase = 0.3 * (2.0 * u(rng) - 1.0);

    // Landmarks sit at fixed arc-length fractions of the base contour, starting at `phase`.
    constexpr int kSteps = 1440;
    std::vector<double> cumulative(kSteps + 1, 0.0);
    auto at = [&](double t) {
        const double r = a.base_radius(t);
        return Point{r * std::cos(t), r * std::sin(t)};
    };
    Point prev = at(phase);
    for (int i = 1; i <= kSteps; ++i) {
        const Point cur = at(phase + 2.0 * std::numbers::pi * i / kSteps);
        cumulative[i] = cumulative[i - 1] + std::hypot(cur.x - prev.x, cur.y - prev.y);
        prev = cur;
    }
    const double total = cumulative.back();
    for (int l = 0; l < num_landmarks; ++l) {
        const double target = total * l / num_landmarks;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
        const int step = static_cast<int>(it - cumulative.begin());
        a.angles.push_back(phase + 2.0 * std::numbers::pi * step / kSteps);
        // even landmarks are protrusions, odd ones notches; widths cycle in thirds
        const double sign = (l % 2 == 0) ? 1.0 : -1.0;
        a.heights.push_back(sign * a.radius * (0.20 + 0.04 * (l % 3) + 0.03 * u(rng)) * shift.bump_scale);
        a.widths.push_back(0.16 + 0.05 * (l % 3));
    }
    a.rim = 0.12 + 0.06 * u(rng);
    a.texture_phase = 2.0 * std::numbers::pi * u(rng);
    return a;
}

Image render(const Anatomy& a, int size) {
    Image img(size, size);
    constexpr double bg = 0.22, fg = 0.62;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double px = x + 0.5 - a.center.x, py = y + 0.5 - a.center.y;
            const double d = std::hypot(px, py);
            const double r = a.contour_radius(std::atan2(py, px));
            const double inside = 1.0 / (1.0 + std::exp(-(r - d) / 0.7));
            const double depth = r - d - 2.5;
            const double rim = a.rim * std::exp(-depth * depth / (2.0 * 1.2 * 1.2));
            const double texture = 0.05 * std::sin(0.35 * px + a.texture_phase) * std::cos(0.29 * py);
            img.at(x, y) = bg + (fg - bg + texture) * inside + rim * inside;
        }
    }
    return img;
}

void apply_photometric(Image& img, const ShiftParams& s, double severity, std::mt19937_64& rng) {
    const double gamma = 1.0 + (s.gamma - 1.0) * severity;
    const double contrast = 1.0 + (s.contrast - 1.0) * severity;
    const double brightness = s.brightness * severity;
    const double noise = s.noise_std * severity;
    const double blur = s.blur_sigma * severity;
    if (blur > 0.0) {
        cv::Mat m = to_mat(img), out;
        cv::GaussianBlur(m, out, cv::Size(0, 0), blur, blur, cv::BORDER_REPLICATE);
        img = from_mat(out);
    }
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : img.pixels) {
        double t = std::pow(std::clamp(v, 0.0, 1.0), gamma);
        t = contrast * (t - 0.5) + 0.5 + brightness;
        if (noise > 0.0) t += noise * n(rng);
        v = std::clamp(t, 0.0, 1.0);
    }
}

void add_noise(Image& img, double stddev, std::mt19937_64& rng) {
    if (stddev <= 0.0) return;
    std::normal_distribution<double> n(0.0, stddev);
    for (double& v : img.pixels) v = std::clamp(v + n(rng), 0.0, 1.0);
}

ImageSample make_sample(std::uint64_t seed, std::uint64_t stream, int index, const SynthConfig& cfg, Domain domain,
                        const std::string& id, const ShiftParams& shape_shift, const ShiftParams* photometric,
                        std::string subdomain, double severity) {
    std::mt19937_64 rng(mix(mix(seed, stream), static_cast<std::uint64_t>(index)));
    Anatomy a;
    std::vector<Point> landmarks;
    for (int attempt = 0;; ++attempt) {
        a = sample_anatomy(rng, cfg.num_landmarks, cfg.size, shape_shift);
        landmarks.clear();
        for (int l = 0; l < cfg.num_landmarks; ++l) landmarks.push_back(a.landmark(static_cast<std::size_t>(l)));
        const bool ok = std::all_of(landmarks.begin(), landmarks.end(), [&](Point p) {
            return p.x >= 1.0 && p.y >= 1.0 && p.x < cfg.size - 1.0 && p.y < cfg.size - 1.0;
        });
        if (ok) break;
        if (attempt > 100) throw ConfigError("synthetic anatomy does not fit the image; lower shape_scale");
    }
    ImageSample s;
    s.id = id;
    s.image = render(a, cfg.size);
    add_noise(s.image, cfg.source_noise_std, rng);
    if (photometric) apply_photometric(s.image, *photometric, severity, rng);
    quantize_16bit(s.image);
    s.original_width = cfg.size;
    s.original_height = cfg.size;
    s.spacing_x = s.spacing_y = cfg.spacing_mm;
    s.landmarks = std::move(landmarks);
    s.domain = domain;
    s.subdomain = std::move(subdomain);
    return s;
}

json sample_to_json(const ImageSample& s, const std::string& image_path) {
    json j;
    j["id"] = s.id;
    j["image_path"] = image_path;
    j["width"] = s.original_width;
    j["height"] = s.original_height;
    j["spacing_mm"] = {s.spacing_x, s.spacing_y};
    j["domain"] = to_string(s.domain);
    if (!s.subdomain.empty()) j["subdomain"] = s.subdomain;
    if (s.landmarks) {
        json pts = json::array();
        for (const Point& p : *s.landmarks) pts.push_back({p.x, p.y});
        j["landmarks"] = pts;
    }
    return j;
}

}  // namespace

std::string to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain domain_from_string(const std::string& name) {
    if (name == "source") return Domain::source;
    if (name == "target") return Domain::target;
    throw LoadError("unknown domain '" + name + "'");
}

void quantize_16bit(Image& image) {
    for (double& v : image.pixels) v = std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0;
}

Image read_image(const fs::path& path) {
    const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
    if (raw.empty()) throw LoadError("cannot read image " + path.string());
    if (raw.channels() != 1) throw LoadError("image " + path.string() + " is not single-channel grayscale");
    double full_scale = 1.0;
    switch (raw.depth()) {
        case CV_8U: full_scale = 255.0; break;
        case CV_16U: full_scale = 65535.0; break;
        default: throw LoadError("image " + path.string() + " must be 8- or 16-bit");
    }
    Image img(raw.cols, raw.rows);
    for (int y = 0; y < raw.rows; ++y)
        for (int x = 0; x < raw.cols; ++x)
            img.at(x, y) = (raw.depth() == CV_8U ? raw.at<std::uint8_t>(y, x) : raw.at<std::uint16_t>(y, x)) / full_scale;
    return img;
}

void write_image(const Image& image, const fs::path& path) {
    cv::Mat m(image.height, image.width, CV_16U);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(std::clamp(image.at(x, y), 0.0, 1.0) * 65535.0));
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), m)) throw LoadError("cannot write image " + path.string());
}

Dataset load_dataset(const fs::path& manifest_path, int expected_landmarks) {
    std::ifstream in(manifest_path);
    if (!in) throw LoadError("cannot open manifest " + manifest_path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw LoadError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
    }
    if (doc.value("format", "") != kManifestFormat) throw LoadError("manifest format must be '" + std::string(kManifestFormat) + "'");
    if (doc.value("version", 0) != kManifestVersion) throw LoadError("unsupported manifest version");
    if (expected_landmarks < 0 && doc.contains("num_landmarks")) expected_landmarks = doc["num_landmarks"].get<int>();

    const fs::path base = manifest_path.parent_path();
    Dataset out;
    for (const json& rec : doc.at("samples")) {
        const std::string id = rec.value("id", std::string("<unnamed>"));
        auto fail = [&](const std::string& why) { throw LoadError("record '" + id + "': " + why); };
        try {
            ImageSample s;
            s.id = id;
            const fs::path img_path = base / rec.at("image_path").get<std::string>();
            if (!fs::exists(img_path)) fail("missing image file " + img_path.string());
            s.image = read_image(img_path);
            s.original_width = rec.at("width").get<int>();
            s.original_height = rec.at("height").get<int>();
            if (s.image.width != s.original_width || s.image.height != s.original_height)
                fail("image size does not match manifest width/height");
            const auto sp = rec.at("spacing_mm").get<std::vector<double>>();
            if (sp.size() != 2 || !(sp[0] > 0.0) || !(sp[1] > 0.0)) fail("spacing_mm must be two positive values");
            s.spacing_x = sp[0];
            s.spacing_y = sp[1];
            s.domain = domain_from_string(rec.at("domain").get<std::string>());
            s.subdomain = rec.value("subdomain", std::string());
            if (rec.contains("landmarks") && !rec["landmarks"].is_null()) {
                std::vector<Point> pts;
                for (const json& p : rec["landmarks"]) {
                    const auto xy = p.get<std::vector<double>>();
                    if (xy.size() != 2) fail("landmark entries must be [x, y]");
                    pts.push_back({xy[0], xy[1]});
                }
                if (expected_landmarks >= 0 && static_cast<int>(pts.size()) != expected_landmarks)
                    fail("landmark count mismatch (got " + std::to_string(pts.size()) + ", expected " +
                         std::to_string(expected_landmarks) + ")");
                if (expected_landmarks < 0) expected_landmarks = static_cast<int>(pts.size());
                for (const Point& p : pts)
                    if (!inside_image(p, s.original_width, s.original_height)) fail("landmark out of bounds");
                s.landmarks = std::move(pts);
            } else if (s.domain == Domain::source) {
                fail("source records must carry landmarks");
            }
            out.push_back(std::move(s));
        } catch (const json::exception& e) {
            fail(std::string("malformed field: ") + e.what());
        }
    }
    return out;
}

void write_dataset(const Dataset& samples, const fs::path& manifest_path, const fs::path& image_dir) {
    fs::create_directories(image_dir);
    if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
    json doc;
    doc["format"] = kManifestFormat;
    doc["version"] = kManifestVersion;
    int landmarks = -1;
    json arr = json::array();
    for (const ImageSample& s : samples) {
        const fs::path img = image_dir / (s.id + ".png");
        write_image(s.image, img);
        arr.push_back(sample_to_json(s, fs::relative(img, manifest_path.parent_path().empty() ? fs::path(".")
                                                                                                  : manifest_path.parent_path())
                                            .generic_string()));
        if (s.landmarks) landmarks = static_cast<int>(s.landmarks->size());
    }
    if (landmarks >= 0) doc["num_landmarks"] = landmarks;
    doc["samples"] = std::move(arr);
    std::ofstream out(manifest_path);
    if (!out) throw LoadError("cannot write manifest " + manifest_path.string());
    out << doc.dump(1) << '\n';
}

Image resize_image(const Image& image, int width, int height) {
    if (width == image.width && height == image.height) return image;
    cv::Mat out;
    cv::resize(to_mat(image), out, cv::Size(width, height), 0.0, 0.0, cv::INTER_LINEAR);
    return from_mat(out);
}

ImageSample resize_with_labels(const ImageSample& sample, int width, int height) {
    if (width <= 0 || height <= 0) throw InputError("resize target must be positive");
    ImageSample out = sample;
    const int w = sample.image.width, h = sample.image.height;
    if (w == width && h == height) return out;
    out.image = resize_image(sample.image, width, height);
    const double sx = static_cast<double>(width) / w, sy = static_cast<double>(height) / h;
    if (out.landmarks)
        for (Point& p : *out.landmarks) p = {p.x * sx, p.y * sy};
    out.to_original_x = sample.to_original_x / sx;
    out.to_original_y = sample.to_original_y / sy;
    return out;
}

Affine Affine::about_center(double scale, double rotate_deg, double shift_x, double shift_y, Point center) {
    const double t = rotate_deg * std::numbers::pi / 180.0;
    const double c = std::cos(t) * scale, s = std::sin(t) * scale;
    Affine a;
    a.m00 = c;
    a.m01 = -s;
    a.m10 = s;
    a.m11 = c;
    a.tx = center.x - (c * center.x - s * center.y) + shift_x;
    a.ty = center.y - (s * center.x + c * center.y) + shift_y;
    return a;
}

Image warp_affine(const Image& image, const Affine& a) {
    if (a.is_identity()) return image;
    // OpenCV puts pixel centers on integers; shift the translation by half a pixel.
    const double tx = a.m00 * 0.5 + a.m01 * 0.5 + a.tx - 0.5;
    const double ty = a.m10 * 0.5 + a.m11 * 0.5 + a.ty - 0.5;
    const cv::Mat m = (cv::Mat_<double>(2, 3) << a.m00, a.m01, tx, a.m10, a.m11, ty);
    cv::Mat out;
    cv::warpAffine(to_mat(image), out, m, cv::Size(image.width, image.height), cv::INTER_LINEAR, cv::BORDER_REPLICATE);
    return from_mat(out);
}

void AugmentConfig::validate() const {
    if (!(scale_min > 0.0) || scale_min > scale_max) throw ConfigError("augment scale range must satisfy 0 < min <= max");
    if (translate_max < 0.0 || rotate_max_deg < 0.0) throw ConfigError("augment translate/rotate ranges must be >= 0");
    if (occlusion_max_count < 0 || occlusion_max_fraction < 0.0 || occlusion_max_fraction > 1.0)
        throw ConfigError("augment occlusion settings out of range");
    if (blur_prob < 0.0 || blur_prob > 1.0) throw ConfigError("augment blur_prob must lie in [0,1]");
    if (blur_kernel_min < 1 || blur_kernel_min > blur_kernel_max || blur_kernel_min % 2 == 0 || blur_kernel_max % 2 == 0)
        throw ConfigError("augment blur kernel range must be odd and ordered");
}

AugmentConfig AugmentConfig::identity() {
    AugmentConfig c;
    c.scale_min = c.scale_max = 1.0;
    c.translate_max = 0.0;
    c.rotate_max_deg = 0.0;
    c.occlusion_max_count = 0;
    c.blur_prob = 0.0;
    return c;
}

Augmented transform_sample(const Image& image, std::span<const Point> landmarks, const Affine& transform) {
    Augmented out;
    out.transform = transform;
    out.image = warp_affine(image, transform);
    for (const Point& p : landmarks) {
        const Point q = transform.apply(p);
        out.landmarks.push_back(q);
        out.inside.push_back(inside_image(q, image.width, image.height) ? 1 : 0);
    }
    return out;
}

Augmented augment(const Image& image, std::span<const Point> landmarks, const AugmentConfig& cfg,
                  std::mt19937_64& rng) {
    if (!cfg.enabled) return transform_sample(image, landmarks, Affine{});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto range = [&](double lo, double hi) { return lo == hi ? lo : lo + (hi - lo) * u(rng); };
    const double scale = range(cfg.scale_min, cfg.scale_max);
    const double rot = range(-cfg.rotate_max_deg, cfg.rotate_max_deg);
    const double tx = range(-cfg.translate_max, cfg.translate_max) * image.width;
    const double ty = range(-cfg.translate_max, cfg.translate_max) * image.height;
    const Affine a = Affine::about_center(scale, rot, tx, ty, {image.width * 0.5, image.height * 0.5});
    Augmented out = transform_sample(image, landmarks, a);

    if (cfg.occlusion_max_count > 0 && cfg.occlusion_max_fraction > 0.0) {
        const int count = std::uniform_int_distribution<int>(0, cfg.occlusion_max_count)(rng);
        for (int i = 0; i < count; ++i) {
            const int rw = std::max(1, static_cast<int>(std::lround(range(0.0, cfg.occlusion_max_fraction) * image.width)));
            const int rh = std::max(1, static_cast<int>(std::lround(range(0.0, cfg.occlusion_max_fraction) * image.height)));
            const int x0 = std::uniform_int_distribution<int>(0, image.width - rw)(rng);
            const int y0 = std::uniform_int_distribution<int>(0, image.height - rh)(rng);
            for (int y = y0; y < y0 + rh; ++y)
                for (int x = x0; x < x0 + rw; ++x) out.image.at(x, y) = cfg.occlusion_value;
        }
    }
    if (cfg.blur_prob > 0.0 && u(rng) < cfg.blur_prob) {
        const int steps = (cfg.blur_kernel_max - cfg.blur_kernel_min) / 2;
        const int k = cfg.blur_kernel_min + 2 * std::uniform_int_distribution<int>(0, steps)(rng);
        cv::Mat blurred;
        cv::GaussianBlur(to_mat(out.image), blurred, cv::Size(k, k), 0.0, 0.0, cv::BORDER_REPLICATE);
        out.image = from_mat(blurred);
    }
    return out;
}

ImageSample augment(const ImageSample& sample, const AugmentConfig& config, std::mt19937_64& rng) {
    if (!sample.landmarks) throw InputError("augment needs a labeled or pseudo-labeled sample");
    Augmented a = augment(sample.image, *sample.landmarks, config, rng);
    ImageSample out = sample;
    out.image = std::move(a.image);
    out.landmarks = std::move(a.landmarks);
    return out;
}

std::vector<int> oversample_source(int source_count, int target_count, std::mt19937_64& rng) {
    if (source_count <= 0) throw InputError("oversample_source: empty source set");
    if (target_count < source_count) throw InputError("oversample_source: target count below source count");
    std::vector<int> seq;
    seq.reserve(static_cast<std::size_t>(target_count));
    const int repeats = target_count / source_count;
    for (int r = 0; r < repeats; ++r)
        for (int i = 0; i < source_count; ++i) seq.push_back(i);
    std::vector<int> order(static_cast<std::size_t>(source_count));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < target_count % source_count; ++i) seq.push_back(order[static_cast<std::size_t>(i)]);
    return seq;
}

ShiftParams ShiftParams::none() { return ShiftParams{}; }

ShiftParams ShiftParams::defaults() {
    ShiftParams s;
    s.gamma = 0.8;
    s.brightness = 0.05;
    s.contrast = 0.8;
    s.noise_std = 0.01;
    s.blur_sigma = 0.6;
    s.shape_scale = 1.06;
    s.bump_scale = 0.85;
    s.subdomains = 3;
    s.subdomain_spread = 0.4;
    return s;
}

void SynthConfig::validate() const {
    if (num_landmarks < 1 || num_landmarks > 16) throw ConfigError("synth.num_landmarks must lie in [1,16]");
    if (size < 64) throw ConfigError("synth.size must be >= 64");
    if (n_source < 0 || n_target < 0 || n_test < 0) throw ConfigError("synth split sizes must be >= 0");
    if (!(spacing_mm > 0.0)) throw ConfigError("synth.spacing_mm must be positive");
    if (shift.subdomains < 1) throw ConfigError("synth.shift.subdomains must be >= 1");
    if (!(shift.gamma > 0.0) || !(shift.shape_scale > 0.0)) throw ConfigError("synth.shift gamma/shape_scale must be positive");
}

SynthDatasets synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthDatasets out;
    const ShiftParams none = ShiftParams::none();
    for (int i = 0; i < cfg.n_source; ++i)
        out.source.push_back(make_sample(cfg.seed, 1, i, cfg, Domain::source, indexed("src", i), none, nullptr, "", 0.0));

    const int k = cfg.shift.subdomains;
    auto severity = [&](int group) {
        if (k == 1) return 1.0;
        return 1.0 - cfg.shift.subdomain_spread + 2.0 * cfg.shift.subdomain_spread * group / (k - 1);
    };
    auto target_split = [&](int count, std::uint64_t stream, const std::string& prefix, Dataset& dst) {
        for (int i = 0; i < count; ++i) {
            const int group = i % k;
            dst.push_back(make_sample(cfg.seed, stream, i, cfg, Domain::target, indexed(prefix, i), cfg.shift, &cfg.shift,
                                      "device_" + std::to_string(group), severity(group)));
        }
    };
    target_split(cfg.n_target, 2, "tgt", out.target_train);
    target_split(cfg.n_test, 3, "test", out.target_test);
    return out;
}

void write_synth(const SynthDatasets& data, const fs::path& root) {
    write_dataset(data.source, root / "manifests" / "source_train.json", root / "source");
    write_dataset(data.target_train, root / "manifests" / "target_train.json", root / "target");
    write_dataset(data.target_test, root / "manifests" / "target_test.json", root / "target");
}

}  // namespace udalm
