#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "udalm/image.hpp"
#include "udalm/objectives.hpp"

namespace udalm {

enum class Domain { source, target };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& name);

struct ImageSample {
    std::string id;
    Image image;                 // current pixels, [0,1]
    int original_width = 0;
    int original_height = 0;
    double spacing_x = 0.1;      // mm per original pixel
    double spacing_y = 0.1;
    std::optional<std::vector<Point>> landmarks;  // in current pixel space
    Domain domain = Domain::source;
    std::string subdomain;       // empty when untagged
    // current pixel → original pixel scale (per axis)
    double to_original_x = 1.0;
    double to_original_y = 1.0;

    Point to_original(Point p) const { return {p.x * to_original_x, p.y * to_original_y}; }
};

using Dataset = std::vector<ImageSample>;

/// Reads a manifest and its images. expected_landmarks < 0 accepts any count
/// as long as every labeled record agrees. Source records must be labeled.
Dataset load_dataset(const std::filesystem::path& manifest_path, int expected_landmarks = -1);

/// Writes images (16-bit PNG) under image_dir and a manifest describing them.
/// Paths inside the manifest are relative to the manifest's directory.
void write_dataset(const Dataset& samples, const std::filesystem::path& manifest_path,
                   const std::filesystem::path& image_dir);

Image read_image(const std::filesystem::path& path);
void write_image(const Image& image, const std::filesystem::path& path);
/// Rounds every pixel to the 16-bit grid used on disk.
void quantize_16bit(Image& image);

Image resize_image(const Image& image, int width, int height);
/// Bilinear resize; landmarks scale by (w′/w, h′/h) and the inverse map is kept.
ImageSample resize_with_labels(const ImageSample& sample, int width, int height);

/// p′ = M·p + t in continuous pixel coordinates.
struct Affine {
    double m00 = 1.0, m01 = 0.0, tx = 0.0;
    double m10 = 0.0, m11 = 1.0, ty = 0.0;

    Point apply(Point p) const { return {m00 * p.x + m01 * p.y + tx, m10 * p.x + m11 * p.y + ty}; }
    bool is_identity() const {
        return m00 == 1.0 && m01 == 0.0 && tx == 0.0 && m10 == 0.0 && m11 == 1.0 && ty == 0.0;
    }
    /// Scale s and rotation (degrees, counter-clockwise in image axes) about center, then translation.
    static Affine about_center(double scale, double rotate_deg, double shift_x, double shift_y, Point center);
};

/// Resamples the image so that content at p moves to A·p (bilinear, replicated border).
Image warp_affine(const Image& image, const Affine& transform);

struct AugmentConfig {
    bool enabled = true;
    double scale_min = 0.9;
    double scale_max = 1.1;
    double translate_max = 0.05;   // fraction of the image size, per axis
    double rotate_max_deg = 15.0;
    int occlusion_max_count = 2;
    double occlusion_max_fraction = 0.1;
    double occlusion_value = 0.0;
    double blur_prob = 0.3;
    int blur_kernel_min = 3;
    int blur_kernel_max = 5;

    void validate() const;
    static AugmentConfig identity();
};

struct Augmented {
    Image image;
    std::vector<Point> landmarks;
    LandmarkMask inside;  // 0 where the transformed landmark left the image
    Affine transform;
};

/// Applies one random affine map to pixels and landmarks, then occlusion and blur.
Augmented augment(const Image& image, std::span<const Point> landmarks, const AugmentConfig& config,
                  std::mt19937_64& rng);
ImageSample augment(const ImageSample& sample, const AugmentConfig& config, std::mt19937_64& rng);

/// Applies a fixed affine map to a sample's pixels and landmarks.
Augmented transform_sample(const Image& image, std::span<const Point> landmarks, const Affine& transform);

/// Index sequence of length target_count: whole repeats of every source index
/// plus a seeded random remainder without replacement.
std::vector<int> oversample_source(int source_count, int target_count, std::mt19937_64& rng);

struct ShiftParams {
    double gamma = 1.0;        // v ↦ v^gamma
    double brightness = 0.0;   // additive
    double contrast = 1.0;     // about 0.5
    double noise_std = 0.0;    // additive Gaussian
    double blur_sigma = 0.0;   // px
    double shape_scale = 1.0;  // base radius multiplier
    double bump_scale = 1.0;   // landmark feature amplitude multiplier
    int subdomains = 1;        // target split into this many device groups
    double subdomain_spread = 0.0;  // severity varies in [1 − spread, 1 + spread]

    static ShiftParams none();
    static ShiftParams defaults();
};

struct SynthConfig {
    std::uint64_t seed = 0;
    int n_source = 40;
    int n_target = 120;
    int n_test = 60;
    int num_landmarks = 6;
    int size = 64;
    double spacing_mm = 0.1;
    double source_noise_std = 0.02;
    ShiftParams shift = ShiftParams::defaults();

    void validate() const;
};

struct SynthDatasets {
    Dataset source;
    Dataset target_train;
    Dataset target_test;
};

/// Renders a closed smooth contour per image with landmarks at fixed arc-length
/// fractions; the target split receives the photometric and shape shift.
SynthDatasets synth_generate(const SynthConfig& config);

/// Writes {source/, target/, manifests/} under root.
void write_synth(const SynthDatasets& data, const std::filesystem::path& root);

}  // namespace udalm
