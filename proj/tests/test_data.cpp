#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include <json.hpp>

#include "test_util.hpp"
#include "udalm/data.hpp"
#include "udalm/error.hpp"
#include "udalm/evaluation.hpp"

using namespace udalm;
namespace fs = std::filesystem;

namespace {

ImageSample labeled(int w, int h, std::vector<Point> lms) {
    ImageSample s;
    s.id = "s";
    s.image = Image(w, h);
    s.original_width = w;
    s.original_height = h;
    s.landmarks = std::move(lms);
    return s;
}

void write_manifest(const fs::path& path, const nlohmann::json& samples) {
    std::ofstream(path) << nlohmann::json{{"format", "udalm-manifest"}, {"version", 1}, {"samples", samples}}.dump();
}

// Two-sample Kolmogorov–Smirnov statistic over pixel intensities.
double ks_statistic(const Dataset& a, const Dataset& b) {
    std::vector<double> x, y;
    for (const auto& s : a) x.insert(x.end(), s.image.pixels.begin(), s.image.pixels.end());
    for (const auto& s : b) y.insert(y.end(), s.image.pixels.begin(), s.image.pixels.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= v) ++i;
        while (j < y.size() && y[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / x.size() - static_cast<double>(j) / y.size()));
    }
    return d;
}

}  // namespace

TEST_CASE("resize maps the midpoint of a cephalogram exactly") {
    ImageSample s = labeled(1935, 2400, {{967.5, 1200.0}});
    const ImageSample r = resize_with_labels(s, 640, 800);
    CHECK(r.image.width == 640);
    CHECK(r.image.height == 800);
    CHECK((*r.landmarks)[0].x == doctest::Approx(320.0).epsilon(1e-12));
    CHECK((*r.landmarks)[0].y == doctest::Approx(400.0).epsilon(1e-12));
    const Point back = r.to_original((*r.landmarks)[0]);
    CHECK(std::abs(back.x - 967.5) < 1e-9);
    CHECK(std::abs(back.y - 1200.0) < 1e-9);
}

TEST_CASE("resize to the same size is the identity") {
    ImageSample s = labeled(20, 10, {{3.25, 7.5}});
    std::mt19937_64 rng(1);
    for (double& v : s.image.pixels) v = std::uniform_real_distribution<double>(0, 1)(rng);
    const ImageSample r = resize_with_labels(s, 20, 10);
    CHECK(r.image.pixels == s.image.pixels);
    CHECK((*r.landmarks)[0].x == 3.25);
    CHECK(r.to_original_x == 1.0);
}

TEST_CASE("resize round trip on landmarks is exact") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const int w = 50 + static_cast<int>(u(rng) * 400), h = 50 + static_cast<int>(u(rng) * 400);
        ImageSample s = labeled(w, h, {{u(rng) * w, u(rng) * h}});
        const ImageSample r = resize_with_labels(s, 64, 48);
        const Point back = r.to_original((*r.landmarks)[0]);
        CHECK(std::abs(back.x - (*s.landmarks)[0].x) < 1e-9);
        CHECK(std::abs(back.y - (*s.landmarks)[0].y) < 1e-9);
    }
}

TEST_CASE("identity augmentation leaves the sample unchanged") {
    ImageSample s = labeled(32, 32, {{5.5, 20.25}, {30.0, 1.0}});
    std::mt19937_64 rng(3);
    for (double& v : s.image.pixels) v = std::uniform_real_distribution<double>(0, 1)(rng);
    const Augmented a = augment(s.image, *s.landmarks, AugmentConfig::identity(), rng);
    CHECK(a.transform.is_identity());
    for (std::size_t i = 0; i < s.image.pixels.size(); ++i) CHECK(a.image.pixels[i] == doctest::Approx(s.image.pixels[i]).epsilon(1e-12));
    CHECK(a.landmarks[0].x == 5.5);
    CHECK(a.landmarks[1].y == 1.0);
    CHECK(a.inside == LandmarkMask{1, 1});
}

TEST_CASE("pure translation shifts every landmark") {
    ImageSample s = labeled(64, 64, {{5.0, 6.0}, {40.0, 12.5}, {60.0, 60.0}});
    const Affine t = Affine::about_center(1.0, 0.0, 10.0, 0.0, {32.0, 32.0});
    const Augmented a = transform_sample(s.image, *s.landmarks, t);
    CHECK(a.landmarks[0].x == doctest::Approx(15.0));
    CHECK(a.landmarks[1].x == doctest::Approx(50.0));
    CHECK(a.landmarks[1].y == doctest::Approx(12.5));
    CHECK(a.inside == LandmarkMask{1, 1, 0});  // 70 px leaves the image and is masked
}

TEST_CASE("rotation about the center matches a direct rotation matrix") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 64.0), ang(-180.0, 180.0);
    for (double deg : {90.0, ang(rng), ang(rng), ang(rng)}) {
        const Affine a = Affine::about_center(1.0, deg, 0.0, 0.0, {32.0, 32.0});
        const double t = deg * std::numbers::pi / 180.0;
        for (int i = 0; i < 20; ++i) {
            const Point p{u(rng), u(rng)};
            const Point q = a.apply(p);
            const double ex = 32.0 + std::cos(t) * (p.x - 32.0) - std::sin(t) * (p.y - 32.0);
            const double ey = 32.0 + std::sin(t) * (p.x - 32.0) + std::cos(t) * (p.y - 32.0);
            CHECK(std::abs(q.x - ex) < 1e-6);
            CHECK(std::abs(q.y - ey) < 1e-6);
        }
    }
}

TEST_CASE("warped indicator images peak at the transformed landmarks") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(20.0, 44.0);
    AugmentConfig cfg = AugmentConfig::identity();
    cfg.scale_min = 0.9;
    cfg.scale_max = 1.1;
    cfg.rotate_max_deg = 15.0;
    cfg.translate_max = 0.05;
    for (int trial = 0; trial < 30; ++trial) {
        const Point lm{u(rng), u(rng)};
        // Gaussian blob centered on the landmark in continuous coordinates.
        Image img(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const double dx = x + 0.5 - lm.x, dy = y + 0.5 - lm.y;
                img.at(x, y) = std::exp(-(dx * dx + dy * dy) / (2 * 2.0 * 2.0));
            }
        const Point lms[] = {lm};
        const Augmented a = augment(img, lms, cfg, rng);
        double sx = 0, sy = 0, sw = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const double w = std::pow(a.image.at(x, y), 4);
                sx += w * (x + 0.5);
                sy += w * (y + 0.5);
                sw += w;
            }
        CHECK(std::abs(sx / sw - a.landmarks[0].x) < 0.5);
        CHECK(std::abs(sy / sw - a.landmarks[0].y) < 0.5);
    }
}

TEST_CASE("augmentation is reproducible from the rng state") {
    ImageSample s = labeled(32, 32, {{10.0, 10.0}});
    std::mt19937_64 a(9), b(9);
    const Augmented x = augment(s.image, *s.landmarks, AugmentConfig{}, a);
    const Augmented y = augment(s.image, *s.landmarks, AugmentConfig{}, b);
    CHECK(x.image.pixels == y.image.pixels);
    CHECK(x.landmarks[0].x == y.landmarks[0].x);
}

TEST_CASE("augment config validation") {
    AugmentConfig c;
    c.scale_min = 1.2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = AugmentConfig{};
    c.blur_kernel_min = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = AugmentConfig{};
    c.blur_prob = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("oversampling repeats sources evenly") {
    std::mt19937_64 rng(6);
    const auto seq = oversample_source(150, 500, rng);
    CHECK(seq.size() == 500);
    std::map<int, int> counts;
    for (int i : seq) ++counts[i];
    CHECK(counts.size() == 150);
    for (const auto& [id, n] : counts) {
        CHECK(n >= 3);
        CHECK(n <= 4);
    }
    const auto same = oversample_source(7, 7, rng);
    CHECK(std::set<int>(same.begin(), same.end()).size() == 7);
    CHECK_THROWS_AS(oversample_source(0, 5, rng), InputError);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 40), m = n + static_cast<int>(rng() % 200);
        std::map<int, int> c;
        for (int i : oversample_source(n, m, rng)) ++c[i];
        int lo = m, hi = 0;
        for (const auto& [id, k] : c) {
            lo = std::min(lo, k);
            hi = std::max(hi, k);
        }
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("manifest round trip") {
    const fs::path dir = testutil::temp_dir("manifest");
    SynthConfig sc;
    sc.n_source = 3;
    sc.n_target = 2;
    sc.n_test = 1;
    sc.seed = 4;
    const SynthDatasets d = synth_generate(sc);
    write_dataset(d.target_train, dir / "m" / "t.json", dir / "img");
    const Dataset back = load_dataset(dir / "m" / "t.json", 6);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].id == d.target_train[i].id);
        CHECK(back[i].image.pixels == d.target_train[i].image.pixels);
        CHECK(back[i].subdomain == d.target_train[i].subdomain);
        CHECK(back[i].domain == Domain::target);
        CHECK(back[i].spacing_x == d.target_train[i].spacing_x);
        for (std::size_t l = 0; l < 6; ++l) CHECK((*back[i].landmarks)[l].x == (*d.target_train[i].landmarks)[l].x);
    }
}

TEST_CASE("manifest errors name the record") {
    const fs::path dir = testutil::temp_dir("manifest_errors");
    Image img(8, 8);
    write_image(img, dir / "a.png");
    nlohmann::json good = {{"id", "a"}, {"image_path", "a.png"}, {"width", 8}, {"height", 8}, {"spacing_mm", {0.1, 0.1}},
                           {"domain", "source"}, {"landmarks", {{1.0, 2.0}, {3.0, 4.0}}}};
    write_manifest(dir / "ok.json", nlohmann::json::array({good}));
    CHECK(load_dataset(dir / "ok.json", 2).size() == 1);

    auto expect_error = [&](nlohmann::json rec, int expected, const std::string& needle) {
        write_manifest(dir / "bad.json", nlohmann::json::array({rec}));
        try {
            load_dataset(dir / "bad.json", expected);
            FAIL("expected a load error");
        } catch (const LoadError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("'a'") != std::string::npos);
            CHECK(msg.find(needle) != std::string::npos);
        }
    };
    expect_error(good, 3, "landmark count mismatch");
    nlohmann::json missing = good;
    missing["image_path"] = "nope.png";
    expect_error(missing, 2, "missing image file");
    nlohmann::json outside = good;
    outside["landmarks"] = {{1.0, 2.0}, {8.0, 4.0}};
    expect_error(outside, 2, "out of bounds");
    nlohmann::json unlabeled = good;
    unlabeled.erase("landmarks");
    expect_error(unlabeled, 2, "landmarks");

    nlohmann::json target = unlabeled;
    target["domain"] = "target";
    write_manifest(dir / "t.json", nlohmann::json::array({target}));
    const Dataset t = load_dataset(dir / "t.json", 2);
    CHECK_FALSE(t[0].landmarks.has_value());
    CHECK_THROWS_AS(load_dataset(dir / "absent.json"), LoadError);
}

TEST_CASE("images round trip through 16-bit files") {
    const fs::path dir = testutil::temp_dir("png");
    Image img(5, 4);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<double>(i) / 19.0;
    quantize_16bit(img);
    write_image(img, dir / "x.png");
    CHECK(read_image(dir / "x.png").pixels == img.pixels);
}

TEST_CASE("synthetic generator is deterministic and well formed") {
    SynthConfig sc;
    sc.n_source = 4;
    sc.n_target = 6;
    sc.n_test = 3;
    sc.seed = 12;
    const SynthDatasets a = synth_generate(sc), b = synth_generate(sc);
    CHECK(a.source.size() == 4);
    CHECK(a.target_train.size() == 6);
    CHECK(a.target_test.size() == 3);
    for (std::size_t i = 0; i < a.target_train.size(); ++i) CHECK(a.target_train[i].image.pixels == b.target_train[i].image.pixels);
    for (const auto& s : a.target_train) {
        CHECK(s.landmarks->size() == 6);
        CHECK(s.domain == Domain::target);
        CHECK_FALSE(s.subdomain.empty());
        for (const Point& p : *s.landmarks) {
            CHECK(p.x >= 0.0);
            CHECK(p.x < 64.0);
        }
    }
    sc.seed = 13;
    CHECK(synth_generate(sc).source[0].image.pixels != a.source[0].image.pixels);
    SynthConfig bad = sc;
    bad.num_landmarks = 17;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = sc;
    bad.size = 32;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero shift gives matching histograms, default shift separates means") {
    SynthConfig sc;
    sc.n_source = 30;
    sc.n_target = 30;
    sc.n_test = 0;
    sc.seed = 3;
    sc.shift = ShiftParams::none();
    const SynthDatasets same = synth_generate(sc);
    // KS critical value is far larger than this for identical distributions at
    // this sample size; the images are dependent, so use a loose bound.
    CHECK(ks_statistic(same.source, same.target_train) < 0.05);

    sc.shift = ShiftParams::defaults();
    const SynthDatasets shifted = synth_generate(sc);
    const double ms = intensity_histogram(shifted.source).mean;
    const double mt = intensity_histogram(shifted.target_train).mean;
    CHECK(mt - ms > 0.05);
    CHECK(ks_statistic(shifted.source, shifted.target_train) > 0.2);
}

TEST_CASE("shape shift changes the landmark distribution") {
    SynthConfig sc;
    sc.n_source = 40;
    sc.n_target = 40;
    sc.n_test = 0;
    sc.seed = 8;
    sc.shift = ShiftParams::none();
    sc.shift.shape_scale = 1.15;
    const SynthDatasets d = synth_generate(sc);
    auto spread = [](const Dataset& ds) {
        double s = 0.0;
        for (const auto& x : ds)
            for (const Point& p : *x.landmarks) s += std::hypot(p.x - 32.0, p.y - 32.0);
        return s / ds.size();
    };
    CHECK(spread(d.target_train) > spread(d.source) * 1.05);
}

TEST_CASE("write_synth produces the directory tree") {
    const fs::path dir = testutil::temp_dir("synth_tree");
    SynthConfig sc;
    sc.n_source = 2;
    sc.n_target = 2;
    sc.n_test = 2;
    write_synth(synth_generate(sc), dir);
    CHECK(fs::is_directory(dir / "source"));
    CHECK(fs::is_directory(dir / "target"));
    CHECK(fs::exists(dir / "manifests" / "source_train.json"));
    CHECK(load_dataset(dir / "manifests" / "target_test.json", 6).size() == 2);
}
