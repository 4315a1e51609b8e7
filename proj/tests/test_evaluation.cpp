#include <doctest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "udalm/error.hpp"
#include "udalm/evaluation.hpp"

using namespace udalm;

namespace {

ImageErrors img(std::vector<double> e, std::string sub = "") {
    return {"x", std::move(sub), std::move(e)};
}

}  // namespace

TEST_CASE("radial errors in millimeters") {
    const Point p[] = {{13.0, 24.0}, {5.0, 5.0}};
    const Point g[] = {{10.0, 20.0}, {5.0, 5.0}};
    const auto iso = radial_errors(p, g, 0.1, 0.1);
    CHECK(iso[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(iso[1] == 0.0);
    const auto aniso = radial_errors(p, g, 0.1, 0.2);
    CHECK(aniso[0] == doctest::Approx(std::sqrt(0.73)).epsilon(1e-12));
    CHECK(std::abs(aniso[0] - 0.854) < 5e-4);
    const Point one[] = {{0.0, 0.0}};
    CHECK_THROWS_AS(radial_errors(one, g, 0.1, 0.1), InputError);
    CHECK_THROWS_AS(radial_errors(p, g, 0.0, 0.1), InputError);
}

TEST_CASE("aggregate worked example") {
    const ImageErrors ims[] = {img({0.5, 0.0})};
    const double radii[] = {0.4, 2.0};
    const EvalReport r = aggregate(ims, radii);
    CHECK(r.mre_mm == doctest::Approx(0.25));
    CHECK(r.sdr.at(0.4) == doctest::Approx(50.0));
    CHECK(r.sdr.at(2.0) == doctest::Approx(100.0));
    CHECK(r.n_images == 1);
    CHECK(r.per_landmark_mre == std::vector<double>{0.5, 0.0});
}

TEST_CASE("errors on the radius count as detected") {
    const ImageErrors ims[] = {img({2.0, 2.0, 2.0})};
    const double radii[] = {2.0};
    CHECK(aggregate(ims, radii).sdr.at(2.0) == 100.0);
}

TEST_CASE("aggregate rejects empty input") {
    const double radii[] = {2.0};
    CHECK_THROWS_AS(aggregate(std::span<const ImageErrors>{}, radii), InputError);
}

TEST_CASE("per-image mode averages image means") {
    const ImageErrors ims[] = {img({1.0, 3.0}), img({2.0, 2.0})};
    const double radii[] = {2.0};
    CHECK(aggregate(ims, radii, MreMode::per_image).mre_mm == doctest::Approx(2.0));
    CHECK(aggregate(ims, radii, MreMode::pooled).mre_mm == doctest::Approx(2.0));
}

TEST_CASE("subdomain breakdown") {
    const ImageErrors ims[] = {img({1.0, 1.0}, "a"), img({2.0, 2.0}, "b")};
    const double radii[] = {1.5};
    const EvalReport r = subdomain_report(ims, radii);
    CHECK(r.mre_mm == doctest::Approx(1.5));
    CHECK(r.per_subdomain.at("a").mre_mm == doctest::Approx(1.0));
    CHECK(r.per_subdomain.at("b").mre_mm == doctest::Approx(2.0));
    CHECK(r.per_subdomain.at("b").sdr.at(1.5) == 0.0);

    const ImageErrors one[] = {img({0.5, 1.0}, "only")};
    const EvalReport s = subdomain_report(one, radii);
    CHECK(s.per_subdomain.at("only").mre_mm == s.mre_mm);

    const ImageErrors untagged[] = {img({0.5}), img({1.5})};
    const EvalReport u = subdomain_report(untagged, radii);
    CHECK(u.per_subdomain.size() == 1);
    CHECK(u.per_subdomain.at("all").mre_mm == doctest::Approx(1.0));
}

TEST_CASE("scaling spacing scales MRE and shifts SDR radii") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    std::vector<Point> p(8), g(8);
    for (int i = 0; i < 8; ++i) {
        p[i] = {u(rng), u(rng)};
        g[i] = {u(rng), u(rng)};
    }
    const double c = 2.5;
    const std::vector<ImageErrors> a = {img(radial_errors(p, g, 0.1, 0.15))};
    const std::vector<ImageErrors> b = {img(radial_errors(p, g, 0.1 * c, 0.15 * c))};
    const double ra[] = {0.5, 1.0, 2.0}, rb[] = {0.5 * c, 1.0 * c, 2.0 * c};
    const EvalReport x = aggregate(a, ra), y = aggregate(b, rb);
    CHECK(y.mre_mm == doctest::Approx(c * x.mre_mm).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) CHECK(y.sdr.at(rb[i]) == x.sdr.at(ra[i]));
}

TEST_CASE("SDR is bounded and monotone") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<ImageErrors> ims;
        for (int i = 0; i < 5; ++i) ims.push_back(img({u(rng), u(rng), u(rng)}));
        const double radii[] = {0.5, 1.0, 2.0, 2.5, 3.0, 4.0};
        const EvalReport r = aggregate(ims, radii);
        double prev = 0.0;
        for (double rho : radii) {
            CHECK(r.sdr.at(rho) >= prev);
            CHECK(r.sdr.at(rho) <= 100.0);
            prev = r.sdr.at(rho);
        }
        CHECK(r.mre_mm >= 0.0);
    }
}

TEST_CASE("report json round trip and table") {
    const ImageErrors ims[] = {img({1.75, 0.5}, "d0"), img({2.5, 3.0}, "d1")};
    const double radii[] = {2.0, 2.5, 3.0, 4.0};
    const EvalReport r = subdomain_report(ims, radii);
    const EvalReport back = report_from_json(report_to_json(r));
    CHECK(back.mre_mm == r.mre_mm);
    CHECK(back.sdr == r.sdr);
    CHECK(back.per_landmark_mre == r.per_landmark_mre);
    CHECK(back.per_subdomain.at("d1").mre_mm == r.per_subdomain.at("d1").mre_mm);
    const std::string table = format_table({{"source-only", r}});
    CHECK(table.find("source-only") != std::string::npos);
    CHECK(table.find("MRE") != std::string::npos);
    CHECK(format_subdomain_table(r).find("d0") != std::string::npos);
}

TEST_CASE("histogram of a dataset against itself") {
    SynthConfig sc;
    sc.n_source = 3;
    sc.n_target = 3;
    sc.n_test = 0;
    const SynthDatasets d = synth_generate(sc);
    const auto dir = testutil::temp_dir("hist");
    const HistogramReport same = histogram_report(d.source, d.source, dir, "same");
    CHECK(same.max_bin_difference == 0.0);
    CHECK(same.a.density.size() == 256);
    double total = 0.0;
    for (double v : same.a.density) total += v;
    CHECK(total == doctest::Approx(1.0));
    CHECK(std::filesystem::exists(dir / "same.txt"));
    CHECK(std::filesystem::exists(dir / "same.png"));
    const HistogramReport diff = histogram_report(d.source, d.target_train, dir, "diff");
    CHECK(diff.max_bin_difference > 0.0);
    CHECK(diff.b.mean > diff.a.mean);
    CHECK_THROWS_AS(intensity_histogram(Dataset{}), InputError);
}
