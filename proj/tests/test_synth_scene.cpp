#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "densiface/errors.hpp"
#include "densiface/synth_scene.hpp"

#include <cmath>
#include <random>

using namespace densiface;

namespace {

Intrinsics small_camera() { return {300.0, 79.5, 59.5, 160, 120}; }
Intrinsics wide_face_camera() { return {800.0, 319.5, 239.5, 640, 480}; }

SceneSpec clean_scene() {
    SceneSpec s;
    s.noise_sigma_mm = 0.0;
    return s;
}

// Plain bisection on the first sign change along the ray; the surface written out by hand.
double surface(const SceneSpec& s, double x, double y) {
    const double a = (x - s.face_center[0]) / s.face_radii[0];
    const double b = (y - s.face_center[1]) / s.face_radii[1];
    double z = s.face_center[2] - s.face_radii[2] * std::sqrt(std::max(0.0, 1.0 - a * a - b * b));
    auto g = [&](const GaussianBump& k) {
        const double dx = x - s.face_center[0] - k.offset[0], dy = y - s.face_center[1] - k.offset[1];
        return k.amplitude * std::exp(-(dx * dx + dy * dy) / (2 * k.width * k.width));
    };
    return z - g(s.nose) + g(s.eyes[0]) + g(s.eyes[1]);
}

std::optional<double> bisect_ray(const SceneSpec& s, const Vec3& dir) {
    auto f = [&](double t) { return t * dir[2] - surface(s, t * dir[0], t * dir[1]); };
    double lo = 0.3 / dir[2], hi = lo;
    const double step = 1e-4 / dir[2];
    while (f(hi) < 0.0) {
        lo = hi;
        hi += step;
        if (hi * dir[2] > 2.0) return std::nullopt;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    const double a = (t * dir[0] - s.face_center[0]) / s.face_radii[0];
    const double b = (t * dir[1] - s.face_center[1]) / s.face_radii[1];
    if (a * a + b * b > s.cap_fraction * s.cap_fraction) return std::nullopt;
    return t * dir[2];
}

Vec3 ray(const Intrinsics& in, int u, int v) {
    return {(u - in.principal_u) / in.focal_px, (v - in.principal_v) / in.focal_px, 1.0};
}

} // namespace

TEST_CASE("scene validation") {
    CHECK_NOTHROW(SceneSpec{}.validate());
    SceneSpec s;
    s.face_radii[1] = 0.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = {};
    s.dropout_fraction = 1.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = {};
    s.background_depth = s.max_face_depth() - 0.01;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = {};
    s.noise_sigma_mm = -1.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = {};
    s.holes.push_back({{10, 10}, {0, 3}});
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("ground truth") {
    const SceneSpec s = clean_scene();
    const GroundTruth gt(s);
    SUBCASE("apex of the bare ellipsoid") {
        SceneSpec bare = s;
        bare.nose.amplitude = 0.0;
        bare.eyes[0].amplitude = bare.eyes[1].amplitude = 0.0;
        const auto z = eval_ground_truth(GroundTruth(bare), bare.face_center[0], bare.face_center[1]);
        REQUIRE(z);
        CHECK(*z == doctest::Approx(bare.face_center[2] - bare.face_radii[2]).epsilon(1e-15));
    }
    SUBCASE("outside the support") {
        CHECK_FALSE(eval_ground_truth(gt, s.face_center[0] + s.face_radii[0], s.face_center[1]));
        CHECK_FALSE(eval_ground_truth(gt, 1.0, 1.0));
        CHECK(eval_ground_truth(gt, s.face_center[0] + 0.8 * s.face_radii[0], s.face_center[1]));
    }
    SUBCASE("matches an independent ray-cast at 100 support points") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        int checked = 0;
        while (checked < 100) {
            const double a = u(rng) * s.cap_fraction, b = u(rng) * s.cap_fraction;
            if (a * a + b * b > s.cap_fraction * s.cap_fraction) continue;
            const double x = s.face_center[0] + a * s.face_radii[0];
            const double y = s.face_center[1] + b * s.face_radii[1];
            const auto z = eval_ground_truth(gt, x, y);
            REQUIRE(z);
            const Vec3 dir{x / *z, y / *z, 1.0};
            const auto oracle = bisect_ray(s, dir);
            REQUIRE(oracle);
            CHECK(std::abs(*oracle - *z) <= 1e-9);
            const auto cast = cast_ray(gt, {0, 0, 0}, dir);
            REQUIRE(cast);
            CHECK(std::abs(*cast - *z) <= 1e-9);
            ++checked;
        }
    }
}

TEST_CASE("clean render quantizes the true depth") {
    const SceneSpec s = clean_scene();
    const Intrinsics in = small_camera();
    const RenderedScene r = render_scene(s, in);
    std::size_t face = 0;
    for (int v = 0; v < in.height; ++v)
        for (int u = 0; u < in.width; ++u) {
            const auto oracle = bisect_ray(s, ray(in, u, v));
            const bool masked = r.face_mask[static_cast<std::size_t>(v) * in.width + u] != 0;
            if (oracle) {
                ++face;
                REQUIRE(masked);
                CHECK(r.depth.at(u, v) == static_cast<std::uint16_t>(std::lround(*oracle * 1000.0)));
                CHECK(r.color.at(u, v) == kSkinColor);
            } else {
                CHECK_FALSE(masked);
                CHECK(r.depth.at(u, v) == static_cast<std::uint16_t>(std::lround(s.background_depth * 1000.0)));
                CHECK(r.color.at(u, v) == kBackgroundColor);
            }
        }
    CHECK(face > 500);
}

TEST_CASE("clean render back-projects onto the surface") {
    const SceneSpec s = clean_scene();
    const Intrinsics in = small_camera();
    const RenderedScene r = render_scene(s, in);
    const PointCloud cloud = back_project(r.depth, in);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto px = cloud.source_pixels[i];
        if (!r.face_mask[static_cast<std::size_t>(px.v) * in.width + px.u]) continue;
        const auto truth = cast_ray(r.truth, {0, 0, 0}, ray(in, px.u, px.v));
        REQUIRE(truth);
        CHECK(std::abs(cloud.points[i][2] - *truth) <= 0.5e-3 + 1e-12);
    }
}

TEST_CASE("dropout rate over the face mask") {
    SceneSpec s;
    s.dropout_fraction = 0.2;
    const RenderedScene r = render_scene(s, wide_face_camera());
    std::size_t face = 0, dropped = 0;
    for (std::size_t i = 0; i < r.face_mask.size(); ++i)
        if (r.face_mask[i]) {
            ++face;
            dropped += r.depth.samples[i] == 0;
        }
    REQUIRE(face >= 10000);
    const double rate = double(dropped) / double(face);
    CHECK(rate >= 0.18);
    CHECK(rate <= 0.22);
}

TEST_CASE("holes invalidate exactly the pixels inside the ellipse") {
    SceneSpec s = clean_scene();
    const HoleSpec hole{{80.0, 60.0}, {6.5, 3.0}};
    s.holes.push_back(hole);
    const Intrinsics in = small_camera();
    const RenderedScene r = render_scene(s, in);
    std::size_t inside = 0;
    for (int v = 0; v < in.height; ++v)
        for (int u = 0; u < in.width; ++u) {
            const double a = (u - 80.0) / 6.5, b = (v - 60.0) / 3.0;
            const bool in_hole = a * a + b * b <= 1.0;
            inside += in_hole;
            CHECK((r.depth.at(u, v) == 0) == in_hole);
        }
    CHECK(inside > 40);
}

TEST_CASE("rendering is deterministic and seed dependent") {
    SceneSpec s;
    s.dropout_fraction = 0.05;
    const RenderedScene a = render_scene(s, small_camera());
    const RenderedScene b = render_scene(s, small_camera());
    CHECK(a.depth.samples == b.depth.samples);
    CHECK(a.color.pixels == b.color.pixels);
    s.rng_seed += 1;
    CHECK(render_scene(s, small_camera()).depth.samples != a.depth.samples);
}

TEST_CASE("face and background depths are separated") {
    for (double sigma : {0.0, 1.0}) {
        SceneSpec s;
        s.noise_sigma_mm = sigma;
        const RenderedScene r = render_scene(s, wide_face_camera());
        const double gap_mm = (s.background_depth - s.max_face_depth()) * 1000.0 - 3.0 * sigma;
        REQUIRE(gap_mm > 0.0);
        std::vector<double> face, back;
        for (std::size_t i = 0; i < r.face_mask.size(); ++i)
            (r.face_mask[i] ? face : back).push_back(r.depth.samples[i]);
        std::sort(face.begin(), face.end());
        std::sort(back.begin(), back.end());
        // The bound is 3 sigma, so compare the 99.7% face quantile with the 0.3% background quantile.
        const double face_hi = face[static_cast<std::size_t>(0.997 * (face.size() - 1))];
        const double back_lo = back[static_cast<std::size_t>(0.003 * (back.size() - 1))];
        CAPTURE(sigma);
        CHECK(back_lo - face_hi >= gap_mm - 1.0);
        if (sigma == 0.0) CHECK(back.front() - face.back() >= gap_mm - 1.0);
    }
}

TEST_CASE("color camera sees the face shifted by the baseline") {
    const SceneSpec s = clean_scene();
    const Intrinsics in = small_camera();
    const RenderedScene plain = render_scene(s, in, in, RigExtrinsics{});
    const RenderedScene shifted = render_scene(s, in, in, RigExtrinsics{{0.02, 0.0, 0.0}});
    CHECK(plain.depth.samples == shifted.depth.samples);
    auto left_edge = [&](const ColorFrame& c) {
        for (int u = 0; u < in.width; ++u)
            if (c.at(u, 60) == kSkinColor) return u;
        return -1;
    };
    // Moving the camera by -0.02 m moves the image by about f*0.02/z ~ 7 px to the right.
    const int d = left_edge(shifted.color) - left_edge(plain.color);
    CHECK(d >= 5);
    CHECK(d <= 9);
}

TEST_CASE("face_mask_bounds") {
    const RenderedScene r = render_scene(clean_scene(), small_camera());
    const auto b = face_mask_bounds(r);
    REQUIRE(b);
    for (int v = 0; v < 120; ++v)
        for (int u = 0; u < 160; ++u)
            if (r.face_mask[static_cast<std::size_t>(v) * 160 + u]) {
                CHECK(u >= b->x);
                CHECK(u < b->x + b->w);
                CHECK(v >= b->y);
                CHECK(v < b->y + b->h);
            }
    SceneSpec away = clean_scene();
    away.face_center = {5.0, 0.0, 0.85};
    CHECK_FALSE(face_mask_bounds(render_scene(away, small_camera())));
}

TEST_CASE("scene JSON") {
    SUBCASE("round trip") {
        SceneSpec s;
        s.noise_sigma_mm = 0.5;
        s.holes.push_back({{100.0, 50.0}, {4.0, 2.5}});
        s.rng_seed = 99;
        const SceneSpec back = parse_scene_spec(scene_spec_to_json(s));
        CHECK(back.face_center == s.face_center);
        CHECK(back.noise_sigma_mm == 0.5);
        REQUIRE(back.holes.size() == 1);
        CHECK(back.holes[0].radii[1] == 2.5);
        CHECK(back.rng_seed == 99);
        CHECK(scene_spec_to_json(back) == scene_spec_to_json(s));
    }
    SUBCASE("omitted fields keep their defaults") {
        const SceneSpec s = parse_scene_spec(R"({"face_center": [0, 0, 0.7]})");
        CHECK(s.face_center[2] == 0.7);
        CHECK(s.face_radii == SceneSpec{}.face_radii);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(parse_scene_spec("{"), ParseError);
        CHECK_THROWS_AS(parse_scene_spec(R"({"colour": 1})"), ValidationError);
        CHECK_THROWS_AS(parse_scene_spec(R"({"noise_sigma_mm": "loud"})"), ValidationError);
        CHECK_THROWS_AS(parse_scene_spec(R"({"dropout_fraction": 1.5})"), ValidationError);
        CHECK_THROWS_AS(parse_scene_spec(R"({"holes": [{"center": [1, 2]}]})"), ValidationError);
        CHECK_THROWS_AS(parse_scene_spec(R"({"eyes": [{}]})"), ValidationError);
    }
}
