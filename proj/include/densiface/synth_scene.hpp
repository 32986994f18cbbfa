#pragma once

#include "densiface/sensor_geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace densiface {

/// Gaussian height offset centered at face_center + offset (meters, camera x/y).
struct GaussianBump {
    std::array<double, 2> offset{0.0, 0.0};
    double amplitude = 0.0; // meters; positive moves the surface toward the camera for the nose,
                            // away from it for the eyes
    double width = 0.01;    // meters (standard deviation)
};

/// Elliptical region of depth pixels forced to 0.
struct HoleSpec {
    std::array<double, 2> center{0.0, 0.0}; // pixels (u, v)
    std::array<double, 2> radii{1.0, 1.0};  // pixels
    bool contains(double u, double v) const;
};

/// Largest accepted dropout; beyond it too few seeds survive to describe a face.
inline constexpr double kMaxDropoutFraction = 0.95;

/// Face-like height field: the front of an ellipsoid, cut to the cap where
/// ((x-cx)/rx)^2 + ((y-cy)/ry)^2 <= cap_fraction^2, plus a nose bump and two eye dents.
struct SceneSpec {
    Vec3 face_center{0.0, 0.0, 0.85};
    Vec3 face_radii{0.075, 0.095, 0.06};
    double cap_fraction = 0.85;
    GaussianBump nose{{0.0, 0.012}, 0.02, 0.012};
    std::array<GaussianBump, 2> eyes{GaussianBump{{-0.03, -0.025}, 0.006, 0.009},
                                     GaussianBump{{0.03, -0.025}, 0.006, 0.009}};
    double background_depth = 1.6; // meters, fronto-parallel plane
    double noise_sigma_mm = 1.0;
    double dropout_fraction = 0.0;
    std::vector<HoleSpec> holes;
    std::uint64_t rng_seed = 7;

    /// Upper bound on the face depth over its support.
    double max_face_depth() const;
    /// Throws ValidationError naming the offending field.
    void validate() const;
};

inline constexpr Rgb kSkinColor{224, 172, 140};
inline constexpr Rgb kBackgroundColor{40, 60, 90};

/// Noise-free analytic surface of a scene.
class GroundTruth {
public:
    GroundTruth() = default;
    explicit GroundTruth(SceneSpec spec) : spec_(std::move(spec)) {}

    bool in_support(double x, double y) const;
    /// Surface height, also defined (continuously extended) outside the support.
    double height(double x, double y) const;
    const SceneSpec& spec() const { return spec_; }

private:
    SceneSpec spec_;
};

std::optional<double> eval_ground_truth(const GroundTruth& gt, double x, double y);

struct RenderedScene {
    DepthFrame depth;
    ColorFrame color;
    GroundTruth truth;
    std::vector<char> face_mask; // depth pixels whose ray hits the face support
};

/// Ray-casts the scene from the depth camera; colors are cast from the color camera
/// (origin at -baseline in depth coordinates). Depth noise, dropout and holes are
/// seeded per pixel so the output depends only on (rng_seed, u, v).
RenderedScene render_scene(const SceneSpec& spec, const Intrinsics& depth_intr);
RenderedScene render_scene(const SceneSpec& spec, const Intrinsics& depth_intr, const Intrinsics& color_intr,
                           const RigExtrinsics& rig);

/// Depth along the pixel ray where it meets the surface; nullopt when it misses the support.
std::optional<double> cast_ray(const GroundTruth& gt, const Vec3& origin, const Vec3& direction);

SceneSpec parse_scene_spec(std::string_view json_text);
std::string scene_spec_to_json(const SceneSpec& spec);

/// Pixel bounding box of the rendered face mask; nullopt if the face is not visible.
std::optional<PixelRect> face_mask_bounds(const RenderedScene& scene);

} // namespace densiface
