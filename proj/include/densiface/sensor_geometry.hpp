#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace densiface {

using Vec3 = std::array<double, 3>;

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Pinhole camera with a single focal length in pixels.
struct Intrinsics {
    double focal_px = 0.0;
    double principal_u = 0.0;
    double principal_v = 0.0;
    int width = 0;
    int height = 0;

    /// Throws ConfigError when the invariants do not hold.
    void validate() const;
    friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Rotation-free rig. A point p in depth-camera coordinates sits at
/// p + baseline in color-camera coordinates (meters).
struct RigExtrinsics {
    Vec3 baseline{0.0, 0.0, 0.0};

    void validate() const;
};

/// Depth in millimeters, row-major; 0 marks a missing sample.
struct DepthFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> samples;

    DepthFrame() = default;
    DepthFrame(int w, int h) : width(w), height(h), samples(static_cast<std::size_t>(w) * h, 0) {}

    std::uint16_t at(int u, int v) const { return samples[static_cast<std::size_t>(v) * width + u]; }
    std::uint16_t& at(int u, int v) { return samples[static_cast<std::size_t>(v) * width + u]; }
    void validate() const;
    friend bool operator==(const DepthFrame&, const DepthFrame&) = default;
};

struct ColorFrame {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;

    ColorFrame() = default;
    ColorFrame(int w, int h, Rgb fill = {}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    const Rgb& at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
    Rgb& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
    void validate() const;
    friend bool operator==(const ColorFrame&, const ColorFrame&) = default;
};

/// Depth frame with colors sampled onto its pixel grid.
struct RegisteredFrame {
    DepthFrame depth;
    std::vector<std::optional<Rgb>> color_at_depth;
    Intrinsics depth_intrinsics;

    /// Color image on the depth grid; pixels without a color are black.
    ColorFrame aligned_color() const;
};

struct PixelCoord {
    int u = 0;
    int v = 0;
    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Axis-aligned pixel rectangle covering columns [x, x+w) and rows [y, y+h).
struct PixelRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    long long area() const { return static_cast<long long>(w) * h; }
    bool contains(int u, int v) const { return u >= x && u < x + w && v >= y && v < y + h; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

double iou(const PixelRect& a, const PixelRect& b);

/// Colored points in meters. source_pixels is either empty or parallel to points.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Rgb> colors;
    std::vector<PixelCoord> source_pixels;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_source_pixels() const { return !points.empty() && source_pixels.size() == points.size(); }
    void validate() const;
};

/// Depth-camera point for pixel (u, v) at depth z (meters).
Vec3 pixel_to_point(double u, double v, double z, const Intrinsics& intr);

struct ImagePoint {
    double u = 0.0;
    double v = 0.0;
};

/// Pinhole projection of a point with z > 0.
ImagePoint project(const Vec3& p, const Intrinsics& intr);

/// One point per valid depth pixel, colored black.
PointCloud back_project(const DepthFrame& depth, const Intrinsics& intr);

/// One point per valid depth pixel, carrying the registered color (black when missing).
PointCloud back_project(const RegisteredFrame& frame);

RegisteredFrame register_depth_to_color(const DepthFrame& depth, const ColorFrame& color,
                                        const Intrinsics& depth_intr, const Intrinsics& color_intr,
                                        const RigExtrinsics& rig);

PointCloud crop_by_rect(const PointCloud& cloud, const PixelRect& rect);

/// Keeps the points whose index is listed, in the order given.
PointCloud select(const PointCloud& cloud, std::span<const std::size_t> indices);

} // namespace densiface
