#include "densiface/sensor_geometry.hpp"

#include "densiface/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace densiface {

void Intrinsics::validate() const {
    if (!(focal_px > 0.0) || !std::isfinite(focal_px))
        throw ConfigError("intrinsics: focal_px must be positive, got " + std::to_string(focal_px));
    if (width <= 0 || height <= 0)
        throw ConfigError("intrinsics: width and height must be positive");
    if (!(principal_u >= 0.0 && principal_u < width))
        throw ConfigError("intrinsics: principal_u outside [0, width)");
    if (!(principal_v >= 0.0 && principal_v < height))
        throw ConfigError("intrinsics: principal_v outside [0, height)");
}

void RigExtrinsics::validate() const {
    for (double c : baseline)
        if (!std::isfinite(c)) throw ConfigError("rig: baseline must be finite");
}

void DepthFrame::validate() const {
    if (width < 0 || height < 0 || samples.size() != static_cast<std::size_t>(width) * height)
        throw ConfigError("depth frame: sample count does not match width x height");
}

void ColorFrame::validate() const {
    if (width < 0 || height < 0 || pixels.size() != static_cast<std::size_t>(width) * height)
        throw ConfigError("color frame: pixel count does not match width x height");
}

ColorFrame RegisteredFrame::aligned_color() const {
    ColorFrame out(depth.width, depth.height);
    for (std::size_t i = 0; i < color_at_depth.size(); ++i)
        if (color_at_depth[i]) out.pixels[i] = *color_at_depth[i];
    return out;
}

double iou(const PixelRect& a, const PixelRect& b) {
    const long long ix = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const long long iy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const long long inter = ix * iy;
    const long long uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

void PointCloud::validate() const {
    if (colors.size() != points.size())
        throw UsageError("point cloud: colors not parallel to points");
    if (!source_pixels.empty() && source_pixels.size() != points.size())
        throw UsageError("point cloud: source pixels not parallel to points");
    for (const auto& p : points)
        if (!(p[2] > 0.0)) throw UsageError("point cloud: non-positive z");
}

Vec3 pixel_to_point(double u, double v, double z, const Intrinsics& intr) {
    return {(u - intr.principal_u) * z / intr.focal_px, (v - intr.principal_v) * z / intr.focal_px, z};
}

ImagePoint project(const Vec3& p, const Intrinsics& intr) {
    return {intr.focal_px * p[0] / p[2] + intr.principal_u, intr.focal_px * p[1] / p[2] + intr.principal_v};
}

namespace {

void check_frame_matches(const DepthFrame& depth, const Intrinsics& intr) {
    intr.validate();
    depth.validate();
    if (depth.width != intr.width || depth.height != intr.height)
        throw ConfigError("depth frame is " + std::to_string(depth.width) + "x" + std::to_string(depth.height) +
                          " but intrinsics describe " + std::to_string(intr.width) + "x" +
                          std::to_string(intr.height));
}

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

} // namespace

PointCloud back_project(const DepthFrame& depth, const Intrinsics& intr) {
    check_frame_matches(depth, intr);
    PointCloud cloud;
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            const std::uint16_t mm = depth.at(u, v);
            if (mm == 0) continue;
            cloud.points.push_back(pixel_to_point(u, v, mm / 1000.0, intr));
            cloud.colors.push_back({});
            cloud.source_pixels.push_back({u, v});
        }
    }
    return cloud;
}

PointCloud back_project(const RegisteredFrame& frame) {
    PointCloud cloud = back_project(frame.depth, frame.depth_intrinsics);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto [u, v] = cloud.source_pixels[i];
        const auto& c = frame.color_at_depth[static_cast<std::size_t>(v) * frame.depth.width + u];
        if (c) cloud.colors[i] = *c;
    }
    return cloud;
}

RegisteredFrame register_depth_to_color(const DepthFrame& depth, const ColorFrame& color,
                                        const Intrinsics& depth_intr, const Intrinsics& color_intr,
                                        const RigExtrinsics& rig) {
    check_frame_matches(depth, depth_intr);
    color_intr.validate();
    color.validate();
    rig.validate();
    if (color.width != color_intr.width || color.height != color_intr.height)
        throw ConfigError("color frame dimensions do not match color intrinsics");

    RegisteredFrame out;
    out.depth = depth;
    out.depth_intrinsics = depth_intr;
    out.color_at_depth.assign(depth.samples.size(), std::nullopt);
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            const std::uint16_t mm = depth.at(u, v);
            if (mm == 0) continue;
            Vec3 p = pixel_to_point(u, v, mm / 1000.0, depth_intr);
            for (int k = 0; k < 3; ++k) p[k] += rig.baseline[k];
            if (!(p[2] > 0.0)) continue;
            const ImagePoint ip = project(p, color_intr);
            const int cu = round_half_up(ip.u);
            const int cv = round_half_up(ip.v);
            if (cu < 0 || cv < 0 || cu >= color.width || cv >= color.height) continue;
            out.color_at_depth[static_cast<std::size_t>(v) * depth.width + u] = color.at(cu, cv);
        }
    }
    return out;
}

PointCloud crop_by_rect(const PointCloud& cloud, const PixelRect& rect) {
    if (!cloud.empty() && !cloud.has_source_pixels())
        throw UsageError("crop_by_rect: cloud has no source pixels");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (rect.contains(cloud.source_pixels[i].u, cloud.source_pixels[i].v)) keep.push_back(i);
    return select(cloud, keep);
}

PointCloud select(const PointCloud& cloud, std::span<const std::size_t> indices) {
    PointCloud out;
    const bool with_pixels = cloud.has_source_pixels();
    out.points.reserve(indices.size());
    out.colors.reserve(indices.size());
    for (std::size_t i : indices) {
        out.points.push_back(cloud.points[i]);
        out.colors.push_back(cloud.colors[i]);
        if (with_pixels) out.source_pixels.push_back(cloud.source_pixels[i]);
    }
    return out;
}

} // namespace densiface
