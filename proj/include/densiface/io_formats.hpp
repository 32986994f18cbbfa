#pragma once

#include "densiface/sensor_geometry.hpp"

#include <string>
#include <string_view>

namespace densiface {

/// Camera calibration document.
struct IntrinsicsDoc {
    Intrinsics depth_intrinsics;
    Intrinsics color_intrinsics;
    RigExtrinsics rig;
};

/// 16-bit binary PGM (P5, maxval 65535, big-endian).
DepthFrame read_depth_pgm(std::string_view bytes);
std::string write_depth_pgm(const DepthFrame& frame);

/// 8-bit binary PPM (P6, maxval 255).
ColorFrame read_color_ppm(std::string_view bytes);
std::string write_color_ppm(const ColorFrame& frame);

IntrinsicsDoc read_intrinsics(std::string_view json_text);
std::string write_intrinsics(const IntrinsicsDoc& doc);

/// ASCII PLY with float xyz and uchar rgb per vertex.
std::string write_ply(const PointCloud& cloud);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

} // namespace densiface
