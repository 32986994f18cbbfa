#pragma once

#include "densiface/sensor_geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace densiface {

// Haar cascade in the layout of OpenCV's "new-style" XML: boosted stages of
// decision stumps over upright rectangle features.

struct HaarRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
    double weight = 0.0;
};

struct HaarFeature {
    std::vector<HaarRect> rects; // 2 or 3
};

/// Decision stump: yields left_value when the normalized feature value is below threshold.
struct WeakClassifier {
    std::size_t feature_index = 0;
    double threshold = 0.0;
    double left_value = 0.0;
    double right_value = 0.0;
};

struct Stage {
    double stage_threshold = 0.0;
    std::vector<WeakClassifier> weak_classifiers;
};

struct Cascade {
    int base_width = 0;
    int base_height = 0;
    std::vector<Stage> stages;
    std::vector<HaarFeature> features;

    std::size_t stump_count() const;
    /// Throws ParseError on broken references or empty stages.
    void validate() const;
};

/// Throws ParseError (malformed XML carries the line number) or
/// UnsupportedFeatureError for tilted features and tree classifiers.
Cascade parse_cascade(std::string_view text);

/// Writes the cascade back in the same XML layout.
std::string serialize_cascade(const Cascade& c);

struct GrayFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayFrame() = default;
    GrayFrame(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

GrayFrame to_grayscale(const ColorFrame& color);

/// (w+1) x (h+1) summed-area table with a zero first row and column.
class SummedArea {
public:
    SummedArea() = default;
    SummedArea(int width, int height) : width_(width), height_(height),
        table_(static_cast<std::size_t>(width + 1) * (height + 1), 0) {}

    int width() const { return width_; }
    int height() const { return height_; }
    /// Sum over source pixels [0, i) x [0, j) for padded column i, row j.
    std::int64_t at(int i, int j) const { return table_[static_cast<std::size_t>(j) * (width_ + 1) + i]; }
    std::int64_t& at(int i, int j) { return table_[static_cast<std::size_t>(j) * (width_ + 1) + i]; }
    std::int64_t rect_sum(int x, int y, int w, int h) const {
        return at(x + w, y + h) - at(x, y + h) - at(x + w, y) + at(x, y);
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::int64_t> table_;
};

struct IntegralImages {
    SummedArea sum;
    SummedArea squared;
};

IntegralImages integral_images(const GrayFrame& gray);

/// Runs the cascade on the window of size round(base * scale) whose top-left corner is (x, y).
/// Throws UsageError if scale < 1 or the window leaves the frame.
bool evaluate_window(const Cascade& c, const SummedArea& sum, const SummedArea& squared, int x, int y,
                     double scale);

struct DetectParams {
    double scale_factor = 1.1;
    int min_neighbors = 3;
    double group_eps = 0.2;
};

/// Multi-scale sliding-window scan followed by similarity grouping; largest area first.
std::vector<PixelRect> detect_faces(const Cascade& c, const GrayFrame& gray, const DetectParams& params = {});

/// Clusters rectangles whose edges all lie within eps * mean(min side) of each other
/// (transitively) and returns the mean rectangle of each cluster with >= min_neighbors members.
std::vector<PixelRect> group_rectangles(const std::vector<PixelRect>& rects, int min_neighbors, double eps);

/// Override if given, else the largest detection; NoFaceError when neither exists.
PixelRect face_region(const std::vector<PixelRect>& detections, const std::optional<PixelRect>& override_rect);

} // namespace densiface
