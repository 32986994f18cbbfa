#pragma once

#include "densiface/sensor_geometry.hpp"
#include "densiface/synth_scene.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace densiface {

struct StageCounts {
    std::size_t initial_count = 0;
    std::size_t dense_count = 0;
    double ratio = 0.0;
};

StageCounts stage_counts(const PointCloud& initial, const PointCloud& dense);
StageCounts stage_counts(std::size_t initial, std::size_t dense);

struct HistogramBin {
    double edge_mm = 0.0; // lower edge
    double fraction = 0.0;
};

struct ErrorReport {
    double mean_abs_mm = 0.0;
    double std_mm = 0.0; // population standard deviation of the absolute errors
    double max_abs_mm = 0.0;
    std::size_t n_evaluated = 0;
    std::size_t n_outside_support = 0;
    std::vector<HistogramBin> histogram; // last bin is open-ended

    /// Fraction of evaluated points whose error exceeds threshold_mm.
    double fraction_above(double threshold_mm) const;
    std::vector<double> errors_mm; // per evaluated point, in cloud order
};

/// Summary of a list of absolute errors in millimeters.
ErrorReport summarize_errors(std::span<const double> errors_mm, double bin_width_mm);

/// |z - z_true(x, y)| over the points inside the ground-truth support.
ErrorReport error_report(const PointCloud& dense, const GroundTruth& gt, double bin_width_mm = 0.5);

std::string to_json(const StageCounts& counts);
std::string to_json(const ErrorReport& report);
/// Aligned two-column text table.
std::string to_table(const StageCounts& counts, const ErrorReport* report);

} // namespace densiface
