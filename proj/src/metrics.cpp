#include "densiface/metrics.hpp"

#include "densiface/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace densiface {

StageCounts stage_counts(std::size_t initial, std::size_t dense) {
    if (initial == 0) throw UsageError("stage_counts: initial cloud is empty");
    return {initial, dense, static_cast<double>(dense) / static_cast<double>(initial)};
}

StageCounts stage_counts(const PointCloud& initial, const PointCloud& dense) {
    return stage_counts(initial.size(), dense.size());
}

double ErrorReport::fraction_above(double threshold_mm) const {
    if (errors_mm.empty()) return 0.0;
    const auto n = std::count_if(errors_mm.begin(), errors_mm.end(), [&](double e) { return e > threshold_mm; });
    return static_cast<double>(n) / static_cast<double>(errors_mm.size());
}

ErrorReport summarize_errors(std::span<const double> errors_mm, double bin_width_mm) {
    if (!(bin_width_mm > 0.0)) throw UsageError("error_report: bin width must be positive");
    if (errors_mm.empty()) throw UsageError("error_report: no points inside the ground-truth support");
    ErrorReport r;
    r.errors_mm.assign(errors_mm.begin(), errors_mm.end());
    r.n_evaluated = errors_mm.size();
    const double n = static_cast<double>(errors_mm.size());
    double sum = 0.0;
    for (double e : errors_mm) {
        sum += e;
        r.max_abs_mm = std::max(r.max_abs_mm, e);
    }
    r.mean_abs_mm = sum / n;
    double ss = 0.0;
    for (double e : errors_mm) ss += (e - r.mean_abs_mm) * (e - r.mean_abs_mm);
    r.std_mm = std::sqrt(ss / n);

    // Bins of bin_width_mm over [0, ceil(max)); the last one also takes everything above.
    const double top = std::max(std::ceil(r.max_abs_mm), bin_width_mm);
    const auto bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(top / bin_width_mm)));
    std::vector<std::size_t> counts(bins, 0);
    for (double e : errors_mm) ++counts[std::min(bins - 1, static_cast<std::size_t>(e / bin_width_mm))];
    for (std::size_t b = 0; b < bins; ++b)
        r.histogram.push_back({static_cast<double>(b) * bin_width_mm, static_cast<double>(counts[b]) / n});
    return r;
}

ErrorReport error_report(const PointCloud& dense, const GroundTruth& gt, double bin_width_mm) {
    std::vector<double> errors;
    errors.reserve(dense.size());
    std::size_t outside = 0;
    for (const auto& p : dense.points) {
        const auto z = eval_ground_truth(gt, p[0], p[1]);
        if (!z) {
            ++outside;
            continue;
        }
        errors.push_back(std::abs(p[2] - *z) * 1000.0);
    }
    ErrorReport r = summarize_errors(errors, bin_width_mm);
    r.n_outside_support = outside;
    return r;
}

std::string to_json(const StageCounts& c) {
    return nlohmann::json{{"initial_count", c.initial_count}, {"dense_count", c.dense_count}, {"ratio", c.ratio}}
        .dump();
}

std::string to_json(const ErrorReport& r) {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& b : r.histogram) hist.push_back({{"edge_mm", b.edge_mm}, {"fraction", b.fraction}});
    return nlohmann::json{{"mean_abs_mm", r.mean_abs_mm},
                          {"std_mm", r.std_mm},
                          {"max_abs_mm", r.max_abs_mm},
                          {"n_evaluated", r.n_evaluated},
                          {"n_outside_support", r.n_outside_support},
                          {"fraction_above_5_5mm", r.fraction_above(5.5)},
                          {"histogram", hist}}
        .dump();
}

std::string to_table(const StageCounts& c, const ErrorReport* r) {
    std::ostringstream out;
    out << std::fixed;
    auto row = [&](const std::string& name, const std::string& value) {
        out << std::left << std::setw(24) << name << std::right << std::setw(14) << value << '\n';
    };
    auto num = [](double v, int digits) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(digits) << v;
        return s.str();
    };
    row("initial points", std::to_string(c.initial_count));
    row("dense points", std::to_string(c.dense_count));
    row("ratio", num(c.ratio, 3));
    if (r != nullptr) {
        row("evaluated points", std::to_string(r->n_evaluated));
        row("mean |error| (mm)", num(r->mean_abs_mm, 3));
        row("std error (mm)", num(r->std_mm, 3));
        row("max |error| (mm)", num(r->max_abs_mm, 3));
        row("share > 5.5 mm", num(r->fraction_above(5.5), 5));
    }
    return out.str();
}

} // namespace densiface
