#pragma once

#include "densiface/linear_solve.hpp"
#include "densiface/neighbors.hpp"
#include "densiface/sensor_geometry.hpp"

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace densiface {

using Vec2 = std::array<double, 2>;

enum class RbfSolver { sparse_cg, dense_exact };

std::string to_string(RbfSolver s);
RbfSolver parse_rbf_solver(const std::string& name); // "cg" / "sparse_cg" / "dense" / "dense_exact"

struct RbfConfig {
    double r0_multiplier = 6.0;     // R0 = r0_multiplier * average seed spacing
    double cutoff_multiplier = 3.0; // kernel support truncated at cutoff_multiplier * R0
    double ridge = 2e-2;
    int upsample = 3;
    double mask_multiplier = 4.0;
    std::size_t color_k = 8;
    RbfSolver solver = RbfSolver::sparse_cg;
    double cg_rel_tol = 1e-8;
    std::size_t cg_max_iters = 0; // 0 selects 10 * M
    ForestParams color_search;    // neighborhoods used for color averaging

    void validate() const;
};

/// Largest system the dense elimination path accepts.
inline constexpr std::size_t kMaxDenseCenters = 2000;

/// Gaussian height-field model: z(q) = sum_i w_i * exp(-|q - c_i|^2 / r0^2).
struct RbfModel {
    std::vector<Vec2> centers;
    std::vector<double> values;
    std::vector<double> weights;
    double r0 = 0.0;
    /// Radius beyond which kernel terms are dropped; infinite for the dense fit.
    double support_radius = std::numeric_limits<double>::infinity();
    std::size_t solver_iterations = 0;
    double relative_residual = 0.0;
};

struct DenseGrid {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double spacing = 0.0;
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<char> mask; // row-major, ny rows of nx cells

    bool in(std::size_t i, std::size_t j) const { return mask[j * nx + i] != 0; }
    Vec2 cell(std::size_t i, std::size_t j) const {
        return {origin_x + static_cast<double>(i) * spacing, origin_y + static_cast<double>(j) * spacing};
    }
    std::size_t count_in() const;
};

double gaussian_kernel(double r, double r0);

/// Phi restricted to pairs within `cutoff`, plus ridge on the diagonal.
SparseMatrix assemble_kernel_matrix(const KdTree& centers_index, double r0, double cutoff, double ridge);

/// Full untruncated Phi plus ridge on the diagonal.
DenseMatrix assemble_dense_kernel_matrix(std::span<const Vec2> centers, double r0, double ridge);

/// Solves (Phi + ridge I) W = F with F the seed heights. Throws SolverError on CG
/// non-convergence and SingularityError for duplicate centers at ridge 0.
RbfModel fit_rbf(std::span<const Vec2> centers, std::span<const double> values, const RbfConfig& cfg,
                 double avg_nn);
RbfModel fit_rbf(const PointCloud& seeds, const RbfConfig& cfg, double avg_nn);

/// Sum of w_i * phi over centers within `cutoff` of the query, in ascending center order.
double eval_rbf(const RbfModel& model, const Vec2& query, const KdTree& centers_index, double cutoff);

DenseGrid make_grid(const PointCloud& seeds, const RbfConfig& cfg, double avg_nn);

struct DensifyResult {
    PointCloud cloud; // seeds first, then interpolated grid points in row-major order
    std::size_t seed_count = 0;
    std::size_t interpolated_count = 0;
    double avg_nn = 0.0;
    double r0 = 0.0;
    double height_offset = 0.0;
    std::size_t solver_iterations = 0;
    double relative_residual = 0.0;
    std::size_t grid_nx = 0;
    std::size_t grid_ny = 0;
};

/// Fits the height field to the seeds (relative to their mean height) and emits a
/// colored point for every masked-in grid cell.
DensifyResult densify(const PointCloud& seeds, const RbfConfig& cfg);

/// Planar projection of cloud points.
std::vector<Vec2> planar_coordinates(const PointCloud& cloud);

} // namespace densiface
