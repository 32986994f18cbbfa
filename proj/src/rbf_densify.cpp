#include "densiface/rbf_densify.hpp"

#include "densiface/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace densiface {

std::string to_string(RbfSolver s) { return s == RbfSolver::sparse_cg ? "sparse_cg" : "dense_exact"; }

RbfSolver parse_rbf_solver(const std::string& name) {
    if (name == "cg" || name == "sparse_cg") return RbfSolver::sparse_cg;
    if (name == "dense" || name == "dense_exact") return RbfSolver::dense_exact;
    throw ValidationError("solver: expected cg or dense, got '" + name + "'");
}

void RbfConfig::validate() const {
    if (!(r0_multiplier > 0.0)) throw ConfigError("rbf: r0_multiplier must be positive");
    if (!(cutoff_multiplier > 0.0)) throw ConfigError("rbf: cutoff_multiplier must be positive");
    if (!(mask_multiplier > 0.0)) throw ConfigError("rbf: mask_multiplier must be positive");
    if (!(ridge >= 0.0)) throw ConfigError("rbf: ridge must be non-negative");
    if (upsample < 1) throw ConfigError("rbf: upsample must be at least 1");
    if (color_k < 1) throw ConfigError("rbf: color_k must be at least 1");
    if (!(cg_rel_tol > 0.0)) throw ConfigError("rbf: cg_rel_tol must be positive");
    if (color_search.trees < 1) throw ConfigError("rbf: forest needs at least one tree");
}

std::size_t DenseGrid::count_in() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), char{1}));
}

double gaussian_kernel(double r, double r0) { return std::exp(-(r * r) / (r0 * r0)); }

std::vector<Vec2> planar_coordinates(const PointCloud& cloud) {
    std::vector<Vec2> out;
    out.reserve(cloud.size());
    for (const auto& p : cloud.points) out.push_back({p[0], p[1]});
    return out;
}

SparseMatrix assemble_kernel_matrix(const KdTree& centers_index, double r0, double cutoff, double ridge) {
    const PointSet& pts = centers_index.points();
    SparseMatrix m;
    m.n = pts.size();
    m.row_ptr.assign(1, 0);
    const double inv_r02 = 1.0 / (r0 * r0);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (const auto& hit : centers_index.within_radius(pts[i], cutoff)) {
            double v = std::exp(-hit.squared_distance * inv_r02);
            if (hit.index == i) v += ridge;
            m.cols.push_back(static_cast<std::uint32_t>(hit.index));
            m.vals.push_back(v);
        }
        m.row_ptr.push_back(m.vals.size());
    }
    return m;
}

DenseMatrix assemble_dense_kernel_matrix(std::span<const Vec2> centers, double r0, double ridge) {
    DenseMatrix m(centers.size());
    const double inv_r02 = 1.0 / (r0 * r0);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        for (std::size_t j = 0; j < centers.size(); ++j) {
            const double dx = centers[i][0] - centers[j][0];
            const double dy = centers[i][1] - centers[j][1];
            m(i, j) = std::exp(-(dx * dx + dy * dy) * inv_r02);
        }
        m(i, i) += ridge;
    }
    return m;
}

namespace {

bool has_duplicate_centers(std::span<const Vec2> centers) {
    std::vector<Vec2> sorted(centers.begin(), centers.end());
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

struct KernelSum {
    double value = 0.0;
    std::size_t terms = 0;
};

KernelSum kernel_sum(const RbfModel& model, const Vec2& query, const KdTree& centers_index, double cutoff) {
    KernelSum s;
    const double inv_r02 = 1.0 / (model.r0 * model.r0);
    for (const auto& hit : centers_index.within_radius(query, cutoff)) {
        s.value += model.weights[hit.index] * std::exp(-hit.squared_distance * inv_r02);
        ++s.terms;
    }
    return s;
}

} // namespace

RbfModel fit_rbf(std::span<const Vec2> centers, std::span<const double> values, const RbfConfig& cfg,
                 double avg_nn) {
    cfg.validate();
    if (centers.empty()) throw UsageError("fit_rbf: no seeds");
    if (centers.size() != values.size()) throw UsageError("fit_rbf: centers and values differ in length");
    if (!(avg_nn > 0.0)) throw UsageError("fit_rbf: average spacing must be positive");
    if (cfg.ridge == 0.0 && has_duplicate_centers(centers))
        throw SingularityError("fit_rbf: duplicate (x, y) seeds make the system singular at ridge 0");

    RbfModel model;
    model.centers.assign(centers.begin(), centers.end());
    model.values.assign(values.begin(), values.end());
    model.r0 = cfg.r0_multiplier * avg_nn;

    if (cfg.solver == RbfSolver::dense_exact) {
        if (centers.size() > kMaxDenseCenters)
            throw UsageError("fit_rbf: dense_exact is limited to " + std::to_string(kMaxDenseCenters) + " seeds");
        const DenseMatrix a = assemble_dense_kernel_matrix(centers, model.r0, cfg.ridge);
        model.weights = solve_dense(a, model.values);
        std::vector<double> check(centers.size());
        for (std::size_t i = 0; i < a.n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < a.n; ++j) s += a(i, j) * model.weights[j];
            check[i] = model.values[i] - s;
        }
        const double fn = norm2(model.values);
        model.relative_residual = fn > 0.0 ? norm2(check) / fn : 0.0;
        model.support_radius = std::numeric_limits<double>::infinity();
        return model;
    }

    model.support_radius = cfg.cutoff_multiplier * model.r0;
    const KdTree index = KdTree::build(PointSet::from(std::span<const Vec2>(model.centers)));
    const SparseMatrix a = assemble_kernel_matrix(index, model.r0, model.support_radius, cfg.ridge);
    const std::size_t max_iters = cfg.cg_max_iters > 0 ? cfg.cg_max_iters : 10 * centers.size();
    CgResult cg = conjugate_gradient(a, model.values, cfg.cg_rel_tol, max_iters);
    if (!cg.converged)
        throw SolverError("fit_rbf: conjugate gradient did not converge in " + std::to_string(cg.iterations) +
                              " iterations (relative residual " + std::to_string(cg.relative_residual) + ")",
                          cg.relative_residual);
    model.weights = std::move(cg.x);
    model.solver_iterations = cg.iterations;
    model.relative_residual = cg.relative_residual;
    return model;
}

RbfModel fit_rbf(const PointCloud& seeds, const RbfConfig& cfg, double avg_nn) {
    std::vector<double> z;
    z.reserve(seeds.size());
    for (const auto& p : seeds.points) z.push_back(p[2]);
    const auto centers = planar_coordinates(seeds);
    return fit_rbf(centers, z, cfg, avg_nn);
}

double eval_rbf(const RbfModel& model, const Vec2& query, const KdTree& centers_index, double cutoff) {
    return kernel_sum(model, query, centers_index, cutoff).value;
}

DenseGrid make_grid(const PointCloud& seeds, const RbfConfig& cfg, double avg_nn) {
    cfg.validate();
    if (seeds.empty()) throw UsageError("make_grid: no seeds");
    if (!(avg_nn > 0.0)) throw UsageError("make_grid: average spacing must be positive");
    const auto centers = planar_coordinates(seeds);
    double xmin = centers[0][0], xmax = xmin, ymin = centers[0][1], ymax = ymin;
    for (const auto& c : centers) {
        xmin = std::min(xmin, c[0]);
        xmax = std::max(xmax, c[0]);
        ymin = std::min(ymin, c[1]);
        ymax = std::max(ymax, c[1]);
    }
    DenseGrid g;
    g.origin_x = xmin;
    g.origin_y = ymin;
    g.spacing = avg_nn / cfg.upsample;
    // Small slack so extents that are exact multiples of the spacing keep their last cell.
    g.nx = static_cast<std::size_t>(std::floor((xmax - xmin) / g.spacing + 1e-9)) + 1;
    g.ny = static_cast<std::size_t>(std::floor((ymax - ymin) / g.spacing + 1e-9)) + 1;
    g.mask.assign(g.nx * g.ny, 0);

    const KdTree index = KdTree::build(PointSet::from(centers));
    const double reach = cfg.mask_multiplier * avg_nn;
    for (std::size_t j = 0; j < g.ny; ++j) {
        for (std::size_t i = 0; i < g.nx; ++i) {
            const Vec2 q = g.cell(i, j);
            if (index.knn(q, 1).distances[0] <= reach) g.mask[j * g.nx + i] = 1;
        }
    }
    return g;
}

DensifyResult densify(const PointCloud& seeds, const RbfConfig& cfg) {
    cfg.validate();
    if (seeds.size() < 2) throw UsageError("densify: need at least two seeds");
    seeds.validate();

    DensifyResult out;
    const auto centers = planar_coordinates(seeds);
    out.avg_nn = average_nn_distance(PointSet::from(seeds.points));
    if (!(out.avg_nn > 0.0)) throw UsageError("densify: all seeds coincide");

    std::vector<double> heights;
    heights.reserve(seeds.size());
    for (const auto& p : seeds.points) heights.push_back(p[2]);
    out.height_offset = std::accumulate(heights.begin(), heights.end(), 0.0) / static_cast<double>(heights.size());
    for (double& h : heights) h -= out.height_offset;

    const RbfModel model = fit_rbf(centers, heights, cfg, out.avg_nn);
    out.r0 = model.r0;
    out.solver_iterations = model.solver_iterations;
    out.relative_residual = model.relative_residual;

    const DenseGrid grid = make_grid(seeds, cfg, out.avg_nn);
    out.grid_nx = grid.nx;
    out.grid_ny = grid.ny;

    const PointSet planar = PointSet::from(centers);
    const KdTree index = KdTree::build(planar);
    const KdForest forest = KdForest::build(planar, cfg.color_search.trees, cfg.color_search.top_r,
                                            cfg.color_search.rng_seed);
    const std::size_t color_k = std::min(cfg.color_k, seeds.size());
    const std::size_t checks = std::max(cfg.color_search.max_checks, color_k);

    out.cloud.points = seeds.points;
    out.cloud.colors = seeds.colors;
    out.seed_count = seeds.size();
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            if (!grid.in(i, j)) continue;
            const Vec2 q = grid.cell(i, j);
            const KernelSum s = kernel_sum(model, q, index, model.support_radius);
            if (s.terms == 0) continue;
            const double z = out.height_offset + s.value;
            if (!(z > 0.0)) continue;
            const auto nb = forest.knn(q, color_k, checks);
            unsigned sum[3] = {0, 0, 0};
            for (std::size_t idx : nb.indices) {
                sum[0] += seeds.colors[idx].r;
                sum[1] += seeds.colors[idx].g;
                sum[2] += seeds.colors[idx].b;
            }
            const auto n = static_cast<unsigned>(nb.indices.size());
            auto avg = [n](unsigned total) { return static_cast<std::uint8_t>((2 * total + n) / (2 * n)); };
            out.cloud.points.push_back({q[0], q[1], z});
            out.cloud.colors.push_back({avg(sum[0]), avg(sum[1]), avg(sum[2])});
            ++out.interpolated_count;
        }
    }
    return out;
}

} // namespace densiface
