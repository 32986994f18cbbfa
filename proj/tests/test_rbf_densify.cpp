#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "densiface/errors.hpp"
#include "densiface/rbf_densify.hpp"

#include <cmath>
#include <functional>
#include <random>

using namespace densiface;

namespace {

PointCloud make_cloud(const std::vector<Vec3>& pts) {
    PointCloud c;
    for (const auto& p : pts) {
        c.points.push_back(p);
        c.colors.push_back({100, 150, 200});
    }
    return c;
}

// Seeds sampled like a depth camera would see a surface: a regular lattice with jitter.
PointCloud lattice(int n, double step, const std::function<double(double, double)>& z, std::uint64_t seed,
                   double jitter = 0.1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-jitter, jitter);
    std::vector<Vec3> pts;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double x = (i + u(rng)) * step;
            const double y = (j + u(rng)) * step;
            pts.push_back({x, y, z(x, y)});
        }
    return make_cloud(pts);
}

std::vector<Vec2> random_centers(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec2> c(n);
    for (auto& p : c) p = {u(rng), u(rng)};
    return c;
}

// Untruncated model sum written out directly.
double full_sum(const RbfModel& m, const Vec2& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.centers.size(); ++i) {
        const double dx = q[0] - m.centers[i][0], dy = q[1] - m.centers[i][1];
        s += m.weights[i] * std::exp(-(dx * dx + dy * dy) / (m.r0 * m.r0));
    }
    return s;
}

KdTree index_of(const std::vector<Vec2>& c) { return KdTree::build(PointSet::from(c)); }

} // namespace

TEST_CASE("gaussian kernel values") {
    CHECK(gaussian_kernel(0.0, 0.3) == 1.0);
    CHECK(gaussian_kernel(0.3, 0.3) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(gaussian_kernel(6.0, 1.0) == doctest::Approx(2.319522830243569e-16).epsilon(1e-12));
    CHECK(gaussian_kernel(-0.5, 1.0) == gaussian_kernel(0.5, 1.0));
}

TEST_CASE("config validation and solver names") {
    RbfConfig c;
    CHECK_NOTHROW(c.validate());
    c.upsample = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.ridge = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.r0_multiplier = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(parse_rbf_solver("cg") == RbfSolver::sparse_cg);
    CHECK(parse_rbf_solver("dense_exact") == RbfSolver::dense_exact);
    CHECK_THROWS_AS(parse_rbf_solver("lu"), ValidationError);
}

TEST_CASE("fit_rbf: single seed") {
    const std::vector<Vec2> c{{0.0, 0.0}};
    const std::vector<double> f{5.0};
    RbfConfig cfg;
    cfg.ridge = 0.0;
    for (RbfSolver s : {RbfSolver::sparse_cg, RbfSolver::dense_exact}) {
        cfg.solver = s;
        const RbfModel m = fit_rbf(c, f, cfg, 1.0);
        REQUIRE(m.weights.size() == 1);
        CHECK(m.weights[0] == doctest::Approx(5.0).epsilon(1e-12));
    }
    cfg = {};
    CHECK(fit_rbf(c, f, cfg, 1.0).weights[0] == doctest::Approx(5.0 / 1.02).epsilon(1e-12));
}

TEST_CASE("fit_rbf: two seeds with equal heights") {
    // [1 p; p 1] w = [1; 1] gives w = 1 / (1 + p) for both.
    const std::vector<Vec2> c{{0.0, 0.0}, {0.5, 0.0}};
    const std::vector<double> f{1.0, 1.0};
    RbfConfig cfg;
    cfg.ridge = 0.0;
    cfg.r0_multiplier = 1.0;
    const double p = std::exp(-0.25);
    for (RbfSolver s : {RbfSolver::sparse_cg, RbfSolver::dense_exact}) {
        cfg.solver = s;
        const RbfModel m = fit_rbf(c, f, cfg, 1.0);
        CHECK(m.r0 == 1.0);
        CHECK(m.weights[0] == doctest::Approx(1.0 / (1.0 + p)).epsilon(1e-10));
        CHECK(m.weights[1] == doctest::Approx(1.0 / (1.0 + p)).epsilon(1e-10));
    }
}

TEST_CASE("assembled matrix is symmetric, truncated, and carries the ridge") {
    const auto c = random_centers(200, 4);
    const KdTree idx = index_of(c);
    const double r0 = 0.05, cutoff = 0.15, ridge = 0.02;
    const SparseMatrix s = assemble_kernel_matrix(idx, r0, cutoff, ridge);
    const DenseMatrix d = DenseMatrix::from(s);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(d(i, i) == doctest::Approx(1.0 + ridge).epsilon(1e-15));
        for (std::size_t j = 0; j < c.size(); ++j) {
            CHECK(d(i, j) == d(j, i));
            const double r = std::hypot(c[i][0] - c[j][0], c[i][1] - c[j][1]);
            if (i != j) {
                if (r > cutoff) CHECK(d(i, j) == 0.0);
                else CHECK(d(i, j) == doctest::Approx(gaussian_kernel(r, r0)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("conjugate gradient and elimination agree on the truncated system") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto c = random_centers(50, seed);
        std::mt19937_64 rng(seed + 100);
        std::uniform_real_distribution<double> u(-0.05, 0.05);
        std::vector<double> f(c.size());
        for (auto& v : f) v = u(rng);
        const double avg = average_nn_distance(PointSet::from(c));
        RbfConfig cfg;
        cfg.cg_rel_tol = 1e-13;
        const RbfModel m = fit_rbf(c, f, cfg, avg);
        const SparseMatrix a =
            assemble_kernel_matrix(index_of(c), cfg.r0_multiplier * avg, m.support_radius, cfg.ridge);
        const auto w = solve_dense(DenseMatrix::from(a), f);
        double worst = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, std::abs(w[i] - m.weights[i]));
        CAPTURE(seed);
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("eval_rbf") {
    const auto c = random_centers(300, 7);
    std::vector<double> f(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) f[i] = 0.1 * std::sin(5 * c[i][0]) * std::cos(3 * c[i][1]);
    const double avg = average_nn_distance(PointSet::from(c));
    const RbfModel m = fit_rbf(c, f, RbfConfig{}, avg);
    const KdTree idx = index_of(c);

    SUBCASE("zero beyond the support") {
        const Vec2 far{10.0, 10.0};
        CHECK(eval_rbf(m, far, idx, m.support_radius) == 0.0);
    }
    SUBCASE("dropped terms are bounded by the kernel value at the cutoff") {
        double wsum = 0.0;
        for (double w : m.weights) wsum += std::abs(w);
        const double bound = wsum * gaussian_kernel(m.support_radius, m.r0);
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(0.1, 0.9);
        for (int i = 0; i < 200; ++i) {
            const Vec2 q{u(rng), u(rng)};
            const double full = full_sum(m, q);
            CHECK(std::abs(eval_rbf(m, q, idx, m.support_radius) - full) <= bound);
            CHECK(eval_rbf(m, q, idx, 1e9) == doctest::Approx(full).epsilon(1e-12));
        }
    }
}

TEST_CASE("eval_rbf on a small fixture matches the untruncated sum") {
    const auto c = random_centers(20, 30);
    std::vector<double> f(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) f[i] = 0.8 + 0.1 * c[i][0] - 0.05 * c[i][1] * c[i][1];
    const double avg = average_nn_distance(PointSet::from(c));
    const RbfModel m = fit_rbf(c, f, RbfConfig{}, avg);
    const KdTree idx = index_of(c);
    const Vec2 queries[5] = {{0.5, 0.5}, {0.1, 0.9}, {0.33, 0.2}, {0.75, 0.6}, {0.95, 0.05}};
    for (const auto& q : queries) {
        const double full = full_sum(m, q);
        CHECK(std::abs(eval_rbf(m, q, idx, m.support_radius) - full) <= 1e-4 * std::abs(full));
    }
}

TEST_CASE("interpolation condition at ridge 0") {
    const auto c = random_centers(150, 12);
    std::vector<double> f(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) f[i] = c[i][0] * c[i][0] - 0.5 * c[i][1];
    const double avg = average_nn_distance(PointSet::from(c));
    RbfConfig cfg;
    cfg.ridge = 0.0;
    cfg.r0_multiplier = 2.0;
    cfg.solver = RbfSolver::dense_exact;
    const RbfModel m = fit_rbf(c, f, cfg, avg);
    CHECK(m.relative_residual <= 1e-8);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(full_sum(m, c[i]) - f[i]) <= 1e-6);
}

TEST_CASE("fit is translation equivariant in the plane") {
    const auto c = random_centers(120, 21);
    std::vector<double> f(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) f[i] = std::cos(4 * c[i][0] + c[i][1]);
    auto shifted = c;
    for (auto& p : shifted) {
        p[0] += 0.375;
        p[1] -= 1.25;
    }
    const double avg = average_nn_distance(PointSet::from(c));
    RbfConfig cfg;
    cfg.cg_rel_tol = 1e-12;
    const RbfModel a = fit_rbf(c, f, cfg, avg);
    const RbfModel b = fit_rbf(shifted, f, cfg, avg);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(a.weights[i] - b.weights[i]) <= 1e-8);
    const Vec2 q{0.4, 0.6}, qs{0.775, -0.65};
    CHECK(full_sum(a, q) == doctest::Approx(full_sum(b, qs)).epsilon(1e-8));
}

TEST_CASE("fit_rbf error paths") {
    const std::vector<Vec2> dup{{0, 0}, {1, 0}, {0, 0}};
    const std::vector<double> f{1, 2, 3};
    RbfConfig cfg;
    cfg.ridge = 0.0;
    CHECK_THROWS_AS(fit_rbf(dup, f, cfg, 1.0), SingularityError);
    cfg.ridge = 0.02;
    CHECK_NOTHROW(fit_rbf(dup, f, cfg, 1.0));

    const auto c = random_centers(400, 2);
    std::vector<double> g(c.size(), 1.0);
    cfg = {};
    cfg.cg_max_iters = 1;
    cfg.cg_rel_tol = 1e-14;
    CHECK_THROWS_AS(fit_rbf(c, g, cfg, 0.05), SolverError);

    const auto big = random_centers(kMaxDenseCenters + 1, 3);
    std::vector<double> h(big.size(), 0.0);
    cfg = {};
    cfg.solver = RbfSolver::dense_exact;
    CHECK_THROWS_AS(fit_rbf(big, h, cfg, 0.01), UsageError);

    CHECK_THROWS_AS(fit_rbf(std::vector<Vec2>{}, std::vector<double>{}, RbfConfig{}, 1.0), UsageError);
    CHECK_THROWS_AS(fit_rbf(c, std::vector<double>{1.0}, RbfConfig{}, 1.0), UsageError);
}

TEST_CASE("make_grid") {
    RbfConfig cfg;
    SUBCASE("unit lattice of 10 x 10 seeds") {
        std::vector<Vec3> pts;
        for (int j = 0; j < 10; ++j)
            for (int i = 0; i < 10; ++i) pts.push_back({double(i), double(j), 1.0});
        const DenseGrid g = make_grid(make_cloud(pts), cfg, 1.0);
        CHECK(g.spacing == doctest::Approx(1.0 / 3.0));
        CHECK(g.nx == 28);
        CHECK(g.ny == 28);
        CHECK(g.count_in() == 28 * 28);
        CHECK(g.cell(27, 27)[0] == doctest::Approx(9.0));
    }
    SUBCASE("collinear seeds give a single row") {
        std::vector<Vec3> pts;
        for (int i = 0; i < 5; ++i) pts.push_back({0.01 * i, 0.2, 0.9});
        const DenseGrid g = make_grid(make_cloud(pts), cfg, 0.01);
        CHECK(g.ny == 1);
        CHECK(g.nx == 13);
    }
    SUBCASE("mask stops at four spacings from the nearest seed") {
        std::vector<Vec3> pts{{0, 0, 1}, {1, 0, 1}, {20, 0, 1}};
        const DenseGrid g = make_grid(make_cloud(pts), cfg, 1.0);
        for (std::size_t i = 0; i < g.nx; ++i) {
            const double x = g.cell(i, 0)[0];
            const double d = std::min({std::abs(x), std::abs(x - 1.0), std::abs(x - 20.0)});
            CHECK(g.in(i, 0) == (d <= 4.0));
        }
    }
    SUBCASE("empty input") { CHECK_THROWS_AS(make_grid(PointCloud{}, cfg, 1.0), UsageError); }
}

TEST_CASE("densify: output layout and counts") {
    const PointCloud seeds = lattice(40, 0.002, [](double x, double y) { return 0.8 + 0.3 * (x * x + y * y); }, 5);
    const DensifyResult r = densify(seeds, RbfConfig{});
    REQUIRE(r.seed_count == seeds.size());
    CHECK(r.cloud.size() == r.seed_count + r.interpolated_count);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        CHECK(r.cloud.points[i] == seeds.points[i]);
        CHECK(r.cloud.colors[i] == seeds.colors[i]);
    }
    for (std::size_t i = seeds.size(); i < r.cloud.size(); ++i) CHECK(r.cloud.colors[i] == Rgb{100, 150, 200});
    CHECK(r.r0 == doctest::Approx(6.0 * r.avg_nn));
    const double ratio = double(r.cloud.size()) / double(r.seed_count);
    CHECK(ratio >= 7.0);
    CHECK(ratio <= 12.0);
}

TEST_CASE("densify: a tilted plane with a hole is filled accurately") {
    const auto plane = [](double x, double y) { return 0.8 + 0.05 * x - 0.03 * y; };
    PointCloud full = lattice(50, 0.002, plane, 9);
    PointCloud seeds;
    const double cx = 0.049, cy = 0.049, hole = 3 * 0.002;
    for (std::size_t i = 0; i < full.size(); ++i) {
        const auto& p = full.points[i];
        if (std::hypot(p[0] - cx, p[1] - cy) < hole) continue;
        seeds.points.push_back(p);
        seeds.colors.push_back(full.colors[i]);
    }
    const DensifyResult r = densify(seeds, RbfConfig{});
    std::size_t in_hole = 0;
    double worst = 0.0;
    for (std::size_t i = r.seed_count; i < r.cloud.size(); ++i) {
        const auto& p = r.cloud.points[i];
        worst = std::max(worst, std::abs(p[2] - plane(p[0], p[1])));
        in_hole += std::hypot(p[0] - cx, p[1] - cy) < hole;
    }
    CHECK(in_hole > 0);
    CHECK(worst <= 1e-3);
}

TEST_CASE("densify: more upsampling never yields fewer points") {
    const PointCloud seeds = lattice(25, 0.002, [](double x, double) { return 0.7 + 0.5 * x; }, 2);
    std::size_t last = 0;
    for (int up = 1; up <= 4; ++up) {
        RbfConfig cfg;
        cfg.upsample = up;
        const std::size_t n = densify(seeds, cfg).interpolated_count;
        CHECK(n >= last);
        last = n;
    }
}

TEST_CASE("densify: interpolated heights stay within the seed range") {
    const PointCloud seeds = lattice(
        35, 0.002, [](double x, double y) { return 0.75 + 0.004 * std::sin(200 * x) * std::cos(150 * y); }, 13, 0.3);
    double lo = 1e9, hi = -1e9;
    for (const auto& p : seeds.points) {
        lo = std::min(lo, p[2]);
        hi = std::max(hi, p[2]);
    }
    const DensifyResult r = densify(seeds, RbfConfig{});
    const double slack = 0.5 * (hi - lo);
    for (std::size_t i = r.seed_count; i < r.cloud.size(); ++i) {
        CHECK(r.cloud.points[i][2] >= lo - slack);
        CHECK(r.cloud.points[i][2] <= hi + slack);
    }
}

TEST_CASE("densify is deterministic") {
    const PointCloud seeds = lattice(20, 0.003, [](double x, double y) { return 0.9 - x * y; }, 4);
    const DensifyResult a = densify(seeds, RbfConfig{});
    const DensifyResult b = densify(seeds, RbfConfig{});
    CHECK(a.cloud.points == b.cloud.points);
    CHECK(a.cloud.colors == b.cloud.colors);
}

TEST_CASE("densify rejects degenerate seeds") {
    CHECK_THROWS_AS(densify(make_cloud({{0, 0, 1}}), RbfConfig{}), UsageError);
    CHECK_THROWS_AS(densify(make_cloud({{0, 0, 1}, {0, 0, 1}}), RbfConfig{}), UsageError);
}
