#include "densiface/face_segment.hpp"

#include "densiface/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace densiface {

void KMeansConfig::validate() const {
    if (k < 1) throw ConfigError("kmeans: k must be at least 1");
    if (max_iters < 1) throw ConfigError("kmeans: max_iters must be at least 1");
    if (!(tol > 0.0)) throw ConfigError("kmeans: tol must be positive");
}

namespace {

double sq_dist(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

std::size_t nearest(const Vec3& p, std::span<const Vec3> centroids) {
    std::size_t best = 0;
    double best_d = sq_dist(p, centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        const double d = sq_dist(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

// Draws an index with probability proportional to weights; uniform when all are zero.
std::size_t weighted_pick(std::span<const double> weights, double total, std::mt19937_64& rng) {
    if (!(total > 0.0)) return std::uniform_int_distribution<std::size_t>(0, weights.size() - 1)(rng);
    const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (target < acc) return i;
    }
    return weights.size() - 1;
}

std::vector<Vec3> seed_plus_plus(std::span<const Vec3> points, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = points.size();
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
    std::vector<Vec3> centers;
    centers.push_back(points[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
    std::vector<double> closest(n);
    for (std::size_t i = 0; i < n; ++i) closest[i] = sq_dist(points[i], centers[0]);
    double potential = std::accumulate(closest.begin(), closest.end(), 0.0);

    std::vector<double> candidate_dist(n);
    while (centers.size() < k) {
        // Greedy variant: draw several candidates, keep the one lowering the potential most.
        std::size_t best = 0;
        double best_potential = std::numeric_limits<double>::infinity();
        std::vector<double> best_dist;
        for (std::size_t t = 0; t < trials; ++t) {
            const std::size_t cand = weighted_pick(closest, potential, rng);
            double pot = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                candidate_dist[i] = std::min(closest[i], sq_dist(points[i], points[cand]));
                pot += candidate_dist[i];
            }
            if (pot < best_potential) {
                best_potential = pot;
                best = cand;
                best_dist = candidate_dist;
            }
        }
        centers.push_back(points[best]);
        closest = std::move(best_dist);
        potential = best_potential;
    }
    return centers;
}

std::vector<Vec3> seed_uniform(std::span<const Vec3> points, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<std::size_t> chosen;
    std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), static_cast<std::ptrdiff_t>(k), rng);
    std::vector<Vec3> centers;
    for (std::size_t i : chosen) centers.push_back(points[i]);
    return centers;
}

} // namespace

double clustering_objective(std::span<const Vec3> points, std::span<const std::size_t> labels,
                            std::span<const Vec3> centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += sq_dist(points[i], centroids[labels[i]]);
    return s;
}

Clustering kmeans(std::span<const Vec3> points, const KMeansConfig& cfg) {
    cfg.validate();
    if (points.empty()) throw UsageError("kmeans: no points");
    const std::size_t n = points.size();
    const std::size_t k = std::min(cfg.k, n);

    std::mt19937_64 rng(cfg.rng_seed);
    std::vector<Vec3> centroids =
        cfg.init == KMeansInit::plus_plus ? seed_plus_plus(points, k, rng) : seed_uniform(points, k, rng);

    Clustering out;
    out.labels.assign(n, 0);
    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        for (std::size_t i = 0; i < n; ++i) out.labels[i] = nearest(points[i], centroids);

        // Recompute means in index order, as offsets from each cluster's first member;
        // clusters that lost every point disappear.
        std::vector<Vec3> sums(centroids.size(), Vec3{0, 0, 0});
        std::vector<Vec3> anchor(centroids.size());
        std::vector<std::size_t> counts(centroids.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t l = out.labels[i];
            if (counts[l]++ == 0) anchor[l] = points[i];
            for (int d = 0; d < 3; ++d) sums[l][d] += points[i][d] - anchor[l][d];
        }
        std::vector<std::size_t> remap(centroids.size(), 0);
        std::vector<Vec3> next;
        std::vector<Vec3> previous;
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            if (counts[c] == 0) continue;
            remap[c] = next.size();
            const auto m = static_cast<double>(counts[c]);
            next.push_back({anchor[c][0] + sums[c][0] / m, anchor[c][1] + sums[c][1] / m, anchor[c][2] + sums[c][2] / m});
            previous.push_back(centroids[c]);
        }
        for (auto& l : out.labels) l = remap[l];

        double shift = 0.0;
        for (std::size_t c = 0; c < next.size(); ++c) shift = std::max(shift, std::sqrt(sq_dist(next[c], previous[c])));
        centroids = std::move(next);
        out.inertia_trace.push_back(clustering_objective(points, out.labels, centroids));
        out.iterations = iter + 1;
        if (shift < cfg.tol) break;
    }
    out.centroids = centroids;
    out.inertia = out.inertia_trace.back();
    return out;
}

PointCloud select_face_cluster(const PointCloud& cloud, const Clustering& clustering, const PixelRect& face_rect) {
    if (cloud.empty()) throw NoFaceError("no points left inside the face region");
    if (!cloud.has_source_pixels()) throw UsageError("select_face_cluster: cloud has no source pixels");
    if (clustering.labels.size() != cloud.size())
        throw UsageError("select_face_cluster: labels do not match the cloud");

    const double cx = face_rect.x + face_rect.w / 2.0;
    const double cy = face_rect.y + face_rect.h / 2.0;
    std::size_t seed = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double du = cloud.source_pixels[i].u - cx;
        const double dv = cloud.source_pixels[i].v - cy;
        const double d = du * du + dv * dv;
        if (d < best) {
            best = d;
            seed = i;
        }
    }
    const std::size_t label = clustering.labels[seed];
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (clustering.labels[i] == label) keep.push_back(i);
    return select(cloud, keep);
}

} // namespace densiface
