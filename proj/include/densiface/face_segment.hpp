#pragma once

#include "densiface/sensor_geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace densiface {

enum class KMeansInit {
    plus_plus, // greedy k-means++ seeding
    uniform,   // k distinct points drawn uniformly at random
};

struct KMeansConfig {
    std::size_t k = 3;
    std::size_t max_iters = 100;
    double tol = 1e-6; // meters, on the largest centroid move
    std::uint64_t rng_seed = 42;
    KMeansInit init = KMeansInit::plus_plus;

    void validate() const;
};

struct Clustering {
    std::vector<std::size_t> labels;
    std::vector<Vec3> centroids;
    double inertia = 0.0;              // sum of squared distances to the assigned centroid
    std::vector<double> inertia_trace; // objective after each Lloyd update
    std::size_t iterations = 0;
};

/// Lloyd iterations; ties go to the lowest centroid index and empty clusters are dropped.
Clustering kmeans(std::span<const Vec3> points, const KMeansConfig& cfg);

/// Sum of squared distances of each point to the centroid of its label.
double clustering_objective(std::span<const Vec3> points, std::span<const std::size_t> labels,
                            std::span<const Vec3> centroids);

/// Sub-cloud sharing the label of the point whose source pixel is closest to the rect center.
PointCloud select_face_cluster(const PointCloud& cloud, const Clustering& clustering, const PixelRect& face_rect);

} // namespace densiface
