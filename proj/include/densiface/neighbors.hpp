#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace densiface {

/// Dense row-major storage of n points in d dimensions.
class PointSet {
public:
    PointSet() = default;
    PointSet(std::size_t dim, std::vector<double> coords);

    template <std::size_t D>
    static PointSet from(std::span<const std::array<double, D>> pts) {
        std::vector<double> c;
        c.reserve(pts.size() * D);
        for (const auto& p : pts) c.insert(c.end(), p.begin(), p.end());
        return PointSet(D, std::move(c));
    }
    template <std::size_t D>
    static PointSet from(const std::vector<std::array<double, D>>& pts) {
        return from(std::span<const std::array<double, D>>(pts));
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
    std::span<const double> operator[](std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
    double coord(std::size_t i, std::size_t d) const { return coords_[i * dim_ + d]; }

private:
    std::size_t dim_ = 0;
    std::vector<double> coords_;
};

double squared_distance(std::span<const double> a, std::span<const double> b);

struct NeighborQueryResult {
    std::vector<std::size_t> indices;
    std::vector<double> distances; // ascending
};

struct RadiusHit {
    std::size_t index;
    double squared_distance;
};

/// Binary space partition with median splits and bucketed leaves.
class KdTree {
public:
    struct Node {
        static constexpr std::uint32_t kNone = 0xffffffffu;
        int dim = -1; // -1 for leaves
        double split = 0.0;
        std::uint32_t left = kNone;
        std::uint32_t right = kNone;
        std::uint32_t begin = 0; // leaf range into leaf_order()
        std::uint32_t end = 0;
        bool is_leaf() const { return dim < 0; }
    };

    /// Splits on the dimension of maximum variance. Throws UsageError for an empty set.
    static KdTree build(PointSet points, std::size_t bucket_size = 16);

    /// The k nearest points by Euclidean distance, ties to the lower index.
    NeighborQueryResult knn(std::span<const double> query, std::size_t k) const;

    /// All points with distance <= radius, ordered by ascending index.
    std::vector<RadiusHit> within_radius(std::span<const double> query, double radius) const;

    const PointSet& points() const { return *points_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    std::span<const std::size_t> leaf_order() const { return order_; }
    std::size_t bucket_size() const { return bucket_size_; }

private:
    friend class KdForest;
    friend class TreeBuilder;

    KdTree() = default;

    std::shared_ptr<const PointSet> points_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> order_;
    std::size_t bucket_size_ = 16;
};

/// Build and query settings for KdForest.
struct ForestParams {
    std::size_t trees = 4;
    std::size_t top_r = 2;
    std::size_t max_checks = 128;
    std::uint64_t rng_seed = 42;
};

/// Randomized kd-tree ensemble searched with one best-bin-first queue.
class KdForest {
public:
    static KdForest build(PointSet points, std::size_t trees = 4, std::size_t top_r = 2,
                          std::uint64_t rng_seed = 42, std::size_t bucket_size = 16);

    /// Approximate k-NN. Opens whole leaves until max_checks distinct points were examined.
    NeighborQueryResult knn(std::span<const double> query, std::size_t k, std::size_t max_checks) const;

    const std::vector<KdTree>& trees() const { return trees_; }
    const PointSet& points() const { return *points_; }

private:
    std::shared_ptr<const PointSet> points_;
    std::vector<KdTree> trees_;
};

/// Mean distance from each point to its nearest other point (by index), via the exact tree.
double average_nn_distance(const PointSet& points);

} // namespace densiface
