#include "densiface/neighbors.hpp"

#include "densiface/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <tuple>

namespace densiface {

PointSet::PointSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ == 0) throw UsageError("point set: dimension must be positive");
    if (coords_.size() % dim_ != 0) throw UsageError("point set: coordinate count not a multiple of dimension");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double t = a[d] - b[d];
        s += t * t;
    }
    return s;
}

namespace {

struct Candidate {
    double d2;
    std::size_t index;
    bool operator<(const Candidate& o) const { return std::tie(d2, index) < std::tie(o.d2, o.index); }
};

// Max-heap of the best k candidates seen so far.
class BestK {
public:
    explicit BestK(std::size_t k) : k_(k) {}

    bool full() const { return heap_.size() == k_; }
    double worst() const { return heap_.top().d2; }

    void offer(double d2, std::size_t index) {
        const Candidate c{d2, index};
        if (!full()) {
            heap_.push(c);
        } else if (c < heap_.top()) {
            heap_.pop();
            heap_.push(c);
        }
    }

    // A subtree whose lower bound is strictly above the current worst cannot improve the set.
    bool can_improve(double bound) const { return !full() || bound <= worst(); }

    NeighborQueryResult finish() {
        std::vector<Candidate> sorted;
        while (!heap_.empty()) {
            sorted.push_back(heap_.top());
            heap_.pop();
        }
        std::reverse(sorted.begin(), sorted.end());
        NeighborQueryResult r;
        for (const auto& c : sorted) {
            r.indices.push_back(c.index);
            r.distances.push_back(std::sqrt(c.d2));
        }
        return r;
    }

private:
    std::size_t k_;
    std::priority_queue<Candidate> heap_;
};

} // namespace

class TreeBuilder {
public:
    TreeBuilder(const PointSet& pts, std::size_t bucket, std::size_t top_r, std::mt19937_64* rng)
        : pts_(pts), bucket_(std::max<std::size_t>(1, bucket)), top_r_(std::max<std::size_t>(1, top_r)), rng_(rng) {}

    void run(KdTree& tree) {
        tree.order_.resize(pts_.size());
        std::iota(tree.order_.begin(), tree.order_.end(), std::size_t{0});
        tree.nodes_.clear();
        build(tree, 0, tree.order_.size());
    }

private:
    std::uint32_t build(KdTree& tree, std::size_t begin, std::size_t end) {
        const auto id = static_cast<std::uint32_t>(tree.nodes_.size());
        tree.nodes_.emplace_back();
        auto make_leaf = [&] {
            tree.nodes_[id].begin = static_cast<std::uint32_t>(begin);
            tree.nodes_[id].end = static_cast<std::uint32_t>(end);
            return id;
        };
        const std::size_t n = end - begin;
        if (n <= bucket_) return make_leaf();

        const std::size_t dims = pts_.dim();
        std::vector<double> variance(dims, 0.0);
        for (std::size_t d = 0; d < dims; ++d) {
            double mean = 0.0;
            for (std::size_t i = begin; i < end; ++i) mean += pts_.coord(tree.order_[i], d);
            mean /= static_cast<double>(n);
            double acc = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                const double t = pts_.coord(tree.order_[i], d) - mean;
                acc += t * t;
            }
            variance[d] = acc / static_cast<double>(n);
        }
        std::vector<std::size_t> ranked(dims);
        std::iota(ranked.begin(), ranked.end(), std::size_t{0});
        std::stable_sort(ranked.begin(), ranked.end(),
                         [&](std::size_t a, std::size_t b) { return variance[a] > variance[b]; });
        if (!(variance[ranked[0]] > 0.0)) return make_leaf(); // all points coincide

        std::size_t dim = ranked[0];
        const std::size_t choices = std::min(top_r_, dims);
        if (rng_ != nullptr && choices > 1) {
            std::uniform_int_distribution<std::size_t> pick(0, choices - 1);
            dim = ranked[pick(*rng_)];
            if (!(variance[dim] > 0.0)) dim = ranked[0];
        }

        auto first = tree.order_.begin() + static_cast<std::ptrdiff_t>(begin);
        auto last = tree.order_.begin() + static_cast<std::ptrdiff_t>(end);
        auto by_coord = [&](std::size_t a, std::size_t b) {
            const double ca = pts_.coord(a, dim);
            const double cb = pts_.coord(b, dim);
            return ca < cb || (ca == cb && a < b);
        };
        // Left half holds the floor(n/2) smallest; the split value is the first value of the right half.
        auto mid = first + static_cast<std::ptrdiff_t>(n / 2);
        std::nth_element(first, mid, last, by_coord);
        double split = pts_.coord(*mid, dim);
        auto cut = std::partition(first, last, [&](std::size_t i) { return pts_.coord(i, dim) < split; });
        if (cut == first) {
            // Lower half all equal to the split value: split just above it instead.
            double next = INFINITY;
            for (auto it = first; it != last; ++it) {
                const double c = pts_.coord(*it, dim);
                if (c > split) next = std::min(next, c);
            }
            split = next;
            cut = std::partition(first, last, [&](std::size_t i) { return pts_.coord(i, dim) < split; });
        }
        // Keep leaf contents in index order so traversal is independent of partition internals.
        std::sort(first, cut);
        std::sort(cut, last);

        const std::size_t mid_index = static_cast<std::size_t>(cut - tree.order_.begin());
        const std::uint32_t left = build(tree, begin, mid_index);
        const std::uint32_t right = build(tree, mid_index, end);
        auto& node = tree.nodes_[id];
        node.dim = static_cast<int>(dim);
        node.split = split;
        node.left = left;
        node.right = right;
        return id;
    }

    const PointSet& pts_;
    std::size_t bucket_;
    std::size_t top_r_;
    std::mt19937_64* rng_;
};

KdTree KdTree::build(PointSet points, std::size_t bucket_size) {
    if (points.size() == 0) throw UsageError("kd-tree: cannot build over an empty point set");
    KdTree tree;
    tree.points_ = std::make_shared<const PointSet>(std::move(points));
    tree.bucket_size_ = bucket_size;
    TreeBuilder(*tree.points_, bucket_size, 1, nullptr).run(tree);
    return tree;
}

NeighborQueryResult KdTree::knn(std::span<const double> query, std::size_t k) const {
    if (k == 0) throw UsageError("knn: k must be at least 1");
    if (k > points_->size()) throw UsageError("knn: k exceeds the number of points");
    BestK best(k);
    // Explicit stack of (node, lower bound on squared distance).
    std::vector<std::pair<std::uint32_t, double>> stack{{0u, 0.0}};
    while (!stack.empty()) {
        const auto [id, bound] = stack.back();
        stack.pop_back();
        if (!best.can_improve(bound)) continue;
        const Node& node = nodes_[id];
        if (node.is_leaf()) {
            for (std::uint32_t i = node.begin; i < node.end; ++i)
                best.offer(squared_distance(query, (*points_)[order_[i]]), order_[i]);
            continue;
        }
        const double diff = query[static_cast<std::size_t>(node.dim)] - node.split;
        const std::uint32_t near = diff < 0.0 ? node.left : node.right;
        const std::uint32_t far = diff < 0.0 ? node.right : node.left;
        stack.emplace_back(far, std::max(bound, diff * diff));
        stack.emplace_back(near, bound);
    }
    return best.finish();
}

std::vector<RadiusHit> KdTree::within_radius(std::span<const double> query, double radius) const {
    std::vector<RadiusHit> hits;
    const double r2 = radius * radius;
    std::vector<std::uint32_t> stack{0u};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (node.is_leaf()) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                const double d2 = squared_distance(query, (*points_)[order_[i]]);
                if (d2 <= r2) hits.push_back({order_[i], d2});
            }
            continue;
        }
        const double diff = query[static_cast<std::size_t>(node.dim)] - node.split;
        if (diff < 0.0 || diff * diff <= r2) stack.push_back(node.left);
        if (diff >= 0.0 || diff * diff <= r2) stack.push_back(node.right);
    }
    std::sort(hits.begin(), hits.end(), [](const RadiusHit& a, const RadiusHit& b) { return a.index < b.index; });
    return hits;
}

KdForest KdForest::build(PointSet points, std::size_t trees, std::size_t top_r, std::uint64_t rng_seed,
                         std::size_t bucket_size) {
    if (points.size() == 0) throw UsageError("kd-forest: cannot build over an empty point set");
    if (trees == 0) throw UsageError("kd-forest: need at least one tree");
    KdForest forest;
    forest.points_ = std::make_shared<const PointSet>(std::move(points));
    std::mt19937_64 rng(rng_seed);
    forest.trees_.reserve(trees);
    for (std::size_t t = 0; t < trees; ++t) {
        KdTree tree;
        tree.points_ = forest.points_;
        tree.bucket_size_ = bucket_size;
        TreeBuilder(*forest.points_, bucket_size, top_r, &rng).run(tree);
        forest.trees_.push_back(std::move(tree));
    }
    return forest;
}

NeighborQueryResult KdForest::knn(std::span<const double> query, std::size_t k, std::size_t max_checks) const {
    if (k == 0) throw UsageError("knn: k must be at least 1");
    if (k > points_->size()) throw UsageError("knn: k exceeds the number of points");
    if (max_checks < k) throw UsageError("knn: max_checks must be at least k");

    struct Branch {
        double bound;
        std::uint32_t tree;
        std::uint32_t node;
        bool operator>(const Branch& o) const {
            return std::tie(bound, tree, node) > std::tie(o.bound, o.tree, o.node);
        }
    };
    std::priority_queue<Branch, std::vector<Branch>, std::greater<>> queue;
    for (std::uint32_t t = 0; t < trees_.size(); ++t) queue.push({0.0, t, 0u});

    BestK best(k);
    std::vector<char> seen(points_->size(), 0);
    std::size_t checks = 0;
    while (!queue.empty() && checks < max_checks) {
        const Branch top = queue.top();
        queue.pop();
        if (!best.can_improve(top.bound)) break;
        const KdTree& tree = trees_[top.tree];
        std::uint32_t id = top.node;
        while (!tree.nodes_[id].is_leaf()) {
            const auto& node = tree.nodes_[id];
            const double diff = query[static_cast<std::size_t>(node.dim)] - node.split;
            const std::uint32_t near = diff < 0.0 ? node.left : node.right;
            const std::uint32_t far = diff < 0.0 ? node.right : node.left;
            queue.push({std::max(top.bound, diff * diff), top.tree, far});
            id = near;
        }
        const auto& leaf = tree.nodes_[id];
        for (std::uint32_t i = leaf.begin; i < leaf.end; ++i) {
            const std::size_t idx = tree.order_[i];
            if (seen[idx]) continue;
            seen[idx] = 1;
            ++checks;
            best.offer(squared_distance(query, (*points_)[idx]), idx);
        }
    }
    return best.finish();
}

double average_nn_distance(const PointSet& points) {
    if (points.size() < 2) throw UsageError("average_nn_distance: need at least two points");
    const KdTree tree = KdTree::build(points);
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto r = tree.knn(points[i], 2);
        // Duplicates tie at distance 0 and may sort ahead of the point itself.
        const std::size_t j = r.indices[0] != i ? 0 : 1;
        sum += r.distances[j];
    }
    return sum / static_cast<double>(points.size());
}

} // namespace densiface
