#pragma once

#include <cstddef>
#include <vector>

#include "candlecast/direction.hpp"

namespace candlecast::ml {

/// Exact nearest-neighbor search over n points of dimension d (row-major
/// 32-bit floats). Split axis is the max-spread axis (ties to the lowest
/// axis), threshold is the median coordinate; queries return exactly the
/// same neighbor sets a linear scan would, with ties broken by lower point
/// index. Distances accumulate in double.
class KdTree {
public:
    struct Node {
        bool leaf = true;
        std::size_t begin = 0, end = 0;   // leaf: range into order()
        std::size_t axis = 0;             // split fields
        float threshold = 0.0f;
        std::size_t left = 0, right = 0;
    };

    struct Neighbor {
        double dist2 = 0.0;
        std::size_t index = 0;
        friend bool operator==(const Neighbor&, const Neighbor&) = default;
    };

    KdTree() = default;

    /// points.size() must be n*dim with n >= 1. leaf_size >= 1.
    static KdTree build(std::vector<float> points, std::size_t dim, std::size_t leaf_size = 16);

    /// Rebuilds a tree from serialized parts, validating the structure.
    static KdTree from_parts(std::vector<float> points, std::size_t dim,
                             std::vector<Node> nodes, std::vector<std::size_t> order,
                             std::size_t leaf_size);

    /// k nearest neighbors of `query` (length dim()), sorted by
    /// (distance^2, index) ascending. Requires 1 <= k <= size().
    std::vector<Neighbor> nearest(const float* query, std::size_t k) const;
    std::vector<Neighbor> nearest(const std::vector<float>& query, std::size_t k) const;

    std::size_t size() const { return order_.size(); }
    std::size_t dim() const { return dim_; }
    std::size_t leaf_size() const { return leaf_size_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::size_t>& order() const { return order_; }
    const std::vector<float>& points() const { return points_; }
    const float* point(std::size_t index) const { return points_.data() + index * dim_; }

private:
    struct BestSet;
    std::size_t build_node(std::size_t begin, std::size_t end, std::size_t leaf_size);
    void search(std::size_t node, const float* query, std::size_t k, BestSet& best) const;

    std::vector<float> points_;
    std::size_t dim_ = 0;
    std::size_t leaf_size_ = 16;
    std::vector<Node> nodes_;
    std::vector<std::size_t> order_;
};

/// Majority vote among the k nearest labeled points; ties go Down.
struct KnnResult {
    Direction label = Direction::Down;
    std::vector<KdTree::Neighbor> neighbors;
};

KnnResult knn_classify(const KdTree& tree, const std::vector<Direction>& labels,
                       const float* query, std::size_t k);

} // namespace candlecast::ml
