#include "candlecast/kdtree.hpp"

#include <algorithm>
#include <queue>
#include <string>

#include "candlecast/error.hpp"

namespace candlecast::ml {

namespace {

double dist2(const float* a, const float* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = double(a[i]) - double(b[i]);
        acc += diff * diff;
    }
    return acc;
}

} // namespace

// Max-heap of the k best (dist2, index) pairs seen so far; the heap top is
// the current worst member, so a candidate joins iff it beats the top
// lexicographically.
struct KdTree::BestSet {
    std::size_t k;
    std::priority_queue<std::pair<double, std::size_t>> heap;

    bool full() const { return heap.size() == k; }
    double worst() const { return heap.top().first; }

    void offer(double d2, std::size_t index) {
        if (heap.size() < k) {
            heap.emplace(d2, index);
        } else if (std::pair(d2, index) < heap.top()) {
            heap.pop();
            heap.emplace(d2, index);
        }
    }
};

KdTree KdTree::build(std::vector<float> points, std::size_t dim, std::size_t leaf_size) {
    if (dim == 0) throw ContractError("kdtree: dimension must be >= 1");
    if (leaf_size == 0) throw ContractError("kdtree: leaf size must be >= 1");
    if (points.empty() || points.size() % dim != 0)
        throw ContractError("kdtree: need a non-empty n x " + std::to_string(dim) +
                            " point matrix");

    KdTree tree;
    tree.points_ = std::move(points);
    tree.dim_ = dim;
    tree.leaf_size_ = leaf_size;
    const std::size_t n = tree.points_.size() / dim;
    tree.order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) tree.order_[i] = i;
    tree.build_node(0, n, leaf_size);
    return tree;
}

std::size_t KdTree::build_node(std::size_t begin, std::size_t end, std::size_t leaf_size) {
    const std::size_t node_idx = nodes_.size();
    nodes_.emplace_back();

    const std::size_t n = end - begin;
    std::size_t best_axis = 0;
    float best_spread = -1.0f;
    for (std::size_t axis = 0; axis < dim_; ++axis) {
        float lo = point(order_[begin])[axis];
        float hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            const float v = point(order_[i])[axis];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const float spread = hi - lo;
        if (spread > best_spread) {
            best_spread = spread;
            best_axis = axis;
        }
    }

    if (n <= leaf_size || best_spread <= 0.0f) {
        Node& node = nodes_[node_idx];
        node.leaf = true;
        node.begin = begin;
        node.end = end;
        return node_idx;
    }

    std::sort(order_.begin() + std::ptrdiff_t(begin), order_.begin() + std::ptrdiff_t(end),
              [&](std::size_t a, std::size_t b) {
                  const float va = point(a)[best_axis];
                  const float vb = point(b)[best_axis];
                  return va < vb || (va == vb && a < b);
              });
    const std::size_t mid = begin + n / 2;
    const float threshold = point(order_[mid])[best_axis];

    const std::size_t left = build_node(begin, mid, leaf_size);
    const std::size_t right = build_node(mid, end, leaf_size);
    Node& node = nodes_[node_idx];
    node.leaf = false;
    node.axis = best_axis;
    node.threshold = threshold;
    node.left = left;
    node.right = right;
    return node_idx;
}

KdTree KdTree::from_parts(std::vector<float> points, std::size_t dim, std::vector<Node> nodes,
                          std::vector<std::size_t> order, std::size_t leaf_size) {
    if (dim == 0 || leaf_size == 0 || points.empty() || points.size() % dim != 0)
        throw IoError("kdtree parts: invalid geometry");
    const std::size_t n = points.size() / dim;
    if (order.size() != n || nodes.empty()) throw IoError("kdtree parts: bad order or nodes");

    std::vector<bool> seen(n, false);
    for (std::size_t idx : order) {
        if (idx >= n || seen[idx]) throw IoError("kdtree parts: order is not a permutation");
        seen[idx] = true;
    }
    for (const Node& node : nodes) {
        if (node.leaf) {
            if (node.begin >= node.end || node.end > n)
                throw IoError("kdtree parts: bad leaf range");
        } else {
            if (node.axis >= dim || node.left >= nodes.size() || node.right >= nodes.size())
                throw IoError("kdtree parts: bad split node");
        }
    }

    KdTree tree;
    tree.points_ = std::move(points);
    tree.dim_ = dim;
    tree.leaf_size_ = leaf_size;
    tree.nodes_ = std::move(nodes);
    tree.order_ = std::move(order);
    return tree;
}

void KdTree::search(std::size_t node_idx, const float* query, std::size_t k,
                    BestSet& best) const {
    const Node& node = nodes_[node_idx];
    if (node.leaf) {
        for (std::size_t i = node.begin; i < node.end; ++i) {
            const std::size_t idx = order_[i];
            best.offer(dist2(query, point(idx), dim_), idx);
        }
        return;
    }

    const double q = double(query[node.axis]);
    const double delta = q - double(node.threshold);
    const std::size_t near = delta <= 0.0 ? node.left : node.right;
    const std::size_t far = delta <= 0.0 ? node.right : node.left;

    search(near, query, k, best);
    // The far side can still hold an equal-distance lower-index point, so
    // prune only when the hyperplane distance strictly exceeds the worst.
    if (!best.full() || delta * delta <= best.worst()) search(far, query, k, best);
}

std::vector<KdTree::Neighbor> KdTree::nearest(const float* query, std::size_t k) const {
    if (k < 1 || k > size())
        throw ContractError("kdtree: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(size()) + "]");
    BestSet best{k, {}};
    search(0, query, k, best);

    std::vector<Neighbor> result(best.heap.size());
    for (std::size_t i = result.size(); i-- > 0;) {
        const auto& [d2, idx] = best.heap.top();
        result[i] = Neighbor{d2, idx};
        best.heap.pop();
    }
    return result;
}

std::vector<KdTree::Neighbor> KdTree::nearest(const std::vector<float>& query,
                                              std::size_t k) const {
    if (query.size() != dim_) throw ContractError("kdtree: query dimension mismatch");
    return nearest(query.data(), k);
}

KnnResult knn_classify(const KdTree& tree, const std::vector<Direction>& labels,
                       const float* query, std::size_t k) {
    if (labels.size() != tree.size())
        throw ContractError("knn: label count does not match tree size");
    KnnResult result;
    result.neighbors = tree.nearest(query, k);
    std::size_t up = 0;
    for (const auto& nb : result.neighbors)
        if (labels[nb.index] == Direction::Up) ++up;
    result.label = 2 * up > k ? Direction::Up : Direction::Down;
    return result;
}

} // namespace candlecast::ml
