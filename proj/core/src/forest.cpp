#include "candlecast/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "candlecast/error.hpp"

namespace candlecast::ml {

namespace {

// Weighted Gini impurity of a split, kept as an exact fraction so ties are
// decided without rounding. For child counts (u, d, n = u + d) the child
// term is (n^2 - u^2 - d^2) / n; the split score is the sum over both
// children brought to a common denominator. Counts stay well below 2^21 in
// this domain, so the cross-multiplied comparisons fit __int128.
struct SplitScore {
    std::uint64_t num = 0;
    std::uint64_t den = 1;
};

SplitScore child_sum(std::uint64_t ul, std::uint64_t dl, std::uint64_t ur, std::uint64_t dr) {
    const std::uint64_t nl = ul + dl, nr = ur + dr;
    const std::uint64_t num_l = nl * nl - ul * ul - dl * dl;
    const std::uint64_t num_r = nr * nr - ur * ur - dr * dr;
    return {num_l * nr + num_r * nl, nl * nr};
}

int compare_scores(const SplitScore& a, const SplitScore& b) {
    const __int128 lhs = __int128(a.num) * b.den;
    const __int128 rhs = __int128(b.num) * a.den;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

} // namespace

struct DecisionTree::Builder {
    const std::vector<float>& xs;
    std::size_t d;
    const std::vector<Direction>& ys;
    std::size_t max_features;
    std::size_t min_samples_split;
    Rng& rng;
    std::vector<TreeNode>& nodes;
    std::vector<std::size_t> feature_pool;

    const float* row(std::size_t r) const { return xs.data() + r * d; }

    std::vector<std::size_t> sample_features() {
        if (max_features == 0 || max_features >= d) {
            std::vector<std::size_t> all(d);
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        // partial Fisher-Yates over a persistent pool, then sorted so the
        // tie-break scan order is by feature index
        for (std::size_t i = 0; i < max_features; ++i) {
            const std::size_t j = i + rng.uniform_below(feature_pool.size() - i);
            std::swap(feature_pool[i], feature_pool[j]);
        }
        std::vector<std::size_t> chosen(feature_pool.begin(),
                                        feature_pool.begin() + std::ptrdiff_t(max_features));
        std::sort(chosen.begin(), chosen.end());
        return chosen;
    }

    std::size_t grow(const std::vector<std::size_t>& rows) {
        const std::size_t node_idx = nodes.size();
        nodes.emplace_back();

        std::uint64_t up = 0;
        for (std::size_t r : rows)
            if (ys[r] == Direction::Up) ++up;
        const std::uint64_t down = rows.size() - up;
        nodes[node_idx].up = up;
        nodes[node_idx].down = down;

        if (up == 0 || down == 0 || rows.size() < min_samples_split) return node_idx;

        const std::uint64_t n = rows.size();
        const SplitScore parent{n * n - up * up - down * down, n};

        bool have_best = false;
        SplitScore best_score;
        std::size_t best_feature = 0;
        float best_threshold = 0.0f;

        std::vector<std::pair<float, Direction>> column(rows.size());
        for (std::size_t f : sample_features()) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                column[i] = {row(rows[i])[f], ys[rows[i]]};
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            std::uint64_t ul = 0, dl = 0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                if (column[i].second == Direction::Up) ++ul;
                else ++dl;
                if (column[i].first == column[i + 1].first) continue;
                const SplitScore score = child_sum(ul, dl, up - ul, down - dl);
                const int cmp = have_best ? compare_scores(score, best_score) : -1;
                if (cmp < 0 || (cmp == 0 && (f < best_feature ||
                                             (f == best_feature &&
                                              column[i].first < best_threshold)))) {
                    have_best = true;
                    best_score = score;
                    best_feature = f;
                    best_threshold = column[i].first;
                }
            }
        }

        if (!have_best || compare_scores(best_score, parent) >= 0) return node_idx;

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            if (row(r)[best_feature] <= best_threshold) left_rows.push_back(r);
            else right_rows.push_back(r);
        }
        const std::size_t left = grow(left_rows);
        const std::size_t right = grow(right_rows);
        TreeNode& node = nodes[node_idx];
        node.leaf = false;
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left;
        node.right = right;
        return node_idx;
    }
};

DecisionTree DecisionTree::fit(const std::vector<float>& xs, std::size_t n, std::size_t d,
                               const std::vector<Direction>& ys,
                               const std::vector<std::size_t>& rows, std::size_t max_features,
                               std::size_t min_samples_split, Rng& feature_rng) {
    if (d == 0 || n == 0 || xs.size() != n * d)
        throw ContractError("tree: feature matrix must be n x d");
    if (ys.size() != n) throw ContractError("tree: label count mismatch");
    if (rows.empty()) throw ContractError("tree: no training rows");
    for (std::size_t r : rows)
        if (r >= n) throw ContractError("tree: row index out of range");
    if (min_samples_split < 2) throw ContractError("tree: min_samples_split must be >= 2");

    DecisionTree tree;
    tree.d_ = d;
    Builder builder{xs, d, ys, max_features, min_samples_split, feature_rng, tree.nodes_, {}};
    if (max_features != 0 && max_features < d) {
        builder.feature_pool.resize(d);
        std::iota(builder.feature_pool.begin(), builder.feature_pool.end(), 0);
    }
    builder.grow(rows);
    return tree;
}

DecisionTree DecisionTree::from_nodes(std::vector<TreeNode> nodes, std::size_t d) {
    if (nodes.empty() || d == 0) throw IoError("tree parts: empty");
    for (const TreeNode& node : nodes) {
        if (node.leaf) {
            if (node.up + node.down == 0) throw IoError("tree parts: empty leaf");
        } else if (node.feature >= d || node.left >= nodes.size() ||
                   node.right >= nodes.size()) {
            throw IoError("tree parts: bad split node");
        }
    }
    DecisionTree tree;
    tree.nodes_ = std::move(nodes);
    tree.d_ = d;
    return tree;
}

Direction DecisionTree::predict(const float* x) const {
    if (nodes_.empty()) throw ContractError("tree: not fitted");
    std::size_t cur = 0;
    while (!nodes_[cur].leaf)
        cur = x[nodes_[cur].feature] <= nodes_[cur].threshold ? nodes_[cur].left
                                                              : nodes_[cur].right;
    return nodes_[cur].up > nodes_[cur].down ? Direction::Up : Direction::Down;
}

RandomForest RandomForest::fit(const std::vector<float>& xs, std::size_t n, std::size_t d,
                               const std::vector<Direction>& ys, const ForestParams& params,
                               std::uint64_t seed) {
    if (n < 2) throw ContractError("forest: need at least 2 samples");
    if (d == 0 || xs.size() != n * d) throw ContractError("forest: feature matrix must be n x d");
    if (ys.size() != n) throw ContractError("forest: label count mismatch");
    if (params.n_trees < 1) throw ContractError("forest: need at least 1 tree");

    std::size_t max_features = params.max_features;
    if (max_features == 0)
        max_features = std::max<std::size_t>(1, std::size_t(std::sqrt(double(d))));
    max_features = std::min(max_features, d);

    RandomForest forest;
    forest.d_ = d;
    forest.single_class_ =
        std::all_of(ys.begin(), ys.end(), [&](Direction l) { return l == ys.front(); });

    forest.trees_.reserve(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        TreeRecord record;
        record.bootstrap_seed = mix_seed(seed, t, 0xB007ull);
        record.feature_seed = mix_seed(seed, t, 0xFEA7ull);

        std::vector<std::size_t> rows(n);
        if (params.bootstrap) {
            Rng boot(record.bootstrap_seed);
            for (auto& r : rows) r = boot.uniform_below(n);
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }

        Rng feature_rng(record.feature_seed);
        record.tree = DecisionTree::fit(xs, n, d, ys, rows,
                                        max_features == d ? 0 : max_features,
                                        params.min_samples_split, feature_rng);
        forest.trees_.push_back(std::move(record));
    }
    return forest;
}

RandomForest RandomForest::from_parts(std::vector<TreeRecord> trees, std::size_t d,
                                      bool single_class) {
    if (trees.empty() || d == 0) throw IoError("forest parts: empty");
    for (const auto& record : trees)
        if (record.tree.n_features() != d) throw IoError("forest parts: tree dimension mismatch");
    RandomForest forest;
    forest.trees_ = std::move(trees);
    forest.d_ = d;
    forest.single_class_ = single_class;
    return forest;
}

RandomForest::Vote RandomForest::predict(const float* x) const {
    if (trees_.empty()) throw ContractError("forest: not fitted");
    std::size_t up = 0;
    for (const auto& record : trees_)
        if (record.tree.predict(x) == Direction::Up) ++up;
    const std::size_t down = trees_.size() - up;
    Vote vote;
    vote.label = up > down ? Direction::Up : Direction::Down;
    vote.vote_fraction =
        double(vote.label == Direction::Up ? up : down) / double(trees_.size());
    return vote;
}

} // namespace candlecast::ml
