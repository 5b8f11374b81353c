#pragma once

#include <cstdint>
#include <vector>

#include "candlecast/direction.hpp"
#include "candlecast/rng.hpp"

namespace candlecast::ml {

struct TreeNode {
    bool leaf = true;
    std::uint64_t up = 0, down = 0;  // leaf class counts
    std::size_t feature = 0;         // split: x[feature] <= threshold goes left
    float threshold = 0.0f;
    std::size_t left = 0, right = 0;
};

/// CART-style binary classification tree on Gini impurity. Candidate
/// thresholds are observed feature values (excluding each feature's max);
/// split comparisons are exact rational arithmetic, ties resolved to the
/// lowest feature index, then the lowest threshold. A node splits only if
/// that strictly reduces weighted impurity.
class DecisionTree {
public:
    DecisionTree() = default;

    /// xs is n rows by d columns, row-major; `rows` selects the training
    /// rows (duplicates allowed, as produced by bootstrap resampling).
    /// max_features = 0 means all features; otherwise that many distinct
    /// features are drawn from `feature_rng` per split.
    static DecisionTree fit(const std::vector<float>& xs, std::size_t n, std::size_t d,
                            const std::vector<Direction>& ys,
                            const std::vector<std::size_t>& rows, std::size_t max_features,
                            std::size_t min_samples_split, Rng& feature_rng);

    static DecisionTree from_nodes(std::vector<TreeNode> nodes, std::size_t d);

    Direction predict(const float* x) const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t n_features() const { return d_; }

private:
    struct Builder;
    std::vector<TreeNode> nodes_;
    std::size_t d_ = 0;
};

struct ForestParams {
    std::size_t n_trees = 100;
    bool bootstrap = true;
    // 0 selects the default floor(sqrt(d)), at least 1; any other value is
    // clamped to d. The reduction-to-one-tree case passes d explicitly.
    std::size_t max_features = 0;
    std::size_t min_samples_split = 2;
};

class RandomForest {
public:
    struct TreeRecord {
        DecisionTree tree;
        std::uint64_t bootstrap_seed = 0;
        std::uint64_t feature_seed = 0;
    };

    struct Vote {
        Direction label = Direction::Down;
        double vote_fraction = 0.0;  // share of trees voting for `label`
    };

    RandomForest() = default;

    /// Requires n >= 2. A single-class input is allowed but flagged; its
    /// trees are all single leaves.
    static RandomForest fit(const std::vector<float>& xs, std::size_t n, std::size_t d,
                            const std::vector<Direction>& ys, const ForestParams& params,
                            std::uint64_t seed);

    static RandomForest from_parts(std::vector<TreeRecord> trees, std::size_t d,
                                   bool single_class);

    /// Majority vote over trees; ties go Down.
    Vote predict(const float* x) const;

    const std::vector<TreeRecord>& trees() const { return trees_; }
    std::size_t n_features() const { return d_; }
    bool single_class() const { return single_class_; }

private:
    std::vector<TreeRecord> trees_;
    std::size_t d_ = 0;
    bool single_class_ = false;
};

} // namespace candlecast::ml
