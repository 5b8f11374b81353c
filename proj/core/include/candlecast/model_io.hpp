#pragma once

#include <filesystem>
#include <iosfwd>

#include "candlecast/forest.hpp"
#include "candlecast/kdtree.hpp"

namespace candlecast::ml {

/// kNN classifier state: the search tree, per-point labels, and k.
struct KnnModel {
    KdTree tree;
    std::vector<Direction> labels;
    std::size_t k = 5;
};

Direction knn_predict(const KnnModel& model, const float* query);

// Both model kinds share the CFM1 container: magic, a kind string, then
// self-describing node records (little endian throughout).
enum class ModelKind { Forest, Knn };

void write_forest(const RandomForest& forest, std::ostream& out);
RandomForest read_forest(std::istream& in);
void save_forest(const RandomForest& forest, const std::filesystem::path& path);
RandomForest load_forest(const std::filesystem::path& path);

void write_knn(const KnnModel& model, std::ostream& out);
KnnModel read_knn(std::istream& in);
void save_knn(const KnnModel& model, const std::filesystem::path& path);
KnnModel load_knn(const std::filesystem::path& path);

/// Reads just the container header to identify the stored model kind.
ModelKind peek_model_kind(const std::filesystem::path& path);

} // namespace candlecast::ml
