#include "candlecast/model_io.hpp"

#include <cstring>
#include <fstream>

#include "binary_io.hpp"

namespace candlecast::ml {

namespace {

constexpr char kMagic[4] = {'C', 'F', 'M', '1'};
constexpr const char* kForestKind = "random_forest";
constexpr const char* kKnnKind = "knn_kdtree";

void write_header(std::ostream& out, const char* kind) {
    out.write(kMagic, 4);
    const std::size_t len = std::strlen(kind);
    io::put_u64(out, len);
    out.write(kind, std::streamsize(len));
}

std::string read_header(std::istream& in) {
    char got[4];
    if (!in.read(got, 4) || std::memcmp(got, kMagic, 4) != 0)
        throw IoError("bad magic: not a model stream");
    const std::uint64_t len = io::get_u64(in, "model kind length");
    if (len == 0 || len > 64) throw IoError("implausible model kind length");
    return io::get_string(in, len, "model kind");
}

std::uint64_t checked_index(std::istream& in, std::uint64_t limit, const std::string& what) {
    const std::uint64_t v = io::get_u64(in, what);
    if (v >= limit) throw IoError(what + " out of range");
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

} // namespace

Direction knn_predict(const KnnModel& model, const float* query) {
    return knn_classify(model.tree, model.labels, query, model.k).label;
}

void write_forest(const RandomForest& forest, std::ostream& out) {
    write_header(out, kForestKind);
    io::put_u64(out, forest.n_features());
    io::put_u64(out, forest.single_class() ? 1 : 0);
    io::put_u64(out, forest.trees().size());
    for (const auto& record : forest.trees()) {
        io::put_u64(out, record.bootstrap_seed);
        io::put_u64(out, record.feature_seed);
        const auto& nodes = record.tree.nodes();
        io::put_u64(out, nodes.size());
        for (const TreeNode& node : nodes) {
            io::put_u64(out, node.leaf ? 0 : 1);
            if (node.leaf) {
                io::put_u64(out, node.up);
                io::put_u64(out, node.down);
            } else {
                io::put_u64(out, node.feature);
                io::put_f32(out, node.threshold);
                io::put_u64(out, node.left);
                io::put_u64(out, node.right);
            }
        }
    }
    if (!out) throw IoError("forest write failed");
}

RandomForest read_forest(std::istream& in) {
    if (read_header(in) != kForestKind) throw IoError("model stream is not a forest");
    const std::uint64_t d = io::get_u64(in, "forest feature count");
    if (d == 0) throw IoError("forest feature count must be > 0");
    const bool single_class = io::get_u64(in, "forest class flag") != 0;
    const std::uint64_t n_trees = io::get_u64(in, "forest tree count");
    if (n_trees == 0 || n_trees > 1'000'000) throw IoError("implausible forest tree count");

    std::vector<RandomForest::TreeRecord> trees;
    trees.reserve(n_trees);
    for (std::uint64_t t = 0; t < n_trees; ++t) {
        RandomForest::TreeRecord record;
        record.bootstrap_seed = io::get_u64(in, "tree bootstrap seed");
        record.feature_seed = io::get_u64(in, "tree feature seed");
        const std::uint64_t n_nodes = io::get_u64(in, "tree node count");
        if (n_nodes == 0 || n_nodes > 100'000'000) throw IoError("implausible tree node count");
        std::vector<TreeNode> nodes(n_nodes);
        for (TreeNode& node : nodes) {
            const std::uint64_t kind = io::get_u64(in, "tree node kind");
            if (kind > 1) throw IoError("unknown tree node kind");
            node.leaf = kind == 0;
            if (node.leaf) {
                node.up = io::get_u64(in, "leaf up count");
                node.down = io::get_u64(in, "leaf down count");
            } else {
                node.feature = checked_index(in, d, "split feature");
                node.threshold = io::get_f32(in, "split threshold");
                node.left = checked_index(in, n_nodes, "split left child");
                node.right = checked_index(in, n_nodes, "split right child");
            }
        }
        record.tree = DecisionTree::from_nodes(std::move(nodes), d);
        trees.push_back(std::move(record));
    }
    return RandomForest::from_parts(std::move(trees), d, single_class);
}

void write_knn(const KnnModel& model, std::ostream& out) {
    if (model.labels.size() != model.tree.size())
        throw ContractError("knn model: label count does not match tree");
    write_header(out, kKnnKind);
    const KdTree& tree = model.tree;
    io::put_u64(out, tree.size());
    io::put_u64(out, tree.dim());
    io::put_u64(out, model.k);
    io::put_u64(out, tree.leaf_size());
    for (Direction label : model.labels)
        out.put(label == Direction::Up ? char(1) : char(0));
    for (float v : tree.points()) io::put_f32(out, v);
    io::put_u64(out, tree.nodes().size());
    for (const KdTree::Node& node : tree.nodes()) {
        io::put_u64(out, node.leaf ? 0 : 1);
        if (node.leaf) {
            io::put_u64(out, node.begin);
            io::put_u64(out, node.end);
        } else {
            io::put_u64(out, node.axis);
            io::put_f32(out, node.threshold);
            io::put_u64(out, node.left);
            io::put_u64(out, node.right);
        }
    }
    for (std::size_t idx : tree.order()) io::put_u64(out, idx);
    if (!out) throw IoError("knn model write failed");
}

KnnModel read_knn(std::istream& in) {
    if (read_header(in) != kKnnKind) throw IoError("model stream is not a knn model");
    const std::uint64_t n = io::get_u64(in, "knn point count");
    const std::uint64_t d = io::get_u64(in, "knn dimension");
    const std::uint64_t k = io::get_u64(in, "knn k");
    const std::uint64_t leaf_size = io::get_u64(in, "knn leaf size");
    if (n == 0 || d == 0 || leaf_size == 0) throw IoError("knn model: empty geometry");
    if (k == 0 || k > n) throw IoError("knn model: k out of range");
    if (n > 100'000'000 || d > 10'000'000 || n * d > 500'000'000)
        throw IoError("implausible knn model size");

    KnnModel model;
    model.k = k;
    model.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) throw IoError("truncated knn labels");
        if (c != 0 && c != 1) throw IoError("bad knn label byte");
        model.labels[i] = c ? Direction::Up : Direction::Down;
    }
    std::vector<float> points(n * d);
    for (auto& v : points) v = io::get_f32(in, "knn points");

    const std::uint64_t n_nodes = io::get_u64(in, "knn node count");
    if (n_nodes == 0 || n_nodes > 2 * n) throw IoError("implausible knn node count");
    std::vector<KdTree::Node> nodes(n_nodes);
    for (KdTree::Node& node : nodes) {
        const std::uint64_t kind = io::get_u64(in, "knn node kind");
        if (kind > 1) throw IoError("unknown knn node kind");
        node.leaf = kind == 0;
        if (node.leaf) {
            node.begin = io::get_u64(in, "knn leaf begin");
            node.end = io::get_u64(in, "knn leaf end");
        } else {
            node.axis = checked_index(in, d, "knn split axis");
            node.threshold = io::get_f32(in, "knn split threshold");
            node.left = checked_index(in, n_nodes, "knn left child");
            node.right = checked_index(in, n_nodes, "knn right child");
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = checked_index(in, n, "knn order");

    model.tree = KdTree::from_parts(std::move(points), d, std::move(nodes), std::move(order),
                                    leaf_size);
    return model;
}

void save_forest(const RandomForest& forest, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_forest(forest, out);
    if (!out.flush()) throw IoError("failed writing " + path.string());
}

RandomForest load_forest(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_forest(in);
}

void save_knn(const KnnModel& model, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_knn(model, out);
    if (!out.flush()) throw IoError("failed writing " + path.string());
}

KnnModel load_knn(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_knn(in);
}

ModelKind peek_model_kind(const std::filesystem::path& path) {
    auto in = open_in(path);
    const std::string kind = read_header(in);
    if (kind == kForestKind) return ModelKind::Forest;
    if (kind == kKnnKind) return ModelKind::Knn;
    throw IoError("unknown model kind '" + kind + "'");
}

} // namespace candlecast::ml
