#include "candlecast/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "candlecast/checkpoint.hpp"
#include "candlecast/png.hpp"

namespace candlecast::harness {

namespace {

constexpr std::uint64_t kInitStream = 0x171;
constexpr std::uint64_t kTrainStream = 0x7121;
constexpr std::uint64_t kForestStream = 0xF0;

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::vector<float> flatten_features(const std::vector<RenderedSample>& samples) {
    if (samples.empty()) return {};
    const std::size_t d = samples.front().image.size();
    std::vector<float> xs;
    xs.reserve(samples.size() * d);
    for (const auto& s : samples)
        xs.insert(xs.end(), s.image.values().begin(), s.image.values().end());
    return xs;
}

std::vector<Direction> sample_labels(const std::vector<RenderedSample>& samples) {
    std::vector<Direction> ys;
    ys.reserve(samples.size());
    for (const auto& s : samples) ys.push_back(s.label);
    return ys;
}

std::vector<std::string> resolve_tickers(const ExperimentConfig& config) {
    if (!config.tickers.empty()) return config.tickers;
    if (!std::filesystem::is_directory(config.data_dir))
        throw DataError("data directory " + config.data_dir.string() + " does not exist");
    std::vector<std::string> tickers;
    for (const auto& entry : std::filesystem::directory_iterator(config.data_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            tickers.push_back(entry.path().stem().string());
    std::sort(tickers.begin(), tickers.end());
    if (tickers.empty())
        throw DataError("no .csv ticker files under " + config.data_dir.string());
    return tickers;
}

} // namespace

std::string to_string(Classifier c) {
    switch (c) {
        case Classifier::Cnn: return "cnn";
        case Classifier::Forest: return "rf";
        case Classifier::Knn: return "knn";
    }
    throw ContractError("unknown classifier");
}

std::optional<Classifier> parse_classifier(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (lower == "cnn") return Classifier::Cnn;
    if (lower == "rf" || lower == "forest") return Classifier::Forest;
    if (lower == "knn") return Classifier::Knn;
    return std::nullopt;
}

std::string cell_name(const GridCell& cell) {
    return to_string(cell.classifier) + "_p" + std::to_string(cell.period) + "_d" +
           std::to_string(cell.dimension) + (cell.volume ? "_vol" : "_novol");
}

void ExperimentConfig::validate() const {
    if (classifiers.empty() || periods.empty() || dimensions.empty() || volume_options.empty())
        throw ConfigError("experiment grid has an empty axis");
    for (int p : periods)
        if (p != 5 && p != 10 && p != 20)
            throw ConfigError("period must be one of 5, 10, 20; got " + std::to_string(p));
    for (int d : dimensions)
        if (d != 20 && d != 50)
            throw ConfigError("dimension must be 20 or 50; got " + std::to_string(d));
    for (int v : volume_options)
        if (v != 0 && v != 1)
            throw ConfigError("volume flag must be 0 or 1; got " + std::to_string(v));
    if (data_dir.empty()) throw ConfigError("data directory not set");
    if (out_dir.empty()) throw ConfigError("output directory not set");
    if (forest_trees < 1) throw ConfigError("forest_trees must be >= 1");
    if (knn_k < 1) throw ConfigError("knn_k must be >= 1");
    split.validate();
    train.validate();
}

std::vector<GridCell> ExperimentConfig::expand_grid() const {
    std::vector<GridCell> cells;
    for (Classifier c : classifiers)
        for (int p : periods)
            for (int d : dimensions)
                for (int v : volume_options)
                    cells.push_back(GridCell{c, p, d, v != 0});
    return cells;
}

std::uint64_t cell_seed(std::uint64_t master_seed, const GridCell& cell) {
    return mix_seed(master_seed, std::uint64_t(cell.classifier), std::uint64_t(cell.period),
                    std::uint64_t(cell.dimension), cell.volume ? 1u : 0u);
}

windows::DatasetSpec dataset_spec_for(const GridCell& cell) {
    windows::DatasetSpec spec;
    spec.period = cell.period;
    spec.dimension = cell.dimension;
    spec.volume_panel = cell.volume;
    spec.horizon = 1;
    spec.validate();
    return spec;
}

std::vector<RenderedSample> render_samples(const market::Series& series,
                                           const windows::DatasetSpec& spec) {
    std::vector<RenderedSample> out;
    const windows::WindowingResult result = windows::sliding_windows(series, spec);
    out.reserve(result.samples.size());
    for (const auto& sample : result.samples) {
        RenderedSample rs;
        rs.image = chart::to_tensor(chart::render_window(sample.window, spec));
        rs.label = sample.label;
        rs.label_date = sample.label_date;
        rs.window_end = sample.window_end();
        out.push_back(std::move(rs));
    }
    return out;
}

namespace {

struct CellDataset {
    std::vector<RenderedSample> train;
    std::vector<RenderedSample> eval;
};

CellDataset build_cell_dataset(const std::vector<market::Series>& tickers,
                               const market::SplitSpec& split_spec,
                               const windows::DatasetSpec& spec) {
    CellDataset ds;
    for (const market::Series& series : tickers) {
        const market::SplitResult parts = market::split(series, split_spec);
        for (auto& s : render_samples(parts.train, spec)) ds.train.push_back(std::move(s));
        for (auto& s : render_samples(parts.test, spec)) ds.eval.push_back(std::move(s));
    }
    return ds;
}

CellResult evaluate_cell(const GridCell& cell, const CellDataset& ds,
                         const ExperimentConfig& config) {
    CellResult row;
    row.cell = cell;
    row.train_samples = ds.train.size();
    row.eval_samples = ds.eval.size();

    if (ds.train.empty()) throw DataError("empty training split");
    if (ds.eval.empty()) throw DataError("empty test split");

    // leakage audit: no training label may come from after train_end
    for (const auto& s : ds.train)
        if (config.split.train_end < s.label_date)
            throw DataError("leakage: training label date " + s.label_date.to_string() +
                            " is past train_end " + config.split.train_end.to_string());

    const std::uint64_t seed = cell_seed(config.master_seed, cell);
    const std::filesystem::path checkpoint = config.out_dir / (cell_name(cell) + ".ckpt");
    std::vector<Direction> predictions;
    predictions.reserve(ds.eval.size());

    if (cell.classifier == Classifier::Cnn) {
        nn::Network net(nn::make_stacked_spec(std::size_t(cell.dimension)),
                        mix_seed(seed, kInitStream));
        std::vector<nn::TrainSample> train_set;
        train_set.reserve(ds.train.size());
        for (const auto& s : ds.train) train_set.push_back({s.image, s.label});
        nn::TrainConfig tc = config.train;
        tc.seed = mix_seed(seed, kTrainStream);
        nn::train(net, train_set, tc);
        nn::save_weights(net, checkpoint);
        for (const auto& s : ds.eval) predictions.push_back(net.predict(s.image).label);
    } else {
        const std::size_t d = ds.train.front().image.size();
        const std::vector<float> xs = flatten_features(ds.train);
        const std::vector<Direction> ys = sample_labels(ds.train);

        if (cell.classifier == Classifier::Forest) {
            ml::ForestParams params;
            params.n_trees = config.forest_trees;
            const ml::RandomForest forest = ml::RandomForest::fit(
                xs, ds.train.size(), d, ys, params, mix_seed(seed, kForestStream));
            ml::save_forest(forest, checkpoint);
            for (const auto& s : ds.eval)
                predictions.push_back(forest.predict(s.image.data()).label);
        } else {
            if (config.knn_k > ds.train.size())
                throw DataError("knn needs at least k=" + std::to_string(config.knn_k) +
                                " training samples, have " + std::to_string(ds.train.size()));
            ml::KnnModel model;
            model.tree = ml::KdTree::build(xs, d);
            model.labels = ys;
            model.k = config.knn_k;
            ml::save_knn(model, checkpoint);
            for (const auto& s : ds.eval)
                predictions.push_back(ml::knn_predict(model, s.image.data()));
        }
    }

    row.cm = confusion(sample_labels(ds.eval), predictions);
    row.metrics = compute_metrics(row.cm);
    row.checkpoint = checkpoint;
    row.ok = true;
    return row;
}

} // namespace

RunReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);

    // Data problems become per-cell error rows rather than aborting the grid.
    std::vector<market::Series> tickers;
    std::string data_error;
    try {
        for (const std::string& ticker : resolve_tickers(config)) {
            std::filesystem::path file = config.data_dir / (ticker + ".csv");
            tickers.push_back(market::load_series(file).series);
        }
    } catch (const std::exception& e) {
        data_error = e.what();
    }

    RunReport report;
    for (const GridCell& cell : config.expand_grid()) {
        const auto start = std::chrono::steady_clock::now();
        CellResult row;
        row.cell = cell;
        if (!data_error.empty()) {
            row.error = data_error;
            row.error_kind = ErrorKind::Data;
        } else {
            try {
                const CellDataset ds =
                    build_cell_dataset(tickers, config.split, dataset_spec_for(cell));
                row = evaluate_cell(cell, ds, config);
            } catch (const ConfigError& e) {
                row = CellResult{};
                row.cell = cell;
                row.error = e.what();
                row.error_kind = ErrorKind::Config;
            } catch (const DataError& e) {
                row = CellResult{};
                row.cell = cell;
                row.error = e.what();
                row.error_kind = ErrorKind::Data;
            } catch (const std::exception& e) {
                row = CellResult{};
                row.cell = cell;
                row.error = e.what();
                row.error_kind = ErrorKind::Runtime;
            }
        }
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.rows.push_back(std::move(row));
    }

    std::ofstream csv(config.out_dir / "report.csv");
    write_report_csv(report, csv);
    std::ofstream table(config.out_dir / "report.txt");
    write_report_table(report, table);
    if (!csv.flush() || !table.flush())
        throw IoError("failed writing reports under " + config.out_dir.string());
    return report;
}

std::string report_csv_header() {
    return "classifier,period,dimension,volume,status,tp,fp,tn,fn,sensitivity,specificity,"
           "accuracy,mcc,f_measure,train_samples,eval_samples,wall_seconds,checkpoint,error";
}

void write_report_csv(const RunReport& report, std::ostream& out) {
    out << report_csv_header() << '\n';
    for (const CellResult& row : report.rows) {
        out << to_string(row.cell.classifier) << ',' << row.cell.period << ','
            << row.cell.dimension << ',' << (row.cell.volume ? 1 : 0) << ','
            << (row.ok ? "ok" : "error") << ',' << row.cm.tp << ',' << row.cm.fp << ','
            << row.cm.tn << ',' << row.cm.fn << ',' << format_double(row.metrics.sensitivity)
            << ',' << format_double(row.metrics.specificity) << ','
            << format_double(row.metrics.accuracy) << ',' << format_double(row.metrics.mcc)
            << ',' << format_double(row.metrics.f_measure) << ',' << row.train_samples << ','
            << row.eval_samples << ',' << format_fixed(row.wall_seconds, 3) << ','
            << csv_escape(row.checkpoint.string()) << ',' << csv_escape(row.error) << '\n';
    }
}

void write_report_table(const RunReport& report, std::ostream& out) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %6s %5s %7s %7s %7s %7s %8s %7s\n", "classifier",
                  "period", "dim", "volume", "sens%", "spec%", "acc%", "mcc", "f");
    out << line;
    for (const CellResult& row : report.rows) {
        if (!row.ok) {
            std::snprintf(line, sizeof line, "%-10s %6d %5d %7s error: ",
                          to_string(row.cell.classifier).c_str(), row.cell.period,
                          row.cell.dimension, row.cell.volume ? "yes" : "no");
            out << line << row.error << '\n';
            continue;
        }
        std::snprintf(line, sizeof line, "%-10s %6d %5d %7s %7.1f %7.1f %7.1f %8.3f %7.3f\n",
                      to_string(row.cell.classifier).c_str(), row.cell.period,
                      row.cell.dimension, row.cell.volume ? "yes" : "no",
                      100.0 * row.metrics.sensitivity, 100.0 * row.metrics.specificity,
                      100.0 * row.metrics.accuracy, row.metrics.mcc, row.metrics.f_measure);
        out << line;
    }
}

LoadedModel LoadedModel::load(const std::filesystem::path& checkpoint, const GridCell& cell) {
    LoadedModel model;
    model.cell_ = cell;
    const std::size_t expected_d =
        std::size_t(cell.dimension) * std::size_t(cell.dimension) * 3;

    if (cell.classifier == Classifier::Cnn) {
        nn::Network net(nn::make_stacked_spec(std::size_t(cell.dimension)), 0);
        nn::load_weights(net, checkpoint);
        model.cnn_.emplace(std::move(net));
        return model;
    }
    if (cell.classifier == Classifier::Forest) {
        ml::RandomForest forest = ml::load_forest(checkpoint);
        if (forest.n_features() != expected_d)
            throw IoError("checkpoint expects " + std::to_string(forest.n_features()) +
                          " features, cell dimension " + std::to_string(cell.dimension) +
                          " implies " + std::to_string(expected_d));
        model.forest_ = std::move(forest);
        return model;
    }
    ml::KnnModel knn = ml::load_knn(checkpoint);
    if (knn.tree.dim() != expected_d)
        throw IoError("checkpoint expects " + std::to_string(knn.tree.dim()) +
                      " features, cell dimension " + std::to_string(cell.dimension) +
                      " implies " + std::to_string(expected_d));
    model.knn_ = std::move(knn);
    return model;
}

LoadedModel::Output LoadedModel::run(const nn::Tensor& image) const {
    Output out;
    if (cnn_) {
        const auto p = cnn_->predict(image);
        out.label = p.label;
        out.probability = double(p.label == Direction::Up ? p.prob_up : p.prob_down);
        return out;
    }
    if (forest_) {
        const auto vote = forest_->predict(image.data());
        out.label = vote.label;
        out.probability = vote.vote_fraction;
        return out;
    }
    const auto result = ml::knn_classify(knn_->tree, knn_->labels, image.data(), knn_->k);
    std::size_t votes = 0;
    for (const auto& nb : result.neighbors)
        if (knn_->labels[nb.index] == result.label) ++votes;
    out.label = result.label;
    out.probability = double(votes) / double(result.neighbors.size());
    return out;
}

CellResult independent_test(const std::filesystem::path& checkpoint,
                            const std::filesystem::path& ticker_file,
                            const ExperimentConfig& config, const GridCell& cell) {
    const windows::DatasetSpec spec = dataset_spec_for(cell);
    const market::Series series = market::load_series(ticker_file).series;
    const market::SplitResult parts = market::split(series, config.split);
    const std::vector<RenderedSample> samples = render_samples(parts.independent, spec);
    if (samples.empty())
        throw DataError("empty evaluation: independent range of " + ticker_file.string() +
                        " holds " + std::to_string(parts.independent.bars.size()) +
                        " bars, need at least " +
                        std::to_string(spec.period + spec.horizon));

    const LoadedModel model = LoadedModel::load(checkpoint, cell);
    std::vector<Direction> predictions;
    predictions.reserve(samples.size());
    for (const auto& s : samples) predictions.push_back(model.run(s.image).label);

    CellResult row;
    row.cell = cell;
    row.ok = true;
    row.cm = confusion(sample_labels(samples), predictions);
    row.metrics = compute_metrics(row.cm);
    row.eval_samples = samples.size();
    row.checkpoint = checkpoint;
    return row;
}

std::optional<std::vector<market::Bar>> window_before(const market::Series& series,
                                                      Date target, int period) {
    std::size_t before = 0;
    while (before < series.bars.size() && series.bars[before].date < target) ++before;
    if (before < std::size_t(period)) return std::nullopt;
    return std::vector<market::Bar>(
        series.bars.begin() + std::ptrdiff_t(before - std::size_t(period)),
        series.bars.begin() + std::ptrdiff_t(before));
}

PredictionOutcome predict_date(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& ticker_file, Date target,
                               const GridCell& cell, const std::filesystem::path& out_dir) {
    const windows::DatasetSpec spec = dataset_spec_for(cell);
    const market::Series series = market::load_series(ticker_file).series;

    const auto maybe_window = window_before(series, target, spec.period);
    if (!maybe_window) {
        std::size_t have = 0;
        for (const auto& bar : series.bars)
            if (bar.date < target) ++have;
        throw DataError("insufficient history: need " + std::to_string(spec.period) +
                        " trading days before " + target.to_string() + ", have " +
                        std::to_string(have));
    }
    const std::vector<market::Bar>& window = *maybe_window;
    const chart::ChartImage image = chart::render_window(window, spec);
    const nn::Tensor tensor = chart::to_tensor(image);

    const LoadedModel model = LoadedModel::load(checkpoint, cell);
    const LoadedModel::Output out = model.run(tensor);

    PredictionOutcome outcome;
    outcome.label = out.label;
    outcome.probability = out.probability;
    outcome.window_end = window.back().date;

    std::filesystem::create_directories(out_dir);
    outcome.chart_path = out_dir / chart::chart_filename(series.ticker, window.back().date, spec);
    chart::write_png(outcome.chart_path, image);
    return outcome;
}

} // namespace candlecast::harness
