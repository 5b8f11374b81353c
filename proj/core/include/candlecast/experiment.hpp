#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "candlecast/chart.hpp"
#include "candlecast/forest.hpp"
#include "candlecast/market_data.hpp"
#include "candlecast/metrics.hpp"
#include "candlecast/model_io.hpp"
#include "candlecast/train.hpp"
#include "candlecast/windowing.hpp"

namespace candlecast::harness {

enum class Classifier { Cnn, Forest, Knn };

std::string to_string(Classifier c);
std::optional<Classifier> parse_classifier(std::string_view text);

struct GridCell {
    Classifier classifier = Classifier::Cnn;
    int period = 20;
    int dimension = 50;
    bool volume = false;

    friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// e.g. "cnn_p20_d50_vol", also the checkpoint basename.
std::string cell_name(const GridCell& cell);

struct ExperimentConfig {
    std::filesystem::path data_dir;
    std::filesystem::path out_dir;
    std::vector<std::string> tickers;  // empty = every *.csv under data_dir
    market::SplitSpec split = market::default_split_spec();

    std::vector<Classifier> classifiers = {Classifier::Cnn, Classifier::Forest,
                                           Classifier::Knn};
    std::vector<int> periods = {5, 10, 20};
    std::vector<int> dimensions = {20, 50};
    std::vector<int> volume_options = {0, 1};

    nn::TrainConfig train;
    std::size_t forest_trees = 100;
    std::size_t knn_k = 5;
    std::uint64_t master_seed = 0;

    /// Grid values restricted to classifier {cnn,rf,knn}, period {5,10,20},
    /// dimension {20,50}, volume {0,1}; all axes non-empty; throws
    /// ConfigError otherwise.
    void validate() const;
    std::vector<GridCell> expand_grid() const;
};

enum class ErrorKind { None, Config, Data, Runtime };

struct CellResult {
    GridCell cell;
    bool ok = false;
    std::string error;  // set when !ok
    ErrorKind error_kind = ErrorKind::None;
    ConfusionMatrix cm;
    MetricSet metrics;
    std::size_t train_samples = 0;
    std::size_t eval_samples = 0;
    double wall_seconds = 0.0;
    std::filesystem::path checkpoint;
};

struct RunReport {
    std::vector<CellResult> rows;
};

/// Runs every grid cell: split each ticker, render windows, fit the cell's
/// classifier on the train range, evaluate on the test range, checkpoint the
/// model under out_dir, and write report.csv/report.txt there. A failing
/// cell becomes an error row; the grid keeps going. Fully deterministic for
/// a fixed config + master seed (cell seeds derive from the cell's own
/// coordinates, not its grid position).
RunReport run_experiment(const ExperimentConfig& config);

void write_report_csv(const RunReport& report, std::ostream& out);
void write_report_table(const RunReport& report, std::ostream& out);
std::string report_csv_header();

/// A checkpointed classifier restored for inference, with the cell's
/// geometry verified against the stored model.
class LoadedModel {
public:
    static LoadedModel load(const std::filesystem::path& checkpoint, const GridCell& cell);

    struct Output {
        Direction label = Direction::Down;
        double probability = 0.0;  // confidence in `label`
    };
    Output run(const nn::Tensor& image) const;

    const GridCell& cell() const { return cell_; }

private:
    GridCell cell_;
    std::optional<nn::Network> cnn_;
    std::optional<ml::RandomForest> forest_;
    std::optional<ml::KnnModel> knn_;
};

/// Evaluation-only run of a saved checkpoint over the independent date range
/// of `ticker_file`. The checkpoint must match the cell (network shapes and
/// model geometry are verified).
CellResult independent_test(const std::filesystem::path& checkpoint,
                            const std::filesystem::path& ticker_file,
                            const ExperimentConfig& config, const GridCell& cell);

struct PredictionOutcome {
    Direction label = Direction::Down;
    double probability = 0.0;  // confidence in the returned label
    Date window_end;
    std::filesystem::path chart_path;
};

/// Predicts the direction for `target`: takes the last `period` bars
/// strictly before the target date, renders them, runs the checkpointed
/// model, and writes the rendered chart into out_dir.
PredictionOutcome predict_date(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& ticker_file, Date target,
                               const GridCell& cell, const std::filesystem::path& out_dir);

// shared pipeline pieces, also used by the server and tests

struct RenderedSample {
    nn::Tensor image;
    Direction label = Direction::Down;
    Date label_date;
    Date window_end;
};

windows::DatasetSpec dataset_spec_for(const GridCell& cell);

/// Sliding windows over `series`, each rendered to a [0,1] pixel tensor.
std::vector<RenderedSample> render_samples(const market::Series& series,
                                           const windows::DatasetSpec& spec);

/// The last `period` bars strictly before `target`, or nullopt when the
/// series has fewer than `period` bars before it.
std::optional<std::vector<market::Bar>> window_before(const market::Series& series,
                                                      Date target, int period);

std::uint64_t cell_seed(std::uint64_t master_seed, const GridCell& cell);

} // namespace candlecast::harness
