#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "candlecast/config.hpp"
#include "candlecast/experiment.hpp"
#include "candlecast/png.hpp"
#include "candlecast/server.hpp"

namespace {

using namespace candlecast;

struct Opts {
    std::string config_file;
    std::string data_dir;
    std::string out_dir = "out";
    std::string ticker;
    std::string ticker_file;
    std::string checkpoint;
    std::string classifier = "cnn";
    int period = 20;
    int dim = 50;
    int volume = 0;
    std::uint64_t seed = 0;
    long long epochs = -1;
    double lr = -1.0;
    long long batch = -1;
    int port = 8080;
    std::string date;
    long long limit = 0;
};

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 1;
    if (dynamic_cast<const DataError*>(&e)) return 2;
    return 3;
}

int exit_code_for(harness::ErrorKind kind) {
    switch (kind) {
        case harness::ErrorKind::Config: return 1;
        case harness::ErrorKind::Data: return 2;
        default: return 3;
    }
}

std::vector<std::filesystem::path> list_csvs(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw DataError("data directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .csv ticker files under " + dir.string());
    return files;
}

bool passed(const CLI::App* sub, const std::string& name) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

std::map<std::string, std::string> base_kv(const Opts& o, const CLI::App* sub) {
    std::map<std::string, std::string> kv;
    if (!o.config_file.empty()) kv = harness::load_config_file(o.config_file);
    if (passed(sub, "--data-dir")) kv["data_dir"] = o.data_dir;
    if (passed(sub, "--out-dir") || !kv.count("out_dir")) kv["out_dir"] = o.out_dir;
    if (passed(sub, "--seed")) kv["seed"] = std::to_string(o.seed);
    if (passed(sub, "--epochs")) kv["epochs"] = std::to_string(o.epochs);
    if (passed(sub, "--batch")) kv["batch"] = std::to_string(o.batch);
    if (passed(sub, "--lr")) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, o.lr);
        kv["learning_rate"] = std::string(buf, res.ptr);
    }
    if (passed(sub, "--ticker")) kv["tickers"] = o.ticker;
    return kv;
}

harness::GridCell cell_of(const Opts& o) {
    const auto classifier = harness::parse_classifier(o.classifier);
    if (!classifier)
        throw ConfigError("unknown classifier '" + o.classifier + "', expected cnn, rf or knn");
    return harness::GridCell{*classifier, o.period, o.dim, o.volume != 0};
}

void restrict_to_cell(std::map<std::string, std::string>& kv, const Opts& o) {
    kv["classifiers"] = o.classifier;
    kv["periods"] = std::to_string(o.period);
    kv["dimensions"] = std::to_string(o.dim);
    kv["volume"] = std::to_string(o.volume);
}

void print_rows(const harness::RunReport& report) {
    harness::write_report_table(report, std::cout);
}

int finish_rows(const harness::RunReport& report) {
    bool any_ok = false;
    for (const auto& row : report.rows) any_ok = any_ok || row.ok;
    if (any_ok) return 0;
    for (const auto& row : report.rows)
        std::cerr << "cell " << harness::cell_name(row.cell) << ": " << row.error << "\n";
    return report.rows.empty() ? 1 : exit_code_for(report.rows.front().error_kind);
}

int cmd_ingest(const Opts& o, const CLI::App* sub) {
    const bool write_out = passed(sub, "--out-dir");
    if (write_out) std::filesystem::create_directories(o.out_dir);
    for (const auto& file : list_csvs(o.data_dir)) {
        if (!o.ticker.empty() && file.stem() != o.ticker) continue;
        const market::ParseResult parsed = market::load_series(file);
        const market::Series& s = parsed.series;
        std::printf("%-12s bars=%-6zu skipped=%-4zu %s..%s\n", s.ticker.c_str(), s.size(),
                    parsed.skipped_rows, s.bars.front().date.to_string().c_str(),
                    s.bars.back().date.to_string().c_str());
        if (write_out) {
            std::ofstream out(std::filesystem::path(o.out_dir) / (s.ticker + ".csv"));
            market::serialize_csv(s, out);
            if (!out.flush()) throw IoError("failed writing normalized csv for " + s.ticker);
        }
    }
    return 0;
}

int cmd_render(const Opts& o) {
    windows::DatasetSpec spec;
    spec.period = o.period;
    spec.dimension = o.dim;
    spec.volume_panel = o.volume != 0;
    spec.validate();

    std::filesystem::create_directories(o.out_dir);
    std::size_t total = 0;
    for (const auto& file : list_csvs(o.data_dir)) {
        if (!o.ticker.empty() && file.stem() != o.ticker) continue;
        const market::Series series = market::load_series(file).series;
        const auto result = windows::sliding_windows(series, spec);
        std::size_t written = 0;
        for (const auto& sample : result.samples) {
            if (o.limit > 0 && written >= std::size_t(o.limit)) break;
            const auto image = chart::render_window(sample.window, spec);
            chart::write_png(std::filesystem::path(o.out_dir) /
                                 chart::chart_filename(series.ticker, sample.window_end(), spec),
                             image);
            ++written;
        }
        std::ofstream manifest(std::filesystem::path(o.out_dir) /
                               (series.ticker + "_manifest.csv"));
        windows::write_manifest(result.samples, series.ticker, manifest);
        std::printf("%-12s windows=%-6zu rendered=%zu\n", series.ticker.c_str(),
                    result.samples.size(), written);
        total += written;
    }
    std::printf("wrote %zu charts to %s\n", total, o.out_dir.c_str());
    return 0;
}

int cmd_train(const Opts& o, const CLI::App* sub) {
    auto kv = base_kv(o, sub);
    restrict_to_cell(kv, o);
    const harness::ExperimentConfig config = harness::config_from_map(kv);
    const harness::RunReport report = harness::run_experiment(config);
    print_rows(report);
    return finish_rows(report);
}

int cmd_grid(const Opts& o, const CLI::App* sub) {
    auto kv = base_kv(o, sub);
    if (passed(sub, "--classifier")) kv["classifiers"] = o.classifier;
    if (passed(sub, "--period")) kv["periods"] = std::to_string(o.period);
    if (passed(sub, "--dim")) kv["dimensions"] = std::to_string(o.dim);
    if (passed(sub, "--volume")) kv["volume"] = std::to_string(o.volume);
    const harness::ExperimentConfig config = harness::config_from_map(kv);
    const harness::RunReport report = harness::run_experiment(config);
    print_rows(report);
    std::printf("report written to %s\n", (config.out_dir / "report.csv").string().c_str());
    return finish_rows(report);
}

int cmd_eval_range(const Opts& o, const CLI::App* sub, bool use_test_range) {
    auto kv = base_kv(o, sub);
    harness::ExperimentConfig config = harness::config_from_map(kv);
    if (use_test_range) {
        config.split.indep_start = config.split.test_start;
        config.split.indep_end = config.split.test_end;
    }
    const harness::CellResult row =
        harness::independent_test(o.checkpoint, o.ticker_file, config, cell_of(o));
    harness::RunReport report;
    report.rows.push_back(row);
    print_rows(report);
    return finish_rows(report);
}

int cmd_predict(const Opts& o) {
    const auto target = Date::parse(o.date);
    if (!target) throw ConfigError("bad --date '" + o.date + "', expected YYYY-MM-DD");
    const harness::PredictionOutcome outcome =
        harness::predict_date(o.checkpoint, o.ticker_file, *target, cell_of(o), o.out_dir);
    char prob[64];
    const auto res = std::to_chars(prob, prob + sizeof prob, outcome.probability);
    std::printf("{\"label\":\"%s\",\"prob\":%s,\"window_end\":\"%s\"}\n",
                std::string(to_string(outcome.label)).c_str(), std::string(prob, res.ptr).c_str(),
                outcome.window_end.to_string().c_str());
    std::printf("chart: %s\n", outcome.chart_path.string().c_str());
    return 0;
}

int cmd_serve(const Opts& o, const CLI::App* sub) {
    const harness::ExperimentConfig config = harness::config_from_map(base_kv(o, sub));
    harness::PredictionService service(config);
    const std::size_t models = service.model_count();
    const std::size_t tickers = service.ticker_count();
    harness::HttpServer server(std::move(service));
    const int port = server.start("0.0.0.0", o.port);
    std::printf("serving on port %d (%zu models, %zu tickers)\n", port, models, tickers);
    std::fflush(stdout);
    while (server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"candlestick-chart market direction pipeline"};
    app.require_subcommand(1);
    Opts o;

    const auto add_common = [&](CLI::App* sub, bool with_train_flags) {
        sub->add_option("--config", o.config_file, "flat key=value config file");
        sub->add_option("--data-dir", o.data_dir, "directory of <TICKER>.csv files");
        sub->add_option("--out-dir", o.out_dir, "output directory");
        sub->add_option("--seed", o.seed, "master seed");
        if (with_train_flags) {
            sub->add_option("--epochs", o.epochs, "training epochs");
            sub->add_option("--lr", o.lr, "learning rate");
            sub->add_option("--batch", o.batch, "mini-batch size");
        }
    };
    const auto add_cell = [&](CLI::App* sub) {
        sub->add_option("--classifier", o.classifier, "cnn, rf or knn");
        sub->add_option("--period", o.period, "trading days per window (5, 10, 20)");
        sub->add_option("--dim", o.dim, "image side in pixels (20, 50)");
        sub->add_option("--volume", o.volume, "volume panel (0 or 1)");
    };

    auto* ingest = app.add_subcommand("ingest", "parse and summarize ticker csv files");
    add_common(ingest, false);
    ingest->add_option("--ticker", o.ticker, "restrict to one ticker");

    auto* render = app.add_subcommand("render", "rasterize sliding windows to png charts");
    add_common(render, false);
    add_cell(render);
    render->add_option("--ticker", o.ticker, "restrict to one ticker");
    render->add_option("--limit", o.limit, "max charts per ticker (0 = all)");

    auto* train = app.add_subcommand("train", "train one grid cell and evaluate it");
    add_common(train, true);
    add_cell(train);
    train->add_option("--ticker", o.ticker, "restrict to one ticker");

    auto* evaluate = app.add_subcommand("evaluate",
                                        "evaluate a checkpoint on the test date range");
    add_common(evaluate, false);
    add_cell(evaluate);
    evaluate->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    evaluate->add_option("--ticker-file", o.ticker_file, "csv file to evaluate")->required();

    auto* independent = app.add_subcommand(
        "independent", "evaluate a checkpoint on the independent date range");
    add_common(independent, false);
    add_cell(independent);
    independent->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    independent->add_option("--ticker-file", o.ticker_file, "csv file to evaluate")->required();

    auto* predict = app.add_subcommand("predict", "predict the direction for a target date");
    add_common(predict, false);
    add_cell(predict);
    predict->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
    predict->add_option("--ticker-file", o.ticker_file, "csv file with history")->required();
    predict->add_option("--date", o.date, "target date YYYY-MM-DD")->required();

    auto* serve = app.add_subcommand("serve", "serve predictions as a json endpoint");
    add_common(serve, false);
    serve->add_option("--port", o.port, "listen port");

    auto* grid = app.add_subcommand("grid", "run the full experiment grid");
    add_common(grid, true);
    add_cell(grid);
    grid->add_option("--ticker", o.ticker, "restrict to one ticker");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest) return cmd_ingest(o, ingest);
        if (*render) return cmd_render(o);
        if (*train) return cmd_train(o, train);
        if (*evaluate) return cmd_eval_range(o, evaluate, true);
        if (*independent) return cmd_eval_range(o, independent, false);
        if (*predict) return cmd_predict(o);
        if (*serve) return cmd_serve(o, serve);
        if (*grid) return cmd_grid(o, grid);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
