#include "candlecast/server.hpp"

#include <charconv>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace candlecast::harness {

namespace {

int classifier_rank(Classifier c) {
    switch (c) {
        case Classifier::Cnn: return 0;
        case Classifier::Forest: return 1;
        case Classifier::Knn: return 2;
    }
    return 3;
}

std::optional<int> to_int(const std::string& s) {
    int v = 0;
    const char* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
    return v;
}

PredictionService::Answer error_answer(int status, const std::string& message) {
    nlohmann::json body;
    body["error"] = message;
    return {status, body.dump()};
}

} // namespace

PredictionService::PredictionService(const ExperimentConfig& config) {
    std::vector<std::string> tickers = config.tickers;
    if (tickers.empty()) {
        if (!std::filesystem::is_directory(config.data_dir))
            throw DataError("data directory " + config.data_dir.string() + " does not exist");
        for (const auto& entry : std::filesystem::directory_iterator(config.data_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                tickers.push_back(entry.path().stem().string());
    }
    for (const std::string& ticker : tickers) {
        const auto file = config.data_dir / (ticker + ".csv");
        series_.emplace(ticker, market::load_series(file).series);
    }
    if (series_.empty()) throw DataError("no ticker data under " + config.data_dir.string());

    std::map<std::tuple<int, int, int>, Classifier> chosen;
    for (const GridCell& cell : config.expand_grid()) {
        const auto path = config.out_dir / (cell_name(cell) + ".ckpt");
        if (!std::filesystem::is_regular_file(path)) continue;
        const auto key = std::make_tuple(cell.period, cell.dimension, cell.volume ? 1 : 0);
        const auto it = chosen.find(key);
        if (it != chosen.end() && classifier_rank(it->second) <= classifier_rank(cell.classifier))
            continue;
        models_.insert_or_assign(key, LoadedModel::load(path, cell));
        chosen[key] = cell.classifier;
    }
    if (models_.empty())
        throw DataError("no checkpoints for the configured grid under " +
                        config.out_dir.string());
}

PredictionService::Answer PredictionService::predict(
    const std::map<std::string, std::string>& params) const {
    for (const char* required : {"ticker", "date", "period", "dim", "vol"})
        if (!params.count(required))
            return error_answer(400, std::string("missing parameter '") + required + "'");

    const auto date = Date::parse(params.at("date"));
    if (!date) return error_answer(400, "malformed date '" + params.at("date") + "'");
    const auto period = to_int(params.at("period"));
    if (!period) return error_answer(400, "malformed period '" + params.at("period") + "'");
    const auto dim = to_int(params.at("dim"));
    if (!dim) return error_answer(400, "malformed dim '" + params.at("dim") + "'");
    const std::string& vol = params.at("vol");
    if (vol != "0" && vol != "1")
        return error_answer(400, "malformed vol '" + vol + "', expected 0 or 1");

    const auto series_it = series_.find(params.at("ticker"));
    if (series_it == series_.end())
        return error_answer(404, "unknown ticker '" + params.at("ticker") + "'");

    const auto model_it = models_.find(std::make_tuple(*period, *dim, vol == "1" ? 1 : 0));
    if (model_it == models_.end())
        return error_answer(404, "no model for period=" + std::to_string(*period) +
                                     " dim=" + std::to_string(*dim) + " vol=" + vol);

    const auto window = window_before(series_it->second, *date, *period);
    if (!window)
        return error_answer(400, "insufficient history: need " + std::to_string(*period) +
                                     " trading days before " + date->to_string());

    const windows::DatasetSpec spec = dataset_spec_for(model_it->second.cell());
    const nn::Tensor image = chart::to_tensor(chart::render_window(*window, spec));
    const LoadedModel::Output out = model_it->second.run(image);

    nlohmann::json body;
    body["label"] = std::string(to_string(out.label));
    body["prob"] = out.probability;
    body["window_end"] = window->back().date.to_string();
    return {200, body.dump()};
}

struct HttpServer::Impl {
    PredictionService service;
    httplib::Server server;
    std::thread thread;

    explicit Impl(PredictionService s) : service(std::move(s)) {}
};

HttpServer::HttpServer(PredictionService service)
    : impl_(std::make_unique<Impl>(std::move(service))) {
    impl_->server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"status\":\"ok\"}", "application/json");
    });
    impl_->server.Get("/predict", [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> params;
        for (const auto& [key, value] : req.params) params[key] = value;
        const PredictionService::Answer answer = impl_->service.predict(params);
        res.status = answer.status;
        res.set_content(answer.body, "application/json");
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound <= 0) throw IoError("cannot bind to a free port on " + host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw IoError("cannot bind to " + host + ":" + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpServer::stop() {
    if (!impl_) return;
    if (impl_->server.is_running()) impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

bool HttpServer::running() const { return impl_ && impl_->server.is_running(); }

} // namespace candlecast::harness
