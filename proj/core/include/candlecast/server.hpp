#pragma once

#include <map>
#include <memory>
#include <string>

#include "candlecast/experiment.hpp"

namespace candlecast::harness {

/// Immutable inference state behind the JSON endpoint: every ticker series
/// from data_dir plus every grid-cell checkpoint found under out_dir. When
/// several classifiers cover the same (period, dimension, volume) cell the
/// endpoint prefers cnn, then rf, then knn.
class PredictionService {
public:
    explicit PredictionService(const ExperimentConfig& config);

    struct Answer {
        int status = 200;
        std::string body;  // JSON
    };

    /// Handles /predict query parameters: ticker, date, period, dim, vol.
    /// Missing or malformed parameters → 400; unknown ticker or a cell with
    /// no loaded model → 404. Pure function of the loaded state, so equal
    /// queries produce byte-identical bodies.
    Answer predict(const std::map<std::string, std::string>& params) const;

    std::size_t model_count() const { return models_.size(); }
    std::size_t ticker_count() const { return series_.size(); }

private:
    std::map<std::string, market::Series> series_;
    // key: (period, dimension, volume)
    std::map<std::tuple<int, int, int>, LoadedModel> models_;
};

/// Minimal HTTP front end:
///   GET /health  -> {"status":"ok"}
///   GET /predict -> PredictionService::predict
/// Requests are served concurrently against the immutable service.
class HttpServer {
public:
    explicit HttpServer(PredictionService service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and serves on a background thread; returns the bound port
    /// (pass port 0 to pick a free one). Throws IoError when the bind fails.
    int start(const std::string& host, int port);
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace candlecast::harness
