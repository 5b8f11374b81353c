#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "candlecast/experiment.hpp"

namespace candlecast::harness {

/// Flat key=value config text: one pair per line, '#' or ';' starts a
/// comment, blank lines and [section] headers are ignored, later keys win.
/// Malformed lines throw ConfigError with the line number.
std::map<std::string, std::string> parse_config_stream(std::istream& in);
std::map<std::string, std::string> load_config_file(const std::filesystem::path& path);

/// Builds an ExperimentConfig from key-value pairs. Unknown keys are
/// rejected so typos fail fast. Recognized keys:
///   data_dir, out_dir, tickers, classifiers, periods, dimensions, volume,
///   epochs, batch, learning_rate (alias lr), optimizer, seed, forest_trees,
///   knn_k, train_start, train_end, test_start, test_end,
///   independent_start, independent_end
/// List values are comma separated. Overrides (e.g. CLI flags) can be laid
/// over a file map before calling this; the override wins.
ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv);

} // namespace candlecast::harness
