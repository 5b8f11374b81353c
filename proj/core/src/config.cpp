#include "candlecast/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace candlecast::harness {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

long long parse_int(const std::string& value, const std::string& key) {
    long long out = 0;
    const char* end = value.data() + value.size();
    const auto res = std::from_chars(value.data(), end, out);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
    return out;
}

double parse_real(const std::string& value, const std::string& key) {
    double out = 0;
    const char* end = value.data() + value.size();
    const auto res = std::from_chars(value.data(), end, out);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
    return out;
}

Date parse_date(const std::string& value, const std::string& key) {
    const auto date = Date::parse(value);
    if (!date)
        throw ConfigError("config key '" + key + "': '" + value + "' is not a valid date");
    return *date;
}

int parse_volume_flag(const std::string& value, const std::string& key) {
    std::string lower = value;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (lower == "0" || lower == "off" || lower == "false" || lower == "no") return 0;
    if (lower == "1" || lower == "on" || lower == "true" || lower == "yes") return 1;
    throw ConfigError("config key '" + key + "': '" + value + "' is not a volume flag");
}

} // namespace

std::map<std::string, std::string> parse_config_stream(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') continue;
        if (text.front() == '[' && text.back() == ']') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key=value, got '" + text + "'");
        const std::string key = trim(text.substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = trim(text.substr(eq + 1));
    }
    return kv;
}

std::map<std::string, std::string> load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_config_stream(in);
}

ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv) {
    ExperimentConfig config;
    for (const auto& [key, value] : kv) {
        if (key == "data_dir") {
            config.data_dir = value;
        } else if (key == "out_dir") {
            config.out_dir = value;
        } else if (key == "tickers") {
            config.tickers = split_list(value);
        } else if (key == "classifiers") {
            config.classifiers.clear();
            for (const std::string& item : split_list(value)) {
                const auto c = parse_classifier(item);
                if (!c) throw ConfigError("config key 'classifiers': unknown classifier '" +
                                          item + "'");
                config.classifiers.push_back(*c);
            }
        } else if (key == "periods") {
            config.periods.clear();
            for (const std::string& item : split_list(value))
                config.periods.push_back(int(parse_int(item, key)));
        } else if (key == "dimensions") {
            config.dimensions.clear();
            for (const std::string& item : split_list(value))
                config.dimensions.push_back(int(parse_int(item, key)));
        } else if (key == "volume") {
            config.volume_options.clear();
            for (const std::string& item : split_list(value))
                config.volume_options.push_back(parse_volume_flag(item, key));
        } else if (key == "epochs") {
            config.train.epochs = std::size_t(parse_int(value, key));
        } else if (key == "batch") {
            config.train.batch_size = std::size_t(parse_int(value, key));
        } else if (key == "learning_rate" || key == "lr") {
            config.train.learning_rate = parse_real(value, key);
        } else if (key == "optimizer") {
            if (value == "adam") config.train.optimizer = nn::Optimizer::Adam;
            else if (value == "sgd") config.train.optimizer = nn::Optimizer::Sgd;
            else throw ConfigError("config key 'optimizer': expected adam or sgd, got '" +
                                   value + "'");
        } else if (key == "seed") {
            config.master_seed = std::uint64_t(parse_int(value, key));
        } else if (key == "forest_trees") {
            config.forest_trees = std::size_t(parse_int(value, key));
        } else if (key == "knn_k") {
            config.knn_k = std::size_t(parse_int(value, key));
        } else if (key == "train_start") {
            config.split.train_start = parse_date(value, key);
        } else if (key == "train_end") {
            config.split.train_end = parse_date(value, key);
        } else if (key == "test_start") {
            config.split.test_start = parse_date(value, key);
        } else if (key == "test_end") {
            config.split.test_end = parse_date(value, key);
        } else if (key == "independent_start") {
            config.split.indep_start = parse_date(value, key);
        } else if (key == "independent_end") {
            config.split.indep_end = parse_date(value, key);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    return config;
}

} // namespace candlecast::harness
