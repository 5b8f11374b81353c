#include "candlecast/windowing.hpp"

#include <ostream>
#include <string>

#include "candlecast/error.hpp"

namespace candlecast::windows {

void DatasetSpec::validate() const {
    if (period < 2) throw ConfigError("period must be >= 2, got " + std::to_string(period));
    if (dimension < period)
        throw ConfigError("dimension " + std::to_string(dimension) +
                          " must be >= period " + std::to_string(period));
    if (horizon < 1) throw ConfigError("horizon must be >= 1, got " + std::to_string(horizon));
}

WindowingResult sliding_windows(const market::Series& series, const DatasetSpec& spec) {
    spec.validate();
    WindowingResult result;
    const std::size_t len = series.size();
    const std::size_t need = std::size_t(spec.period) + std::size_t(spec.horizon);
    if (len < need) {
        result.too_short = true;
        return result;
    }

    const std::size_t count = len - need + 1;
    result.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        LabeledSample sample;
        sample.window.assign(series.bars.begin() + long(i),
                             series.bars.begin() + long(i) + spec.period);
        const market::Bar& future = series.bars[i + need - 1];
        sample.label = label_direction(sample.window.back().close, future.close);
        sample.label_date = future.date;
        result.samples.push_back(std::move(sample));
    }
    return result;
}

std::pair<std::size_t, std::size_t> class_balance(const std::vector<LabeledSample>& samples) {
    std::size_t up = 0;
    for (const auto& s : samples)
        if (s.label == Direction::Up) ++up;
    return {up, samples.size() - up};
}

void write_manifest(const std::vector<LabeledSample>& samples, const std::string& ticker,
                    std::ostream& out) {
    out << "ticker,window_start,window_end,label_date,label\n";
    for (const auto& s : samples) {
        out << ticker << ',' << s.window_start().to_string() << ','
            << s.window_end().to_string() << ',' << s.label_date.to_string() << ','
            << to_string(s.label) << '\n';
    }
}

} // namespace candlecast::windows
