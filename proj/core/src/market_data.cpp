#include "candlecast/market_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "candlecast/error.hpp"

namespace candlecast::market {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

bool is_null_field(std::string_view f) {
    if (f.empty()) return true;
    if (f.size() != 4) return false;
    auto lower = [](char c) { return char(std::tolower(static_cast<unsigned char>(c))); };
    return lower(f[0]) == 'n' && lower(f[1]) == 'u' && lower(f[2]) == 'l' && lower(f[3]) == 'l';
}

bool parse_double(std::string_view f, double& out) {
    const char* first = f.data();
    const char* last = first + f.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

bool parse_volume(std::string_view f, std::uint64_t& out) {
    const char* first = f.data();
    const char* last = first + f.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

[[noreturn]] void row_error(std::size_t line_no, const std::string& what) {
    throw DataError("csv row error at line " + std::to_string(line_no) + ": " + what);
}

void write_price(std::ostream& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, ptr - buf);
    (void)ec;
}

} // namespace

bool Bar::is_valid() const {
    if (!(open > 0.0 && high > 0.0 && low > 0.0 && close > 0.0)) return false;
    if (low > std::min(open, close)) return false;
    if (high < std::max(open, close)) return false;
    return true;
}

void SplitSpec::validate() const {
    auto check_range = [](const Date& a, const Date& b, const char* name) {
        if (!a.is_valid() || !b.is_valid() || a > b)
            throw ConfigError(std::string("invalid ") + name + " range: " + a.to_string() +
                              " .. " + b.to_string());
    };
    check_range(train_start, train_end, "train");
    check_range(test_start, test_end, "test");
    check_range(indep_start, indep_end, "independent");
    if (!(train_end < test_start))
        throw ConfigError("train_end " + train_end.to_string() +
                          " must precede test_start " + test_start.to_string());
}

ParseResult parse_csv(std::istream& in, std::string ticker) {
    std::string line;
    std::size_t line_no = 0;

    // Header row.
    if (!std::getline(in, line)) throw DataError("csv format error: empty input");
    ++line_no;
    const auto header = split_fields(line);
    const bool has_adj_close =
        header.size() == 7 && header[0] == "Date" && header[1] == "Open" &&
        header[2] == "High" && header[3] == "Low" && header[4] == "Close" &&
        header[5] == "Adj Close" && header[6] == "Volume";
    const bool plain =
        header.size() == 6 && header[0] == "Date" && header[1] == "Open" &&
        header[2] == "High" && header[3] == "Low" && header[4] == "Close" &&
        header[5] == "Volume";
    if (!has_adj_close && !plain)
        throw DataError("csv format error: unrecognized header \"" + line + "\"");
    const std::size_t n_fields = has_adj_close ? 7 : 6;
    const std::size_t volume_col = has_adj_close ? 6 : 5;

    ParseResult result;
    result.series.ticker = std::move(ticker);
    auto& bars = result.series.bars;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != n_fields)
            row_error(line_no, "expected " + std::to_string(n_fields) + " fields, got " +
                                   std::to_string(fields.size()));

        bool has_null = false;
        for (const auto& f : fields)
            if (is_null_field(f)) has_null = true;
        if (has_null) {
            ++result.skipped_rows;
            continue;
        }

        Bar bar;
        const auto date = Date::parse(fields[0]);
        if (!date) row_error(line_no, "bad date \"" + std::string(fields[0]) + "\"");
        bar.date = *date;

        if (!parse_double(fields[1], bar.open)) row_error(line_no, "bad open");
        if (!parse_double(fields[2], bar.high)) row_error(line_no, "bad high");
        if (!parse_double(fields[3], bar.low)) row_error(line_no, "bad low");
        if (!parse_double(fields[4], bar.close)) row_error(line_no, "bad close");
        if (!parse_volume(fields[volume_col], bar.volume))
            row_error(line_no, "bad volume \"" + std::string(fields[volume_col]) + "\"");
        if (!bar.is_valid())
            row_error(line_no, "bar invariant violated (prices must be positive, low <= "
                               "min(open,close) <= max(open,close) <= high)");
        bars.push_back(bar);
    }

    // Sort ascending; stable keeps file order among equal dates so
    // "first occurrence wins" is well defined.
    std::stable_sort(bars.begin(), bars.end(),
                     [](const Bar& a, const Bar& b) { return a.date < b.date; });
    auto last = std::unique(bars.begin(), bars.end(),
                            [](const Bar& a, const Bar& b) { return a.date == b.date; });
    result.skipped_rows += std::size_t(bars.end() - last);
    bars.erase(last, bars.end());

    if (bars.empty()) throw DataError("csv contains no valid rows");
    return result;
}

void serialize_csv(const Series& series, std::ostream& out) {
    out << "Date,Open,High,Low,Close,Volume\n";
    for (const Bar& b : series.bars) {
        out << b.date.to_string() << ',';
        write_price(out, b.open);
        out << ',';
        write_price(out, b.high);
        out << ',';
        write_price(out, b.low);
        out << ',';
        write_price(out, b.close);
        out << ',' << b.volume << '\n';
    }
}

ParseResult load_series(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open " + csv_path.string());
    return parse_csv(in, csv_path.stem().string());
}

SplitResult split(const Series& series, const SplitSpec& spec) {
    spec.validate();
    SplitResult result;
    result.train.ticker = series.ticker;
    result.test.ticker = series.ticker;
    result.independent.ticker = series.ticker;
    for (const Bar& b : series.bars) {
        if (b.date >= spec.train_start && b.date <= spec.train_end)
            result.train.bars.push_back(b);
        if (b.date >= spec.test_start && b.date <= spec.test_end)
            result.test.bars.push_back(b);
        if (b.date >= spec.indep_start && b.date <= spec.indep_end)
            result.independent.bars.push_back(b);
    }
    result.train_empty = result.train.empty();
    result.test_empty = result.test.empty();
    result.independent_empty = result.independent.empty();
    return result;
}

SplitSpec default_split_spec() {
    SplitSpec s;
    s.train_start = Date{2000, 1, 1};
    s.train_end = Date{2016, 12, 31};
    s.test_start = Date{2017, 1, 1};
    s.test_end = Date{2018, 6, 14};
    s.indep_start = s.test_start;
    s.indep_end = s.test_end;
    return s;
}

} // namespace candlecast::market
