#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "candlecast/date.hpp"

namespace candlecast::market {

/// One trading day of OHLCV data.
struct Bar {
    Date date;
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    std::uint64_t volume = 0;

    /// low <= min(open, close), high >= max(open, close), prices > 0.
    bool is_valid() const;
};

/// Validated, strictly date-ascending bar sequence for one ticker.
struct Series {
    std::string ticker;
    std::vector<Bar> bars;

    bool empty() const { return bars.empty(); }
    std::size_t size() const { return bars.size(); }
};

/// Closed date ranges for the train / test / independent splits.
/// train_end must precede test_start so no window can leak across.
struct SplitSpec {
    Date train_start, train_end;
    Date test_start, test_end;
    Date indep_start, indep_end;

    /// Throws ConfigError when a range is inverted or train overlaps test.
    void validate() const;
};

struct ParseResult {
    Series series;
    /// Rows dropped by policy: any empty or "null" field, plus rows that
    /// repeat an already-seen date (first occurrence wins).
    std::size_t skipped_rows = 0;
};

/// Parses the common daily-history CSV layout:
///   Date,Open,High,Low,Close,Adj Close,Volume
/// The "Adj Close" column is optional and ignored. Rows arrive in any order
/// and are returned sorted ascending by date.
///
/// Throws DataError for a malformed header, for rows that cannot be parsed
/// (bad date, non-numeric field, negative price) or that violate the Bar
/// invariants; the message carries the 1-based line number. Throws DataError
/// when no valid rows remain.
ParseResult parse_csv(std::istream& in, std::string ticker = {});

/// Writes the layout parse_csv accepts (without the Adj Close column).
/// Prices use shortest round-trip formatting so parse(serialize(s)) == s.
void serialize_csv(const Series& series, std::ostream& out);

/// Reads `<TICKER>.csv`; the ticker is the filename stem.
ParseResult load_series(const std::filesystem::path& csv_path);

struct SplitResult {
    Series train;
    Series test;
    Series independent;
    // Warning-level flags; downstream decides whether an empty range matters.
    bool train_empty = false;
    bool test_empty = false;
    bool independent_empty = false;
};

/// Restricts a series to the three closed date ranges of `spec`. Bar order
/// is preserved and bars are never duplicated within one range.
SplitResult split(const Series& series, const SplitSpec& spec);

/// Table-style defaults: train 2000-01-01..2016-12-31,
/// test = independent = 2017-01-01..2018-06-14.
SplitSpec default_split_spec();

} // namespace candlecast::market
