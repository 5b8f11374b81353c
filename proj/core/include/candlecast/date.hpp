#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace candlecast {

/// Calendar date (proleptic Gregorian). Plain value type; ordering is
/// chronological. Trading-day arithmetic is done on bar indices, never on
/// calendar days, so this type only needs validation, comparison,
/// formatting and weekday queries.
struct Date {
    int year = 1970;
    int month = 1; // 1..12
    int day = 1;   // 1..31

    auto operator<=>(const Date&) const = default;

    bool is_valid() const;

    /// Days since 1970-01-01 (negative before the epoch).
    std::int64_t to_days() const;
    static Date from_days(std::int64_t days);

    /// 0 = Monday .. 6 = Sunday.
    int weekday() const;
    bool is_weekday() const { return weekday() < 5; }

    /// Next calendar day / next Monday-to-Friday day.
    Date next_day() const { return from_days(to_days() + 1); }
    Date next_trading_day() const;

    /// "YYYY-MM-DD"
    std::string to_string() const;

    /// Accepts "YYYY-MM-DD" and "YYYY/MM/DD". Returns nullopt on anything
    /// else, including calendar-invalid dates such as 2017-02-30.
    static std::optional<Date> parse(std::string_view text);
};

} // namespace candlecast
