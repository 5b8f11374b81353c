#include "candlecast/date.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace candlecast {

namespace {

std::chrono::year_month_day to_ymd(const Date& d) {
    return std::chrono::year{d.year} / d.month / d.day;
}

} // namespace

bool Date::is_valid() const {
    return to_ymd(*this).ok();
}

std::int64_t Date::to_days() const {
    const std::chrono::sys_days sd{to_ymd(*this)};
    return sd.time_since_epoch().count();
}

Date Date::from_days(std::int64_t days) {
    const std::chrono::sys_days sd{std::chrono::days{days}};
    const std::chrono::year_month_day ymd{sd};
    return Date{int(ymd.year()), int(unsigned(ymd.month())), int(unsigned(ymd.day()))};
}

int Date::weekday() const {
    const std::chrono::weekday wd{std::chrono::sys_days{to_ymd(*this)}};
    return int(wd.iso_encoding()) - 1; // ISO: Mon=1..Sun=7
}

Date Date::next_trading_day() const {
    Date d = next_day();
    while (!d.is_weekday()) d = d.next_day();
    return d;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::optional<Date> Date::parse(std::string_view text) {
    if (text.size() != 10) return std::nullopt;
    const char sep = text[4];
    if ((sep != '-' && sep != '/') || text[7] != sep) return std::nullopt;

    auto num = [&](std::size_t pos, std::size_t len, int& out) {
        const char* first = text.data() + pos;
        const char* last = first + len;
        auto [ptr, ec] = std::from_chars(first, last, out);
        return ec == std::errc{} && ptr == last;
    };

    Date d;
    if (!num(0, 4, d.year) || !num(5, 2, d.month) || !num(8, 2, d.day)) return std::nullopt;
    if (!d.is_valid()) return std::nullopt;
    return d;
}

} // namespace candlecast
