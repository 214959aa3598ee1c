#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace ppl {

/// Calendar day. Arithmetic goes through sys_days.
using Date = std::chrono::year_month_day;

namespace detail {

inline std::optional<int> parse_int(std::string_view s)
{
    if (s.empty()) return std::nullopt;
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

} // namespace detail

/// Accepts ISO-8601 (YYYY-MM-DD) and the JHU legacy M/D/YY or M/D/YYYY.
inline std::optional<Date> parse_date(std::string_view text)
{
    using namespace std::chrono;
    int y = 0;
    int m = 0;
    int d = 0;
    if (auto dash = text.find('-'); dash != std::string_view::npos) {
        auto dash2 = text.find('-', dash + 1);
        if (dash2 == std::string_view::npos) return std::nullopt;
        auto yy = detail::parse_int(text.substr(0, dash));
        auto mm = detail::parse_int(text.substr(dash + 1, dash2 - dash - 1));
        auto dd = detail::parse_int(text.substr(dash2 + 1));
        if (!yy || !mm || !dd || dash != 4) return std::nullopt;
        y = *yy;
        m = *mm;
        d = *dd;
    } else if (auto slash = text.find('/'); slash != std::string_view::npos) {
        auto slash2 = text.find('/', slash + 1);
        if (slash2 == std::string_view::npos) return std::nullopt;
        auto mm = detail::parse_int(text.substr(0, slash));
        auto dd = detail::parse_int(text.substr(slash + 1, slash2 - slash - 1));
        auto year_text = text.substr(slash2 + 1);
        auto yy = detail::parse_int(year_text);
        if (!yy || !mm || !dd) return std::nullopt;
        if (year_text.size() == 2) {
            y = 2000 + *yy;
        } else if (year_text.size() == 4) {
            y = *yy;
        } else {
            return std::nullopt;
        }
        m = *mm;
        d = *dd;
    } else {
        return std::nullopt;
    }
    Date date{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (m < 1 || d < 1 || !date.ok()) return std::nullopt;
    return date;
}

inline std::string format_date(const Date& date)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

inline Date add_days(const Date& date, long days)
{
    return Date{std::chrono::sys_days{date} + std::chrono::days{days}};
}

/// b - a in whole days.
inline long days_between(const Date& a, const Date& b)
{
    return (std::chrono::sys_days{b} - std::chrono::sys_days{a}).count();
}

} // namespace ppl
