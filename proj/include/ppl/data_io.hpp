#pragma once

// Case-count CSV ingestion and regression-series preparation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "ppl/date.hpp"
#include "ppl/error.hpp"

namespace ppl {

enum class CaseField { confirmed, deaths, recovered };

inline std::string_view to_string(CaseField f)
{
    switch (f) {
    case CaseField::confirmed: return "confirmed";
    case CaseField::deaths: return "deaths";
    case CaseField::recovered: return "recovered";
    }
    return "confirmed";
}

inline std::optional<CaseField> parse_case_field(std::string_view s)
{
    if (s == "confirmed") return CaseField::confirmed;
    if (s == "deaths") return CaseField::deaths;
    if (s == "recovered") return CaseField::recovered;
    return std::nullopt;
}

struct CaseRow {
    Date date;
    std::string country;
    std::int64_t confirmed = 0;
    std::int64_t deaths = 0;
    std::int64_t recovered = 0;

    [[nodiscard]] std::int64_t get(CaseField f) const
    {
        switch (f) {
        case CaseField::confirmed: return confirmed;
        case CaseField::deaths: return deaths;
        case CaseField::recovered: return recovered;
        }
        return confirmed;
    }

    friend bool operator==(const CaseRow&, const CaseRow&) = default;
};

/// Rows sorted by (country, date), one row per country-day, cumulative columns
/// non-decreasing within each country.
struct CaseTable {
    std::vector<CaseRow> rows;

    [[nodiscard]] std::vector<std::string> countries() const
    {
        std::vector<std::string> out;
        for (const auto& r : rows)
            if (out.empty() || out.back() != r.country) out.push_back(r.country);
        return out;
    }

    friend bool operator==(const CaseTable&, const CaseTable&) = default;
};

struct TimeSeries {
    std::string country;
    CaseField field = CaseField::confirmed;
    std::vector<Date> dates;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
};

/// Log-cumulative counts against time normalized to [0, 1].
struct RegressionSeries {
    std::vector<double> t;
    std::vector<double> y;
    Date start;
    Date end;

    [[nodiscard]] std::size_t size() const { return t.size(); }
    [[nodiscard]] double span_days() const { return static_cast<double>(days_between(start, end)); }
    [[nodiscard]] Date date_at(double tn) const
    {
        return add_days(start, std::lround(tn * span_days()));
    }
};

namespace csv {

/// RFC 4180 record reader: quoted fields, doubled-quote escapes, CRLF or LF.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    bool next(std::vector<std::string>& fields)
    {
        fields.clear();
        if (in_.peek() == std::char_traits<char>::eof()) return false;
        std::string field;
        bool quoted = false;
        bool any = false;
        char c = 0;
        while (in_.get(c)) {
            any = true;
            if (quoted) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get(c);
                        field.push_back('"');
                    } else {
                        quoted = false;
                    }
                } else {
                    field.push_back(c);
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.push_back(std::move(field));
                field.clear();
            } else if (c == '\n') {
                break;
            } else if (c == '\r') {
                if (in_.peek() == '\n') in_.get(c);
                break;
            } else {
                field.push_back(c);
            }
        }
        if (!any) return false;
        fields.push_back(std::move(field));
        return true;
    }

private:
    std::istream& in_;
};

inline std::string escape(std::string_view s)
{
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace csv

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

// Cumulative counts: empty cell is 0; integral decimals such as "548.0" are accepted.
inline std::optional<std::int64_t> parse_count(std::string_view s)
{
    s = trim(s);
    if (s.empty()) return 0;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec == std::errc{} && ptr == s.data() + s.size()) {
        if (value < 0) return std::nullopt;
        return value;
    }
    double d = 0;
    auto [dptr, dec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (dec != std::errc{} || dptr != s.data() + s.size()) return std::nullopt;
    if (d < 0 || d != std::floor(d) || !std::isfinite(d)) return std::nullopt;
    return static_cast<std::int64_t>(d);
}

} // namespace detail

/// Parses a long-format case CSV. Rows sharing (country, date) across
/// different Province/State values are summed into a national row.
inline CaseTable parse_case_csv(std::istream& in)
{
    csv::Reader reader(in);
    std::vector<std::string> header;
    if (!reader.next(header)) throw Error(ErrorCode::MalformedCsv, "empty input, no header row");
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (detail::trim(header[i]) == name) return i;
        return std::nullopt;
    };
    const std::string_view required[] = {"Date", "Country/Region", "Confirmed", "Deaths", "Recovered"};
    std::size_t idx[5];
    for (std::size_t k = 0; k < 5; ++k) {
        auto c = column(required[k]);
        if (!c) throw Error(ErrorCode::MalformedCsv, "missing required column '" + std::string(required[k]) + "'");
        idx[k] = *c;
    }
    const auto province_col = column("Province/State");

    using Key = std::tuple<std::string, std::int64_t, std::string>;
    std::map<Key, CaseRow> by_province;
    std::vector<std::string> fields;
    std::size_t row = 0;
    while (reader.next(fields)) {
        ++row;
        if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;
        auto where = [&] { return "row " + std::to_string(row); };
        if (fields.size() < header.size())
            throw Error(ErrorCode::MalformedCsv, where() + ": expected " + std::to_string(header.size()) +
                                                     " fields, got " + std::to_string(fields.size()));
        CaseRow r;
        auto date = parse_date(detail::trim(fields[idx[0]]));
        if (!date) throw Error(ErrorCode::MalformedCsv, where() + ": unparseable date '" + fields[idx[0]] + "'");
        r.date = *date;
        r.country = std::string(detail::trim(fields[idx[1]]));
        if (r.country.empty()) throw Error(ErrorCode::MalformedCsv, where() + ": empty country");
        std::int64_t* targets[] = {&r.confirmed, &r.deaths, &r.recovered};
        for (std::size_t k = 0; k < 3; ++k) {
            auto v = detail::parse_count(fields[idx[k + 2]]);
            if (!v)
                throw Error(ErrorCode::MalformedCsv, where() + ": unparseable " + std::string(required[k + 2]) +
                                                         " '" + fields[idx[k + 2]] + "'");
            *targets[k] = *v;
        }
        std::string province = province_col ? std::string(detail::trim(fields[*province_col])) : std::string{};
        Key key{r.country, std::chrono::sys_days{r.date}.time_since_epoch().count(), province};
        if (!by_province.emplace(key, std::move(r)).second)
            throw Error(ErrorCode::MalformedCsv, where() + ": duplicate row for country and date");
    }

    CaseTable table;
    for (auto& [key, r] : by_province) {
        if (!table.rows.empty() && table.rows.back().country == r.country && table.rows.back().date == r.date) {
            auto& acc = table.rows.back();
            acc.confirmed += r.confirmed;
            acc.deaths += r.deaths;
            acc.recovered += r.recovered;
        } else {
            table.rows.push_back(r);
        }
    }

    // Reporting corrections: clamp each cumulative column to its running maximum.
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        auto& prev = table.rows[i - 1];
        auto& cur = table.rows[i];
        if (prev.country != cur.country) continue;
        cur.confirmed = std::max(cur.confirmed, prev.confirmed);
        cur.deaths = std::max(cur.deaths, prev.deaths);
        cur.recovered = std::max(cur.recovered, prev.recovered);
    }
    return table;
}

inline CaseTable parse_case_csv(std::string_view text)
{
    std::istringstream in{std::string(text)};
    return parse_case_csv(in);
}

inline void write_case_csv(std::ostream& out, const CaseTable& table)
{
    out << "Date,Country/Region,Confirmed,Deaths,Recovered\n";
    for (const auto& r : table.rows)
        out << format_date(r.date) << ',' << csv::escape(r.country) << ',' << r.confirmed << ',' << r.deaths << ','
            << r.recovered << '\n';
}

/// Cumulative counts for one country within [start, end]; calendar gaps are
/// forward-filled with the previous cumulative value.
inline TimeSeries select_series(const CaseTable& table, std::string_view country, Date start, Date end,
                                CaseField field)
{
    auto first = std::find_if(table.rows.begin(), table.rows.end(), [&](const CaseRow& r) { return r.country == country; });
    if (first == table.rows.end()) throw Error(ErrorCode::UnknownCountry, "no rows for '" + std::string(country) + "'");
    auto last = std::find_if(first, table.rows.end(), [&](const CaseRow& r) { return r.country != country; });

    const Date lo = std::max(start, first->date);
    const Date hi = std::min(end, std::prev(last)->date);
    if (std::chrono::sys_days{lo} > std::chrono::sys_days{hi})
        throw Error(ErrorCode::EmptyWindow, "window " + format_date(start) + ".." + format_date(end) +
                                                " does not intersect data for '" + std::string(country) + "'");

    TimeSeries ts;
    ts.country = std::string(country);
    ts.field = field;
    auto it = first;
    double carried = 0.0;
    for (Date d = first->date; std::chrono::sys_days{d} <= std::chrono::sys_days{hi}; d = add_days(d, 1)) {
        while (it != last && std::chrono::sys_days{it->date} <= std::chrono::sys_days{d}) {
            carried = static_cast<double>(it->get(field));
            ++it;
        }
        if (std::chrono::sys_days{d} >= std::chrono::sys_days{lo}) {
            ts.dates.push_back(d);
            ts.values.push_back(carried);
        }
    }
    return ts;
}

/// Natural log of cumulative counts with leading zero days dropped and time
/// mapped affinely so the first kept day is 0 and the last is 1.
inline RegressionSeries to_log_cumulative(const TimeSeries& series, std::size_t min_points = 10)
{
    std::size_t first = 0;
    while (first < series.size() && !(series.values[first] > 0.0)) ++first;
    const std::size_t kept = series.size() - first;
    if (kept < std::max<std::size_t>(min_points, 2))
        throw Error(ErrorCode::TooFewPoints, std::to_string(kept) + " nonzero points, need " +
                                                 std::to_string(std::max<std::size_t>(min_points, 2)));

    RegressionSeries out;
    out.start = series.dates[first];
    out.end = series.dates.back();
    const double span = out.span_days();
    if (span <= 0) throw Error(ErrorCode::TooFewPoints, "series spans zero days");
    out.t.reserve(kept);
    out.y.reserve(kept);
    for (std::size_t k = first; k < series.size(); ++k) {
        if (!(series.values[k] > 0.0))
            throw Error(ErrorCode::DegenerateSeries, "zero count after first case on " + format_date(series.dates[k]));
        out.t.push_back(static_cast<double>(days_between(out.start, series.dates[k])) / span);
        out.y.push_back(std::log(series.values[k]));
    }
    out.t.front() = 0.0;
    out.t.back() = 1.0;
    return out;
}

/// Daily increments of a cumulative series; negative increments become 0.
inline std::vector<double> daily_increments(const TimeSeries& cumulative)
{
    std::vector<double> out;
    if (cumulative.size() < 2) return out;
    out.reserve(cumulative.size() - 1);
    for (std::size_t k = 1; k < cumulative.size(); ++k)
        out.push_back(std::max(0.0, cumulative.values[k] - cumulative.values[k - 1]));
    return out;
}

} // namespace ppl
