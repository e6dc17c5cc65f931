#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace drmcvar {

using Date = std::chrono::year_month_day;

// Calendar span used for trailing windows. Months are applied first, then days.
struct Span {
    int months = 0;
    int days = 0;

    static constexpr Span of_months(int n) { return Span{n, 0}; }
    static constexpr Span of_years(int n) { return Span{12 * n, 0}; }
    static constexpr Span of_days(int n) { return Span{0, n}; }

    friend bool operator==(const Span&, const Span&) = default;
};

bool is_month_end(const Date& d);
Date month_end(std::chrono::year y, std::chrono::month m);

// Calendar subtraction. A month-end date stays a month-end date
// (2020-11-30 minus one month is 2020-10-31); other days are clamped.
Date subtract(const Date& d, const Span& span);
Date add(const Date& d, const Span& span);

// ISO "YYYY-MM-DD". Throws DataError on malformed input.
std::string format_date(const Date& d);
Date parse_iso_date(std::string_view text);

} // namespace drmcvar
