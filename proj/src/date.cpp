#include "drmcvar/date.hpp"

#include <charconv>
#include <cstdio>

#include "drmcvar/error.hpp"

namespace drmcvar {

using namespace std::chrono;

bool is_month_end(const Date& d) {
    return d.day() == year_month_day_last{d.year() / d.month() / last}.day();
}

Date month_end(year y, month m) {
    return Date{year_month_day_last{y / m / last}};
}

namespace {

Date shift_months(const Date& d, int months) {
    const year_month ym = year_month{d.year(), d.month()} + std::chrono::months{months};
    const Date last_of_target = month_end(ym.year(), ym.month());
    if (is_month_end(d) || d.day() > last_of_target.day()) {
        return last_of_target;
    }
    return Date{ym.year(), ym.month(), d.day()};
}

} // namespace

Date subtract(const Date& d, const Span& span) {
    Date out = shift_months(d, -span.months);
    return Date{sys_days{out} - std::chrono::days{span.days}};
}

Date add(const Date& d, const Span& span) {
    Date out = shift_months(d, span.months);
    return Date{sys_days{out} + std::chrono::days{span.days}};
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

Date parse_iso_date(std::string_view text) {
    auto fail = [&] { return DataError("malformed ISO date '" + std::string(text) + "'"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw fail();
    }
    int y = 0;
    unsigned m = 0, dd = 0;
    auto parse = [&](std::string_view part, auto& out) {
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        if (ec != std::errc{} || p != part.data() + part.size()) {
            throw fail();
        }
    };
    parse(text.substr(0, 4), y);
    parse(text.substr(5, 2), m);
    parse(text.substr(8, 2), dd);
    const Date out{year{y}, month{m}, day{dd}};
    if (!out.ok()) {
        throw fail();
    }
    return out;
}

} // namespace drmcvar
