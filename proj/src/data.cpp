#include "drmcvar/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "drmcvar/error.hpp"

namespace drmcvar {

using namespace std::chrono;

std::string_view to_string(Frequency f) {
    return f == Frequency::daily ? "daily" : "monthly";
}

Frequency frequency_from_string(std::string_view s) {
    if (s == "daily") return Frequency::daily;
    if (s == "monthly") return Frequency::monthly;
    throw DataError("unknown frequency '" + std::string(s) + "'");
}

ReturnPanel::ReturnPanel(std::vector<Date> dates, std::vector<std::string> assets,
                         Eigen::MatrixXd returns, Frequency frequency)
    : dates_(std::move(dates)),
      assets_(std::move(assets)),
      returns_(std::move(returns)),
      frequency_(frequency) {
    if (dates_.empty()) {
        throw DataError("return panel has no observations");
    }
    if (assets_.empty()) {
        throw DataError("return panel has no assets");
    }
    if (static_cast<std::size_t>(returns_.rows()) != dates_.size() ||
        static_cast<std::size_t>(returns_.cols()) != assets_.size()) {
        throw DataError("return matrix is " + std::to_string(returns_.rows()) + "x" +
                        std::to_string(returns_.cols()) + " but panel has " +
                        std::to_string(dates_.size()) + " dates and " +
                        std::to_string(assets_.size()) + " assets");
    }
    for (std::size_t q = 0; q < dates_.size(); ++q) {
        if (!dates_[q].ok()) {
            throw DataError("invalid calendar date at row " + std::to_string(q));
        }
        if (q > 0 && !(dates_[q - 1] < dates_[q])) {
            throw DataError(dates_[q - 1] == dates_[q]
                                ? "duplicate date " + format_date(dates_[q])
                                : "dates not strictly increasing at " + format_date(dates_[q]));
        }
        if (frequency_ == Frequency::monthly && !is_month_end(dates_[q])) {
            throw DataError("monthly panel date " + format_date(dates_[q]) +
                            " is not a month end");
        }
        for (Eigen::Index n = 0; n < returns_.cols(); ++n) {
            const double r = returns_(static_cast<Eigen::Index>(q), n);
            if (!std::isfinite(r) || r <= -1.0) {
                throw DataError("return " + std::to_string(r) + " at " + format_date(dates_[q]) +
                                " for asset '" + assets_[static_cast<std::size_t>(n)] +
                                "' is not a finite value above -100%");
            }
        }
    }
}

std::optional<std::size_t> ReturnPanel::index_of(const Date& d) const {
    auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.end() || *it != d) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - dates_.begin());
}

std::optional<std::size_t> ReturnPanel::last_index_at_or_before(const Date& d) const {
    auto it = std::upper_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.begin()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - dates_.begin()) - 1;
}

ReturnPanel ReturnPanel::slice(std::size_t first, std::size_t count) const {
    if (first + count > dates_.size()) {
        throw DataError("slice out of range");
    }
    std::vector<Date> d(dates_.begin() + static_cast<std::ptrdiff_t>(first),
                        dates_.begin() + static_cast<std::ptrdiff_t>(first + count));
    Eigen::MatrixXd r = returns_.middleRows(static_cast<Eigen::Index>(first),
                                            static_cast<Eigen::Index>(count));
    return ReturnPanel(std::move(d), assets_, std::move(r), frequency_);
}

ReturnPanel ReturnPanel::select_assets(const std::vector<std::string>& order) const {
    std::unordered_map<std::string, Eigen::Index> column;
    for (std::size_t n = 0; n < assets_.size(); ++n) {
        column.emplace(assets_[n], static_cast<Eigen::Index>(n));
    }
    Eigen::MatrixXd r(returns_.rows(), static_cast<Eigen::Index>(order.size()));
    for (std::size_t n = 0; n < order.size(); ++n) {
        auto it = column.find(order[n]);
        if (it == column.end()) {
            throw DataError("asset '" + order[n] + "' not present in panel");
        }
        r.col(static_cast<Eigen::Index>(n)) = returns_.col(it->second);
    }
    return ReturnPanel(dates_, order, std::move(r), frequency_);
}

bool operator==(const ReturnPanel& a, const ReturnPanel& b) {
    return a.frequency_ == b.frequency_ && a.dates_ == b.dates_ && a.assets_ == b.assets_ &&
           a.returns_.rows() == b.returns_.rows() && a.returns_.cols() == b.returns_.cols() &&
           a.returns_ == b.returns_;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n\"";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

bool is_blank(std::string_view line) {
    for (auto c : split_cells(line)) {
        if (!c.empty()) return false;
    }
    return true;
}

bool is_date_token(std::string_view s) {
    return (s.size() == 6 || s.size() == 8) &&
           std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

struct DateToken {
    Date date;
    Frequency frequency;
};

DateToken parse_date_token(std::string_view s, std::size_t line_no) {
    auto fail = [&] {
        return DataError("malformed date token '" + std::string(s) + "' on line " +
                         std::to_string(line_no));
    };
    if (!is_date_token(s)) throw fail();
    int y = 0;
    unsigned m = 0, d = 0;
    std::from_chars(s.data(), s.data() + 4, y);
    std::from_chars(s.data() + 4, s.data() + 6, m);
    if (m < 1 || m > 12) throw fail();
    if (s.size() == 6) {
        return {month_end(year{y}, month{m}), Frequency::monthly};
    }
    std::from_chars(s.data() + 6, s.data() + 8, d);
    const Date date{year{y}, month{m}, day{d}};
    if (!date.ok()) throw fail();
    return {date, Frequency::daily};
}

bool is_sentinel(double v) {
    return std::abs(v + 99.99) < 1e-9 || std::abs(v + 999.0) < 1e-9;
}

} // namespace

ReturnPanel parse_returns_csv(std::istream& in, const ParseOptions& options) {
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        lines.push_back(std::move(line));
    }

    // Locate the header: a line with at least two cells whose next non-blank
    // line starts with a date token.
    std::size_t header = lines.size();
    for (std::size_t i = 0; i + 1 < lines.size() && header == lines.size(); ++i) {
        if (split_cells(lines[i]).size() < 2 || is_blank(lines[i])) continue;
        std::size_t j = i + 1;
        while (j < lines.size() && is_blank(lines[j])) ++j;
        if (j < lines.size() && is_date_token(split_cells(lines[j]).front())) {
            header = i;
        }
    }
    if (header == lines.size()) {
        throw DataError("no header row followed by dated rows found; panel is empty");
    }

    const auto header_cells = split_cells(lines[header]);
    std::vector<std::string> assets;
    for (std::size_t k = 1; k < header_cells.size(); ++k) {
        if (header_cells[k].empty()) {
            throw DataError("empty asset name in header column " + std::to_string(k));
        }
        assets.emplace_back(header_cells[k]);
    }

    const double scale = options.layout == ValueLayout::percent ? 0.01 : 1.0;
    std::vector<Date> dates;
    std::vector<double> values;
    std::optional<Frequency> frequency;

    std::size_t i = header + 1;
    while (i < lines.size() && is_blank(lines[i])) ++i;
    std::size_t data_row = 0;
    for (; i < lines.size() && !is_blank(lines[i]); ++i) {
        const std::size_t line_no = i + 1;
        ++data_row;
        const auto cells = split_cells(lines[i]);
        const DateToken token = parse_date_token(cells.front(), line_no);
        if (frequency && *frequency != token.frequency) {
            throw DataError("mixed monthly and daily date tokens on line " +
                            std::to_string(line_no));
        }
        frequency = token.frequency;
        if (cells.size() != header_cells.size()) {
            throw DataError("row " + std::to_string(data_row) + " (line " +
                            std::to_string(line_no) + ") has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(header_cells.size()));
        }
        if (!dates.empty() && dates.back() == token.date) {
            throw DataError("duplicate date " + std::string(cells.front()) + " on line " +
                            std::to_string(line_no));
        }

        std::vector<double> row;
        row.reserve(assets.size());
        bool missing = false;
        for (std::size_t k = 1; k < cells.size(); ++k) {
            const auto cell = cells[k];
            double v = 0.0;
            if (cell.empty()) {
                missing = true;
            } else {
                auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (ec != std::errc{} || p != cell.data() + cell.size()) {
                    throw DataError("non-numeric cell '" + std::string(cell) + "' at row " +
                                    std::to_string(data_row) + " (line " +
                                    std::to_string(line_no) + "), column '" + assets[k - 1] +
                                    "'");
                }
                missing = missing || is_sentinel(v);
            }
            if (missing && options.missing == MissingPolicy::error) {
                throw DataError("missing value at row " + std::to_string(data_row) + " (line " +
                                std::to_string(line_no) + "), column '" + assets[k - 1] + "'");
            }
            row.push_back(v * scale);
        }
        if (missing) continue;  // drop_row
        dates.push_back(token.date);
        values.insert(values.end(), row.begin(), row.end());
    }

    if (dates.empty()) {
        throw DataError("return panel is empty after parsing");
    }
    const auto q = static_cast<Eigen::Index>(dates.size());
    const auto n = static_cast<Eigen::Index>(assets.size());
    Eigen::MatrixXd returns =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            values.data(), q, n);
    return ReturnPanel(std::move(dates), std::move(assets), std::move(returns), *frequency);
}

ReturnPanel parse_returns_csv_text(std::string_view text, const ParseOptions& options) {
    std::istringstream in{std::string(text)};
    return parse_returns_csv(in, options);
}

ReturnPanel load_returns_csv(const std::string& path, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    return parse_returns_csv(in, options);
}

std::string to_csv(const ReturnPanel& panel) {
    std::string out = "Date";
    for (const auto& a : panel.assets()) {
        out += ',';
        out += a;
    }
    out += '\n';
    char buf[32];
    const auto& r = panel.returns();
    for (std::size_t q = 0; q < panel.num_observations(); ++q) {
        const Date& d = panel.dates()[q];
        if (panel.frequency() == Frequency::monthly) {
            std::snprintf(buf, sizeof(buf), "%04d%02u", static_cast<int>(d.year()),
                          static_cast<unsigned>(d.month()));
        } else {
            std::snprintf(buf, sizeof(buf), "%04d%02u%02u", static_cast<int>(d.year()),
                          static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
        }
        out += buf;
        for (Eigen::Index n = 0; n < r.cols(); ++n) {
            std::snprintf(buf, sizeof(buf), ",%.17g", r(static_cast<Eigen::Index>(q), n));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

std::string to_json(const ReturnPanel& panel, int indent) {
    nlohmann::json j;
    j["frequency"] = std::string(to_string(panel.frequency()));
    j["assets"] = panel.assets();
    auto& dates = j["dates"] = nlohmann::json::array();
    for (const auto& d : panel.dates()) dates.push_back(format_date(d));
    auto& rows = j["returns"] = nlohmann::json::array();
    const auto& r = panel.returns();
    for (Eigen::Index q = 0; q < r.rows(); ++q) {
        std::vector<double> row(static_cast<std::size_t>(r.cols()));
        for (Eigen::Index n = 0; n < r.cols(); ++n) row[static_cast<std::size_t>(n)] = r(q, n);
        rows.push_back(std::move(row));
    }
    return j.dump(indent);
}

ReturnPanel panel_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        std::vector<Date> dates;
        for (const auto& d : j.at("dates")) dates.push_back(parse_iso_date(d.get<std::string>()));
        auto assets = j.at("assets").get<std::vector<std::string>>();
        const auto& rows = j.at("returns");
        Eigen::MatrixXd r(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(assets.size()));
        for (std::size_t q = 0; q < rows.size(); ++q) {
            if (rows[q].size() != assets.size()) {
                throw DataError("returns row " + std::to_string(q) + " has wrong length");
            }
            for (std::size_t n = 0; n < assets.size(); ++n) {
                r(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(n)) =
                    rows[q][n].get<double>();
            }
        }
        return ReturnPanel(std::move(dates), std::move(assets), std::move(r),
                           frequency_from_string(j.at("frequency").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid panel JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Windows

ReturnPanel trailing_window(const ReturnPanel& panel, const Date& as_of, const Span& span) {
    if (span.months < 0 || span.days < 0 || (span.months == 0 && span.days == 0)) {
        throw DataError("window span must be positive");
    }
    const Date boundary = subtract(as_of, span);
    // The panel must reach back to the window start, allowing for the first
    // observation to fall one period after the boundary (a month for monthly
    // data, a week of non-trading days for daily data).
    const Span grace = panel.frequency() == Frequency::monthly ? Span::of_months(1) : Span::of_days(7);
    if (panel.dates().front() > add(boundary, grace)) {
        throw DataError("window (" + format_date(boundary) + ", " + format_date(as_of) +
                        "] starts before the panel history (" +
                        format_date(panel.dates().front()) + ")");
    }
    const auto first = static_cast<std::size_t>(
        std::upper_bound(panel.dates().begin(), panel.dates().end(), boundary) -
        panel.dates().begin());
    const auto end = static_cast<std::size_t>(
        std::upper_bound(panel.dates().begin(), panel.dates().end(), as_of) -
        panel.dates().begin());
    if (end <= first) {
        throw DataError("window ending " + format_date(as_of) + " is empty");
    }
    if (end - first < 2) {
        throw DataError("window ending " + format_date(as_of) + " has a single observation");
    }
    return panel.slice(first, end - first);
}

ReturnPanel window(const ReturnPanel& panel, const Date& end, const Span& span) {
    if (!panel.index_of(end)) {
        throw DataError("window end " + format_date(end) + " is not a panel date");
    }
    return trailing_window(panel, end, span);
}

} // namespace drmcvar
