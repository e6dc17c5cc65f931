#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "drmcvar/date.hpp"

namespace drmcvar {

enum class Frequency { daily, monthly };

std::string_view to_string(Frequency f);
Frequency frequency_from_string(std::string_view s);

// Dated matrix of simple returns in decimal fractions, Q observations by N assets.
//
// Immutable once constructed. The constructor enforces:
//   * dates strictly increasing,
//   * matrix shape matches dates x assets,
//   * every entry finite and > -1,
//   * monthly panels use month-end dates (one row per calendar month).
class ReturnPanel {
public:
    ReturnPanel(std::vector<Date> dates, std::vector<std::string> assets,
                Eigen::MatrixXd returns, Frequency frequency);

    const std::vector<Date>& dates() const noexcept { return dates_; }
    const std::vector<std::string>& assets() const noexcept { return assets_; }
    const Eigen::MatrixXd& returns() const noexcept { return returns_; }
    Frequency frequency() const noexcept { return frequency_; }

    std::size_t num_observations() const noexcept { return dates_.size(); }
    std::size_t num_assets() const noexcept { return assets_.size(); }

    std::optional<std::size_t> index_of(const Date& d) const;
    // Index of the last row dated on or before d.
    std::optional<std::size_t> last_index_at_or_before(const Date& d) const;

    // Rows [first, first + count).
    ReturnPanel slice(std::size_t first, std::size_t count) const;
    // Same rows with columns reordered to `order` (every name must exist).
    ReturnPanel select_assets(const std::vector<std::string>& order) const;

    friend bool operator==(const ReturnPanel& a, const ReturnPanel& b);

private:
    std::vector<Date> dates_;
    std::vector<std::string> assets_;
    Eigen::MatrixXd returns_;
    Frequency frequency_;
};

enum class ValueLayout { percent, decimal };

// What to do with sentinel cells (-99.99, -999) and empty cells.
enum class MissingPolicy { error, drop_row };

struct ParseOptions {
    ValueLayout layout = ValueLayout::percent;
    MissingPolicy missing = MissingPolicy::error;
};

// Reads a Fama-French style CSV table: a header row naming the assets (its
// first cell may be blank or a label such as "Date"), followed by rows whose
// first cell is YYYYMM (monthly) or YYYYMMDD (daily). Lines before the header
// that do not lead into a dated row are skipped, which covers the description
// block at the top of the published files. The table ends at the first blank
// line or end of input.
ReturnPanel parse_returns_csv(std::istream& in, const ParseOptions& options = {});
ReturnPanel parse_returns_csv_text(std::string_view text, const ParseOptions& options = {});
ReturnPanel load_returns_csv(const std::string& path, const ParseOptions& options = {});

// Writes decimal-layout CSV with round-trip precision; parse_returns_csv with
// ValueLayout::decimal reproduces the panel exactly.
std::string to_csv(const ReturnPanel& panel);

// {"dates": [...ISO...], "assets": [...], "returns": [[...]], "frequency": "..."}
std::string to_json(const ReturnPanel& panel, int indent = -1);
ReturnPanel panel_from_json(std::string_view text);

// Rows dated in (end - span, end]; `end` must be a panel date.
ReturnPanel window(const ReturnPanel& panel, const Date& end, const Span& span);

// Rows dated in (as_of - span, as_of]; `as_of` need not be a panel date.
// Used when a month-end rebalance date falls on a non-trading day.
ReturnPanel trailing_window(const ReturnPanel& panel, const Date& as_of, const Span& span);

} // namespace drmcvar
