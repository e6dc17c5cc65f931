#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "drmcvar/backtest.hpp"
#include "drmcvar/conic.hpp"
#include "drmcvar/data.hpp"
#include "drmcvar/date.hpp"
#include "drmcvar/theory.hpp"

namespace drmcvar::app {

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_validation = 2,
    exit_solver = 3,
    exit_data = 4,
};

struct PanelSource {
    std::string path;  // as written in the config
    std::filesystem::path resolved;  // relative paths are taken from the config's directory
    ParseOptions options;
};

struct TheorySection {
    GaussianSpec distribution;
    std::vector<std::size_t> q_grid;
    std::size_t trials = 200;
    double confidence = 0.05;
    std::vector<double> betas{0.9, 0.99};
};

struct RunConfig {
    std::optional<PanelSource> estimation;
    std::optional<PanelSource> evaluation;
    std::vector<StrategySpec> strategies;
    std::optional<Date> as_of;
    std::optional<Date> start;
    std::optional<Date> end;
    Span estimation_span = Span::of_years(5);
    FailurePolicy on_failure = FailurePolicy::abort;
    std::size_t jobs = 1;
    std::string output_dir = "output";
    std::filesystem::path resolved_output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<TheorySection> theory;
    SolverSettings solver;
};

// Parses and checks a run config. Unknown keys are rejected. Throws
// ValidationError on any problem with the document itself.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

// The config with every default filled in; embedded in every output file.
nlohmann::json resolved_config(const RunConfig& config);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

// Writes to a temporary sibling and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);

// Each command writes its files under config.resolved_output_dir and a short
// summary to `log`. Errors propagate as exceptions; see run_guarded.
int cmd_optimize(const RunConfig& config, std::ostream& log);
int cmd_backtest(const RunConfig& config, std::ostream& log);
int cmd_theory(const RunConfig& config, std::ostream& log);

// Loads every panel named in the config (or the given files) and reports
// shape, date range, frequency and content hash as JSON on `log`.
int cmd_validate_data(const RunConfig& config, std::ostream& log);
int cmd_validate_files(const std::vector<std::string>& paths, const ParseOptions& options, std::ostream& log);

// Runs `body`, mapping ValidationError / SolverError / DataError to their exit
// codes and printing the message to `err`.
int run_guarded(const std::function<int()>& body, std::ostream& err);

} // namespace drmcvar::app
