#include <algorithm>
#include <future>
#include <ostream>
#include <sstream>

#include "drmcvar/app.hpp"
#include "drmcvar/error.hpp"
#include "drmcvar/estimators.hpp"

namespace drmcvar::app {
namespace {

using nlohmann::json;

struct LoadedPanel {
    std::string role;
    const PanelSource* source = nullptr;
    std::string sha256;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string file_stem(std::string_view name) {
    std::string out;
    for (char ch : name) {
        const bool keep = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                          ch == '-' || ch == '_' || ch == '.';
        out.push_back(keep ? ch : '_');
    }
    return out;
}

json inputs_json(const std::vector<LoadedPanel>& panels) {
    json j = json::object();
    for (const auto& p : panels) j[p.role] = {{"path", p.source->path}, {"sha256", p.sha256}};
    return j;
}

// Leading comment lines carrying the provenance of a CSV output.
std::string csv_provenance(const RunConfig& config, const json& inputs) {
    std::string out = "# config: " + resolved_config(config).dump() + "\n";
    out += "# inputs: " + inputs.dump() + "\n";
    return out;
}

ReturnPanel load_panel(const PanelSource& source) { return load_returns_csv(source.resolved.string(), source.options); }

void require_coverage(const ReturnPanel& panel, const Date& date, std::string_view what) {
    const Span slack = panel.frequency() == Frequency::monthly ? Span{} : Span::of_days(7);
    if (date < panel.dates().front() || add(panel.dates().back(), slack) < date) {
        throw ValidationError(std::string(what) + " " + format_date(date) + " is outside the panel coverage " +
                              format_date(panel.dates().front()) + " to " + format_date(panel.dates().back()));
    }
}

json weights_json(const std::vector<std::string>& assets, const Eigen::VectorXd& w) {
    json j = json::object();
    for (std::size_t i = 0; i < assets.size(); ++i) j[assets[i]] = w[static_cast<Eigen::Index>(i)];
    return j;
}

json optimize_output(const StrategySpec& s, const RebalanceRecord& rec, const std::vector<std::string>& assets) {
    json j;
    j["strategy"] = {{"name", s.name}, {"kind", std::string(to_string(s.kind))}, {"betas", s.betas}};
    j["estimation_rows"] = rec.estimation_rows;
    j["window_end"] = format_date(rec.date);
    if (!rec.solved) {
        j["status"] = "optimal";
        j["weights"] = weights_json(assets, rec.weights);
        return j;
    }
    j["status"] = std::string(to_string(rec.status));
    j["weights"] = rec.status == SolveStatus::optimal ? weights_json(assets, rec.weights) : json(nullptr);
    j["objective"] = optional_json(rec.objective);
    j["d"] = optional_json(rec.d);
    if (s.kind == StrategyKind::mean_cvar) j["required_return"] = optional_json(rec.required_return);
    auto& ladder = j["baselines"] = json::array();
    for (std::size_t k = 0; k < rec.baselines.size(); ++k) {
        ladder.push_back({{"beta", s.betas[k]}, {"cvar", rec.baselines[k]}});
    }
    if (s.kind == StrategyKind::dr_mcvar) {
        j["uncertainty"] = {{"shape", std::string(to_string(s.uncertainty.shape))},
                            {"confidence", optional_json(s.uncertainty.confidence)},
                            {"delta", optional_json(rec.delta)}};
    }
    j["solver"] = {{"iterations", rec.iterations},
                   {"kkt", {{"primal", rec.kkt.primal}, {"dual", rec.kkt.dual}, {"gap", rec.kkt.gap}}},
                   {"warnings", rec.warnings},
                   {"diagnostics", rec.diagnostics}};
    return j;
}

} // namespace

int cmd_optimize(const RunConfig& config, std::ostream& log) {
    const PanelSource* source = config.estimation ? &*config.estimation
                                : config.evaluation ? &*config.evaluation
                                                    : nullptr;
    if (!source) throw ValidationError("optimize needs data.estimation or data.evaluation");
    if (!config.as_of) throw ValidationError("optimize needs optimize.as_of");
    if (config.strategies.empty()) throw ValidationError("config lists no strategies");

    const ReturnPanel panel = load_panel(*source);
    require_coverage(panel, *config.as_of, "optimize.as_of");
    const std::vector<LoadedPanel> loaded{{config.estimation ? "estimation" : "evaluation", source,
                                           file_sha256(source->resolved)}};
    const ReturnPanel win = trailing_window(panel, *config.as_of, config.estimation_span);

    int code = exit_ok;
    for (const auto& s : config.strategies) {
        json out;
        out["config"] = resolved_config(config);
        out["inputs"] = inputs_json(loaded);
        out["as_of"] = format_date(*config.as_of);
        out["assets"] = panel.assets();
        try {
            const RebalanceRecord rec = solve_window(s, win, config.solver);
            out.update(optimize_output(s, rec, panel.assets()));
            if (rec.solved && rec.status != SolveStatus::optimal) code = exit_solver;
        } catch (const SolverError& e) {
            out["strategy"] = {{"name", s.name}, {"kind", std::string(to_string(s.kind))}, {"betas", s.betas}};
            out["status"] = "baseline_failed";
            out["weights"] = nullptr;
            out["error"] = e.what();
            code = exit_solver;
        }
        const auto path = config.resolved_output_dir / ("optimize-" + file_stem(s.name) + ".json");
        write_atomic(path, out.dump(2) + "\n");
        log << s.name << ": " << out["status"].get<std::string>() << " -> " << path.string() << "\n";
    }
    return code;
}

int cmd_backtest(const RunConfig& config, std::ostream& log) {
    if (!config.evaluation) throw ValidationError("backtest needs data.evaluation");
    if (!config.start || !config.end) throw ValidationError("backtest needs backtest.start and backtest.end");
    if (config.strategies.empty()) throw ValidationError("config lists no strategies");

    const ReturnPanel evaluation = load_panel(*config.evaluation);
    const ReturnPanel estimation = config.estimation ? load_panel(*config.estimation) : evaluation;
    require_coverage(evaluation, *config.start, "backtest.start");
    require_coverage(evaluation, *config.end, "backtest.end");
    std::vector<LoadedPanel> loaded{{"evaluation", &*config.evaluation, file_sha256(config.evaluation->resolved)}};
    if (config.estimation) {
        loaded.push_back({"estimation", &*config.estimation, file_sha256(config.estimation->resolved)});
    }
    const json inputs = inputs_json(loaded);

    // Schedules are built up front so range problems surface before any solve.
    std::vector<RebalanceSchedule> schedules;
    for (const auto& s : config.strategies) {
        schedules.push_back(monthly_schedule(evaluation, *config.start, *config.end, config.estimation_span, s,
                                             config.on_failure));
    }

    auto run_one = [&](std::size_t i) {
        BacktestReport report = run_backtest(schedules[i], estimation, evaluation, config.solver);
        json out;
        out["config"] = resolved_config(config);
        out["inputs"] = inputs;
        out["report"] = json::parse(to_json(report, evaluation.assets(), -1));
        write_atomic(config.resolved_output_dir / ("backtest-" + file_stem(report.strategy.name) + ".json"),
                     out.dump(2) + "\n");
        return report;
    };

    std::vector<BacktestReport> reports(schedules.size());
    for (std::size_t first = 0; first < schedules.size(); first += config.jobs) {
        const std::size_t last = std::min(schedules.size(), first + config.jobs);
        if (last - first == 1) {
            reports[first] = run_one(first);
            continue;
        }
        std::vector<std::future<BacktestReport>> batch;
        for (std::size_t i = first; i < last; ++i) batch.push_back(std::async(std::launch::async, run_one, i));
        for (std::size_t i = first; i < last; ++i) reports[i] = batch[i - first].get();
    }

    std::string csv = csv_provenance(config, inputs) + metrics_csv_header() + "\n";
    for (const auto& r : reports) {
        csv += metrics_csv_row(r) + "\n";
        log << r.strategy.name << ": " << r.rebalances.size() << " rebalances, " << r.solver_failures
            << " solver failures\n";
    }
    const auto path = config.resolved_output_dir / "metrics.csv";
    write_atomic(path, csv);
    log << "metrics -> " << path.string() << "\n";
    return exit_ok;
}

int cmd_theory(const RunConfig& config, std::ostream& log) {
    if (!config.theory) throw ValidationError("theory needs a theory section");
    if (!config.seed) throw ValidationError("theory needs a seed");
    TheoryConfig tc;
    tc.distribution = config.theory->distribution;
    tc.q_grid = config.theory->q_grid;
    tc.trials = config.theory->trials;
    tc.confidence = config.theory->confidence;
    tc.betas = config.theory->betas;
    tc.seed = *config.seed;
    tc.solver = config.solver;
    tc.validate();

    const ExcessRiskResult result = excess_risk_experiment(tc);
    const json inputs = json::object();
    write_atomic(config.resolved_output_dir / "theory.csv", csv_provenance(config, inputs) + excess_risk_csv(result));
    json out;
    out["config"] = resolved_config(config);
    out["inputs"] = inputs;
    out["result"] = json::parse(to_json(result, -1));
    write_atomic(config.resolved_output_dir / "theory.json", out.dump(2) + "\n");
    for (const auto& r : result.rows) {
        log << "Q=" << r.q << " excess=" << r.excess << " bound=" << r.bound << " dropped=" << r.dropped << "\n";
    }
    return exit_ok;
}

namespace {

json describe(const ReturnPanel& p, const std::string& path, const std::string& sha) {
    return {{"path", path},
            {"sha256", sha},
            {"rows", p.num_observations()},
            {"assets", p.num_assets()},
            {"first", format_date(p.dates().front())},
            {"last", format_date(p.dates().back())},
            {"frequency", std::string(to_string(p.frequency()))}};
}

} // namespace

int cmd_validate_data(const RunConfig& config, std::ostream& log) {
    if (!config.estimation && !config.evaluation) throw ValidationError("config names no data panels");
    json out = json::object();
    if (config.estimation) {
        out["estimation"] = describe(load_panel(*config.estimation), config.estimation->path,
                                     file_sha256(config.estimation->resolved));
    }
    if (config.evaluation) {
        out["evaluation"] = describe(load_panel(*config.evaluation), config.evaluation->path,
                                     file_sha256(config.evaluation->resolved));
    }
    log << out.dump(2) << "\n";
    return exit_ok;
}

int cmd_validate_files(const std::vector<std::string>& paths, const ParseOptions& options, std::ostream& log) {
    if (paths.empty()) throw ValidationError("no files given");
    json out = json::array();
    for (const auto& path : paths) {
        if (!std::filesystem::is_regular_file(path)) throw ValidationError("file not found: " + path);
        out.push_back(describe(load_returns_csv(path, options), path, file_sha256(path)));
    }
    log << out.dump(2) << "\n";
    return exit_ok;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << "\n";
        return exit_solver;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return exit_data;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_internal;
    }
}

} // namespace drmcvar::app
