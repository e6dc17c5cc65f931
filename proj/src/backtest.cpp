#include "drmcvar/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drmcvar/error.hpp"
#include "drmcvar/problems.hpp"

namespace drmcvar {

Eigen::VectorXd pre_rebalance_weights(const Eigen::VectorXd& w_prev, const Eigen::VectorXd& r) {
    if (w_prev.size() != r.size()) {
        throw ValidationError("weight and return dimensions differ in drift computation");
    }
    const double growth = 1.0 + w_prev.dot(r);
    if (!(growth > 0.0)) {
        throw ValidationError("portfolio wiped out: 1 + w^T r = " + std::to_string(growth));
    }
    return w_prev.cwiseProduct((1.0 + r.array()).matrix()) / growth;
}

double turnover(const std::vector<Eigen::VectorXd>& weights, const Eigen::MatrixXd& holding_returns,
                int periods_per_year) {
    const std::size_t t = weights.size();
    if (t < 2) throw ValidationError("turnover needs at least two rebalances");
    if (holding_returns.rows() < static_cast<Eigen::Index>(t - 1)) {
        throw ValidationError("turnover needs a holding-period return for every rebalance but the last");
    }
    double sum = 0.0;
    for (std::size_t i = 1; i < t; ++i) {
        const Eigen::VectorXd r = holding_returns.row(static_cast<Eigen::Index>(i - 1)).transpose();
        sum += (weights[i] - pre_rebalance_weights(weights[i - 1], r)).lpNorm<1>();
    }
    return static_cast<double>(periods_per_year) / (2.0 * static_cast<double>(t - 1)) * sum;
}

std::vector<double> realized_returns(const std::vector<WeightRecord>& history, const ReturnPanel& panel,
                                     const std::vector<Date>& evaluation_dates) {
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (!(history[i - 1].date < history[i].date)) {
            throw ValidationError("weight history must be strictly increasing in date");
        }
    }
    std::vector<double> out;
    out.reserve(evaluation_dates.size());
    std::size_t next = 0;  // first record not yet applied
    Eigen::VectorXd w;
    bool have = false;
    for (std::size_t k = 0; k < evaluation_dates.size(); ++k) {
        const Date& t = evaluation_dates[k];
        if (k > 0 && !(evaluation_dates[k - 1] < t)) {
            throw ValidationError("evaluation dates must be strictly increasing");
        }
        while (next < history.size() && history[next].date < t) {
            w = history[next].weights;
            have = true;
            ++next;
        }
        if (!have) {
            throw ValidationError("look-ahead: no weights dated strictly before return period " +
                                  format_date(t));
        }
        const auto row = panel.index_of(t);
        if (!row) throw DataError("evaluation date " + format_date(t) + " is not in the return panel");
        if (w.size() != static_cast<Eigen::Index>(panel.num_assets())) {
            throw ValidationError("weight vector does not match the panel's asset count");
        }
        const Eigen::VectorXd r = panel.returns().row(static_cast<Eigen::Index>(*row)).transpose();
        out.push_back(w.dot(r));
        w = pre_rebalance_weights(w, r);
    }
    return out;
}

std::vector<double> wealth_path(const std::vector<double>& returns) {
    std::vector<double> w;
    w.reserve(returns.size());
    double level = 1.0;
    for (double r : returns) {
        level *= 1.0 + r;
        w.push_back(level);
    }
    return w;
}

SummaryMetrics summary_metrics(const std::vector<double>& returns, int periods_per_year) {
    const std::size_t t = returns.size();
    if (t < 2) throw ValidationError("summary metrics need at least two periods");
    if (periods_per_year <= 0) throw ValidationError("periods_per_year must be positive");
    const double ppy = static_cast<double>(periods_per_year);
    const std::vector<double> wealth = wealth_path(returns);
    for (double w : wealth) {
        if (!(w > 0.0)) throw ValidationError("cumulative wealth reached zero");
    }

    SummaryMetrics m;
    m.annual_return = std::pow(wealth.back(), ppy / static_cast<double>(t)) - 1.0;
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(t);
    double ss = 0.0;
    for (double r : returns) ss += (r - mean) * (r - mean);
    m.risk = std::sqrt(ppy / static_cast<double>(t - 1) * ss);
    if (m.risk > 0.0) m.return_to_risk = m.annual_return / m.risk;

    double peak = wealth.front();
    for (double w : wealth) {
        peak = std::max(peak, w);
        m.max_drawdown = std::min(m.max_drawdown, w / peak - 1.0);
    }
    if (m.max_drawdown < 0.0) m.calmar = m.annual_return / std::abs(m.max_drawdown);
    return m;
}

std::string_view to_string(StrategyKind k) {
    switch (k) {
    case StrategyKind::equal_weight: return "EW";
    case StrategyKind::mean_cvar: return "mean_cvar";
    case StrategyKind::mean_mcvar: return "mean_mcvar";
    case StrategyKind::dr_mcvar: return "dr_mcvar";
    }
    return "?";
}

StrategyKind strategy_kind_from_string(std::string_view s) {
    if (s == "EW" || s == "ew" || s == "equal_weight") return StrategyKind::equal_weight;
    if (s == "mean_cvar") return StrategyKind::mean_cvar;
    if (s == "mean_mcvar") return StrategyKind::mean_mcvar;
    if (s == "dr_mcvar") return StrategyKind::dr_mcvar;
    throw ValidationError("unknown strategy kind '" + std::string(s) +
                          "' (expected EW, mean_cvar, mean_mcvar or dr_mcvar)");
}

void StrategySpec::validate() const {
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0 && betas[i] < 1.0)) {
            throw ValidationError("strategy '" + name + "': beta values must lie in (0, 1)");
        }
        if (i > 0 && !(betas[i] > betas[i - 1])) {
            throw ValidationError("strategy '" + name + "': betas must be strictly increasing");
        }
    }
    switch (kind) {
    case StrategyKind::equal_weight: break;
    case StrategyKind::mean_cvar:
        if (betas.size() != 1) {
            throw ValidationError("strategy '" + name + "': mean_cvar takes exactly one beta");
        }
        break;
    case StrategyKind::mean_mcvar:
    case StrategyKind::dr_mcvar:
        if (betas.empty()) throw ValidationError("strategy '" + name + "': at least one beta is required");
        break;
    }
    if (kind == StrategyKind::dr_mcvar) uncertainty.validate();
    if (required_return && !std::isfinite(*required_return)) {
        throw ValidationError("strategy '" + name + "': required return must be finite");
    }
}

std::string_view to_string(FailurePolicy p) {
    return p == FailurePolicy::abort ? "abort" : "hold_previous";
}

FailurePolicy failure_policy_from_string(std::string_view s) {
    if (s == "abort") return FailurePolicy::abort;
    if (s == "hold_previous") return FailurePolicy::hold_previous;
    throw ValidationError("unknown failure policy '" + std::string(s) + "' (expected abort or hold_previous)");
}

void RebalanceSchedule::validate() const {
    strategy.validate();
    if (evaluation_dates.size() != rebalance_dates.size()) {
        throw ValidationError("schedule needs one rebalance date per evaluation period");
    }
    if (evaluation_dates.size() < 2) throw ValidationError("schedule needs at least two periods");
    for (std::size_t i = 0; i < evaluation_dates.size(); ++i) {
        if (!(rebalance_dates[i] < evaluation_dates[i])) {
            throw ValidationError("rebalance on " + format_date(rebalance_dates[i]) +
                                  " is not before its return period " + format_date(evaluation_dates[i]));
        }
        if (i > 0 && !(evaluation_dates[i - 1] < evaluation_dates[i] &&
                       rebalance_dates[i - 1] < rebalance_dates[i])) {
            throw ValidationError("schedule dates must be strictly increasing");
        }
    }
    if (estimation_span.months < 0 || estimation_span.days < 0 ||
        (estimation_span.months == 0 && estimation_span.days == 0)) {
        throw ValidationError("estimation span must be positive");
    }
}

RebalanceSchedule monthly_schedule(const ReturnPanel& evaluation, const Date& start, const Date& end,
                                   const Span& estimation_span, StrategySpec strategy,
                                   FailurePolicy on_failure) {
    if (!(start <= end)) throw ValidationError("backtest start must not be after its end");
    RebalanceSchedule s;
    s.estimation_span = estimation_span;
    s.strategy = std::move(strategy);
    s.on_failure = on_failure;
    const auto& dates = evaluation.dates();
    for (std::size_t i = 0; i < dates.size(); ++i) {
        if (dates[i] < start || end < dates[i]) continue;
        if (i == 0) {
            throw DataError("backtest start " + format_date(start) +
                            " leaves no evaluation row before the first period to rebalance on");
        }
        s.evaluation_dates.push_back(dates[i]);
        s.rebalance_dates.push_back(dates[i - 1]);
    }
    if (s.evaluation_dates.size() < 2) {
        throw DataError("backtest range " + format_date(start) + " to " + format_date(end) +
                        " covers fewer than two evaluation periods");
    }
    s.validate();
    return s;
}

RebalanceRecord solve_window(const StrategySpec& strategy, const ReturnPanel& window,
                             const SolverSettings& settings) {
    strategy.validate();
    RebalanceRecord rec;
    rec.date = window.dates().back();
    rec.estimation_rows = window.num_observations();
    const std::size_t n = window.num_assets();
    if (strategy.kind == StrategyKind::equal_weight) {
        rec.weights = PortfolioWeights::equal(n).values();
        return rec;
    }

    const MeanEstimate mean = estimate_mean(window);
    const Eigen::MatrixXd& r = window.returns();
    ConicProgram program;
    if (strategy.kind == StrategyKind::mean_cvar) {
        const double c = strategy.required_return.value_or(required_return(mean.mu_hat));
        rec.required_return = c;
        program = build_mean_cvar(strategy.betas.front(), r, mean.mu_hat, c);
    } else {
        const CVaRLadder ladder = solve_baselines(strategy.betas, r, settings);
        rec.baselines = ladder.baselines;
        if (strategy.kind == StrategyKind::mean_mcvar ||
            strategy.uncertainty.shape == UncertaintyShape::none) {
            program = build_mean_multi_cvar(ladder, r, mean.mu_hat);
        } else {
            const double delta = strategy.uncertainty.resolve_delta(n);
            rec.delta = delta;
            program = strategy.uncertainty.shape == UncertaintyShape::ellipsoidal
                          ? build_dr_mcvar_ellipsoidal(ladder, r, mean, delta)
                          : build_dr_mcvar_rectangular(ladder, r, mean.mu_hat, delta);
        }
    }

    const PortfolioSolution sol = solve_portfolio(program, settings);
    rec.solved = true;
    rec.status = sol.status;
    rec.iterations = sol.iterations;
    rec.kkt = sol.kkt;
    rec.warnings = sol.warnings;
    rec.diagnostics = sol.diagnostics;
    if (sol.status == SolveStatus::optimal) {
        rec.weights = sol.weights->values();
        rec.objective = sol.objective_value;
        rec.d = sol.d;
    }
    return rec;
}

RebalanceRecord optimize_window(const StrategySpec& strategy, const ReturnPanel& window,
                                const SolverSettings& settings) {
    RebalanceRecord rec = solve_window(strategy, window, settings);
    if (rec.solved && rec.status != SolveStatus::optimal) {
        throw SolverError("strategy '" + strategy.name + "' on window ending " + format_date(rec.date) +
                          ": solver ended " + std::string(to_string(rec.status)) +
                          (rec.diagnostics.empty() ? "" : " (" + rec.diagnostics + ")"));
    }
    return rec;
}

namespace {

ReturnPanel align_assets(const ReturnPanel& estimation, const ReturnPanel& evaluation) {
    const std::set<std::string> a(estimation.assets().begin(), estimation.assets().end());
    const std::set<std::string> b(evaluation.assets().begin(), evaluation.assets().end());
    if (a != b) {
        std::string missing;
        for (const auto& x : b) {
            if (!a.count(x)) missing += (missing.empty() ? "" : ", ") + x;
        }
        for (const auto& x : a) {
            if (!b.count(x)) missing += (missing.empty() ? "" : ", ") + x;
        }
        throw DataError("estimation and evaluation panels hold different assets: " + missing);
    }
    return estimation.select_assets(evaluation.assets());
}

} // namespace

BacktestReport run_backtest(const RebalanceSchedule& schedule, const ReturnPanel& estimation,
                            const ReturnPanel& evaluation, const SolverSettings& settings) {
    schedule.validate();
    const ReturnPanel est = align_assets(estimation, evaluation);
    const std::size_t n = evaluation.num_assets();
    const std::size_t t = schedule.evaluation_dates.size();

    BacktestReport report;
    report.strategy = schedule.strategy;
    report.evaluation_dates = schedule.evaluation_dates;
    report.periods_per_year = evaluation.frequency() == Frequency::monthly ? 12 : 252;

    Eigen::MatrixXd holding(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < t; ++i) {
        const auto row = evaluation.index_of(schedule.evaluation_dates[i]);
        if (!row) {
            throw DataError("evaluation date " + format_date(schedule.evaluation_dates[i]) +
                            " is not in the evaluation panel");
        }
        holding.row(static_cast<Eigen::Index>(i)) = evaluation.returns().row(static_cast<Eigen::Index>(*row));
    }

    std::vector<WeightRecord> history;
    std::vector<Eigen::VectorXd> weights;
    for (std::size_t i = 0; i < t; ++i) {
        const Date& date = schedule.rebalance_dates[i];
        RebalanceRecord rec;
        if (schedule.strategy.kind == StrategyKind::equal_weight) {
            rec.weights = PortfolioWeights::equal(n).values();
        } else {
            // Rows dated on or before the rebalance date only; later data never enters.
            const ReturnPanel win = trailing_window(est, date, schedule.estimation_span);
            try {
                rec = optimize_window(schedule.strategy, win, settings);
            } catch (const SolverError& e) {
                if (schedule.on_failure == FailurePolicy::abort) {
                    throw SolverError("rebalance on " + format_date(date) + ": " + e.what());
                }
                ++report.solver_failures;
                rec = RebalanceRecord{};
                rec.solved = true;
                rec.status = SolveStatus::max_iter;
                rec.held = true;
                rec.estimation_rows = win.num_observations();
                rec.diagnostics = e.what();
                rec.weights = weights.empty() ? PortfolioWeights::equal(n).values() : weights.back();
            }
        }
        rec.date = date;
        history.push_back({date, rec.weights});
        weights.push_back(rec.weights);
        report.rebalances.push_back(std::move(rec));
    }

    report.realized = realized_returns(history, evaluation, schedule.evaluation_dates);
    report.wealth = wealth_path(report.realized);
    report.turnover = turnover(weights, holding, report.periods_per_year);
    report.metrics = summary_metrics(report.realized, report.periods_per_year);
    return report;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json metrics_json(const SummaryMetrics& m) {
    return {{"AR", m.annual_return},
            {"RISK", m.risk},
            {"R/R", optional_json(m.return_to_risk)},
            {"MaxDD", m.max_drawdown},
            {"CR", optional_json(m.calmar)}};
}

std::string csv_number(double v) {
    std::ostringstream out;
    out.precision(12);
    out << v;
    return out.str();
}

} // namespace

std::string to_json(const SummaryMetrics& m, int indent) {
    return metrics_json(m).dump(indent);
}

std::string to_json(const BacktestReport& report, const std::vector<std::string>& assets, int indent) {
    nlohmann::json j;
    const auto& s = report.strategy;
    j["strategy"] = {{"name", s.name},
                     {"kind", std::string(to_string(s.kind))},
                     {"betas", s.betas},
                     {"uncertainty",
                      {{"shape", std::string(to_string(s.uncertainty.shape))},
                       {"confidence", optional_json(s.uncertainty.confidence)},
                       {"delta", optional_json(s.uncertainty.delta)}}},
                     {"required_return", optional_json(s.required_return)}};
    j["assets"] = assets;
    j["periods_per_year"] = report.periods_per_year;
    j["metrics"] = metrics_json(report.metrics);
    j["metrics"]["TO"] = report.turnover;
    j["solver_failures"] = report.solver_failures;
    auto& periods = j["periods"] = nlohmann::json::array();
    for (std::size_t i = 0; i < report.realized.size(); ++i) {
        periods.push_back({{"date", format_date(report.evaluation_dates[i])},
                           {"return", report.realized[i]},
                           {"wealth", report.wealth[i]}});
    }
    auto& rebal = j["rebalances"] = nlohmann::json::array();
    for (const auto& r : report.rebalances) {
        nlohmann::json e{{"date", format_date(r.date)},
                         {"weights", std::vector<double>(r.weights.data(), r.weights.data() + r.weights.size())},
                         {"solved", r.solved},
                         {"held", r.held},
                         {"estimation_rows", r.estimation_rows}};
        if (r.solved) {
            e["status"] = std::string(to_string(r.status));
            e["iterations"] = r.iterations;
            e["objective"] = optional_json(r.objective);
            e["d"] = optional_json(r.d);
            e["delta"] = optional_json(r.delta);
            if (!r.baselines.empty()) e["baselines"] = r.baselines;
            e["kkt"] = {{"primal", r.kkt.primal}, {"dual", r.kkt.dual}, {"gap", r.kkt.gap}};
            e["warnings"] = r.warnings;
            if (!r.diagnostics.empty()) e["diagnostics"] = r.diagnostics;
        }
        rebal.push_back(std::move(e));
    }
    return j.dump(indent);
}

std::string metrics_csv_header() { return "strategy,TO,AR,RISK,R/R,MaxDD,CR"; }

std::string metrics_csv_row(const BacktestReport& report) {
    const auto& m = report.metrics;
    std::string row = report.strategy.name;
    row += "," + csv_number(report.turnover);
    row += "," + csv_number(m.annual_return);
    row += "," + csv_number(m.risk);
    row += "," + (m.return_to_risk ? csv_number(*m.return_to_risk) : std::string());
    row += "," + csv_number(m.max_drawdown);
    row += "," + (m.calmar ? csv_number(*m.calmar) : std::string());
    return row;
}

} // namespace drmcvar
