#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "drmcvar/conic.hpp"
#include "drmcvar/cvar.hpp"
#include "drmcvar/data.hpp"
#include "drmcvar/date.hpp"
#include "drmcvar/estimators.hpp"

namespace drmcvar {

// w (.) (1 + r) / (1 + w^T r): weights after one period of drift.
Eigen::VectorXd pre_rebalance_weights(const Eigen::VectorXd& w_prev, const Eigen::VectorXd& r);

// One-way annualized turnover
//     periods_per_year / (2 (T - 1)) * sum_{t=2..T} || w_t - drift(w_{t-1}, r_{t-1}) ||_1
// where weights[t] is the t-th rebalance and row t of `holding_returns` is the
// return earned while weights[t] was held. Needs T >= 2 and at least T - 1 rows.
double turnover(const std::vector<Eigen::VectorXd>& weights, const Eigen::MatrixXd& holding_returns,
                int periods_per_year = 12);

struct WeightRecord {
    Date date;
    Eigen::VectorXd weights;
};

// R_t = w^T r_t for each evaluation date t, where w is the latest record dated
// strictly before t, drifted through any evaluation periods since it was set.
// Throws ValidationError when some evaluation date has no earlier record.
std::vector<double> realized_returns(const std::vector<WeightRecord>& history, const ReturnPanel& panel,
                                     const std::vector<Date>& evaluation_dates);

struct SummaryMetrics {
    double annual_return = 0.0;
    double risk = 0.0;
    std::optional<double> return_to_risk;  // absent when risk == 0
    double max_drawdown = 0.0;             // in [-1, 0]
    std::optional<double> calmar;          // AR / |MaxDD|, absent when MaxDD == 0
};

// Wealth path W_k = prod_{t<=k} (1 + R_t), starting from W_0 = 1 (not included).
std::vector<double> wealth_path(const std::vector<double>& returns);

SummaryMetrics summary_metrics(const std::vector<double>& returns, int periods_per_year = 12);

enum class StrategyKind { equal_weight, mean_cvar, mean_mcvar, dr_mcvar };

std::string_view to_string(StrategyKind k);
StrategyKind strategy_kind_from_string(std::string_view s);

struct StrategySpec {
    std::string name;
    StrategyKind kind = StrategyKind::equal_weight;
    // One beta for mean_cvar; the ladder for mean_mcvar and dr_mcvar.
    std::vector<double> betas;
    UncertaintyConfig uncertainty;
    // Required return for mean_cvar; defaults to the cross-sectional mean of mu_hat.
    std::optional<double> required_return;

    void validate() const;
};

enum class FailurePolicy { abort, hold_previous };

std::string_view to_string(FailurePolicy p);
FailurePolicy failure_policy_from_string(std::string_view s);

// Out-of-sample periods and the rebalance date preceding each one.
struct RebalanceSchedule {
    std::vector<Date> evaluation_dates;
    std::vector<Date> rebalance_dates;  // rebalance_dates[i] < evaluation_dates[i]
    Span estimation_span = Span::of_years(5);
    StrategySpec strategy;
    FailurePolicy on_failure = FailurePolicy::abort;

    void validate() const;
};

// Evaluation periods are the panel rows dated in [start, end]; each is traded
// from the preceding panel date.
RebalanceSchedule monthly_schedule(const ReturnPanel& evaluation, const Date& start, const Date& end,
                                   const Span& estimation_span, StrategySpec strategy,
                                   FailurePolicy on_failure = FailurePolicy::abort);

struct RebalanceRecord {
    Date date;
    Eigen::VectorXd weights;
    SolveStatus status = SolveStatus::optimal;
    bool solved = false;  // false for equal weight
    bool held = false;    // previous weights kept after a failed solve
    std::size_t estimation_rows = 0;
    std::optional<double> objective;
    std::optional<double> d;
    std::optional<double> delta;
    std::optional<double> required_return;  // mean_cvar only
    std::vector<double> baselines;          // per-beta minimum CVaR (ladder strategies)
    int iterations = 0;
    KktResiduals kkt;
    std::vector<std::string> warnings;
    std::string diagnostics;
};

struct BacktestReport {
    StrategySpec strategy;
    std::vector<RebalanceRecord> rebalances;
    std::vector<Date> evaluation_dates;
    std::vector<double> realized;
    std::vector<double> wealth;
    double turnover = 0.0;
    SummaryMetrics metrics;
    int periods_per_year = 12;
    std::size_t solver_failures = 0;
};

// Estimates inputs on the trailing window of `estimation` ending at each
// rebalance date, solves the strategy, and evaluates on `evaluation`. Both
// panels must hold the same assets; estimation columns are joined by name.
BacktestReport run_backtest(const RebalanceSchedule& schedule, const ReturnPanel& estimation,
                            const ReturnPanel& evaluation, const SolverSettings& settings = {});

// Weights for one strategy from an estimation window. The record carries the
// solver status; weights are empty when the solve was not optimal. Throws
// SolverError only when a baseline solve fails.
RebalanceRecord solve_window(const StrategySpec& strategy, const ReturnPanel& window,
                             const SolverSettings& settings = {});

// solve_window that throws SolverError on any non-optimal exit.
RebalanceRecord optimize_window(const StrategySpec& strategy, const ReturnPanel& window,
                                const SolverSettings& settings = {});

std::string to_json(const SummaryMetrics& m, int indent = -1);
std::string to_json(const BacktestReport& report, const std::vector<std::string>& assets, int indent = 2);

// Table layout: strategy,TO,AR,RISK,R/R,MaxDD,CR (absent values left empty).
std::string metrics_csv_header();
std::string metrics_csv_row(const BacktestReport& report);

} // namespace drmcvar
