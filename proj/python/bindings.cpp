#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "drmcvar/app.hpp"
#include "drmcvar/backtest.hpp"
#include "drmcvar/cvar.hpp"
#include "drmcvar/error.hpp"
#include "drmcvar/estimators.hpp"
#include "drmcvar/problems.hpp"
#include "drmcvar/theory.hpp"

namespace py = pybind11;
using namespace drmcvar;

namespace {

py::dict solution_dict(const PortfolioSolution& s) {
    py::dict d;
    d["status"] = std::string(to_string(s.status));
    d["weights"] = s.weights ? py::cast(s.weights->values()) : py::none();
    d["objective"] = s.objective_value;
    d["d"] = s.d ? py::cast(*s.d) : py::none();
    d["alphas"] = s.alphas;
    d["robust_penalty"] = s.robust_penalty ? py::cast(*s.robust_penalty) : py::none();
    d["iterations"] = s.iterations;
    d["kkt"] = py::make_tuple(s.kkt.primal, s.kkt.dual, s.kkt.gap);
    return d;
}

SolverSettings settings_from(py::object tol) {
    SolverSettings s;
    if (!tol.is_none()) {
        s.feasibility_tolerance = tol.cast<double>();
        s.gap_tolerance = s.feasibility_tolerance;
    }
    return s;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-level CVaR portfolio optimization with mean uncertainty sets";

    auto error = py::register_exception<Error>(m, "Error");
    py::register_exception<DataError>(m, "DataError", error.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
    py::register_exception<SolverError>(m, "SolverError", error.ptr());

    m.def(
        "empirical_cvar",
        [](const std::vector<double>& losses, double beta) {
            const auto r = empirical_cvar(losses, beta);
            return py::make_tuple(r.cvar, r.alpha_lo, r.alpha_hi);
        },
        py::arg("losses"), py::arg("beta"), "CVaR of a loss sample and the interval of minimizing alphas.");
    m.def(
        "empirical_var", [](const std::vector<double>& losses, double beta) { return empirical_var(losses, beta); },
        py::arg("losses"), py::arg("beta"));
    m.def(
        "auxiliary_f",
        [](const std::vector<double>& losses, double alpha, double beta) { return auxiliary_f(losses, alpha, beta); },
        py::arg("losses"), py::arg("alpha"), py::arg("beta"));

    m.def(
        "estimate_mean",
        [](const Eigen::MatrixXd& returns) {
            const auto e = estimate_mean(returns);
            return py::make_tuple(e.mu_hat, e.sigma_mu);
        },
        py::arg("returns"), "Sample mean and the covariance of the sample mean (S / Q).");
    m.def("required_return", &required_return, py::arg("mu_hat"));
    m.def("calibrate_delta", &calibrate_delta, py::arg("confidence"), py::arg("dimension"));

    m.def(
        "min_cvar",
        [](const Eigen::MatrixXd& returns, double beta, py::object tol) {
            return solution_dict(solve_portfolio(build_min_cvar(beta, returns), settings_from(tol)));
        },
        py::arg("returns"), py::arg("beta"), py::arg("tolerance") = py::none());
    m.def(
        "mean_cvar",
        [](const Eigen::MatrixXd& returns, double beta, py::object required, py::object tol) {
            const auto mean = estimate_mean(returns);
            const double c = required.is_none() ? required_return(mean.mu_hat) : required.cast<double>();
            return solution_dict(solve_portfolio(build_mean_cvar(beta, returns, mean.mu_hat, c), settings_from(tol)));
        },
        py::arg("returns"), py::arg("beta"), py::arg("required_return") = py::none(), py::arg("tolerance") = py::none());
    m.def(
        "baselines",
        [](const Eigen::MatrixXd& returns, const std::vector<double>& betas) {
            return solve_baselines(betas, returns).baselines;
        },
        py::arg("returns"), py::arg("betas"));
    m.def(
        "mean_multi_cvar",
        [](const Eigen::MatrixXd& returns, const std::vector<double>& betas, py::object tol) {
            const auto s = settings_from(tol);
            const auto ladder = solve_baselines(betas, returns, s);
            const auto mean = estimate_mean(returns);
            auto d = solution_dict(solve_portfolio(build_mean_multi_cvar(ladder, returns, mean.mu_hat), s));
            d["baselines"] = ladder.baselines;
            return d;
        },
        py::arg("returns"), py::arg("betas"), py::arg("tolerance") = py::none());
    m.def(
        "dr_mcvar",
        [](const Eigen::MatrixXd& returns, const std::vector<double>& betas, const std::string& shape,
           std::optional<double> delta, std::optional<double> confidence, py::object tol) {
            const auto s = settings_from(tol);
            UncertaintyConfig u{uncertainty_shape_from_string(shape), confidence, delta};
            u.validate();
            const auto ladder = solve_baselines(betas, returns, s);
            const auto mean = estimate_mean(returns);
            const double r = u.resolve_delta(static_cast<std::size_t>(returns.cols()));
            const auto program = u.shape == UncertaintyShape::rectangular
                                     ? build_dr_mcvar_rectangular(ladder, returns, mean.mu_hat, r)
                                     : build_dr_mcvar_ellipsoidal(ladder, returns, mean, r);
            auto d = solution_dict(solve_portfolio(program, s));
            d["baselines"] = ladder.baselines;
            d["delta"] = r;
            return d;
        },
        py::arg("returns"), py::arg("betas"), py::arg("shape") = "ellipsoidal", py::arg("delta") = py::none(),
        py::arg("confidence") = py::none(), py::arg("tolerance") = py::none());
    m.def("worst_case_mean", &worst_case_mean, py::arg("mu_hat"), py::arg("sigma"), py::arg("w"), py::arg("delta"));

    m.def("pre_rebalance_weights", &pre_rebalance_weights, py::arg("w_prev"), py::arg("r"));
    m.def("turnover", &turnover, py::arg("weights"), py::arg("holding_returns"), py::arg("periods_per_year") = 12);
    m.def(
        "summary_metrics",
        [](const std::vector<double>& returns, int ppy) {
            const auto s = summary_metrics(returns, ppy);
            py::dict d;
            d["AR"] = s.annual_return;
            d["RISK"] = s.risk;
            d["R/R"] = s.return_to_risk ? py::cast(*s.return_to_risk) : py::none();
            d["MaxDD"] = s.max_drawdown;
            d["CR"] = s.calmar ? py::cast(*s.calmar) : py::none();
            return d;
        },
        py::arg("returns"), py::arg("periods_per_year") = 12);

    m.def(
        "load_panel",
        [](const std::string& path, bool decimal, bool drop_missing) {
            ParseOptions o;
            o.layout = decimal ? ValueLayout::decimal : ValueLayout::percent;
            o.missing = drop_missing ? MissingPolicy::drop_row : MissingPolicy::error;
            const auto p = load_returns_csv(path, o);
            std::vector<std::string> dates;
            for (const auto& d : p.dates()) dates.push_back(format_date(d));
            py::dict out;
            out["dates"] = dates;
            out["assets"] = p.assets();
            out["returns"] = p.returns();
            out["frequency"] = std::string(to_string(p.frequency()));
            return out;
        },
        py::arg("path"), py::arg("decimal") = false, py::arg("drop_missing") = false);

    m.def(
        "excess_risk",
        [](const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, const std::vector<std::size_t>& q_grid,
           std::size_t trials, const std::vector<double>& betas, std::uint64_t seed, double confidence) {
            TheoryConfig c;
            c.distribution = {mean, cov};
            c.q_grid = q_grid;
            c.trials = trials;
            c.betas = betas;
            c.seed = seed;
            c.confidence = confidence;
            c.validate();
            const auto res = excess_risk_experiment(c);
            py::list rows;
            for (const auto& r : res.rows) {
                py::dict d;
                d["q"] = r.q;
                d["excess"] = r.excess;
                d["stderr"] = r.excess_stderr;
                d["min_excess"] = r.min_excess;
                d["bound"] = r.bound;
                d["dropped"] = r.dropped;
                rows.append(d);
            }
            return rows;
        },
        py::arg("mean"), py::arg("covariance"), py::arg("q_grid"), py::arg("trials") = 200,
        py::arg("betas") = std::vector<double>{0.9, 0.99}, py::arg("seed") = 0, py::arg("confidence") = 0.05);

    m.def(
        "run",
        [](const std::string& command, const std::filesystem::path& config) {
            std::ostringstream log, err;
            const int code = app::run_guarded(
                [&]() -> int {
                    const auto c = app::load_config(config);
                    if (command == "optimize") return app::cmd_optimize(c, log);
                    if (command == "backtest") return app::cmd_backtest(c, log);
                    if (command == "theory") return app::cmd_theory(c, log);
                    if (command == "validate-data") return app::cmd_validate_data(c, log);
                    throw ValidationError("unknown command '" + command + "'");
                },
                err);
            return py::make_tuple(code, log.str(), err.str());
        },
        py::arg("command"), py::arg("config"), "Runs a CLI command; returns (exit code, stdout, stderr).");
}
