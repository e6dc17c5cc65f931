#include "drmcvar/problems.hpp"

#include <cmath>
#include <sstream>

#include "drmcvar/error.hpp"

namespace drmcvar {
namespace {

using Entry = ProgramBuilder::Entry;

void check_beta(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw ValidationError("probability level beta must lie in (0, 1), got " + std::to_string(beta));
    }
}

void check_scenarios(const Eigen::MatrixXd& r) {
    if (r.rows() < 1 || r.cols() < 1) {
        throw ValidationError("scenario matrix needs at least one row and one asset");
    }
    if (!r.allFinite()) throw ValidationError("scenario matrix contains non-finite values");
}

void check_mu(const Eigen::VectorXd& mu, const Eigen::MatrixXd& r) {
    if (mu.size() != r.cols()) {
        throw ValidationError("expected-return vector has " + std::to_string(mu.size()) +
                              " entries for " + std::to_string(r.cols()) + " assets");
    }
    if (!mu.allFinite()) throw ValidationError("expected returns contain non-finite values");
}

void check_delta(double delta) {
    if (!(delta >= 0.0) || !std::isfinite(delta)) {
        throw ValidationError("uncertainty radius delta must be finite and nonnegative");
    }
}

// w variables with sum w = 1 and w >= 0.
std::size_t add_simplex(ProgramBuilder& b, Eigen::Index n) {
    const std::size_t w0 = b.add_variables(labels::weights, static_cast<std::size_t>(n));
    std::vector<Entry> sum;
    for (Eigen::Index j = 0; j < n; ++j) sum.emplace_back(w0 + static_cast<std::size_t>(j), 1.0);
    b.add_equality(sum, 1.0);
    for (Eigen::Index j = 0; j < n; ++j) b.add_less_equal({{w0 + static_cast<std::size_t>(j), -1.0}}, 0.0);
    return w0;
}

// u_q >= -w^T r_q - alpha and u_q >= 0, for q = 1..Q.
void add_hinges(ProgramBuilder& b, const Eigen::MatrixXd& r, std::size_t w0, std::size_t alpha,
                std::size_t u0) {
    const Eigen::Index q = r.rows(), n = r.cols();
    for (Eigen::Index i = 0; i < q; ++i) {
        std::vector<Entry> row;
        row.reserve(static_cast<std::size_t>(n) + 2);
        row.emplace_back(u0 + static_cast<std::size_t>(i), -1.0);
        row.emplace_back(alpha, -1.0);
        for (Eigen::Index j = 0; j < n; ++j) row.emplace_back(w0 + static_cast<std::size_t>(j), -r(i, j));
        b.add_less_equal(row, 0.0);
    }
    for (Eigen::Index i = 0; i < q; ++i) b.add_less_equal({{u0 + static_cast<std::size_t>(i), -1.0}}, 0.0);
}

void warn_degenerate_tail(ProgramBuilder& b, double beta, Eigen::Index q) {
    if (static_cast<double>(q) * (1.0 - beta) < 1.0) {
        std::ostringstream msg;
        msg << "beta " << beta << " leaves Q(1-beta) = " << static_cast<double>(q) * (1.0 - beta)
            << " < 1 tail scenarios";
        b.warn(msg.str());
    }
}

ProgramBuilder min_cvar_builder(double beta, const Eigen::MatrixXd& r) {
    check_beta(beta);
    check_scenarios(r);
    ProgramBuilder b;
    const Eigen::Index q = r.rows();
    const std::size_t w0 = add_simplex(b, r.cols());
    const std::size_t alpha = b.add_variables(labels::alpha, 1);
    const std::size_t u0 = b.add_variables(labels::hinge, static_cast<std::size_t>(q));
    b.set_cost(alpha, 1.0);
    const double scale = 1.0 / (static_cast<double>(q) * (1.0 - beta));
    for (Eigen::Index i = 0; i < q; ++i) b.set_cost(u0 + static_cast<std::size_t>(i), scale);
    add_hinges(b, r, w0, alpha, u0);
    warn_degenerate_tail(b, beta, q);
    return b;
}

ProgramBuilder multi_cvar_builder(const CVaRLadder& ladder, const Eigen::MatrixXd& r,
                                  const Eigen::VectorXd& mu) {
    ladder.validate();
    check_scenarios(r);
    check_mu(mu, r);
    if (ladder.size() == 0) throw ValidationError("CVaR ladder is empty");
    ProgramBuilder b;
    const Eigen::Index q = r.rows(), n = r.cols();
    const std::size_t k = ladder.size();
    const std::size_t d = b.add_variable(labels::deviation);
    const std::size_t w0 = add_simplex(b, n);
    const std::size_t a0 = b.add_variables(labels::alpha, k);
    const std::size_t t0 = b.add_variables(labels::hinge, k * static_cast<std::size_t>(q));
    b.set_cost(d, 1.0);
    for (Eigen::Index j = 0; j < n; ++j) b.set_cost(w0 + static_cast<std::size_t>(j), -mu[j]);

    for (std::size_t i = 0; i < k; ++i) {
        const double beta = ladder.betas[i];
        const double c = ladder.baselines[i];
        const std::size_t tk = t0 + i * static_cast<std::size_t>(q);
        const double scale = 1.0 / (static_cast<double>(q) * (1.0 - beta));
        std::vector<Entry> row;
        row.reserve(static_cast<std::size_t>(q) + 2);
        row.emplace_back(a0 + i, 1.0);
        for (Eigen::Index s = 0; s < q; ++s) row.emplace_back(tk + static_cast<std::size_t>(s), scale);
        row.emplace_back(d, -std::abs(c));
        b.add_less_equal(row, c);
        if (c == 0.0) {
            b.warn("baseline for beta " + std::to_string(beta) +
                   " is exactly zero; its deviation bound does not depend on d");
        }
        warn_degenerate_tail(b, beta, q);
    }
    for (std::size_t i = 0; i < k; ++i) {
        add_hinges(b, r, w0, a0 + i, t0 + i * static_cast<std::size_t>(q));
    }
    return b;
}

std::vector<double> values_of(const ConicProgram& p, const Eigen::VectorXd& x, const std::string& name) {
    std::vector<double> out;
    for (auto i : p.labels_of(name)) out.push_back(x[static_cast<Eigen::Index>(i)]);
    return out;
}

} // namespace

void CVaRLadder::validate() const {
    if (baselines.size() != betas.size()) {
        throw ValidationError("CVaR ladder has " + std::to_string(betas.size()) + " betas but " +
                              std::to_string(baselines.size()) + " baselines");
    }
    if (!statuses.empty() && statuses.size() != betas.size()) {
        throw ValidationError("CVaR ladder status count does not match its betas");
    }
    for (std::size_t i = 0; i < betas.size(); ++i) {
        check_beta(betas[i]);
        if (i > 0 && !(betas[i] > betas[i - 1])) {
            throw ValidationError("CVaR ladder betas must be strictly increasing");
        }
        if (!std::isfinite(baselines[i])) throw ValidationError("CVaR ladder baseline is not finite");
    }
}

ConicProgram build_min_cvar(double beta, const Eigen::MatrixXd& scenarios) {
    return min_cvar_builder(beta, scenarios).build();
}

ConicProgram build_min_cvar(double beta, const ReturnPanel& panel) {
    return build_min_cvar(beta, panel.returns());
}

CVaRLadder solve_baselines(const std::vector<double>& betas, const Eigen::MatrixXd& scenarios,
                           const SolverSettings& settings) {
    if (betas.empty()) throw ValidationError("at least one beta is required");
    CVaRLadder ladder;
    ladder.betas = betas;
    ladder.baselines.assign(betas.size(), 0.0);
    ladder.validate();
    for (std::size_t i = 0; i < betas.size(); ++i) {
        const ConicProgram p = build_min_cvar(betas[i], scenarios);
        const SolverResult r = solve(p, settings);
        if (r.status != SolveStatus::optimal) {
            throw SolverError("minimum-CVaR solve for beta " + std::to_string(betas[i]) + " ended " +
                              std::string(to_string(r.status)) +
                              (r.diagnostics.empty() ? "" : ": " + r.diagnostics));
        }
        ladder.baselines[i] = r.primal_objective;
        ladder.statuses.push_back(r.status);
    }
    return ladder;
}

CVaRLadder solve_baselines(const std::vector<double>& betas, const ReturnPanel& panel,
                           const SolverSettings& settings) {
    return solve_baselines(betas, panel.returns(), settings);
}

ConicProgram build_mean_cvar(double beta, const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& mu,
                             double c) {
    check_mu(mu, scenarios);
    if (!std::isfinite(c)) throw ValidationError("required return c must be finite");
    ProgramBuilder b = min_cvar_builder(beta, scenarios);
    std::vector<Entry> row;
    for (Eigen::Index j = 0; j < mu.size(); ++j) row.emplace_back(static_cast<std::size_t>(j), -mu[j]);
    b.add_less_equal(row, -c);
    return b.build();
}

ConicProgram build_mean_cvar(double beta, const ReturnPanel& panel, const Eigen::VectorXd& mu, double c) {
    return build_mean_cvar(beta, panel.returns(), mu, c);
}

ConicProgram build_mean_multi_cvar(const CVaRLadder& ladder, const Eigen::MatrixXd& scenarios,
                                   const Eigen::VectorXd& mu) {
    return multi_cvar_builder(ladder, scenarios, mu).build();
}

ConicProgram build_mean_multi_cvar(const CVaRLadder& ladder, const ReturnPanel& panel,
                                   const Eigen::VectorXd& mu) {
    return build_mean_multi_cvar(ladder, panel.returns(), mu);
}

ConicProgram build_dr_mcvar_ellipsoidal(const CVaRLadder& ladder, const Eigen::MatrixXd& scenarios,
                                        const MeanEstimate& mean, double delta) {
    check_delta(delta);
    const Eigen::Index n = scenarios.cols();
    if (mean.sigma_mu.rows() != n || mean.sigma_mu.cols() != n) {
        throw ValidationError("sigma_mu dimension does not match the number of assets");
    }
    ProgramBuilder b = multi_cvar_builder(ladder, scenarios, mean.mu_hat);
    const Eigen::MatrixXd g = psd_factor(mean.sigma_mu);
    const std::size_t w0 = 1;  // multi_cvar_builder places d first, then w
    const std::size_t eta = b.add_variable(labels::epigraph);
    b.set_cost(eta, delta);
    std::vector<std::vector<Entry>> rows;
    std::vector<double> rhs;
    rows.push_back({{eta, -1.0}});
    rhs.push_back(0.0);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        std::vector<Entry> row;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (g(i, j) != 0.0) row.emplace_back(w0 + static_cast<std::size_t>(j), -g(i, j));
        }
        rows.push_back(std::move(row));
        rhs.push_back(0.0);
    }
    b.add_second_order(rows, rhs);
    return b.build();
}

ConicProgram build_dr_mcvar_ellipsoidal(const CVaRLadder& ladder, const ReturnPanel& panel,
                                        const MeanEstimate& mean, double delta) {
    return build_dr_mcvar_ellipsoidal(ladder, panel.returns(), mean, delta);
}

ConicProgram build_dr_mcvar_rectangular(const CVaRLadder& ladder, const Eigen::MatrixXd& scenarios,
                                        const Eigen::VectorXd& mu_hat, double delta) {
    check_delta(delta);
    check_mu(mu_hat, scenarios);
    const Eigen::VectorXd shifted = mu_hat.array() - delta;
    return multi_cvar_builder(ladder, scenarios, shifted).build();
}

ConicProgram build_dr_mcvar_rectangular(const CVaRLadder& ladder, const ReturnPanel& panel,
                                        const Eigen::VectorXd& mu_hat, double delta) {
    return build_dr_mcvar_rectangular(ladder, panel.returns(), mu_hat, delta);
}

PortfolioSolution decode(const SolverResult& result, const ConicProgram& program) {
    PortfolioSolution out;
    out.status = result.status;
    out.kkt = result.residuals;
    out.iterations = result.iterations;
    out.warnings = program.warnings;
    out.diagnostics = result.diagnostics;
    const auto& widx = program.labels_of(labels::weights);
    if (result.status != SolveStatus::optimal) {
        out.objective_value = result.primal_objective;
        return out;
    }

    out.objective_value = result.primal_objective;
    Eigen::VectorXd w(static_cast<Eigen::Index>(widx.size()));
    for (std::size_t i = 0; i < widx.size(); ++i) {
        w[static_cast<Eigen::Index>(i)] = result.primal[static_cast<Eigen::Index>(widx[i])];
    }
    const double drift = std::abs(w.sum() - 1.0);
    if (drift > 1e-6 || w.minCoeff() < -1e-6) {
        std::ostringstream msg;
        msg << "decoded weights drift from the simplex (|sum - 1| = " << drift
            << ", min weight = " << w.minCoeff() << ")";
        throw SolverError(msg.str());
    }
    w = w.cwiseMax(0.0);
    w /= w.sum();
    out.weights = PortfolioWeights(w);

    if (program.labels.count(labels::deviation)) {
        out.d = result.primal[static_cast<Eigen::Index>(program.label(labels::deviation))];
    }
    if (program.labels.count(labels::alpha)) out.alphas = values_of(program, result.primal, labels::alpha);
    if (program.labels.count(labels::epigraph)) {
        const auto eta = static_cast<Eigen::Index>(program.label(labels::epigraph));
        out.robust_penalty = program.objective[eta] * result.primal[eta];
    }
    return out;
}

PortfolioSolution solve_portfolio(const ConicProgram& program, const SolverSettings& settings) {
    return decode(solve(program, settings), program);
}

Eigen::VectorXd worst_case_mean(const Eigen::VectorXd& mu_hat, const Eigen::MatrixXd& sigma,
                                const Eigen::VectorXd& w, double delta) {
    check_delta(delta);
    if (sigma.rows() != mu_hat.size() || sigma.cols() != mu_hat.size() || w.size() != mu_hat.size()) {
        throw ValidationError("worst_case_mean: dimension mismatch");
    }
    const Eigen::VectorXd sw = sigma * w;
    const double var = w.dot(sw);
    if (!(var > 0.0)) throw ValidationError("worst_case_mean needs w^T sigma w > 0");
    return mu_hat - delta * sw / std::sqrt(var);
}

} // namespace drmcvar
