#include "drmcvar/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "drmcvar/error.hpp"
#include "drmcvar/estimators.hpp"

namespace drmcvar {
namespace {

using Entry = ProgramBuilder::Entry;

// Simplex rows and the cone (v, G w) shared by the exact Gaussian programs.
struct GaussianProgram {
    ProgramBuilder builder;
    std::size_t w0 = 0;
    std::size_t v = 0;
};

void add_gaussian_core(GaussianProgram& p, const GaussianSpec& spec) {
    const auto n = static_cast<Eigen::Index>(spec.dimension());
    auto& b = p.builder;
    p.w0 = b.add_variables(labels::weights, static_cast<std::size_t>(n));
    p.v = b.add_variable("stddev");
    std::vector<Entry> sum;
    for (Eigen::Index j = 0; j < n; ++j) sum.emplace_back(p.w0 + static_cast<std::size_t>(j), 1.0);
    b.add_equality(sum, 1.0);
    for (Eigen::Index j = 0; j < n; ++j) b.add_less_equal({{p.w0 + static_cast<std::size_t>(j), -1.0}}, 0.0);
    const Eigen::MatrixXd g = psd_factor(spec.covariance);
    std::vector<std::vector<Entry>> rows{{{p.v, -1.0}}};
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        std::vector<Entry> row;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (g(i, j) != 0.0) row.emplace_back(p.w0 + static_cast<std::size_t>(j), -g(i, j));
        }
        rows.push_back(std::move(row));
    }
    b.add_second_order(rows, std::vector<double>(rows.size(), 0.0));
}

Eigen::MatrixXd draw(std::mt19937_64& rng, const GaussianSpec& spec, const Eigen::MatrixXd& factor,
                     std::size_t q) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd z(static_cast<Eigen::Index>(q), factor.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = normal(rng);
    }
    Eigen::MatrixXd r = z * factor;
    r.rowwise() += spec.mean.transpose();
    return r;
}

} // namespace

void GaussianSpec::validate() const {
    const auto n = mean.size();
    if (n < 1) throw ValidationError("Gaussian spec needs at least one asset");
    if (covariance.rows() != n || covariance.cols() != n) {
        throw ValidationError("Gaussian spec covariance must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (!mean.allFinite() || !covariance.allFinite()) {
        throw ValidationError("Gaussian spec contains non-finite values");
    }
    psd_factor(covariance);  // throws when not symmetric PSD
}

void TheoryConfig::validate() const {
    distribution.validate();
    if (q_grid.empty()) throw ValidationError("theory Q grid is empty");
    for (std::size_t i = 0; i < q_grid.size(); ++i) {
        if (q_grid[i] < 2) throw ValidationError("theory Q values must be at least 2");
        if (i > 0 && !(q_grid[i] > q_grid[i - 1])) {
            throw ValidationError("theory Q grid must be strictly increasing");
        }
    }
    if (trials < 1) throw ValidationError("theory needs at least one trial");
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw ValidationError("theory confidence must lie in (0, 1)");
    }
    if (betas.empty()) throw ValidationError("theory needs at least one beta");
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw ValidationError("theory betas must lie in (0, 1)");
        if (i > 0 && !(betas[i] > betas[i - 1])) {
            throw ValidationError("theory betas must be strictly increasing");
        }
    }
    solver.validate();
}

double gaussian_cvar_factor(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("beta must lie in (0, 1)");
    const boost::math::normal standard;
    const double z = boost::math::quantile(standard, beta);
    return boost::math::pdf(standard, z) / (1.0 - beta);
}

double gaussian_cvar(const GaussianSpec& spec, const Eigen::VectorXd& w, double beta) {
    const double var = std::max(0.0, w.dot(spec.covariance * w));
    return -spec.mean.dot(w) + gaussian_cvar_factor(beta) * std::sqrt(var);
}

double true_loss(const GaussianSpec& spec, const CVaRLadder& ladder, const Eigen::VectorXd& w) {
    double d = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        const double c = ladder.baselines[k];
        if (std::abs(c) < 1e-14) {
            throw ValidationError("true loss is undefined with a zero CVaR baseline");
        }
        d = std::max(d, (gaussian_cvar(spec, w, ladder.betas[k]) - c) / std::abs(c));
    }
    return d - spec.mean.dot(w);
}

CVaRLadder gaussian_baselines(const GaussianSpec& spec, const std::vector<double>& betas,
                              const SolverSettings& settings) {
    spec.validate();
    CVaRLadder ladder;
    ladder.betas = betas;
    for (double beta : betas) {
        GaussianProgram p;
        add_gaussian_core(p, spec);
        for (std::size_t j = 0; j < spec.dimension(); ++j) p.builder.set_cost(p.w0 + j, -spec.mean[static_cast<Eigen::Index>(j)]);
        p.builder.set_cost(p.v, gaussian_cvar_factor(beta));
        const SolverResult r = solve(p.builder.build(), settings);
        if (r.status != SolveStatus::optimal) {
            throw SolverError("Gaussian baseline for beta " + std::to_string(beta) + " ended " +
                              std::string(to_string(r.status)));
        }
        ladder.baselines.push_back(r.primal_objective);
        ladder.statuses.push_back(r.status);
    }
    ladder.validate();
    return ladder;
}

PortfolioSolution gaussian_optimum(const GaussianSpec& spec, const CVaRLadder& ladder,
                                   const SolverSettings& settings) {
    ladder.validate();
    GaussianProgram p;
    auto& b = p.builder;
    const std::size_t d = b.add_variable(labels::deviation);
    add_gaussian_core(p, spec);
    b.set_cost(d, 1.0);
    const auto n = spec.dimension();
    for (std::size_t j = 0; j < n; ++j) b.set_cost(p.w0 + j, -spec.mean[static_cast<Eigen::Index>(j)]);
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        std::vector<Entry> row;
        for (std::size_t j = 0; j < n; ++j) row.emplace_back(p.w0 + j, -spec.mean[static_cast<Eigen::Index>(j)]);
        row.emplace_back(p.v, gaussian_cvar_factor(ladder.betas[k]));
        row.emplace_back(d, -std::abs(ladder.baselines[k]));
        b.add_less_equal(row, ladder.baselines[k]);
    }
    return solve_portfolio(b.build(), settings);
}

double excess_risk_bound(double kappa, double sigma, double confidence, std::size_t q) {
    const double root_q = std::sqrt(static_cast<double>(q));
    return 4.0 * kappa / root_q + std::sqrt(2.0 * sigma * sigma) * std::sqrt(std::log(1.0 / confidence)) / root_q;
}

ExcessRiskResult excess_risk_experiment(const TheoryConfig& config) {
    config.validate();
    const GaussianSpec& spec = config.distribution;
    ExcessRiskResult out;
    out.kappa = std::sqrt(spec.mean.squaredNorm() + spec.covariance.trace());
    // max of w^T Sigma w over the simplex is attained at a vertex.
    out.sigma = std::sqrt(std::max(0.0, spec.covariance.diagonal().maxCoeff()));
    out.ladder = gaussian_baselines(spec, config.betas, config.solver);
    const PortfolioSolution opt = gaussian_optimum(spec, out.ladder, config.solver);
    if (opt.status != SolveStatus::optimal) {
        throw SolverError("exact Gaussian problem ended " + std::string(to_string(opt.status)));
    }
    out.w_star = opt.weights->values();
    out.optimal_loss = true_loss(spec, out.ladder, out.w_star);

    const Eigen::MatrixXd factor = psd_factor(spec.covariance);
    for (std::size_t qi = 0; qi < config.q_grid.size(); ++qi) {
        const std::size_t q = config.q_grid[qi];
        ExcessRiskTrial row;
        row.q = q;
        row.bound = excess_risk_bound(out.kappa, out.sigma, config.confidence, q);
        std::vector<double> excess;
        for (std::size_t t = 0; t < config.trials; ++t) {
            // Independent stream per (Q, trial) so replications do not depend on order.
            std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                              static_cast<std::uint32_t>(q), static_cast<std::uint32_t>(t)};
            std::mt19937_64 rng(seq);
            const Eigen::MatrixXd sample = draw(rng, spec, factor, q);
            const Eigen::VectorXd mu_hat = sample.colwise().mean().transpose();
            PortfolioSolution sol;
            try {
                sol = solve_portfolio(build_mean_multi_cvar(out.ladder, sample, mu_hat), config.solver);
            } catch (const SolverError&) {
                sol.status = SolveStatus::max_iter;
            }
            if (sol.status != SolveStatus::optimal) {
                ++row.dropped;
                continue;
            }
            excess.push_back(true_loss(spec, out.ladder, sol.weights->values()) - out.optimal_loss);
        }
        row.trials = excess.size();
        if (!excess.empty()) {
            double sum = 0.0;
            for (double e : excess) sum += e;
            row.excess = sum / static_cast<double>(excess.size());
            row.min_excess = *std::min_element(excess.begin(), excess.end());
            if (excess.size() > 1) {
                double ss = 0.0;
                for (double e : excess) ss += (e - row.excess) * (e - row.excess);
                row.excess_stderr = std::sqrt(ss / static_cast<double>(excess.size() - 1) /
                                              static_cast<double>(excess.size()));
            }
        }
        out.rows.push_back(row);
    }
    return out;
}

std::string excess_risk_csv(const ExcessRiskResult& result) {
    std::ostringstream out;
    out.precision(12);
    out << "Q,excess,bound,trials,dropped,excess_stderr,min_excess\n";
    for (const auto& r : result.rows) {
        out << r.q << ',' << r.excess << ',' << r.bound << ',' << r.trials << ',' << r.dropped << ','
            << r.excess_stderr << ',' << r.min_excess << '\n';
    }
    return out.str();
}

std::string to_json(const ExcessRiskResult& result, int indent) {
    nlohmann::json j;
    j["kappa"] = result.kappa;
    j["sigma"] = result.sigma;
    j["betas"] = result.ladder.betas;
    j["baselines"] = result.ladder.baselines;
    j["w_star"] = std::vector<double>(result.w_star.data(), result.w_star.data() + result.w_star.size());
    j["optimal_loss"] = result.optimal_loss;
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& r : result.rows) {
        rows.push_back({{"Q", r.q},
                        {"excess", r.excess},
                        {"bound", r.bound},
                        {"trials", r.trials},
                        {"dropped", r.dropped},
                        {"excess_stderr", r.excess_stderr},
                        {"min_excess", r.min_excess}});
    }
    return j.dump(indent);
}

} // namespace drmcvar
