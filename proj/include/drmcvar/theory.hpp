#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drmcvar/conic.hpp"
#include "drmcvar/problems.hpp"

namespace drmcvar {

// Returns r ~ N(mean, covariance) per period.
struct GaussianSpec {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }
    void validate() const;
};

struct TheoryConfig {
    GaussianSpec distribution;
    std::vector<std::size_t> q_grid;
    std::size_t trials = 200;
    double confidence = 0.05;  // failure probability in the bound's log(1/delta) term
    std::vector<double> betas{0.9, 0.99};
    std::uint64_t seed = 0;
    SolverSettings solver;

    void validate() const;
};

struct ExcessRiskTrial {
    std::size_t q = 0;
    std::size_t trials = 0;   // replications that solved
    std::size_t dropped = 0;  // replications whose solve was not optimal
    double excess = 0.0;      // mean over replications
    double excess_stderr = 0.0;
    double min_excess = 0.0;
    double bound = 0.0;
};

struct ExcessRiskResult {
    std::vector<ExcessRiskTrial> rows;
    double kappa = 0.0;  // sqrt(E ||r||^2)
    double sigma = 0.0;  // sub-Gaussian parameter of the loss over the simplex
    CVaRLadder ladder;   // exact Gaussian baselines
    Eigen::VectorXd w_star;
    double optimal_loss = 0.0;
};

// phi(Phi^{-1}(beta)) / (1 - beta): CVaR of a standard normal loss.
double gaussian_cvar_factor(double beta);

// CVaR_beta of the loss -w^T r under the Gaussian spec.
double gaussian_cvar(const GaussianSpec& spec, const Eigen::VectorXd& w, double beta);

// Mean-multi-CVaR loss d(w) - mu^T w evaluated with exact Gaussian CVaRs,
// d(w) = max_k (CVaR_k(w) - C_k) / |C_k|.
double true_loss(const GaussianSpec& spec, const CVaRLadder& ladder, const Eigen::VectorXd& w);

// Minimum Gaussian CVaR over the simplex for each beta.
CVaRLadder gaussian_baselines(const GaussianSpec& spec, const std::vector<double>& betas,
                              const SolverSettings& settings = {});

// Minimizer of true_loss over the simplex.
PortfolioSolution gaussian_optimum(const GaussianSpec& spec, const CVaRLadder& ladder,
                                   const SolverSettings& settings = {});

// 4 kappa / sqrt(Q) + sqrt(2 sigma^2) sqrt(log(1/confidence)) / sqrt(Q)
double excess_risk_bound(double kappa, double sigma, double confidence, std::size_t q);

// For each Q: draws Q i.i.d. returns per replication, solves the sampled
// mean-multi-CVaR problem (sample mean, exact baselines) for w_hat, and
// averages true_loss(w_hat) - true_loss(w*).
ExcessRiskResult excess_risk_experiment(const TheoryConfig& config);

std::string excess_risk_csv(const ExcessRiskResult& result);
std::string to_json(const ExcessRiskResult& result, int indent = 2);

} // namespace drmcvar
