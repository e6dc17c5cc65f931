#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drmcvar/conic.hpp"
#include "drmcvar/cvar.hpp"
#include "drmcvar/data.hpp"
#include "drmcvar/estimators.hpp"

namespace drmcvar {

// Probability levels with their minimum-CVaR baselines.
struct CVaRLadder {
    std::vector<double> betas;
    std::vector<double> baselines;
    std::vector<SolveStatus> statuses;

    std::size_t size() const { return betas.size(); }
    // Betas strictly increasing in (0, 1), one finite baseline per beta.
    void validate() const;
};

struct PortfolioSolution {
    std::optional<PortfolioWeights> weights;
    double objective_value = 0.0;
    std::optional<double> d;
    std::vector<double> alphas;
    // delta * ||G w|| for ellipsoidal programs.
    std::optional<double> robust_penalty;
    SolveStatus status = SolveStatus::max_iter;
    KktResiduals kkt;
    int iterations = 0;
    std::vector<std::string> warnings;
    std::string diagnostics;
};

// Variable labels used by every builder.
namespace labels {
inline const std::string weights = "w";
inline const std::string alpha = "alpha";
inline const std::string hinge = "u";
inline const std::string deviation = "d";
inline const std::string epigraph = "epigraph";
} // namespace labels

// Scenarios are Q x N simple returns; each builder also accepts a ReturnPanel.

// min alpha + (Q(1-beta))^{-1} sum u_q
// s.t. u_q >= -w^T r_q - alpha, u >= 0, sum w = 1, w >= 0
ConicProgram build_min_cvar(double beta, const Eigen::MatrixXd& scenarios);
ConicProgram build_min_cvar(double beta, const ReturnPanel& panel);

// Solves build_min_cvar for each beta. Throws SolverError naming the beta
// whose solve was not optimal.
CVaRLadder solve_baselines(const std::vector<double>& betas, const Eigen::MatrixXd& scenarios,
                           const SolverSettings& settings = {});
CVaRLadder solve_baselines(const std::vector<double>& betas, const ReturnPanel& panel,
                           const SolverSettings& settings = {});

// Min-CVaR program plus mu^T w >= c.
ConicProgram build_mean_cvar(double beta, const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& mu,
                             double c);
ConicProgram build_mean_cvar(double beta, const ReturnPanel& panel, const Eigen::VectorXd& mu, double c);

// min d - mu^T w
// s.t. alpha_k + (Q(1-beta_k))^{-1} sum_q t_qk <= d |C_k| + C_k,
//      t_qk >= -w^T r_q - alpha_k, t >= 0, sum w = 1, w >= 0
// Hinge variables are labelled "u" in (k, q) order.
ConicProgram build_mean_multi_cvar(const CVaRLadder& ladder, const Eigen::MatrixXd& scenarios,
                                   const Eigen::VectorXd& mu);
ConicProgram build_mean_multi_cvar(const CVaRLadder& ladder, const ReturnPanel& panel,
                                   const Eigen::VectorXd& mu);

// Mean-multi-CVaR with objective d - mu_hat^T w + delta ||G w||, G^T G = sigma_mu
// (regularized), through an epigraph variable and one second-order cone.
ConicProgram build_dr_mcvar_ellipsoidal(const CVaRLadder& ladder, const Eigen::MatrixXd& scenarios,
                                        const MeanEstimate& mean, double delta);
ConicProgram build_dr_mcvar_ellipsoidal(const CVaRLadder& ladder, const ReturnPanel& panel,
                                        const MeanEstimate& mean, double delta);

// Mean-multi-CVaR with the box worst case of the mean: d - (mu_hat - delta 1)^T w.
ConicProgram build_dr_mcvar_rectangular(const CVaRLadder& ladder, const Eigen::MatrixXd& scenarios,
                                        const Eigen::VectorXd& mu_hat, double delta);
ConicProgram build_dr_mcvar_rectangular(const CVaRLadder& ladder, const ReturnPanel& panel,
                                        const Eigen::VectorXd& mu_hat, double delta);

// Extracts portfolio quantities through the program's labels. Weights are
// present only on optimal exits; they are clipped at zero and renormalized
// when the solver drift is within 1e-6, otherwise SolverError is thrown.
PortfolioSolution decode(const SolverResult& result, const ConicProgram& program);

// solve() followed by decode().
PortfolioSolution solve_portfolio(const ConicProgram& program, const SolverSettings& settings = {});

// Minimizer of w^T mu over the ellipsoid (mu - mu_hat)^T sigma^{-1} (mu - mu_hat) <= delta^2:
// mu_hat - delta sigma w / sqrt(w^T sigma w). Requires w^T sigma w > 0.
Eigen::VectorXd worst_case_mean(const Eigen::VectorXd& mu_hat, const Eigen::MatrixXd& sigma,
                                const Eigen::VectorXd& w, double delta);

} // namespace drmcvar
