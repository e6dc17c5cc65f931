#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drmcvar/data.hpp"

namespace drmcvar {

// Long-only weights summing to one.
class PortfolioWeights {
public:
    static constexpr double sum_tolerance = 1e-8;
    static constexpr double negativity_tolerance = 1e-10;

    // Throws ValidationError unless sum(w) = 1 within 1e-8 and w >= -1e-10.
    explicit PortfolioWeights(Eigen::VectorXd w);

    static PortfolioWeights equal(std::size_t n);

    const Eigen::VectorXd& values() const noexcept { return w_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(w_.size()); }
    double operator[](std::size_t i) const { return w_[static_cast<Eigen::Index>(i)]; }

private:
    Eigen::VectorXd w_;
};

// L(w, r) = -w^T r.
double portfolio_loss(const Eigen::VectorXd& w, const Eigen::VectorXd& r);
double portfolio_loss(const PortfolioWeights& w, const Eigen::VectorXd& r);

// Per-scenario losses -R w for a Q x N scenario matrix.
Eigen::VectorXd portfolio_losses(const PortfolioWeights& w, const Eigen::MatrixXd& scenarios);
Eigen::VectorXd portfolio_losses(const PortfolioWeights& w, const ReturnPanel& panel);

// alpha + (Q (1 - beta))^{-1} sum_q max(loss_q - alpha, 0)
double auxiliary_f(std::span<const double> losses, double alpha, double beta);
double auxiliary_f(const PortfolioWeights& w, double alpha, double beta, const ReturnPanel& panel);

struct CvarResult {
    double cvar = 0.0;
    // Closed interval of minimizers of the auxiliary function.
    double alpha_lo = 0.0;
    double alpha_hi = 0.0;
    // Set when Q (1 - beta) < 1, i.e. less than one scenario in the tail.
    bool degenerate_tail = false;
};

// Exact minimization of the auxiliary function over alpha by scanning the
// breakpoints of the piecewise-linear function at the sorted losses.
CvarResult empirical_cvar(std::span<const double> losses, double beta);
CvarResult empirical_cvar(const PortfolioWeights& w, double beta, const ReturnPanel& panel);
CvarResult empirical_cvar(const PortfolioWeights& w, double beta, const Eigen::MatrixXd& scenarios);

// Smallest sample loss alpha with (fraction of losses <= alpha) > beta.
double empirical_var(std::span<const double> losses, double beta);
double empirical_var(const PortfolioWeights& w, double beta, const ReturnPanel& panel);

} // namespace drmcvar
