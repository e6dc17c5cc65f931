#include "drmcvar/cvar.hpp"

#include <algorithm>
#include <cmath>

#include "drmcvar/error.hpp"

namespace drmcvar {

PortfolioWeights::PortfolioWeights(Eigen::VectorXd w) : w_(std::move(w)) {
    if (w_.size() == 0) {
        throw ValidationError("portfolio weights are empty");
    }
    if (!w_.allFinite()) {
        throw ValidationError("portfolio weights contain non-finite values");
    }
    if (std::abs(w_.sum() - 1.0) > sum_tolerance) {
        throw ValidationError("portfolio weights sum to " + std::to_string(w_.sum()) +
                              ", expected 1");
    }
    if (w_.minCoeff() < -negativity_tolerance) {
        throw ValidationError("portfolio weights must be long-only (min weight " +
                              std::to_string(w_.minCoeff()) + ")");
    }
}

PortfolioWeights PortfolioWeights::equal(std::size_t n) {
    if (n == 0) {
        throw ValidationError("equal weights need at least one asset");
    }
    return PortfolioWeights(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                                      1.0 / static_cast<double>(n)));
}

double portfolio_loss(const Eigen::VectorXd& w, const Eigen::VectorXd& r) {
    if (w.size() != r.size()) {
        throw ValidationError("weight and return dimensions differ (" + std::to_string(w.size()) +
                              " vs " + std::to_string(r.size()) + ")");
    }
    return -w.dot(r);
}

double portfolio_loss(const PortfolioWeights& w, const Eigen::VectorXd& r) {
    return portfolio_loss(w.values(), r);
}

Eigen::VectorXd portfolio_losses(const PortfolioWeights& w, const Eigen::MatrixXd& scenarios) {
    if (static_cast<std::size_t>(scenarios.cols()) != w.size()) {
        throw ValidationError("weight and return dimensions differ");
    }
    return -(scenarios * w.values());
}

Eigen::VectorXd portfolio_losses(const PortfolioWeights& w, const ReturnPanel& panel) {
    return portfolio_losses(w, panel.returns());
}

namespace {

void check_beta(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw ValidationError("probability level beta must lie in (0, 1), got " +
                              std::to_string(beta));
    }
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

} // namespace

double auxiliary_f(std::span<const double> losses, double alpha, double beta) {
    check_beta(beta);
    if (losses.empty()) {
        throw ValidationError("auxiliary function needs at least one scenario");
    }
    double tail = 0.0;
    for (double l : losses) tail += std::max(l - alpha, 0.0);
    return alpha + tail / (static_cast<double>(losses.size()) * (1.0 - beta));
}

double auxiliary_f(const PortfolioWeights& w, double alpha, double beta, const ReturnPanel& panel) {
    const Eigen::VectorXd l = portfolio_losses(w, panel);
    return auxiliary_f(as_span(l), alpha, beta);
}

CvarResult empirical_cvar(std::span<const double> losses, double beta) {
    check_beta(beta);
    if (losses.empty()) {
        throw ValidationError("CVaR needs at least one scenario");
    }
    std::vector<double> sorted(losses.begin(), losses.end());
    std::sort(sorted.begin(), sorted.end());
    const double q = static_cast<double>(sorted.size());
    const double tail_mass = q * (1.0 - beta);
    const double tie = 1e-9 * std::max(1.0, tail_mass);

    // The right slope of F at alpha is 1 - #(loss > alpha) / tail_mass, so the
    // minimum sits at the first breakpoint where #(loss > alpha) <= tail_mass.
    // When the count equals tail_mass exactly, F is flat up to the next breakpoint.
    CvarResult out;
    out.degenerate_tail = tail_mass < 1.0;
    const std::size_t count = sorted.size();
    std::size_t j = 0;
    while (j < count) {
        std::size_t k = j;
        while (k + 1 < count && sorted[k + 1] == sorted[j]) ++k;
        const double above = static_cast<double>(count - k - 1);
        if (above <= tail_mass + tie) {
            out.alpha_lo = sorted[j];
            out.alpha_hi = (std::abs(above - tail_mass) <= tie && k + 1 < count) ? sorted[k + 1]
                                                                                 : sorted[j];
            break;
        }
        j = k + 1;
    }
    out.cvar = auxiliary_f(losses, out.alpha_lo, beta);
    return out;
}

CvarResult empirical_cvar(const PortfolioWeights& w, double beta, const Eigen::MatrixXd& scenarios) {
    const Eigen::VectorXd l = portfolio_losses(w, scenarios);
    return empirical_cvar(as_span(l), beta);
}

CvarResult empirical_cvar(const PortfolioWeights& w, double beta, const ReturnPanel& panel) {
    return empirical_cvar(w, beta, panel.returns());
}

double empirical_var(std::span<const double> losses, double beta) {
    check_beta(beta);
    if (losses.empty()) {
        throw ValidationError("VaR needs at least one scenario");
    }
    std::vector<double> sorted(losses.begin(), losses.end());
    std::sort(sorted.begin(), sorted.end());
    const double q = static_cast<double>(sorted.size());
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        // Fraction of losses <= sorted[j] counts every tie.
        std::size_t k = j;
        while (k + 1 < sorted.size() && sorted[k + 1] == sorted[j]) ++k;
        if (static_cast<double>(k + 1) / q > beta) {
            return sorted[j];
        }
        j = k;
    }
    return sorted.back();
}

double empirical_var(const PortfolioWeights& w, double beta, const ReturnPanel& panel) {
    const Eigen::VectorXd l = portfolio_losses(w, panel);
    return empirical_var(as_span(l), beta);
}

} // namespace drmcvar
