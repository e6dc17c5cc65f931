#include "drmcvar/estimators.hpp"

#include <cmath>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "drmcvar/error.hpp"

namespace drmcvar {

std::string_view to_string(UncertaintyShape s) {
    switch (s) {
    case UncertaintyShape::ellipsoidal: return "ellipsoidal";
    case UncertaintyShape::rectangular: return "rectangular";
    case UncertaintyShape::none: break;
    }
    return "none";
}

UncertaintyShape uncertainty_shape_from_string(std::string_view s) {
    if (s == "none") return UncertaintyShape::none;
    if (s == "ellipsoidal") return UncertaintyShape::ellipsoidal;
    if (s == "rectangular") return UncertaintyShape::rectangular;
    throw ValidationError("unknown uncertainty shape '" + std::string(s) + "'");
}

void UncertaintyConfig::validate() const {
    if (delta && !(*delta >= 0.0 && std::isfinite(*delta))) {
        throw ValidationError("uncertainty delta must be a finite nonnegative number");
    }
    if (confidence && !(*confidence > 0.0 && *confidence < 1.0)) {
        throw ValidationError("uncertainty confidence must lie in (0, 1)");
    }
    if (shape != UncertaintyShape::none && !delta && !confidence) {
        throw ValidationError("uncertainty set needs either a confidence or a delta");
    }
}

double UncertaintyConfig::resolve_delta(std::size_t dimension) const {
    validate();
    if (shape == UncertaintyShape::none) return 0.0;
    if (delta) return *delta;
    return calibrate_delta(*confidence, dimension);
}

MeanEstimate estimate_mean(const Eigen::MatrixXd& scenarios) {
    const auto q = scenarios.rows();
    if (q < 2) {
        throw ValidationError("mean estimator covariance needs at least 2 observations, got " +
                              std::to_string(q));
    }
    MeanEstimate out;
    out.sample_size = static_cast<std::size_t>(q);
    out.mu_hat = scenarios.colwise().mean().transpose();
    const Eigen::MatrixXd centered = scenarios.rowwise() - out.mu_hat.transpose();
    const Eigen::MatrixXd s = (centered.transpose() * centered) / static_cast<double>(q - 1);
    out.sigma_mu = s / static_cast<double>(q);
    // Symmetrize away rounding in the product.
    out.sigma_mu = 0.5 * (out.sigma_mu + out.sigma_mu.transpose()).eval();
    return out;
}

MeanEstimate estimate_mean(const ReturnPanel& panel) {
    return estimate_mean(panel.returns());
}

double required_return(const Eigen::VectorXd& mu_hat) {
    if (mu_hat.size() == 0) {
        throw ValidationError("required_return needs at least one asset");
    }
    return mu_hat.mean();
}

double calibrate_delta(double confidence, std::size_t dimension) {
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw ValidationError("confidence must lie in (0, 1), got " + std::to_string(confidence));
    }
    if (dimension == 0) {
        throw ValidationError("calibrate_delta needs dimension >= 1");
    }
    const boost::math::chi_squared dist(static_cast<double>(dimension));
    return std::sqrt(boost::math::quantile(dist, confidence));
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sigma) {
    const auto n = sigma.rows();
    if (n == 0 || sigma.cols() != n) {
        throw ValidationError("covariance must be a non-empty square matrix");
    }
    if (!sigma.allFinite()) {
        throw ValidationError("covariance has non-finite entries");
    }
    const double scale = std::max(sigma.cwiseAbs().maxCoeff(), 1e-300);
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, scale)) {
        throw ValidationError("covariance is not symmetric");
    }
    const double eps = 1e-12 * sigma.trace() / static_cast<double>(n);
    Eigen::MatrixXd reg = 0.5 * (sigma + sigma.transpose());
    reg.diagonal().array() += std::max(eps, 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reg);
    if (eig.info() != Eigen::Success) {
        throw ValidationError("eigendecomposition of covariance failed");
    }
    Eigen::VectorXd values = eig.eigenvalues();
    if (values.minCoeff() < -1e-10 * std::max(1.0, scale)) {
        throw ValidationError("covariance is not positive semidefinite (eigenvalue " +
                              std::to_string(values.minCoeff()) + ")");
    }
    values = values.cwiseMax(0.0).cwiseSqrt();
    return values.asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace drmcvar
