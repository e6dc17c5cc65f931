#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "drmcvar/data.hpp"

namespace drmcvar {

// Sample mean of each asset and the covariance of that mean estimator.
struct MeanEstimate {
    Eigen::VectorXd mu_hat;
    Eigen::MatrixXd sigma_mu;  // S / Q, S the unbiased sample covariance
    std::size_t sample_size = 0;
};

enum class UncertaintyShape { none, ellipsoidal, rectangular };

std::string_view to_string(UncertaintyShape s);
UncertaintyShape uncertainty_shape_from_string(std::string_view s);

// Radius specification for the mean uncertainty set. Exactly one of
// `confidence` (calibrated via the chi-square rule) or `delta` is used;
// an explicit `delta` wins.
struct UncertaintyConfig {
    UncertaintyShape shape = UncertaintyShape::none;
    std::optional<double> confidence;
    std::optional<double> delta;

    void validate() const;
    // Radius for an N-asset problem. Shape `none` always yields 0.
    double resolve_delta(std::size_t dimension) const;
};

MeanEstimate estimate_mean(const Eigen::MatrixXd& scenarios);
MeanEstimate estimate_mean(const ReturnPanel& panel);

// Cross-sectional average of the expected returns.
double required_return(const Eigen::VectorXd& mu_hat);

// sqrt of the chi-square(N) quantile at `confidence`: the radius of the
// Gaussian confidence ellipsoid for the mean.
double calibrate_delta(double confidence, std::size_t dimension);

// G with G^T G = sigma + eps I, eps = 1e-12 * trace(sigma) / N, from a
// symmetric eigendecomposition. Throws ValidationError when sigma is not PSD
// within tolerance.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sigma);

} // namespace drmcvar
