#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "drmcvar/data.hpp"
#include "drmcvar/date.hpp"

namespace fixture {

inline drmcvar::Date ymd(int y, unsigned m, unsigned d) {
    return drmcvar::Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

// Month-end dates starting at the end of (y, m).
inline std::vector<drmcvar::Date> month_ends(int y, unsigned m, std::size_t count) {
    std::vector<drmcvar::Date> out;
    auto ym = std::chrono::year{y} / std::chrono::month{m};
    for (std::size_t i = 0; i < count; ++i, ym += std::chrono::months{1}) {
        out.push_back(drmcvar::month_end(ym.year(), ym.month()));
    }
    return out;
}

inline std::vector<std::string> asset_names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("A" + std::to_string(i));
    return out;
}

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
    }
    return m;
}

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double mean,
                                       double sd) {
    std::normal_distribution<double> g(mean, sd);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = g(rng);
    }
    return m;
}

inline drmcvar::ReturnPanel monthly_panel(const Eigen::MatrixXd& r, int y = 2000, unsigned m = 1) {
    return drmcvar::ReturnPanel(month_ends(y, m, static_cast<std::size_t>(r.rows())),
                                asset_names(static_cast<std::size_t>(r.cols())), r, drmcvar::Frequency::monthly);
}

inline Eigen::VectorXd random_simplex(std::mt19937_64& rng, std::size_t n) {
    std::exponential_distribution<double> e(1.0);
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = e(rng);
    return w / w.sum();
}

inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, std::size_t n, double scale) {
    const Eigen::MatrixXd a = gaussian_matrix(rng, n, n, 0.0, scale);
    return a * a.transpose();
}

} // namespace fixture
