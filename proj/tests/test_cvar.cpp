#include <gtest/gtest.h>

#include "drmcvar/cvar.hpp"
#include "drmcvar/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace drmcvar;

namespace {

const std::vector<double> sample{1.0, 2.0, 10.0, -3.0};

std::vector<double> random_losses(std::mt19937_64& rng, std::size_t q) {
    std::normal_distribution<double> g(0.0, 0.05);
    std::vector<double> out(q);
    for (auto& x : out) x = g(rng);
    return out;
}

} // namespace

TEST(Loss, SignConvention) {
    EXPECT_DOUBLE_EQ(portfolio_loss(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 0.05)), -0.05);
    EXPECT_NEAR(portfolio_loss(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.02, -0.04)), 0.01, 1e-17);
    EXPECT_EQ(portfolio_loss(Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d::Zero()), 0.0);
    EXPECT_THROW(portfolio_loss(Eigen::Vector2d(0.5, 0.5), Eigen::Vector3d::Zero()), ValidationError);
}

TEST(Weights, Validation) {
    EXPECT_NO_THROW(PortfolioWeights(Eigen::Vector2d(0.25, 0.75)));
    EXPECT_THROW(PortfolioWeights(Eigen::Vector2d(0.25, 0.70)), ValidationError);
    EXPECT_THROW(PortfolioWeights(Eigen::Vector2d(-0.25, 1.25)), ValidationError);
    EXPECT_DOUBLE_EQ(PortfolioWeights::equal(4)[2], 0.25);
}

TEST(AuxiliaryF, HandValues) {
    EXPECT_DOUBLE_EQ(auxiliary_f(sample, 2.0, 0.75), 10.0);
    EXPECT_DOUBLE_EQ(auxiliary_f(sample, 12.0, 0.75), 12.0);
    const std::vector<double> flat(5, 0.3);
    EXPECT_DOUBLE_EQ(auxiliary_f(flat, 0.3, 0.9), 0.3);
    EXPECT_THROW(auxiliary_f(sample, 0.0, 1.0), ValidationError);
    EXPECT_THROW(auxiliary_f(sample, 0.0, 0.0), ValidationError);
}

TEST(EmpiricalCvar, HandValues) {
    const auto half = empirical_cvar(sample, 0.5);
    EXPECT_DOUBLE_EQ(half.cvar, 6.0);
    EXPECT_LE(half.alpha_lo, 2.0);
    EXPECT_GE(half.alpha_hi, 2.0);
    EXPECT_NEAR(oracle::grid_cvar(sample, 0.5, 13001), 6.0, 1e-12);

    const auto q3 = empirical_cvar(sample, 0.75);
    EXPECT_DOUBLE_EQ(q3.cvar, 10.0);
    EXPECT_DOUBLE_EQ(q3.alpha_lo, 2.0);
    EXPECT_DOUBLE_EQ(q3.alpha_hi, 10.0);
    EXPECT_NEAR(oracle::grid_cvar(sample, 0.75, 13001), 10.0, 1e-12);

    for (double b : {0.1, 0.5, 0.9}) EXPECT_DOUBLE_EQ(empirical_cvar(std::vector<double>(6, -0.4), b).cvar, -0.4);
}

TEST(EmpiricalCvar, DegenerateTailFlag) {
    EXPECT_TRUE(empirical_cvar(sample, 0.8).degenerate_tail);
    EXPECT_FALSE(empirical_cvar(sample, 0.75).degenerate_tail);
    EXPECT_DOUBLE_EQ(empirical_cvar(sample, 0.8).cvar, 10.0);
}

TEST(EmpiricalVar, HandValues) {
    EXPECT_DOUBLE_EQ(empirical_var(sample, 0.75), 10.0);
    EXPECT_DOUBLE_EQ(empirical_var(sample, 0.5), 2.0);
    EXPECT_DOUBLE_EQ(empirical_var(std::vector<double>(3, 0.7), 0.5), 0.7);
}

TEST(EmpiricalCvar, MatchesTailOracle) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> ub(0.01, 0.99);
    for (int t = 0; t < 500; ++t) {
        const auto l = random_losses(rng, 1 + rng() % 40);
        const double b = ub(rng);
        const auto r = empirical_cvar(l, b);
        EXPECT_NEAR(r.cvar, oracle::tail_cvar(l, b), 1e-12);
        EXPECT_NEAR(auxiliary_f(l, r.alpha_lo, b), r.cvar, 1e-12);
        EXPECT_NEAR(auxiliary_f(l, r.alpha_hi, b), r.cvar, 1e-12);
        EXPECT_LE(r.cvar, oracle::grid_cvar(l, b, 2001) + 1e-15);
        EXPECT_DOUBLE_EQ(empirical_var(l, b), oracle::counting_var(l, b));
    }
}

TEST(EmpiricalCvar, PanelOverloadsAgree) {
    std::mt19937_64 rng(22);
    const auto panel = fixture::monthly_panel(fixture::gaussian_matrix(rng, 30, 3, 0.0, 0.05));
    const PortfolioWeights w(fixture::random_simplex(rng, 3));
    const Eigen::VectorXd l = portfolio_losses(w, panel);
    const std::vector<double> lv(l.data(), l.data() + l.size());
    EXPECT_DOUBLE_EQ(empirical_cvar(w, 0.9, panel).cvar, empirical_cvar(lv, 0.9).cvar);
    EXPECT_DOUBLE_EQ(empirical_cvar(w, 0.9, panel.returns()).cvar, empirical_cvar(lv, 0.9).cvar);
    EXPECT_DOUBLE_EQ(empirical_var(w, 0.9, panel), empirical_var(lv, 0.9));
    EXPECT_DOUBLE_EQ(auxiliary_f(w, 0.01, 0.9, panel), auxiliary_f(lv, 0.01, 0.9));
}

TEST(CoherenceProperties, RandomInstances) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ub(0.05, 0.99), ul(0.1, 5.0), uc(-1.0, 1.0), upos(0.0, 0.05);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t q = 2 + rng() % 30;
        const auto x = random_losses(rng, q);
        const auto y = random_losses(rng, q);
        const double b = ub(rng), lam = ul(rng), c = uc(rng);
        const double cx = empirical_cvar(x, b).cvar;

        std::vector<double> scaled(q), shifted(q), above(q), sum(q);
        for (std::size_t i = 0; i < q; ++i) {
            scaled[i] = lam * x[i];
            shifted[i] = x[i] + c;
            above[i] = x[i] + upos(rng);
            sum[i] = x[i] + y[i];
        }
        EXPECT_NEAR(empirical_cvar(scaled, b).cvar, lam * cx, 1e-9);
        EXPECT_NEAR(empirical_cvar(shifted, b).cvar, cx + c, 1e-9);
        EXPECT_LE(cx, empirical_cvar(above, b).cvar + 1e-9);
        EXPECT_LE(empirical_cvar(sum, b).cvar, cx + empirical_cvar(y, b).cvar + 1e-9);
        EXPECT_GE(cx, empirical_var(x, b) - 1e-9);
    }
}

TEST(CoherenceProperties, NondecreasingInBeta) {
    std::mt19937_64 rng(24);
    for (int t = 0; t < 100; ++t) {
        const auto l = random_losses(rng, 25);
        double prev = -1e300;
        for (double b = 0.02; b < 0.99; b += 0.02) {
            const double c = empirical_cvar(l, b).cvar;
            EXPECT_GE(c, prev - 1e-12);
            prev = c;
        }
    }
}
