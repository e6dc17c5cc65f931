#include <gtest/gtest.h>

#include "drmcvar/conic.hpp"
#include "drmcvar/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace drmcvar;

namespace {

struct DenseLp {
    Eigen::VectorXd c;
    Eigen::MatrixXd a;  // a x <= b, box rows included
    Eigen::VectorXd b;
    Eigen::MatrixXd e;  // e x = f
    Eigen::VectorXd f;
};

// Random bounded LP: box [-1, 1]^n, a few random cuts, at most one equality.
DenseLp random_lp(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int cuts = static_cast<int>(rng() % 4);
    const int eqs = static_cast<int>(rng() % 2);
    DenseLp lp;
    lp.c = fixture::gaussian_matrix(rng, static_cast<std::size_t>(n), 1, 0.0, 1.0);
    lp.a = Eigen::MatrixXd::Zero(2 * n + cuts, n);
    lp.b = Eigen::VectorXd::Ones(2 * n + cuts);
    for (int i = 0; i < n; ++i) {
        lp.a(2 * i, i) = 1.0;
        lp.a(2 * i + 1, i) = -1.0;
    }
    for (int k = 0; k < cuts; ++k) {
        for (int i = 0; i < n; ++i) lp.a(2 * n + k, i) = g(rng);
        lp.b[2 * n + k] = 0.2 + u(rng);
    }
    lp.e = Eigen::MatrixXd::Zero(eqs, n);
    lp.f = Eigen::VectorXd::Zero(eqs);
    if (eqs) {
        for (int i = 0; i < n; ++i) lp.e(0, i) = g(rng);
        lp.f[0] = 0.3 * g(rng);
    }
    return lp;
}

ConicProgram to_program(const DenseLp& lp) {
    ProgramBuilder pb;
    const auto n = static_cast<std::size_t>(lp.c.size());
    pb.add_variables("x", n);
    for (std::size_t i = 0; i < n; ++i) pb.set_cost(i, lp.c[static_cast<Eigen::Index>(i)]);
    auto row = [&](const Eigen::MatrixXd& m, Eigen::Index r) {
        std::vector<ProgramBuilder::Entry> out;
        for (Eigen::Index i = 0; i < m.cols(); ++i) {
            if (m(r, i) != 0.0) out.emplace_back(static_cast<std::size_t>(i), m(r, i));
        }
        return out;
    };
    for (Eigen::Index r = 0; r < lp.e.rows(); ++r) pb.add_equality(row(lp.e, r), lp.f[r]);
    for (Eigen::Index r = 0; r < lp.a.rows(); ++r) pb.add_less_equal(row(lp.a, r), lp.b[r]);
    return pb.build();
}

} // namespace

TEST(Solver, RandomLpsMatchVertexEnumeration) {
    std::mt19937_64 rng(31);
    int optimal = 0;
    for (int t = 0; t < 150; ++t) {
        const int n = 1 + static_cast<int>(rng() % 5);
        const DenseLp lp = random_lp(rng, n);
        const auto expected = oracle::vertex_lp(lp.c, lp.a, lp.b, lp.e, lp.f);
        const auto program = to_program(lp);
        const auto res = solve(program);
        if (!expected) {
            EXPECT_EQ(res.status, SolveStatus::infeasible) << "trial " << t;
            continue;
        }
        ASSERT_EQ(res.status, SolveStatus::optimal) << "trial " << t << " " << res.diagnostics;
        ++optimal;
        EXPECT_NEAR(res.primal_objective, *expected, 1e-6) << "trial " << t;
        const auto k = check_kkt(program, res);
        EXPECT_LE(k.primal, 1e-8);
        EXPECT_LE(k.dual, 1e-8);
        EXPECT_LE(k.gap, 1e-8);
    }
    EXPECT_GT(optimal, 100);
}

TEST(Solver, SocUnitCase) {
    // min t s.t. (t, 1, 1) in SOC
    ProgramBuilder pb;
    const auto t = pb.add_variable("t");
    pb.set_cost(t, 1.0);
    pb.add_second_order({{{t, -1.0}}, {}, {}}, {0.0, 1.0, 1.0});
    const auto res = solve(pb.build());
    ASSERT_EQ(res.status, SolveStatus::optimal);
    EXPECT_NEAR(res.primal[0], std::sqrt(2.0), 1e-8);
    EXPECT_NEAR(res.primal_objective, res.dual_objective, 1e-8);
}

TEST(Solver, InfeasibleReturnsCertificate) {
    // x <= -1 and x >= 1
    ProgramBuilder pb;
    const auto x = pb.add_variable("x");
    pb.set_cost(x, 1.0);
    pb.add_less_equal({{x, 1.0}}, -1.0);
    pb.add_less_equal({{x, -1.0}}, -1.0);
    const auto program = pb.build();
    const auto res = solve(program);
    ASSERT_EQ(res.status, SolveStatus::infeasible);
    EXPECT_LE(res.certificate_residual, 1e-8);
    EXPECT_NEAR(program.rhs.dot(res.dual), -1.0, 1e-8);
    EXPECT_GE(res.dual.minCoeff(), -1e-10);
}

TEST(Solver, InfeasibleSimplexFixtures) {
    // sum x = 1, x >= 0, and every x_i <= 0.1 with n = 5.
    ProgramBuilder pb;
    pb.add_variables("x", 5);
    std::vector<ProgramBuilder::Entry> all;
    for (std::size_t i = 0; i < 5; ++i) {
        all.emplace_back(i, 1.0);
        pb.add_less_equal({{i, -1.0}}, 0.0);
        pb.add_less_equal({{i, 1.0}}, 0.1);
        pb.set_cost(i, static_cast<double>(i));
    }
    pb.add_equality(all, 1.0);
    EXPECT_EQ(solve(pb.build()).status, SolveStatus::infeasible);

    // SOC with a negative head: ||(1, 0)|| <= -1.
    ProgramBuilder soc;
    const auto y = soc.add_variable("y");
    soc.set_cost(y, 1.0);
    soc.add_equality({{y, 1.0}}, 0.0);
    soc.add_second_order({{}, {{y, 1.0}}, {}}, {-1.0, 1.0, 0.0});
    EXPECT_EQ(solve(soc.build()).status, SolveStatus::infeasible);
}

TEST(Solver, UnboundedReturnsDirection) {
    ProgramBuilder pb;
    const auto x = pb.add_variable("x");
    pb.set_cost(x, -1.0);
    pb.add_less_equal({{x, -1.0}}, 0.0);
    const auto res = solve(pb.build());
    ASSERT_EQ(res.status, SolveStatus::unbounded);
    EXPECT_LE(res.certificate_residual, 1e-8);
    EXPECT_NEAR(res.primal[0], 1.0, 1e-8);
}

TEST(Solver, SocpMatchesProjectedGradient) {
    std::mt19937_64 rng(32);
    for (int t = 0; t < 20; ++t) {
        const int n = 2 + static_cast<int>(rng() % 3);
        const int m = n + 2;
        const Eigen::MatrixXd gm = fixture::gaussian_matrix(rng, static_cast<std::size_t>(m), static_cast<std::size_t>(n), 0.0, 1.0);
        // g has a component outside range(G), keeping the norm smooth.
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(gm, Eigen::ComputeFullU);
        const Eigen::VectorXd g = svd.matrixU().col(m - 1) * 0.5 + gm * fixture::gaussian_matrix(rng, static_cast<std::size_t>(n), 1, 0.0, 0.5);
        const Eigen::VectorXd c = fixture::gaussian_matrix(rng, static_cast<std::size_t>(n), 1, 0.0, 1.0);

        ProgramBuilder pb;
        pb.add_variables("x", static_cast<std::size_t>(n));
        const auto tv = pb.add_variable("t");
        for (int i = 0; i < n; ++i) {
            pb.set_cost(static_cast<std::size_t>(i), c[i]);
            pb.add_less_equal({{static_cast<std::size_t>(i), 1.0}}, 1.0);
            pb.add_less_equal({{static_cast<std::size_t>(i), -1.0}}, 1.0);
        }
        pb.set_cost(tv, 1.0);
        std::vector<std::vector<ProgramBuilder::Entry>> rows{{{tv, -1.0}}};
        std::vector<double> rhs{0.0};
        for (int r = 0; r < m; ++r) {
            std::vector<ProgramBuilder::Entry> e;
            for (int i = 0; i < n; ++i) e.emplace_back(static_cast<std::size_t>(i), gm(r, i));
            rows.push_back(e);
            rhs.push_back(g[r]);
        }
        pb.add_second_order(rows, rhs);
        const auto program = pb.build();
        const auto res = solve(program);
        ASSERT_EQ(res.status, SolveStatus::optimal);
        const double reference = oracle::projected_gradient_box_norm(c, gm, g, 20000);
        EXPECT_LE(res.primal_objective, reference + 1e-7) << t;
        EXPECT_NEAR(res.primal_objective, reference, 1e-5) << t;
        EXPECT_NEAR(oracle::box_norm_objective(c, gm, g, res.primal.head(n)), res.primal_objective, 1e-7);
        const auto k = check_kkt(program, res);
        EXPECT_LE(std::max({k.primal, k.dual, k.gap}), 1e-8);
    }
}

TEST(Solver, ObjectiveGapAndWeakDuality) {
    std::mt19937_64 rng(33);
    for (int t = 0; t < 40; ++t) {
        const DenseLp lp = random_lp(rng, 2 + static_cast<int>(rng() % 4));
        const auto program = to_program(lp);
        std::vector<IterationInfo> trace;
        const auto res = solve(program, {}, [&](const IterationInfo& i) { trace.push_back(i); });
        if (res.status != SolveStatus::optimal) continue;
        ASSERT_FALSE(trace.empty());
        for (const auto& it : trace) {
            EXPECT_GE(it.gap, 0.0);
            // Weak duality holds on iterates that are feasible to tolerance.
            if (it.primal_residual <= 1e-9 && it.dual_residual <= 1e-9) {
                EXPECT_GE(it.primal_objective - it.dual_objective, -1e-7) << "iteration " << it.iteration;
            }
        }
        EXPECT_NEAR(res.primal_objective, res.dual_objective, 1e-6);
    }
}

TEST(CheckKkt, PerturbationIsLinear) {
    std::mt19937_64 rng(34);
    const auto program = to_program(random_lp(rng, 4));
    const auto res = solve(program);
    ASSERT_EQ(res.status, SolveStatus::optimal);
    Eigen::VectorXd x = res.primal;
    x[0] += 1e-3;
    const auto k = check_kkt(program, x, res.dual, res.slack);
    const double col0 = Eigen::VectorXd(program.constraints.col(0)).cwiseAbs().maxCoeff();
    EXPECT_NEAR(k.primal, 1e-3 * col0, 1e-8);
}

TEST(CheckKkt, SuboptimalPointHasGap) {
    // min -x1 - x2 over the unit box, dual solution from the optimum, primal at the origin.
    ProgramBuilder pb;
    pb.add_variables("x", 2);
    for (std::size_t i = 0; i < 2; ++i) {
        pb.set_cost(i, -1.0);
        pb.add_less_equal({{i, 1.0}}, 1.0);
        pb.add_less_equal({{i, -1.0}}, 0.0);
    }
    const auto program = pb.build();
    const auto res = solve(program);
    ASSERT_EQ(res.status, SolveStatus::optimal);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd s = program.rhs - program.constraints * x;
    const auto k = check_kkt(program, x, res.dual, s);
    EXPECT_LE(k.primal, 1e-12);
    EXPECT_GT(k.gap, 1e-8);
}

TEST(Solver, MalformedInputs) {
    ConicProgram p;
    p.objective = Eigen::VectorXd::Zero(2);
    p.constraints = SparseRows(1, 3);
    p.rhs = Eigen::VectorXd::Zero(1);
    p.cones = {{ConeKind::nonnegative, 1}};
    EXPECT_THROW(solve(p), ValidationError);
    SolverSettings s;
    s.step_fraction = 1.5;
    EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Solver, IterationTraceIsJsonLine) {
    IterationInfo i;
    i.iteration = 3;
    const auto line = to_json_line(i);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_NE(line.find("\"iteration\":3"), std::string::npos);
}

TEST(Solver, Deterministic) {
    std::mt19937_64 rng(35);
    const auto program = to_program(random_lp(rng, 5));
    const auto a = solve(program);
    const auto b = solve(program);
    EXPECT_EQ(a.primal, b.primal);
    EXPECT_EQ(a.iterations, b.iterations);
}
