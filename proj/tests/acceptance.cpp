// Acceptance run: one PASS/FAIL/SKIP line per criterion. Criterion 10 repeats
// 1-9 and compares their output fingerprints.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "drmcvar/app.hpp"
#include "drmcvar/backtest.hpp"
#include "drmcvar/cvar.hpp"
#include "drmcvar/error.hpp"
#include "drmcvar/problems.hpp"
#include "drmcvar/theory.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace drmcvar;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
    Verdict verdict = Verdict::pass;
    std::string detail;
    std::string fingerprint;  // every number the criterion computed, printed exactly
    double seconds = 0.0;
};

// Collects failures and the fingerprint while a criterion runs.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && failures_++ < 5) first_ += (first_.empty() ? "" : "; ") + what;
    }
    void record(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g ", v);
        print_ += buf;
    }
    void note(const std::string& s) { notes_ += (notes_.empty() ? "" : ", ") + s; }

    Outcome finish() const {
        Outcome o;
        o.verdict = failures_ ? Verdict::fail : Verdict::pass;
        o.detail = failures_ ? std::to_string(failures_) + " failure(s): " + first_ : notes_;
        if (failures_ && !notes_.empty()) o.detail += " | " + notes_;
        o.fingerprint = app::sha256_hex(print_);
        return o;
    }

private:
    int failures_ = 0;
    std::string first_;
    std::string notes_;
    std::string print_;
};

std::string fmt(double v, int digits = 3) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

Outcome cvar_oracle() {
    Check c;
    std::mt19937_64 rng(1001);
    const double betas[] = {0.5, 0.75, 0.9};
    double worst_grid = 0.0, worst_eval = 0.0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng() % 4;
        const std::size_t q = 2 + rng() % 11;
        const double beta = betas[rng() % 3];
        const Eigen::MatrixXd r = fixture::uniform_matrix(rng, q, n, -0.2, 0.2);
        const auto sol = solve_portfolio(build_min_cvar(beta, r));
        if (sol.status != SolveStatus::optimal) {
            c.expect(false, "panel " + std::to_string(t) + " not optimal");
            continue;
        }
        const double grid = oracle::grid_min_cvar(r, beta, 100);
        const double at_w = empirical_cvar(*sol.weights, beta, r).cvar;
        worst_grid = std::max(worst_grid, std::abs(sol.objective_value - grid));
        worst_eval = std::max(worst_eval, std::abs(sol.objective_value - at_w));
        c.expect(std::abs(sol.objective_value - grid) <= 5e-3, "grid gap on panel " + std::to_string(t));
        c.expect(sol.objective_value <= grid + 1e-8, "LP above grid on panel " + std::to_string(t));
        c.expect(std::abs(sol.objective_value - at_w) <= 1e-7, "decoded CVaR gap on panel " + std::to_string(t));
        c.record(sol.objective_value);
        for (Eigen::Index i = 0; i < sol.weights->values().size(); ++i) c.record(sol.weights->values()[i]);
    }
    c.note("max |LP-grid| " + fmt(worst_grid) + ", max |LP-cvar(w*)| " + fmt(worst_eval));
    return c.finish();
}

Outcome coherence() {
    Check c;
    std::mt19937_64 rng(1002);
    std::uniform_real_distribution<double> ub(0.05, 0.99), ul(0.1, 10.0), uc(-1.0, 1.0), upos(0.0, 0.1);
    std::normal_distribution<double> g(0.0, 0.05);
    int violations[5] = {};
    for (int t = 0; t < 1000; ++t) {
        const std::size_t q = 2 + rng() % 60;
        std::vector<double> x(q), y(q), scaled(q), shifted(q), above(q), sum(q);
        const double b = ub(rng), lam = ul(rng), k = uc(rng);
        for (std::size_t i = 0; i < q; ++i) {
            x[i] = g(rng);
            y[i] = g(rng);
            scaled[i] = lam * x[i];
            shifted[i] = x[i] + k;
            above[i] = x[i] + upos(rng);
            sum[i] = x[i] + y[i];
        }
        const double cx = empirical_cvar(x, b).cvar, cy = empirical_cvar(y, b).cvar;
        const bool ok[5] = {
            std::abs(empirical_cvar(scaled, b).cvar - lam * cx) <= 1e-9,
            std::abs(empirical_cvar(shifted, b).cvar - (cx + k)) <= 1e-9,
            cx <= empirical_cvar(above, b).cvar + 1e-9,
            empirical_cvar(sum, b).cvar <= cx + cy + 1e-9,
            cx >= empirical_var(x, b) - 1e-9,
        };
        for (int i = 0; i < 5; ++i) violations[i] += !ok[i];
        c.record(cx);
    }
    const char* names[5] = {"homogeneity", "translation", "monotonicity", "subadditivity", "cvar>=var"};
    for (int i = 0; i < 5; ++i) c.expect(violations[i] == 0, std::string(names[i]) + " x" + std::to_string(violations[i]));
    c.note("1000 instances, 5 properties");
    return c.finish();
}

struct McvarInstance {
    Eigen::MatrixXd r;
    MeanEstimate mean;
    CVaRLadder ladder;
};

McvarInstance mcvar_instance(std::mt19937_64& rng) {
    McvarInstance m;
    const std::size_t n = 2 + rng() % 4;
    m.r = fixture::gaussian_matrix(rng, 60, n, 0.005, 0.05);
    m.mean = estimate_mean(m.r);
    m.ladder = solve_baselines({0.9, 0.95}, m.r);
    return m;
}

Outcome delta_zero() {
    Check c;
    std::mt19937_64 rng(1003);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const auto m = mcvar_instance(rng);
        const auto base = solve_portfolio(build_mean_multi_cvar(m.ladder, m.r, m.mean.mu_hat));
        const auto ell = solve_portfolio(build_dr_mcvar_ellipsoidal(m.ladder, m.r, m.mean, 0.0));
        const auto rect = solve_portfolio(build_dr_mcvar_rectangular(m.ladder, m.r, m.mean.mu_hat, 0.0));
        const bool solved = base.status == SolveStatus::optimal && ell.status == SolveStatus::optimal &&
                            rect.status == SolveStatus::optimal;
        c.expect(solved, "instance " + std::to_string(t) + " not optimal");
        if (!solved) continue;
        const double e = std::max(std::abs(ell.objective_value - base.objective_value),
                                  std::abs(rect.objective_value - base.objective_value));
        worst = std::max(worst, e);
        c.expect(e <= 1e-6, "instance " + std::to_string(t) + " differs by " + fmt(e));
        c.record(base.objective_value);
        c.record(ell.objective_value);
        c.record(rect.objective_value);
    }
    c.note("max gap " + fmt(worst));
    return c.finish();
}

Outcome rectangular_offset() {
    Check c;
    std::mt19937_64 rng(1004);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const auto m = mcvar_instance(rng);
        const double delta = std::uniform_real_distribution<double>(0.001, 0.1)(rng);
        const auto base = solve_portfolio(build_mean_multi_cvar(m.ladder, m.r, m.mean.mu_hat));
        const auto rect = solve_portfolio(build_dr_mcvar_rectangular(m.ladder, m.r, m.mean.mu_hat, delta));
        const bool solved = base.status == SolveStatus::optimal && rect.status == SolveStatus::optimal;
        c.expect(solved, "instance " + std::to_string(t) + " not optimal");
        if (!solved) continue;
        const double e = std::abs(rect.objective_value - (base.objective_value + delta));
        worst = std::max(worst, e);
        c.expect(e <= 1e-8, "instance " + std::to_string(t) + " off by " + fmt(e));
        c.record(base.objective_value);
        c.record(rect.objective_value);
    }
    c.note("max |obj_R - obj - delta| " + fmt(worst));
    return c.finish();
}

Outcome ellipsoidal_penalty() {
    Check c;
    std::mt19937_64 rng(1005);
    double worst_pen = 0.0, worst_boundary = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng() % 5;
        const Eigen::MatrixXd r = fixture::gaussian_matrix(rng, 40, n, 0.005, 0.05);
        MeanEstimate mean = estimate_mean(r);
        mean.sigma_mu = fixture::random_psd(rng, n, 0.02);
        const auto ladder = solve_baselines({0.9}, r);
        const Eigen::VectorXd w = fixture::random_simplex(rng, n);
        const double delta = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
        const auto program = build_dr_mcvar_ellipsoidal(ladder, r, mean, delta);
        const auto sol = solve_portfolio(
            pin_variables(program, program.labels_of(labels::weights), std::vector<double>(w.data(), w.data() + n)));
        if (sol.status != SolveStatus::optimal || !sol.robust_penalty) {
            c.expect(false, "instance " + std::to_string(t) + " not optimal");
            continue;
        }
        const double quad = w.dot(mean.sigma_mu * w);
        const double pen = std::abs(*sol.robust_penalty - delta * std::sqrt(quad));
        const Eigen::VectorXd mu = worst_case_mean(mean.mu_hat, mean.sigma_mu, w, delta);
        const Eigen::VectorXd dev = mu - mean.mu_hat;
        // Mahalanobis norm through a pseudo-inverse restricted to the range of sigma.
        const Eigen::VectorXd solved = mean.sigma_mu.completeOrthogonalDecomposition().solve(dev);
        const double boundary = std::abs(dev.dot(solved) - delta * delta);
        worst_pen = std::max(worst_pen, pen);
        worst_boundary = std::max(worst_boundary, boundary);
        c.expect(pen <= 1e-8, "penalty off by " + fmt(pen) + " on " + std::to_string(t));
        c.expect(boundary <= 1e-8, "boundary residual " + fmt(boundary) + " on " + std::to_string(t));
        c.record(*sol.robust_penalty);
        for (Eigen::Index i = 0; i < mu.size(); ++i) c.record(mu[i]);
    }
    c.note("max penalty err " + fmt(worst_pen) + ", max boundary residual " + fmt(worst_boundary));
    return c.finish();
}

Outcome solver_certification() {
    Check c;
    std::mt19937_64 rng(1006);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int optimal = 0, infeasible = 0;
    double worst_obj = 0.0, worst_kkt = 0.0;
    for (int t = 0; t < 500; ++t) {
        const int n = 1 + static_cast<int>(rng() % 6);
        const int cuts = static_cast<int>(rng() % 4);
        const int eqs = static_cast<int>(rng() % 2);
        Eigen::VectorXd cvec(n);
        for (auto& v : cvec) v = g(rng);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n + cuts, n);
        Eigen::VectorXd b = Eigen::VectorXd::Ones(2 * n + cuts);
        ProgramBuilder pb;
        pb.add_variables("x", static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            pb.set_cost(static_cast<std::size_t>(i), cvec[i]);
            a(2 * i, i) = 1.0;
            a(2 * i + 1, i) = -1.0;
        }
        for (int k = 0; k < cuts; ++k) {
            for (int i = 0; i < n; ++i) a(2 * n + k, i) = g(rng);
            b[2 * n + k] = 0.2 + u(rng);
        }
        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(eqs, n);
        Eigen::VectorXd f = Eigen::VectorXd::Zero(eqs);
        if (eqs) {
            for (int i = 0; i < n; ++i) e(0, i) = g(rng);
            f[0] = 0.3 * g(rng);
            // Every fifth equality is pushed outside the box to exercise infeasibility.
            if (t % 5 == 0) f[0] = e.row(0).cwiseAbs().sum() + 0.5;
        }
        auto row = [](const Eigen::MatrixXd& m, Eigen::Index r) {
            std::vector<ProgramBuilder::Entry> out;
            for (Eigen::Index i = 0; i < m.cols(); ++i) out.emplace_back(static_cast<std::size_t>(i), m(r, i));
            return out;
        };
        for (Eigen::Index r = 0; r < e.rows(); ++r) pb.add_equality(row(e, r), f[r]);
        for (Eigen::Index r = 0; r < a.rows(); ++r) pb.add_less_equal(row(a, r), b[r]);
        const auto program = pb.build();
        const auto expected = oracle::vertex_lp(cvec, a, b, e, f);
        const auto res = solve(program);
        c.record(static_cast<double>(res.status));
        if (!expected) {
            ++infeasible;
            c.expect(res.status == SolveStatus::infeasible,
                     "LP " + std::to_string(t) + " ended " + std::string(to_string(res.status)));
            continue;
        }
        if (res.status != SolveStatus::optimal) {
            c.expect(false, "LP " + std::to_string(t) + " ended " + std::string(to_string(res.status)));
            continue;
        }
        ++optimal;
        const auto kkt = check_kkt(program, res);
        const double k = std::max({kkt.primal, kkt.dual, kkt.gap});
        worst_obj = std::max(worst_obj, std::abs(res.primal_objective - *expected));
        worst_kkt = std::max(worst_kkt, k);
        c.expect(std::abs(res.primal_objective - *expected) <= 1e-6, "LP " + std::to_string(t) + " objective");
        c.expect(k <= 1e-8, "LP " + std::to_string(t) + " KKT " + fmt(k));
        c.record(res.primal_objective);
    }

    // Fixed infeasible fixtures: contradictory bounds and an over-tight simplex.
    {
        ProgramBuilder pb;
        const auto x = pb.add_variable("x");
        pb.set_cost(x, 1.0);
        pb.add_less_equal({{x, 1.0}}, -1.0);
        pb.add_less_equal({{x, -1.0}}, -1.0);
        c.expect(solve(pb.build()).status == SolveStatus::infeasible, "bounds fixture");
    }
    {
        Eigen::MatrixXd r(4, 2);
        r << 0.01, 0.02, -0.01, 0.03, 0.02, -0.02, 0.0, 0.01;
        const Eigen::VectorXd mu = r.colwise().mean();
        c.expect(solve(build_mean_cvar(0.75, r, mu, mu.maxCoeff() + 0.05)).status == SolveStatus::infeasible,
                 "mean-CVaR fixture");
    }
    c.note(std::to_string(optimal) + " optimal, " + std::to_string(infeasible) + " infeasible; max obj err " +
           fmt(worst_obj) + ", max KKT " + fmt(worst_kkt));
    return c.finish();
}

Outcome backtest_fixtures() {
    Check c;
    Eigen::MatrixXd r(2, 2);
    r << 0.1, -0.1, 0.0, 0.0;
    const double to = turnover({Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.5, 0.5)}, r);
    c.expect(std::abs(to - 0.6) <= 1e-12, "TO " + fmt(to, 17));
    c.record(to);

    const auto m = summary_metrics({0.1, -0.2, 0.05});
    c.expect(std::abs(m.max_drawdown + 0.2) <= 1e-12, "MaxDD " + fmt(m.max_drawdown, 17));
    c.record(m.max_drawdown);

    Eigen::MatrixXd chain(3, 2);
    chain << 0.0, 0.0, 0.1, -0.1, 0.2, 0.0;
    const auto panel = fixture::monthly_panel(chain);
    const auto realized =
        realized_returns({{panel.dates()[0], Eigen::Vector2d(0.5, 0.5)}}, panel, {panel.dates()[1], panel.dates()[2]});
    c.expect(std::abs(realized[0]) <= 1e-12 && std::abs(realized[1] - 0.11) <= 1e-12,
             "chained R " + fmt(realized[0], 17) + ", " + fmt(realized[1], 17));
    c.record(realized[0]);
    c.record(realized[1]);
    c.note("TO 0.6, MaxDD -0.2, R {0, 0.11}");
    return c.finish();
}

Outcome ff48_table() {
    const char* path = std::getenv("DRMCVAR_FF48_CSV");
    if (!path || !*path) {
        Outcome o;
        o.verdict = Verdict::skip;
        o.detail = "DRMCVAR_FF48_CSV not set (FF48 monthly file unavailable)";
        return o;
    }
    Check c;
    const auto panel = load_returns_csv(path, {ValueLayout::percent, MissingPolicy::drop_row});
    StrategySpec ew{"EW", StrategyKind::equal_weight, {}, {}, std::nullopt};
    const auto schedule =
        monthly_schedule(panel, fixture::ymd(1981, 1, 1), fixture::ymd(2020, 12, 31), Span::of_years(5), ew);
    const auto rep = run_backtest(schedule, panel, panel);
    const double ar = 100.0 * rep.metrics.annual_return, risk = 100.0 * rep.metrics.risk;
    const double to = 100.0 * rep.turnover;
    c.expect(std::abs(ar - 11.95) <= 0.5, "AR " + fmt(ar, 4) + "%");
    c.expect(std::abs(risk - 19.21) <= 0.5, "RISK " + fmt(risk, 4) + "%");
    c.expect(std::abs(to - 18.04) <= 2.0, "TO " + fmt(to, 4) + "%");
    c.record(ar);
    c.record(risk);
    c.record(to);
    c.note("AR " + fmt(ar, 4) + "%, RISK " + fmt(risk, 4) + "%, R/R " +
           fmt(rep.metrics.return_to_risk.value_or(0.0), 3) + ", TO " + fmt(to, 4) + "%");
    return c.finish();
}

Outcome theory_scaling() {
    Check c;
    TheoryConfig cfg;
    cfg.distribution.mean.resize(5);
    cfg.distribution.mean << 0.10, 0.08, 0.12, 0.06, 0.09;
    cfg.distribution.covariance.resize(5, 5);
    cfg.distribution.covariance << 0.0446, 0.0077, 0.0114, -0.0051, 0.0130,  //
        0.0077, 0.0256, 0.0012, -0.0048, 0.0043,                             //
        0.0114, 0.0012, 0.0340, -0.0066, 0.0087,                             //
        -0.0051, -0.0048, -0.0066, 0.0344, -0.0010,                          //
        0.0130, 0.0043, 0.0087, -0.0010, 0.0402;
    cfg.q_grid = {250, 1000, 4000};
    cfg.trials = 200;
    cfg.confidence = 0.05;
    cfg.betas = {0.5, 0.9};
    cfg.seed = 20261018;
    const auto res = excess_risk_experiment(cfg);
    std::string table;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const auto& r = res.rows[i];
        c.expect(r.excess < r.bound, "Q=" + std::to_string(r.q) + " excess above bound");
        c.expect(r.dropped == 0, "Q=" + std::to_string(r.q) + " dropped " + std::to_string(r.dropped));
        table += (i ? "; " : "") + std::string("Q=") + std::to_string(r.q) + " " + fmt(r.excess, 4) + "<" +
                 fmt(r.bound, 4);
        if (i > 0) {
            const double ratio = r.excess / res.rows[i - 1].excess;
            c.expect(r.excess < res.rows[i - 1].excess, "excess not decreasing at Q=" + std::to_string(r.q));
            c.expect(ratio >= 0.3 && ratio <= 0.8, "ratio " + fmt(ratio) + " at Q=" + std::to_string(r.q));
            table += " (ratio " + fmt(ratio) + ")";
        }
        c.record(r.excess);
        c.record(r.bound);
    }
    c.note(table);
    return c.finish();
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

Outcome timed(const Criterion& k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = k.run();
    } catch (const std::exception& e) {
        o.verdict = Verdict::fail;
        o.detail = std::string("exception: ") + e.what();
    }
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
}

const char* label(Verdict v) { return v == Verdict::pass ? "PASS" : v == Verdict::fail ? "FAIL" : "SKIP"; }

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "cvar-oracle-equivalence", cvar_oracle},
        {2, "coherence-axioms", coherence},
        {3, "delta-zero-degeneracy", delta_zero},
        {4, "rectangular-offset", rectangular_offset},
        {5, "ellipsoidal-penalty", ellipsoidal_penalty},
        {6, "solver-certification", solver_certification},
        {7, "backtest-fixtures", backtest_fixtures},
        {8, "ff48-ew-table", ff48_table},
        {9, "excess-risk-scaling", theory_scaling},
    };
    // Runtime budgets in seconds; exceeding one fails the criterion.
    const double budget[] = {60, 1e9, 1e9, 1e9, 1e9, 1e9, 1e9, 300, 600};

    bool ok = true;
    std::vector<Outcome> first;
    for (const auto& k : criteria) {
        Outcome o = timed(k);
        if (o.verdict == Verdict::pass && o.seconds > budget[k.id - 1]) {
            o.verdict = Verdict::fail;
            o.detail += " | runtime " + fmt(o.seconds) + " s over budget";
        }
        std::cout << label(o.verdict) << " " << k.id << " " << k.name << " (" << fmt(o.seconds, 3) << " s): " << o.detail
                  << std::endl;
        ok = ok && o.verdict != Verdict::fail;
        first.push_back(std::move(o));
    }

    const auto t0 = std::chrono::steady_clock::now();
    std::string mismatched;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (first[i].verdict == Verdict::skip) continue;
        const Outcome again = timed(criteria[i]);
        if (again.fingerprint != first[i].fingerprint || again.verdict != first[i].verdict) {
            mismatched += (mismatched.empty() ? "" : ", ") + std::to_string(criteria[i].id);
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool same = mismatched.empty();
    std::cout << (same ? "PASS" : "FAIL") << " 10 determinism (" << fmt(secs, 3)
              << " s): " << (same ? "criteria 1-9 reproduced identical outputs" : "outputs differ for " + mismatched)
              << std::endl;
    ok = ok && same;
    return ok ? 0 : 1;
}
