#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace drmcvar {

enum class ConeKind { zero, nonnegative, second_order };

std::string_view to_string(ConeKind k);

struct ConeBlock {
    ConeKind kind;
    std::size_t size;

    friend bool operator==(const ConeBlock&, const ConeBlock&) = default;
};

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Standard conic form
//
//     minimize    c^T x
//     subject to  A x + s = b,   s in K_1 x ... x K_m
//
// where each K_i is the zero cone, the nonnegative orthant or a second-order
// cone {(s0, s1) : s0 >= ||s1||}. Rows of A are grouped into cone blocks in
// order. `labels` maps named entities to variable indices.
struct ConicProgram {
    Eigen::VectorXd objective;
    SparseRows constraints;
    Eigen::VectorXd rhs;
    std::vector<ConeBlock> cones;
    std::map<std::string, std::vector<std::size_t>> labels;
    std::vector<std::string> warnings;

    std::size_t num_variables() const { return static_cast<std::size_t>(objective.size()); }
    std::size_t num_rows() const { return static_cast<std::size_t>(rhs.size()); }

    // Throws ValidationError if dimensions, cone sizes or labels are inconsistent.
    void validate() const;

    std::size_t label(const std::string& name) const;  // single-index label
    const std::vector<std::size_t>& labels_of(const std::string& name) const;
};

// Incremental assembly of a ConicProgram. Consecutive zero or nonnegative rows
// are merged into one cone block; second-order cones are added whole.
class ProgramBuilder {
public:
    using Entry = std::pair<std::size_t, double>;

    // Appends `count` variables with the given label; returns the first index.
    std::size_t add_variables(const std::string& label, std::size_t count);
    std::size_t add_variable(const std::string& label) { return add_variables(label, 1); }
    void set_cost(std::size_t var, double cost);

    // a^T x == rhs
    void add_equality(const std::vector<Entry>& a, double rhs);
    // a^T x <= rhs
    void add_less_equal(const std::vector<Entry>& a, double rhs);
    // (rhs_0 - a_0^T x, ..., rhs_k - a_k^T x) in SOC
    void add_second_order(const std::vector<std::vector<Entry>>& rows, const std::vector<double>& rhs);

    void warn(std::string message) { warnings_.push_back(std::move(message)); }
    std::size_t num_variables() const { return cost_.size(); }

    ConicProgram build() const;

private:
    void add_row(ConeKind kind, const std::vector<Entry>& a, double rhs);

    std::vector<double> cost_;
    std::vector<Eigen::Triplet<double>> triplets_;
    std::vector<double> rhs_;
    std::vector<ConeBlock> cones_;
    std::map<std::string, std::vector<std::size_t>> labels_;
    std::vector<std::string> warnings_;
};

// Returns a copy with equality rows x[i] = value appended.
ConicProgram pin_variables(const ConicProgram& program, const std::vector<std::size_t>& indices,
                           const std::vector<double>& values);

// Debug dump: objective, triplet-form rows, rhs, cone layout and labels.
std::string to_json(const ConicProgram& program, int indent = -1);

// ---------------------------------------------------------------------------
// Solver

enum class SolveStatus { optimal, infeasible, unbounded, max_iter };

std::string_view to_string(SolveStatus s);

struct SolverSettings {
    int max_iterations = 200;
    double feasibility_tolerance = 1e-8;
    double gap_tolerance = 1e-8;
    double step_fraction = 0.99;
    double static_regularization = 1e-7;
    int refinement_steps = 10;

    void validate() const;
};

// Residual triplet: ||A x + s - b||_inf, ||A^T y + c||_inf, |s^T y|.
struct KktResiduals {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
};

struct IterationInfo {
    int iteration = 0;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double tau = 0.0;
    double kappa = 0.0;
    double step = 0.0;
    double sigma = 0.0;
};

struct SolverResult {
    SolveStatus status = SolveStatus::max_iter;
    // On optimal: the solution. On infeasible: `dual` holds a certificate
    // y in K* with A^T y = 0, b^T y = -1. On unbounded: `primal` and `slack`
    // hold a direction with A x + s = 0, s in K, c^T x = -1.
    Eigen::VectorXd primal;
    Eigen::VectorXd dual;
    Eigen::VectorXd slack;
    KktResiduals residuals;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    // Farkas-type residual of the certificate (infeasible/unbounded only):
    // ||A^T y||_inf or ||A x + s||_inf after normalization.
    double certificate_residual = 0.0;
    int iterations = 0;
    std::string diagnostics;
};

using IterationCallback = std::function<void(const IterationInfo&)>;

// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
// Mehrotra predictor-corrector steps. Never throws on numerical trouble; a
// breakdown is reported as max_iter with diagnostics. Throws ValidationError
// for malformed programs or settings.
SolverResult solve(const ConicProgram& program, const SolverSettings& settings = {},
                   const IterationCallback& on_iteration = {});

// Residuals recomputed from scratch for (x, y, s), independent of solver internals.
KktResiduals check_kkt(const ConicProgram& program, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& s);
KktResiduals check_kkt(const ConicProgram& program, const SolverResult& result);

// Serializes one iteration as a single-line JSON object (for JSON-lines traces).
std::string to_json_line(const IterationInfo& info);

} // namespace drmcvar
