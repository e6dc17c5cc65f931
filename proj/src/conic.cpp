#include "drmcvar/conic.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "drmcvar/error.hpp"

namespace drmcvar {

std::string_view to_string(ConeKind k) {
    switch (k) {
    case ConeKind::zero: return "zero";
    case ConeKind::nonnegative: return "nonnegative";
    case ConeKind::second_order: return "second_order";
    }
    return "?";
}

std::string_view to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max_iter";
    }
    return "?";
}

void ConicProgram::validate() const {
    const auto m = static_cast<Eigen::Index>(num_rows());
    const auto n = static_cast<Eigen::Index>(num_variables());
    if (constraints.rows() != m || constraints.cols() != n) {
        throw ValidationError("constraint matrix is " + std::to_string(constraints.rows()) + "x" +
                              std::to_string(constraints.cols()) + ", expected " +
                              std::to_string(m) + "x" + std::to_string(n));
    }
    std::size_t total = 0;
    for (const auto& c : cones) {
        if (c.size == 0) {
            throw ValidationError("empty cone block");
        }
        total += c.size;
    }
    if (total != num_rows()) {
        throw ValidationError("cone block sizes sum to " + std::to_string(total) + " but there are " +
                              std::to_string(num_rows()) + " rows");
    }
    if (!objective.allFinite() || !rhs.allFinite()) {
        throw ValidationError("program data contains non-finite values");
    }
    for (Eigen::Index k = 0; k < constraints.outerSize(); ++k) {
        for (SparseRows::InnerIterator it(constraints, k); it; ++it) {
            if (!std::isfinite(it.value())) {
                throw ValidationError("constraint matrix contains non-finite values");
            }
        }
    }
    for (const auto& [name, idx] : labels) {
        for (auto i : idx) {
            if (i >= num_variables()) {
                throw ValidationError("label '" + name + "' refers to variable " + std::to_string(i) +
                                      " out of range");
            }
        }
    }
}

const std::vector<std::size_t>& ConicProgram::labels_of(const std::string& name) const {
    auto it = labels.find(name);
    if (it == labels.end()) {
        throw ValidationError("program has no variable label '" + name + "'");
    }
    return it->second;
}

std::size_t ConicProgram::label(const std::string& name) const {
    const auto& idx = labels_of(name);
    if (idx.size() != 1) {
        throw ValidationError("label '" + name + "' is not a single variable");
    }
    return idx.front();
}

// ---------------------------------------------------------------------------

std::size_t ProgramBuilder::add_variables(const std::string& label, std::size_t count) {
    const std::size_t first = cost_.size();
    cost_.resize(first + count, 0.0);
    auto& idx = labels_[label];
    for (std::size_t i = 0; i < count; ++i) idx.push_back(first + i);
    return first;
}

void ProgramBuilder::set_cost(std::size_t var, double cost) {
    if (var >= cost_.size()) {
        throw ValidationError("cost for unknown variable " + std::to_string(var));
    }
    cost_[var] = cost;
}

void ProgramBuilder::add_row(ConeKind kind, const std::vector<Entry>& a, double rhs) {
    const auto row = static_cast<int>(rhs_.size());
    for (const auto& [col, v] : a) {
        if (col >= cost_.size()) {
            throw ValidationError("row refers to unknown variable " + std::to_string(col));
        }
        if (v != 0.0) triplets_.emplace_back(row, static_cast<int>(col), v);
    }
    rhs_.push_back(rhs);
    if (kind != ConeKind::second_order && !cones_.empty() && cones_.back().kind == kind) {
        ++cones_.back().size;
    } else if (kind != ConeKind::second_order) {
        cones_.push_back({kind, 1});
    }
}

void ProgramBuilder::add_equality(const std::vector<Entry>& a, double rhs) {
    add_row(ConeKind::zero, a, rhs);
}

void ProgramBuilder::add_less_equal(const std::vector<Entry>& a, double rhs) {
    add_row(ConeKind::nonnegative, a, rhs);
}

void ProgramBuilder::add_second_order(const std::vector<std::vector<Entry>>& rows,
                                      const std::vector<double>& rhs) {
    if (rows.empty() || rows.size() != rhs.size()) {
        throw ValidationError("second-order cone needs matching non-empty rows and rhs");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        add_row(ConeKind::second_order, rows[i], rhs[i]);
    }
    cones_.push_back({ConeKind::second_order, rows.size()});
}

ConicProgram ProgramBuilder::build() const {
    ConicProgram p;
    const auto n = static_cast<Eigen::Index>(cost_.size());
    const auto m = static_cast<Eigen::Index>(rhs_.size());
    p.objective = Eigen::Map<const Eigen::VectorXd>(cost_.data(), n);
    p.rhs = Eigen::Map<const Eigen::VectorXd>(rhs_.data(), m);
    p.constraints.resize(m, n);
    p.constraints.setFromTriplets(triplets_.begin(), triplets_.end());
    p.cones = cones_;
    p.labels = labels_;
    p.warnings = warnings_;
    p.validate();
    return p;
}

ConicProgram pin_variables(const ConicProgram& program, const std::vector<std::size_t>& indices,
                           const std::vector<double>& values) {
    if (indices.size() != values.size()) {
        throw ValidationError("pin_variables: index and value counts differ");
    }
    ConicProgram out = program;
    const auto m0 = static_cast<Eigen::Index>(program.num_rows());
    const auto extra = static_cast<Eigen::Index>(indices.size());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(program.constraints.nonZeros()) + indices.size());
    for (Eigen::Index k = 0; k < program.constraints.outerSize(); ++k) {
        for (SparseRows::InnerIterator it(program.constraints, k); it; ++it) {
            t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }
    }
    out.rhs.conservativeResize(m0 + extra);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= program.num_variables()) {
            throw ValidationError("pin_variables: index out of range");
        }
        t.emplace_back(static_cast<int>(m0 + static_cast<Eigen::Index>(i)),
                       static_cast<int>(indices[i]), 1.0);
        out.rhs[m0 + static_cast<Eigen::Index>(i)] = values[i];
    }
    out.constraints.resize(m0 + extra, static_cast<Eigen::Index>(program.num_variables()));
    out.constraints.setFromTriplets(t.begin(), t.end());
    if (extra > 0) out.cones.push_back({ConeKind::zero, indices.size()});
    out.validate();
    return out;
}

std::string to_json(const ConicProgram& program, int indent) {
    nlohmann::json j;
    j["num_variables"] = program.num_variables();
    j["num_rows"] = program.num_rows();
    j["objective"] = std::vector<double>(program.objective.data(),
                                         program.objective.data() + program.objective.size());
    j["rhs"] = std::vector<double>(program.rhs.data(), program.rhs.data() + program.rhs.size());
    auto& rows = j["constraints"] = nlohmann::json::array();
    for (Eigen::Index k = 0; k < program.constraints.outerSize(); ++k) {
        for (SparseRows::InnerIterator it(program.constraints, k); it; ++it) {
            rows.push_back({it.row(), it.col(), it.value()});
        }
    }
    auto& cones = j["cones"] = nlohmann::json::array();
    for (const auto& c : program.cones) {
        cones.push_back({{"kind", std::string(to_string(c.kind))}, {"size", c.size}});
    }
    j["labels"] = program.labels;
    j["warnings"] = program.warnings;
    return j.dump(indent);
}

// ---------------------------------------------------------------------------

void SolverSettings::validate() const {
    if (max_iterations <= 0) throw ValidationError("max_iterations must be positive");
    if (!(feasibility_tolerance > 0.0) || !(gap_tolerance > 0.0)) {
        throw ValidationError("solver tolerances must be positive");
    }
    if (!(step_fraction > 0.0 && step_fraction < 1.0)) {
        throw ValidationError("step fraction must lie in (0, 1)");
    }
    if (!(static_regularization >= 0.0)) {
        throw ValidationError("static regularization must be nonnegative");
    }
    if (refinement_steps < 0) throw ValidationError("refinement_steps must be nonnegative");
}

KktResiduals check_kkt(const ConicProgram& program, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y, const Eigen::VectorXd& s) {
    if (static_cast<std::size_t>(x.size()) != program.num_variables() ||
        static_cast<std::size_t>(y.size()) != program.num_rows() ||
        static_cast<std::size_t>(s.size()) != program.num_rows()) {
        throw ValidationError("check_kkt: vector sizes do not match the program");
    }
    KktResiduals r;
    const Eigen::VectorXd pr = program.constraints * x + s - program.rhs;
    const Eigen::VectorXd dr = program.constraints.transpose() * y + program.objective;
    r.primal = pr.size() ? pr.cwiseAbs().maxCoeff() : 0.0;
    r.dual = dr.size() ? dr.cwiseAbs().maxCoeff() : 0.0;

    // Cone membership: s in K, y in K* (zero cone dual is free).
    Eigen::Index off = 0;
    for (const auto& c : program.cones) {
        const auto k = static_cast<Eigen::Index>(c.size);
        switch (c.kind) {
        case ConeKind::zero:
            r.primal = std::max(r.primal, s.segment(off, k).cwiseAbs().maxCoeff());
            break;
        case ConeKind::nonnegative:
            r.primal = std::max(r.primal, -std::min(0.0, s.segment(off, k).minCoeff()));
            r.dual = std::max(r.dual, -std::min(0.0, y.segment(off, k).minCoeff()));
            break;
        case ConeKind::second_order:
            r.primal = std::max(r.primal, s.segment(off + 1, k - 1).norm() - s[off]);
            r.dual = std::max(r.dual, y.segment(off + 1, k - 1).norm() - y[off]);
            break;
        }
        off += k;
    }
    r.gap = std::abs(s.dot(y));
    return r;
}

KktResiduals check_kkt(const ConicProgram& program, const SolverResult& result) {
    return check_kkt(program, result.primal, result.dual, result.slack);
}

std::string to_json_line(const IterationInfo& info) {
    nlohmann::json j{{"iteration", info.iteration},
                     {"pcost", info.primal_objective},
                     {"dcost", info.dual_objective},
                     {"pres", info.primal_residual},
                     {"dres", info.dual_residual},
                     {"gap", info.gap},
                     {"tau", info.tau},
                     {"kappa", info.kappa},
                     {"step", info.step},
                     {"sigma", info.sigma}};
    return j.dump();
}

} // namespace drmcvar
