#include "drmcvar/app.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "drmcvar/error.hpp"

namespace drmcvar::app {
namespace {

using nlohmann::json;

void only_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw ValidationError("unknown key '" + it.key() + "' in " + std::string(where));
        }
    }
}

template <class T>
T get(const json& obj, std::string_view where, const char* key) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string(where) + "." + key + " is missing or has the wrong type");
    }
}

template <class T>
std::optional<T> get_optional(const json& obj, std::string_view where, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return get<T>(obj, where, key);
}

Date get_date(const json& obj, std::string_view where, const char* key) {
    const auto text = get<std::string>(obj, where, key);
    try {
        return parse_iso_date(text);
    } catch (const DataError& e) {
        throw ValidationError(std::string(where) + "." + key + ": " + e.what());
    }
}

PanelSource parse_panel(const json& j, std::string_view where, const std::filesystem::path& base) {
    PanelSource p;
    if (j.is_string()) {
        p.path = j.get<std::string>();
    } else {
        only_keys(j, where, {"path", "layout", "missing"});
        p.path = get<std::string>(j, where, "path");
        const auto layout = get_optional<std::string>(j, where, "layout").value_or("percent");
        if (layout == "percent") {
            p.options.layout = ValueLayout::percent;
        } else if (layout == "decimal") {
            p.options.layout = ValueLayout::decimal;
        } else {
            throw ValidationError(std::string(where) + ".layout must be 'percent' or 'decimal'");
        }
        const auto missing = get_optional<std::string>(j, where, "missing").value_or("error");
        if (missing == "error") {
            p.options.missing = MissingPolicy::error;
        } else if (missing == "drop_row") {
            p.options.missing = MissingPolicy::drop_row;
        } else {
            throw ValidationError(std::string(where) + ".missing must be 'error' or 'drop_row'");
        }
    }
    if (p.path.empty()) throw ValidationError(std::string(where) + ".path is empty");
    const std::filesystem::path raw(p.path);
    p.resolved = raw.is_absolute() ? raw : base / raw;
    if (!std::filesystem::is_regular_file(p.resolved)) {
        throw ValidationError(std::string(where) + ": file not found: " + p.resolved.string());
    }
    return p;
}

StrategySpec parse_strategy(const json& j, std::size_t index) {
    const std::string where = "strategies[" + std::to_string(index) + "]";
    only_keys(j, where, {"name", "kind", "betas", "uncertainty", "required_return"});
    StrategySpec s;
    s.kind = strategy_kind_from_string(get<std::string>(j, where, "kind"));
    s.name = get_optional<std::string>(j, where, "name").value_or(std::string(to_string(s.kind)));
    if (j.contains("betas")) s.betas = get<std::vector<double>>(j, where, "betas");
    s.required_return = get_optional<double>(j, where, "required_return");
    if (j.contains("uncertainty")) {
        const json& u = j.at("uncertainty");
        const std::string uw = where + ".uncertainty";
        only_keys(u, uw, {"shape", "confidence", "delta"});
        s.uncertainty.shape = uncertainty_shape_from_string(get<std::string>(u, uw, "shape"));
        s.uncertainty.confidence = get_optional<double>(u, uw, "confidence");
        s.uncertainty.delta = get_optional<double>(u, uw, "delta");
    }
    if (s.kind != StrategyKind::dr_mcvar && s.uncertainty.shape != UncertaintyShape::none) {
        throw ValidationError(where + ": an uncertainty set applies only to dr_mcvar");
    }
    if (s.kind == StrategyKind::dr_mcvar && s.uncertainty.shape == UncertaintyShape::none) {
        throw ValidationError(where + ": dr_mcvar needs an ellipsoidal or rectangular uncertainty set");
    }
    s.validate();
    return s;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

TheorySection parse_theory(const json& j) {
    const std::string where = "theory";
    only_keys(j, where, {"mean", "covariance", "q_grid", "trials", "confidence", "betas"});
    TheorySection t;
    t.distribution.mean = to_vector(get<std::vector<double>>(j, where, "mean"));
    const auto rows = get<std::vector<std::vector<double>>>(j, where, "covariance");
    const auto n = static_cast<Eigen::Index>(rows.size());
    t.distribution.covariance.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n) {
            throw ValidationError("theory.covariance must be square");
        }
        for (Eigen::Index k = 0; k < n; ++k) t.distribution.covariance(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
    t.q_grid = get<std::vector<std::size_t>>(j, where, "q_grid");
    if (auto v = get_optional<std::size_t>(j, where, "trials")) t.trials = *v;
    if (auto v = get_optional<double>(j, where, "confidence")) t.confidence = *v;
    if (auto v = get_optional<std::vector<double>>(j, where, "betas")) t.betas = *v;
    return t;
}

SolverSettings parse_solver(const json& j) {
    const std::string where = "solver";
    only_keys(j, where,
              {"max_iterations", "feasibility_tolerance", "gap_tolerance", "step_fraction",
               "static_regularization", "refinement_steps"});
    SolverSettings s;
    if (auto v = get_optional<int>(j, where, "max_iterations")) s.max_iterations = *v;
    if (auto v = get_optional<double>(j, where, "feasibility_tolerance")) s.feasibility_tolerance = *v;
    if (auto v = get_optional<double>(j, where, "gap_tolerance")) s.gap_tolerance = *v;
    if (auto v = get_optional<double>(j, where, "step_fraction")) s.step_fraction = *v;
    if (auto v = get_optional<double>(j, where, "static_regularization")) s.static_regularization = *v;
    if (auto v = get_optional<int>(j, where, "refinement_steps")) s.refinement_steps = *v;
    s.validate();
    return s;
}

json panel_json(const PanelSource& p) {
    return {{"path", p.path},
            {"layout", p.options.layout == ValueLayout::percent ? "percent" : "decimal"},
            {"missing", p.options.missing == MissingPolicy::error ? "error" : "drop_row"}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

} // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    only_keys(doc, "config",
              {"data", "strategies", "optimize", "backtest", "output_dir", "seed", "theory", "solver"});
    RunConfig c;
    if (doc.contains("data")) {
        const json& d = doc.at("data");
        only_keys(d, "data", {"estimation", "evaluation"});
        if (d.contains("estimation")) c.estimation = parse_panel(d.at("estimation"), "data.estimation", base_dir);
        if (d.contains("evaluation")) c.evaluation = parse_panel(d.at("evaluation"), "data.evaluation", base_dir);
    }
    if (doc.contains("strategies")) {
        const json& list = doc.at("strategies");
        if (!list.is_array()) throw ValidationError("strategies must be an array");
        std::set<std::string> names;
        for (std::size_t i = 0; i < list.size(); ++i) {
            c.strategies.push_back(parse_strategy(list[i], i));
            if (!names.insert(c.strategies.back().name).second) {
                throw ValidationError("duplicate strategy name '" + c.strategies.back().name + "'");
            }
        }
    }
    if (doc.contains("optimize")) {
        const json& o = doc.at("optimize");
        only_keys(o, "optimize", {"as_of"});
        c.as_of = get_date(o, "optimize", "as_of");
    }
    if (doc.contains("backtest")) {
        const json& b = doc.at("backtest");
        only_keys(b, "backtest", {"start", "end", "estimation_window", "on_failure", "jobs"});
        c.start = get_date(b, "backtest", "start");
        c.end = get_date(b, "backtest", "end");
        if (*c.end < *c.start) throw ValidationError("backtest.end is before backtest.start");
        if (b.contains("estimation_window")) {
            const json& w = b.at("estimation_window");
            only_keys(w, "backtest.estimation_window", {"months", "days"});
            c.estimation_span.months = get_optional<int>(w, "backtest.estimation_window", "months").value_or(0);
            c.estimation_span.days = get_optional<int>(w, "backtest.estimation_window", "days").value_or(0);
            if (c.estimation_span.months < 0 || c.estimation_span.days < 0 ||
                (c.estimation_span.months == 0 && c.estimation_span.days == 0)) {
                throw ValidationError("backtest.estimation_window must be positive");
            }
        }
        if (b.contains("on_failure")) {
            c.on_failure = failure_policy_from_string(get<std::string>(b, "backtest", "on_failure"));
        }
        if (auto v = get_optional<std::size_t>(b, "backtest", "jobs")) {
            if (*v < 1) throw ValidationError("backtest.jobs must be at least 1");
            c.jobs = *v;
        }
    }
    if (doc.contains("output_dir")) c.output_dir = get<std::string>(doc, "config", "output_dir");
    if (c.output_dir.empty()) throw ValidationError("output_dir is empty");
    const std::filesystem::path out(c.output_dir);
    c.resolved_output_dir = out.is_absolute() ? out : base_dir / out;
    c.seed = get_optional<std::uint64_t>(doc, "config", "seed");
    if (doc.contains("theory")) c.theory = parse_theory(doc.at("theory"));
    if (doc.contains("solver")) c.solver = parse_solver(doc.at("solver"));
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return parse_config(doc, base);
}

json resolved_config(const RunConfig& c) {
    json j;
    json data = json::object();
    if (c.estimation) data["estimation"] = panel_json(*c.estimation);
    if (c.evaluation) data["evaluation"] = panel_json(*c.evaluation);
    j["data"] = data;
    auto& strategies = j["strategies"] = json::array();
    for (const auto& s : c.strategies) {
        json e{{"name", s.name}, {"kind", std::string(to_string(s.kind))}, {"betas", s.betas},
               {"required_return", optional_json(s.required_return)}};
        if (s.kind == StrategyKind::dr_mcvar) {
            e["uncertainty"] = {{"shape", std::string(to_string(s.uncertainty.shape))},
                                {"confidence", optional_json(s.uncertainty.confidence)},
                                {"delta", optional_json(s.uncertainty.delta)}};
        }
        strategies.push_back(std::move(e));
    }
    if (c.as_of) j["optimize"] = {{"as_of", format_date(*c.as_of)}};
    if (c.start && c.end) {
        j["backtest"] = {{"start", format_date(*c.start)},
                         {"end", format_date(*c.end)},
                         {"estimation_window", {{"months", c.estimation_span.months}, {"days", c.estimation_span.days}}},
                         {"on_failure", std::string(to_string(c.on_failure))},
                         {"jobs", c.jobs}};
    }
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    if (c.theory) {
        const auto& t = *c.theory;
        std::vector<std::vector<double>> cov;
        for (Eigen::Index i = 0; i < t.distribution.covariance.rows(); ++i) {
            std::vector<double> row;
            for (Eigen::Index k = 0; k < t.distribution.covariance.cols(); ++k) row.push_back(t.distribution.covariance(i, k));
            cov.push_back(std::move(row));
        }
        j["theory"] = {{"mean", std::vector<double>(t.distribution.mean.data(),
                                                    t.distribution.mean.data() + t.distribution.mean.size())},
                       {"covariance", cov},
                       {"q_grid", t.q_grid},
                       {"trials", t.trials},
                       {"confidence", t.confidence},
                       {"betas", t.betas}};
    }
    j["solver"] = {{"max_iterations", c.solver.max_iterations},
                   {"feasibility_tolerance", c.solver.feasibility_tolerance},
                   {"gap_tolerance", c.solver.gap_tolerance},
                   {"step_fraction", c.solver.step_fraction},
                   {"static_regularization", c.solver.static_regularization},
                   {"refinement_steps", c.solver.refinement_steps}};
    return j;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error("write to " + tmp.string() + " failed");
    }
    std::filesystem::rename(tmp, path);
}

} // namespace drmcvar::app
