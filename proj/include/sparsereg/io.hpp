#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sparsereg/bounds.hpp"
#include "sparsereg/core_model.hpp"
#include "sparsereg/errors.hpp"
#include "sparsereg/experiment.hpp"
#include "sparsereg/re_analysis.hpp"

namespace sparsereg::io {

using json = nlohmann::ordered_json;

/// %.17g, with "nan"/"inf"/"-inf" spelled out.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// JSON numbers cannot carry nan/inf: those become null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json opt_num(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading '" + path + "'");
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("error while writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// numeric CSV

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline bool parse_double(const std::string& cell, double& out) {
    std::size_t pos = 0;
    std::string t = cell;
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
    if (t.empty()) return false;
    try {
        out = std::stod(t, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == t.size();
}

/// Reads a dense numeric matrix; a first line that does not parse as
/// numbers is treated as a header and skipped.
inline Matrix parse_matrix_csv(const std::string& text, const std::string& origin = "<csv>") {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        std::vector<double> row(cells.size());
        bool ok = true;
        for (std::size_t k = 0; k < cells.size() && ok; ++k) ok = parse_double(cells[k], row[k]);
        if (!ok) {
            if (rows.empty() && lineno == 1) continue;  // header
            throw InvalidInput(origin + ":" + std::to_string(lineno) + ": non-numeric cell");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw InvalidInput(origin + ":" + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidInput(origin + ": no numeric rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    return m;
}

inline Matrix read_matrix_csv(const std::string& path) { return parse_matrix_csv(read_file(path), path); }

/// A response/target file: a single column, or a single row.
inline Vector read_vector_csv(const std::string& path) {
    const Matrix m = read_matrix_csv(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw InvalidInput(path + ": expected a single row or column");
}

// ---------------------------------------------------------------------------
// experiment config

inline const char* to_string(AmplitudeScheme a) {
    return a == AmplitudeScheme::unit ? "unit" : "random-sign-uniform";
}

inline ExperimentConfig config_from_json(const json& j) {
    static const std::vector<std::string> known{
        "design_kind", "rho", "design_path", "n", "M", "s", "amplitude", "A", "sigma", "trials", "seed",
        "normalize_columns", "perturbation", "eps", "c0_list", "m", "p_list", "enumeration_cap", "oracle_cap",
        "bounds", "threads", "lasso_tol", "lasso_max_sweeps", "lp_max_pivots"};
    if (!j.is_object()) throw InvalidInput("config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw InvalidInput("config: unknown key '" + it.key() + "'");
    ExperimentConfig c;
    try {
        if (j.contains("design_kind")) c.design_kind = design_kind_from_string(j.at("design_kind").get<std::string>());
        c.rho = j.value("rho", c.rho);
        c.design_path = j.value("design_path", c.design_path);
        c.n = j.value("n", c.n);
        c.M = j.value("M", c.M);
        c.s = j.value("s", c.s);
        if (j.contains("amplitude")) {
            const json& a = j.at("amplitude");
            const std::string scheme = a.is_string() ? a.get<std::string>() : a.at("scheme").get<std::string>();
            if (scheme == "unit") c.amplitude = AmplitudeScheme::unit;
            else if (scheme == "random-sign-uniform") c.amplitude = AmplitudeScheme::random_sign_uniform;
            else throw InvalidInput("config: unknown amplitude scheme '" + scheme + "'");
            if (a.is_object()) {
                c.amp_low = a.value("low", c.amp_low);
                c.amp_high = a.value("high", c.amp_high);
            }
        }
        c.A = j.value("A", c.A);
        c.sigma = j.value("sigma", c.sigma);
        c.trials = j.value("trials", c.trials);
        c.seed = j.value("seed", c.seed);
        c.normalize_columns = j.value("normalize_columns", c.normalize_columns);
        c.perturbation = j.value("perturbation", c.perturbation);
        c.eps = j.value("eps", c.eps);
        if (j.contains("c0_list")) c.c0_list = j.at("c0_list").get<std::vector<double>>();
        if (j.contains("m") && !j.at("m").is_null()) c.m = j.at("m").get<Index>();
        if (j.contains("p_list")) c.p_list = j.at("p_list").get<std::vector<double>>();
        c.enumeration_cap = j.value("enumeration_cap", c.enumeration_cap);
        c.oracle_cap = j.value("oracle_cap", c.oracle_cap);
        if (j.contains("bounds")) {
            const json& b = j.at("bounds");
            c.bounds.dantzig = b.value("dantzig", c.bounds.dantzig);
            c.bounds.lasso = b.value("lasso", c.bounds.lasso);
            c.bounds.equivalence = b.value("equivalence", c.bounds.equivalence);
            c.bounds.oracle = b.value("oracle", c.bounds.oracle);
        }
        c.threads = j.value("threads", c.threads);
        c.lasso_tol = j.value("lasso_tol", c.lasso_tol);
        c.lasso_max_sweeps = j.value("lasso_max_sweeps", c.lasso_max_sweeps);
        c.lp_max_pivots = j.value("lp_max_pivots", c.lp_max_pivots);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

inline ExperimentConfig read_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }
    return config_from_json(j);
}

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["design_kind"] = to_string(c.design_kind);
    j["rho"] = c.rho;
    if (!c.design_path.empty()) j["design_path"] = c.design_path;
    j["n"] = c.n;
    j["M"] = c.M;
    j["s"] = c.s;
    j["amplitude"] = {{"scheme", to_string(c.amplitude)}, {"low", c.amp_low}, {"high", c.amp_high}};
    j["A"] = c.A;
    j["sigma"] = c.sigma;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["normalize_columns"] = c.normalize_columns;
    j["perturbation"] = c.perturbation;
    j["eps"] = c.eps;
    j["c0_list"] = c.c0_list;
    j["m"] = c.m_value();
    j["p_list"] = c.p_list;
    j["enumeration_cap"] = c.enumeration_cap;
    j["oracle_cap"] = c.oracle_cap;
    j["bounds"] = {{"dantzig", c.bounds.dantzig}, {"lasso", c.bounds.lasso},
                   {"equivalence", c.bounds.equivalence}, {"oracle", c.bounds.oracle}};
    j["threads"] = c.threads;
    return j;
}

// ---------------------------------------------------------------------------
// trial CSV

inline std::vector<std::string> trial_csv_header(const ExperimentConfig& c) {
    std::vector<std::string> h{"trial_id", "seed", "n", "M", "s", "A", "sigma", "design_kind", "event_A", "event_B",
                               "max_scaled_v", "r", "lasso_l1", "lasso_pred", "dantzig_l1", "dantzig_pred",
                               "lasso_l1_norm", "dantzig_l1_norm", "lasso_sparsity", "dantzig_sparsity",
                               "lasso_converged", "lasso_sweeps", "lasso_kkt_violation", "lasso_kkt_pass",
                               "lasso_constraint", "lasso_feasible", "dantzig_status", "dantzig_pivots",
                               "l1_dominance", "cone_dantzig_vs_lasso", "cone_dantzig_vs_truth", "cone_lasso_vs_truth"};
    for (const auto& nm : bound_names(c))
        for (const char* suffix : {"_empirical", "_rhs", "_holds", "_status"}) h.push_back(nm + suffix);
    h.push_back("error");
    return h;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else if (ch == '\n' || ch == '\r') out += ' ';
        else out += ch;
    }
    return out + "\"";
}

inline std::string join_row(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += csv_quote(cells[i]);
    }
    return out + "\n";
}

inline std::string trial_csv(const ExperimentConfig& c, const std::vector<TrialRecord>& recs) {
    std::string out = join_row(trial_csv_header(c));
    const auto names = bound_names(c);
    auto b01 = [](bool b) { return std::string(b ? "1" : "0"); };
    auto cone = [&](const ConeDiagnostic& d) { return d.evaluated ? b01(d.holds) : std::string("NA"); };
    for (const auto& r : recs) {
        std::vector<std::string> row{std::to_string(r.trial_id), std::to_string(r.seed), std::to_string(c.n),
                                     std::to_string(c.M), std::to_string(c.s), fmt(c.A), fmt(c.sigma),
                                     to_string(c.design_kind), b01(r.events.event_A), b01(r.events.event_B),
                                     fmt(r.events.max_scaled_v), fmt(r.r), fmt(r.lasso_l1), fmt(r.lasso_pred),
                                     fmt(r.dantzig_l1), fmt(r.dantzig_pred), fmt(r.lasso_l1_norm),
                                     fmt(r.dantzig_l1_norm), std::to_string(r.lasso_sparsity),
                                     std::to_string(r.dantzig_sparsity), b01(r.lasso_converged),
                                     std::to_string(r.lasso_sweeps), fmt(r.lasso_kkt_violation),
                                     b01(r.lasso_kkt_pass), fmt(r.lasso_constraint), b01(r.lasso_feasible),
                                     r.dantzig_status, std::to_string(r.dantzig_pivots), b01(r.l1_dominance),
                                     cone(r.cone_dantzig_vs_lasso), cone(r.cone_dantzig_vs_truth),
                                     cone(r.cone_lasso_vs_truth)};
        for (const auto& nm : names) {
            const BoundCheck* bc = nullptr;
            for (const auto& b : r.bounds)
                if (b.name == nm) bc = &b;
            if (!bc) {
                row.insert(row.end(), {"nan", "nan", "NA", "missing"});
                continue;
            }
            row.push_back(fmt(bc->empirical));
            row.push_back(fmt(bc->rhs));
            row.push_back(bc->counts() ? b01(bc->holds) : std::string("NA"));
            row.push_back(to_string(bc->status));
        }
        row.push_back(r.error);
        out += join_row(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// summary JSON

inline json to_json(const EventCoverage& e) {
    return {{"count", e.count}, {"frequency", num(e.frequency)}, {"standard_error", num(e.standard_error)},
            {"theoretical_crude", num(e.crude)}, {"theoretical_refined", num(e.refined)}};
}

inline json to_json(const CountOnEvent& t) {
    return {{"evaluated", t.evaluated}, {"holds", t.holds}};
}

inline json summary_json(const ExperimentConfig& c, const CoverageSummary& s) {
    json j;
    j["config"] = to_json(c);
    j["trials"] = s.trials;
    j["event_A"] = to_json(s.event_A);
    j["event_B"] = to_json(s.event_B);
    j["event_A_without_B"] = s.event_A_implies_B_violations;
    json bounds = json::array();
    for (const auto& b : s.bounds) {
        bounds.push_back({{"name", b.name}, {"event", to_string(b.event)}, {"on_event", b.on_event},
                          {"holds_on_event", b.holds_on_event}, {"rate", num(b.rate())}, {"excluded", b.excluded},
                          {"violations_off_event", b.violations_off_event}});
    }
    j["bounds"] = bounds;
    j["diagnostics"] = {{"l1_dominance", to_json(s.l1_dominance)},
                        {"lasso_kkt", to_json(s.lasso_kkt)},
                        {"lasso_dantzig_feasible", to_json(s.lasso_feasible)},
                        {"cone_dantzig_vs_lasso", to_json(s.cone_dantzig_vs_lasso)},
                        {"cone_dantzig_vs_truth_on_B", to_json(s.cone_dantzig_vs_truth_on_B)},
                        {"cone_lasso_vs_truth_on_A", to_json(s.cone_lasso_vs_truth_on_A)},
                        {"lasso_failures", s.lasso_failures},
                        {"lasso_not_converged", s.lasso_not_converged},
                        {"dantzig_failures", s.dantzig_failures}};
    j["kappa_plugins"] = s.kappa_sources;
    j["wall_clock_seconds"] = s.wall_clock_seconds;
    return j;
}

inline void emit_report(const ExperimentConfig& c, const MonteCarloResult& res, const std::string& csv_path,
                        const std::string& summary_path) {
    if (!csv_path.empty()) write_file(csv_path, trial_csv(c, res.records));
    if (!summary_path.empty()) write_file(summary_path, summary_json(c, res.summary).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// RE report JSON

inline json indices(const IndexSet& J) { return json(std::vector<Index>(J.begin(), J.end())); }

inline json vector_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

inline json verdict_json(const std::optional<Verdict>& v) {
    if (!v) return {{"applicable", false}};
    return {{"applicable", true}, {"holds", v->holds}, {"slack", num(v->slack)}, {"exact", v->exact}};
}

inline json to_json(const ReAnalysisReport& r) {
    json j;
    j["M"] = r.M;
    j["s"] = r.s;
    j["m"] = r.m ? json(*r.m) : json(nullptr);
    json phi = json::array();
    for (const auto& [u, e] : r.phi)
        phi.push_back({{"u", u}, {"phi_min", num(e.phi_min)}, {"phi_max", num(e.phi_max)}, {"exact", e.exact}});
    j["restricted_eigenvalues"] = phi;
    json theta = json::array();
    for (const auto& [k, t] : r.theta)
        theta.push_back({{"m1", k.first}, {"m2", k.second}, {"theta", num(t.theta)}, {"exact", t.exact}});
    j["restricted_correlations"] = theta;
    json entries = json::array();
    for (const auto& e : r.entries) {
        json a = json::object();
        for (int k = 1; k <= 5; ++k) a["assumption_" + std::to_string(k)] = verdict_json(e.assumptions[k]);
        json kap = {{"lower", opt_num(e.kappa.lower)},
                    {"upper", num(e.kappa.upper)},
                    {"lower_exact", e.kappa.lower_exact},
                    {"upper_search_exhaustive", e.kappa.exact},
                    {"identity_shortcut", e.kappa.identity_shortcut},
                    {"witness_J0", indices(e.kappa.witness_J0)},
                    {"witness_delta", vector_json(e.kappa.witness_delta)}};
        if (r.m) {
            kap["lower_m"] = opt_num(e.kappa.lower_m);
            kap["upper_m"] = e.kappa.upper_m ? num(*e.kappa.upper_m) : json(nullptr);
            kap["witness_J0_m"] = indices(e.kappa.witness_J0_m);
            kap["witness_delta_m"] = vector_json(e.kappa.witness_delta_m);
        }
        entries.push_back({{"c0", e.c0},
                           {"kappa1", opt_num(e.lower_bounds.kappa1)},
                           {"kappa1_defined", e.lower_bounds.kappa1_defined},
                           {"kappa2", opt_num(e.lower_bounds.kappa2)},
                           {"kappa2_defined", e.lower_bounds.kappa2_defined},
                           {"lower_bounds_exact", e.lower_bounds.exact},
                           {"assumptions", a},
                           {"kappa_interval", kap}});
    }
    j["per_c0"] = entries;
    return j;
}

inline json to_json(const BoundCheck& b) {
    return {{"name", b.name}, {"empirical", num(b.empirical)}, {"rhs", num(b.rhs)}, {"holds", b.holds},
            {"kappa_used", num(b.kappa_used)}, {"event_required", to_string(b.event)}, {"status", to_string(b.status)}};
}

}  // namespace sparsereg::io
