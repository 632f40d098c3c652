#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sparsereg/sparsereg.hpp"

using namespace sparsereg;
using io::json;

namespace {

enum Exit { ok = 0, invalid = 2, solver = 3, ioerr = 4 };

struct SolveArgs {
    std::string design, response, method = "lasso", out;
    double A = 0, sigma = 0;
    std::optional<double> r;
    double tol = 1e-10;
    int max_sweeps = 100000;
    long max_pivots = 200000;
};

int cmd_solve(const SolveArgs& a) {
    const DesignMatrix d(io::read_matrix_csv(a.design));
    const Vector y = io::read_vector_csv(a.response);
    RegressionInstance inst(d, y, a.sigma);
    double r;
    if (a.r) {
        if (!(*a.r >= 0)) throw InvalidInput("--r must be nonnegative");
        r = *a.r;
    } else {
        r = penalty_level(a.A, a.sigma, d.n(), d.M()).r;
    }

    json j;
    j["method"] = a.method;
    j["n"] = d.n();
    j["M"] = d.M();
    j["r"] = r;
    int code = ok;
    Vector beta;
    if (a.method == "lasso") {
        LassoConfig cfg;
        cfg.r = r;
        cfg.tol = a.tol;
        cfg.max_sweeps = a.max_sweeps;
        const LassoResult res = fit_lasso(inst, cfg);
        beta = res.beta_hat.values();
        const KktReport kkt = lasso_kkt_check(inst, beta, r, 1e-8);
        j["objective"] = io::num(res.objective);
        j["converged"] = res.converged;
        j["sweeps"] = res.sweeps_used;
        j["kkt_pass"] = kkt.passes;
        j["kkt_violation"] = io::num(kkt.max_violation);
        j["dantzig_constraint"] = io::num(kkt.scaled_sup_norm);
        if (!res.converged) code = solver;
    } else if (a.method == "dantzig") {
        DantzigConfig cfg;
        cfg.r = r;
        cfg.max_pivots = a.max_pivots;
        const DantzigResult res = fit_dantzig(inst, cfg);
        beta = res.beta_hat.values();
        j["feasible"] = res.feasible;
        j["max_constraint"] = io::num(res.max_constraint);
        j["pivots"] = res.pivots_used;
        j["min_reduced_cost"] = io::num(res.min_reduced_cost);
    } else {
        throw InvalidInput("--method must be lasso or dantzig");
    }
    const auto sup = sparsity_and_support(beta);
    j["beta"] = io::vector_json(beta);
    j["l1_norm"] = beta.lpNorm<1>();
    j["sparsity"] = sup.sparsity;
    j["support"] = io::indices(sup.indices);
    // events need the noise, which real data does not carry
    j["event_A"] = "unknown";
    j["event_B"] = "unknown";
    io::write_file(a.out, j.dump(2) + "\n");
    return code;
}

struct AnalyzeArgs {
    std::string design, out;
    Index s = 1;
    std::optional<Index> m;
    std::vector<double> c0{1.0, 3.0};
    std::uint64_t cap = 1'000'000;
    unsigned threads = 1;
};

int cmd_analyze(const AnalyzeArgs& a) {
    const DesignMatrix d(io::read_matrix_csv(a.design));
    ReQuery q;
    q.enumeration_cap = a.cap;
    q.threads = a.threads;
    const ReAnalysisReport rep = analyze(gram(d), a.s, a.m, a.c0, q);
    json j = io::to_json(rep);
    const KernelCheck kc = kernel_sparsity_check(d, a.s, q);
    j["kernel_sparsity"] = {{"ok", kc.ok}, {"worst_sigma_min", io::num(kc.worst_sigma_min)},
                            {"worst_support", io::indices(kc.worst_support)}, {"exact", kc.exact}};
    io::write_file(a.out, j.dump(2) + "\n");
    return ok;
}

struct OracleArgs {
    std::string design, target, out;
    Index s = 1;
    double eps = 2.0;
    std::uint64_t cap = 1'000'000;
};

int cmd_oracle(const OracleArgs& a) {
    if (!(a.eps > 0)) throw InvalidInput("--eps must be positive");
    const DesignMatrix d(io::read_matrix_csv(a.design));
    const Vector f = io::read_vector_csv(a.target);
    const OracleApproximation o = best_sparse_approx(d, f, a.s, a.cap);
    json j;
    j["s"] = a.s;
    j["eps"] = a.eps;
    j["C_eps"] = c_eps(a.eps);
    j["c0_for_kappa"] = (3.0 + 4.0 / a.eps) * d.f_max() / d.f_min();
    j["support"] = io::indices(o.support);
    j["beta"] = io::vector_json(o.beta_oracle);
    j["bias"] = io::num(o.bias);
    json by_k = json::array();
    for (double b : o.bias_by_k) by_k.push_back(io::num(b));
    j["bias_by_size"] = by_k;
    io::write_file(a.out, j.dump(2) + "\n");
    return ok;
}

struct MonteCarloArgs {
    std::string config, out, summary;
    std::optional<unsigned> threads;
};

int cmd_montecarlo(const MonteCarloArgs& a) {
    ExperimentConfig c = io::read_config(a.config);
    if (a.threads) c.threads = *a.threads;
    std::optional<Matrix> csv;
    if (c.design_kind == DesignKind::csv_file) csv = io::read_matrix_csv(c.design_path);
    const MonteCarloResult res = run_montecarlo(c, csv ? &*csv : nullptr);
    io::emit_report(c, res, a.out, a.summary);
    const auto& s = res.summary;
    std::cerr << "trials " << s.trials << "  event A " << s.event_A.count << "  event B " << s.event_B.count << "\n";
    for (const auto& b : s.bounds)
        std::cerr << "  " << b.name << ": " << b.holds_on_event << "/" << b.on_event << " on event, "
                  << b.excluded << " excluded\n";
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse regression estimators, restricted-eigenvalue analysis and bound checks"};
    app.require_subcommand(1);

    SolveArgs sa;
    auto* solve = app.add_subcommand("solve", "Fit the Lasso or the Dantzig selector");
    solve->add_option("--design", sa.design, "design matrix CSV (n x M)")->required();
    solve->add_option("--response", sa.response, "response CSV (n values)")->required();
    solve->add_option("--method", sa.method)->check(CLI::IsMember({"lasso", "dantzig"}));
    auto* optA = solve->add_option("--A", sa.A, "penalty constant");
    auto* optS = solve->add_option("--sigma", sa.sigma, "noise level");
    solve->add_option("--r", sa.r, "explicit penalty level (overrides A, sigma)");
    solve->add_option("--tol", sa.tol);
    solve->add_option("--max-sweeps", sa.max_sweeps);
    solve->add_option("--max-pivots", sa.max_pivots);
    solve->add_option("--out", sa.out)->required();

    AnalyzeArgs aa;
    auto* an = app.add_subcommand("analyze", "Restricted eigenvalue report for a design");
    an->add_option("--design", aa.design)->required();
    an->add_option("--s", aa.s)->required();
    an->add_option("--m", aa.m);
    an->add_option("--c0", aa.c0)->delimiter(',');
    an->add_option("--cap", aa.cap, "enumeration cap before sampling");
    an->add_option("--threads", aa.threads);
    an->add_option("--out", aa.out)->required();

    OracleArgs oa;
    auto* orc = app.add_subcommand("oracle", "Best s-sparse approximation of a target");
    orc->add_option("--design", oa.design)->required();
    orc->add_option("--target", oa.target)->required();
    orc->add_option("--s", oa.s)->required();
    orc->add_option("--eps", oa.eps);
    orc->add_option("--cap", oa.cap);
    orc->add_option("--out", oa.out)->required();

    MonteCarloArgs ma;
    auto* mc = app.add_subcommand("montecarlo", "Seeded Monte Carlo experiment");
    mc->add_option("--config", ma.config)->required();
    mc->add_option("--out", ma.out, "per-trial CSV")->required();
    mc->add_option("--summary", ma.summary, "summary JSON")->required();
    mc->add_option("--threads", ma.threads);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return invalid;
    }

    try {
        if (*solve) {
            if (!sa.r && (optA->count() == 0 || optS->count() == 0))
                throw InvalidInput("solve: give --A and --sigma, or --r");
            return cmd_solve(sa);
        }
        if (*an) return cmd_analyze(aa);
        if (*orc) return cmd_oracle(oa);
        if (*mc) return cmd_montecarlo(ma);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return ioerr;
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return invalid;
    } catch (const InfeasibleError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return solver;
    } catch (const ResourceError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return solver;
    }
    return invalid;
}
