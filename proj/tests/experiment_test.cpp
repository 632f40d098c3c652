#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sparsereg/experiment.hpp"
#include "sparsereg/io.hpp"
#include "test_util.hpp"

using namespace sparsereg;
using namespace sparsereg::testing;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.design_kind = DesignKind::gaussian_iid;
    c.n = 24;
    c.M = 12;
    c.s = 2;
    c.trials = 6;
    c.seed = 7;
    c.sigma = 0.5;
    return c;
}

double soft(double z, double t) { return z > t ? z - t : (z < -t ? z + t : 0.0); }

std::vector<std::vector<std::string>> parse_rows(const std::string& csv) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) rows.push_back(io::split_csv_line(line));
    return rows;
}

}  // namespace

TEST(Design, SameSeedGivesBitIdenticalInstances) {
    const ExperimentConfig c = small_config();
    const DesignMatrix d1 = build_design(c), d2 = build_design(c);
    EXPECT_EQ(design_hash(d1), design_hash(d2));
    const auto a = generate_instance(c, d1, trial_seed(c.seed, 3));
    const auto b = generate_instance(c, d2, trial_seed(c.seed, 3));
    EXPECT_EQ(std::memcmp(a.instance.y.data(), b.instance.y.data(), sizeof(double) * a.instance.y.size()), 0);
    EXPECT_EQ(a.beta_star, b.beta_star);
    const auto other = generate_instance(c, d1, trial_seed(c.seed, 4));
    EXPECT_NE(a.instance.y, other.instance.y);
}

TEST(Design, NormalizedGaussianColumnsHaveUnitEmpiricalNorm) {
    ExperimentConfig c = small_config();
    c.n = 30;
    c.M = 50;
    const DesignMatrix d = build_design(c);
    for (Index j = 0; j < d.M(); ++j) EXPECT_NEAR(d.column_norms()(j), 1.0, 1e-12);
}

TEST(Design, CorrelatedDesignsReproduceTheTargetGram) {
    for (DesignKind k : {DesignKind::equicorrelated, DesignKind::ar1}) {
        ExperimentConfig c = small_config();
        c.design_kind = k;
        c.rho = 0.3;
        const DesignMatrix d = build_design(c);
        const Matrix want = target_gram(k, c.M, c.rho);
        EXPECT_LT((gram(d).psi - want).cwiseAbs().maxCoeff(), 1e-12) << to_string(k);
    }
}

TEST(Design, SupportAndAmplitudes) {
    ExperimentConfig c = small_config();
    c.amp_low = 1.0;
    c.amp_high = 2.0;
    const DesignMatrix d = build_design(c);
    for (int t = 0; t < 20; ++t) {
        const auto g = generate_instance(c, d, trial_seed(c.seed, t));
        const auto sup = sparsity_and_support(g.beta_star);
        EXPECT_EQ(sup.sparsity, c.s);
        for (Index j : sup.indices) {
            EXPECT_GE(std::abs(g.beta_star(j)), 1.0);
            EXPECT_LE(std::abs(g.beta_star(j)), 2.0);
        }
    }
}

TEST(Design, NoiselessIdentityGivesExactData) {
    ExperimentConfig c;
    c.design_kind = DesignKind::identity;
    c.n = c.M = 8;
    c.s = 3;
    c.sigma = 0.0;
    c.amplitude = AmplitudeScheme::unit;
    const DesignMatrix d = build_design(c);
    const auto g = generate_instance(c, d, 11);
    EXPECT_EQ(g.instance.y, d.x() * g.beta_star);
    EXPECT_EQ(g.instance.noise->norm(), 0.0);
    const auto ev = detect_events(g.instance, penalty_level(c.A, c.sigma, c.n, c.M));
    EXPECT_TRUE(ev.event_A);
    EXPECT_TRUE(ev.event_B);
}

TEST(Design, PerturbationHasRequestedEmpiricalNorm) {
    ExperimentConfig c = small_config();
    c.perturbation = 0.1;
    const DesignMatrix d = build_design(c);
    const auto g = generate_instance(c, d, 5);
    EXPECT_FALSE(g.linear);
    EXPECT_FALSE(g.instance.beta_star.has_value());
    EXPECT_NEAR(empirical_norm(*g.instance.f_true - d.x() * g.beta_star), 0.1, 1e-12);
}

TEST(Events, ThresholdsSeparateAFromB) {
    // V_j = 0.6 r on a unit-norm column: inside B, outside A
    Matrix x(2, 2);
    x << 1, 1, 1, -1;
    const DesignMatrix d(x);
    const PenaltyLevel pen = penalty_level(1.0, 1.0, 2, 2);
    Vector w(2);
    w << 0.6 * pen.r, 0.6 * pen.r;  // X^T w / n = (0.6 r, 0)
    RegressionInstance inst(d, w, 1.0, Vector::Zero(2), std::nullopt, w);
    const EventReport ev = detect_events(inst, pen);
    EXPECT_FALSE(ev.event_A);
    EXPECT_TRUE(ev.event_B);
    EXPECT_NEAR(ev.max_scaled_v, 0.6, 1e-12);

    RegressionInstance no_noise(d, w);
    EXPECT_THROW(detect_events(no_noise, pen), InvalidInput);
}

TEST(Events, AImpliesBOverManyTrials) {
    ExperimentConfig c = small_config();
    c.A = 1.2;
    c.trials = 200;
    const DesignMatrix d = build_design(c);
    const PenaltyLevel pen = penalty_level(c.A, c.sigma, c.n, c.M);
    int a = 0, b = 0;
    for (int t = 0; t < c.trials; ++t) {
        const auto ev = detect_events(generate_instance(c, d, trial_seed(c.seed, t)).instance, pen);
        if (ev.event_A) {
            ++a;
            EXPECT_TRUE(ev.event_B);
        }
        b += ev.event_B;
    }
    EXPECT_LE(a, b);
    EXPECT_GT(b, a);  // at A = 1.2 the two events are distinguishable
}

TEST(Trial, IdentityDesignMatchesSoftThreshold) {
    ExperimentConfig c;
    c.design_kind = DesignKind::identity;
    c.n = c.M = 16;
    c.s = 2;
    c.sigma = 1.0;
    c.A = 2.0;
    const DesignMatrix d = build_design(c);
    auto cache = KappaCache::for_design(d, ReQuery{});
    const TrialRecord rec = run_trial({c, d, *cache}, 0);
    const auto g = generate_instance(c, d, trial_seed(c.seed, 0));
    const Vector z = d.x().transpose() * g.instance.y / static_cast<double>(c.n);
    Vector want(c.M);
    for (Index j = 0; j < c.M; ++j) want(j) = soft(z(j), rec.r);
    EXPECT_NEAR(rec.lasso_l1_norm, want.lpNorm<1>(), 1e-8);
    EXPECT_NEAR(rec.dantzig_l1_norm, want.lpNorm<1>(), 1e-8);
    EXPECT_NEAR(rec.lasso_l1, (want - g.beta_star).lpNorm<1>(), 1e-8);
    EXPECT_NEAR(rec.dantzig_l1, (want - g.beta_star).lpNorm<1>(), 1e-8);
    EXPECT_TRUE(rec.lasso_kkt_pass);
    EXPECT_TRUE(rec.lasso_feasible);
    EXPECT_TRUE(rec.l1_dominance);
    EXPECT_EQ(rec.dantzig_status, "optimal");
    EXPECT_TRUE(rec.error.empty()) << rec.error;
}

TEST(Trial, BoundsRespectTheirEventsAndOrder) {
    ExperimentConfig c = small_config();
    c.bounds.oracle = true;
    c.trials = 10;
    const auto res = run_montecarlo(c);
    const auto names = bound_names(c);
    for (const auto& r : res.records) {
        ASSERT_EQ(r.bounds.size(), names.size());
        for (std::size_t k = 0; k < names.size(); ++k) {
            EXPECT_EQ(r.bounds[k].name, names[k]);
            if (r.bounds[k].counts() && event_holds(r.bounds[k].event, r.events)) {
                EXPECT_TRUE(r.bounds[k].holds) << names[k] << " trial " << r.trial_id;
            }
        }
    }
    for (const auto& b : res.summary.bounds) EXPECT_EQ(b.rate(), 1.0) << b.name;
}

TEST(MonteCarlo, SingleTrialEqualsRunTrial) {
    ExperimentConfig c = small_config();
    c.trials = 1;
    const auto res = run_montecarlo(c);
    const DesignMatrix d = build_design(c);
    auto cache = KappaCache::for_design(d, ReQuery{});
    const TrialRecord direct = run_trial({c, d, *cache}, 0);
    EXPECT_EQ(io::trial_csv(c, res.records), io::trial_csv(c, {direct}));
}

TEST(MonteCarlo, SerialAndParallelCsvAreByteIdentical) {
    ExperimentConfig c = small_config();
    c.trials = 9;
    const std::string serial = io::trial_csv(c, run_montecarlo(c).records);
    c.threads = 4;
    const std::string parallel = io::trial_csv(c, run_montecarlo(c).records);
    EXPECT_EQ(serial, parallel);
}

TEST(MonteCarlo, ZeroTrialsGivesHeaderOnly) {
    ExperimentConfig c = small_config();
    c.trials = 0;
    const auto res = run_montecarlo(c);
    EXPECT_TRUE(res.records.empty());
    const auto rows = parse_rows(io::trial_csv(c, res.records));
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0], io::trial_csv_header(c));
    EXPECT_EQ(res.summary.trials, 0);
}

TEST(MonteCarlo, InvalidConfigsAreRejected) {
    ExperimentConfig c = small_config();
    c.s = 0;
    EXPECT_THROW(run_montecarlo(c), InvalidInput);
    c = small_config();
    c.normalize_columns = false;
    EXPECT_THROW(run_montecarlo(c), InvalidInput);
    c.bounds = {false, false, false, false};
    EXPECT_NO_THROW(run_montecarlo(c));
    c = small_config();
    c.p_list = {2.5};
    EXPECT_THROW(run_montecarlo(c), InvalidInput);
}

TEST(Csv, RoundTripRecomputesHoldsColumns) {
    ExperimentConfig c = small_config();
    const auto res = run_montecarlo(c);
    const auto rows = parse_rows(io::trial_csv(c, res.records));
    ASSERT_EQ(rows.size(), res.records.size() + 1);
    const auto& header = rows[0];
    auto col = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    };
    for (const auto& nm : bound_names(c)) {
        const std::size_t e = col(nm + "_empirical"), r = col(nm + "_rhs"), h = col(nm + "_holds"), st = col(nm + "_status");
        ASSERT_LT(h, header.size());
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i][st] != "ok") {
                EXPECT_EQ(rows[i][h], "NA");
                continue;
            }
            const double emp = std::stod(rows[i][e]), rhs = std::stod(rows[i][r]);
            EXPECT_EQ(rows[i][h], emp <= rhs + kBoundSlack ? "1" : "0") << nm;
        }
    }
    // %.17g survives the round trip exactly
    for (std::size_t i = 1; i < rows.size(); ++i)
        EXPECT_EQ(std::stod(rows[i][col("lasso_l1")]), res.records[i - 1].lasso_l1);
}

TEST(Csv, GoldenHeader) {
    ExperimentConfig c = small_config();
    c.p_list = {1.5};
    c.bounds = {true, true, true, true};
    const std::string want =
        "trial_id,seed,n,M,s,A,sigma,design_kind,event_A,event_B,max_scaled_v,r,lasso_l1,lasso_pred,dantzig_l1,"
        "dantzig_pred,lasso_l1_norm,dantzig_l1_norm,lasso_sparsity,dantzig_sparsity,lasso_converged,lasso_sweeps,"
        "lasso_kkt_violation,lasso_kkt_pass,lasso_constraint,lasso_feasible,dantzig_status,dantzig_pivots,"
        "l1_dominance,cone_dantzig_vs_lasso,cone_dantzig_vs_truth,cone_lasso_vs_truth,"
        "th43-l1_empirical,th43-l1_rhs,th43-l1_holds,th43-l1_status,"
        "th44-pred_empirical,th44-pred_rhs,th44-pred_holds,th44-pred_status,"
        "th42-lp-1.5_empirical,th42-lp-1.5_rhs,th42-lp-1.5_holds,th42-lp-1.5_status,"
        "th4a3-l1_empirical,th4a3-l1_rhs,th4a3-l1_holds,th4a3-l1_status,"
        "th4a4-pred_empirical,th4a4-pred_rhs,th4a4-pred_holds,th4a4-pred_status,"
        "th4a2-lp-1.5_empirical,th4a2-lp-1.5_rhs,th4a2-lp-1.5_holds,th4a2-lp-1.5_status,"
        "th53-l1_empirical,th53-l1_rhs,th53-l1_holds,th53-l1_status,"
        "th54-pred_empirical,th54-pred_rhs,th54-pred_holds,th54-pred_status,"
        "th55-sparsity_empirical,th55-sparsity_rhs,th55-sparsity_holds,th55-sparsity_status,"
        "th52-lp-1.5_empirical,th52-lp-1.5_rhs,th52-lp-1.5_holds,th52-lp-1.5_status,"
        "th1-equiv_empirical,th1-equiv_rhs,th1-equiv_holds,th1-equiv_status,"
        "th2-equiv_empirical,th2-equiv_rhs,th2-equiv_holds,th2-equiv_status,"
        "th3-oracle_empirical,th3-oracle_rhs,th3-oracle_holds,th3-oracle_status,"
        "prop1-oracle_empirical,prop1-oracle_rhs,prop1-oracle_holds,prop1-oracle_status,error\n";
    EXPECT_EQ(io::join_row(io::trial_csv_header(c)), want);
}

TEST(Csv, QuotingAndNumberFormat) {
    EXPECT_EQ(io::csv_quote("plain"), "plain");
    EXPECT_EQ(io::csv_quote("a,b"), "\"a,b\"");
    EXPECT_EQ(io::csv_quote("say \"x\""), "\"say \"\"x\"\"\"");
    EXPECT_EQ(io::split_csv_line("\"a,b\",c"), (std::vector<std::string>{"a,b", "c"}));
    EXPECT_EQ(io::fmt(0.1), "0.10000000000000001");
    EXPECT_EQ(io::fmt(NAN), "nan");
    EXPECT_EQ(io::fmt(-INFINITY), "-inf");
}

TEST(Io, MatrixCsvWithHeaderAndErrors) {
    const Matrix m = io::parse_matrix_csv("x1,x2\n1,2\n3,4.5\n");
    ASSERT_EQ(m.rows(), 2);
    EXPECT_EQ(m(1, 1), 4.5);
    EXPECT_THROW(io::parse_matrix_csv("1,2\n3,abc\n"), InvalidInput);
    EXPECT_THROW(io::parse_matrix_csv("1,2\n3\n"), InvalidInput);
    EXPECT_THROW(io::parse_matrix_csv("a,b\n"), InvalidInput);
    EXPECT_THROW(io::read_matrix_csv("/nonexistent/dir/x.csv"), IoError);
    try {
        io::read_matrix_csv("/nonexistent/dir/x.csv");
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.csv"), std::string::npos);
    }
}

TEST(Io, ConfigJsonRoundTripAndStrictKeys) {
    const auto j = io::json::parse(R"({"design_kind":"ar1","rho":0.4,"n":40,"M":20,"s":3,
        "amplitude":{"scheme":"random-sign-uniform","low":0.5,"high":1.5},"trials":5,"seed":9,
        "bounds":{"oracle":true},"p_list":[2]})");
    const ExperimentConfig c = io::config_from_json(j);
    EXPECT_EQ(c.design_kind, DesignKind::ar1);
    EXPECT_EQ(c.amp_low, 0.5);
    EXPECT_TRUE(c.bounds.oracle);
    const ExperimentConfig back = io::config_from_json(io::to_json(c));
    EXPECT_EQ(io::to_json(back).dump(), io::to_json(c).dump());

    EXPECT_THROW(io::config_from_json(io::json::parse(R"({"n":10,"M":10,"typo":1})")), InvalidInput);
    EXPECT_THROW(io::config_from_json(io::json::parse(R"({"design_kind":"spiral"})")), InvalidInput);
    EXPECT_THROW(io::config_from_json(io::json::parse(R"({"n":"ten"})")), InvalidInput);
}

TEST(Io, SummaryJsonHasNoNonFiniteNumbers) {
    ExperimentConfig c = small_config();
    const auto res = run_montecarlo(c);
    const std::string text = io::summary_json(c, res.summary).dump();
    EXPECT_EQ(text.find("NaN"), std::string::npos);
    EXPECT_EQ(text.find("Infinity"), std::string::npos);
    const auto back = io::json::parse(text);
    EXPECT_EQ(back["trials"].get<int>(), c.trials);
    EXPECT_EQ(back["bounds"].size(), bound_names(c).size());
}

TEST(Io, ReportJsonCarriesExactFlags) {
    const GramMatrix g = gram_from_matrix(equicorrelated(5, 0.2));
    const auto rep = analyze(g, 2, std::optional<Index>(2), {1.0, 3.0}, ReQuery{});
    const auto j = io::to_json(rep);
    ASSERT_EQ(j["per_c0"].size(), 2u);
    EXPECT_TRUE(j["restricted_eigenvalues"][0]["exact"].get<bool>());
    EXPECT_TRUE(j["per_c0"][0]["assumptions"]["assumption_1"].contains("applicable"));
}
