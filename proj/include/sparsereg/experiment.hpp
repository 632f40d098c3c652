#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "sparsereg/bounds.hpp"
#include "sparsereg/core_model.hpp"
#include "sparsereg/dantzig.hpp"
#include "sparsereg/errors.hpp"
#include "sparsereg/lasso.hpp"
#include "sparsereg/parallel.hpp"
#include "sparsereg/re_analysis.hpp"
#include "sparsereg/rng.hpp"

namespace sparsereg {

enum class DesignKind { identity, orthonormal, gaussian_iid, equicorrelated, ar1, csv_file };
enum class AmplitudeScheme { unit, random_sign_uniform };

inline const char* to_string(DesignKind k) {
    switch (k) {
        case DesignKind::identity: return "identity";
        case DesignKind::orthonormal: return "orthonormal";
        case DesignKind::gaussian_iid: return "gaussian-iid";
        case DesignKind::equicorrelated: return "equicorrelated";
        case DesignKind::ar1: return "ar1";
        case DesignKind::csv_file: return "csv-file";
    }
    return "?";
}

inline DesignKind design_kind_from_string(const std::string& s) {
    for (DesignKind k : {DesignKind::identity, DesignKind::orthonormal, DesignKind::gaussian_iid,
                         DesignKind::equicorrelated, DesignKind::ar1, DesignKind::csv_file})
        if (s == to_string(k)) return k;
    throw InvalidInput("unknown design_kind '" + s + "'");
}

/// Which families of bounds a run evaluates.
struct BoundFamilies {
    bool dantzig = true;       // rate bounds against the truth and against the Lasso point
    bool lasso = true;         // Lasso rate and sparsity bounds
    bool equivalence = true;   // Lasso/Dantzig prediction-loss equivalence
    bool oracle = false;       // sparsity oracle inequalities (exhaustive support search)
};

struct ExperimentConfig {
    DesignKind design_kind = DesignKind::gaussian_iid;
    double rho = 0.0;
    std::string design_path;  // csv-file designs
    Index n = 64;
    Index M = 64;
    Index s = 4;
    AmplitudeScheme amplitude = AmplitudeScheme::random_sign_uniform;
    double amp_low = 1.0;
    double amp_high = 2.0;
    double A = 4.0;
    double sigma = 1.0;
    std::int64_t trials = 100;
    std::uint64_t seed = 1;
    bool normalize_columns = true;
    double perturbation = 0.0;  // |h|_n of a non-linear component added to f
    double eps = 2.0;
    std::vector<double> c0_list{1.0, 3.0};
    std::optional<Index> m;     // defaults to s
    std::vector<double> p_list{1.5, 2.0};
    std::uint64_t enumeration_cap = 1'000'000;
    std::uint64_t oracle_cap = 200'000;
    BoundFamilies bounds;
    unsigned threads = 1;
    double lasso_tol = 1e-10;
    int lasso_max_sweeps = 100000;
    std::int64_t lp_max_pivots = 200000;

    Index m_value() const { return m.value_or(s); }
};

inline void validate(const ExperimentConfig& c) {
    if (c.n < 1 || c.M < 2) throw InvalidInput("config: need n >= 1 and M >= 2");
    if (c.s < 1 || c.s > c.M) throw InvalidInput("config: need 1 <= s <= M");
    if (c.trials < 0) throw InvalidInput("config: trials must be >= 0");
    if (!(c.rho > -1.0 && c.rho < 1.0)) throw InvalidInput("config: rho must lie in (-1, 1)");
    if (c.design_kind == DesignKind::equicorrelated && c.rho <= -1.0 / static_cast<double>(c.M - 1))
        throw InvalidInput("config: equicorrelated rho must exceed -1/(M-1)");
    if (c.design_kind == DesignKind::identity && c.n != c.M) throw InvalidInput("config: identity design requires M = n");
    if (c.design_kind == DesignKind::orthonormal && c.n < c.M) throw InvalidInput("config: orthonormal design requires n >= M");
    if (c.design_kind == DesignKind::csv_file && c.design_path.empty())
        throw InvalidInput("config: csv-file design needs design_path");
    if (!(c.A > 0) || !(c.sigma >= 0)) throw InvalidInput("config: need A > 0 and sigma >= 0");
    if (!(c.eps > 0)) throw InvalidInput("config: eps must be positive");
    if (c.perturbation < 0) throw InvalidInput("config: perturbation must be nonnegative");
    if (c.amplitude == AmplitudeScheme::random_sign_uniform && !(c.amp_low <= c.amp_high))
        throw InvalidInput("config: amplitude range is empty");
    for (double p : c.p_list)
        if (!(p > 1.0 && p <= 2.0)) throw InvalidInput("config: p_list entries must lie in (1, 2]");
    for (double c0 : c.c0_list)
        if (!(c0 > 0)) throw InvalidInput("config: c0_list entries must be positive");
    const Index m = c.m_value();
    if (m < 1 || m > c.M) throw InvalidInput("config: m out of range");
    const bool needs_unit = c.bounds.dantzig || c.bounds.lasso || c.bounds.equivalence;
    const bool unit_by_construction = c.design_kind == DesignKind::identity || c.design_kind == DesignKind::orthonormal;
    if (needs_unit && !c.normalize_columns && !unit_by_construction)
        throw InvalidInput("config: rate and equivalence bounds require normalize_columns = true");
}

// ---------------------------------------------------------------------------

inline Matrix orthonormal_columns(Index n, Index M, SplitMix64& rng) {
    std::normal_distribution<double> nd;
    Matrix g(n, M);
    for (Index i = 0; i < g.size(); ++i) g.data()[i] = nd(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(n, M);
    // fix column signs so the factor does not depend on Householder conventions
    const Matrix r = qr.matrixQR().topLeftCorner(M, M).template triangularView<Eigen::Upper>();
    for (Index j = 0; j < M; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

inline Matrix target_gram(DesignKind kind, Index M, double rho) {
    Matrix psi(M, M);
    for (Index i = 0; i < M; ++i)
        for (Index j = 0; j < M; ++j)
            psi(i, j) = i == j ? 1.0 : (kind == DesignKind::equicorrelated ? rho : std::pow(rho, std::abs(static_cast<double>(i - j))));
    return psi;
}

/// Deterministic design for a config (independent of the trial index).
inline DesignMatrix build_design(const ExperimentConfig& c, const Matrix* csv = nullptr) {
    const double sn = std::sqrt(static_cast<double>(c.n));
    SplitMix64 rng(hash_combine(c.seed, 0x64657369676eULL));
    Matrix x;
    switch (c.design_kind) {
        case DesignKind::identity:
            if (c.n != c.M) throw InvalidInput("identity design requires M = n");
            x = sn * Matrix::Identity(c.n, c.M);
            break;
        case DesignKind::orthonormal:
            x = sn * orthonormal_columns(c.n, c.M, rng);
            break;
        case DesignKind::gaussian_iid: {
            std::normal_distribution<double> nd;
            x.resize(c.n, c.M);
            for (Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
            break;
        }
        case DesignKind::equicorrelated:
        case DesignKind::ar1: {
            const Matrix psi = target_gram(c.design_kind, c.M, c.rho);
            Eigen::LLT<Matrix> llt(psi);
            if (llt.info() != Eigen::Success) throw InvalidInput("target correlation matrix is not positive definite");
            const Matrix L = llt.matrixL();
            if (c.n >= c.M) {
                // exact Gram: X^T X / n = L L^T
                x = sn * orthonormal_columns(c.n, c.M, rng) * L.transpose();
            } else {
                std::normal_distribution<double> nd;
                Matrix z(c.n, c.M);
                for (Index i = 0; i < z.size(); ++i) z.data()[i] = nd(rng);
                x = z * L.transpose();
            }
            break;
        }
        case DesignKind::csv_file:
            if (!csv) throw InvalidInput("csv-file design requires the loaded matrix");
            x = *csv;
            break;
    }
    DesignMatrix d(std::move(x));
    return c.normalize_columns ? d.normalized() : d;
}

inline std::uint64_t design_hash(const DesignMatrix& d) {
    std::uint64_t h = hash_combine(static_cast<std::uint64_t>(d.n()), static_cast<std::uint64_t>(d.M()));
    const Matrix& x = d.x();
    for (Index i = 0; i < x.size(); ++i) {
        std::uint64_t bits;
        const double v = x.data()[i];
        std::memcpy(&bits, &v, sizeof bits);
        h = hash_combine(h, bits);
    }
    return h;
}

inline std::uint64_t trial_seed(std::uint64_t master, std::int64_t trial_id) {
    return hash_combine(master, static_cast<std::uint64_t>(trial_id));
}

struct GeneratedInstance {
    RegressionInstance instance;
    Vector beta_star;
    bool linear = true;
};

/// Draws beta*, the optional non-linear component and the noise for one trial.
inline GeneratedInstance generate_instance(const ExperimentConfig& c, const DesignMatrix& d, std::uint64_t tseed) {
    SplitMix64 rng(tseed);
    const Index n = d.n(), M = d.M();
    if (c.s > M) throw InvalidInput("generate_instance: s exceeds M");
    const IndexSet support = random_subset(M, c.s, rng);
    Vector beta = Vector::Zero(M);
    std::uniform_real_distribution<double> amp(c.amp_low, c.amp_high);
    for (Index j : support) {
        if (c.amplitude == AmplitudeScheme::unit) {
            beta(j) = 1.0;
        } else {
            const double sign = (rng() & 1ULL) ? 1.0 : -1.0;
            beta(j) = sign * amp(rng);
        }
    }
    std::normal_distribution<double> nd;
    Vector f = d.x() * beta;
    bool linear = true;
    if (c.perturbation > 0) {
        Vector h(n);
        for (Index i = 0; i < n; ++i) h(i) = nd(rng);
        const double norm = empirical_norm(h);
        if (norm > 0) {
            f += h * (c.perturbation / norm);
            linear = false;
        }
    }
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = c.sigma * nd(rng);
    Vector y = f + w;
    RegressionInstance inst(d, std::move(y), c.sigma, f,
                            linear ? std::optional<CoefficientVector>(CoefficientVector(beta)) : std::nullopt, w);
    return {std::move(inst), beta, linear};
}

// ---------------------------------------------------------------------------

struct EventReport {
    bool event_A = false;
    bool event_B = false;
    double max_scaled_v = 0.0;  // max_j |V_j| / (r |f_j|_n)
};

inline EventReport detect_events(const RegressionInstance& inst, const PenaltyLevel& pen) {
    if (!inst.noise) throw InvalidInput("detect_events: the instance carries no noise vector");
    const DesignMatrix& d = inst.design;
    const Vector V = d.x().transpose() * *inst.noise / static_cast<double>(d.n());
    EventReport ev;
    ev.event_A = ev.event_B = true;
    for (Index j = 0; j < d.M(); ++j) {
        const double thr = pen.r * d.column_norms()(j);
        const double v = std::abs(V(j));
        if (2.0 * v > thr) ev.event_A = false;
        if (v > thr) ev.event_B = false;
        const double scaled = v == 0.0 ? 0.0 : (thr > 0 ? v / thr : std::numeric_limits<double>::infinity());
        ev.max_scaled_v = std::max(ev.max_scaled_v, scaled);
    }
    return ev;
}

// ---------------------------------------------------------------------------
// kappa plug-ins, computed once per design and shared by all trials

class KappaCache {
public:
    using Key = std::tuple<Index, double, Index>;  // (s, c0, m or -1)

    KappaCache(const DesignMatrix& d, ReQuery q) : tables_(gram(d), q) {}

    CertifiedKappa get(Index s, double c0, std::optional<Index> m = std::nullopt) {
        std::lock_guard lock(mutex_);
        const Key key{s, c0, m.value_or(-1)};
        auto it = values_.find(key);
        if (it != values_.end()) return it->second;
        CertifiedKappa v;
        if (s < 1 || s > tables_.gram().M()) v = {std::nullopt, "uncertified"};
        else v = certified_kappa(tables_, s, c0, m);
        return values_.emplace(key, v).first->second;
    }

    double phi_max() const { return tables_.gram().phi_max(); }

    static std::shared_ptr<KappaCache> for_design(const DesignMatrix& d, const ReQuery& q) {
        static std::mutex registry_mutex;
        static std::map<std::pair<std::uint64_t, std::uint64_t>, std::shared_ptr<KappaCache>> registry;
        std::lock_guard lock(registry_mutex);
        const auto key = std::make_pair(design_hash(d), q.enumeration_cap);
        auto it = registry.find(key);
        if (it == registry.end()) it = registry.emplace(key, std::make_shared<KappaCache>(d, q)).first;
        return it->second;
    }

private:
    std::mutex mutex_;
    ReTables tables_;
    std::map<Key, CertifiedKappa> values_;
};

// ---------------------------------------------------------------------------

struct ConeDiagnostic {
    bool evaluated = false;
    bool holds = true;
    double excess = 0.0;  // |D_{J0^c}|_1 - c0 |D_J0|_1
};

inline ConeDiagnostic cone_diagnostic(const Vector& delta, const IndexSet& J0, double c0, double tol = 1e-8) {
    const double in = l1_on(delta, J0);
    const double out = delta.lpNorm<1>() - in;
    return {true, out <= c0 * in + tol, out - c0 * in};
}

struct TrialRecord {
    std::int64_t trial_id = 0;
    std::uint64_t seed = 0;
    bool linear = true;
    EventReport events;
    double r = 0.0;
    // losses against the truth (l1, lp for the first p in p_list) and the regression function
    double lasso_l1 = NAN, lasso_pred = NAN, dantzig_l1 = NAN, dantzig_pred = NAN;
    double lasso_l1_norm = NAN, dantzig_l1_norm = NAN;
    Index lasso_sparsity = -1, dantzig_sparsity = -1;
    // solver diagnostics
    bool lasso_ok = false;
    bool lasso_converged = false;
    std::int64_t lasso_sweeps = 0;
    double lasso_kkt_violation = NAN;
    bool lasso_kkt_pass = false;
    double lasso_constraint = NAN;   // scaled sup-norm of the residual correlations at beta_L
    bool lasso_feasible = false;     // within r + 1e-8
    bool dantzig_ok = false;
    std::string dantzig_status;
    std::int64_t dantzig_pivots = 0;
    bool l1_dominance = false;
    ConeDiagnostic cone_dantzig_vs_lasso;  // c0 = 1, J0 = J(beta_L)
    ConeDiagnostic cone_dantzig_vs_truth;  // c0 = 1, J0 = J(beta*)
    ConeDiagnostic cone_lasso_vs_truth;    // c0 = 3, J0 = J(beta*)
    std::vector<BoundCheck> bounds;
    std::string error;
};

/// Stable list of bound names a config produces (also the CSV column order).
inline std::vector<std::string> bound_names(const ExperimentConfig& c) {
    std::vector<std::string> out;
    auto ps = [&](const std::string& stem) {
        for (double p : c.p_list) out.push_back(stem + p_suffix(p));
    };
    if (c.bounds.dantzig) {
        out.insert(out.end(), {"th43-l1", "th44-pred"});
        ps("th42-lp-");
        out.insert(out.end(), {"th4a3-l1", "th4a4-pred"});
        ps("th4a2-lp-");
    }
    if (c.bounds.lasso) {
        out.insert(out.end(), {"th53-l1", "th54-pred", "th55-sparsity"});
        ps("th52-lp-");
    }
    if (c.bounds.equivalence) out.insert(out.end(), {"th1-equiv", "th2-equiv"});
    if (c.bounds.oracle) out.insert(out.end(), {"th3-oracle", "prop1-oracle"});
    return out;
}

struct TrialContext {
    const ExperimentConfig& config;
    const DesignMatrix& design;
    KappaCache& kappa;
};

inline std::optional<double> kappa_value(KappaCache& k, Index s, double c0, std::optional<Index> m = std::nullopt) {
    return k.get(s, c0, m).value;
}

inline TrialRecord run_trial(const TrialContext& ctx, std::int64_t trial_id) {
    const ExperimentConfig& c = ctx.config;
    const DesignMatrix& d = ctx.design;
    TrialRecord rec;
    rec.trial_id = trial_id;
    rec.seed = trial_seed(c.seed, trial_id);
    const PenaltyLevel pen = penalty_level(c.A, c.sigma, d.n(), d.M());
    rec.r = pen.r;

    GeneratedInstance gen = generate_instance(c, d, rec.seed);
    const RegressionInstance& inst = gen.instance;
    rec.linear = gen.linear;
    rec.events = detect_events(inst, pen);
    const Vector& f = *inst.f_true;
    const Vector& beta_star = gen.beta_star;

    Vector bl, bd;
    try {
        LassoConfig lc;
        lc.r = pen.r;
        lc.tol = c.lasso_tol;
        lc.max_sweeps = c.lasso_max_sweeps;
        const LassoResult lr = fit_lasso(inst, lc);
        bl = lr.beta_hat.values();
        rec.lasso_ok = true;
        rec.lasso_converged = lr.converged;
        rec.lasso_sweeps = lr.sweeps_used;
        const KktReport kkt = lasso_kkt_check(inst, bl, pen.r, 1e-8);
        rec.lasso_kkt_violation = kkt.max_violation;
        rec.lasso_kkt_pass = kkt.passes;
        rec.lasso_constraint = kkt.scaled_sup_norm;
        rec.lasso_feasible = kkt.scaled_sup_norm <= pen.r + 1e-8;
    } catch (const std::exception& e) {
        rec.error += std::string("lasso: ") + e.what() + "; ";
    }
    try {
        DantzigConfig dc;
        dc.r = pen.r;
        dc.max_pivots = c.lp_max_pivots;
        const DantzigResult dr = fit_dantzig(inst, dc);
        bd = dr.beta_hat.values();
        rec.dantzig_ok = true;
        rec.dantzig_status = "optimal";
        rec.dantzig_pivots = dr.pivots_used;
    } catch (const InfeasibleError& e) {
        rec.dantzig_status = "infeasible";
        rec.error += std::string("dantzig: ") + e.what() + "; ";
    } catch (const ResourceError& e) {
        rec.dantzig_status = "budget";
        rec.error += std::string("dantzig: ") + e.what() + "; ";
    } catch (const std::exception& e) {
        rec.dantzig_status = "error";
        rec.error += std::string("dantzig: ") + e.what() + "; ";
    }

    const IndexSet J_star = sparsity_and_support(beta_star).indices;
    if (rec.lasso_ok) {
        rec.lasso_l1 = (bl - beta_star).lpNorm<1>();
        rec.lasso_pred = prediction_error(d, bl, f);
        rec.lasso_l1_norm = bl.lpNorm<1>();
        rec.lasso_sparsity = sparsity_and_support(bl).sparsity;
        if (gen.linear) rec.cone_lasso_vs_truth = cone_diagnostic(bl - beta_star, J_star, 3.0);
    }
    if (rec.dantzig_ok) {
        rec.dantzig_l1 = (bd - beta_star).lpNorm<1>();
        rec.dantzig_pred = prediction_error(d, bd, f);
        rec.dantzig_l1_norm = bd.lpNorm<1>();
        rec.dantzig_sparsity = sparsity_and_support(bd).sparsity;
        if (gen.linear) rec.cone_dantzig_vs_truth = cone_diagnostic(bd - beta_star, J_star, 1.0);
    }
    if (rec.lasso_ok && rec.dantzig_ok) {
        rec.l1_dominance = rec.dantzig_l1_norm <= rec.lasso_l1_norm + 1e-8;
        if (rec.lasso_feasible)
            rec.cone_dantzig_vs_lasso = cone_diagnostic(bd - bl, sparsity_and_support(bl).indices, 1.0);
    }

    const Index s = c.s, m = c.m_value();
    auto inapplicable_all = [&](const std::vector<std::string>& names, RequiredEvent ev) {
        for (const auto& nm : names) rec.bounds.push_back(make_check(nm, NAN, 0, NAN, ev, BoundStatus::inapplicable));
    };
    const bool have_both = rec.lasso_ok && rec.dantzig_ok;

    if (c.bounds.dantzig) {
        std::vector<std::string> th4{"th43-l1", "th44-pred"}, th4a{"th4a3-l1", "th4a4-pred"};
        for (double p : c.p_list) th4.push_back("th42-lp-" + p_suffix(p));
        for (double p : c.p_list) th4a.push_back("th4a2-lp-" + p_suffix(p));
        if (rec.dantzig_ok && gen.linear) {
            auto v = dantzig_bounds(d, bd, beta_star, s, m, kappa_value(ctx.kappa, s, 1.0),
                                    kappa_value(ctx.kappa, s, 1.0, m), pen, c.p_list);
            rec.bounds.insert(rec.bounds.end(), v.begin(), v.end());
        } else {
            inapplicable_all(th4, RequiredEvent::B);
        }
        if (have_both && rec.lasso_feasible) {
            // reference: the Lasso point, which satisfies the Dantzig constraint
            const Index s_ref = rec.lasso_sparsity;
            const Index m_ref = std::max(m, s_ref);
            std::optional<double> k1, km;
            if (s_ref == 0) {
                k1 = km = 1.0;  // every rhs carries a factor s = 0
            } else {
                k1 = kappa_value(ctx.kappa, s_ref, 1.0);
                km = s_ref + m_ref <= d.M() ? kappa_value(ctx.kappa, s_ref, 1.0, m_ref) : std::nullopt;
            }
            auto v = dantzig_bounds(d, bd, bl, s_ref, m_ref, k1, km, pen, c.p_list, true);
            rec.bounds.insert(rec.bounds.end(), v.begin(), v.end());
        } else {
            inapplicable_all(th4a, RequiredEvent::none);
        }
    }
    if (c.bounds.lasso) {
        if (rec.lasso_ok && gen.linear) {
            auto v = lasso_bounds(d, bl, beta_star, s, m, kappa_value(ctx.kappa, s, 3.0),
                                  kappa_value(ctx.kappa, s, 3.0, m), ctx.kappa.phi_max(), pen, c.p_list);
            rec.bounds.insert(rec.bounds.end(), v.begin(), v.end());
        } else {
            std::vector<std::string> names{"th53-l1", "th54-pred", "th55-sparsity"};
            for (double p : c.p_list) names.push_back("th52-lp-" + p_suffix(p));
            inapplicable_all(names, RequiredEvent::A);
        }
    }
    if (c.bounds.equivalence) {
        if (have_both) {
            auto v = equivalence_bounds({d, f, bl, bd}, s, kappa_value(ctx.kappa, s, 1.0), kappa_value(ctx.kappa, s, 5.0), pen);
            rec.bounds.insert(rec.bounds.end(), v.begin(), v.end());
        } else {
            rec.bounds.push_back(make_check("th1-equiv", NAN, 0, NAN, RequiredEvent::AB, BoundStatus::inapplicable));
            rec.bounds.push_back(make_check("th2-equiv", NAN, 0, NAN, RequiredEvent::A, BoundStatus::inapplicable));
        }
    }
    if (c.bounds.oracle) {
        if (have_both) {
            const OracleApproximation oracle = best_sparse_approx(d, f, s, c.oracle_cap);
            const double c0_oracle = (3.0 + 4.0 / c.eps) * d.f_max() / d.f_min();
            OracleInputs in;
            in.eps = c.eps;
            in.kappa = kappa_value(ctx.kappa, s, c0_oracle);
            in.f_max = d.f_max();
            in.f_min = d.f_min();
            in.s = s;
            in.phi_max = ctx.kappa.phi_max();
            rec.bounds.push_back(oracle_inequality_rhs(oracle, pen, OracleVariant::lasso_sparse, in, rec.lasso_pred));

            // weak sparsity: the smallest C0 realised by a best k-sparse fit, k <= s
            BoundCheck prop;
            if (in.kappa && *in.kappa > 0 && pen.r > 0) {
                double C0 = std::numeric_limits<double>::infinity();
                for (Index k = 1; k <= s; ++k)
                    C0 = std::min(C0, weak_sparsity_check(oracle.beta_by_k[static_cast<std::size_t>(k)], d, f, s, 0.0,
                                                          *in.kappa, in.f_max, pen).implied_C0);
                if (std::isfinite(C0)) {
                    in.C0 = C0;
                    const CConstants cc = c_constants(c.eps, C0, in.phi_max, in.f_max, in.f_min, *in.kappa);
                    const double inflated = std::floor(std::max(cc.C1, 1.0) * static_cast<double>(s));
                    if (inflated <= static_cast<double>(d.M()))
                        in.kappa0 = kappa_value(ctx.kappa, static_cast<Index>(inflated), c0_oracle);
                    prop = oracle_inequality_rhs(oracle, pen, OracleVariant::dantzig_weak_sparse, in, rec.dantzig_pred);
                } else {
                    prop = make_check("prop1-oracle", rec.dantzig_pred, 0, NAN, RequiredEvent::A, BoundStatus::inapplicable);
                }
            } else {
                prop = make_check("prop1-oracle", rec.dantzig_pred, 0, in.kappa.value_or(NAN), RequiredEvent::A,
                                  in.kappa ? BoundStatus::vacuous : BoundStatus::uncertified);
            }
            rec.bounds.push_back(prop);
        } else {
            rec.bounds.push_back(make_check("th3-oracle", NAN, 0, NAN, RequiredEvent::A, BoundStatus::inapplicable));
            rec.bounds.push_back(make_check("prop1-oracle", NAN, 0, NAN, RequiredEvent::A, BoundStatus::inapplicable));
        }
    }
    return rec;
}

// ---------------------------------------------------------------------------

inline bool event_holds(RequiredEvent ev, const EventReport& e) {
    switch (ev) {
        case RequiredEvent::A: return e.event_A;
        case RequiredEvent::B: return e.event_B;
        case RequiredEvent::AB: return e.event_A && e.event_B;
        case RequiredEvent::none: return true;
    }
    return false;
}

struct EventCoverage {
    std::int64_t count = 0;
    double frequency = 0.0;
    double standard_error = 0.0;
    double crude = 0.0;    // may be negative: the bound is then vacuous
    double refined = 0.0;
};

struct BoundCoverage {
    std::string name;
    RequiredEvent event = RequiredEvent::none;
    std::int64_t on_event = 0;          // trials where the event held and the check counted
    std::int64_t holds_on_event = 0;
    std::int64_t excluded = 0;          // vacuous / uncertified / inapplicable
    std::int64_t violations_off_event = 0;
    double rate() const { return on_event == 0 ? 1.0 : static_cast<double>(holds_on_event) / static_cast<double>(on_event); }
};

struct CountOnEvent {
    std::int64_t evaluated = 0;
    std::int64_t holds = 0;
};

struct CoverageSummary {
    std::int64_t trials = 0;
    EventCoverage event_A, event_B;
    std::int64_t event_A_implies_B_violations = 0;
    std::vector<BoundCoverage> bounds;
    CountOnEvent l1_dominance, lasso_kkt, lasso_feasible, cone_dantzig_vs_lasso, cone_dantzig_vs_truth_on_B,
        cone_lasso_vs_truth_on_A;
    std::int64_t lasso_failures = 0, dantzig_failures = 0, lasso_not_converged = 0;
    std::map<std::string, std::string> kappa_sources;  // plug-in provenance, e.g. "kappa(4,1)" -> "identity"
    double wall_clock_seconds = 0.0;
};

inline EventCoverage event_coverage(std::int64_t count, std::int64_t trials, double A, Index M, NoiseEvent ev) {
    EventCoverage e;
    e.count = count;
    if (trials > 0) {
        e.frequency = static_cast<double>(count) / static_cast<double>(trials);
        e.standard_error = std::sqrt(e.frequency * (1.0 - e.frequency) / static_cast<double>(trials));
    }
    e.crude = event_probability(A, M, ev, ProbabilityForm::crude);
    e.refined = event_probability(A, M, ev, ProbabilityForm::refined);
    return e;
}

inline CoverageSummary summarize(const ExperimentConfig& c, const std::vector<TrialRecord>& recs) {
    CoverageSummary sum;
    sum.trials = static_cast<std::int64_t>(recs.size());
    std::int64_t a = 0, b = 0;
    std::map<std::string, std::size_t> idx;
    for (const auto& nm : bound_names(c)) {
        idx[nm] = sum.bounds.size();
        sum.bounds.push_back(BoundCoverage{nm});
    }
    auto tally = [](CountOnEvent& t, bool ok) {
        ++t.evaluated;
        if (ok) ++t.holds;
    };
    for (const auto& r : recs) {
        if (r.events.event_A) ++a;
        if (r.events.event_B) ++b;
        if (r.events.event_A && !r.events.event_B) ++sum.event_A_implies_B_violations;
        if (!r.lasso_ok) ++sum.lasso_failures;
        if (!r.dantzig_ok) ++sum.dantzig_failures;
        if (r.lasso_ok && !r.lasso_converged) ++sum.lasso_not_converged;
        if (r.lasso_ok && r.dantzig_ok) tally(sum.l1_dominance, r.l1_dominance);
        if (r.lasso_ok && r.lasso_converged) {
            tally(sum.lasso_kkt, r.lasso_kkt_pass);
            tally(sum.lasso_feasible, r.lasso_feasible);
        }
        if (r.cone_dantzig_vs_lasso.evaluated) tally(sum.cone_dantzig_vs_lasso, r.cone_dantzig_vs_lasso.holds);
        if (r.cone_dantzig_vs_truth.evaluated && r.events.event_B)
            tally(sum.cone_dantzig_vs_truth_on_B, r.cone_dantzig_vs_truth.holds);
        if (r.cone_lasso_vs_truth.evaluated && r.events.event_A)
            tally(sum.cone_lasso_vs_truth_on_A, r.cone_lasso_vs_truth.holds);
        for (const auto& bc : r.bounds) {
            auto it = idx.find(bc.name);
            if (it == idx.end()) continue;
            BoundCoverage& cov = sum.bounds[it->second];
            cov.event = bc.event;
            if (!bc.counts()) {
                ++cov.excluded;
                continue;
            }
            if (event_holds(bc.event, r.events)) {
                ++cov.on_event;
                if (bc.holds) ++cov.holds_on_event;
            } else if (!bc.holds) {
                ++cov.violations_off_event;
            }
        }
    }
    sum.event_A = event_coverage(a, sum.trials, c.A, c.M, NoiseEvent::A);
    sum.event_B = event_coverage(b, sum.trials, c.A, c.M, NoiseEvent::B);
    return sum;
}

struct MonteCarloResult {
    std::vector<TrialRecord> records;  // ordered by trial_id
    CoverageSummary summary;
};

/// Runs all trials (in parallel when config.threads > 1). Records are stored
/// by trial index, so serial and parallel runs produce identical output.
inline MonteCarloResult run_montecarlo(const ExperimentConfig& c, const Matrix* csv_design = nullptr) {
    validate(c);
    const auto start = std::chrono::steady_clock::now();
    const DesignMatrix d = build_design(c, csv_design);
    if (d.n() != c.n || d.M() != c.M) throw InvalidInput("config: n/M do not match the design");
    ReQuery q;
    q.enumeration_cap = c.enumeration_cap;
    auto cache = KappaCache::for_design(d, q);
    TrialContext ctx{c, d, *cache};
    MonteCarloResult out;
    out.records.resize(static_cast<std::size_t>(c.trials));
    parallel_for(static_cast<std::size_t>(c.trials), c.threads,
                 [&](std::size_t i) { out.records[i] = run_trial(ctx, static_cast<std::int64_t>(i)); });
    out.summary = summarize(c, out.records);
    auto label = [](Index s, double c0, std::optional<Index> m) {
        return "kappa(" + std::to_string(s) + "," + (m ? std::to_string(*m) + "," : std::string()) + p_suffix(c0) + ")";
    };
    const Index s = c.s, m = c.m_value();
    std::vector<std::pair<double, bool>> wanted{{1.0, false}, {1.0, true}, {3.0, false}, {3.0, true}, {5.0, false}};
    for (double c0 : c.c0_list) wanted.push_back({c0, false});
    for (const auto& [c0, with_m] : wanted) {
        const std::optional<Index> mm = with_m ? std::optional<Index>(m) : std::nullopt;
        if (mm && s + *mm > d.M()) continue;
        const CertifiedKappa k = cache->get(s, c0, mm);
        out.summary.kappa_sources[label(s, c0, mm)] =
            k.source + (k.value ? ":" + p_suffix(*k.value) : std::string());
    }
    out.summary.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace sparsereg
