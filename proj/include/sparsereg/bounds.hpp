#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sparsereg/combinatorics.hpp"
#include "sparsereg/core_model.hpp"
#include "sparsereg/errors.hpp"

namespace sparsereg {

enum class RequiredEvent { A, B, AB, none };

inline const char* to_string(RequiredEvent e) {
    switch (e) {
        case RequiredEvent::A: return "A";
        case RequiredEvent::B: return "B";
        case RequiredEvent::AB: return "A&B";
        case RequiredEvent::none: return "none";
    }
    return "?";
}

/// ok: rhs evaluated with a usable kappa. vacuous: kappa <= 0 or absent.
/// uncertified: kappa only known heuristically. inapplicable: a side
/// condition of the statement (sparsity, unit norms, ...) fails.
enum class BoundStatus { ok, vacuous, uncertified, inapplicable };

inline const char* to_string(BoundStatus s) {
    switch (s) {
        case BoundStatus::ok: return "ok";
        case BoundStatus::vacuous: return "vacuous";
        case BoundStatus::uncertified: return "uncertified";
        case BoundStatus::inapplicable: return "inapplicable";
    }
    return "?";
}

struct BoundCheck {
    std::string name;
    double empirical = 0.0;
    double rhs = std::numeric_limits<double>::infinity();
    bool holds = true;
    double kappa_used = std::numeric_limits<double>::quiet_NaN();
    RequiredEvent event = RequiredEvent::none;
    BoundStatus status = BoundStatus::ok;

    bool counts() const { return status == BoundStatus::ok; }
};

inline constexpr double kBoundSlack = 1e-9;

inline BoundCheck make_check(std::string name, double empirical, double rhs, double kappa, RequiredEvent event,
                             BoundStatus status = BoundStatus::ok) {
    BoundCheck b;
    b.name = std::move(name);
    b.empirical = empirical;
    b.kappa_used = kappa;
    b.event = event;
    b.status = status;
    if (status == BoundStatus::ok) {
        b.rhs = rhs;
        b.holds = empirical <= rhs + kBoundSlack;
    }
    return b;
}

/// Status for a kappa plug-in: absent -> uncertified, non-positive -> vacuous.
inline BoundStatus kappa_status(std::optional<double> kappa) {
    if (!kappa) return BoundStatus::uncertified;
    if (!(*kappa > 0)) return BoundStatus::vacuous;
    return BoundStatus::ok;
}

inline std::string p_suffix(double p) {
    std::ostringstream os;
    os << p;
    return os.str();
}

// ---------------------------------------------------------------------------

struct CConstants {
    double C_eps = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
};

/// C(eps) = 4 eps + 16 + 16/eps, i.e. 8 b^2/(b - 1) at b = 1 + 2/eps.
inline double c_eps(double eps) {
    if (!(eps > 0)) throw InvalidInput("c_constants: eps must be positive");
    return 4.0 * eps + 16.0 + 16.0 / eps;
}

inline CConstants c_constants(double eps, double C0, double phi_max, double f_max, double f_min, double kappa) {
    if (!(eps > 0)) throw InvalidInput("c_constants: eps must be positive");
    if (!(kappa > 0)) throw InvalidInput("c_constants: kappa must be positive");
    if (C0 < 0) throw InvalidInput("c_constants: C0 must be nonnegative");
    CConstants c;
    c.C_eps = c_eps(eps);
    c.C1 = 4.0 * ((1.0 + eps) * C0 + c.C_eps) * phi_max * f_max * f_max / (kappa * kappa * f_min * f_min);
    c.C2 = 16.0 * c.C1 + c.C_eps;
    return c;
}

// ---------------------------------------------------------------------------

struct SupportFit {
    IndexSet support;
    Vector beta;
    double bias = 0.0;
};

struct OracleApproximation {
    Vector beta_oracle;           // minimizer over M(beta) <= s
    IndexSet support;
    double bias = 0.0;
    std::vector<double> bias_by_k;  // index k = 0..s: best bias over supports of size exactly k
    std::vector<Vector> beta_by_k;
    std::vector<SupportFit> all;    // every enumerated support (only when requested)

    double bias_at_most(Index k) const {
        double b = std::numeric_limits<double>::infinity();
        for (Index j = 0; j <= k && j < static_cast<Index>(bias_by_k.size()); ++j)
            b = std::min(b, bias_by_k[static_cast<std::size_t>(j)]);
        return b;
    }
    double bias_exactly(Index k) const { return bias_by_k.at(static_cast<std::size_t>(k)); }
};

/// Best s-sparse least-squares approximation of f by exhaustive support search.
inline OracleApproximation best_sparse_approx(const DesignMatrix& d, const Vector& f, Index s,
                                              std::uint64_t enumeration_cap = 1'000'000, bool keep_all = false) {
    const Index M = d.M(), n = d.n();
    if (f.size() != n) throw InvalidInput("best_sparse_approx: target has wrong length");
    if (s < 0 || s > M) throw InvalidInput("best_sparse_approx: need 0 <= s <= M");
    std::uint64_t total = 0;
    for (Index k = 0; k <= s; ++k) {
        total += binomial(M, k);
        if (total > enumeration_cap) throw ResourceError("best_sparse_approx: support enumeration exceeds the cap");
    }
    const double nd = static_cast<double>(n);
    OracleApproximation out;
    out.bias_by_k.assign(static_cast<std::size_t>(s + 1), std::numeric_limits<double>::infinity());
    out.beta_by_k.assign(static_cast<std::size_t>(s + 1), Vector::Zero(M));
    out.bias_by_k[0] = f.squaredNorm() / nd;
    if (keep_all) out.all.push_back({IndexSet{}, Vector::Zero(M), out.bias_by_k[0]});
    for (Index k = 1; k <= s; ++k) {
        for_each_subset(M, k, [&](const IndexSet& J) {
            const Matrix xj = columns(d.x(), J);
            const Vector coef = xj.completeOrthogonalDecomposition().solve(f);
            const double bias = (xj * coef - f).squaredNorm() / nd;
            if (bias < out.bias_by_k[static_cast<std::size_t>(k)]) {
                out.bias_by_k[static_cast<std::size_t>(k)] = bias;
                Vector beta = Vector::Zero(M);
                for (std::size_t i = 0; i < J.size(); ++i) beta(J[i]) = coef(static_cast<Index>(i));
                out.beta_by_k[static_cast<std::size_t>(k)] = beta;
            }
            if (keep_all) {
                Vector beta = Vector::Zero(M);
                for (std::size_t i = 0; i < J.size(); ++i) beta(J[i]) = coef(static_cast<Index>(i));
                out.all.push_back({J, std::move(beta), bias});
            }
        });
    }
    // near-ties (rounding level relative to |f|_n^2) go to the smaller sparsity
    const double floor_bias = *std::min_element(out.bias_by_k.begin(), out.bias_by_k.end());
    const double tie = 1e-12 * std::max(1.0, out.bias_by_k[0]);
    std::size_t best = 0;
    while (out.bias_by_k[best] > floor_bias + tie) ++best;
    out.bias = out.bias_by_k[best];
    out.beta_oracle = out.beta_by_k[best];
    out.support = sparsity_and_support(out.beta_oracle).indices;
    return out;
}

// ---------------------------------------------------------------------------

struct EstimatorFits {
    const DesignMatrix& design;
    const Vector& f;            // regression function at the design points
    const Vector& beta_lasso;
    const Vector& beta_dantzig;
    double zero_tol = 0.0;      // sparsity threshold applied to both estimates
};

inline double prediction_error(const DesignMatrix& d, const Vector& beta, const Vector& f) {
    return (d.x() * beta - f).squaredNorm() / static_cast<double>(d.n());
}

/// Approximate-equivalence bounds between the two estimators.
inline std::vector<BoundCheck> equivalence_bounds(const EstimatorFits& t, Index s, std::optional<double> kappa_s1,
                                                  std::optional<double> kappa_s5, const PenaltyLevel& pen) {
    std::vector<BoundCheck> out;
    const DesignMatrix& d = t.design;
    const double err_l = prediction_error(d, t.beta_lasso, t.f);
    const double err_d = prediction_error(d, t.beta_dantzig, t.f);
    const double logM = pen.log_m(), nd = static_cast<double>(pen.n);
    const double s2 = pen.sigma * pen.sigma, A2 = pen.A * pen.A;

    const Index ml = sparsity_and_support(t.beta_lasso, t.zero_tol).sparsity;
    {
        BoundStatus st = ml <= s ? kappa_status(kappa_s1) : BoundStatus::inapplicable;
        double rhs = 0.0;
        if (st == BoundStatus::ok)
            rhs = 16.0 * A2 * static_cast<double>(ml) * s2 / nd * d.f_max() * d.f_max() / (*kappa_s1 * *kappa_s1) * logM;
        out.push_back(make_check("th1-equiv", std::abs(err_d - err_l), rhs, kappa_s1.value_or(NAN), RequiredEvent::AB, st));
    }
    const Index md = sparsity_and_support(t.beta_dantzig, t.zero_tol).sparsity;
    {
        BoundStatus st = (md <= s && d.has_unit_norms()) ? kappa_status(kappa_s5) : BoundStatus::inapplicable;
        double rhs = 0.0;
        if (st == BoundStatus::ok)
            rhs = 10.0 * err_d + 81.0 * A2 * static_cast<double>(md) * s2 * logM / (nd * *kappa_s5 * *kappa_s5);
        out.push_back(make_check("th2-equiv", err_l, rhs, kappa_s5.value_or(NAN), RequiredEvent::A, st));
    }
    return out;
}

namespace detail {

inline double lp_power(const Vector& v, double p) { return v.array().abs().pow(p).sum(); }

}  // namespace detail

/// Rate bounds for the Dantzig selector against a reference beta of sparsity
/// s (the truth on event B, or any feasible beta deterministically).
inline std::vector<BoundCheck> dantzig_bounds(const DesignMatrix& d, const Vector& beta_dantzig, const Vector& beta_ref,
                                              Index s, Index m, std::optional<double> kappa_s1,
                                              std::optional<double> kappa_sm1, const PenaltyLevel& pen,
                                              const std::vector<double>& p_list, bool feasible_reference = false,
                                              double zero_tol = 0.0) {
    const std::string prefix = feasible_reference ? "th4a" : "th4";
    const RequiredEvent ev = feasible_reference ? RequiredEvent::none : RequiredEvent::B;
    const Vector delta = beta_dantzig - beta_ref;
    const double sd = static_cast<double>(s), logM = pen.log_m(), nd = static_cast<double>(pen.n);
    const bool side_ok = d.has_unit_norms() && sparsity_and_support(beta_ref, zero_tol).sparsity <= s;
    auto status = [&](std::optional<double> k) { return side_ok ? kappa_status(k) : BoundStatus::inapplicable; };

    std::vector<BoundCheck> out;
    const BoundStatus st1 = status(kappa_s1);
    const double k1 = kappa_s1.value_or(NAN);
    const double l1 = delta.lpNorm<1>();
    const double pred = (d.x() * delta).squaredNorm();
    out.push_back(make_check(prefix + "3-l1", l1, 8.0 * pen.A * pen.sigma * sd * std::sqrt(logM / nd) / (k1 * k1), k1,
                             ev, st1));
    out.push_back(make_check(prefix + "4-pred", pred, 16.0 * pen.A * pen.A * pen.sigma * pen.sigma * sd * logM / (k1 * k1),
                             k1, ev, st1));
    const BoundStatus stm = (m >= s && s + m <= d.M()) ? status(kappa_sm1) : BoundStatus::inapplicable;
    const double km = kappa_sm1.value_or(NAN);
    for (double p : p_list) {
        if (!(p > 1.0 && p <= 2.0)) throw InvalidInput("dantzig_bounds: p must lie in (1, 2]");
        const double md = static_cast<double>(std::max<Index>(m, 1));
        const double rhs = std::pow(2.0, p - 1.0) * 8.0 * std::pow(1.0 + std::sqrt(sd / md), 2.0 * (p - 1.0)) * sd *
                           std::pow(pen.A * pen.sigma / (km * km) * std::sqrt(logM / nd), p);
        out.push_back(make_check(prefix + "2-lp-" + p_suffix(p), detail::lp_power(delta, p), rhs, km, ev, stm));
    }
    return out;
}

/// Rate and sparsity bounds for the Lasso against the truth (event A).
inline std::vector<BoundCheck> lasso_bounds(const DesignMatrix& d, const Vector& beta_lasso, const Vector& beta_star,
                                            Index s, Index m, std::optional<double> kappa_s3,
                                            std::optional<double> kappa_sm3, double phi_max, const PenaltyLevel& pen,
                                            const std::vector<double>& p_list, double zero_tol = 0.0) {
    const Vector delta = beta_lasso - beta_star;
    const double sd = static_cast<double>(s), logM = pen.log_m(), nd = static_cast<double>(pen.n);
    const bool side_ok = d.has_unit_norms() && sparsity_and_support(beta_star, zero_tol).sparsity <= s;
    auto status = [&](std::optional<double> k) { return side_ok ? kappa_status(k) : BoundStatus::inapplicable; };
    const RequiredEvent ev = RequiredEvent::A;

    std::vector<BoundCheck> out;
    const BoundStatus st3 = status(kappa_s3);
    const double k3 = kappa_s3.value_or(NAN);
    out.push_back(make_check("th53-l1", delta.lpNorm<1>(), 16.0 * pen.A * pen.sigma * sd * std::sqrt(logM / nd) / (k3 * k3),
                             k3, ev, st3));
    out.push_back(make_check("th54-pred", (d.x() * delta).squaredNorm(),
                             16.0 * pen.A * pen.A * pen.sigma * pen.sigma * sd * logM / (k3 * k3), k3, ev, st3));
    out.push_back(make_check("th55-sparsity",
                             static_cast<double>(sparsity_and_support(beta_lasso, zero_tol).sparsity),
                             64.0 * phi_max * sd / (k3 * k3), k3, ev, st3));
    const BoundStatus stm = (m >= s && s + m <= d.M()) ? status(kappa_sm3) : BoundStatus::inapplicable;
    const double km = kappa_sm3.value_or(NAN);
    for (double p : p_list) {
        if (!(p > 1.0 && p <= 2.0)) throw InvalidInput("lasso_bounds: p must lie in (1, 2]");
        const double md = static_cast<double>(std::max<Index>(m, 1));
        const double rhs = 16.0 * std::pow(1.0 + 3.0 * std::sqrt(sd / md), 2.0 * (p - 1.0)) * sd *
                           std::pow(pen.A * pen.sigma / (km * km) * std::sqrt(logM / nd), p);
        out.push_back(make_check("th52-lp-" + p_suffix(p), detail::lp_power(delta, p), rhs, km, ev, stm));
    }
    return out;
}

// ---------------------------------------------------------------------------

enum class OracleVariant { lasso_sparse, lasso_admissible, dantzig_weak_sparse };

struct OracleInputs {
    double eps = 2.0;
    std::optional<double> kappa;  // kappa(s, (3 + 4/eps) f_max/f_min) for lasso_sparse, kappa0 for dantzig_weak_sparse
    double f_max = 1.0;
    Index s = 1;
    // lasso_admissible
    double gamma = 0.0;
    std::vector<IndexSet> admissible_supports;
    // dantzig_weak_sparse: kappa enters C1, kappa0 (at the inflated sparsity) the variance term
    std::optional<double> kappa0;
    double C0 = 0.0;
    double phi_max = 1.0;
    double f_min = 1.0;
};

/// Right-hand side of the sparsity oracle inequalities; `empirical` is the
/// prediction loss of the estimator the statement is about.
inline BoundCheck oracle_inequality_rhs(const OracleApproximation& oracle, const PenaltyLevel& pen,
                                        OracleVariant variant, const OracleInputs& in, double empirical) {
    const double r2 = pen.A * pen.A * pen.sigma * pen.sigma * pen.log_m() / static_cast<double>(pen.n);
    const double C = c_eps(in.eps);
    const double fmax2 = in.f_max * in.f_max;
    switch (variant) {
        case OracleVariant::lasso_sparse: {
            const BoundStatus st = kappa_status(in.kappa);
            if (st != BoundStatus::ok) return make_check("th3-oracle", empirical, 0, in.kappa.value_or(NAN), RequiredEvent::A, st);
            const double k2 = *in.kappa * *in.kappa;
            double best = std::numeric_limits<double>::infinity();
            const Index kmax = std::min<Index>(in.s, static_cast<Index>(oracle.bias_by_k.size()) - 1);
            for (Index k = 0; k <= kmax; ++k)
                best = std::min(best, oracle.bias_by_k[static_cast<std::size_t>(k)] + C * fmax2 * r2 / k2 * static_cast<double>(k));
            return make_check("th3-oracle", empirical, (1.0 + in.eps) * best, *in.kappa, RequiredEvent::A);
        }
        case OracleVariant::lasso_admissible: {
            if (!(in.gamma > 0)) throw InvalidInput("oracle_inequality_rhs: gamma must be positive");
            if (in.admissible_supports.empty()) throw InvalidInput("oracle_inequality_rhs: no admissible beta");
            double best = std::numeric_limits<double>::infinity();
            bool found = false;
            for (const SupportFit& fit : oracle.all) {
                if (std::find(in.admissible_supports.begin(), in.admissible_supports.end(), fit.support) ==
                    in.admissible_supports.end())
                    continue;
                found = true;
                best = std::min(best, fit.bias + C * fmax2 * r2 / (in.gamma * in.gamma) *
                                                     static_cast<double>(fit.support.size()));
            }
            if (!found) throw InvalidInput("oracle_inequality_rhs: no admissible beta among the enumerated supports");
            return make_check("admissible-oracle", empirical, (1.0 + in.eps) * best, in.gamma, RequiredEvent::A);
        }
        case OracleVariant::dantzig_weak_sparse: {
            const BoundStatus st = kappa_status(in.kappa);
            if (st != BoundStatus::ok) return make_check("prop1-oracle", empirical, 0, in.kappa.value_or(NAN), RequiredEvent::A, st);
            const CConstants c = c_constants(in.eps, in.C0, in.phi_max, in.f_max, in.f_min, *in.kappa);
            const double sd = static_cast<double>(in.s);
            if (sd * std::max(c.C1, 1.0) > static_cast<double>(pen.M))
                return make_check("prop1-oracle", empirical, 0, *in.kappa, RequiredEvent::A, BoundStatus::inapplicable);
            const std::optional<double> k0 = in.kappa0 ? in.kappa0 : in.kappa;
            const BoundStatus st0 = kappa_status(k0);
            if (st0 != BoundStatus::ok) return make_check("prop1-oracle", empirical, 0, k0.value_or(NAN), RequiredEvent::A, st0);
            const double rhs = (1.0 + in.eps) * oracle.bias_exactly(in.s) + c.C2 * fmax2 * r2 / (*k0 * *k0) * sd;
            return make_check("prop1-oracle", empirical, rhs, *k0, RequiredEvent::A);
        }
    }
    throw InvalidInput("oracle_inequality_rhs: unknown variant");
}

struct WeakSparsity {
    bool member = false;
    double implied_C0 = std::numeric_limits<double>::infinity();
};

/// Is |f_beta - f|_n^2 <= C0 f_max^2 r^2 / kappa^2 * M(beta) with M(beta) <= s?
inline WeakSparsity weak_sparsity_check(const Vector& beta, const DesignMatrix& d, const Vector& f, Index s, double C0,
                                        double kappa, double f_max, const PenaltyLevel& pen) {
    if (!(kappa > 0)) throw InvalidInput("weak_sparsity_check: kappa must be positive");
    if (!(pen.r > 0)) throw InvalidInput("weak_sparsity_check: r must be positive");
    const Index mb = sparsity_and_support(beta).sparsity;
    const double bias = prediction_error(d, beta, f);
    WeakSparsity out;
    if (mb > s) return out;
    const double unit = f_max * f_max * pen.r * pen.r / (kappa * kappa) * static_cast<double>(mb);
    if (mb == 0) {
        out.implied_C0 = bias == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
        out.implied_C0 = bias / unit;
    }
    out.member = bias <= C0 * unit;
    return out;
}

}  // namespace sparsereg
