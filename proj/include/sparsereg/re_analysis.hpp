#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sparsereg/combinatorics.hpp"
#include "sparsereg/core_model.hpp"
#include "sparsereg/errors.hpp"
#include "sparsereg/parallel.hpp"
#include "sparsereg/rng.hpp"

namespace sparsereg {

struct ReQuery {
    Index s = 1;
    std::optional<Index> m;
    double c0 = 1.0;
    std::uint64_t enumeration_cap = 1'000'000;
    int search_budget = 64;             // multi-starts per J0 (|J0| > 1)
    std::uint64_t sample_count = 20'000;  // subsets drawn once the cap is exceeded
    std::uint64_t seed = 0;
    unsigned threads = 1;
    int pg_iterations = 500;
    int outer_iterations = 40;
};

struct RestrictedEigen {
    double phi_min = 0.0;
    double phi_max = 0.0;
    bool exact = true;
};

struct RestrictedCorrelation {
    double theta = 0.0;
    bool exact = true;
};

struct Verdict {
    bool holds = false;
    double slack = 0.0;  // LHS - RHS of the strict inequality
    bool exact = true;
};

/// Strict inequality lhs > rhs, with a relative guard so that analytic
/// equality evaluated in floating point is reported as failing.
inline Verdict strict_verdict(double lhs, double rhs, bool exact) {
    const double slack = lhs - rhs;
    const double guard = 1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
    return Verdict{slack > guard, slack, exact};
}

namespace detail {

inline double lambda_min(const Matrix& a) {
    if (a.rows() == 1) return a(0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline double lambda_max(const Matrix& a) {
    if (a.rows() == 1) return a(0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(a.rows() - 1);
}

inline std::uint64_t subset_seed(std::uint64_t seed, const IndexSet& J) {
    std::uint64_t h = splitmix64(seed);
    for (Index j : J) h = hash_combine(h, static_cast<std::uint64_t>(j));
    return h;
}

/// Euclidean projection onto {x : |x|_1 <= radius}.
inline Vector project_l1_ball(const Vector& v, double radius) {
    if (radius <= 0.0) return Vector::Zero(v.size());
    if (v.lpNorm<1>() <= radius) return v;
    thread_local std::vector<double> u;  // reused: this runs in the innermost loop of the cone search
    u.resize(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) u[static_cast<std::size_t>(i)] = std::abs(v(i));
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumsum += u[j];
        const double t = (cumsum - radius) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    Vector out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double mag = std::max(std::abs(v(i)) - theta, 0.0);
        out(i) = v(i) < 0 ? -mag : mag;
    }
    return out;
}

}  // namespace detail

/// Restricted eigenvalues phi_min(u), phi_max(u) over supports of size u.
inline RestrictedEigen restricted_eigenvalues(const GramMatrix& gram, Index u, const ReQuery& q = {}) {
    const Index M = gram.M();
    if (u < 1 || u > M) throw InvalidInput("restricted_eigenvalues: u must lie in [1, M]");
    RestrictedEigen out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), true};
    auto visit = [&](const IndexSet& J) {
        const Matrix sub = submatrix(gram.psi, J, J);
        if (u == 1) {
            out.phi_min = std::min(out.phi_min, sub(0, 0));
            out.phi_max = std::max(out.phi_max, sub(0, 0));
            return;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(sub, Eigen::EigenvaluesOnly);
        out.phi_min = std::min(out.phi_min, es.eigenvalues()(0));
        out.phi_max = std::max(out.phi_max, es.eigenvalues()(u - 1));
    };
    if (binomial(M, u) <= q.enumeration_cap) {
        for_each_subset(M, u, visit);
    } else {
        out.exact = false;
        SplitMix64 rng(hash_combine(q.seed, static_cast<std::uint64_t>(u)));
        for (std::uint64_t k = 0; k < q.sample_count; ++k) visit(random_subset(M, u, rng));
    }
    return out;
}

/// Real-valued u is floored (sparsity is integral).
inline RestrictedEigen restricted_eigenvalues(const GramMatrix& gram, double u, const ReQuery& q = {}) {
    return restricted_eigenvalues(gram, static_cast<Index>(std::floor(u)), q);
}

/// theta_{m1,m2}: largest singular value of Psi_{I1,I2} over disjoint I1, I2
/// of sizes m1, m2 (the maximum over smaller sizes is never larger).
inline RestrictedCorrelation restricted_correlation(const GramMatrix& gram, Index m1, Index m2,
                                                    const ReQuery& q = {}) {
    const Index M = gram.M();
    if (m1 < 1 || m2 < 1) throw InvalidInput("restricted_correlation: block sizes must be >= 1");
    if (m1 + m2 > M) throw InvalidInput("restricted_correlation: undefined for m1 + m2 > M");
    if (m1 > m2) std::swap(m1, m2);  // theta is symmetric; enumerate the small side
    const Matrix& psi = gram.psi;

    // For fixed I1 the value is sqrt(lambda_max(sum_{j in I2} c_j c_j^T)),
    // c_j = Psi_{I1, j}.  With |I1| = 1 this is the sum of the m2 largest c_j^2.
    auto best_for = [&](const IndexSet& I1, const std::optional<SplitMix64>& sampler_seed,
                        std::uint64_t budget) -> double {
        const IndexSet rest = complement(I1, M);
        if (m1 == 1) {
            std::vector<double> sq;
            sq.reserve(rest.size());
            for (Index j : rest) sq.push_back(psi(I1[0], j) * psi(I1[0], j));
            std::partial_sort(sq.begin(), sq.begin() + m2, sq.end(), std::greater<>());
            double acc = 0.0;
            for (Index k = 0; k < m2; ++k) acc += sq[static_cast<std::size_t>(k)];
            return std::sqrt(acc);
        }
        std::vector<Matrix> outer;
        outer.reserve(rest.size());
        for (Index j : rest) {
            Vector c(m1);
            for (Index a = 0; a < m1; ++a) c(a) = psi(I1[static_cast<std::size_t>(a)], j);
            outer.push_back(c * c.transpose());
        }
        IndexSet pos(rest.size());
        for (std::size_t k = 0; k < rest.size(); ++k) pos[k] = static_cast<Index>(k);
        double best = 0.0;
        auto eval = [&](const IndexSet& I2pos) {
            Matrix s = Matrix::Zero(m1, m1);
            for (Index p : I2pos) s += outer[static_cast<std::size_t>(p)];
            best = std::max(best, detail::lambda_max(s));
        };
        if (!sampler_seed) {
            for_each_subset(pos, m2, eval);
        } else {
            SplitMix64 rng = *sampler_seed;
            for (std::uint64_t k = 0; k < budget; ++k) eval(random_subset(pos, m2, rng));
        }
        return std::sqrt(std::max(best, 0.0));
    };

    RestrictedCorrelation out{0.0, true};
    const std::uint64_t n1 = binomial(M, m1);
    const std::uint64_t n2 = m1 == 1 ? 1 : binomial(M - m1, m2);
    const bool exact = n1 <= q.enumeration_cap && (n2 == 0 || n1 <= q.enumeration_cap / n2);
    if (exact) {
        for_each_subset(M, m1, [&](const IndexSet& I1) { out.theta = std::max(out.theta, best_for(I1, std::nullopt, 0)); });
    } else {
        out.exact = false;
        SplitMix64 rng(hash_combine(q.seed, static_cast<std::uint64_t>(m1 * 1000 + m2)));
        const std::uint64_t outer_draws = std::max<std::uint64_t>(1, std::min<std::uint64_t>(n1, q.sample_count / 10));
        const std::uint64_t inner_draws = std::max<std::uint64_t>(1, q.sample_count / outer_draws);
        for (std::uint64_t k = 0; k < outer_draws; ++k) {
            const IndexSet I1 = random_subset(M, m1, rng);
            out.theta = std::max(out.theta, best_for(I1, SplitMix64(rng()), inner_draws));
        }
    }
    return out;
}

inline RestrictedCorrelation restricted_correlation(const DesignMatrix& design, Index m1, Index m2,
                                                    const ReQuery& q = {}) {
    return restricted_correlation(gram(design), m1, m2, q);
}

/// Memoizes phi(u) and theta(m1, m2) for one Gram matrix.
class ReTables {
public:
    ReTables(GramMatrix g, ReQuery q) : gram_(std::move(g)), q_(std::move(q)) {}

    const GramMatrix& gram() const { return gram_; }
    const ReQuery& query() const { return q_; }

    const RestrictedEigen& phi(Index u) {
        auto it = phi_.find(u);
        if (it == phi_.end()) it = phi_.emplace(u, restricted_eigenvalues(gram_, u, q_)).first;
        return it->second;
    }

    const RestrictedCorrelation& theta(Index m1, Index m2) {
        const auto key = std::make_pair(std::min(m1, m2), std::max(m1, m2));
        auto it = theta_.find(key);
        if (it == theta_.end()) it = theta_.emplace(key, restricted_correlation(gram_, m1, m2, q_)).first;
        return it->second;
    }

    const std::map<Index, RestrictedEigen>& phi_table() const { return phi_; }
    const std::map<std::pair<Index, Index>, RestrictedCorrelation>& theta_table() const { return theta_; }

private:
    GramMatrix gram_;
    ReQuery q_;
    std::map<Index, RestrictedEigen> phi_;
    std::map<std::pair<Index, Index>, RestrictedCorrelation> theta_;
};

struct KappaLowerBounds {
    std::optional<double> kappa1;  // set only when defined and positive
    std::optional<double> kappa2;
    bool kappa1_defined = false;   // domain conditions met (value may still be <= 0)
    bool kappa2_defined = false;
    double kappa1_raw = std::numeric_limits<double>::quiet_NaN();
    double kappa2_raw = std::numeric_limits<double>::quiet_NaN();
    bool exact = true;             // every phi/theta used came from full enumeration
};

inline KappaLowerBounds kappa_lower_bounds(ReTables& t, Index s, std::optional<Index> m, double c0) {
    const Index M = t.gram().M();
    if (s < 1 || s > M) throw InvalidInput("kappa_lower_bounds: need 1 <= s <= M");
    if (!(c0 > 0)) throw InvalidInput("kappa_lower_bounds: c0 must be positive");
    KappaLowerBounds out;
    if (2 * s <= M && 3 * s <= M) {
        const RestrictedEigen& p2s = t.phi(2 * s);
        const RestrictedCorrelation& th = t.theta(s, 2 * s);
        out.kappa1_defined = true;
        out.exact = out.exact && p2s.exact && th.exact;
        if (p2s.phi_min > 0) {
            out.kappa1_raw = std::sqrt(p2s.phi_min) * (1.0 - c0 * th.theta / p2s.phi_min);
            if (out.kappa1_raw > 0) out.kappa1 = out.kappa1_raw;
        }
    }
    if (m && *m >= s && s + *m <= M) {
        const RestrictedEigen& psm = t.phi(s + *m);
        const RestrictedEigen& pm = t.phi(*m);
        out.kappa2_defined = true;
        out.exact = out.exact && psm.exact && pm.exact;
        if (psm.phi_min > 0) {
            const double ratio = static_cast<double>(s) * pm.phi_max / (static_cast<double>(*m) * psm.phi_min);
            out.kappa2_raw = std::sqrt(psm.phi_min) * (1.0 - c0 * std::sqrt(ratio));
            if (out.kappa2_raw > 0) out.kappa2 = out.kappa2_raw;
        }
    }
    return out;
}

inline KappaLowerBounds kappa_lower_bounds(const GramMatrix& g, Index s, std::optional<Index> m, double c0,
                                           const ReQuery& q = {}) {
    ReTables t(g, q);
    return kappa_lower_bounds(t, s, m, c0);
}

/// Verdicts for Assumptions 1-5; an entry is empty when the assumption's
/// domain conditions (e.g. 3s <= M) are not met.
struct AssumptionVerdicts {
    std::array<std::optional<Verdict>, 5> v;
    const std::optional<Verdict>& operator[](int k) const { return v[static_cast<std::size_t>(k - 1)]; }
};

inline AssumptionVerdicts check_assumptions(ReTables& t, Index s, std::optional<Index> m, double c0,
                                            bool include_unit_diagonal_assumption = true) {
    const Index M = t.gram().M();
    if (s < 1 || s > M) throw InvalidInput("check_assumptions: need 1 <= s <= M");
    if (!(c0 > 0)) throw InvalidInput("check_assumptions: c0 must be positive");
    AssumptionVerdicts out;
    const double sd = static_cast<double>(s);
    if (2 * s <= M && 3 * s <= M) {
        const auto& p = t.phi(2 * s);
        const auto& th = t.theta(s, 2 * s);
        out.v[0] = strict_verdict(p.phi_min, c0 * th.theta, p.exact && th.exact);
    }
    if (m && *m >= s && s + *m <= M && 2 * s <= M) {
        const auto& psm = t.phi(s + *m);
        const auto& pm = t.phi(*m);
        out.v[1] = strict_verdict(static_cast<double>(*m) * psm.phi_min, c0 * c0 * sd * pm.phi_max,
                                  psm.exact && pm.exact);
    }
    if (s + 1 <= M) {
        const auto& p = t.phi(s);
        const auto& th = t.theta(s, 1);
        out.v[2] = strict_verdict(p.phi_min, 2.0 * c0 * th.theta * std::sqrt(sd), p.exact && th.exact);
    }
    const auto& p = t.phi(s);
    const auto& th11 = t.theta(1, 1);
    out.v[3] = strict_verdict(p.phi_min, 2.0 * c0 * th11.theta * sd, p.exact && th11.exact);
    if (include_unit_diagonal_assumption) {
        if (!t.gram().has_unit_diagonal())
            throw InvalidInput("check_assumptions: the coherence assumption requires a unit-diagonal Gram matrix");
        out.v[4] = strict_verdict(1.0 / ((1.0 + 2.0 * c0) * sd), th11.theta, th11.exact);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cone minimization for a fixed J0

struct ConeSearchResult {
    double ratio = std::numeric_limits<double>::infinity();    // |X D|/(sqrt n |D_J0|)
    double ratio_m = std::numeric_limits<double>::infinity();  // |X D|/(sqrt n |D_J01|)
    Vector delta;
    Vector delta_m;
};

namespace detail {

/// Minimizes Delta^T Psi Delta over the c0-cone of J0 with |Delta_J0|_2 = 1 by
/// alternating a convex l1-ball step on Delta_{J0^c} and a sphere step on Delta_J0.
class ConeSearch {
public:
    ConeSearch(const Matrix& psi, const IndexSet& J0, double c0, std::optional<Index> m, const ReQuery& q)
        : J0_(J0), Jc_(complement(J0, psi.rows())), c0_(c0), m_(m), q_(q) {
        P_ = submatrix(psi, J0_, J0_);
        Q_ = submatrix(psi, J0_, Jc_);
        R_ = submatrix(psi, Jc_, Jc_);
        M_ = psi.rows();
        L_ = Jc_.empty() ? 1.0 : std::max(lambda_max(R_), 1e-12);
        lp_ = std::max(lambda_max(P_), 1e-12);
    }

    ConeSearchResult run() {
        const Index k = static_cast<Index>(J0_.size());
        if (Jc_.empty()) {
            Vector a = smallest_eigvec();
            consider(a, Vector::Zero(0));
            return best_;
        }
        SplitMix64 rng(subset_seed(q_.seed, J0_));
        std::normal_distribution<double> nd;
        const int starts = k == 1 ? 1 : std::max(1, q_.search_budget);
        for (int st = 0; st < starts; ++st) {
            Vector a(k);
            if (k == 1) a(0) = 1.0;
            else if (st == 0) a = smallest_eigvec();
            else {
                for (Index i = 0; i < k; ++i) a(i) = nd(rng);
                if (a.norm() == 0) a(0) = 1.0;
                a.normalize();
            }
            Vector b = inner(a, Vector::Zero(static_cast<Index>(Jc_.size())), k == 1 ? 1e-14 : kLooseTol);
            double f = value(a, b);
            consider(a, b);
            if (k == 1) continue;
            double eta = 0.5 / lp_;
            for (int it = 0; it < q_.outer_iterations; ++it) {
                const double f_start = f;
                const Vector grad = P_ * a + Q_ * b;
                const Vector g = 2.0 * (grad - a.dot(grad) * a);
                if (g.norm() < 1e-14) break;
                bool moved = false;
                for (int h = 0; h < 30; ++h) {
                    Vector a2 = a - eta * g;
                    const double nrm = a2.norm();
                    if (nrm == 0) { eta *= 0.5; continue; }
                    a2 /= nrm;
                    Vector b2 = b;
                    const double radius = c0_ * a2.lpNorm<1>(), mass = b2.lpNorm<1>();
                    if (mass > radius) b2 *= radius / mass;
                    const double f2 = value(a2, b2);
                    if (f2 < f) {
                        a = std::move(a2);
                        b = std::move(b2);
                        f = f2;
                        eta *= 1.5;
                        moved = true;
                        break;
                    }
                    eta *= 0.5;
                }
                if (!moved) break;
                b = inner(a, b, kLooseTol);
                f = value(a, b);
                consider(a, b);
                if (f_start - f <= 1e-13 * std::max(1.0, std::abs(f_start))) break;
            }
            // the alternation only needs a rough inner solve; polish the final point
            b = inner(a, b);
            consider(a, b);
        }
        return best_;
    }

private:
    static constexpr double kLooseTol = 1e-9;

    double value(const Vector& a, const Vector& b) const {
        return a.dot(P_ * a) + 2.0 * a.dot(Q_ * b) + b.dot(R_ * b);
    }

    Vector smallest_eigvec() const {
        Eigen::SelfAdjointEigenSolver<Matrix> es(P_);
        return es.eigenvectors().col(0);
    }

    Vector inner(const Vector& a, const Vector& b0, double tol = 1e-14) const {
        const double radius = c0_ * a.lpNorm<1>();
        const Vector lin = Q_.transpose() * a;
        Vector b = project_l1_ball(b0, radius);
        for (int it = 0; it < q_.pg_iterations; ++it) {
            Vector bn = project_l1_ball(b - (R_ * b + lin) / L_, radius);
            const double change = (bn - b).lpNorm<Eigen::Infinity>();
            b = std::move(bn);
            if (change <= tol * (1.0 + b.lpNorm<Eigen::Infinity>())) break;
        }
        return b;
    }

    void consider(const Vector& a, const Vector& b) {
        Vector delta = Vector::Zero(M_);
        for (std::size_t i = 0; i < J0_.size(); ++i) delta(J0_[i]) = a(static_cast<Index>(i));
        for (std::size_t i = 0; i < Jc_.size(); ++i) delta(Jc_[i]) = b(static_cast<Index>(i));
        const double quad = std::max(value(a, b), 0.0);
        const double num = std::sqrt(quad);
        const double den = a.norm();
        if (den <= 0) return;
        const double ratio = num / den;
        if (ratio < best_.ratio) {
            best_.ratio = ratio;
            best_.delta = delta;
        }
        if (m_) {
            const J01Selection sel = select_j01(delta, J0_, *m_);
            const double den_m = l2_on(delta, sel.J01);
            const double ratio_m = num / den_m;
            if (ratio_m < best_.ratio_m) {
                best_.ratio_m = ratio_m;
                best_.delta_m = delta;
            }
        }
    }

    IndexSet J0_, Jc_;
    double c0_;
    std::optional<Index> m_;
    ReQuery q_;
    Matrix P_, Q_, R_;
    Index M_ = 0;
    double L_ = 1.0, lp_ = 1.0;
    ConeSearchResult best_;
};

}  // namespace detail

inline ConeSearchResult cone_search(const GramMatrix& g, const IndexSet& J0, double c0,
                                    std::optional<Index> m = std::nullopt, const ReQuery& q = {}) {
    check_index_set(J0, g.M(), "cone_search");
    if (J0.empty()) throw InvalidInput("cone_search: J0 must be nonempty");
    if (m && *m + static_cast<Index>(J0.size()) > g.M()) throw InvalidInput("cone_search: |J0| + m exceeds M");
    return detail::ConeSearch(g.psi, J0, c0, m, q).run();
}

struct KappaEstimate {
    std::optional<double> lower;    // certified-by-formula lower bound for kappa(s, c0)
    double upper = std::numeric_limits<double>::infinity();
    std::optional<double> lower_m;  // same for kappa(s, m, c0)
    std::optional<double> upper_m;
    IndexSet witness_J0;
    Vector witness_delta;
    IndexSet witness_J0_m;
    Vector witness_delta_m;
    bool exact = true;            // every J0 of size <= s was searched
    bool lower_exact = true;      // lower bound built from fully enumerated phi/theta
    bool identity_shortcut = false;
};

/// Interval estimate for kappa(s, c0) (and kappa(s, m, c0) when m is given).
/// Searches every J0 with |J0| <= s so the upper estimate is monotone in s.
inline KappaEstimate estimate_kappa(ReTables& t, Index s, double c0, std::optional<Index> m) {
    const GramMatrix& g = t.gram();
    const Index M = g.M();
    const ReQuery& q = t.query();
    if (s < 1 || s > M) throw InvalidInput("estimate_kappa: need 1 <= s <= M");
    if (!(c0 > 0)) throw InvalidInput("estimate_kappa: c0 must be positive");
    if (m && (*m < s || s + *m > M)) throw InvalidInput("estimate_kappa: need s <= m and s + m <= M");

    KappaEstimate out;
    if (g.is_identity()) {
        // |X D|^2/n = |D|^2 >= |D_J|^2 for every J, with equality at e_0
        out.identity_shortcut = true;
        out.lower = out.upper = 1.0;
        out.witness_J0 = {0};
        out.witness_delta = Vector::Unit(M, 0);
        if (m) {
            out.lower_m = out.upper_m = 1.0;
            out.witness_J0_m = out.witness_J0;
            out.witness_delta_m = out.witness_delta;
        }
        return out;
    }

    const KappaLowerBounds lb = kappa_lower_bounds(t, s, m, c0);
    out.lower_exact = lb.exact;
    if (lb.kappa1 || lb.kappa2) out.lower = std::max(lb.kappa1.value_or(0.0), lb.kappa2.value_or(0.0));
    if (m) {
        std::optional<double> lm = lb.kappa2;
        if (*m == s && lb.kappa1) lm = std::max(lm.value_or(0.0), *lb.kappa1);
        out.lower_m = lm;
    }

    std::vector<IndexSet> sets;
    std::uint64_t total = 0;
    for (Index k = 1; k <= s; ++k) {
        const std::uint64_t c = binomial(M, k);
        total = c > std::numeric_limits<std::uint64_t>::max() - total ? std::numeric_limits<std::uint64_t>::max() : total + c;
    }
    if (total <= q.enumeration_cap) {
        for (Index k = 1; k <= s; ++k) for_each_subset(M, k, [&](const IndexSet& J) { sets.push_back(J); });
    } else {
        out.exact = false;
        SplitMix64 rng(hash_combine(q.seed, 0x6b617070ULL + static_cast<std::uint64_t>(s)));
        const std::uint64_t draws = std::min<std::uint64_t>(q.sample_count, q.enumeration_cap);
        for (std::uint64_t k = 0; k < draws; ++k) sets.push_back(random_subset(M, s, rng));
    }

    std::vector<ConeSearchResult> results(sets.size());
    parallel_for(sets.size(), q.threads, [&](std::size_t i) {
        std::optional<Index> mi;
        if (m && *m + static_cast<Index>(sets[i].size()) <= M) mi = m;
        results[i] = detail::ConeSearch(g.psi, sets[i], c0, mi, q).run();
    });
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (results[i].ratio < out.upper) {
            out.upper = results[i].ratio;
            out.witness_J0 = sets[i];
            out.witness_delta = results[i].delta;
        }
        if (m && results[i].ratio_m < out.upper_m.value_or(std::numeric_limits<double>::infinity())) {
            out.upper_m = results[i].ratio_m;
            out.witness_J0_m = sets[i];
            out.witness_delta_m = results[i].delta_m;
        }
    }
    return out;
}

inline KappaEstimate estimate_kappa(const GramMatrix& g, Index s, double c0, std::optional<Index> m = std::nullopt,
                                    const ReQuery& q = {}) {
    ReTables t(g, q);
    return estimate_kappa(t, s, c0, m);
}

inline KappaEstimate estimate_kappa(const DesignMatrix& d, Index s, double c0, std::optional<Index> m = std::nullopt,
                                    const ReQuery& q = {}) {
    return estimate_kappa(gram(d), s, c0, m, q);
}

/// A kappa value safe to plug into the bounds: exact for an identity Gram,
/// else the formula lower bound when all its inputs were enumerated exactly.
struct CertifiedKappa {
    std::optional<double> value;
    std::string source;  // "identity", "lower-bound", "uncertified"
};

inline CertifiedKappa certified_kappa(ReTables& t, Index s, double c0, std::optional<Index> m = std::nullopt) {
    const Index M = t.gram().M();
    if (t.gram().is_identity()) return {1.0, "identity"};
    if (m && (*m < s || s + *m > M)) return {std::nullopt, "uncertified"};
    const KappaLowerBounds lb = kappa_lower_bounds(t, s, m, c0);
    if (!lb.exact) return {std::nullopt, "uncertified"};
    std::optional<double> v;
    if (m) {
        v = lb.kappa2;
        if (*m == s && lb.kappa1) v = std::max(v.value_or(0.0), *lb.kappa1);
    } else if (lb.kappa1 || lb.kappa2) {
        v = std::max(lb.kappa1.value_or(0.0), lb.kappa2.value_or(0.0));
    }
    if (!v) return {std::nullopt, "uncertified"};
    return {v, "lower-bound"};
}

// ---------------------------------------------------------------------------

struct GramPerturbation {
    double eps_n = 0.0;
    double lower_bound_term = 0.0;
};

inline GramPerturbation gram_perturbation_bound(const GramMatrix& psi_n, const GramMatrix& psi_ref, Index J0_size,
                                                double c0) {
    if (psi_n.psi.rows() != psi_ref.psi.rows() || psi_n.psi.cols() != psi_ref.psi.cols())
        throw InvalidInput("gram_perturbation_bound: dimension mismatch");
    if (J0_size < 0 || c0 < 0) throw InvalidInput("gram_perturbation_bound: negative size or c0");
    GramPerturbation out;
    out.eps_n = (psi_n.psi - psi_ref.psi).cwiseAbs().maxCoeff();
    out.lower_bound_term = out.eps_n * (1.0 + c0) * (1.0 + c0) * static_cast<double>(J0_size);
    return out;
}

struct ProjectorCheck {
    double lhs = 0.0;               // |P01 X D|_2 / sqrt(n), J01 built with m
    double delta_j01_norm = 0.0;
    double lhs_s = 0.0;             // same with J1 of size s (the kappa1 form)
    double delta_j01_s_norm = 0.0;
    std::optional<bool> holds_vs_kappa1;
    std::optional<bool> holds_vs_kappa2;
};

namespace detail {

inline double projected_norm(const DesignMatrix& d, const IndexSet& J, const Vector& xd) {
    const Matrix xj = columns(d.x(), J);
    const Vector coef = xj.completeOrthogonalDecomposition().solve(xd);
    return (xj * coef).norm() / std::sqrt(static_cast<double>(d.n()));
}

}  // namespace detail

/// Projector form of the kappa1/kappa2 bounds. kappa1 is compared using J1 of
/// size s (= |J0| unless given), kappa2 using J1 of size m.
inline ProjectorCheck projector_cone_check(const DesignMatrix& d, const IndexSet& J0, Index m, const Vector& delta,
                                           double c0, std::optional<double> kappa1 = std::nullopt,
                                           std::optional<double> kappa2 = std::nullopt,
                                           std::optional<Index> s = std::nullopt) {
    check_index_set(J0, d.M(), "projector_cone_check");
    if (delta.size() != d.M()) throw InvalidInput("projector_cone_check: delta has wrong length");
    if (!cone_membership(delta, J0, c0, 1e-12 * std::max(1.0, delta.lpNorm<1>())))
        throw PreconditionError("projector_cone_check: delta is outside the c0-cone of J0");
    const Index s_eff = s.value_or(static_cast<Index>(J0.size()));
    const Vector xd = d.x() * delta;
    ProjectorCheck out;
    const J01Selection sel = select_j01(delta, J0, m);
    out.lhs = detail::projected_norm(d, sel.J01, xd);
    out.delta_j01_norm = l2_on(delta, sel.J01);
    const Index m1 = std::min<Index>(s_eff, d.M() - static_cast<Index>(J0.size()));
    const J01Selection sel_s = select_j01(delta, J0, m1);
    out.lhs_s = detail::projected_norm(d, sel_s.J01, xd);
    out.delta_j01_s_norm = l2_on(delta, sel_s.J01);
    const double guard = 1e-10 * std::max(1.0, delta.norm());
    if (kappa1 && *kappa1 > 0) out.holds_vs_kappa1 = out.lhs_s + guard >= *kappa1 * out.delta_j01_s_norm;
    if (kappa2 && *kappa2 > 0) out.holds_vs_kappa2 = out.lhs + guard >= *kappa2 * out.delta_j01_norm;
    return out;
}

struct KernelCheck {
    bool ok = false;
    double worst_sigma_min = std::numeric_limits<double>::infinity();
    IndexSet worst_support;
    bool exact = true;
};

/// Every 2s-column submatrix of X/sqrt(n) has full column rank (numerically:
/// smallest singular value above max(n, 2s) * eps * largest).
inline KernelCheck kernel_sparsity_check(const DesignMatrix& d, Index s, const ReQuery& q = {}) {
    const Index M = d.M(), k = 2 * s;
    if (s < 1 || k > M) throw InvalidInput("kernel_sparsity_check: need 1 <= s and 2s <= M");
    KernelCheck out;
    out.ok = true;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d.n()));
    const double rel = static_cast<double>(std::max<Index>(d.n(), k)) * std::numeric_limits<double>::epsilon();
    auto visit = [&](const IndexSet& J) {
        const Matrix xj = columns(d.x(), J) * scale;
        double smin = 0.0, smax = 0.0;
        if (xj.rows() >= k) {
            Eigen::JacobiSVD<Matrix> svd(xj);
            smin = svd.singularValues()(k - 1);
            smax = svd.singularValues()(0);
        } else {
            Eigen::JacobiSVD<Matrix> svd(xj);
            smax = svd.singularValues()(0);
        }
        const bool good = smin > rel * smax;
        if (!good) out.ok = false;
        if (smin < out.worst_sigma_min) {
            out.worst_sigma_min = smin;
            out.worst_support = J;
        }
    };
    if (binomial(M, k) <= q.enumeration_cap) {
        for_each_subset(M, k, visit);
    } else {
        out.exact = false;
        SplitMix64 rng(hash_combine(q.seed, 0x6b65726eULL));
        for (std::uint64_t i = 0; i < q.sample_count; ++i) visit(random_subset(M, k, rng));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Weak-sparsity set membership for a support J: is the cone-restricted
// eigenvalue on J at least gamma?

enum class Membership { member, not_member, unknown };

struct MembershipResult {
    Membership verdict = Membership::unknown;
    double certified_lower = 0.0;
    double witnessed_upper = std::numeric_limits<double>::infinity();
};

/// Lower side: for D in the c0-cone of J, D^T Psi D >= (lambda_min(Psi_JJ)
/// - 2 c0 mu_J |J|) |D_J|^2 with mu_J the largest |Psi_ij|, i in J, j not in J;
/// combined with any global certified kappa for sparsity >= |J|.
inline MembershipResult support_membership(const GramMatrix& g, const IndexSet& J, double gamma, double c0,
                                           const ReQuery& q = {}, std::optional<double> global_lower = std::nullopt) {
    check_index_set(J, g.M(), "support_membership");
    if (J.empty()) throw InvalidInput("support_membership: empty support");
    MembershipResult out;
    if (g.is_identity()) {
        out.certified_lower = out.witnessed_upper = 1.0;
    } else {
        const IndexSet Jc = complement(J, g.M());
        double mu = 0.0;
        for (Index i : J)
            for (Index j : Jc) mu = std::max(mu, std::abs(g.psi(i, j)));
        const double lam = detail::lambda_min(submatrix(g.psi, J, J));
        out.certified_lower = std::sqrt(std::max(0.0, lam - 2.0 * c0 * mu * static_cast<double>(J.size())));
        if (global_lower) out.certified_lower = std::max(out.certified_lower, *global_lower);
    }
    if (out.certified_lower >= gamma) {
        out.verdict = Membership::member;
        return out;
    }
    out.witnessed_upper = cone_search(g, J, c0, std::nullopt, q).ratio;
    out.verdict = out.witnessed_upper < gamma ? Membership::not_member : Membership::unknown;
    return out;
}

// ---------------------------------------------------------------------------

struct ReAnalysisEntry {
    double c0 = 1.0;
    KappaLowerBounds lower_bounds;
    AssumptionVerdicts assumptions;
    KappaEstimate kappa;
};

struct ReAnalysisReport {
    Index M = 0;
    Index s = 1;
    std::optional<Index> m;
    std::map<Index, RestrictedEigen> phi;
    std::map<std::pair<Index, Index>, RestrictedCorrelation> theta;
    std::vector<ReAnalysisEntry> entries;  // one per c0
};

inline ReAnalysisReport analyze(const GramMatrix& g, Index s, std::optional<Index> m, const std::vector<double>& c0_list,
                                const ReQuery& q = {}) {
    const Index M = g.M();
    if (s < 1 || s > M) throw InvalidInput("analyze: need 1 <= s <= M");
    if (m && (*m < s || s + *m > M)) throw InvalidInput("analyze: need s <= m and s + m <= M");
    ReTables t(g, q);
    ReAnalysisReport rep;
    rep.M = M;
    rep.s = s;
    rep.m = m;
    const Index umax = std::min(M, std::max(2 * s, s + m.value_or(0)));
    for (Index u = 1; u <= umax; ++u) t.phi(u);
    for (double c0 : c0_list) {
        ReAnalysisEntry e;
        e.c0 = c0;
        e.lower_bounds = kappa_lower_bounds(t, s, m, c0);
        e.assumptions = check_assumptions(t, s, m, c0, g.has_unit_diagonal());
        e.kappa = estimate_kappa(t, s, c0, m);
        rep.entries.push_back(std::move(e));
    }
    rep.phi = t.phi_table();
    rep.theta = t.theta_table();
    return rep;
}

}  // namespace sparsereg
