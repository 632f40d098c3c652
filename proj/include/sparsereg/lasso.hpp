#pragma once

// Cyclic coordinate descent for
//   (1/n)|y - X beta|_2^2 + 2 r sum_j ||f_j||_n |beta_j|
// and the subgradient optimality check for candidate solutions.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sparsereg/core_model.hpp"

namespace sparsereg {

struct LassoConfig {
    double r = 0.0;
    /// Convergence: max coordinate change in a sweep < tol * max(1, |beta|_inf).
    double tol = 1e-10;
    int max_sweeps = 100000;
    /// Recompute the objective after every coordinate update and throw
    /// std::logic_error if it ever increases. Costs one extra pass over n.
    bool check_monotone = false;
    /// Record the objective after each sweep in LassoResult::objective_trace.
    bool record_trace = false;
};

struct LassoResult {
    CoefficientVector beta_hat;
    double objective = 0.0;
    int sweeps_used = 0;
    bool converged = false;
    /// True when r == 0: the result is a least-squares point and need not be unique.
    bool penalty_free = false;
    double kkt_violation = 0.0;
    std::vector<double> objective_trace;
};

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

/// (1/n)|y - X beta|^2 + 2 r sum_j w_j |beta_j| with w_j the column norms.
inline double lasso_objective(const DesignMatrix& design, const Eigen::Ref<const Vector>& y,
                              const Eigen::Ref<const Vector>& beta, double r) {
    const double n = static_cast<double>(design.n());
    const double rss = (y - design.x() * beta).squaredNorm() / n;
    return rss + 2.0 * r * design.column_norms().cwiseProduct(beta.cwiseAbs()).sum();
}

struct KktReport {
    bool passes = false;
    /// Largest violation of the per-coordinate subgradient conditions.
    double max_violation = 0.0;
    /// |(1/n) D^{-1/2} X^T (y - X beta)|_inf, to be compared with r.
    double scaled_sup_norm = 0.0;
};

/// Checks (1/n) x_j^T (y - X beta) = r ||f_j||_n sign(beta_j) on the support and
/// |(1/n) x_j^T (y - X beta)| <= r ||f_j||_n off it, each within tol.
inline KktReport lasso_kkt_check(const RegressionInstance& instance, const Eigen::Ref<const Vector>& beta,
                                 double r, double tol) {
    const DesignMatrix& d = instance.design;
    if (beta.size() != d.M()) throw InvalidInput("lasso_kkt_check: dimension mismatch");
    const Vector corr = d.x().transpose() * (instance.y - d.x() * beta) / static_cast<double>(d.n());
    KktReport rep;
    for (Index j = 0; j < d.M(); ++j) {
        const double w = d.column_norms()(j);
        double v;
        if (beta(j) != 0.0) {
            v = std::abs(corr(j) - r * w * (beta(j) > 0.0 ? 1.0 : -1.0));
        } else {
            v = std::max(0.0, std::abs(corr(j)) - r * w);
        }
        rep.max_violation = std::max(rep.max_violation, v);
        rep.scaled_sup_norm = std::max(rep.scaled_sup_norm, std::abs(corr(j)) / w);
    }
    rep.passes = rep.max_violation <= tol && rep.scaled_sup_norm <= r + tol;
    return rep;
}

inline LassoResult fit_lasso(const RegressionInstance& instance, const LassoConfig& config,
                             const std::optional<Vector>& warm_start = std::nullopt) {
    if (!(config.tol > 0.0)) throw InvalidInput("fit_lasso: tol must be positive");
    if (config.max_sweeps < 1) throw InvalidInput("fit_lasso: max_sweeps must be >= 1");
    if (!(config.r >= 0.0)) throw InvalidInput("fit_lasso: r must be nonnegative");

    const DesignMatrix& d = instance.design;
    const Matrix& X = d.x();
    const Index M = d.M();
    const double n = static_cast<double>(d.n());
    const Vector& w = d.column_norms();
    const double r = config.r;

    Vector beta = Vector::Zero(M);
    if (warm_start) {
        if (warm_start->size() != M) throw InvalidInput("fit_lasso: warm start has wrong length");
        beta = *warm_start;
    }
    Vector resid = instance.y - X * beta;

    LassoResult res;
    res.penalty_free = (r == 0.0);
    double prev_obj = config.check_monotone ? lasso_objective(d, instance.y, beta, r) : 0.0;

    for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Index j = 0; j < M; ++j) {
            const double old = beta(j);
            const double wj2 = w(j) * w(j);
            // partial residual correlation (1/n) x_j^T (resid + x_j beta_j)
            const double z = X.col(j).dot(resid) / n + wj2 * old;
            const double updated = soft_threshold(z, r * w(j)) / wj2;
            if (updated != old) {
                resid.noalias() -= (updated - old) * X.col(j);
                beta(j) = updated;
                max_change = std::max(max_change, std::abs(updated - old));
            }
            if (config.check_monotone) {
                const double obj = lasso_objective(d, instance.y, beta, r);
                if (obj > prev_obj + 1e-12 * std::max(1.0, std::abs(prev_obj)))
                    throw std::logic_error("fit_lasso: objective increased during coordinate update");
                prev_obj = obj;
            }
        }
        res.sweeps_used = sweep;
        if (config.record_trace) res.objective_trace.push_back(lasso_objective(d, instance.y, beta, r));
        const double scale = std::max(1.0, beta.cwiseAbs().maxCoeff());
        if (max_change < config.tol * scale) {
            res.converged = true;
            break;
        }
    }

    res.objective = lasso_objective(d, instance.y, beta, r);
    res.kkt_violation = lasso_kkt_check(instance, beta, r, config.tol).max_violation;
    res.beta_hat = CoefficientVector(std::move(beta));
    return res;
}

}  // namespace sparsereg
