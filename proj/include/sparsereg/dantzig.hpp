#pragma once

// Dantzig selector: minimize |beta|_1 subject to
//     |(1/n) D^{-1/2} X^T (y - X beta)|_inf <= r,
// posed as a linear program in (u, v) >= 0 with beta = u - v.

#include <cmath>

#include "sparsereg/core_model.hpp"
#include "sparsereg/simplex.hpp"

namespace sparsereg {

struct DantzigConfig {
    double r = 0.0;
    double lp_tol = 1e-9;
    long max_pivots = 200000;
    /// Coordinates of the LP solution with magnitude <= zero_tol are set to exactly 0.
    double zero_tol = 1e-9;
};

struct DantzigResult {
    CoefficientVector beta_hat;
    double l1_norm = 0.0;
    bool feasible = false;
    double max_constraint = 0.0;
    long pivots_used = 0;
    /// Smallest LP reduced cost at termination; >= -lp_tol certifies optimality.
    double min_reduced_cost = 0.0;
};

struct FeasibilityReport {
    bool feasible = false;
    double max_constraint = 0.0;
};

/// |(1/n) D^{-1/2} X^T (y - X beta)|_inf.
inline double dantzig_constraint_value(const RegressionInstance& instance, const Eigen::Ref<const Vector>& beta) {
    const DesignMatrix& d = instance.design;
    if (beta.size() != d.M()) throw InvalidInput("dantzig_constraint_value: dimension mismatch");
    const Vector corr = d.x().transpose() * (instance.y - d.x() * beta) / static_cast<double>(d.n());
    return corr.cwiseQuotient(d.column_norms()).cwiseAbs().maxCoeff();
}

inline FeasibilityReport dantzig_feasibility(const RegressionInstance& instance,
                                             const Eigen::Ref<const Vector>& beta, double r,
                                             double tol = 0.0) {
    FeasibilityReport rep;
    rep.max_constraint = dantzig_constraint_value(instance, beta);
    rep.feasible = rep.max_constraint <= r + tol;
    return rep;
}

inline DantzigResult fit_dantzig(const RegressionInstance& instance, const DantzigConfig& config) {
    if (!(config.r >= 0.0)) throw InvalidInput("fit_dantzig: r must be nonnegative");
    if (!(config.lp_tol > 0.0)) throw InvalidInput("fit_dantzig: lp_tol must be positive");

    const DesignMatrix& d = instance.design;
    const Index M = d.M();
    const double n = static_cast<double>(d.n());
    const Vector inv_w = d.column_norms().cwiseInverse();

    // g(beta) = c - G beta with G = D^{-1/2} Psi and c = D^{-1/2} X^T y / n
    const Matrix G = inv_w.asDiagonal() * (d.x().transpose() * d.x() / n);
    const Vector c = inv_w.asDiagonal() * (d.x().transpose() * instance.y / n);

    Matrix A(2 * M, 2 * M);
    A << -G, G,
          G, -G;
    Vector b(2 * M);
    b << (config.r - c.array()).matrix(), (config.r + c.array()).matrix();
    const Vector cost = Vector::Ones(2 * M);

    lp::SimplexOptions opt;
    opt.tol = config.lp_tol;
    opt.max_pivots = config.max_pivots;
    const lp::SimplexResult sol = lp::solve(A, b, cost, opt);
    if (sol.status == lp::Status::infeasible)
        throw InfeasibleError("fit_dantzig: the Dantzig constraint set is empty for r = " +
                              std::to_string(config.r));
    if (sol.status == lp::Status::unbounded)
        throw std::logic_error("fit_dantzig: LP reported unbounded for a nonnegative objective");

    Vector beta = sol.x.head(M) - sol.x.tail(M);
    for (Index j = 0; j < M; ++j)
        if (std::abs(beta(j)) <= config.zero_tol) beta(j) = 0.0;

    DantzigResult res;
    res.max_constraint = dantzig_constraint_value(instance, beta);
    res.feasible = res.max_constraint <= config.r + config.lp_tol;
    res.l1_norm = beta.lpNorm<1>();
    res.pivots_used = sol.pivots;
    res.min_reduced_cost = sol.min_reduced_cost;
    res.beta_hat = CoefficientVector(std::move(beta));
    return res;
}

}  // namespace sparsereg
