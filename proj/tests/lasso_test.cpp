#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sparsereg/dantzig.hpp"
#include "sparsereg/lasso.hpp"
#include "test_util.hpp"

using namespace sparsereg;
using namespace sparsereg::testing;

namespace {

// Orthonormal instance with prescribed correlations z = X^T y / n.
RegressionInstance orthonormal_instance(const Vector& z, Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DesignMatrix d = orthonormal_design(n, z.size(), rng);
    Vector y = d.x() * z;
    return RegressionInstance(d, y);
}

}  // namespace

TEST(Lasso, ScalarCaseEmbeddedInOrthogonalPair) {
    // the scalar problem X=[1], y=[2], r=0.5 padded with an orthogonal unit-norm
    // column carrying zero correlation (M >= 2 is a type invariant)
    Matrix x(2, 2);
    x << 1, 1,
         1, -1;
    RegressionInstance inst(DesignMatrix(x), vec({2, 2}));
    const LassoResult res = fit_lasso(inst, LassoConfig{.r = 0.5});
    ASSERT_TRUE(res.converged);
    EXPECT_NEAR(res.beta_hat(0), 1.5, 1e-12);
    EXPECT_EQ(res.beta_hat(1), 0.0);
}

TEST(Lasso, OrthonormalSoftThresholdMatchesOneDimensionalOracle) {
    const Vector z = vec({3, 0.2, -1});
    const double r = 0.5;
    // independent oracle: per-coordinate minimization of b^2 - 2 z b + 2 r |b|
    Vector oracle(3);
    for (Index j = 0; j < 3; ++j) {
        const double zj = z(j);
        oracle(j) = golden_min([&](double b) { return b * b - 2 * zj * b + 2 * r * std::abs(b); }, -10, 10);
    }
    EXPECT_LT((oracle - vec({2.5, 0, -0.5})).cwiseAbs().maxCoeff(), 1e-7);

    const LassoResult res = fit_lasso(orthonormal_instance(z, 6, 1), LassoConfig{.r = r});
    ASSERT_TRUE(res.converged);
    EXPECT_LT((res.beta_hat.values() - vec({2.5, 0, -0.5})).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(res.beta_hat(1), 0.0);
}

TEST(Lasso, FullShrinkage) {
    const Vector z = vec({0.3, -0.4, 0.1});
    const LassoResult res = fit_lasso(orthonormal_instance(z, 5, 2), LassoConfig{.r = 0.4});
    EXPECT_EQ(res.beta_hat.sparsity(), 0);
    EXPECT_TRUE(res.converged);
}

TEST(LassoKkt, SoftThresholdSolutionPassesAndPerturbationFails) {
    const Vector z = vec({3, 0.2, -1});
    const double r = 0.5, tol = 1e-9;
    RegressionInstance inst = orthonormal_instance(z, 6, 3);
    const Vector beta = vec({2.5, 0, -0.5});
    const KktReport ok = lasso_kkt_check(inst, beta, r, tol);
    EXPECT_TRUE(ok.passes);
    EXPECT_LT(ok.max_violation, 1e-12);
    EXPECT_NEAR(ok.scaled_sup_norm, r, 1e-12);

    const Vector corr = inst.design.x().transpose() * (inst.y - inst.design.x() * beta) / 6.0;
    EXPECT_NEAR(corr(0), r, 1e-12);
    EXPECT_NEAR(corr(2), -r, 1e-12);

    Vector bumped = beta;
    bumped(0) += 10 * tol;
    EXPECT_FALSE(lasso_kkt_check(inst, bumped, r, tol).passes);

    EXPECT_TRUE(lasso_kkt_check(orthonormal_instance(vec({0.1, -0.2, 0.05}), 4, 4), Vector::Zero(3), 0.3, tol).passes);
}

TEST(Lasso, ObjectiveMonotoneAndKktOnRandomDesigns) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 10 + static_cast<Index>(rng() % 20), M = 5 + static_cast<Index>(rng() % 30);
        DesignMatrix d(gaussian_matrix(n, M, rng));
        Vector y = gaussian_matrix(n, 1, rng).col(0);
        RegressionInstance inst(d, y);
        LassoConfig cfg{.r = 0.05 + 0.3 * static_cast<double>(rng() % 100) / 100.0};
        cfg.check_monotone = true;
        cfg.record_trace = true;
        const LassoResult res = fit_lasso(inst, cfg);
        ASSERT_TRUE(res.converged) << "trial " << trial;
        for (std::size_t k = 1; k < res.objective_trace.size(); ++k)
            EXPECT_LE(res.objective_trace[k], res.objective_trace[k - 1] + 1e-14);
        const KktReport kkt = lasso_kkt_check(inst, res.beta_hat.values(), cfg.r, 1e-8);
        EXPECT_TRUE(kkt.passes) << kkt.max_violation;
        EXPECT_LE(res.kkt_violation, 1e-8);
        // KKT implies the Dantzig constraint
        EXPECT_LE(dantzig_constraint_value(inst, res.beta_hat.values()), cfg.r + 1e-8);
    }
}

TEST(Lasso, NonConvergenceIsFlaggedNotThrown) {
    std::mt19937_64 rng(8);
    Matrix x = gaussian_matrix(20, 10, rng);
    x.col(1) = x.col(0) + 0.01 * x.col(1);
    RegressionInstance inst(DesignMatrix(x), gaussian_matrix(20, 1, rng).col(0));
    LassoConfig cfg{.r = 0.01};
    cfg.max_sweeps = 1;
    const LassoResult res = fit_lasso(inst, cfg);
    EXPECT_FALSE(res.converged);
    EXPECT_EQ(res.sweeps_used, 1);
    EXPECT_TRUE(std::isfinite(res.objective));
}

TEST(Lasso, ZeroPenaltyIsFlaggedAndInterpolatesNormalEquations) {
    std::mt19937_64 rng(9);
    DesignMatrix d(gaussian_matrix(30, 5, rng));
    RegressionInstance inst(d, gaussian_matrix(30, 1, rng).col(0));
    const LassoResult res = fit_lasso(inst, LassoConfig{.r = 0.0});
    EXPECT_TRUE(res.penalty_free);
    const Vector ls = d.x().colPivHouseholderQr().solve(inst.y);
    EXPECT_LT((res.beta_hat.values() - ls).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Lasso, WarmStartReachesSameSolution) {
    std::mt19937_64 rng(10);
    DesignMatrix d(gaussian_matrix(25, 12, rng));
    RegressionInstance inst(d, gaussian_matrix(25, 1, rng).col(0));
    const LassoResult cold = fit_lasso(inst, LassoConfig{.r = 0.1});
    const LassoResult near = fit_lasso(inst, LassoConfig{.r = 0.12});
    const LassoResult warm = fit_lasso(inst, LassoConfig{.r = 0.1}, near.beta_hat.values());
    EXPECT_LT(std::abs(cold.objective - warm.objective), 1e-12);
}

TEST(Lasso, RejectsBadConfig) {
    RegressionInstance inst(DesignMatrix(Matrix::Identity(2, 2)), vec({1, 1}));
    EXPECT_THROW(fit_lasso(inst, LassoConfig{.r = -1}), InvalidInput);
    EXPECT_THROW(fit_lasso(inst, LassoConfig{.r = 1, .tol = 0}), InvalidInput);
}
