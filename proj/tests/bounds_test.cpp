#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sparsereg/bounds.hpp"
#include "sparsereg/dantzig.hpp"
#include "sparsereg/lasso.hpp"
#include "test_util.hpp"

using namespace sparsereg;
using namespace sparsereg::testing;

namespace {

const BoundCheck& find(const std::vector<BoundCheck>& v, const std::string& name) {
    for (const auto& b : v)
        if (b.name == name) return b;
    throw std::runtime_error("missing bound " + name);
}

}  // namespace

TEST(CConstants, Examples) {
    // b = 1 + 2/eps: (b+1)/(b-1) = 1 + eps and C = 8 b^2/(b - 1)
    for (double eps : {0.5, 1.0, 2.0, 4.0, 7.5}) {
        const double b = 1.0 + 2.0 / eps;
        EXPECT_NEAR((b + 1) / (b - 1), 1 + eps, 1e-12);
        EXPECT_NEAR(c_eps(eps), 8 * b * b / (b - 1), 1e-10);
    }
    EXPECT_NEAR(c_eps(2.0), 32.0, 1e-12);
    EXPECT_NEAR(c_eps(4.0), 36.0, 1e-12);
    const CConstants c = c_constants(2.0, 0.0, 1.0, 1.0, 1.0, 1.0);
    EXPECT_NEAR(c.C1, 128.0, 1e-12);
    EXPECT_NEAR(c.C2, 2080.0, 1e-12);
    EXPECT_THROW(c_constants(0.0, 0.0, 1, 1, 1, 1), InvalidInput);
    EXPECT_THROW(c_constants(1.0, 0.0, 1, 1, 1, 0), InvalidInput);
}

TEST(BestSparseApprox, ExactRepresentation) {
    std::mt19937_64 rng(1);
    const DesignMatrix d(gaussian_matrix(10, 5, rng));
    const Vector f = 2.0 * d.x().col(2);
    const auto o = best_sparse_approx(d, f, 2);
    EXPECT_NEAR(o.bias_by_k[1], 0.0, 1e-20);
    EXPECT_NEAR(o.bias, 0.0, 1e-20);
    EXPECT_EQ(o.support, IndexSet{2});
    EXPECT_NEAR(o.beta_oracle(2), 2.0, 1e-12);
}

TEST(BestSparseApprox, HandExample) {
    const DesignMatrix d(std::sqrt(2.0) * Matrix::Identity(2, 2));
    const auto o = best_sparse_approx(d, vec({1, 2}), 1);
    EXPECT_EQ(o.support, IndexSet{1});
    EXPECT_NEAR(o.beta_oracle(1), std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(o.bias, 0.5, 1e-12);
    EXPECT_NEAR(o.bias_exactly(1), 0.5, 1e-12);
    EXPECT_NEAR(o.bias_by_k[0], 2.5, 1e-12);
}

TEST(BestSparseApprox, FullSizeIsLeastSquaresAndTableIsMonotone) {
    std::mt19937_64 rng(2);
    const DesignMatrix d(gaussian_matrix(12, 6, rng));
    const Vector f = gaussian_matrix(12, 1, rng).col(0);
    const auto o = best_sparse_approx(d, f, 6, 1'000'000, true);
    const Vector ls = d.x().colPivHouseholderQr().solve(f);
    EXPECT_NEAR(o.bias_by_k[6], (d.x() * ls - f).squaredNorm() / 12.0, 1e-12);
    for (std::size_t k = 1; k < o.bias_by_k.size(); ++k) EXPECT_LE(o.bias_by_k[k], o.bias_by_k[k - 1] + 1e-14);
    EXPECT_EQ(o.all.size(), 64u);
    // each recorded fit agrees with an independent normal-equations solve
    for (const auto& fit : o.all) {
        if (fit.support.empty()) continue;
        const Matrix xj = columns(d.x(), fit.support);
        const Vector c = (xj.transpose() * xj).ldlt().solve(xj.transpose() * f);
        EXPECT_NEAR(fit.bias, (xj * c - f).squaredNorm() / 12.0, 1e-10);
    }
    EXPECT_THROW(best_sparse_approx(d, f, 3, 10), ResourceError);
}

TEST(BestSparseApprox, RankDeficientSupportsUseMinimumNorm) {
    std::mt19937_64 rng(3);
    Matrix x = gaussian_matrix(8, 4, rng);
    x.col(3) = x.col(0);
    const DesignMatrix d(x);
    const auto o = best_sparse_approx(d, x.col(0) + x.col(1), 2);
    EXPECT_NEAR(o.bias, 0.0, 1e-20);
}

TEST(EquivalenceBounds, HandArithmeticAndCoincidence) {
    const Index n = 64;
    const DesignMatrix d(std::sqrt(static_cast<double>(n)) * Matrix::Identity(n, n));
    const PenaltyLevel pen = penalty_level(4, 1, n, n);
    Vector beta = Vector::Zero(n);
    beta.head(4).setConstant(1.0);
    const Vector f = Vector::Zero(n);
    const auto checks = equivalence_bounds({d, f, beta, beta}, 4, 1.0, 1.0, pen);
    const auto& th1 = find(checks, "th1-equiv");
    EXPECT_NEAR(th1.rhs, 16.0 * 16.0 * 4.0 / 64.0 * std::log(64.0), 1e-10);
    EXPECT_NEAR(th1.rhs, 66.542, 1e-3);
    EXPECT_EQ(th1.empirical, 0.0);
    EXPECT_TRUE(th1.holds);
    EXPECT_EQ(th1.event, RequiredEvent::AB);

    const Vector zero = Vector::Zero(n);
    const auto z = equivalence_bounds({d, f, zero, zero}, 4, 1.0, 1.0, pen);
    EXPECT_EQ(find(z, "th1-equiv").rhs, 0.0);
    EXPECT_TRUE(find(z, "th1-equiv").holds);

    const auto sparse_fail = equivalence_bounds({d, f, beta, beta}, 3, 1.0, 1.0, pen);
    EXPECT_EQ(find(sparse_fail, "th1-equiv").status, BoundStatus::inapplicable);
    const auto vac = equivalence_bounds({d, f, beta, beta}, 4, 0.0, std::nullopt, pen);
    EXPECT_EQ(find(vac, "th1-equiv").status, BoundStatus::vacuous);
    EXPECT_EQ(find(vac, "th2-equiv").status, BoundStatus::uncertified);
}

TEST(DantzigBounds, HandArithmetic) {
    const Index n = 100;
    const DesignMatrix d(10.0 * Matrix::Identity(n, n));
    const PenaltyLevel pen = penalty_level(2, 1, n, n);
    const Vector beta = Vector::Zero(n);
    const auto checks = dantzig_bounds(d, beta, beta, 2, 2, 1.0, 1.0, pen, {2.0});
    EXPECT_NEAR(find(checks, "th43-l1").rhs, 8.0 * 2.0 * 2.0 * std::sqrt(std::log(100.0) / 100.0), 1e-12);
    EXPECT_NEAR(find(checks, "th43-l1").rhs, 6.867091, 1e-6);
    EXPECT_NEAR(find(checks, "th42-lp-2").rhs, 64.0 * 2 * 4 * std::log(100.0) / 100.0, 1e-12);
    EXPECT_EQ(find(checks, "th43-l1").event, RequiredEvent::B);
    const auto a = dantzig_bounds(d, beta, beta, 2, 2, 1.0, 1.0, pen, {1.5}, true);
    EXPECT_EQ(find(a, "th4a3-l1").event, RequiredEvent::none);
    EXPECT_THROW(dantzig_bounds(d, beta, beta, 2, 2, 1.0, 1.0, pen, {1.0}), InvalidInput);
}

TEST(LassoBounds, HandArithmetic) {
    const Index n = 50;
    const DesignMatrix d(std::sqrt(50.0) * Matrix::Identity(n, n));
    const PenaltyLevel pen = penalty_level(3, 0.5, n, n);
    Vector beta = Vector::Zero(n);
    beta(3) = 1.0;
    const auto checks = lasso_bounds(d, beta, beta, 2, 2, 1.0, 1.0, 1.0, pen, {2.0});
    EXPECT_NEAR(find(checks, "th55-sparsity").rhs, 128.0, 1e-12);
    EXPECT_EQ(find(checks, "th53-l1").empirical, 0.0);
    EXPECT_EQ(find(checks, "th54-pred").empirical, 0.0);
    EXPECT_EQ(find(checks, "th52-lp-2").empirical, 0.0);
    EXPECT_NEAR(find(checks, "th52-lp-2").rhs, 256.0 * 2 * std::pow(1.5, 2) * std::log(50.0) / 50.0, 1e-12);
    for (const auto& c : checks) EXPECT_TRUE(c.holds);
}

TEST(RateBounds, NearOneMatchesTheFirstMomentShape) {
    const Index n = 40, M = 40, s = 3, m = 5;
    const DesignMatrix d(std::sqrt(40.0) * Matrix::Identity(n, M));
    const PenaltyLevel pen = penalty_level(3, 1.3, n, M);
    const Vector z = Vector::Zero(M);
    const double k = 0.8;
    const double p = 1.001, root = pen.A * pen.sigma / (k * k) * std::sqrt(pen.log_m() / n);
    const double th42_p1 = 8.0 * s * root, th52_p1 = 16.0 * s * root;
    EXPECT_NEAR(find(dantzig_bounds(d, z, z, s, m, k, k, pen, {p}), "th42-lp-1.001").rhs / th42_p1, 1.0, 0.05);
    EXPECT_NEAR(find(lasso_bounds(d, z, z, s, m, k, k, 1.0, pen, {p}), "th52-lp-1.001").rhs / th52_p1, 1.0, 0.05);
}

TEST(RateBounds, InterpolationOfHeldBoundsIsDominated) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    const Index n = 32, M = 32, s = 2;
    const DesignMatrix d(std::sqrt(32.0) * Matrix::Identity(n, M));
    const PenaltyLevel pen = penalty_level(3, 1, n, M);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        Vector beta = Vector::Zero(M);
        beta(trial % M) = 1.5;
        beta((trial + 7) % M) = -1.0;
        Vector w(n);
        for (Index i = 0; i < n; ++i) w(i) = nd(rng);
        const RegressionInstance inst(d, d.x() * beta + w);
        const Vector V = d.x().transpose() * w / static_cast<double>(n);
        if ((V.array().abs() > pen.r).any()) continue;  // event B
        const auto dz = fit_dantzig(inst, DantzigConfig{.r = pen.r});
        const auto checks = dantzig_bounds(d, dz.beta_hat.values(), beta, s, s, 1.0, 1.0, pen, {1.5, 2.0});
        const Vector delta = dz.beta_hat.values() - beta;
        const double b1 = delta.lpNorm<1>(), b2 = delta.squaredNorm();
        const auto& th = find(checks, "th42-lp-1.5");
        for (const auto& c : checks) EXPECT_TRUE(c.holds) << c.name;
        EXPECT_LE(th.empirical, std::pow(b1, 0.5) * std::pow(b2, 0.5) + 1e-12);  // Hoelder
        EXPECT_GE(th.rhs, std::pow(b1, 0.5) * std::pow(b2, 0.5));
        ++checked;
    }
    EXPECT_GT(checked, 20);
}

TEST(OracleInequality, LassoSparseOracleExamples) {
    const Index n = 16, M = 4;
    std::mt19937_64 rng(5);
    const DesignMatrix d = orthonormal_design(n, M, rng);
    const Vector f = 50.0 * d.x().col(1);  // bias 0 at k = 1, large bias at k = 0
    const PenaltyLevel pen = penalty_level(3, 1, n, M);
    const auto o = best_sparse_approx(d, f, 2);
    OracleInputs in;
    in.eps = 2.0;
    in.kappa = 1.0;
    in.s = 2;
    const auto b = oracle_inequality_rhs(o, pen, OracleVariant::lasso_sparse, in, 0.0);
    const double r2 = pen.r * pen.r;
    EXPECT_NEAR(b.rhs, 96.0 * r2, 1e-10);
    EXPECT_NEAR(b.rhs, 96.0 * 9.0 * std::log(4.0) / 16.0, 1e-10);

    const PenaltyLevel quiet = penalty_level(3, 0, n, M);
    const Vector g = d.x().col(0) + 0.3 * d.x().col(2) + 0.1 * d.x().col(3);
    const auto og = best_sparse_approx(d, g, 2);
    EXPECT_NEAR(oracle_inequality_rhs(og, quiet, OracleVariant::lasso_sparse, in, 0.0).rhs, 3.0 * og.bias, 1e-14);

    in.kappa = std::nullopt;
    EXPECT_EQ(oracle_inequality_rhs(o, pen, OracleVariant::lasso_sparse, in, 0.0).status, BoundStatus::uncertified);
}

TEST(OracleInequality, ContinuousInEps) {
    std::mt19937_64 rng(6);
    const DesignMatrix d = orthonormal_design(20, 6, rng);
    const Vector f = gaussian_matrix(20, 1, rng).col(0);
    const auto o = best_sparse_approx(d, f, 3);
    const PenaltyLevel pen = penalty_level(3, 0.4, 20, 6);
    OracleInputs in;
    in.kappa = 0.9;
    in.s = 3;
    double prev = NAN;
    for (double eps = 0.5; eps <= 6.0; eps += 0.01) {
        in.eps = eps;
        const double v = oracle_inequality_rhs(o, pen, OracleVariant::lasso_sparse, in, 0).rhs;
        EXPECT_TRUE(std::isfinite(v));
        if (!std::isnan(prev)) {
            EXPECT_LT(std::abs(v - prev), 0.05 * std::max(1.0, prev));
        }
        prev = v;
    }
}

TEST(OracleInequality, DantzigWeakSparsityAndAdmissibleFamily) {
    std::mt19937_64 rng(7);
    const Index n = 64;
    const DesignMatrix d = orthonormal_design(n, 8, rng);
    const Vector f = d.x().col(0) - 2.0 * d.x().col(5);
    const auto o = best_sparse_approx(d, f, 2, 1'000'000, true);
    OracleInputs in;
    in.eps = 2.0;
    in.kappa = 1.0;
    in.s = 2;
    in.C0 = 0.0;
    // s * max(C1, 1) = 256 > M = 8: inapplicable
    const PenaltyLevel small = penalty_level(3, 1, n, 8);
    EXPECT_EQ(oracle_inequality_rhs(o, small, OracleVariant::dantzig_weak_sparse, in, 0).status, BoundStatus::inapplicable);
    // with a nominal dictionary size M = 4000 the side condition is met
    PenaltyLevel big = penalty_level(3, 1, n, 4000);
    const auto b = oracle_inequality_rhs(o, big, OracleVariant::dantzig_weak_sparse, in, 0);
    ASSERT_EQ(b.status, BoundStatus::ok);
    const CConstants c = c_constants(2.0, 0.0, 1.0, 1.0, 1.0, 1.0);
    EXPECT_NEAR(b.rhs, 3.0 * o.bias_exactly(2) + c.C2 * big.r * big.r * 2.0, 1e-9);

    in.gamma = 0.5;
    in.admissible_supports = {IndexSet{0, 5}};
    const auto cor = oracle_inequality_rhs(o, small, OracleVariant::lasso_admissible, in, 0);
    EXPECT_NEAR(cor.rhs, 3.0 * (0.0 + 32.0 * small.r * small.r / 0.25 * 2.0), 1e-9);
    in.admissible_supports.clear();
    EXPECT_THROW(oracle_inequality_rhs(o, small, OracleVariant::lasso_admissible, in, 0), InvalidInput);
}

TEST(WeakSparsity, Examples) {
    std::mt19937_64 rng(8);
    const DesignMatrix d = orthonormal_design(10, 5, rng);
    const PenaltyLevel pen = penalty_level(3, 1, 10, 5);
    const Vector beta = vec({1, 0, -1, 0, 0});
    const Vector f = d.x() * beta;
    const auto exact = weak_sparsity_check(beta, d, f, 2, 0.0, 1.0, 1.0, pen);
    EXPECT_TRUE(exact.member);
    EXPECT_EQ(exact.implied_C0, 0.0);
    EXPECT_FALSE(weak_sparsity_check(beta, d, f, 1, 100.0, 1.0, 1.0, pen).member);

    // bias = 2 f_max^2 r^2 / kappa^2 * M(beta) -> implied C0 = 2
    const double kappa = 0.8;
    const double target_bias = 2.0 * pen.r * pen.r / (kappa * kappa) * 2.0;
    const Vector g = f + std::sqrt(target_bias) * d.x().col(4);
    const auto w = weak_sparsity_check(beta, d, g, 2, 2.5, kappa, 1.0, pen);
    EXPECT_NEAR(w.implied_C0, 2.0, 1e-10);
    EXPECT_TRUE(w.member);
    EXPECT_FALSE(weak_sparsity_check(beta, d, g, 2, 1.5, kappa, 1.0, pen).member);
}
