#pragma once

// Problem data shared by every estimator and analysis: the design matrix with
// its empirical column norms, the Gram matrix, coefficient vectors with their
// supports, the penalty level and the Gaussian tail probabilities of the
// noise events.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparsereg/errors.hpp"

namespace sparsereg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Sorted, duplicate-free, zero-based column indices.
using IndexSet = std::vector<Index>;

/// sqrt((1/n) * sum_i v_i^2).
inline double empirical_norm(const Eigen::Ref<const Vector>& values) {
    if (values.size() == 0) throw InvalidInput("empirical_norm: empty vector");
    return std::sqrt(values.squaredNorm() / static_cast<double>(values.size()));
}

/// n x M matrix of dictionary evaluations X(i, j) = f_j(Z_i).
class DesignMatrix {
public:
    explicit DesignMatrix(Matrix x) : x_(std::move(x)) {
        if (x_.rows() < 1) throw InvalidInput("DesignMatrix: need n >= 1 rows");
        if (x_.cols() < 2) throw InvalidInput("DesignMatrix: need M >= 2 columns");
        if (!x_.allFinite()) throw InvalidInput("DesignMatrix: non-finite entry");
        norms_.resize(x_.cols());
        for (Index j = 0; j < x_.cols(); ++j) {
            norms_(j) = empirical_norm(x_.col(j));
            if (!(norms_(j) > 0.0))
                throw InvalidInput("DesignMatrix: column " + std::to_string(j) +
                                   " has zero empirical norm");
        }
    }

    Index n() const { return x_.rows(); }
    Index M() const { return x_.cols(); }
    const Matrix& x() const { return x_; }
    const Vector& column_norms() const { return norms_; }
    double f_max() const { return norms_.maxCoeff(); }
    double f_min() const { return norms_.minCoeff(); }

    /// True when every ||f_j||_n equals 1 within `tol`.
    bool has_unit_norms(double tol = 1e-10) const {
        return ((norms_.array() - 1.0).abs() <= tol).all();
    }

    /// Copy with every column rescaled to unit empirical norm.
    DesignMatrix normalized() const {
        Matrix scaled = x_;
        for (Index j = 0; j < scaled.cols(); ++j) scaled.col(j) /= norms_(j);
        return DesignMatrix(std::move(scaled));
    }

private:
    Matrix x_;
    Vector norms_;
};

/// Psi_n = X^T X / n.
struct GramMatrix {
    Matrix psi;

    Index M() const { return psi.rows(); }

    /// Largest eigenvalue of psi.
    double phi_max() const {
        Eigen::SelfAdjointEigenSolver<Matrix> es(psi, Eigen::EigenvaluesOnly);
        return es.eigenvalues().maxCoeff();
    }

    bool has_unit_diagonal(double tol = 1e-10) const {
        return ((psi.diagonal().array() - 1.0).abs() <= tol).all();
    }

    /// psi equals the identity within `tol` entrywise.
    bool is_identity(double tol = 1e-12) const {
        return (psi - Matrix::Identity(M(), M())).cwiseAbs().maxCoeff() <= tol;
    }
};

inline GramMatrix gram(const DesignMatrix& design) {
    Matrix psi = design.x().transpose() * design.x() / static_cast<double>(design.n());
    // symmetrize away roundoff so downstream eigen-solvers see an exact mirror
    psi = 0.5 * (psi + psi.transpose()).eval();
    return GramMatrix{std::move(psi)};
}

/// Builds a GramMatrix from a user-supplied symmetric matrix.
inline GramMatrix gram_from_matrix(Matrix psi) {
    if (psi.rows() != psi.cols() || psi.rows() < 2)
        throw InvalidInput("gram_from_matrix: need a square matrix with M >= 2");
    if ((psi - psi.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InvalidInput("gram_from_matrix: matrix is not symmetric");
    return GramMatrix{std::move(psi)};
}

struct Support {
    Index sparsity = 0;
    IndexSet indices;
};

/// Coordinates with |beta_j| <= zero_tol count as zero.
inline Support sparsity_and_support(const Eigen::Ref<const Vector>& beta, double zero_tol = 0.0) {
    Support out;
    for (Index j = 0; j < beta.size(); ++j)
        if (std::abs(beta(j)) > zero_tol) out.indices.push_back(j);
    out.sparsity = static_cast<Index>(out.indices.size());
    return out;
}

/// Candidate coefficient vector beta in R^M.
class CoefficientVector {
public:
    CoefficientVector() = default;
    explicit CoefficientVector(Vector beta) : beta_(std::move(beta)) {}

    const Vector& values() const { return beta_; }
    Index size() const { return beta_.size(); }
    double operator()(Index j) const { return beta_(j); }

    IndexSet support(double zero_tol = 0.0) const { return sparsity_and_support(beta_, zero_tol).indices; }
    Index sparsity(double zero_tol = 0.0) const { return sparsity_and_support(beta_, zero_tol).sparsity; }

    double l1() const { return beta_.lpNorm<1>(); }
    double l2() const { return beta_.norm(); }

    /// Copy keeping the coordinates in J and zeroing the rest.
    CoefficientVector restricted(const IndexSet& J) const {
        Vector out = Vector::Zero(beta_.size());
        for (Index j : J) out(j) = beta_(j);
        return CoefficientVector(std::move(out));
    }

private:
    Vector beta_;
};

inline IndexSet complement(const IndexSet& J, Index M) {
    IndexSet out;
    out.reserve(static_cast<std::size_t>(M) - J.size());
    std::size_t k = 0;
    for (Index j = 0; j < M; ++j) {
        if (k < J.size() && J[k] == j) { ++k; continue; }
        out.push_back(j);
    }
    return out;
}

inline double l1_on(const Eigen::Ref<const Vector>& v, const IndexSet& J) {
    double s = 0.0;
    for (Index j : J) s += std::abs(v(j));
    return s;
}

inline double l2_on(const Eigen::Ref<const Vector>& v, const IndexSet& J) {
    double s = 0.0;
    for (Index j : J) s += v(j) * v(j);
    return std::sqrt(s);
}

inline void check_index_set(const IndexSet& J, Index M, const char* who) {
    for (std::size_t k = 0; k < J.size(); ++k) {
        if (J[k] < 0 || J[k] >= M)
            throw InvalidInput(std::string(who) + ": index out of range");
        if (k > 0 && J[k] <= J[k - 1])
            throw InvalidInput(std::string(who) + ": index set must be sorted and unique");
    }
}

/// |delta_{J0^c}|_1 <= c0 * |delta_{J0}|_1 + slack.
inline bool cone_membership(const Eigen::Ref<const Vector>& delta, const IndexSet& J0, double c0,
                            double slack = 0.0) {
    check_index_set(J0, delta.size(), "cone_membership");
    const double on = l1_on(delta, J0);
    const double off = delta.lpNorm<1>() - on;
    if (on == 0.0) return false;
    return off <= c0 * on + slack;
}

struct J01Selection {
    IndexSet J1;
    IndexSet J01;
};

/// J1 = the m largest |delta_j| outside J0 (ties to the smaller index), J01 = J0 u J1.
inline J01Selection select_j01(const Eigen::Ref<const Vector>& delta, const IndexSet& J0, Index m) {
    const Index M = delta.size();
    check_index_set(J0, M, "select_j01");
    if (m < 0 || m + static_cast<Index>(J0.size()) > M)
        throw InvalidInput("select_j01: m + |J0| exceeds M");
    IndexSet outside = complement(J0, M);
    std::stable_sort(outside.begin(), outside.end(), [&](Index a, Index b) {
        return std::abs(delta(a)) > std::abs(delta(b));
    });
    J01Selection sel;
    sel.J1.assign(outside.begin(), outside.begin() + m);
    std::sort(sel.J1.begin(), sel.J1.end());
    sel.J01.reserve(J0.size() + sel.J1.size());
    std::merge(J0.begin(), J0.end(), sel.J1.begin(), sel.J1.end(), std::back_inserter(sel.J01));
    return sel;
}

struct Losses {
    double lp = 0.0;                      ///< |b1 - b2|_p^p
    double prediction_normalized = 0.0;   ///< |X(b1 - b2)|_2^2 / n
    double prediction_unnormalized = 0.0; ///< |X(b1 - b2)|_2^2
};

inline Losses losses(const Eigen::Ref<const Vector>& b1, const Eigen::Ref<const Vector>& b2,
                     const DesignMatrix& design, double p) {
    if (!(p > 0.0 && p <= 2.0)) throw InvalidInput("losses: p must lie in (0, 2]");
    if (b1.size() != design.M() || b2.size() != design.M())
        throw InvalidInput("losses: dimension mismatch");
    const Vector diff = b1 - b2;
    Losses out;
    out.lp = diff.array().abs().pow(p).sum();
    out.prediction_unnormalized = (design.x() * diff).squaredNorm();
    out.prediction_normalized = out.prediction_unnormalized / static_cast<double>(design.n());
    return out;
}

/// Tuning radius r = A * sigma * sqrt(log(M) / n) together with its inputs.
struct PenaltyLevel {
    double A = 0.0;
    double sigma = 0.0;
    Index n = 1;
    Index M = 2;
    double r = 0.0;

    /// A > 2 sqrt(2): admissible for the Lasso results.
    bool lasso_admissible() const { return A > 2.0 * std::sqrt(2.0); }
    /// A > sqrt(2): admissible for the Dantzig rate results.
    bool dantzig_admissible() const { return A > std::sqrt(2.0); }
    double log_m() const { return std::log(static_cast<double>(M)); }
};

inline PenaltyLevel penalty_level(double A, double sigma, Index n, Index M) {
    if (!(A > 0.0)) throw InvalidInput("penalty_level: A must be positive");
    if (!(sigma >= 0.0)) throw InvalidInput("penalty_level: sigma must be nonnegative");
    if (n < 1) throw InvalidInput("penalty_level: n must be >= 1");
    if (M < 2) throw InvalidInput("penalty_level: M must be >= 2");
    PenaltyLevel p{A, sigma, n, M, 0.0};
    p.r = A * sigma * std::sqrt(std::log(static_cast<double>(M)) / static_cast<double>(n));
    return p;
}

/// Noise vector, response and (for simulations) the truth.
struct RegressionInstance {
    DesignMatrix design;
    Vector y;
    std::optional<Vector> f_true;
    std::optional<CoefficientVector> beta_star;
    std::optional<Vector> noise;
    double sigma = 0.0;

    RegressionInstance(DesignMatrix d, Vector response, double noise_sd = 0.0,
                       std::optional<Vector> f = std::nullopt,
                       std::optional<CoefficientVector> beta = std::nullopt,
                       std::optional<Vector> w = std::nullopt)
        : design(std::move(d)), y(std::move(response)), f_true(std::move(f)),
          beta_star(std::move(beta)), noise(std::move(w)), sigma(noise_sd) {
        const Index n = design.n();
        if (y.size() != n) throw InvalidInput("RegressionInstance: y has wrong length");
        if (f_true && f_true->size() != n) throw InvalidInput("RegressionInstance: f has wrong length");
        if (noise && noise->size() != n) throw InvalidInput("RegressionInstance: noise has wrong length");
        if (beta_star && beta_star->size() != design.M())
            throw InvalidInput("RegressionInstance: beta_star has wrong length");
        if (!(sigma >= 0.0)) throw InvalidInput("RegressionInstance: sigma must be nonnegative");
        if (f_true && noise) {
            const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
            if ((y - *f_true - *noise).cwiseAbs().maxCoeff() > 1e-12 * scale)
                throw InvalidInput("RegressionInstance: y != f + w");
        }
    }

    /// f equals X * beta_star (the linear model).
    bool is_linear(double tol = 1e-12) const {
        if (!f_true || !beta_star) return false;
        const Vector fb = design.x() * beta_star->values();
        const double scale = std::max(1.0, f_true->cwiseAbs().maxCoeff());
        return (fb - *f_true).cwiseAbs().maxCoeff() <= tol * scale;
    }
};

enum class NoiseEvent { A, B };
enum class ProbabilityForm { crude, refined };

/// Standard normal upper tail Q(t) = P(eta > t).
inline double normal_upper_tail(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

/// Lower bounds on P(A) and P(B). Returned unclamped: negative means vacuous.
inline double event_probability(double A, Index M, NoiseEvent event, ProbabilityForm form) {
    if (!(A > 0.0)) throw InvalidInput("event_probability: A must be positive");
    if (M < 2) throw InvalidInput("event_probability: M must be >= 2");
    const double m = static_cast<double>(M);
    if (form == ProbabilityForm::crude) {
        const double denom = event == NoiseEvent::A ? 8.0 : 2.0;
        return 1.0 - std::pow(m, 1.0 - A * A / denom);
    }
    const double t = A * std::sqrt(std::log(m)) / (event == NoiseEvent::A ? 2.0 : 1.0);
    return 1.0 - 2.0 * m * normal_upper_tail(t);
}

inline const char* to_string(NoiseEvent e) { return e == NoiseEvent::A ? "A" : "B"; }

}  // namespace sparsereg
