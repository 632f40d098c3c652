#pragma once

// Dense two-phase tableau simplex with Bland's anti-cycling rule for
//
//     minimize  c^T x   subject to  A x <= b,  x >= 0
//
// where b may have either sign. Rows with negative right-hand side receive an
// artificial variable; phase one drives the artificials to zero, phase two
// optimizes the original objective from the feasible basis found.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sparsereg/errors.hpp"

namespace sparsereg::lp {

using Index = Eigen::Index;

enum class Status { optimal, infeasible, unbounded };

struct SimplexOptions {
    /// Optimality tolerance on reduced costs and phase-one feasibility tolerance.
    double tol = 1e-9;
    /// Entries with magnitude below this are never used as pivots.
    double pivot_tol = 1e-11;
    long max_pivots = 200000;
    /// Re-solve B x_B = b with the original columns at the final basis.
    bool refine = true;
};

struct SimplexResult {
    Status status = Status::infeasible;
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    long pivots = 0;
    /// Smallest reduced cost over eligible columns at termination (>= -tol when optimal).
    double min_reduced_cost = 0.0;
    /// Indices (into structural + slack columns) of the final basis.
    std::vector<Index> basis;
};

namespace detail {

class Tableau {
public:
    Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const SimplexOptions& opt)
        : opt_(opt), m_(A.rows()), n_(A.cols()) {
        for (Index i = 0; i < m_; ++i)
            if (b(i) < 0.0) ++n_art_;
        cols_ = n_ + m_ + n_art_;
        t_ = Eigen::MatrixXd::Zero(m_ + 1, cols_ + 1);
        std_ = Eigen::MatrixXd::Zero(m_, n_ + m_ + n_art_);
        std_rhs_ = Eigen::VectorXd::Zero(m_);
        basis_.assign(static_cast<std::size_t>(m_), -1);
        row_alive_.assign(static_cast<std::size_t>(m_), true);
        Index art = 0;
        for (Index i = 0; i < m_; ++i) {
            const double sgn = b(i) < 0.0 ? -1.0 : 1.0;
            std_.row(i).head(n_) = sgn * A.row(i);
            std_(i, n_ + i) = sgn;
            std_rhs_(i) = sgn * b(i);
            if (sgn < 0.0) {
                const Index col = n_ + m_ + art++;
                std_(i, col) = 1.0;
                basis_[static_cast<std::size_t>(i)] = col;
            } else {
                basis_[static_cast<std::size_t>(i)] = n_ + i;
            }
        }
        t_.topLeftCorner(m_, cols_) = std_;
        t_.col(cols_).head(m_) = std_rhs_;
        eligible_.assign(static_cast<std::size_t>(cols_), true);
    }

    Index structural() const { return n_; }
    bool is_artificial(Index col) const { return col >= n_ + m_; }

    /// Loads an objective over all columns and prices out the current basis.
    void set_objective(const Eigen::VectorXd& cost) {
        cost_ = cost;
        t_.row(m_).setZero();
        t_.row(m_).head(cols_) = cost.transpose();
        for (Index i = 0; i < m_; ++i) {
            if (!row_alive_[static_cast<std::size_t>(i)]) continue;
            const double cb = cost(basis_[static_cast<std::size_t>(i)]);
            if (cb != 0.0) t_.row(m_) -= cb * t_.row(i);
        }
    }

    /// Current objective value c_B^T x_B.
    double objective_value() const { return -t_(m_, cols_); }

    void pivot(Index row, Index col) {
        const double p = t_(row, col);
        t_.row(row) /= p;
        const Eigen::RowVectorXd prow = t_.row(row);
        for (Index i = 0; i <= m_; ++i) {
            if (i == row) continue;
            const double f = t_(i, col);
            if (f != 0.0) t_.row(i) -= f * prow;
        }
        t_.col(col).setZero();
        t_(row, col) = 1.0;
        basis_[static_cast<std::size_t>(row)] = col;
        ++pivots_;
        if (pivots_ > opt_.max_pivots)
            throw ResourceError("simplex: pivot budget of " + std::to_string(opt_.max_pivots) +
                                " exhausted");
    }

    /// Runs Bland's rule to optimality. Returns false when unbounded.
    bool optimize() {
        for (;;) {
            Index enter = -1;
            for (Index j = 0; j < cols_; ++j) {
                if (eligible_[static_cast<std::size_t>(j)] && t_(m_, j) < -opt_.tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return true;
            Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < m_; ++i) {
                if (!row_alive_[static_cast<std::size_t>(i)]) continue;
                const double a = t_(i, enter);
                if (a <= opt_.pivot_tol) continue;
                const double ratio = std::max(0.0, t_(i, cols_)) / a;
                if (leave < 0) {
                    leave = i;
                    best = ratio;
                    continue;
                }
                const double slack = 1e-12 * std::max(1.0, best);
                if (ratio < best - slack) {
                    leave = i;
                    best = ratio;
                } else if (ratio <= best + slack &&
                           basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
                    // Bland: among tied rows, the smallest basic index leaves
                    leave = i;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
    }

    /// After phase one: pivot artificials out of the basis or retire redundant rows.
    void expel_artificials() {
        for (Index i = 0; i < m_; ++i) {
            if (!row_alive_[static_cast<std::size_t>(i)]) continue;
            if (!is_artificial(basis_[static_cast<std::size_t>(i)])) continue;
            Index col = -1;
            double best = opt_.pivot_tol;
            for (Index j = 0; j < n_ + m_; ++j) {
                if (std::abs(t_(i, j)) > best) {
                    best = std::abs(t_(i, j));
                    col = j;
                }
            }
            if (col >= 0) {
                pivot(i, col);
            } else {
                row_alive_[static_cast<std::size_t>(i)] = false;
            }
        }
        for (Index j = n_ + m_; j < cols_; ++j) eligible_[static_cast<std::size_t>(j)] = false;
    }

    double min_reduced_cost() const {
        double mn = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < cols_; ++j)
            if (eligible_[static_cast<std::size_t>(j)]) mn = std::min(mn, t_(m_, j));
        return mn;
    }

    /// Values of the structural and slack variables at the current basis.
    Eigen::VectorXd solution() const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n_ + m_ + n_art_);
        std::vector<Index> rows;
        for (Index i = 0; i < m_; ++i)
            if (row_alive_[static_cast<std::size_t>(i)]) rows.push_back(i);
        if (opt_.refine && !rows.empty()) {
            const Index k = static_cast<Index>(rows.size());
            Eigen::MatrixXd B(k, k);
            Eigen::VectorXd rhs(k);
            for (Index r = 0; r < k; ++r) {
                rhs(r) = std_rhs_(rows[static_cast<std::size_t>(r)]);
                for (Index c = 0; c < k; ++c)
                    B(r, c) = std_(rows[static_cast<std::size_t>(r)],
                                   basis_[static_cast<std::size_t>(rows[static_cast<std::size_t>(c)])]);
            }
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
            Eigen::VectorXd xb = lu.solve(rhs);
            // keep the refined point only if it is at least as accurate as the tableau's
            Eigen::VectorXd tab(k);
            for (Index r = 0; r < k; ++r) tab(r) = t_(rows[static_cast<std::size_t>(r)], cols_);
            if (xb.allFinite() && (B * xb - rhs).cwiseAbs().maxCoeff() <=
                                      (B * tab - rhs).cwiseAbs().maxCoeff() + 1e-15) {
                for (Index r = 0; r < k; ++r)
                    x(basis_[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])]) = xb(r);
                return x;
            }
        }
        for (Index i : rows) x(basis_[static_cast<std::size_t>(i)]) = t_(i, cols_);
        return x;
    }

    long pivots() const { return pivots_; }
    Index artificial_count() const { return n_art_; }
    Index total_cols() const { return cols_; }
    std::vector<Index> basis() const {
        std::vector<Index> out;
        for (Index i = 0; i < m_; ++i)
            if (row_alive_[static_cast<std::size_t>(i)]) out.push_back(basis_[static_cast<std::size_t>(i)]);
        return out;
    }
    double rhs_scale() const { return std::max(1.0, std_rhs_.cwiseAbs().maxCoeff()); }

private:
    SimplexOptions opt_;
    Index m_, n_, n_art_ = 0, cols_ = 0;
    Eigen::MatrixXd t_;
    Eigen::MatrixXd std_;
    Eigen::VectorXd std_rhs_;
    Eigen::VectorXd cost_;
    std::vector<Index> basis_;
    std::vector<bool> row_alive_;
    std::vector<bool> eligible_;
    long pivots_ = 0;
};

}  // namespace detail

/// Minimizes c^T x over {x >= 0 : A x <= b}.
inline SimplexResult solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                           const SimplexOptions& opt = {}) {
    if (A.rows() != b.size() || A.cols() != c.size())
        throw InvalidInput("simplex: dimension mismatch");
    if (!A.allFinite() || !b.allFinite() || !c.allFinite())
        throw InvalidInput("simplex: non-finite problem data");

    detail::Tableau tab(A, b, opt);
    SimplexResult res;
    const Index n = A.cols();

    if (tab.artificial_count() > 0) {
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(tab.total_cols());
        for (Index j = n + A.rows(); j < tab.total_cols(); ++j) phase1(j) = 1.0;
        tab.set_objective(phase1);
        tab.optimize();
        if (tab.objective_value() > opt.tol * tab.rhs_scale()) {
            res.status = Status::infeasible;
            res.pivots = tab.pivots();
            return res;
        }
        tab.expel_artificials();
    }

    Eigen::VectorXd cost = Eigen::VectorXd::Zero(tab.total_cols());
    cost.head(n) = c;
    tab.set_objective(cost);
    const bool bounded = tab.optimize();
    res.pivots = tab.pivots();
    res.min_reduced_cost = tab.min_reduced_cost();
    res.basis = tab.basis();
    if (!bounded) {
        res.status = Status::unbounded;
        return res;
    }
    const Eigen::VectorXd full = tab.solution();
    res.x = full.head(n).cwiseMax(0.0);
    res.objective = c.dot(res.x);
    res.status = Status::optimal;
    return res;
}

}  // namespace sparsereg::lp
