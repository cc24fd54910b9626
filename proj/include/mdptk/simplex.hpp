#pragma once

// Dense two-phase tableau simplex with Bland's anti-cycling rule.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mdptk/errors.hpp"

namespace mdptk {

/**
 * minimize  objective' x
 * subject to constraint_matrix x >= constraint_rhs,  x free.
 */
struct LinearProgram {
  Eigen::VectorXd objective;
  Eigen::MatrixXd constraint_matrix;
  Eigen::VectorXd constraint_rhs;

  std::size_t n_variables() const { return static_cast<std::size_t>(objective.size()); }
  std::size_t n_constraints() const { return static_cast<std::size_t>(constraint_rhs.size()); }
};

struct SimplexOptions {
  double pivot_tolerance = 1e-9;
  double feasibility_tolerance = 1e-9;
  std::size_t max_pivots = 1'000'000;
};

namespace detail {

class Tableau {
 public:
  // rows_: one per constraint, last column is the rhs. cost_: reduced-cost row, last entry is -objective.
  Tableau(Eigen::MatrixXd rows, std::vector<std::size_t> basis, double tol)
      : t_(std::move(rows)), basis_(std::move(basis)), tol_(tol) {}

  Eigen::Index n_cols() const { return t_.cols() - 1; }
  Eigen::Index n_rows() const { return t_.rows(); }
  Eigen::MatrixXd& data() { return t_; }
  const std::vector<std::size_t>& basis() const { return basis_; }
  std::vector<std::size_t>& basis() { return basis_; }

  // Reduced-cost row for cost vector c under the current basis.
  void price(const Eigen::VectorXd& c) {
    cost_ = Eigen::VectorXd::Zero(t_.cols());
    cost_.head(n_cols()) = c;
    for (Eigen::Index i = 0; i < n_rows(); ++i) {
      const double cb = c[static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(i)])];
      if (cb != 0.0) cost_ -= cb * t_.row(i).transpose();
    }
  }

  // Runs Bland's rule pivots on columns j with allowed[j]; returns false if unbounded.
  bool optimize(const std::vector<bool>& allowed, std::size_t& pivots, std::size_t max_pivots) {
    while (true) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < n_cols(); ++j) {
        if (allowed[static_cast<std::size_t>(j)] && cost_[j] < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n_rows(); ++i) {
        const double a = t_(i, enter);
        if (a > tol_) {
          const double ratio = t_(i, n_cols()) / a;
          if (ratio < best_ratio - tol_ ||
              (std::abs(ratio - best_ratio) <= tol_ && leave >= 0 &&
               basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
            best_ratio = std::min(ratio, best_ratio);
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      if (++pivots > max_pivots) throw NonConvergenceError("simplex pivot limit exceeded", 0.0, pivots);
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i < n_rows(); ++i) {
      if (i != row) {
        const double f = t_(i, col);
        if (f != 0.0) t_.row(i) -= f * t_.row(row);
      }
    }
    const double fc = cost_[col];
    if (fc != 0.0) cost_ -= fc * t_.row(row).transpose();
    basis_[static_cast<std::size_t>(row)] = static_cast<std::size_t>(col);
  }

  const Eigen::VectorXd& reduced_costs() const { return cost_; }

  Eigen::VectorXd solution() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_cols());
    for (Eigen::Index i = 0; i < n_rows(); ++i) x[static_cast<Eigen::Index>(basis_[static_cast<std::size_t>(i)])] = t_(i, n_cols());
    return x;
  }

  void drop_row(Eigen::Index row) {
    Eigen::MatrixXd next(t_.rows() - 1, t_.cols());
    next << t_.topRows(row), t_.bottomRows(t_.rows() - row - 1);
    t_ = std::move(next);
    basis_.erase(basis_.begin() + row);
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<std::size_t> basis_;
  Eigen::VectorXd cost_;
  double tol_;
};

}  // namespace detail

/**
 * Returns an optimal vertex of lp. Free variables are split x = x+ - x-, each
 * >= constraint gets a surplus column, and rows with a positive right-hand
 * side get an artificial column for phase one.
 *
 * Throws InfeasibleError / UnboundedError.
 */
inline Eigen::VectorXd simplex_solve(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  const auto m = static_cast<Eigen::Index>(lp.n_constraints());
  const auto n = static_cast<Eigen::Index>(lp.n_variables());
  if (lp.constraint_matrix.rows() != m || lp.constraint_matrix.cols() != n)
    throw std::invalid_argument("simplex_solve: constraint matrix dimensions do not match");
  if (n == 0) throw std::invalid_argument("simplex_solve: no variables");

  // Column layout: [x+ (n) | x- (n) | surplus (m) | artificial (n_art)].
  std::vector<Eigen::Index> needs_artificial;
  for (Eigen::Index i = 0; i < m; ++i)
    if (lp.constraint_rhs[i] > 0.0) needs_artificial.push_back(i);
  const auto n_art = static_cast<Eigen::Index>(needs_artificial.size());
  const Eigen::Index n_struct = 2 * n + m;
  const Eigen::Index n_cols = n_struct + n_art;

  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(m, n_cols + 1);
  std::vector<std::size_t> basis(static_cast<std::size_t>(m));
  Eigen::Index art = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double b = lp.constraint_rhs[i];
    // a x+ - a x- - s = b
    const double sign = b > 0.0 ? 1.0 : -1.0;
    rows.block(i, 0, 1, n) = sign * lp.constraint_matrix.row(i);
    rows.block(i, n, 1, n) = -sign * lp.constraint_matrix.row(i);
    rows(i, 2 * n + i) = -sign;
    rows(i, n_cols) = sign * b;
    if (b > 0.0) {
      rows(i, n_struct + art) = 1.0;
      basis[static_cast<std::size_t>(i)] = static_cast<std::size_t>(n_struct + art);
      ++art;
    } else {
      basis[static_cast<std::size_t>(i)] = static_cast<std::size_t>(2 * n + i);
    }
  }

  detail::Tableau tab(std::move(rows), std::move(basis), opt.pivot_tolerance);
  std::size_t pivots = 0;
  std::vector<bool> allowed(static_cast<std::size_t>(n_cols), true);

  if (n_art > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_cols);
    phase1.tail(n_art).setOnes();
    tab.price(phase1);
    tab.optimize(allowed, pivots, opt.max_pivots);
    const double infeasibility = -tab.reduced_costs()[n_cols];
    const double scale = 1.0 + lp.constraint_rhs.cwiseAbs().maxCoeff();
    if (infeasibility > opt.feasibility_tolerance * scale) throw InfeasibleError("linear program is infeasible");

    // Drive remaining (zero-level) artificials out of the basis.
    for (Eigen::Index i = 0; i < tab.n_rows();) {
      const auto bv = static_cast<Eigen::Index>(tab.basis()[static_cast<std::size_t>(i)]);
      if (bv < n_struct) {
        ++i;
        continue;
      }
      Eigen::Index col = -1;
      for (Eigen::Index j = 0; j < n_struct; ++j)
        if (std::abs(tab.data()(i, j)) > opt.pivot_tolerance) {
          col = j;
          break;
        }
      if (col >= 0) {
        tab.pivot(i, col);
        ++i;
      } else {
        tab.drop_row(i);  // redundant constraint
      }
    }
    for (Eigen::Index j = n_struct; j < n_cols; ++j) allowed[static_cast<std::size_t>(j)] = false;
  }

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n_cols);
  cost.head(n) = lp.objective;
  cost.segment(n, n) = -lp.objective;
  tab.price(cost);
  if (!tab.optimize(allowed, pivots, opt.max_pivots)) throw UnboundedError("linear program is unbounded");

  // Dual feasibility of the final tableau: no admissible column has negative reduced cost.
  for (Eigen::Index j = 0; j < n_cols; ++j)
    if (allowed[static_cast<std::size_t>(j)] && tab.reduced_costs()[j] < -opt.pivot_tolerance)
      throw NonConvergenceError("simplex terminated without dual feasibility", tab.reduced_costs()[j], pivots);

  const Eigen::VectorXd z = tab.solution();
  return z.head(n) - z.segment(n, n);
}

}  // namespace mdptk
