#pragma once

// Value iteration, policy iteration with exact evaluation, and the primal LP.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "mdptk/mdp.hpp"
#include "mdptk/simplex.hpp"

namespace mdptk {

enum class SolveMethod { VI, PI, LP, RPI };

inline const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::VI: return "vi";
    case SolveMethod::PI: return "pi";
    case SolveMethod::LP: return "lp";
    case SolveMethod::RPI: return "rpi";
  }
  return "?";
}

struct SolveReport {
  ValueFunction value;
  Policy policy;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  SolveMethod method = SolveMethod::VI;
  double wall_seconds = 0.0;
  /// One entry per iteration: ||V_t - V_{t-1}|| for VI, ||T V_pi - T_pi V_pi|| for PI.
  std::vector<double> residual_history;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline constexpr double kMinReciprocalCondition = 1e-12;

// Eigen's estimate is unreliable for exactly singular factors (it can report 1 or NaN),
// so the pivot ratio of U is checked as well. NaN maps to 0.
inline double reciprocal_condition(const Eigen::PartialPivLU<Matrix>& lu) {
  if (lu.rows() == 0) return 1.0;
  const Vector pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double largest = pivots.maxCoeff();
  if (!(largest > 0.0)) return 0.0;
  const double rc = std::min(lu.rcond(), pivots.minCoeff() / largest);
  return std::isnan(rc) ? 0.0 : rc;
}

// Solves M x = b with partial-pivot LU; throws if the reciprocal condition estimate is too small.
inline Vector lu_solve(const Matrix& m, const Vector& b, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(m);
  const double rc = reciprocal_condition(lu);
  if (!(rc >= kMinReciprocalCondition))
    throw SingularSystemError(std::string(what) + ": system is singular (rcond " + std::to_string(rc) + ")");
  return lu.solve(b);
}

}  // namespace detail

/// VI threshold on successive differences: eps'(1-gamma)/(2 gamma), or eps' when gamma = 1.
inline double vi_stopping_threshold(double epsilon_prime, double gamma) {
  if (gamma <= 0.0) return epsilon_prime;
  if (gamma >= 1.0) return epsilon_prime;
  return epsilon_prime * (1.0 - gamma) / (2.0 * gamma);
}

/// Geometric bound on the number of VI sweeps needed to reach threshold eps.
inline std::size_t default_vi_max_iters(const TabularMDP& mdp, double eps) {
  const double gamma = mdp.discount();
  if (gamma >= 1.0) return 100'000;
  const double m = mdp.max_abs_reward();
  if (m == 0.0 || gamma == 0.0) return 2;
  const double bound = std::ceil(std::log(eps * (1.0 - gamma) / (2.0 * m)) / std::log(gamma)) + 1.0;
  return bound < 2.0 ? 2 : static_cast<std::size_t>(bound);
}

/**
 * Value iteration from V_0 = 0. Stops once ||V_t - V_{t-1}||_inf < eps'(1-gamma)/(2 gamma),
 * which leaves V_t within eps'/2 of V* and makes its greedy policy eps'-optimal.
 */
inline SolveReport value_iteration(const TabularMDP& mdp, double epsilon_prime,
                                   std::optional<std::size_t> max_iters = std::nullopt) {
  if (!(epsilon_prime > 0.0)) throw std::invalid_argument("value_iteration: epsilon' must be positive");
  detail::Stopwatch clock;
  const double eps = vi_stopping_threshold(epsilon_prime, mdp.discount());
  const std::size_t limit = max_iters.value_or(default_vi_max_iters(mdp, eps));

  SolveReport report;
  report.method = SolveMethod::VI;
  ValueFunction v = ValueFunction::Zero(static_cast<Eigen::Index>(mdp.n_states()));
  double residual = std::numeric_limits<double>::infinity();
  std::size_t t = 0;
  while (!(residual < eps)) {
    if (t >= limit)
      throw NonConvergenceError("value_iteration: no convergence after " + std::to_string(t) + " sweeps", residual, t);
    ValueFunction next = bellman_backup(v, mdp);
    residual = max_norm(next - v);
    v = std::move(next);
    ++t;
    report.residual_history.push_back(residual);
  }
  report.policy = greedy_policy(v, mdp);
  report.value = std::move(v);
  report.iterations = t;
  report.final_residual = residual;
  report.wall_seconds = clock.seconds();
  return report;
}

/**
 * V_pi = (I - gamma P_pi)^{-1} R_pi. For SSP problems the system is restricted
 * to the non-terminal states and terminal values are fixed at 0.
 */
inline ValueFunction policy_evaluation_exact(const TabularMDP& mdp, const Policy& pi) {
  const auto model = policy_model(mdp, pi);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  if (mdp.problem_class() == ProblemClass::Discounted) {
    const Matrix a = Matrix::Identity(n, n) - mdp.discount() * model.transition;
    return detail::lu_solve(a, model.reward, "policy_evaluation_exact");
  }
  std::vector<Eigen::Index> live;
  for (Eigen::Index s = 0; s < n; ++s)
    if (!mdp.is_terminal(static_cast<std::size_t>(s))) live.push_back(s);
  ValueFunction v = ValueFunction::Zero(n);
  if (live.empty()) return v;
  const auto k = static_cast<Eigen::Index>(live.size());
  Matrix a(k, k);
  Vector b(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    b[i] = model.reward[live[i]];
    for (Eigen::Index j = 0; j < k; ++j)
      a(i, j) = (i == j ? 1.0 : 0.0) - model.transition(live[i], live[j]);
  }
  const Vector x = detail::lu_solve(a, b, "policy_evaluation_exact (policy may be improper)");
  for (Eigen::Index i = 0; i < k; ++i) v[live[i]] = x[i];
  return v;
}

/**
 * One improvement step: at each state switch to the lowest-index greedy action
 * only if it beats the incumbent action by more than a relative 1e-12.
 */
inline Policy improve_policy(const TabularMDP& mdp, const Policy& pi, const ValueFunction& v) {
  const QFunction q = q_backup(v, mdp);
  const double tol = 1e-12 * (1.0 + max_norm(v));
  Policy next = pi;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    const std::size_t best = argmax_row(q, s);
    if (q(row, static_cast<Eigen::Index>(best)) > q(row, static_cast<Eigen::Index>(pi[s])) + tol) next[s] = best;
  }
  return next;
}

/// Alternates exact evaluation and greedy improvement until the policy repeats.
inline SolveReport policy_iteration(const TabularMDP& mdp, const Policy& pi0, std::size_t max_rounds = 10'000) {
  pi0.check(mdp);
  detail::Stopwatch clock;
  SolveReport report;
  report.method = SolveMethod::PI;
  Policy pi = pi0;
  for (std::size_t round = 1;; ++round) {
    ValueFunction v = policy_evaluation_exact(mdp, pi);
    const double residual = max_norm(bellman_backup(v, mdp) - policy_backup(v, mdp, pi));
    report.residual_history.push_back(residual);
    Policy next = improve_policy(mdp, pi, v);
    if (next == pi) {
      report.value = std::move(v);
      report.policy = std::move(pi);
      report.iterations = round;
      report.final_residual = residual;
      break;
    }
    if (round >= max_rounds)
      throw NonConvergenceError("policy_iteration: round limit reached", residual, round);
    pi = std::move(next);
  }
  report.wall_seconds = clock.seconds();
  return report;
}

/// Primal LP: min sum rho(s) V(s) s.t. V(s) - gamma sum p(s'|s,a) V(s') >= sum p(s'|s,a) R(s,a,s').
/// Row s * |A| + a holds the constraint for (s, a).
inline LinearProgram build_primal_lp(const TabularMDP& mdp, const StateWeights& rho) {
  if (mdp.problem_class() != ProblemClass::Discounted)
    throw std::invalid_argument("build_primal_lp: discounted MDP required");
  if (rho.size() != mdp.n_states()) throw std::invalid_argument("build_primal_lp: weight dimension mismatch");
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  const auto na = static_cast<Eigen::Index>(mdp.n_actions());
  LinearProgram lp;
  lp.objective = rho.values();
  lp.constraint_matrix = Matrix::Zero(n * na, n);
  lp.constraint_rhs = Vector::Zero(n * na);
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Eigen::Index a = 0; a < na; ++a) {
      const Eigen::Index row = s * na + a;
      lp.constraint_matrix.row(row) = -mdp.discount() * mdp.transition(static_cast<std::size_t>(a)).row(s);
      lp.constraint_matrix(row, s) += 1.0;
      lp.constraint_rhs[row] = mdp.expected_reward()(s, a);
    }
  }
  return lp;
}

inline SolveReport solve_lp(const TabularMDP& mdp, const StateWeights& rho) {
  detail::Stopwatch clock;
  const LinearProgram lp = build_primal_lp(mdp, rho);
  SolveReport report;
  report.method = SolveMethod::LP;
  report.value = simplex_solve(lp);
  report.policy = greedy_policy(report.value, mdp);
  report.iterations = 1;
  report.final_residual = max_norm(bellman_backup(report.value, mdp) - report.value);
  report.residual_history.push_back(report.final_residual);
  report.wall_seconds = clock.seconds();
  return report;
}

}  // namespace mdptk
