#pragma once

// Linear value-function approximation: weighted projection, projected Bellman
// equation, projected value iteration, LSTD(lambda), induced compact MDP.

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "mdptk/exact_solvers.hpp"
#include "mdptk/simulation.hpp"

namespace mdptk {

/**
 * |S| x k feature matrix (rows are feature vectors) together with the weights
 * of the projection norm. Full column rank is checked on construction via the
 * smallest singular value of D_rho^{1/2} Phi. A basis with zero columns is
 * allowed; it spans {0}.
 */
class FeatureBasis {
 public:
  FeatureBasis(Matrix phi, StateWeights rho) : phi_(std::move(phi)), rho_(std::move(rho)) {
    if (static_cast<std::size_t>(phi_.rows()) != rho_.size())
      throw std::invalid_argument("FeatureBasis: feature rows must match number of weights");
    if (phi_.cols() > phi_.rows()) throw std::invalid_argument("FeatureBasis: more features than states");
    if (phi_.cols() == 0) return;
    const Matrix scaled = rho_.values().cwiseSqrt().asDiagonal() * phi_;
    Eigen::JacobiSVD<Matrix> svd(scaled);
    const double smallest = svd.singularValues()[svd.singularValues().size() - 1];
    if (!(smallest > kRankThreshold))
      throw SingularSystemError("FeatureBasis: features are rank deficient (smallest singular value " +
                                std::to_string(smallest) + ")");
    gram_ = phi_.transpose() * rho_.values().asDiagonal() * phi_;
    gram_lu_ = Eigen::PartialPivLU<Matrix>(gram_);
  }

  static FeatureBasis identity(std::size_t n) {
    return FeatureBasis(Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                        StateWeights::uniform(n));
  }
  static FeatureBasis empty(StateWeights rho) {
    const auto n = static_cast<Eigen::Index>(rho.size());
    return FeatureBasis(Matrix(n, 0), std::move(rho));
  }

  const Matrix& phi() const { return phi_; }
  const StateWeights& rho() const { return rho_; }
  std::size_t n_states() const { return static_cast<std::size_t>(phi_.rows()); }
  std::size_t rank() const { return static_cast<std::size_t>(phi_.cols()); }
  /// Phi' D_rho Phi.
  const Matrix& gram() const { return gram_; }

  /// (Phi' D_rho Phi)^{-1} Phi' D_rho x for a vector or matrix x.
  template <class Derived>
  Matrix weighted_least_squares(const Eigen::MatrixBase<Derived>& x) const {
    if (rank() == 0) return Matrix::Zero(0, x.cols());
    return gram_lu_.solve(phi_.transpose() * (rho_.values().asDiagonal() * x));
  }

  static constexpr double kRankThreshold = 1e-10;

 private:
  Matrix phi_;
  StateWeights rho_;
  Matrix gram_;
  Eigen::PartialPivLU<Matrix> gram_lu_;
};

struct ProjectedSolution {
  Vector weights;
  ValueFunction value;  ///< Phi * weights
  double residual = 0.0;
  std::size_t iterations = 0;
};

/// Weights of the rho-weighted least-squares fit of V.
inline Vector projection_weights(const ValueFunction& v, const FeatureBasis& basis) {
  if (static_cast<std::size_t>(v.size()) != basis.n_states())
    throw std::invalid_argument("project: value dimension does not match basis");
  return basis.weighted_least_squares(v);
}

/// Pi V = Phi (Phi' D Phi)^{-1} Phi' D V.
inline ValueFunction project(const ValueFunction& v, const FeatureBasis& basis) {
  if (basis.rank() == 0) return ValueFunction::Zero(v.size());
  return basis.phi() * projection_weights(v, basis);
}

namespace detail {
inline void check_basis(const TabularMDP& mdp, const FeatureBasis& basis) {
  if (basis.n_states() != mdp.n_states()) throw std::invalid_argument("basis does not match MDP state count");
}

inline double projected_fixed_point_residual(const TabularMDP& mdp, const Policy& pi, const FeatureBasis& basis,
                                             const ValueFunction& v) {
  return max_norm(v - project(policy_backup(v, mdp, pi), basis));
}
}  // namespace detail

/// Solves [Phi' D (I - gamma P_pi) Phi] w = Phi' D R_pi.
inline ProjectedSolution solve_projected_bellman(const TabularMDP& mdp, const Policy& pi, const FeatureBasis& basis) {
  detail::check_basis(mdp, basis);
  const auto model = policy_model(mdp, pi);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  ProjectedSolution sol;
  if (basis.rank() == 0) {
    sol.weights = Vector(0);
    sol.value = ValueFunction::Zero(n);
  } else {
    const Matrix dphi = basis.rho().values().asDiagonal() * basis.phi();
    const Matrix a = dphi.transpose() * (Matrix::Identity(n, n) - mdp.discount() * model.transition) * basis.phi();
    const Vector b = dphi.transpose() * model.reward;
    sol.weights = detail::lu_solve(a, b, "solve_projected_bellman");
    sol.value = basis.phi() * sol.weights;
  }
  sol.residual = detail::projected_fixed_point_residual(mdp, pi, basis, sol.value);
  return sol;
}

/**
 * Phi w_{t+1} = Pi T_pi (Phi w_t) from w_0 (default 0) until ||w_{t+1} - w_t||_inf < tol.
 * Convergence is only guaranteed when rho is the stationary distribution of P_pi;
 * otherwise the iteration may hit max_iters and throw NonConvergenceError.
 */
inline ProjectedSolution projected_value_iteration(const TabularMDP& mdp, const Policy& pi,
                                                   const FeatureBasis& basis, double tol, std::size_t max_iters,
                                                   std::optional<Vector> w0 = std::nullopt) {
  detail::check_basis(mdp, basis);
  const auto model = policy_model(mdp, pi);
  const auto k = static_cast<Eigen::Index>(basis.rank());
  Vector w = w0.value_or(Vector::Zero(k));
  if (w.size() != k) throw std::invalid_argument("projected_value_iteration: initial weights have wrong size");
  // Pi T_pi (Phi w) = c + M w with c = LS(R_pi), M = gamma LS(P_pi Phi).
  const Vector c = basis.weighted_least_squares(model.reward);
  const Matrix m = mdp.discount() * basis.weighted_least_squares(model.transition * basis.phi());
  double diff = std::numeric_limits<double>::infinity();
  std::size_t t = 0;
  while (!(diff < tol)) {
    if (t >= max_iters)
      throw NonConvergenceError("projected_value_iteration: no convergence (is rho the steady-state distribution?)",
                                diff, t);
    Vector next = c + m * w;
    diff = k == 0 ? 0.0 : (next - w).cwiseAbs().maxCoeff();
    w = std::move(next);
    ++t;
  }
  ProjectedSolution sol;
  sol.weights = std::move(w);
  sol.value = basis.phi() * sol.weights;
  sol.residual = detail::projected_fixed_point_residual(mdp, pi, basis, sol.value);
  sol.iterations = t;
  return sol;
}

/**
 * Stationary distribution of P_pi. Uniqueness is checked through the rank of
 * I - P_pi'; the distribution itself comes from power iteration on the lazy
 * chain (I + P_pi)/2, which has the same fixed point and no periodicity.
 */
inline StateWeights steady_state_distribution(const TabularMDP& mdp, const Policy& pi,
                                              std::size_t max_steps = 100'000) {
  const auto model = policy_model(mdp, pi);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  const Matrix pt = model.transition.transpose();
  if (n > 1) {
    Eigen::FullPivLU<Matrix> lu(Matrix::Identity(n, n) - pt);
    lu.setThreshold(1e-10);
    if (lu.rank() < n - 1) throw NotErgodicError("steady_state_distribution: stationary distribution is not unique");
  }
  const Matrix lazy = 0.5 * (Matrix::Identity(n, n) + pt);
  Vector rho = Vector::Constant(n, 1.0 / static_cast<double>(n));
  bool converged = false;
  for (std::size_t t = 0; t < max_steps; ++t) {
    Vector next = lazy * rho;
    next /= next.sum();
    const double change = (next - rho).lpNorm<1>();
    rho = std::move(next);
    if (change < 1e-15) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    const double res = (pt * rho - rho).lpNorm<1>();
    if (!(res <= 1e-12)) throw NotErgodicError("steady_state_distribution: power iteration did not converge");
  }
  for (Eigen::Index s = 0; s < n; ++s)
    if (!(rho[s] > 0.0)) throw NotErgodicError("steady_state_distribution: chain is not irreducible");
  return StateWeights(rho);
}

struct LstdResult {
  ProjectedSolution solution;
  Matrix a;  ///< (1/n) sum z_m (phi(s_m) - gamma phi(s_{m+1}))'
  Vector b;  ///< (1/n) sum z_m r_m
  double regularization = 0.0;
  std::size_t n_samples = 0;
};

/**
 * LSTD(lambda). Within each trajectory the eligibility vector
 * z_m = sum_{k<=m} (gamma lambda)^{m-k} phi(s_k) turns the double sums over
 * k <= m into single passes. phi(s_{m+1}) is 0 on terminal transitions; the
 * trace restarts with every trajectory.
 *
 * If A is ill-conditioned, delta I with delta = 1e-8 trace(A)/k is added.
 */
inline LstdResult lstd(const std::vector<Trajectory>& samples, const FeatureBasis& basis, double gamma,
                       double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lstd: lambda must be in [0,1]");
  const auto k = static_cast<Eigen::Index>(basis.rank());
  if (k == 0) throw std::invalid_argument("lstd: empty basis");
  const Matrix& phi = basis.phi();
  LstdResult out;
  out.a = Matrix::Zero(k, k);
  out.b = Vector::Zero(k);
  Vector z(k);
  for (const auto& traj : samples) {
    z.setZero();
    for (const auto& tr : traj.transitions) {
      if (tr.state >= basis.n_states() || tr.next_state >= basis.n_states())
        throw std::invalid_argument("lstd: sample state outside basis");
      const auto s = static_cast<Eigen::Index>(tr.state);
      z = gamma * lambda * z + phi.row(s).transpose();
      Vector diff = phi.row(s).transpose();
      if (!tr.terminal) diff -= gamma * phi.row(static_cast<Eigen::Index>(tr.next_state)).transpose();
      out.a += z * diff.transpose();
      out.b += tr.reward * z;
      ++out.n_samples;
    }
  }
  if (out.n_samples == 0) throw std::invalid_argument("lstd: no samples");
  out.a /= static_cast<double>(out.n_samples);
  out.b /= static_cast<double>(out.n_samples);

  Matrix a = out.a;
  Eigen::PartialPivLU<Matrix> lu(a);
  if (!(detail::reciprocal_condition(lu) >= detail::kMinReciprocalCondition)) {
    double delta = 1e-8 * std::abs(a.trace()) / static_cast<double>(k);
    if (delta == 0.0) delta = 1e-8;
    a += delta * Matrix::Identity(k, k);
    out.regularization = delta;
    lu.compute(a);
    if (!(detail::reciprocal_condition(lu) >= detail::kMinReciprocalCondition))
      throw SingularSystemError("lstd: sample matrix singular after regularization");
  }
  out.solution.weights = lu.solve(out.b);
  out.solution.value = phi * out.solution.weights;
  return out;
}

/// Compact MDP induced by a basis: R^Phi = LS(R_pi), P^Phi = LS(P_pi Phi).
struct InducedMDP {
  Vector reward;
  Matrix transition;
};

inline InducedMDP induced_mdp(const TabularMDP& mdp, const Policy& pi, const FeatureBasis& basis) {
  detail::check_basis(mdp, basis);
  const auto model = policy_model(mdp, pi);
  return InducedMDP{basis.weighted_least_squares(model.reward),
                    basis.weighted_least_squares(model.transition * basis.phi())};
}

/// Solves (I - gamma P^Phi) w = R^Phi.
inline Vector solve_induced(const InducedMDP& compact, double gamma) {
  const auto k = compact.reward.size();
  if (k == 0) return Vector(0);
  return detail::lu_solve(Matrix::Identity(k, k) - gamma * compact.transition, compact.reward, "solve_induced");
}

}  // namespace mdptk
