#pragma once

// Automatic basis construction: Krylov, Schultz expansion, Bellman-error basis
// functions, representation policy iteration and aggregation correction.

#include <algorithm>
#include <numeric>
#include <vector>

#include "mdptk/linear_approx.hpp"

namespace mdptk {

struct BasisBuildResult {
  FeatureBasis basis;
  /// Krylov: the span closed before k columns. BEBF: the current basis is already exact.
  bool early_termination = false;
};

namespace detail {

// Removes the rho-weighted component of v along the span of q (assumed rho-orthonormal), twice.
inline Vector orthogonalize(Vector v, const Matrix& q, const Vector& rho) {
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index j = 0; j < q.cols(); ++j) v -= (q.col(j).dot(rho.cwiseProduct(v))) * q.col(j);
  return v;
}

inline double rho_norm(const Vector& v, const Vector& rho) { return std::sqrt(rho.cwiseProduct(v).dot(v)); }

inline Matrix append_column(const Matrix& m, const Vector& c) {
  Matrix out(m.rows(), m.cols() + 1);
  out << m, c;
  return out;
}

}  // namespace detail

/**
 * rho-orthonormal basis of span{R_pi, (gamma P_pi) R_pi, ..., (gamma P_pi)^{k-1} R_pi},
 * built Arnoldi-style: each new direction is (gamma P_pi) applied to the last
 * orthonormal column. Stops early when the next direction lies in the span.
 */
inline BasisBuildResult krylov_basis(const TabularMDP& mdp, const Policy& pi, std::size_t k,
                                     const StateWeights& rho) {
  if (k < 1 || k > mdp.n_states()) throw std::invalid_argument("krylov_basis: need 1 <= k <= |S|");
  if (rho.size() != mdp.n_states()) throw std::invalid_argument("krylov_basis: weight dimension mismatch");
  const auto model = policy_model(mdp, pi);
  const Matrix a = mdp.discount() * model.transition;
  const Vector& w = rho.values();
  const auto n = static_cast<Eigen::Index>(mdp.n_states());

  Matrix q(n, 0);
  Vector next = model.reward;
  bool early = false;
  for (std::size_t j = 0; j < k; ++j) {
    const double scale = detail::rho_norm(next, w);
    Vector v = detail::orthogonalize(next, q, w);
    const double norm = detail::rho_norm(v, w);
    if (!(norm > 1e-10 * std::max(1.0, scale))) {
      early = true;
      break;
    }
    q = detail::append_column(q, v / norm);
    next = a * q.col(q.cols() - 1);
  }
  return BasisBuildResult{FeatureBasis(std::move(q), rho), early};
}

inline BasisBuildResult krylov_basis(const TabularMDP& mdp, const Policy& pi, std::size_t k) {
  return krylov_basis(mdp, pi, k, StateWeights::uniform(mdp.n_states()));
}

/// prod_{j=0}^{k_terms-1} (I + (gamma P_pi)^{2^j}) R_pi, i.e. the first 2^k_terms terms of the Neumann series.
inline ValueFunction schultz_policy_evaluation(const TabularMDP& mdp, const Policy& pi, std::size_t k_terms) {
  if (mdp.problem_class() != ProblemClass::Discounted)
    throw std::invalid_argument("schultz_policy_evaluation: discounted MDP required");
  const auto model = policy_model(mdp, pi);
  Matrix power = mdp.discount() * model.transition;
  ValueFunction v = model.reward;
  for (std::size_t j = 0; j < k_terms; ++j) {
    v += power * v;
    if (j + 1 < k_terms) power = power * power;
  }
  return v;
}

/**
 * Appends the Bellman residual R + gamma P Phi w - Phi w of the current
 * projected solution (rho-orthonormalized) as a new column. With an empty
 * basis the residual is R_pi. A residual below 1e-10 (relative to R_pi)
 * leaves the basis unchanged and sets early_termination.
 */
inline BasisBuildResult bebf_extend(const FeatureBasis& basis, const TabularMDP& mdp, const Policy& pi) {
  detail::check_basis(mdp, basis);
  const auto model = policy_model(mdp, pi);
  const ProjectedSolution sol = solve_projected_bellman(mdp, pi, basis);
  const Vector residual = model.reward + mdp.discount() * (model.transition * sol.value) - sol.value;
  const double tol = 1e-10 * std::max(1.0, max_norm(model.reward));
  if (!(max_norm(residual) > tol) || basis.rank() == basis.n_states()) return BasisBuildResult{basis, true};
  const Vector& w = basis.rho().values();
  const Vector v = residual - project(residual, basis);
  const Vector v2 = v - project(v, basis);
  const double norm = detail::rho_norm(v2, w);
  if (!(norm > tol * 1e-2)) return BasisBuildResult{basis, true};
  return BasisBuildResult{FeatureBasis(detail::append_column(basis.phi(), v2 / norm), basis.rho()), false};
}

/// Runs bebf_extend up to k times from the empty basis.
inline BasisBuildResult bebf_basis(const TabularMDP& mdp, const Policy& pi, std::size_t k, const StateWeights& rho) {
  if (k < 1 || k > mdp.n_states()) throw std::invalid_argument("bebf_basis: need 1 <= k <= |S|");
  BasisBuildResult cur{FeatureBasis::empty(rho), false};
  for (std::size_t j = 0; j < k; ++j) {
    cur = bebf_extend(cur.basis, mdp, pi);
    if (cur.early_termination) break;
  }
  return cur;
}

/// State -> cluster map with every cluster nonempty.
class AggregationPartition {
 public:
  AggregationPartition(std::vector<std::size_t> cluster_of, std::size_t n_clusters)
      : cluster_of_(std::move(cluster_of)), m_(n_clusters) {
    if (m_ == 0) throw std::invalid_argument("AggregationPartition: need at least one cluster");
    std::vector<std::size_t> sizes(m_, 0);
    for (auto c : cluster_of_) {
      if (c >= m_) throw std::invalid_argument("AggregationPartition: cluster id out of range");
      ++sizes[c];
    }
    for (std::size_t c = 0; c < m_; ++c)
      if (sizes[c] == 0) throw std::invalid_argument("AggregationPartition: cluster " + std::to_string(c) + " is empty");
  }

  static AggregationPartition singletons(std::size_t n) {
    std::vector<std::size_t> c(n);
    std::iota(c.begin(), c.end(), std::size_t{0});
    return AggregationPartition(std::move(c), n);
  }

  std::size_t n_clusters() const { return m_; }
  std::size_t n_states() const { return cluster_of_.size(); }
  std::size_t cluster_of(std::size_t s) const { return cluster_of_[s]; }

  /// Indicator matrix: Phi(s, c) = 1 iff s is in cluster c.
  Matrix indicator_matrix() const {
    Matrix phi = Matrix::Zero(static_cast<Eigen::Index>(n_states()), static_cast<Eigen::Index>(m_));
    for (std::size_t s = 0; s < n_states(); ++s)
      phi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(cluster_of_[s])) = 1.0;
    return phi;
  }

 private:
  std::vector<std::size_t> cluster_of_;
  std::size_t m_;
};

/// k contiguous buckets of states sorted by score (ties by state index).
inline AggregationPartition partition_by_score(const Vector& score, std::size_t k) {
  const auto n = static_cast<std::size_t>(score.size());
  if (k < 1 || k > n) throw std::invalid_argument("partition_by_score: need 1 <= k <= |S|");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score[static_cast<Eigen::Index>(a)] < score[static_cast<Eigen::Index>(b)];
  });
  std::vector<std::size_t> cluster(n);
  for (std::size_t i = 0; i < n; ++i) cluster[order[i]] = i * k / n;
  return AggregationPartition(std::move(cluster), k);
}

enum class AggregationMode { PolicyEvaluation, Optimal };

/**
 * One aggregation correction V + Phi w with
 *   w = (I - gamma P^Phi)^{-1} R^Phi,
 *   P^Phi = (Phi' D Phi)^{-1} Phi' D P Phi,
 *   R^Phi = (Phi' D Phi)^{-1} Phi' D (T V - V).
 * Phi is the partition's indicator basis. In PolicyEvaluation mode T = T_pi and
 * P = P_pi; in Optimal mode T is the max-backup and P follows the greedy policy of V.
 */
inline ValueFunction aggregation_correct(const ValueFunction& vk, const AggregationPartition& partition,
                                         const TabularMDP& mdp, const Policy& pi,
                                         AggregationMode mode = AggregationMode::PolicyEvaluation,
                                         std::optional<StateWeights> rho = std::nullopt) {
  detail::check_value_dim(vk, mdp);
  if (partition.n_states() != mdp.n_states()) throw std::invalid_argument("aggregation_correct: partition size mismatch");
  const Policy acting = mode == AggregationMode::PolicyEvaluation ? pi : greedy_policy(vk, mdp);
  const auto model = policy_model(mdp, acting);
  const Vector backed = mode == AggregationMode::PolicyEvaluation ? policy_backup(vk, mdp, pi) : bellman_backup(vk, mdp);
  const FeatureBasis basis(partition.indicator_matrix(), rho.value_or(StateWeights::ones(mdp.n_states())));
  const InducedMDP compact{basis.weighted_least_squares(backed - vk),
                           basis.weighted_least_squares(model.transition * basis.phi())};
  const Vector w = solve_induced(compact, mdp.discount());
  return vk + basis.phi() * w;
}

enum class BasisBuilderKind { Krylov, BEBF, Aggregation };

inline const char* to_string(BasisBuilderKind k) {
  switch (k) {
    case BasisBuilderKind::Krylov: return "krylov";
    case BasisBuilderKind::BEBF: return "bebf";
    case BasisBuilderKind::Aggregation: return "aggregation";
  }
  return "?";
}

struct BasisBuilder {
  BasisBuilderKind kind = BasisBuilderKind::BEBF;
  std::size_t k = 10;

  static BasisBuilder with_default_size(BasisBuilderKind kind, std::size_t n_states) {
    return BasisBuilder{kind, std::min<std::size_t>(n_states, 10)};
  }
};

/// Builds the basis used by one RPI round. prev is the previous lifted value (0 in round one).
inline FeatureBasis build_basis(const BasisBuilder& builder, const TabularMDP& mdp, const Policy& pi,
                                const ValueFunction& prev) {
  if (builder.k < 1 || builder.k > mdp.n_states()) throw std::invalid_argument("basis builder: need 1 <= k <= |S|");
  const auto rho = StateWeights::uniform(mdp.n_states());
  switch (builder.kind) {
    case BasisBuilderKind::Krylov: {
      auto built = krylov_basis(mdp, pi, builder.k, rho);
      if (built.basis.rank() == 0) return FeatureBasis(Matrix::Ones(static_cast<Eigen::Index>(mdp.n_states()), 1), rho);
      return built.basis;
    }
    case BasisBuilderKind::BEBF: {
      auto built = bebf_basis(mdp, pi, builder.k, rho);
      if (built.basis.rank() == 0) return FeatureBasis(Matrix::Ones(static_cast<Eigen::Index>(mdp.n_states()), 1), rho);
      return built.basis;
    }
    case BasisBuilderKind::Aggregation: {
      const Vector residual = policy_backup(prev, mdp, pi) - prev;
      return FeatureBasis(partition_by_score(residual, builder.k).indicator_matrix(), rho);
    }
  }
  throw std::invalid_argument("unknown basis builder");
}

struct RpiReport {
  SolveReport report;
  std::vector<Policy> visited;
};

/**
 * Model-based representation policy iteration: per round build Phi for the
 * current policy, solve the induced compact evaluation problem, lift V = Phi w
 * and improve greedily. Stops when the policy repeats.
 */
inline RpiReport representation_policy_iteration(const TabularMDP& mdp, const BasisBuilder& builder,
                                                 const Policy& pi0, std::size_t max_rounds) {
  pi0.check(mdp);
  if (mdp.problem_class() != ProblemClass::Discounted)
    throw std::invalid_argument("representation_policy_iteration: discounted MDP required");
  detail::Stopwatch clock;
  RpiReport out;
  out.report.method = SolveMethod::RPI;
  Policy pi = pi0;
  ValueFunction v = ValueFunction::Zero(static_cast<Eigen::Index>(mdp.n_states()));
  auto as_lists = [&out] {
    std::vector<std::vector<std::size_t>> lists;
    for (const auto& p : out.visited) lists.push_back(p.actions());
    return lists;
  };
  for (std::size_t round = 1; round <= max_rounds; ++round) {
    out.visited.push_back(pi);
    const FeatureBasis basis = build_basis(builder, mdp, pi, v);
    const Vector w = solve_induced(induced_mdp(mdp, pi, basis), mdp.discount());
    v = basis.phi() * w;
    const double residual = max_norm(bellman_backup(v, mdp) - policy_backup(v, mdp, pi));
    out.report.residual_history.push_back(residual);
    Policy next = greedy_policy(v, mdp);
    if (next == pi) {
      out.report.value = v;
      out.report.policy = std::move(pi);
      out.report.iterations = round;
      out.report.final_residual = residual;
      out.report.wall_seconds = clock.seconds();
      return out;
    }
    if (std::find(out.visited.begin(), out.visited.end(), next) != out.visited.end()) {
      out.visited.push_back(next);
      throw PolicyCycleError("representation_policy_iteration: policy cycle detected", as_lists());
    }
    pi = std::move(next);
  }
  throw PolicyCycleError("representation_policy_iteration: round limit reached", as_lists());
}

}  // namespace mdptk
