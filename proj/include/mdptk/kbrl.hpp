#pragma once

// Kernel-based RL: normalized Gaussian kernel backups over sampled transitions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mdptk/mdp.hpp"
#include "mdptk/simulation.hpp"

namespace mdptk {

struct KernelSample {
  std::size_t state = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  bool terminal = false;
};

/**
 * Sampled transitions grouped by action, plus the coordinates (one row per
 * state) that define the Euclidean distance, and the kernel bandwidth.
 */
class KernelSampleSet {
 public:
  KernelSampleSet(std::vector<std::vector<KernelSample>> by_action, Matrix coordinates, double bandwidth)
      : by_action_(std::move(by_action)), coords_(std::move(coordinates)), sigma_(bandwidth) {
    if (!(sigma_ > 0.0)) throw std::invalid_argument("KernelSampleSet: bandwidth must be positive");
    if (by_action_.empty()) throw std::invalid_argument("KernelSampleSet: no actions");
    std::size_t total = 0;
    const auto n = static_cast<std::size_t>(coords_.rows());
    for (const auto& list : by_action_) {
      total += list.size();
      for (const auto& smp : list) {
        if (smp.state >= n || smp.next_state >= n)
          throw std::invalid_argument("KernelSampleSet: sample state has no coordinates");
        if (!std::isfinite(smp.reward)) throw std::invalid_argument("KernelSampleSet: non-finite reward");
        support_.push_back(smp.state);
        if (!smp.terminal) support_.push_back(smp.next_state);
      }
    }
    if (total == 0) throw std::invalid_argument("KernelSampleSet: no samples");
    std::sort(support_.begin(), support_.end());
    support_.erase(std::unique(support_.begin(), support_.end()), support_.end());
    index_.assign(n, npos);
    for (std::size_t i = 0; i < support_.size(); ++i) index_[support_[i]] = i;
  }

  /// One sample per observed transition, grouped by its action.
  static KernelSampleSet from_transitions(const std::vector<Transition>& transitions, std::size_t n_actions,
                                          Matrix coordinates, double bandwidth) {
    std::vector<std::vector<KernelSample>> by(n_actions);
    for (const auto& t : transitions) {
      if (t.action >= n_actions) throw std::invalid_argument("KernelSampleSet: action out of range");
      by[t.action].push_back(KernelSample{t.state, t.reward, t.next_state, t.terminal});
    }
    return KernelSampleSet(std::move(by), std::move(coordinates), bandwidth);
  }

  std::size_t n_actions() const { return by_action_.size(); }
  const std::vector<KernelSample>& samples(std::size_t a) const { return by_action_.at(a); }
  const Matrix& coordinates() const { return coords_; }
  double bandwidth() const { return sigma_; }

  /// Sorted states carrying a value: sampled states and non-terminal next states.
  const std::vector<std::size_t>& support() const { return support_; }
  std::size_t support_index(std::size_t state) const { return index_.at(state); }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  std::vector<std::vector<KernelSample>> by_action_;
  Matrix coords_;
  double sigma_;
  std::vector<std::size_t> support_;
  std::vector<std::size_t> index_;
};

/**
 * w_t = exp(-d^2(s_t, x)/(2 sigma^2)) / sum_u exp(-d^2(s_u, x)/(2 sigma^2)) over the
 * samples of action a, computed in log space so tiny bandwidths never underflow.
 * Returns an empty vector when a has no samples.
 */
inline Vector kernel_weights(const KernelSampleSet& set, std::size_t a, const Vector& query) {
  const auto& list = set.samples(a);
  if (query.size() != set.coordinates().cols()) throw std::invalid_argument("kernel_weights: query dimension mismatch");
  Vector logits(static_cast<Eigen::Index>(list.size()));
  const double inv = 1.0 / (2.0 * set.bandwidth() * set.bandwidth());
  for (std::size_t t = 0; t < list.size(); ++t) {
    const double d2 = (set.coordinates().row(static_cast<Eigen::Index>(list[t].state)).transpose() - query).squaredNorm();
    logits[static_cast<Eigen::Index>(t)] = -d2 * inv;
  }
  if (logits.size() == 0) return logits;
  const double top = logits.maxCoeff();
  Vector w = (logits.array() - top).exp().matrix();
  return w / w.sum();
}

inline Vector kernel_weights(const KernelSampleSet& set, std::size_t a, std::size_t state) {
  return kernel_weights(set, a, Vector(set.coordinates().row(static_cast<Eigen::Index>(state)).transpose()));
}

struct KbrlBackup {
  Vector value;  ///< max_a Q on the support
  Matrix q;      ///< (support index, action); -inf for actions without samples
  std::vector<std::size_t> empty_actions;
};

/**
 * Precomputed kernel weights on the sample support, so one T_K application is
 * a handful of small matrix-vector products.
 */
class KbrlOperator {
 public:
  explicit KbrlOperator(const KernelSampleSet& set) : set_(set) {
    const auto m = static_cast<Eigen::Index>(set.support().size());
    for (std::size_t a = 0; a < set.n_actions(); ++a) {
      const auto& list = set.samples(a);
      const auto na = static_cast<Eigen::Index>(list.size());
      Matrix w(m, na);
      Vector r(na);
      Matrix next = Matrix::Zero(na, m);  // selects V(s_{t+1}); zero rows for terminal samples
      for (Eigen::Index i = 0; i < m && na > 0; ++i)
        w.row(i) = kernel_weights(set, a, set.support()[static_cast<std::size_t>(i)]).transpose();
      for (Eigen::Index t = 0; t < na; ++t) {
        const auto& smp = list[static_cast<std::size_t>(t)];
        r[t] = smp.reward;
        if (!smp.terminal) next(t, static_cast<Eigen::Index>(set.support_index(smp.next_state))) = 1.0;
      }
      weights_.push_back(std::move(w));
      rewards_.push_back(std::move(r));
      successor_.push_back(std::move(next));
      if (na == 0) empty_.push_back(a);
    }
  }

  const KernelSampleSet& samples() const { return set_; }
  std::size_t support_size() const { return set_.support().size(); }

  /// Q(x,a) = sum_t K_a(s_t,x) [r_t + gamma V(s_{t+1})], V(x) = max_a Q(x,a).
  KbrlBackup apply(const Vector& v, double gamma) const {
    const auto m = static_cast<Eigen::Index>(support_size());
    if (v.size() != m) throw std::invalid_argument("kbrl_backup: value must be defined on the sample support");
    KbrlBackup out;
    out.q = Matrix::Constant(m, static_cast<Eigen::Index>(set_.n_actions()), -std::numeric_limits<double>::infinity());
    for (std::size_t a = 0; a < set_.n_actions(); ++a) {
      if (rewards_[a].size() == 0) continue;
      out.q.col(static_cast<Eigen::Index>(a)) = weights_[a] * (rewards_[a] + gamma * (successor_[a] * v));
    }
    out.value = out.q.rowwise().maxCoeff();
    out.empty_actions = empty_;
    return out;
  }

  /// Q at an arbitrary query point given values on the support.
  Vector q_at(const Vector& query, const Vector& v, double gamma) const {
    Vector q = Vector::Constant(static_cast<Eigen::Index>(set_.n_actions()), -std::numeric_limits<double>::infinity());
    for (std::size_t a = 0; a < set_.n_actions(); ++a) {
      if (rewards_[a].size() == 0) continue;
      q[static_cast<Eigen::Index>(a)] = kernel_weights(set_, a, query).dot(rewards_[a] + gamma * (successor_[a] * v));
    }
    return q;
  }

 private:
  const KernelSampleSet& set_;
  std::vector<Matrix> weights_;
  std::vector<Vector> rewards_;
  std::vector<Matrix> successor_;
  std::vector<std::size_t> empty_;
};

inline KbrlBackup kbrl_backup(const KernelSampleSet& set, const Vector& v, double gamma) {
  return KbrlOperator(set).apply(v, gamma);
}

struct KbrlSolution {
  std::vector<std::size_t> support;
  Vector value;
  std::vector<std::size_t> policy;  ///< greedy action per support state
  std::size_t iterations = 0;
  double final_residual = 0.0;
  /// sup-distance between the fixed points reached from 0 and from a random start.
  double uniqueness_gap = 0.0;
  std::vector<std::size_t> empty_actions;
};

namespace detail {
inline std::pair<Vector, std::size_t> kbrl_iterate(const KbrlOperator& op, Vector v, double gamma, double tol,
                                                   std::size_t max_iters, double& residual) {
  residual = std::numeric_limits<double>::infinity();
  std::size_t t = 0;
  while (!(residual < tol)) {
    if (t >= max_iters) throw NonConvergenceError("kbrl_solve: no convergence", residual, t);
    Vector next = op.apply(v, gamma).value;
    residual = max_norm(next - v);
    v = std::move(next);
    ++t;
  }
  return {v, t};
}
}  // namespace detail

/**
 * Iterates T_K from zero until successive values differ by less than tol, then
 * repeats from a seeded random start in [-M/(1-gamma), M/(1-gamma)] and records
 * the distance between the two fixed points.
 */
inline KbrlSolution kbrl_solve(const KernelSampleSet& set, double gamma, double tol, std::size_t max_iters,
                               std::uint64_t seed = 0) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("kbrl_solve: discount must be in [0,1)");
  const KbrlOperator op(set);
  const auto m = static_cast<Eigen::Index>(op.support_size());
  KbrlSolution out;
  out.support = set.support();
  double residual = 0.0;
  auto [v, iters] = detail::kbrl_iterate(op, Vector::Zero(m), gamma, tol, max_iters, residual);
  out.iterations = iters;
  out.final_residual = residual;

  double max_r = 0.0;
  for (std::size_t a = 0; a < set.n_actions(); ++a)
    for (const auto& smp : set.samples(a)) max_r = std::max(max_r, std::abs(smp.reward));
  RandomStream rng(seed);
  Vector start(m);
  const double radius = max_r / (1.0 - gamma) + 1.0;
  for (Eigen::Index i = 0; i < m; ++i) start[i] = radius * (2.0 * rng.uniform01() - 1.0);
  double other_residual = 0.0;
  const auto other = detail::kbrl_iterate(op, start, gamma, tol, max_iters, other_residual).first;
  out.uniqueness_gap = max_norm(other - v);

  const KbrlBackup final_backup = op.apply(v, gamma);
  out.policy.resize(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < out.policy.size(); ++i) out.policy[i] = argmax_row(final_backup.q, i);
  out.empty_actions = final_backup.empty_actions;
  out.value = std::move(v);
  return out;
}

}  // namespace mdptk
