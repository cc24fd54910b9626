#pragma once

// Tabular TD(lambda) policy evaluation and Q-learning.

#include <cstdint>
#include <functional>

#include "mdptk/simulation.hpp"

namespace mdptk {

/// One row of a learning curve.
struct EpisodeRecord {
  std::size_t episode = 0;
  std::size_t steps = 0;
  double episode_return = 0.0;
  /// ||estimate - reference||_inf when a reference value is supplied, NaN otherwise.
  double value_error = std::numeric_limits<double>::quiet_NaN();
};

using EpisodeObserver = std::function<void(const EpisodeRecord&)>;

struct TdConfig {
  double lambda = 0.0;
  std::size_t episodes = 1;
  std::size_t horizon = 1000;
  std::uint64_t seed = 0;
};

/// Accumulating eligibility trace over states.
class EligibilityTrace {
 public:
  explicit EligibilityTrace(std::size_t n_states) : e_(Vector::Zero(static_cast<Eigen::Index>(n_states))) {}

  /// e <- gamma*lambda*e, then e(s) += 1.
  void visit(std::size_t s, double decay) {
    e_ *= decay;
    e_[static_cast<Eigen::Index>(s)] += 1.0;
  }
  void reset() { e_.setZero(); }
  const Vector& values() const { return e_; }

 private:
  Vector e_;
};

/// d = r + gamma V(s') - V(s), with V(s') = 0 on terminal transitions.
inline double temporal_difference(const Transition& tr, const ValueFunction& v, double gamma) {
  const double next = tr.terminal ? 0.0 : v[static_cast<Eigen::Index>(tr.next_state)];
  return tr.reward + gamma * next - v[static_cast<Eigen::Index>(tr.state)];
}

/**
 * Total backward-view increment of one episode with V held fixed and a constant
 * step size (offline TD(lambda)): sum_t alpha d_t e_t.
 */
inline Vector td_lambda_offline_increment(const Trajectory& episode, const ValueFunction& v, double gamma,
                                          double lambda, double alpha) {
  EligibilityTrace trace(static_cast<std::size_t>(v.size()));
  Vector delta = Vector::Zero(v.size());
  for (const auto& tr : episode.transitions) {
    trace.visit(tr.state, gamma * lambda);
    delta += alpha * temporal_difference(tr, v, gamma) * trace.values();
  }
  return delta;
}

/**
 * Online TD(lambda) evaluation of pi with accumulating traces:
 * e <- gamma lambda e; e(s_t) += 1; V <- V + alpha_t d_t e.
 * alpha_t comes from schedule.next_rate(s_t). Traces reset at episode starts.
 */
inline ValueFunction td_lambda_evaluate(const TabularMDP& mdp, const Policy& pi, LearningSchedule schedule,
                                        const TdConfig& cfg, const EpisodeObserver& observer = {},
                                        const ValueFunction* reference = nullptr) {
  pi.check(mdp);
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) throw std::invalid_argument("td_lambda: lambda must be in [0,1]");
  const double gamma = mdp.discount();
  RandomStream rng(cfg.seed);
  ValueFunction v = ValueFunction::Zero(static_cast<Eigen::Index>(mdp.n_states()));
  EligibilityTrace trace(mdp.n_states());
  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    trace.reset();
    std::size_t s = random_start_state(mdp, rng);
    EpisodeRecord rec{ep, 0, 0.0};
    double discount_acc = 1.0;
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
      const Transition tr = step(mdp, s, pi[s], rng);
      const double d = temporal_difference(tr, v, gamma);
      trace.visit(tr.state, gamma * cfg.lambda);
      v += schedule.next_rate(tr.state) * d * trace.values();
      rec.episode_return += discount_acc * tr.reward;
      discount_acc *= gamma;
      ++rec.steps;
      if (tr.terminal) break;
      s = tr.next_state;
    }
    if (observer) {
      if (reference) rec.value_error = max_norm(v - *reference);
      observer(rec);
    }
  }
  return v;
}

/// Q(s,a) <- (1-alpha) Q(s,a) + alpha (r + gamma max_a' Q(s',a')), max term 0 on terminal transitions.
inline void q_update(QFunction& q, const Transition& tr, double gamma, double alpha) {
  const auto s = static_cast<Eigen::Index>(tr.state);
  const auto a = static_cast<Eigen::Index>(tr.action);
  const double next = tr.terminal ? 0.0 : q.row(static_cast<Eigen::Index>(tr.next_state)).maxCoeff();
  q(s, a) = (1.0 - alpha) * q(s, a) + alpha * (tr.reward + gamma * next);
}

struct QLearningConfig {
  double epsilon = 0.1;
  std::size_t episodes = 1;
  std::size_t horizon = 1000;
  std::uint64_t seed = 0;
};

/// Off-policy Q-learning with an epsilon-greedy behaviour policy on the current Q.
/// Step sizes are counted per (state, action).
inline QFunction q_learning(const TabularMDP& mdp, LearningSchedule schedule, const QLearningConfig& cfg,
                            const EpisodeObserver& observer = {}, const ValueFunction* reference = nullptr) {
  const double gamma = mdp.discount();
  RandomStream rng(cfg.seed);
  QFunction q = QFunction::Zero(static_cast<Eigen::Index>(mdp.n_states()), static_cast<Eigen::Index>(mdp.n_actions()));
  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    std::size_t s = random_start_state(mdp, rng);
    EpisodeRecord rec{ep, 0, 0.0};
    double discount_acc = 1.0;
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
      const std::size_t a = epsilon_greedy(q, s, cfg.epsilon, rng);
      const Transition tr = step(mdp, s, a, rng);
      q_update(q, tr, gamma, schedule.next_rate(s, a));
      rec.episode_return += discount_acc * tr.reward;
      discount_acc *= gamma;
      ++rec.steps;
      if (tr.terminal) break;
      s = tr.next_state;
    }
    if (observer) {
      if (reference) rec.value_error = max_norm(q.rowwise().maxCoeff() - *reference);
      observer(rec);
    }
  }
  return q;
}

}  // namespace mdptk
