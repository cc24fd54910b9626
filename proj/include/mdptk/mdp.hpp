#pragma once

// Finite MDP model, Bellman operators, norms and greedy policy extraction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mdptk/errors.hpp"

namespace mdptk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Value of each state.
using ValueFunction = Vector;
/// Action values, indexed (state, action).
using QFunction = Matrix;

enum class ProblemClass { Discounted, StochasticShortestPath };

inline const char* to_string(ProblemClass c) {
  return c == ProblemClass::Discounted ? "discounted" : "ssp";
}

namespace detail {
inline constexpr double kRowSumTolerance = 1e-12;

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace detail

/**
 * Dense tabular MDP. Transition and reward tensors are indexed
 * (action, state, next_state) and stored as one |S|x|S| matrix per action.
 *
 * All invariants are checked on construction; the object is immutable
 * afterwards, so operators assume a valid model.
 */
class TabularMDP {
 public:
  TabularMDP(std::vector<Matrix> transition, std::vector<Matrix> reward, double discount,
             ProblemClass problem_class = ProblemClass::Discounted,
             std::vector<std::size_t> terminal_states = {})
      : transition_(std::move(transition)),
        reward_(std::move(reward)),
        discount_(discount),
        class_(problem_class),
        terminals_(std::move(terminal_states)) {
    validate();
    std::sort(terminals_.begin(), terminals_.end());
    is_terminal_.assign(n_states(), false);
    for (auto t : terminals_) is_terminal_[t] = true;
    expected_reward_ = Matrix(n_states(), n_actions());
    for (std::size_t a = 0; a < n_actions(); ++a)
      expected_reward_.col(a) = transition_[a].cwiseProduct(reward_[a]).rowwise().sum();
    max_abs_reward_ = 0.0;
    for (const auto& r : reward_) max_abs_reward_ = std::max(max_abs_reward_, r.cwiseAbs().maxCoeff());
  }

  std::size_t n_states() const { return static_cast<std::size_t>(transition_.front().rows()); }
  std::size_t n_actions() const { return transition_.size(); }
  double discount() const { return discount_; }
  ProblemClass problem_class() const { return class_; }
  const std::vector<std::size_t>& terminal_states() const { return terminals_; }
  bool is_terminal(std::size_t s) const { return is_terminal_[s]; }

  const Matrix& transition(std::size_t a) const { return transition_[a]; }
  const Matrix& reward(std::size_t a) const { return reward_[a]; }
  double p(std::size_t a, std::size_t s, std::size_t next) const { return transition_[a](s, next); }
  double r(std::size_t a, std::size_t s, std::size_t next) const { return reward_[a](s, next); }

  /// sum_{s'} p(s'|s,a) R(s,a,s'), indexed (state, action).
  const Matrix& expected_reward() const { return expected_reward_; }
  double max_abs_reward() const { return max_abs_reward_; }

  friend bool operator==(const TabularMDP& a, const TabularMDP& b) {
    if (a.n_actions() != b.n_actions() || a.n_states() != b.n_states()) return false;
    if (a.discount_ != b.discount_ || a.class_ != b.class_ || a.terminals_ != b.terminals_) return false;
    for (std::size_t k = 0; k < a.n_actions(); ++k)
      if (a.transition_[k] != b.transition_[k] || a.reward_[k] != b.reward_[k]) return false;
    return true;
  }

 private:
  void validate() const {
    if (transition_.empty()) throw ValidationError("MDP needs at least one action");
    if (transition_.size() != reward_.size())
      throw ValidationError("transition and reward tensors disagree on the number of actions");
    const auto n = transition_.front().rows();
    if (n == 0) throw ValidationError("MDP needs at least one state");
    for (std::size_t a = 0; a < transition_.size(); ++a) {
      const auto& P = transition_[a];
      const auto& R = reward_[a];
      if (P.rows() != n || P.cols() != n || R.rows() != n || R.cols() != n)
        throw ValidationError("action " + std::to_string(a) + ": tensors must be |S|x|S|");
      for (Eigen::Index s = 0; s < n; ++s) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          const double p = P(s, j);
          if (!std::isfinite(p) || p < 0.0) {
            std::ostringstream os;
            os << "transition (action " << a << ", state " << s << ", next " << j
               << ") is negative or not finite: " << p;
            throw ValidationError(os.str());
          }
          if (!std::isfinite(R(s, j))) {
            std::ostringstream os;
            os << "reward (action " << a << ", state " << s << ", next " << j << ") is not finite";
            throw ValidationError(os.str());
          }
          sum += p;
        }
        if (std::abs(sum - 1.0) > detail::kRowSumTolerance) {
          std::ostringstream os;
          os.precision(17);
          os << "transition row (action " << a << ", state " << s << ") sums to " << sum;
          throw ValidationError(os.str());
        }
      }
    }
    if (class_ == ProblemClass::Discounted) {
      if (!(discount_ >= 0.0 && discount_ < 1.0))
        throw ValidationError("discounted MDP requires discount in [0,1)");
    } else {
      if (discount_ != 1.0) throw ValidationError("stochastic shortest path MDP requires discount 1");
      if (terminals_.empty()) throw ValidationError("stochastic shortest path MDP needs a terminal state");
    }
    for (auto t : terminals_) {
      if (t >= static_cast<std::size_t>(n))
        throw ValidationError("terminal state " + std::to_string(t) + " out of range");
      if (class_ == ProblemClass::Discounted)
        throw ValidationError("terminal states are only meaningful for stochastic shortest path MDPs");
      for (std::size_t a = 0; a < transition_.size(); ++a) {
        const auto ti = static_cast<Eigen::Index>(t);
        if (transition_[a](ti, ti) != 1.0 || reward_[a](ti, ti) != 0.0)
          throw ValidationError("terminal state " + std::to_string(t) + " must self-loop with reward 0 (action " +
                                std::to_string(a) + ")");
      }
    }
  }

  std::vector<Matrix> transition_;
  std::vector<Matrix> reward_;
  double discount_;
  ProblemClass class_;
  std::vector<std::size_t> terminals_;
  std::vector<bool> is_terminal_;
  Matrix expected_reward_;
  double max_abs_reward_ = 0.0;
};

/// Deterministic stationary policy: one action per state.
class Policy {
 public:
  Policy() = default;
  explicit Policy(std::vector<std::size_t> actions) : actions_(std::move(actions)) {}
  static Policy constant(std::size_t n_states, std::size_t action) {
    return Policy(std::vector<std::size_t>(n_states, action));
  }

  std::size_t operator[](std::size_t s) const { return actions_[s]; }
  std::size_t& operator[](std::size_t s) { return actions_[s]; }
  std::size_t size() const { return actions_.size(); }
  const std::vector<std::size_t>& actions() const { return actions_; }

  /// Throws std::invalid_argument unless the policy is total over mdp's states with valid actions.
  void check(const TabularMDP& mdp) const {
    detail::require(actions_.size() == mdp.n_states(), "policy size does not match number of states");
    for (std::size_t s = 0; s < actions_.size(); ++s)
      if (actions_[s] >= mdp.n_actions())
        throw std::invalid_argument("policy action " + std::to_string(actions_[s]) + " at state " +
                                    std::to_string(s) + " out of range");
  }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  std::vector<std::size_t> actions_;
};

/// Strictly positive state weights (projection norm, LP relevance weights).
class StateWeights {
 public:
  explicit StateWeights(Vector rho) : rho_(std::move(rho)) {
    detail::require(rho_.size() > 0, "state weights must be nonempty");
    for (Eigen::Index i = 0; i < rho_.size(); ++i)
      if (!(rho_[i] > 0.0) || !std::isfinite(rho_[i]))
        throw std::invalid_argument("state weight " + std::to_string(i) + " must be positive and finite");
  }
  static StateWeights uniform(std::size_t n) {
    return StateWeights(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
  }
  static StateWeights ones(std::size_t n) { return StateWeights(Vector::Ones(static_cast<Eigen::Index>(n))); }

  const Vector& values() const { return rho_; }
  std::size_t size() const { return static_cast<std::size_t>(rho_.size()); }
  double operator[](std::size_t s) const { return rho_[static_cast<Eigen::Index>(s)]; }
  StateWeights normalized() const { return StateWeights(rho_ / rho_.sum()); }

 private:
  Vector rho_;
};

enum class NormKind { MaxNorm, EuclideanNorm };

/// MaxNorm: max |V(s)|/rho(s).  EuclideanNorm: sqrt(sum rho(s) V(s)^2).
inline double weighted_norm(const Vector& v, const StateWeights& rho, NormKind kind) {
  detail::require(static_cast<std::size_t>(v.size()) == rho.size(), "weighted_norm: dimension mismatch");
  if (kind == NormKind::MaxNorm) return (v.cwiseAbs().array() / rho.values().array()).maxCoeff();
  return std::sqrt((rho.values().array() * v.array().square()).sum());
}

inline double max_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

namespace detail {
inline void check_value_dim(const Vector& v, const TabularMDP& mdp) {
  if (static_cast<std::size_t>(v.size()) != mdp.n_states())
    throw std::invalid_argument("value vector has " + std::to_string(v.size()) + " entries, MDP has " +
                                std::to_string(mdp.n_states()) + " states");
}
}  // namespace detail

/// Q(s,a) = sum_{s'} p(s'|s,a) [R(s,a,s') + gamma V(s')].
inline QFunction q_backup(const ValueFunction& v, const TabularMDP& mdp) {
  detail::check_value_dim(v, mdp);
  QFunction q(mdp.n_states(), mdp.n_actions());
  for (std::size_t a = 0; a < mdp.n_actions(); ++a)
    q.col(a) = mdp.expected_reward().col(a) + mdp.discount() * (mdp.transition(a) * v);
  return q;
}

/// Lowest action index attaining the row maximum.
inline std::size_t argmax_row(const QFunction& q, std::size_t s) {
  std::size_t best = 0;
  const auto row = static_cast<Eigen::Index>(s);
  for (Eigen::Index a = 1; a < q.cols(); ++a)
    if (q(row, a) > q(row, static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(a);
  return best;
}

/// Optimal Bellman operator T.
inline ValueFunction bellman_backup(const ValueFunction& v, const TabularMDP& mdp) {
  return q_backup(v, mdp).rowwise().maxCoeff();
}

inline Policy greedy_policy_from_q(const QFunction& q) {
  std::vector<std::size_t> actions(static_cast<std::size_t>(q.rows()));
  for (std::size_t s = 0; s < actions.size(); ++s) actions[s] = argmax_row(q, s);
  return Policy(std::move(actions));
}

/// Greedy policy w.r.t. one-step lookahead on V; ties go to the lowest action index.
inline Policy greedy_policy(const ValueFunction& v, const TabularMDP& mdp) {
  return greedy_policy_from_q(q_backup(v, mdp));
}

/// Transition matrix P_pi and expected reward vector R_pi of a fixed policy.
struct PolicyModel {
  Matrix transition;
  Vector reward;
};

inline PolicyModel policy_model(const TabularMDP& mdp, const Policy& pi) {
  pi.check(mdp);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  PolicyModel m{Matrix(n, n), Vector(n)};
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto a = pi[static_cast<std::size_t>(s)];
    m.transition.row(s) = mdp.transition(a).row(s);
    m.reward[s] = mdp.expected_reward()(s, static_cast<Eigen::Index>(a));
  }
  return m;
}

/// T_pi V = R_pi + gamma P_pi V.
inline ValueFunction policy_backup(const ValueFunction& v, const TabularMDP& mdp, const Policy& pi) {
  detail::check_value_dim(v, mdp);
  const auto m = policy_model(mdp, pi);
  return m.reward + mdp.discount() * (m.transition * v);
}

}  // namespace mdptk
