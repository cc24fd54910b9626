#pragma once

// Seeded Monte Carlo simulation: transitions, rollouts, exploration and step sizes.

#include <concepts>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "mdptk/mdp.hpp"

namespace mdptk {

/**
 * Explicitly seeded 64-bit stream. The engine is std::mt19937_64, whose output
 * sequence is fixed by the standard; the conversions to doubles and indices are
 * done here because std distributions are implementation-defined.
 */
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n), unbiased (rejection on the top of the range).
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

 private:
  std::mt19937_64 engine_;
};

struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  bool terminal = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct Trajectory {
  std::size_t start_state = 0;
  std::vector<Transition> transitions;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// True iff consecutive transitions chain and only the last one may be terminal.
inline bool is_chained(const Trajectory& traj) {
  if (traj.empty()) return true;
  if (traj.transitions.front().state != traj.start_state) return false;
  for (std::size_t t = 0; t + 1 < traj.size(); ++t) {
    if (traj.transitions[t].terminal) return false;
    if (traj.transitions[t].next_state != traj.transitions[t + 1].state) return false;
  }
  return true;
}

/// Samples s' ~ p(.|s,a) by inverse CDF over the dense row.
inline Transition step(const TabularMDP& mdp, std::size_t s, std::size_t a, RandomStream& rng) {
  if (s >= mdp.n_states() || a >= mdp.n_actions()) throw std::invalid_argument("step: index out of range");
  const auto& row = mdp.transition(a);
  const auto rs = static_cast<Eigen::Index>(s);
  const double u = rng.uniform01();
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  Eigen::Index next = -1;
  double cdf = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double p = row(rs, j);
    if (p <= 0.0) continue;
    cdf += p;
    next = j;
    if (u < cdf) break;
  }
  const auto sn = static_cast<std::size_t>(next);
  return Transition{s, a, mdp.r(a, s, sn), sn, mdp.is_terminal(sn)};
}

/**
 * Follows choose(state, rng) -> action from s0 for at most horizon steps,
 * stopping early on a terminal state. Starting in a terminal state yields an
 * empty trajectory.
 */
template <class ActionChooser>
  requires std::invocable<ActionChooser&, std::size_t, RandomStream&>
Trajectory rollout(const TabularMDP& mdp, ActionChooser&& choose, std::size_t s0, std::size_t horizon,
                   RandomStream& rng) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  if (s0 >= mdp.n_states()) throw std::invalid_argument("rollout: start state out of range");
  Trajectory traj;
  traj.start_state = s0;
  if (mdp.is_terminal(s0)) return traj;
  traj.transitions.reserve(horizon);
  std::size_t s = s0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = choose(s, rng);
    traj.transitions.push_back(step(mdp, s, a, rng));
    if (traj.transitions.back().terminal) break;
    s = traj.transitions.back().next_state;
  }
  return traj;
}

inline Trajectory rollout(const TabularMDP& mdp, const Policy& pi, std::size_t s0, std::size_t horizon,
                          RandomStream& rng) {
  pi.check(mdp);
  return rollout(mdp, [&pi](std::size_t s, RandomStream&) { return pi[s]; }, s0, horizon, rng);
}

/// With probability 1-epsilon the greedy action (lowest index on ties), else a uniform action.
inline std::size_t epsilon_greedy(const QFunction& q, std::size_t s, double epsilon, RandomStream& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon_greedy: epsilon must be in [0,1]");
  if (s >= static_cast<std::size_t>(q.rows())) throw std::invalid_argument("epsilon_greedy: state out of range");
  if (rng.uniform01() < epsilon) return rng.uniform_index(static_cast<std::size_t>(q.cols()));
  return argmax_row(q, s);
}

enum class ScheduleKind { Constant, HarmonicPerVisit };

/// Step-size schedule. Harmonic rates are alpha0 / (visits so far, including this one).
class LearningSchedule {
 public:
  static LearningSchedule constant(double alpha0) { return LearningSchedule(ScheduleKind::Constant, alpha0); }
  static LearningSchedule harmonic(double alpha0 = 1.0) {
    return LearningSchedule(ScheduleKind::HarmonicPerVisit, alpha0);
  }

  LearningSchedule(ScheduleKind kind, double alpha0) : kind_(kind), alpha0_(alpha0) {
    if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("learning rate alpha0 must be in (0,1]");
  }

  ScheduleKind kind() const { return kind_; }
  double alpha0() const { return alpha0_; }

  /// Rate for the next update of state s (or the pair (s, a)); counts the visit.
  double next_rate(std::size_t s) { return next(key(s, 0)); }
  double next_rate(std::size_t s, std::size_t a) { return next(key(s, a + 1)); }

  std::uint64_t visits(std::size_t s) const { return count(key(s, 0)); }
  std::uint64_t visits(std::size_t s, std::size_t a) const { return count(key(s, a + 1)); }

  void reset() { visits_.clear(); }

 private:
  static std::uint64_t key(std::size_t s, std::size_t a) {
    return (static_cast<std::uint64_t>(s) << 32) ^ static_cast<std::uint64_t>(a);
  }
  std::uint64_t count(std::uint64_t k) const {
    const auto it = visits_.find(k);
    return it == visits_.end() ? 0 : it->second;
  }
  double next(std::uint64_t k) {
    if (kind_ == ScheduleKind::Constant) return alpha0_;
    const auto n = ++visits_[k];
    return alpha0_ / static_cast<double>(n);
  }

  ScheduleKind kind_;
  double alpha0_;
  std::unordered_map<std::uint64_t, std::uint64_t> visits_;
};

/// Uniformly random non-terminal start state.
inline std::size_t random_start_state(const TabularMDP& mdp, RandomStream& rng) {
  const std::size_t live = mdp.n_states() - mdp.terminal_states().size();
  if (live == 0) throw std::invalid_argument("MDP has no non-terminal state");
  std::size_t k = rng.uniform_index(live);
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    if (k-- == 0) return s;
  }
  return 0;
}

/**
 * Samples under a fixed policy for least-squares evaluation: a single long run
 * for discounted problems, restarted episodes for SSP problems. The first
 * warmup steps of the run are discarded.
 */
inline std::vector<Trajectory> collect_policy_samples(const TabularMDP& mdp, const Policy& pi, std::size_t n_steps,
                                                      std::uint64_t seed, std::size_t warmup = 100) {
  pi.check(mdp);
  RandomStream rng(seed);
  std::vector<Trajectory> out;
  std::size_t s = random_start_state(mdp, rng);
  for (std::size_t w = 0; w < warmup; ++w) {
    const Transition tr = step(mdp, s, pi[s], rng);
    s = tr.terminal ? random_start_state(mdp, rng) : tr.next_state;
  }
  std::size_t collected = 0;
  while (collected < n_steps) {
    Trajectory t = rollout(mdp, pi, s, n_steps - collected, rng);
    collected += t.size();
    const bool ended = !t.empty() && t.transitions.back().terminal;
    if (!t.empty()) s = t.transitions.back().next_state;
    out.push_back(std::move(t));
    if (ended) s = random_start_state(mdp, rng);
  }
  return out;
}

}  // namespace mdptk
