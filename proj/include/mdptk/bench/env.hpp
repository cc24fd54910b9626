#pragma once

// Benchmark instance generators: chain, gridworld and random MDPs.

#include <cmath>
#include <cstdint>
#include <string>

#include "mdptk/mdp.hpp"
#include "mdptk/simulation.hpp"

namespace mdptk::bench {

enum class EnvKind { Chain, Gridworld, RandomMDP };

inline const char* to_string(EnvKind k) {
  switch (k) {
    case EnvKind::Chain: return "chain";
    case EnvKind::Gridworld: return "grid";
    case EnvKind::RandomMDP: return "random";
  }
  return "?";
}

inline EnvKind parse_env_kind(const std::string& s) {
  if (s == "chain") return EnvKind::Chain;
  if (s == "grid" || s == "gridworld") return EnvKind::Gridworld;
  if (s == "random") return EnvKind::RandomMDP;
  throw std::invalid_argument("unknown environment kind '" + s + "'");
}

struct EnvSpec {
  EnvKind kind = EnvKind::Chain;
  std::size_t n_states = 5;   ///< Chain and RandomMDP
  std::size_t width = 4;      ///< Gridworld
  std::size_t height = 4;     ///< Gridworld
  std::size_t n_actions = 2;  ///< RandomMDP only; chain has 2, gridworld 4
  double slip = 0.0;
  double goal_reward = 1.0;
  /// Episodic instances are stochastic shortest path problems (discount forced to 1).
  bool episodic = false;
  double discount = 0.9;
  std::uint64_t seed = 0;

  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

struct GeneratedEnv {
  TabularMDP mdp;
  /// One row per state, used by distance-based kernels.
  Matrix coordinates;
};

namespace detail {

inline void check_spec(const EnvSpec& spec) {
  if (!(spec.slip >= 0.0 && spec.slip <= 1.0)) throw std::invalid_argument("slip probability must be in [0,1]");
  if (!spec.episodic && !(spec.discount >= 0.0 && spec.discount < 1.0))
    throw std::invalid_argument("discount must be in [0,1) for a discounted instance");
  if (!std::isfinite(spec.goal_reward)) throw std::invalid_argument("goal reward must be finite");
}

inline GeneratedEnv finish(std::vector<Matrix> p, std::vector<Matrix> r, const EnvSpec& spec,
                           std::vector<std::size_t> terminals, Matrix coords) {
  if (spec.episodic)
    return GeneratedEnv{TabularMDP(std::move(p), std::move(r), 1.0, ProblemClass::StochasticShortestPath,
                                   std::move(terminals)),
                        std::move(coords)};
  return GeneratedEnv{TabularMDP(std::move(p), std::move(r), spec.discount), std::move(coords)};
}

// Chain: actions {0: left, 1: right}; intended move w.p. 1-slip, opposite move w.p. slip.
inline GeneratedEnv make_chain(const EnvSpec& spec) {
  const std::size_t n = spec.n_states;
  if (n < 2) throw std::invalid_argument("chain needs at least 2 states");
  const auto ni = static_cast<Eigen::Index>(n);
  std::vector<Matrix> p(2, Matrix::Zero(ni, ni)), r(2, Matrix::Zero(ni, ni));
  const std::size_t goal = n - 1;
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t s = 0; s < n; ++s) {
      const auto si = static_cast<Eigen::Index>(s);
      if (spec.episodic && s == goal) {
        p[a](si, si) = 1.0;
        continue;
      }
      const std::size_t left = s == 0 ? 0 : s - 1;
      const std::size_t right = s + 1 < n ? s + 1 : s;
      const std::size_t intended = a == 0 ? left : right;
      const std::size_t opposite = a == 0 ? right : left;
      p[a](si, static_cast<Eigen::Index>(intended)) += 1.0 - spec.slip;
      p[a](si, static_cast<Eigen::Index>(opposite)) += spec.slip;
      r[a](si, static_cast<Eigen::Index>(goal)) = spec.goal_reward;
    }
  }
  Matrix coords(ni, 1);
  for (Eigen::Index s = 0; s < ni; ++s) coords(s, 0) = static_cast<double>(s);
  return finish(std::move(p), std::move(r), spec, {goal}, std::move(coords));
}

// Gridworld: actions {0: up, 1: right, 2: down, 3: left}; slip splits evenly to the two lateral moves.
inline GeneratedEnv make_grid(const EnvSpec& spec) {
  const std::size_t w = spec.width, h = spec.height;
  if (w < 1 || h < 1 || w * h < 2) throw std::invalid_argument("gridworld needs at least 2 cells");
  const std::size_t n = w * h;
  const auto ni = static_cast<Eigen::Index>(n);
  const std::size_t goal = n - 1;
  std::vector<Matrix> p(4, Matrix::Zero(ni, ni)), r(4, Matrix::Zero(ni, ni));
  const auto move = [&](std::size_t s, std::size_t dir) {
    std::size_t x = s % w, y = s / w;
    switch (dir) {
      case 0: y = y == 0 ? 0 : y - 1; break;
      case 1: x = x + 1 < w ? x + 1 : x; break;
      case 2: y = y + 1 < h ? y + 1 : y; break;
      default: x = x == 0 ? 0 : x - 1; break;
    }
    return y * w + x;
  };
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t s = 0; s < n; ++s) {
      const auto si = static_cast<Eigen::Index>(s);
      if (spec.episodic && s == goal) {
        p[a](si, si) = 1.0;
        continue;
      }
      p[a](si, static_cast<Eigen::Index>(move(s, a))) += 1.0 - spec.slip;
      p[a](si, static_cast<Eigen::Index>(move(s, (a + 1) % 4))) += spec.slip / 2.0;
      p[a](si, static_cast<Eigen::Index>(move(s, (a + 3) % 4))) += spec.slip / 2.0;
      r[a](si, static_cast<Eigen::Index>(goal)) = spec.goal_reward;
    }
  }
  Matrix coords(ni, 2);
  for (std::size_t s = 0; s < n; ++s) {
    coords(static_cast<Eigen::Index>(s), 0) = static_cast<double>(s % w);
    coords(static_cast<Eigen::Index>(s), 1) = static_cast<double>(s / w);
  }
  return finish(std::move(p), std::move(r), spec, {goal}, std::move(coords));
}

// Random: Dirichlet(1) transition rows, uniform [0,1) rewards.
inline GeneratedEnv make_random(const EnvSpec& spec) {
  if (spec.episodic) throw std::invalid_argument("random MDPs are discounted only");
  if (spec.n_states < 1 || spec.n_actions < 1) throw std::invalid_argument("random MDP needs states and actions");
  const auto ni = static_cast<Eigen::Index>(spec.n_states);
  RandomStream rng(spec.seed);
  std::vector<Matrix> p, r;
  for (std::size_t a = 0; a < spec.n_actions; ++a) {
    Matrix pa(ni, ni), ra(ni, ni);
    for (Eigen::Index s = 0; s < ni; ++s) {
      double total = 0.0;
      for (Eigen::Index j = 0; j < ni; ++j) {
        // Exponential(1) draws normalized to a Dirichlet(1) row.
        const double e = -std::log1p(-rng.uniform01());
        pa(s, j) = e;
        total += e;
      }
      if (!(total > 0.0)) {
        pa.row(s).setZero();
        pa(s, s) = 1.0;
      } else {
        pa.row(s) /= total;
        // Push the roundoff of the row sum into the largest entry.
        Eigen::Index big = 0;
        pa.row(s).maxCoeff(&big);
        pa(s, big) += 1.0 - pa.row(s).sum();
      }
      for (Eigen::Index j = 0; j < ni; ++j) ra(s, j) = rng.uniform01();
    }
    p.push_back(std::move(pa));
    r.push_back(std::move(ra));
  }
  Matrix coords(ni, 1);
  for (Eigen::Index s = 0; s < ni; ++s) coords(s, 0) = static_cast<double>(s);
  return finish(std::move(p), std::move(r), spec, {}, std::move(coords));
}

}  // namespace detail

inline GeneratedEnv generate_env(const EnvSpec& spec) {
  detail::check_spec(spec);
  switch (spec.kind) {
    case EnvKind::Chain: return detail::make_chain(spec);
    case EnvKind::Gridworld: return detail::make_grid(spec);
    case EnvKind::RandomMDP: return detail::make_random(spec);
  }
  throw std::invalid_argument("unknown environment kind");
}

/// Default embedding when only an MDP file is available: state index as a 1-D coordinate.
inline Matrix index_coordinates(std::size_t n_states) {
  Matrix c(static_cast<Eigen::Index>(n_states), 1);
  for (Eigen::Index s = 0; s < c.rows(); ++s) c(s, 0) = static_cast<double>(s);
  return c;
}

}  // namespace mdptk::bench
