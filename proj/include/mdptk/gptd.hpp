#pragma once

// Gaussian-process temporal difference: posterior over values from one episode.

#include <functional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mdptk/mdp.hpp"

namespace mdptk {

/// Prior covariance between two states.
using StateKernel = std::function<double(std::size_t, std::size_t)>;

/// exp(-||x_i - x_j||^2 / (2 l^2)) over per-state coordinates.
inline StateKernel gaussian_state_kernel(Matrix coordinates, double length_scale, double amplitude = 1.0) {
  if (!(length_scale > 0.0)) throw std::invalid_argument("gaussian_state_kernel: length scale must be positive");
  return [coords = std::move(coordinates), length_scale, amplitude](std::size_t i, std::size_t j) {
    const double d2 = (coords.row(static_cast<Eigen::Index>(i)) - coords.row(static_cast<Eigen::Index>(j))).squaredNorm();
    return amplitude * std::exp(-d2 / (2.0 * length_scale * length_scale));
  };
}

/// 1 if the states are identical, 0 otherwise.
inline StateKernel indicator_state_kernel() {
  return [](std::size_t i, std::size_t j) { return i == j ? 1.0 : 0.0; };
}

enum class GptdNoise {
  /// Discounted returns Z_T r observed with noise covariance sigma I (the displayed posterior).
  ReturnNoise,
  /// Rewards r = H V + e' with e' ~ N(0, sigma^2 H H'); equals ReturnNoise with sigma^2 in place of sigma.
  RewardResidualNoise,
};

/**
 * One episode s_1..s_T with rewards r_1..r_T that terminates after step T
 * (r_{T+1} = V(s_{T+1}) = 0).
 */
struct GptdModel {
  std::vector<std::size_t> states;
  Vector rewards;
  double gamma = 1.0;
  StateKernel kernel;
  double noise = 0.0;
  GptdNoise noise_model = GptdNoise::ReturnNoise;
};

struct GptdPosterior {
  Vector mean;
  Vector variance;
};

/// Z_T(i, j) = gamma^(j-i) for j >= i: maps rewards to discounted returns.
inline Matrix discounted_return_matrix(std::size_t t_len, double gamma) {
  const auto n = static_cast<Eigen::Index>(t_len);
  Matrix z = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double g = 1.0;
    for (Eigen::Index j = i; j < n; ++j, g *= gamma) z(i, j) = g;
  }
  return z;
}

/// H(i, i) = 1, H(i, i+1) = -gamma: the inverse of discounted_return_matrix.
inline Matrix temporal_difference_matrix(std::size_t t_len, double gamma) {
  const auto n = static_cast<Eigen::Index>(t_len);
  Matrix h = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) h(i, i + 1) = -gamma;
  return h;
}

namespace detail {

struct SymmetricSolver {
  Eigen::LDLT<Matrix> ldlt;
  Matrix system;
};

// Factorizes a symmetric PSD system, adding 1e-10 * trace jitter once if needed.
inline SymmetricSolver factor_symmetric(Matrix m) {
  const auto ok = [](const Eigen::LDLT<Matrix>& f) {
    return f.info() == Eigen::Success && f.isPositive() && f.rcond() > 1e-14;
  };
  SymmetricSolver s{Eigen::LDLT<Matrix>(m), m};
  if (ok(s.ldlt)) return s;
  const double jitter = 1e-10 * std::max(m.trace(), 1e-300);
  m.diagonal().array() += jitter;
  s.system = m;
  s.ldlt.compute(m);
  if (!ok(s.ldlt)) throw SingularSystemError("gptd_posterior: covariance system is singular");
  return s;
}

}  // namespace detail

/**
 * Posterior mean K_T(s*)' (K_T + sigma I)^{-1} Z_T r and variance
 * K(s*,s*) - K_T(s*)' (K_T + sigma I)^{-1} K_T(s*) at each test state.
 * Negative variances from roundoff are clamped to 0.
 */
inline GptdPosterior gptd_posterior(const GptdModel& model, const std::vector<std::size_t>& test_states) {
  const std::size_t t_len = model.states.size();
  if (t_len == 0) throw std::invalid_argument("gptd_posterior: empty episode");
  if (static_cast<std::size_t>(model.rewards.size()) != t_len)
    throw std::invalid_argument("gptd_posterior: one reward per observed state required");
  if (!model.kernel) throw InvalidKernelError("gptd_posterior: no kernel");
  if (!(model.noise >= 0.0)) throw std::invalid_argument("gptd_posterior: noise must be non-negative");
  const auto n = static_cast<Eigen::Index>(t_len);

  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = model.kernel(model.states[static_cast<std::size_t>(i)], model.states[static_cast<std::size_t>(j)]);
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, k.cwiseAbs().maxCoeff()))
    throw InvalidKernelError("gptd_posterior: kernel matrix is not symmetric");
  const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(k, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (min_eig < -1e-10 * std::max(1.0, k.cwiseAbs().maxCoeff()))
    throw InvalidKernelError("gptd_posterior: kernel matrix is not positive semidefinite");

  Matrix kstar(n, static_cast<Eigen::Index>(test_states.size()));
  Vector prior(static_cast<Eigen::Index>(test_states.size()));
  for (std::size_t c = 0; c < test_states.size(); ++c) {
    prior[static_cast<Eigen::Index>(c)] = model.kernel(test_states[c], test_states[c]);
    for (Eigen::Index i = 0; i < n; ++i)
      kstar(i, static_cast<Eigen::Index>(c)) = model.kernel(model.states[static_cast<std::size_t>(i)], test_states[c]);
  }

  GptdPosterior post;
  if (model.noise_model == GptdNoise::ReturnNoise) {
    const auto solver = detail::factor_symmetric(k + model.noise * Matrix::Identity(n, n));
    const Vector returns = discounted_return_matrix(t_len, model.gamma) * model.rewards;
    post.mean = kstar.transpose() * solver.ldlt.solve(returns);
    post.variance = prior - (kstar.cwiseProduct(solver.ldlt.solve(kstar))).colwise().sum().transpose();
  } else {
    const Matrix h = temporal_difference_matrix(t_len, model.gamma);
    const double s2 = model.noise * model.noise;
    const Matrix cov = h * k * h.transpose() + s2 * (h * h.transpose());
    const auto solver = detail::factor_symmetric(0.5 * (cov + cov.transpose()));
    const Matrix hk = h * kstar;
    post.mean = hk.transpose() * solver.ldlt.solve(model.rewards);
    post.variance = prior - (hk.cwiseProduct(solver.ldlt.solve(hk))).colwise().sum().transpose();
  }
  post.variance = post.variance.cwiseMax(0.0);
  return post;
}

}  // namespace mdptk
