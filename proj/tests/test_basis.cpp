#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mdptk/basis.hpp"
#include "mdptk/bench/env.hpp"
#include "test_support.hpp"

using namespace mdptk;
namespace t = mdptk::fixtures;

namespace {

double orthonormality_error(const FeatureBasis& b) {
  const auto k = static_cast<Eigen::Index>(b.rank());
  return (b.gram() - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
}

StateWeights random_weights(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0.2, 3.0);
  Vector rho(static_cast<Eigen::Index>(n));
  for (auto& x : rho) x = u(gen);
  return StateWeights(rho);
}

Policy policy_for(std::uint64_t seed, std::size_t n, std::size_t actions) {
  std::mt19937_64 gen(seed);
  std::vector<std::size_t> a(n);
  for (auto& x : a) x = gen() % actions;
  return Policy(a);
}

}  // namespace

TEST(Krylov, SingleStateGivesRewardDirection) {
  const auto mdp = t::self_loop(3.0, 0.5);
  const auto built = krylov_basis(mdp, Policy::constant(1, 0), 1);
  ASSERT_EQ(built.basis.rank(), 1u);
  EXPECT_NEAR(built.basis.phi()(0, 0), 1.0, 1e-12);  // rho = 1, unit rho-norm
  EXPECT_FALSE(built.early_termination);
}

TEST(Krylov, ZeroRewardTerminatesEmpty) {
  const auto mdp = t::cycle(4, 0.9, 0.0);
  const auto built = krylov_basis(mdp, Policy::constant(4, 0), 3);
  EXPECT_EQ(built.basis.rank(), 0u);
  EXPECT_TRUE(built.early_termination);
}

TEST(Krylov, FullSpanIsExact) {
  std::mt19937_64 gen(1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mdp = t::random_mdp(seed, 7, 2, 0.9);
    const Policy pi = policy_for(seed, 7, 2);
    const auto built = krylov_basis(mdp, pi, 7, random_weights(gen, 7));
    EXPECT_EQ(built.basis.rank(), 7u);
    EXPECT_LE(orthonormality_error(built.basis), 1e-9);
    EXPECT_LE(max_norm(solve_projected_bellman(mdp, pi, built.basis).value - t::evaluate(mdp, pi.actions())), 1e-8);
  }
}

TEST(Krylov, StopsWhenSpanIsInvariant) {
  // On the cycle with constant reward, R is an eigenvector of P: the Krylov space is one-dimensional.
  const auto built = krylov_basis(t::cycle(5), Policy::constant(5, 0), 4);
  EXPECT_EQ(built.basis.rank(), 1u);
  EXPECT_TRUE(built.early_termination);
}

TEST(Schultz, OneTermAndGeometricSum) {
  const auto mdp = t::random_mdp(2, 4, 2, 0.8);
  const Policy pi({0, 1, 1, 0});
  Matrix p;
  Vector r;
  t::policy_matrices(mdp, pi.actions(), p, r);
  EXPECT_LE(max_norm(schultz_policy_evaluation(mdp, pi, 1) - (r + 0.8 * p * r)), 1e-12);
  EXPECT_DOUBLE_EQ(schultz_policy_evaluation(t::self_loop(1.0, 0.5), Policy::constant(1, 0), 3)[0], 1.9921875);
}

TEST(Schultz, SixTermsMatchDirectSolve) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    // 64 Neumann terms leave gamma^64 ||V_pi|| <= 1e-6 only for gamma below about 0.78.
    const auto mdp = t::random_mdp(seed, 6, 3, 0.7);
    const Policy pi = policy_for(seed + 1, 6, 3);
    EXPECT_LE(max_norm(schultz_policy_evaluation(mdp, pi, 6) - t::evaluate(mdp, pi.actions())), 1e-6);
  }
}

TEST(Schultz, DoublyExponentialDecay) {
  // After k factors the truncation error is (gamma P)^(2^k) V_pi, bounded by gamma^(2^k) ||V_pi||.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto mdp = t::random_mdp(seed, 6, 2, 0.95);
    const Policy pi = policy_for(seed, 6, 2);
    const Vector exact = t::evaluate(mdp, pi.actions());
    for (std::size_t k = 1; k <= 7; ++k) {
      const double err = max_norm(schultz_policy_evaluation(mdp, pi, k) - exact);
      EXPECT_LE(err, std::pow(0.95, std::pow(2.0, k)) * max_norm(exact) * (1 + 1e-12) + 1e-12) << "k " << k;
    }
  }
  // Single state: err(k+1) = err(k)^2 / V exactly.
  const auto loop = t::self_loop(1.0, 0.5);
  for (std::size_t k = 1; k < 4; ++k) {
    const double e1 = 2.0 - schultz_policy_evaluation(loop, Policy::constant(1, 0), k)[0];
    const double e2 = 2.0 - schultz_policy_evaluation(loop, Policy::constant(1, 0), k + 1)[0];
    EXPECT_NEAR(e2, e1 * e1 / 2.0, 1e-15);
  }
}

TEST(Bebf, FirstColumnIsRewardDirection) {
  const auto mdp = t::random_mdp(5, 5, 2, 0.9);
  const Policy pi({1, 0, 1, 0, 1});
  Matrix p;
  Vector r;
  t::policy_matrices(mdp, pi.actions(), p, r);
  const auto built = bebf_extend(FeatureBasis::empty(StateWeights::uniform(5)), mdp, pi);
  ASSERT_EQ(built.basis.rank(), 1u);
  const Vector c = built.basis.phi().col(0);
  EXPECT_NEAR(std::abs(c.dot(r)) / (c.norm() * r.norm()), 1.0, 1e-12);
}

TEST(Bebf, ExactBasisIsLeftUnchanged) {
  const auto mdp = t::random_mdp(6, 4, 2, 0.9);
  const auto built = bebf_extend(FeatureBasis::identity(4), mdp, Policy::constant(4, 1));
  EXPECT_TRUE(built.early_termination);
  EXPECT_EQ(built.basis.phi(), Matrix::Identity(4, 4));
}

TEST(Bebf, FullSizeIsExactAndResidualShrinks) {
  std::mt19937_64 gen(3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mdp = t::random_mdp(20 + seed, 6, 2, 0.9);
    const Policy pi = policy_for(seed, 6, 2);
    const auto rho = random_weights(gen, 6);
    FeatureBasis basis = FeatureBasis::empty(rho);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= 6; ++k) {
      const auto built = bebf_extend(basis, mdp, pi);
      basis = built.basis;
      EXPECT_LE(orthonormality_error(basis), 1e-9);
      const auto sol = solve_projected_bellman(mdp, pi, basis);
      const double residual = weighted_norm(policy_backup(sol.value, mdp, pi) - sol.value, rho, NormKind::EuclideanNorm);
      EXPECT_LE(residual, previous * (1 + 1e-9) + 1e-12) << "seed " << seed << " k " << k;
      previous = residual;
    }
    EXPECT_LE(previous, 1e-8);
    EXPECT_LE(max_norm(solve_projected_bellman(mdp, pi, basis).value - t::evaluate(mdp, pi.actions())), 1e-8);
  }
}

TEST(Aggregation, PartitionValidation) {
  EXPECT_THROW(AggregationPartition({0, 0, 2}, 3), std::invalid_argument);
  EXPECT_THROW(AggregationPartition({0, 3}, 3), std::invalid_argument);
  const auto p = partition_by_score(Vector(Eigen::Vector4d(4, 1, 3, 2)), 2);
  EXPECT_EQ(p.cluster_of(1), 0u);
  EXPECT_EQ(p.cluster_of(3), 0u);
  EXPECT_EQ(p.cluster_of(0), 1u);
}

TEST(Aggregation, SingletonsGiveExactEvaluationInOneStep) {
  std::mt19937_64 gen(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mdp = t::random_mdp(seed, 7, 3, 0.95);
    const Policy pi = policy_for(seed, 7, 3);
    const Vector v0 = t::random_vector(gen, 7);
    const Vector v1 = aggregation_correct(v0, AggregationPartition::singletons(7), mdp, pi);
    EXPECT_LE(max_norm(v1 - t::evaluate(mdp, pi.actions())), 1e-8);
  }
}

TEST(Aggregation, ExactValueIsFixed) {
  const auto mdp = t::random_mdp(8, 6, 2, 0.9);
  const Policy pi({0, 1, 0, 1, 0, 1});
  const Vector v = t::evaluate(mdp, pi.actions());
  const auto part = partition_by_score(v, 2);
  EXPECT_LE(max_norm(aggregation_correct(v, part, mdp, pi) - v), 1e-10);
}

TEST(Aggregation, SingleClusterOnSingleState) {
  const auto mdp = t::self_loop(2.0, 0.5);
  const Vector v = aggregation_correct(Vector::Zero(1), AggregationPartition({0}, 1), mdp, Policy::constant(1, 0));
  EXPECT_NEAR(v[0], 4.0, 1e-12);
}

TEST(Aggregation, OptimalModeWithSingletonsMatchesGreedyEvaluation) {
  const auto mdp = t::random_mdp(13, 5, 3, 0.9);
  std::mt19937_64 gen(9);
  const Vector v0 = t::random_vector(gen, 5);
  const Policy greedy = greedy_policy(v0, mdp);
  const Vector v1 =
      aggregation_correct(v0, AggregationPartition::singletons(5), mdp, Policy::constant(5, 0), AggregationMode::Optimal);
  EXPECT_LE(max_norm(v1 - t::evaluate(mdp, greedy.actions())), 1e-8);
}

TEST(Rpi, FullBebfMatchesPolicyIteration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mdp = t::random_mdp(90 + seed, 6, 3, 0.9);
    const auto oracle = t::brute_force(mdp);
    const auto rpi = representation_policy_iteration(mdp, BasisBuilder{BasisBuilderKind::BEBF, 6}, Policy::constant(6, 0), 100);
    EXPECT_LE(max_norm(rpi.report.value - oracle.value), 1e-8);
    EXPECT_NE(std::find(oracle.optimal_policies.begin(), oracle.optimal_policies.end(), rpi.report.policy.actions()),
              oracle.optimal_policies.end());
    EXPECT_EQ(rpi.visited.size(), rpi.report.iterations);
  }
}

TEST(Rpi, SingleStateIsImmediate) {
  Matrix one = Matrix::Ones(1, 1);
  const TabularMDP mdp({one, one}, {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0)}, 0.5);
  for (auto kind : {BasisBuilderKind::Krylov, BasisBuilderKind::BEBF, BasisBuilderKind::Aggregation}) {
    const auto rpi = representation_policy_iteration(mdp, BasisBuilder{kind, 1}, Policy::constant(1, 0), 10);
    EXPECT_EQ(rpi.report.policy[0], 1u);
    EXPECT_NEAR(rpi.report.value[0], 4.0, 1e-12);
  }
}

TEST(Rpi, KrylovOnChain) {
  bench::EnvSpec spec;
  spec.n_states = 10;
  spec.slip = 0.1;
  spec.discount = 0.9;
  const auto mdp = bench::generate_env(spec).mdp;
  const auto oracle = t::brute_force(mdp);
  const auto full = representation_policy_iteration(mdp, BasisBuilder{BasisBuilderKind::Krylov, 10}, Policy::constant(10, 0), 50);
  EXPECT_LE(max_norm(t::evaluate(mdp, full.report.policy.actions()) - oracle.value), 1e-8);
  // With two columns the lifted values vanish far from the goal, so those states keep the
  // lowest-index action; the states next to the goal still move right.
  const auto small = representation_policy_iteration(mdp, BasisBuilder{BasisBuilderKind::Krylov, 2}, Policy::constant(10, 0), 50);
  EXPECT_EQ(greedy_policy(small.report.value, mdp), small.report.policy);
  for (std::size_t s = 6; s < 9; ++s) EXPECT_EQ(small.report.policy[s], 1u);
}

TEST(Rpi, ReportsCycles) {
  // A round limit of one without convergence surfaces the visited policies.
  const auto mdp = t::stay_go();
  try {
    representation_policy_iteration(mdp, BasisBuilder{BasisBuilderKind::BEBF, 2}, Policy::constant(2, 0), 1);
    FAIL();
  } catch (const PolicyCycleError& e) {
    ASSERT_EQ(e.visited_policies().size(), 1u);
    EXPECT_EQ(e.visited_policies()[0], (std::vector<std::size_t>{0, 0}));
  }
  EXPECT_THROW(representation_policy_iteration(t::ssp_walk(3), BasisBuilder{BasisBuilderKind::BEBF, 2},
                                               Policy::constant(3, 1), 5),
               std::invalid_argument);
}
