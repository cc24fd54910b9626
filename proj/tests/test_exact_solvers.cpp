#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mdptk/exact_solvers.hpp"
#include "mdptk/simplex.hpp"
#include "test_support.hpp"

using namespace mdptk;
namespace t = mdptk::fixtures;

TEST(Simplex, SingleBound) {
  LinearProgram lp{Vector::Ones(1), Matrix::Ones(1, 1), Vector::Constant(1, 3.0)};
  EXPECT_NEAR(simplex_solve(lp)[0], 3.0, 1e-12);
}

TEST(Simplex, TwoBounds) {
  LinearProgram lp{Vector::Ones(2), Matrix::Identity(2, 2), Vector(2)};
  lp.constraint_rhs << 1.0, 2.0;
  const Vector x = simplex_solve(lp);
  EXPECT_NEAR(x[0], 1.0, 1e-12);
  EXPECT_NEAR(x[1], 2.0, 1e-12);
}

TEST(Simplex, NegativeOptimumWithFreeVariables) {
  // min x + y  s.t. x >= -4, y >= -1, x + y >= -3  ->  objective -3
  LinearProgram lp{Vector::Ones(2), Matrix(3, 2), Vector(3)};
  lp.constraint_matrix << 1, 0, 0, 1, 1, 1;
  lp.constraint_rhs << -4, -1, -3;
  const Vector x = simplex_solve(lp);
  EXPECT_NEAR(x.sum(), -3.0, 1e-9);
  EXPECT_TRUE(((lp.constraint_matrix * x - lp.constraint_rhs).array() >= -1e-9).all());
}

TEST(Simplex, DetectsInfeasibleAndUnbounded) {
  LinearProgram infeasible{Vector::Ones(1), Matrix(2, 1), Vector(2)};
  infeasible.constraint_matrix << 1, -1;
  infeasible.constraint_rhs << 2, -1;  // x >= 2 and x <= 1
  EXPECT_THROW(simplex_solve(infeasible), InfeasibleError);
  LinearProgram unbounded{Vector::Constant(1, -1.0), Matrix::Ones(1, 1), Vector::Zero(1)};
  EXPECT_THROW(simplex_solve(unbounded), UnboundedError);
}

TEST(Simplex, DegenerateRandomProblemsAgreeWithVertexEnumeration) {
  // 2-variable LPs: the optimum is attained at a vertex formed by two active constraints.
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    LinearProgram lp{Vector(2), Matrix(5, 2), Vector(5)};
    // A bounding box keeps every instance bounded; the extra rows may duplicate it.
    lp.constraint_matrix << 1, 0, 0, 1, -1, -1, u(gen), u(gen), u(gen), u(gen);
    lp.constraint_rhs << -2, -2, -4, u(gen), u(gen);
    lp.objective << 1.0 + std::abs(u(gen)), 1.0 + std::abs(u(gen));
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) {
        Matrix m(2, 2);
        m << lp.constraint_matrix.row(i), lp.constraint_matrix.row(j);
        if (std::abs(m.determinant()) < 1e-9) continue;
        const Vector x = m.fullPivLu().solve(Vector(Eigen::Vector2d(lp.constraint_rhs[i], lp.constraint_rhs[j])));
        if (((lp.constraint_matrix * x - lp.constraint_rhs).array() >= -1e-9).all())
          best = std::min(best, lp.objective.dot(x));
      }
    Vector x;
    try {
      x = simplex_solve(lp);
    } catch (const InfeasibleError&) {
      EXPECT_FALSE(std::isfinite(best)) << "trial " << trial;
      continue;
    }
    ASSERT_TRUE(std::isfinite(best)) << "trial " << trial;
    EXPECT_NEAR(lp.objective.dot(x), best, 1e-8) << "trial " << trial;
    EXPECT_TRUE(((lp.constraint_matrix * x - lp.constraint_rhs).array() >= -1e-9).all());
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(ValueIteration, StayGo) {
  const auto r = value_iteration(t::stay_go(), 1e-6);
  EXPECT_NEAR(r.value[0], 10.0, 1e-6);
  EXPECT_NEAR(r.value[1], 10.0, 1e-6);
  EXPECT_EQ(r.policy.actions(), (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(r.method, SolveMethod::VI);
  EXPECT_EQ(r.residual_history.size(), r.iterations);
}

TEST(ValueIteration, SingleStateSelfLoop) {
  EXPECT_NEAR(value_iteration(t::self_loop(5.0, 0.5), 1e-9).value[0], 10.0, 1e-9);
}

TEST(ValueIteration, StoppingRuleGuarantee) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto mdp = t::random_mdp(seed, 8, 3, 0.95);
    const double eps_prime = 1e-3;
    const auto coarse = value_iteration(mdp, eps_prime);
    const auto exact = t::brute_force(mdp);
    EXPECT_LE(max_norm(coarse.value - exact.value), eps_prime / 2.0) << "seed " << seed;
    EXPECT_LT(coarse.final_residual, vi_stopping_threshold(eps_prime, 0.95));
    // The greedy policy is eps'-optimal.
    EXPECT_LE(max_norm(exact.value - t::evaluate(mdp, coarse.policy.actions())), eps_prime) << "seed " << seed;
  }
}

TEST(ValueIteration, IterationLimitThrows) {
  const auto mdp = t::random_mdp(1, 5, 2, 0.99);
  try {
    value_iteration(mdp, 1e-9, 3);
    FAIL();
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 3u);
    EXPECT_GT(e.last_residual(), 0.0);
  }
  EXPECT_THROW(value_iteration(mdp, 0.0), std::invalid_argument);
}

TEST(ValueIteration, AgreesWithBruteForce) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mdp = t::random_mdp(100 + seed, 5, 3, 0.9);
    const auto oracle = t::brute_force(mdp);
    const auto vi = value_iteration(mdp, 1e-9);
    EXPECT_LE(max_norm(vi.value - oracle.value), 1e-9);
    EXPECT_NE(std::find(oracle.optimal_policies.begin(), oracle.optimal_policies.end(), vi.policy.actions()),
              oracle.optimal_policies.end());
  }
}

TEST(ValueIteration, SspShortestPath) {
  const auto mdp = t::ssp_walk(5);
  const auto r = value_iteration(mdp, 1e-9);
  for (std::size_t s = 0; s < 5; ++s) EXPECT_NEAR(r.value[static_cast<Eigen::Index>(s)], -(4.0 - s), 1e-8);
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(r.policy[s], 1u);
}

TEST(PolicyEvaluation, StayGo) {
  const auto mdp = t::stay_go();
  const Vector go = policy_evaluation_exact(mdp, Policy::constant(2, 1));
  EXPECT_NEAR(go[0], 10.0, 1e-12);
  EXPECT_NEAR(go[1], 10.0, 1e-12);
  EXPECT_EQ(policy_evaluation_exact(mdp, Policy::constant(2, 0)), Vector::Zero(2));
}

TEST(PolicyEvaluation, SspDistanceToTerminal) {
  const Vector v = policy_evaluation_exact(t::ssp_walk(5), Policy::constant(5, 1));
  for (Eigen::Index s = 0; s < 5; ++s) EXPECT_NEAR(v[s], -(4.0 - static_cast<double>(s)), 1e-12);
}

TEST(PolicyEvaluation, ImproperSspPolicyIsSingular) {
  EXPECT_THROW(policy_evaluation_exact(t::ssp_walk(4), Policy::constant(4, 0)), SingularSystemError);
}

TEST(PolicyEvaluation, FixedPointOfPolicyBackup) {
  const auto mdp = t::random_mdp(8, 9, 2, 0.95);
  const Policy pi({0, 1, 0, 1, 1, 0, 0, 1, 0});
  const Vector v = policy_evaluation_exact(mdp, pi);
  EXPECT_LE(max_norm(policy_backup(v, mdp, pi) - v), 1e-10);
  EXPECT_LE(max_norm(v - t::evaluate(mdp, pi.actions())), 1e-10);
}

TEST(PolicyIteration, StayGoTrace) {
  const auto mdp = t::stay_go();
  const auto r = policy_iteration(mdp, Policy::constant(2, 0));
  EXPECT_EQ(r.iterations, 2u);
  EXPECT_EQ(r.policy.actions(), (std::vector<std::size_t>{1, 1}));
  EXPECT_NEAR(r.value[0], 10.0, 1e-12);
  const auto again = policy_iteration(mdp, r.policy);
  EXPECT_EQ(again.iterations, 1u);
  EXPECT_EQ(again.policy, r.policy);
}

TEST(PolicyIteration, MatchesValueIteration) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto mdp = t::random_mdp(200 + seed, 8, 3, 0.9);
    const auto pi = policy_iteration(mdp, Policy::constant(8, 0));
    const auto vi = value_iteration(mdp, 1e-8);
    EXPECT_LE(max_norm(pi.value - vi.value), 1e-6) << "seed " << seed;
  }
}

TEST(PolicyIteration, MonotoneImprovement) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mdp = t::random_mdp(300 + seed, 10, 4, 0.95);
    Policy pi = Policy::constant(10, 0);
    Vector v = policy_evaluation_exact(mdp, pi);
    for (int round = 0; round < 100; ++round) {
      const Policy next = improve_policy(mdp, pi, v);
      if (next == pi) break;
      const Vector w = policy_evaluation_exact(mdp, next);
      EXPECT_TRUE(((w - v).array() >= -1e-10).all());
      EXPECT_GT((w - v).maxCoeff(), 0.0);
      pi = next;
      v = w;
    }
  }
}

TEST(PolicyIteration, SspFromProperPolicy) {
  const auto r = policy_iteration(t::ssp_walk(6), Policy::constant(6, 1));
  EXPECT_NEAR(r.value[0], -5.0, 1e-12);
}

TEST(PrimalLp, ShapeAndScalarConstraint) {
  const auto lp = build_primal_lp(t::stay_go(), StateWeights::uniform(2));
  EXPECT_EQ(lp.n_constraints(), 4u);
  EXPECT_EQ(lp.n_variables(), 2u);
  const auto scalar = build_primal_lp(t::self_loop(1.0, 0.5), StateWeights::ones(1));
  EXPECT_DOUBLE_EQ(scalar.constraint_matrix(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(scalar.constraint_rhs[0], 1.0);
}

TEST(PrimalLp, OptimalValueIsFeasible) {
  const auto mdp = t::random_mdp(4, 7, 3, 0.9);
  const auto lp = build_primal_lp(mdp, StateWeights::uniform(7));
  const auto vi = value_iteration(mdp, 1e-10);
  EXPECT_TRUE(((lp.constraint_matrix * vi.value - lp.constraint_rhs).array() >= -1e-9).all());
}

TEST(SolveLp, StayGo) {
  const auto r = solve_lp(t::stay_go(), StateWeights::uniform(2));
  EXPECT_NEAR(r.value[0], 10.0, 1e-7);
  EXPECT_NEAR(r.value[1], 10.0, 1e-7);
  EXPECT_EQ(r.policy.actions(), (std::vector<std::size_t>{1, 1}));
}

TEST(SolveLp, IndependentOfPositiveWeights) {
  const auto mdp = t::random_mdp(21, 6, 2, 0.9);
  Vector rho(6);
  rho << 1, 2, 3, 1, 5, 0.5;
  const auto a = solve_lp(mdp, StateWeights::uniform(6));
  const auto b = solve_lp(mdp, StateWeights(rho));
  const auto vi = value_iteration(mdp, 1e-10);
  EXPECT_LE(max_norm(a.value - b.value), 1e-8);
  EXPECT_LE(max_norm(a.value - vi.value), 1e-6);
}

TEST(SolveLp, RejectsSsp) {
  EXPECT_THROW(solve_lp(t::ssp_walk(3), StateWeights::uniform(3)), std::invalid_argument);
}

TEST(ExactSolvers, ThreeWayAgreementOnGeneratorInstances) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 10 + 4 * seed;
    const auto mdp = t::random_mdp(500 + seed, n, 3, 0.9);
    const auto vi = value_iteration(mdp, 1e-8);
    const auto pi = policy_iteration(mdp, Policy::constant(n, 0));
    const auto lp = solve_lp(mdp, StateWeights::uniform(n));
    EXPECT_LE(max_norm(vi.value - pi.value), 1e-6);
    EXPECT_LE(max_norm(lp.value - pi.value), 1e-6);
    EXPECT_EQ(pi.policy, lp.policy);
  }
}
