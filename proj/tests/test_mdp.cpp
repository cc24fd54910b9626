#include <gtest/gtest.h>

#include <random>

#include "mdptk/exact_solvers.hpp"
#include "mdptk/mdp.hpp"
#include "test_support.hpp"

using namespace mdptk;
using mdptk::fixtures::stay_go;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(TabularMDP, AccessorsAndExpectedReward) {
  const auto mdp = stay_go();
  EXPECT_EQ(mdp.n_states(), 2u);
  EXPECT_EQ(mdp.n_actions(), 2u);
  EXPECT_DOUBLE_EQ(mdp.discount(), 0.9);
  EXPECT_EQ(mdp.problem_class(), ProblemClass::Discounted);
  EXPECT_DOUBLE_EQ(mdp.expected_reward()(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(mdp.expected_reward()(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(mdp.max_abs_reward(), 1.0);
}

TEST(TabularMDP, RejectsRowThatDoesNotSumToOne) {
  Matrix p = Matrix::Identity(2, 2);
  p(1, 1) = 0.9;
  try {
    TabularMDP({p}, {Matrix::Zero(2, 2)}, 0.9);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("action 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("state 1"), std::string::npos) << msg;
  }
}

TEST(TabularMDP, RejectsNegativeProbabilityAndNonFiniteReward) {
  Matrix p(2, 2);
  p << 1.5, -0.5, 0, 1;
  EXPECT_THROW(TabularMDP({p}, {Matrix::Zero(2, 2)}, 0.9), ValidationError);
  Matrix r = Matrix::Zero(2, 2);
  r(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(TabularMDP({Matrix::Identity(2, 2)}, {r}, 0.9), ValidationError);
}

TEST(TabularMDP, DiscountRules) {
  const Matrix p = Matrix::Identity(2, 2), r = Matrix::Zero(2, 2);
  EXPECT_THROW(TabularMDP({p}, {r}, 1.0), ValidationError);
  EXPECT_THROW(TabularMDP({p}, {r}, -0.1), ValidationError);
  EXPECT_NO_THROW(TabularMDP({p}, {r}, 0.0));
}

TEST(TabularMDP, SspTerminalsMustSelfLoopWithZeroReward) {
  Matrix p(2, 2);
  p << 0, 1, 1, 0;
  EXPECT_THROW(TabularMDP({p}, {Matrix::Zero(2, 2)}, 1.0, ProblemClass::StochasticShortestPath, {1}), ValidationError);
  Matrix q(2, 2);
  q << 0, 1, 0, 1;
  Matrix r = Matrix::Zero(2, 2);
  r(1, 1) = 1.0;
  EXPECT_THROW(TabularMDP({q}, {r}, 1.0, ProblemClass::StochasticShortestPath, {1}), ValidationError);
  EXPECT_NO_THROW(TabularMDP({q}, {Matrix::Zero(2, 2)}, 1.0, ProblemClass::StochasticShortestPath, {1}));
}

TEST(TabularMDP, RejectsMismatchedShapes) {
  EXPECT_THROW(TabularMDP({Matrix::Identity(2, 2)}, {Matrix::Zero(3, 3)}, 0.5), ValidationError);
  EXPECT_THROW(TabularMDP({Matrix::Identity(2, 2)}, {}, 0.5), ValidationError);
  EXPECT_THROW(TabularMDP({}, {}, 0.5), ValidationError);
}

TEST(BellmanBackup, OneStepOnStayGo) {
  const auto mdp = stay_go();
  const Vector tv = bellman_backup(Vector::Zero(2), mdp);
  EXPECT_DOUBLE_EQ(tv[0], 1.0);
  EXPECT_DOUBLE_EQ(tv[1], 1.0);
}

TEST(BellmanBackup, OptimalValueIsFixedPoint) {
  const auto mdp = fixtures::random_mdp(3, 7, 3, 0.9);
  const auto vi = value_iteration(mdp, 1e-8);
  EXPECT_LE(max_norm(bellman_backup(vi.value, mdp) - vi.value), 1e-8);
}

TEST(BellmanBackup, ContractionAndMonotonicity) {
  std::mt19937_64 gen(11);
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    const auto mdp = fixtures::random_mdp(inst, 4, 2, 0.8);
    const Policy pi({0, 1, 1, 0});
    for (int k = 0; k < 100; ++k) {
      const Vector v = fixtures::random_vector(gen, 4), w = fixtures::random_vector(gen, 4);
      const double d = (v - w).cwiseAbs().maxCoeff();
      EXPECT_LE((bellman_backup(v, mdp) - bellman_backup(w, mdp)).cwiseAbs().maxCoeff(), 0.8 * d + 1e-12);
      EXPECT_LE((policy_backup(v, mdp, pi) - policy_backup(w, mdp, pi)).cwiseAbs().maxCoeff(), 0.8 * d + 1e-12);
      const Vector hi = v + fixtures::random_vector(gen, 4).cwiseAbs();
      EXPECT_TRUE(((bellman_backup(hi, mdp) - bellman_backup(v, mdp)).array() >= -1e-12).all());
    }
  }
}

TEST(PolicyBackup, StayGoCases) {
  const auto mdp = stay_go();
  const Vector go = policy_backup(Vector::Zero(2), mdp, Policy::constant(2, 1));
  EXPECT_DOUBLE_EQ(go[0], 1.0);
  EXPECT_DOUBLE_EQ(go[1], 1.0);
  const Vector v = vec({3.0, -7.0});
  const Vector stay = policy_backup(v, mdp, Policy::constant(2, 0));
  EXPECT_DOUBLE_EQ(stay[0], 0.9 * 3.0);
  EXPECT_DOUBLE_EQ(stay[1], 0.9 * -7.0);
}

TEST(PolicyBackup, IteratesToDirectSolve) {
  const auto mdp = fixtures::random_mdp(5, 3, 2, 0.9);
  const std::vector<std::size_t> actions{1, 0, 1};
  Vector v = Vector::Zero(3);
  for (int i = 0; i < 400; ++i) v = policy_backup(v, mdp, Policy(actions));
  EXPECT_LE(max_norm(v - fixtures::evaluate(mdp, actions)), 1e-8);
}

TEST(PolicyBackup, RejectsBadPolicy) {
  const auto mdp = stay_go();
  EXPECT_THROW(policy_backup(Vector::Zero(2), mdp, Policy({0, 2})), std::invalid_argument);
  EXPECT_THROW(policy_backup(Vector::Zero(2), mdp, Policy({0})), std::invalid_argument);
  EXPECT_THROW(bellman_backup(Vector::Zero(3), mdp), std::invalid_argument);
}

TEST(GreedyPolicy, PrefersGoAtTen) {
  const auto pi = greedy_policy(vec({10.0, 10.0}), stay_go());
  EXPECT_EQ(pi.actions(), (std::vector<std::size_t>{1, 1}));
}

TEST(GreedyPolicy, TiesGoToLowestIndex) {
  const Matrix p = Matrix::Constant(3, 3, 1.0 / 3.0), r = Matrix::Ones(3, 3);
  const TabularMDP mdp({p, p, p}, {r, r, r}, 0.5);
  EXPECT_EQ(greedy_policy(vec({1, 2, 3}), mdp).actions(), (std::vector<std::size_t>{0, 0, 0}));
}

TEST(GreedyPolicy, MatchesPolicyIterationAtOptimum) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto mdp = fixtures::random_mdp(seed, 6, 3, 0.9);
    const auto pi = policy_iteration(mdp, Policy::constant(6, 0));
    EXPECT_EQ(greedy_policy(pi.value, mdp), pi.policy);
  }
}

TEST(GreedyPolicy, InvariantToConstantShift) {
  std::mt19937_64 gen(3);
  const auto mdp = fixtures::random_mdp(9, 5, 4, 0.95);
  for (int k = 0; k < 50; ++k) {
    const Vector v = fixtures::random_vector(gen, 5);
    // Shifts representable exactly keep the comparison free of rounding noise.
    EXPECT_EQ(greedy_policy(v, mdp), greedy_policy((v.array() + 4.0).matrix(), mdp));
  }
}

TEST(WeightedNorm, Examples) {
  const auto ones = StateWeights::ones(2);
  EXPECT_DOUBLE_EQ(weighted_norm(vec({1, -2}), ones, NormKind::MaxNorm), 2.0);
  EXPECT_DOUBLE_EQ(weighted_norm(vec({3, 4}), ones, NormKind::EuclideanNorm), 5.0);
  EXPECT_DOUBLE_EQ(weighted_norm(Vector::Zero(2), ones, NormKind::MaxNorm), 0.0);
  EXPECT_DOUBLE_EQ(weighted_norm(Vector::Zero(2), ones, NormKind::EuclideanNorm), 0.0);
}

TEST(StateWeights, MustBePositive) {
  EXPECT_THROW(StateWeights(vec({1.0, 0.0})), std::invalid_argument);
  EXPECT_THROW(StateWeights(vec({1.0, -1.0})), std::invalid_argument);
  EXPECT_DOUBLE_EQ(StateWeights::uniform(4).values().sum(), 1.0);
  EXPECT_DOUBLE_EQ(StateWeights(vec({1.0, 3.0})).normalized().values()[1], 0.75);
}
