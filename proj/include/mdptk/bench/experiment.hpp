#pragma once

// Experiment configuration and dispatch to every solver and learner.

#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include "mdptk/basis.hpp"
#include "mdptk/bench/env.hpp"
#include "mdptk/bench/mdp_io.hpp"
#include "mdptk/bench/report.hpp"
#include "mdptk/exact_solvers.hpp"
#include "mdptk/gptd.hpp"
#include "mdptk/kbrl.hpp"
#include "mdptk/linear_approx.hpp"
#include "mdptk/td.hpp"

namespace mdptk::bench {

/// Unknown algorithm, bad hyper-parameter combination and similar caller mistakes.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::optional<EnvSpec> env;
  std::string mdp_file;
  std::string algorithm = "vi";

  double tolerance = 1e-6;  ///< eps' for vi, stopping tolerance for pvi/kbrl
  std::size_t max_iters = 100'000;
  std::uint64_t seed = 0;

  // sample-based learners
  double lambda = 0.0;
  double epsilon = 0.1;
  double alpha0 = 1.0;
  ScheduleKind schedule = ScheduleKind::HarmonicPerVisit;
  std::size_t episodes = 100;
  std::size_t horizon = 100;
  std::size_t steps = 10'000;  ///< lstd sample budget
  std::size_t warmup = 100;

  // basis methods
  std::string basis = "identity";  ///< identity | krylov | bebf | aggregation
  std::size_t k = 0;               ///< 0 means min(|S|, 10)
  std::size_t k_terms = 6;
  std::size_t max_rounds = 100;

  // kernel methods
  double bandwidth = 0.5;
  double noise = 0.0;
  std::size_t samples_per_pair = 1;

  bool compare_exact = false;
};

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> algos{"vi",        "pi",  "lp",  "td",  "q_learning", "lstd", "projected",
                                              "pvi",       "schultz", "rpi", "kbrl", "gptd"};
  return algos;
}

inline void validate_config(const ExperimentConfig& cfg) {
  const auto& algos = known_algorithms();
  if (std::find(algos.begin(), algos.end(), cfg.algorithm) == algos.end())
    throw UsageError("unknown algorithm '" + cfg.algorithm + "'");
  if (!cfg.env && cfg.mdp_file.empty()) throw UsageError("an environment or an MDP file is required");
  if (cfg.episodes == 0 || cfg.horizon == 0 || cfg.steps == 0 || cfg.max_iters == 0 || cfg.max_rounds == 0 ||
      cfg.samples_per_pair == 0)
    throw UsageError("budgets must be positive");
  if (!(cfg.tolerance > 0.0)) throw UsageError("tolerance must be positive");
  const std::vector<std::string> bases{"identity", "krylov", "bebf", "aggregation"};
  if (std::find(bases.begin(), bases.end(), cfg.basis) == bases.end())
    throw UsageError("unknown basis '" + cfg.basis + "'");
}

struct LoadedInstance {
  TabularMDP mdp;
  Matrix coordinates;
  std::string description;
};

inline std::string describe(const EnvSpec& e) {
  std::ostringstream os;
  os << std::setprecision(17) << to_string(e.kind);
  if (e.kind == EnvKind::Gridworld)
    os << "(" << e.width << "x" << e.height << ")";
  else
    os << "(" << e.n_states << ")";
  if (e.kind == EnvKind::RandomMDP) os << " actions=" << e.n_actions;
  os << " slip=" << e.slip << (e.episodic ? " episodic" : " discount=") ;
  if (!e.episodic) os << e.discount;
  os << " seed=" << e.seed;
  return os.str();
}

/// Generates the configured environment or loads the MDP file.
inline LoadedInstance load_instance(const ExperimentConfig& cfg) {
  if (cfg.env) {
    auto gen = generate_env(*cfg.env);
    return LoadedInstance{std::move(gen.mdp), std::move(gen.coordinates), describe(*cfg.env)};
  }
  auto mdp = load_mdp(cfg.mdp_file);
  auto coords = index_coordinates(mdp.n_states());
  return LoadedInstance{std::move(mdp), std::move(coords), "file:" + cfg.mdp_file};
}

namespace detail {

inline std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline void fill_solve(RunReport& out, const SolveReport& rep) {
  out.value = to_std(rep.value);
  out.policy = rep.policy.actions();
  out.iterations = rep.iterations;
  out.final_residual = rep.final_residual;
  out.residuals = rep.residual_history;
}

inline std::size_t basis_size(const ExperimentConfig& cfg, const TabularMDP& mdp) {
  return cfg.k == 0 ? std::min<std::size_t>(mdp.n_states(), 10) : cfg.k;
}

inline FeatureBasis make_basis(const ExperimentConfig& cfg, const TabularMDP& mdp, const Policy& pi,
                               const StateWeights& rho) {
  const std::size_t k = basis_size(cfg, mdp);
  if (cfg.basis == "identity")
    return FeatureBasis(Matrix::Identity(static_cast<Eigen::Index>(mdp.n_states()), static_cast<Eigen::Index>(mdp.n_states())), rho);
  if (cfg.basis == "krylov") return krylov_basis(mdp, pi, k, rho).basis;
  if (cfg.basis == "bebf") return bebf_basis(mdp, pi, k, rho).basis;
  const auto v = policy_evaluation_exact(mdp, pi);
  return FeatureBasis(partition_by_score(v, k).indicator_matrix(), rho);
}

inline BasisBuilderKind builder_kind(const std::string& basis) {
  if (basis == "krylov") return BasisBuilderKind::Krylov;
  if (basis == "aggregation") return BasisBuilderKind::Aggregation;
  if (basis == "bebf") return BasisBuilderKind::BEBF;
  throw UsageError("rpi needs basis krylov, bebf or aggregation");
}

inline std::vector<CurvePoint> to_curve(const std::vector<EpisodeRecord>& records) {
  std::vector<CurvePoint> out;
  for (const auto& r : records) {
    CurvePoint c{r.episode, r.steps, r.episode_return, std::nullopt};
    if (!std::isnan(r.value_error)) c.value_error = r.value_error;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/**
 * Starting policy for policy iteration: action 0 everywhere, or for SSP
 * instances the first constant policy that is proper (falls back to the
 * greedy policy of value iteration).
 */
inline Policy initial_policy(const TabularMDP& mdp) {
  if (mdp.problem_class() == ProblemClass::Discounted) return Policy::constant(mdp.n_states(), 0);
  for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
    Policy pi = Policy::constant(mdp.n_states(), a);
    try {
      policy_evaluation_exact(mdp, pi);
      return pi;
    } catch (const SingularSystemError&) {
    }
  }
  return value_iteration(mdp, 1e-6).policy;
}

/// Reference solution used for exact comparisons: value iteration at eps' = 1e-8.
inline SolveReport exact_reference(const TabularMDP& mdp) { return value_iteration(mdp, 1e-8); }

/**
 * Runs one configured experiment. Solver failures are captured in the report
 * (status "failed"); configuration mistakes throw UsageError and unreadable
 * inputs propagate their I/O or parse errors.
 */
inline RunReport run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  LoadedInstance inst = load_instance(cfg);
  const TabularMDP& mdp = inst.mdp;

  RunReport out;
  out.algorithm = cfg.algorithm;
  out.instance = inst.description;
  out.seed = cfg.seed;
  out.n_states = mdp.n_states();
  out.n_actions = mdp.n_actions();
  out.discount = mdp.discount();

  mdptk::detail::Stopwatch clock;
  try {
    const bool needs_reference = cfg.compare_exact || cfg.algorithm == "td" || cfg.algorithm == "lstd" ||
                                 cfg.algorithm == "projected" || cfg.algorithm == "pvi" ||
                                 cfg.algorithm == "schultz" || cfg.algorithm == "gptd";
    std::optional<SolveReport> reference;
    if (needs_reference) reference = exact_reference(mdp);
    const ValueFunction* ref_value = cfg.compare_exact ? &reference->value : nullptr;
    LearningSchedule schedule(cfg.schedule, cfg.alpha0);
    std::vector<EpisodeRecord> records;
    const EpisodeObserver observer = [&records](const EpisodeRecord& r) { records.push_back(r); };
    const Policy first_action = Policy::constant(mdp.n_states(), 0);

    const std::string& algo = cfg.algorithm;
    if (algo == "vi") {
      detail::fill_solve(out, value_iteration(mdp, cfg.tolerance, cfg.max_iters));
    } else if (algo == "pi") {
      detail::fill_solve(out, policy_iteration(mdp, initial_policy(mdp), cfg.max_iters));
    } else if (algo == "lp") {
      detail::fill_solve(out, solve_lp(mdp, StateWeights::uniform(mdp.n_states())));
    } else if (algo == "td") {
      // Evaluates the optimal policy, so V_pi coincides with V*.
      const TdConfig td{cfg.lambda, cfg.episodes, cfg.horizon, cfg.seed};
      const ValueFunction v = td_lambda_evaluate(mdp, reference->policy, schedule, td, observer, ref_value);
      out.value = detail::to_std(v);
      out.policy = reference->policy.actions();
      out.iterations = cfg.episodes;
    } else if (algo == "q_learning") {
      const QLearningConfig ql{cfg.epsilon, cfg.episodes, cfg.horizon, cfg.seed};
      const QFunction q = q_learning(mdp, schedule, ql, observer, ref_value);
      out.value = detail::to_std(q.rowwise().maxCoeff());
      out.policy = greedy_policy_from_q(q).actions();
      out.iterations = cfg.episodes;
    } else if (algo == "lstd") {
      const auto samples = collect_policy_samples(mdp, reference->policy, cfg.steps, cfg.seed, cfg.warmup);
      const auto basis = detail::make_basis(cfg, mdp, reference->policy, StateWeights::uniform(mdp.n_states()));
      const auto res = lstd(samples, basis, mdp.discount(), cfg.lambda);
      out.value = detail::to_std(res.solution.value);
      out.policy = greedy_policy(res.solution.value, mdp).actions();
      out.iterations = res.n_samples;
      out.metrics["regularization"] = res.regularization;
      out.metrics["basis_rank"] = static_cast<double>(basis.rank());
    } else if (algo == "projected" || algo == "pvi") {
      const Policy& pi = reference->policy;
      const StateWeights rho = algo == "pvi" ? steady_state_distribution(mdp, pi) : StateWeights::uniform(mdp.n_states());
      const auto basis = detail::make_basis(cfg, mdp, pi, rho);
      const ProjectedSolution sol = algo == "pvi" ? projected_value_iteration(mdp, pi, basis, cfg.tolerance, cfg.max_iters)
                                                  : solve_projected_bellman(mdp, pi, basis);
      out.value = detail::to_std(sol.value);
      out.policy = greedy_policy(sol.value, mdp).actions();
      out.iterations = sol.iterations;
      out.final_residual = sol.residual;
      out.metrics["basis_rank"] = static_cast<double>(basis.rank());
    } else if (algo == "schultz") {
      const ValueFunction v = schultz_policy_evaluation(mdp, reference->policy, cfg.k_terms);
      out.value = detail::to_std(v);
      out.policy = greedy_policy(v, mdp).actions();
      out.iterations = cfg.k_terms;
    } else if (algo == "rpi") {
      const BasisBuilder builder{detail::builder_kind(cfg.basis), detail::basis_size(cfg, mdp)};
      const RpiReport rpi = representation_policy_iteration(mdp, builder, first_action, cfg.max_rounds);
      detail::fill_solve(out, rpi.report);
    } else if (algo == "kbrl") {
      RandomStream rng(cfg.seed);
      std::vector<Transition> transitions;
      for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        if (mdp.is_terminal(s)) continue;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a)
          for (std::size_t i = 0; i < cfg.samples_per_pair; ++i) transitions.push_back(step(mdp, s, a, rng));
      }
      const auto set = KernelSampleSet::from_transitions(transitions, mdp.n_actions(), inst.coordinates, cfg.bandwidth);
      const double gamma = mdp.discount() < 1.0 ? mdp.discount() : throw UsageError("kbrl needs a discounted instance");
      const KbrlSolution sol = kbrl_solve(set, gamma, cfg.tolerance, cfg.max_iters, cfg.seed);
      // Lift to all states; states outside the sample support (terminals) keep value 0 and action 0.
      std::vector<double> value(mdp.n_states(), 0.0);
      std::vector<std::size_t> policy(mdp.n_states(), 0);
      for (std::size_t i = 0; i < sol.support.size(); ++i) {
        value[sol.support[i]] = sol.value[static_cast<Eigen::Index>(i)];
        policy[sol.support[i]] = sol.policy[i];
      }
      out.value = std::move(value);
      out.policy = std::move(policy);
      out.iterations = sol.iterations;
      out.final_residual = sol.final_residual;
      out.metrics["uniqueness_gap"] = sol.uniqueness_gap;
      out.metrics["support_size"] = static_cast<double>(sol.support.size());
    } else if (algo == "gptd") {
      RandomStream rng(cfg.seed);
      const Trajectory episode = rollout(mdp, reference->policy, random_start_state(mdp, rng), cfg.horizon, rng);
      GptdModel model;
      for (const auto& tr : episode.transitions) model.states.push_back(tr.state);
      model.rewards = Vector(static_cast<Eigen::Index>(episode.size()));
      for (std::size_t t = 0; t < episode.size(); ++t) model.rewards[static_cast<Eigen::Index>(t)] = episode.transitions[t].reward;
      model.gamma = mdp.discount();
      model.kernel = gaussian_state_kernel(inst.coordinates, cfg.bandwidth);
      model.noise = cfg.noise;
      std::vector<std::size_t> all(mdp.n_states());
      std::iota(all.begin(), all.end(), std::size_t{0});
      const GptdPosterior post = gptd_posterior(model, all);
      out.value = detail::to_std(post.mean);
      out.policy = greedy_policy(post.mean, mdp).actions();
      out.iterations = episode.size();
      out.metrics["max_posterior_variance"] = post.variance.maxCoeff();
    }
    out.curve = detail::to_curve(records);

    if (cfg.compare_exact) {
      ExactComparison cmp;
      double err = 0.0;
      std::size_t agree = 0;
      for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        err = std::max(err, std::abs(out.value[s] - reference->value[static_cast<Eigen::Index>(s)]));
        if (out.policy[s] == reference->policy[s]) ++agree;
      }
      cmp.value_error = err;
      cmp.policy_agreement = static_cast<double>(agree) / static_cast<double>(mdp.n_states());
      out.exact = cmp;
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    out.status = "failed";
    out.error = e.what();
  }
  out.wall_seconds = clock.seconds();
  return out;
}

}  // namespace mdptk::bench
