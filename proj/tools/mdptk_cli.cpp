// mdptk command-line tool: generate instances, run solvers/learners, compare methods.
//
// Exit status: 0 success, 1 solver failure, 2 usage/config error, 3 I/O or parse error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdptk/bench/experiment.hpp"

namespace {

using namespace mdptk;
using namespace mdptk::bench;

constexpr int kExitOk = 0;
constexpr int kExitSolverFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string env_kind;
  std::string mdp_file;
  std::size_t n_states = 5;
  std::size_t width = 4;
  std::size_t height = 4;
  std::size_t n_actions = 2;
  double slip = 0.0;
  double gamma = 0.9;
  bool episodic = false;
  std::uint64_t env_seed = 0;
  bool env_seed_set = false;
  std::string out;
  std::string curve;
};

void add_instance_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--env", o.env_kind, "Generated environment: chain, grid, random");
  cmd->add_option("--mdp-file", o.mdp_file, "Load the MDP from a file instead");
  cmd->add_option("--n", o.n_states, "Number of states (chain, random)");
  cmd->add_option("--width", o.width, "Grid width");
  cmd->add_option("--height", o.height, "Grid height");
  cmd->add_option("--actions", o.n_actions, "Number of actions (random)");
  cmd->add_option("--slip", o.slip, "Slip probability");
  cmd->add_option("--gamma", o.gamma, "Discount factor");
  cmd->add_flag("--episodic", o.episodic, "Stochastic shortest path variant with a terminal goal");
  cmd->add_option("--env-seed", o.env_seed, "Seed for random instances (defaults to --seed)");
  cmd->add_option("--out", o.out, "Output file (stdout when omitted)");
}

std::string resolve_output(const std::string& path) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  if (const char* dir = std::getenv("MDPTK_OUTPUT_DIR"); dir && *dir) return (std::filesystem::path(dir) / p).string();
  return path;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  const auto resolved = resolve_output(path);
  std::ofstream f(resolved);
  if (!f) throw IoError("cannot open '" + resolved + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + resolved + "'");
}

void fill_instance(ExperimentConfig& cfg, const CommonOptions& o, std::uint64_t seed) {
  if (!o.env_kind.empty() && !o.mdp_file.empty()) throw UsageError("use either --env or --mdp-file, not both");
  if (o.env_kind.empty() && o.mdp_file.empty()) throw UsageError("one of --env or --mdp-file is required");
  if (!o.mdp_file.empty()) {
    cfg.mdp_file = o.mdp_file;
    return;
  }
  EnvSpec spec;
  spec.kind = parse_env_kind(o.env_kind);
  spec.n_states = o.n_states;
  spec.width = o.width;
  spec.height = o.height;
  spec.n_actions = o.n_actions;
  spec.slip = o.slip;
  spec.discount = o.gamma;
  spec.episodic = o.episodic;
  spec.seed = o.env_seed_set ? o.env_seed : seed;
  cfg.env = spec;
}

int finish_run(const RunReport& report, const CommonOptions& o) {
  write_text(o.out, serialize_report(report));
  if (!o.curve.empty()) {
    std::ostringstream csv;
    write_curve_csv(report.curve, csv);
    write_text(o.curve, csv.str());
  }
  if (!report.ok()) {
    std::cerr << "mdptk: " << report.algorithm << " failed: " << report.error << "\n";
    return kExitSolverFailure;
  }
  return kExitOk;
}

void require_algorithm(const std::string& verb, const std::string& algo, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (algo == a) return;
  std::string msg = "'" + verb + "' does not run algorithm '" + algo + "' (choose from";
  for (const char* a : allowed) msg += std::string(" ") + a;
  throw UsageError(msg + ")");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string compare_table(const ExperimentConfig& base, const std::vector<std::string>& methods, std::size_t trials) {
  struct Job {
    std::string method;
    std::size_t trial;
    ExperimentConfig cfg;
  };
  std::vector<Job> jobs;
  for (const auto& m : methods)
    for (std::size_t t = 0; t < trials; ++t) {
      ExperimentConfig cfg = base;
      cfg.algorithm = m;
      cfg.seed = base.seed + t;
      cfg.compare_exact = true;
      validate_config(cfg);
      jobs.push_back(Job{m, t, std::move(cfg)});
    }
  // One seeded stream per trial; rows are assembled in job order.
  std::vector<std::future<RunReport>> futures;
  for (const auto& job : jobs)
    futures.push_back(std::async(std::launch::async, [cfg = job.cfg] { return run_experiment(cfg); }));
  std::ostringstream os;
  os << std::setprecision(17);
  os << "method,trial,seed,status,value_error,policy_agreement,iterations,wall_seconds\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const RunReport r = futures[i].get();
    os << jobs[i].method << ',' << jobs[i].trial << ',' << r.seed << ',' << r.status << ',';
    if (r.exact)
      os << r.exact->value_error << ',' << r.exact->policy_agreement;
    else
      os << ',';
    os << ',' << r.iterations << ',' << r.wall_seconds << '\n';
  }
  return os.str();
}

int run(int argc, char** argv) {
  CLI::App app{"mdptk: exact and approximate solvers for finite Markov decision processes"};
  app.require_subcommand(1);

  CommonOptions o;
  ExperimentConfig cfg;
  std::string schedule = "harmonic";
  std::string methods = "vi,pi,lp";
  std::size_t trials = 1;

  auto add_run_options = [&](CLI::App* cmd, const std::string& default_algo) {
    add_instance_options(cmd, o);
    cmd->add_option("--algo", cfg.algorithm, "Algorithm")->default_val(default_algo);
    cmd->add_option("--seed", cfg.seed, "Seed for every random stream");
    cmd->add_option("--tol", cfg.tolerance, "Tolerance (eps' for value iteration)");
    cmd->add_option("--max-iters", cfg.max_iters, "Iteration limit");
    cmd->add_flag("--compare-exact", cfg.compare_exact, "Also run value iteration and record the error");
  };
  auto add_learning_options = [&](CLI::App* cmd) {
    cmd->add_option("--lambda", cfg.lambda, "Trace decay lambda");
    cmd->add_option("--epsilon", cfg.epsilon, "Exploration rate for Q-learning");
    cmd->add_option("--alpha0", cfg.alpha0, "Initial learning rate");
    cmd->add_option("--schedule", schedule, "Learning rate schedule: constant or harmonic");
    cmd->add_option("--episodes", cfg.episodes, "Number of episodes");
    cmd->add_option("--horizon", cfg.horizon, "Steps per episode");
    cmd->add_option("--steps", cfg.steps, "Sample budget for lstd");
    cmd->add_option("--warmup", cfg.warmup, "Discarded initial steps for lstd sampling");
    cmd->add_option("--curve", o.curve, "Write the learning curve CSV here");
  };
  auto add_basis_options = [&](CLI::App* cmd) {
    cmd->add_option("--basis", cfg.basis, "identity, krylov, bebf or aggregation");
    cmd->add_option("--k", cfg.k, "Basis size (0: min(|S|,10))");
    cmd->add_option("--k-terms", cfg.k_terms, "Schultz expansion factors");
    cmd->add_option("--max-rounds", cfg.max_rounds, "Round limit for representation policy iteration");
  };
  auto add_kernel_options = [&](CLI::App* cmd) {
    cmd->add_option("--bandwidth", cfg.bandwidth, "Kernel bandwidth / length scale");
    cmd->add_option("--noise", cfg.noise, "GPTD observation noise");
    cmd->add_option("--samples-per-pair", cfg.samples_per_pair, "KBRL samples per (state, action)");
    cmd->add_option("--horizon", cfg.horizon, "GPTD episode length limit");
  };

  auto* gen = app.add_subcommand("gen", "Generate an MDP file");
  add_instance_options(gen, o);
  gen->add_option("--seed", cfg.seed, "Seed for random instances");

  auto* solve = app.add_subcommand("solve", "Exact solvers: vi, pi, lp");
  add_run_options(solve, "vi");

  auto* learn = app.add_subcommand("learn", "Sample-based learners: td, q_learning, lstd");
  add_run_options(learn, "q_learning");
  add_learning_options(learn);
  learn->add_option("--basis", cfg.basis, "Feature basis for lstd");
  learn->add_option("--k", cfg.k, "Basis size for lstd");

  auto* basis = app.add_subcommand("basis", "Basis methods: projected, pvi, schultz, rpi");
  add_run_options(basis, "rpi");
  add_basis_options(basis);

  auto* kernel = app.add_subcommand("kernel", "Kernel methods: kbrl, gptd");
  add_run_options(kernel, "kbrl");
  add_kernel_options(kernel);

  auto* compare = app.add_subcommand("compare", "Run several methods on one instance and tabulate errors");
  add_run_options(compare, "vi");
  add_learning_options(compare);
  add_basis_options(compare);
  compare->add_option("--bandwidth", cfg.bandwidth, "Kernel bandwidth");
  compare->add_option("--methods", methods, "Comma-separated algorithm list");
  compare->add_option("--trials", trials, "Independent seeded trials per method");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  for (auto* cmd : {gen, solve, learn, basis, kernel, compare})
    if (cmd->parsed() && cmd->count("--env-seed") > 0) o.env_seed_set = true;

  try {
    if (schedule == "constant")
      cfg.schedule = ScheduleKind::Constant;
    else if (schedule == "harmonic")
      cfg.schedule = ScheduleKind::HarmonicPerVisit;
    else
      throw UsageError("unknown schedule '" + schedule + "'");
    fill_instance(cfg, o, cfg.seed);

    if (gen->parsed()) {
      if (!cfg.env) throw UsageError("gen needs --env");
      std::ostringstream os;
      save_mdp(generate_env(*cfg.env).mdp, os);
      write_text(o.out, os.str());
      return kExitOk;
    }
    if (compare->parsed()) {
      const auto list = split_list(methods);
      if (list.empty() || trials == 0) throw UsageError("compare needs at least one method and one trial");
      write_text(o.out, compare_table(cfg, list, trials));
      return kExitOk;
    }
    if (solve->parsed()) require_algorithm("solve", cfg.algorithm, {"vi", "pi", "lp"});
    if (learn->parsed()) require_algorithm("learn", cfg.algorithm, {"td", "q_learning", "lstd"});
    if (basis->parsed()) require_algorithm("basis", cfg.algorithm, {"projected", "pvi", "schultz", "rpi"});
    if (kernel->parsed()) require_algorithm("kernel", cfg.algorithm, {"kbrl", "gptd"});
    return finish_run(run_experiment(cfg), o);
  } catch (const UsageError& e) {
    std::cerr << "mdptk: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "mdptk: parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "mdptk: invalid MDP: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "mdptk: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "mdptk: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    // load_mdp reports unreadable files as runtime_error
    std::cerr << "mdptk: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
