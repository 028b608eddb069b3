// Command-line front end. Talks to the library only through ksatlab.h.
//
// Exit codes: 0 success (UNSAT is an answer), 1 domain error, 2 usage error.

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ksatlab/ksatlab.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

int report_failure(ksat_status status) {
  std::cerr << "error: " << ksat_status_name(status) << ": " << ksat_last_error() << "\n";
  return kExitDomain;
}

struct InstanceDeleter {
  void operator()(ksat_instance *p) const { ksat_instance_free(p); }
};
struct ResultDeleter {
  void operator()(ksat_result *p) const { ksat_result_free(p); }
};
using InstancePtr = std::unique_ptr<ksat_instance, InstanceDeleter>;
using ResultPtr = std::unique_ptr<ksat_result, ResultDeleter>;

struct GenArgs {
  int k = 3;
  int n = 10;
  double alpha_from = 0.0;
  double alpha_to = 0.0;
  double alpha_step = 0.2;
  std::size_t samples = 10;
  std::uint64_t seed = 0;
  std::string out;
};

struct SolveArgs {
  std::string solver = "dpll";
  std::string in;
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  double noise = 0.5;
  std::uint64_t max_flips = 0;
  std::uint64_t max_tries = 10;
};

struct VerifyArgs {
  std::string cnf;
  std::string assignment;
};

struct SweepArgs {
  std::string suite;
  std::string oracle;
  std::string model_config;
  std::string replay_dir;
  std::string out;
  unsigned jobs = 1;
  std::uint64_t seed = 0;
  std::uint64_t budget = 0;
  bool no_baseline = false;
  bool spend_money = false;
};

struct ReportArgs {
  std::string in;
  std::string out;
};

int run_gen(const GenArgs &a) {
  if (a.alpha_to < a.alpha_from)
    throw CLI::ValidationError("--alpha-to", "must be >= --alpha-from");
  if (a.n < a.k)
    throw CLI::ValidationError("--n", "must be >= --k");
  ksat_gen_options opts{a.k, a.n, a.alpha_from, a.alpha_to, a.alpha_step, a.samples, a.seed};
  std::size_t written = 0;
  if (auto st = ksat_generate_suite(&opts, a.out.c_str(), &written); st != KSAT_OK)
    return report_failure(st);
  std::cout << "wrote " << written << " instances to " << a.out << "\n";
  return kExitOk;
}

ksat_solver solver_from_name(const std::string &name) {
  if (name == "walksat")
    return KSAT_SOLVER_WALKSAT;
  if (name == "brute")
    return KSAT_SOLVER_BRUTE;
  if (name == "random")
    return KSAT_SOLVER_RANDOM;
  return KSAT_SOLVER_DPLL;
}

int run_solve(const SolveArgs &a) {
  ksat_instance *raw = nullptr;
  if (auto st = ksat_instance_load(a.in.c_str(), &raw); st != KSAT_OK)
    return report_failure(st);
  InstancePtr instance(raw);

  ksat_solve_options opts;
  ksat_solve_options_init(&opts);
  opts.solver = solver_from_name(a.solver);
  opts.budget = a.budget;
  opts.seed = a.seed;
  opts.noise = a.noise;
  opts.max_flips = a.max_flips;
  opts.max_tries = a.max_tries;

  ksat_result *res_raw = nullptr;
  if (auto st = ksat_solve(instance.get(), &opts, &res_raw); st != KSAT_OK)
    return report_failure(st);
  ResultPtr result(res_raw);
  switch (ksat_result_verdict(result.get())) {
  case KSAT_VERDICT_SAT:
    std::cout << "SAT " << ksat_result_assignment(result.get()) << "\n";
    break;
  case KSAT_VERDICT_UNSAT:
    std::cout << "UNSAT\n";
    break;
  case KSAT_VERDICT_UNKNOWN:
    std::cout << "UNKNOWN\n";
    if (const char *guess = ksat_result_assignment(result.get()))
      std::cout << "c guess " << guess << "\n";
    break;
  }
  return kExitOk;
}

std::string trim(const std::string &s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos)
    return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

// A literal bit string, or a file holding one bit string per line.
std::vector<std::string> assignments_from(const std::string &arg) {
  if (!arg.empty() && arg.find_first_not_of("01") == std::string::npos)
    return {arg};
  std::ifstream in(arg);
  if (!in)
    throw CLI::ValidationError("--assignment",
                               "neither a {0,1} string nor a readable file: " + arg);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (auto t = trim(line); !t.empty())
      out.push_back(t);
  if (out.empty())
    throw CLI::ValidationError("--assignment", "file holds no assignment: " + arg);
  return out;
}

int run_verify(const VerifyArgs &a) {
  const auto assignments = assignments_from(a.assignment);
  ksat_instance *raw = nullptr;
  if (auto st = ksat_instance_load(a.cnf.c_str(), &raw); st != KSAT_OK)
    return report_failure(st);
  InstancePtr instance(raw);
  for (const auto &bits : assignments) {
    std::size_t unsat = 0;
    if (auto st = ksat_count_unsatisfied(instance.get(), bits.c_str(), &unsat);
        st != KSAT_OK) {
      std::cerr << "error: " << ksat_status_name(st) << ": " << ksat_last_error() << "\n";
      return kExitDomain;
    }
    if (unsat == 0) {
      std::cout << "SAT\n";
    } else {
      std::cout << "UNSAT\n";
      std::cout << "c unsatisfied " << unsat << " of "
                << ksat_instance_num_clauses(instance.get()) << "\n";
    }
  }
  return kExitOk;
}

int run_sweep(const SweepArgs &a) {
  if (a.oracle == "model" && !a.spend_money)
    throw CLI::ValidationError("--i-will-spend-money",
                               "required with --oracle model: the sweep sends paid "
                               "requests to the configured endpoint");
  if (a.oracle == "replay" && a.replay_dir.empty())
    throw CLI::ValidationError("--replay-dir", "required with --oracle replay");
  ksat_sweep_options opts;
  ksat_sweep_options_init(&opts);
  opts.oracle = a.oracle.c_str();
  opts.model_config_path = a.model_config.empty() ? nullptr : a.model_config.c_str();
  opts.replay_dir = a.replay_dir.empty() ? nullptr : a.replay_dir.c_str();
  opts.jobs = a.oracle == "model" ? 1 : a.jobs;
  opts.seed = a.seed;
  opts.dpll_budget = a.budget;
  opts.baseline = a.no_baseline ? 0 : 1;
  opts.spend_money_acknowledged = a.spend_money ? 1 : 0;

  ksat_sweep_summary summary{};
  const auto st = ksat_run_sweep(a.suite.c_str(), &opts, a.out.c_str(), &summary);
  std::cout << "suites " << summary.suites << ", records " << summary.records
            << ", points " << summary.points << "\n";
  if (summary.stopped)
    std::cout << "stopped at alpha " << summary.stopped_at_alpha
              << ": every instance was refused\n";
  if (st != KSAT_OK) {
    std::cerr << "error: " << ksat_status_name(st) << ": " << ksat_last_error() << "\n";
    std::cerr << "partial results written to " << a.out << "\n";
    return kExitDomain;
  }
  return kExitOk;
}

int run_report(const ReportArgs &a) {
  std::size_t written = 0;
  if (auto st = ksat_report(a.in.c_str(), a.out.c_str(), &written); st != KSAT_OK)
    return report_failure(st);
  std::cout << "wrote " << written << " files to " << a.out << "\n";
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Random K-SAT phase-transition lab", "ksatlab"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read flags from a TOML/INI file ([sub] sections)");
  app.set_version_flag("--version", std::string(ksat_version()));

  GenArgs gen;
  auto *g = app.add_subcommand("gen", "Generate a seeded random K-SAT suite");
  g->add_option("--k", gen.k, "Literals per clause")->required()->check(CLI::Range(1, 64));
  g->add_option("--n", gen.n, "Number of variables")->required()->check(CLI::PositiveNumber);
  g->add_option("--alpha-from", gen.alpha_from, "First clause density")
      ->required()
      ->check(CLI::NonNegativeNumber);
  g->add_option("--alpha-to", gen.alpha_to, "Last clause density (inclusive)")
      ->required()
      ->check(CLI::NonNegativeNumber);
  g->add_option("--alpha-step", gen.alpha_step, "Density increment")
      ->required()
      ->check(CLI::PositiveNumber);
  g->add_option("--samples", gen.samples, "Instances per density")
      ->required()
      ->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Base seed")->required();
  g->add_option("--out", gen.out, "Output directory")->required();

  SolveArgs solve;
  auto *s = app.add_subcommand("solve", "Solve one DIMACS instance");
  s->add_option("--solver", solve.solver, "Solver")
      ->required()
      ->check(CLI::IsMember({"dpll", "walksat", "brute", "random"}));
  s->add_option("--in", solve.in, "DIMACS file")->required()->check(CLI::ExistingFile);
  s->add_option("--budget", solve.budget, "DPLL decision budget (0 = default)");
  s->add_option("--seed", solve.seed, "Seed for walksat and random")->capture_default_str();
  s->add_option("--noise", solve.noise, "WalkSAT noise probability")->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  s->add_option("--max-flips", solve.max_flips, "WalkSAT flips per try (0 = 100*N*ceil(alpha))");
  s->add_option("--max-tries", solve.max_tries, "WalkSAT restarts")->capture_default_str()
      ->check(CLI::PositiveNumber);

  VerifyArgs verify;
  auto *v = app.add_subcommand("verify", "Check an assignment against an instance");
  v->add_option("--cnf", verify.cnf, "DIMACS file")->required()->check(CLI::ExistingFile);
  v->add_option("--assignment", verify.assignment,
                "{0,1} string, or a file with one string per line")
      ->required();

  SweepArgs sweep;
  auto *w = app.add_subcommand("sweep", "Evaluate an oracle over a generated suite");
  w->add_option("--suite", sweep.suite, "Suite directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  w->add_option("--oracle", sweep.oracle, "Oracle")
      ->required()
      ->check(CLI::IsMember({"dpll", "walksat", "random", "model", "replay"}));
  w->add_option("--model-config", sweep.model_config, "Model endpoint config (JSON)")
      ->check(CLI::ExistingFile);
  w->add_option("--replay-dir", sweep.replay_dir, "Transcript directory to replay")
      ->check(CLI::ExistingDirectory);
  w->add_option("--out", sweep.out, "Output directory")->required();
  w->add_option("--jobs", sweep.jobs, "Worker threads for local oracles")->capture_default_str()
      ->check(CLI::Range(1u, 256u));
  w->add_option("--seed", sweep.seed, "Seed for walksat and random")->capture_default_str();
  w->add_option("--budget", sweep.budget, "DPLL decision budget (0 = default)");
  w->add_flag("--no-baseline", sweep.no_baseline, "Skip the DPLL reference series");
  w->add_flag("--i-will-spend-money", sweep.spend_money,
              "Acknowledge that --oracle model sends paid requests");

  ReportArgs report;
  auto *r = app.add_subcommand("report", "Re-aggregate sweep output and draw plots");
  r->add_option("--in", report.in, "Sweep output directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  r->add_option("--out", report.out, "Report directory")->required();

  try {
    app.parse(argc, argv);
    if (*g)
      return run_gen(gen);
    if (*s)
      return run_solve(solve);
    if (*v)
      return run_verify(verify);
    if (*w)
      return run_sweep(sweep);
    return run_report(report);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }
}
