#include "ksatlab/ksatlab.h"

#include <cmath>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "ksatlab/experiment.hpp"
#include "ksatlab/generator.hpp"
#include "ksatlab/solvers.hpp"

struct ksat_instance {
  ksat::CnfInstance value;
};

struct ksat_result {
  ksat_verdict verdict = KSAT_VERDICT_UNKNOWN;
  std::string assignment;
  bool has_assignment = false;
  ksat::solvers::SolverStats stats;
  double seconds = 0.0;
};

namespace {

namespace ex = ksat::experiment;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

ksat_status to_status(ksat::ErrorCode code) {
  switch (code) {
  case ksat::ErrorCode::InvalidArgument:
    return KSAT_ERR_INVALID_ARGUMENT;
  case ksat::ErrorCode::Parse:
    return KSAT_ERR_PARSE;
  case ksat::ErrorCode::Io:
    return KSAT_ERR_IO;
  case ksat::ErrorCode::UndefinedInput:
    return KSAT_ERR_UNDEFINED_INPUT;
  case ksat::ErrorCode::Transport:
    return KSAT_ERR_TRANSPORT;
  case ksat::ErrorCode::Authentication:
    return KSAT_ERR_AUTHENTICATION;
  case ksat::ErrorCode::Schema:
    return KSAT_ERR_SCHEMA;
  case ksat::ErrorCode::Internal:
    return KSAT_ERR_INTERNAL;
  }
  return KSAT_ERR_INTERNAL;
}

ksat_status fail(ksat_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Every entry point funnels through here so no exception crosses the ABI.
template <typename Fn> ksat_status guarded(Fn &&fn) noexcept {
  try {
    g_last_error.clear();
    return fn();
  } catch (const ksat::Error &e) {
    return fail(to_status(e.code()), e.what());
  } catch (const fs::filesystem_error &e) {
    return fail(KSAT_ERR_IO, e.what());
  } catch (const std::bad_alloc &) {
    return fail(KSAT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception &e) {
    return fail(KSAT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(KSAT_ERR_INTERNAL, "unknown failure");
  }
}

#define KSAT_REQUIRE(cond, what)                                                \
  do {                                                                          \
    if (!(cond))                                                                \
      return fail(KSAT_ERR_INVALID_ARGUMENT, what);                             \
  } while (0)

char *duplicate(const std::string &s) {
  auto *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (!out)
    throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ksat_result *make_result(const ksat::solvers::SolverResult &r) {
  auto *out = new ksat_result;
  switch (r.status) {
  case ksat::solvers::Status::Sat:
    out->verdict = KSAT_VERDICT_SAT;
    break;
  case ksat::solvers::Status::Unsat:
    out->verdict = KSAT_VERDICT_UNSAT;
    break;
  case ksat::solvers::Status::Unknown:
    out->verdict = KSAT_VERDICT_UNKNOWN;
    break;
  }
  if (r.assignment) {
    out->assignment = r.assignment->to_string();
    out->has_assignment = true;
  }
  out->stats = r.stats;
  out->seconds = std::chrono::duration<double>(r.elapsed).count();
  return out;
}

} // namespace

extern "C" {

const char *ksat_version(void) { return "1.0.0"; }

const char *ksat_last_error(void) { return g_last_error.c_str(); }

const char *ksat_status_name(ksat_status status) {
  switch (status) {
  case KSAT_OK:
    return "ok";
  case KSAT_ERR_INVALID_ARGUMENT:
    return "invalid argument";
  case KSAT_ERR_PARSE:
    return "parse error";
  case KSAT_ERR_IO:
    return "i/o error";
  case KSAT_ERR_UNDEFINED_INPUT:
    return "undefined input";
  case KSAT_ERR_TRANSPORT:
    return "transport error";
  case KSAT_ERR_AUTHENTICATION:
    return "authentication error";
  case KSAT_ERR_SCHEMA:
    return "schema error";
  case KSAT_ERR_INTERNAL:
    return "internal error";
  }
  return "unknown status";
}

void ksat_string_free(char *text) { std::free(text); }

ksat_status ksat_instance_parse(const char *text, size_t length, ksat_instance **out) {
  return guarded([&] {
    KSAT_REQUIRE(text && out, "text and out must be non-null");
    auto parsed = ksat::parse_dimacs(std::string_view(text, length));
    *out = new ksat_instance{std::move(parsed)};
    return KSAT_OK;
  });
}

ksat_status ksat_instance_load(const char *path, ksat_instance **out) {
  return guarded([&] {
    KSAT_REQUIRE(path && out, "path and out must be non-null");
    auto loaded = ksat::load_dimacs(path);
    *out = new ksat_instance{std::move(loaded)};
    return KSAT_OK;
  });
}

ksat_status ksat_instance_generate(int32_t k, int32_t n_vars, double alpha,
                                   uint64_t seed, ksat_instance **out) {
  return guarded([&] {
    KSAT_REQUIRE(out, "out must be non-null");
    ksat::gen::GeneratorParams params;
    params.k = k;
    params.n_vars = n_vars;
    params.alpha = alpha;
    params.seed = seed;
    *out = new ksat_instance{ksat::gen::generate_instance(params)};
    return KSAT_OK;
  });
}

void ksat_instance_free(ksat_instance *instance) { delete instance; }

int32_t ksat_instance_num_vars(const ksat_instance *instance) {
  return instance ? instance->value.n_vars : 0;
}

size_t ksat_instance_num_clauses(const ksat_instance *instance) {
  return instance ? instance->value.num_clauses() : 0;
}

int32_t ksat_instance_k(const ksat_instance *instance) {
  return instance ? instance->value.k() : 0;
}

int ksat_instance_seed(const ksat_instance *instance, uint64_t *seed) {
  if (!instance || !seed || !instance->value.seed)
    return 0;
  *seed = *instance->value.seed;
  return 1;
}

ksat_status ksat_instance_to_dimacs(const ksat_instance *instance, char **out) {
  return guarded([&] {
    KSAT_REQUIRE(instance && out, "instance and out must be non-null");
    *out = duplicate(ksat::serialize_dimacs(instance->value));
    return KSAT_OK;
  });
}

ksat_status ksat_count_unsatisfied(const ksat_instance *instance, const char *bits,
                                   size_t *count) {
  return guarded([&] {
    KSAT_REQUIRE(instance && bits && count, "instance, bits and count must be non-null");
    auto assignment = ksat::Assignment::from_string(bits);
    *count = ksat::count_unsatisfied(instance->value, assignment);
    return KSAT_OK;
  });
}

void ksat_solve_options_init(ksat_solve_options *options) {
  if (!options)
    return;
  const ksat::solvers::WalkSatParams walksat;
  options->solver = KSAT_SOLVER_DPLL;
  options->budget = 0;
  options->noise = walksat.noise;
  options->max_flips = 0;
  options->max_tries = walksat.max_tries;
  options->seed = 0;
}

ksat_status ksat_solve(const ksat_instance *instance, const ksat_solve_options *options,
                       ksat_result **out) {
  return guarded([&] {
    KSAT_REQUIRE(instance && out, "instance and out must be non-null");
    ksat_solve_options opts;
    ksat_solve_options_init(&opts);
    if (options)
      opts = *options;
    const auto &cnf = instance->value;
    namespace sv = ksat::solvers;
    switch (opts.solver) {
    case KSAT_SOLVER_DPLL:
      *out = make_result(
          sv::solve_dpll(cnf, opts.budget ? opts.budget : sv::kDefaultDecisionBudget));
      return KSAT_OK;
    case KSAT_SOLVER_BRUTE:
      *out = make_result(sv::solve_brute_force(cnf));
      return KSAT_OK;
    case KSAT_SOLVER_WALKSAT: {
      sv::WalkSatParams params;
      params.noise = opts.noise;
      params.max_flips = opts.max_flips;
      params.max_tries = opts.max_tries;
      params.seed = opts.seed;
      *out = make_result(sv::solve_walksat(cnf, params));
      return KSAT_OK;
    }
    case KSAT_SOLVER_RANDOM: {
      const auto start = std::chrono::steady_clock::now();
      auto guess = sv::random_oracle(cnf, opts.seed);
      auto *result = new ksat_result;
      result->verdict =
          ksat::is_satisfying(cnf, guess) ? KSAT_VERDICT_SAT : KSAT_VERDICT_UNKNOWN;
      result->assignment = guess.to_string();
      result->has_assignment = true;
      result->seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
      *out = result;
      return KSAT_OK;
    }
    }
    return fail(KSAT_ERR_INVALID_ARGUMENT, "unknown solver");
  });
}

void ksat_result_free(ksat_result *result) { delete result; }

ksat_verdict ksat_result_verdict(const ksat_result *result) {
  return result ? result->verdict : KSAT_VERDICT_UNKNOWN;
}

const char *ksat_result_assignment(const ksat_result *result) {
  return result && result->has_assignment ? result->assignment.c_str() : nullptr;
}

uint64_t ksat_result_decisions(const ksat_result *result) {
  return result ? result->stats.decisions : 0;
}

uint64_t ksat_result_flips(const ksat_result *result) {
  return result ? result->stats.flips : 0;
}

double ksat_result_seconds(const ksat_result *result) {
  return result ? result->seconds : 0.0;
}

ksat_status ksat_generate_suite(const ksat_gen_options *options, const char *out_dir,
                                size_t *files_written) {
  return guarded([&] {
    KSAT_REQUIRE(options && out_dir, "options and out_dir must be non-null");
    KSAT_REQUIRE(options->k >= 1, "k must be >= 1");
    KSAT_REQUIRE(options->n_vars >= options->k, "n must be >= k");
    KSAT_REQUIRE(options->samples >= 1, "samples must be >= 1");
    KSAT_REQUIRE(std::isfinite(options->alpha_step) && options->alpha_step > 0,
                 "alpha step must be > 0");
    KSAT_REQUIRE(options->alpha_from >= 0 && options->alpha_to >= options->alpha_from,
                 "alpha range must satisfy 0 <= from <= to");
    auto grid = ksat::gen::alpha_grid(options->alpha_from, options->alpha_to,
                                      options->alpha_step);
    KSAT_REQUIRE(!grid.empty(), "alpha grid has no positive points");
    auto suite = ksat::gen::generate_sweep_suite(options->k, options->n_vars, grid,
                                                 options->samples, options->seed);
    auto n = ksat::gen::write_suite(suite, out_dir);
    if (files_written)
      *files_written = n;
    return KSAT_OK;
  });
}

void ksat_sweep_options_init(ksat_sweep_options *options) {
  if (!options)
    return;
  options->oracle = "dpll";
  options->model_config_path = nullptr;
  options->replay_dir = nullptr;
  options->jobs = 1;
  options->seed = 0;
  options->dpll_budget = 0;
  options->baseline = 1;
  options->spend_money_acknowledged = 0;
}

ksat_status ksat_run_sweep(const char *suite_dir, const ksat_sweep_options *options,
                           const char *out_dir, ksat_sweep_summary *summary) {
  return guarded([&] {
    KSAT_REQUIRE(suite_dir && options && out_dir,
                 "suite_dir, options and out_dir must be non-null");
    KSAT_REQUIRE(options->oracle, "oracle must be set");
    ex::SweepConfig config;
    config.oracle = ex::oracle_kind_from_string(options->oracle);
    config.seed = options->seed;
    config.jobs = options->jobs ? options->jobs : 1;
    config.baseline = options->baseline != 0;
    if (options->dpll_budget)
      config.dpll_budget = options->dpll_budget;
    if (options->model_config_path && *options->model_config_path)
      config.model = ksat::llm::load_model_config(options->model_config_path);

    const fs::path out(out_dir);
    switch (config.oracle) {
    case ex::OracleKind::Model:
      KSAT_REQUIRE(options->spend_money_acknowledged,
                   "the model oracle issues paid requests; acknowledge with "
                   "--i-will-spend-money");
      config.jobs = 1;
      config.transcript_dir = out / "transcripts";
      break;
    case ex::OracleKind::Replay:
      KSAT_REQUIRE(options->replay_dir && *options->replay_dir,
                   "the replay oracle needs a replay directory");
      config.replay_dir = options->replay_dir;
      config.transcript_dir = out / "transcripts";
      break;
    default:
      break;
    }

    auto suites = ksat::gen::load_suites(suite_dir);
    KSAT_REQUIRE(!suites.empty(),
                 std::string("no k<K>_n<N> suite found below ") + suite_dir);

    std::vector<ex::SweepOutput> outputs;
    std::optional<std::pair<ksat::ErrorCode, std::string>> error;
    for (const auto &suite : suites) {
      outputs.push_back(ex::run_sweep(suite, config));
      if (const auto &last = outputs.back(); last.error) {
        error.emplace(last.error_code,
                      ksat::gen::suite_dir_name(suite.k, suite.n_vars) + ": " + *last.error);
        break;
      }
    }
    auto results = ex::collect_results(outputs, std::string(ex::to_string(config.oracle)));
    if (!results.records.empty()) {
      ex::export_results(results, out);
      ex::emit_plots(results, out, config.thresholds);
    }
    if (summary) {
      summary->suites = outputs.size();
      summary->records = results.records.size();
      summary->points = results.points.size();
      summary->stopped = results.stopped_at_alpha.empty() ? 0 : 1;
      summary->stopped_at_alpha =
          results.stopped_at_alpha.empty() ? 0.0 : results.stopped_at_alpha.rbegin()->second;
    }
    if (error)
      return fail(to_status(error->first), error->second);
    return KSAT_OK;
  });
}

ksat_status ksat_report(const char *in_dir, const char *out_dir, size_t *files_written) {
  return guarded([&] {
    KSAT_REQUIRE(in_dir && out_dir, "in_dir and out_dir must be non-null");
    auto results = ex::load_results(in_dir);
    std::size_t n = 0;
    const fs::path out(out_dir);
    n += ex::export_results(results, out).size();
    n += ex::emit_plots(results, out).size();
    if (files_written)
      *files_written = n;
    return KSAT_OK;
  });
}

} // extern "C"
