#include "ksatlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <tuple>

#include "ksatlab/rng.hpp"

namespace fs = std::filesystem;

namespace ksat::experiment {

ThresholdTable::ThresholdTable() : values_{{2, 1.0}, {3, 4.267}, {4, 9.931}} {}

double ThresholdTable::at(std::int32_t k) const {
  auto it = values_.find(k);
  if (it == values_.end())
    throw Error(ErrorCode::InvalidArgument,
                "no satisfiability threshold known for K=" + std::to_string(k));
  return it->second;
}

double random_baseline(std::int32_t k) { return std::ldexp(1.0, -k); }

std::string_view to_string(OutcomeKind kind) {
  switch (kind) {
  case OutcomeKind::Assignment:
    return "ASSIGNMENT";
  case OutcomeKind::Refusal:
    return "REFUSAL";
  case OutcomeKind::Unparseable:
    return "UNPARSEABLE";
  case OutcomeKind::Solved:
    return "SOLVED";
  case OutcomeKind::Unsat:
    return "UNSAT";
  case OutcomeKind::Unknown:
    return "UNKNOWN";
  }
  return "UNPARSEABLE";
}

OutcomeKind outcome_kind_from_string(std::string_view text) {
  for (auto kind : {OutcomeKind::Assignment, OutcomeKind::Refusal,
                    OutcomeKind::Unparseable, OutcomeKind::Solved,
                    OutcomeKind::Unsat, OutcomeKind::Unknown})
    if (to_string(kind) == text)
      return kind;
  throw Error(ErrorCode::Parse, "unknown outcome '" + std::string(text) + "'");
}

OracleOutcome OracleOutcome::from_solver(const solvers::SolverResult &result) {
  OracleOutcome o;
  switch (result.status) {
  case solvers::Status::Sat:
    o.kind = OutcomeKind::Solved;
    o.assignment = result.assignment;
    o.text = result.assignment ? result.assignment->to_string() : "";
    break;
  case solvers::Status::Unsat:
    o.kind = OutcomeKind::Unsat;
    break;
  case solvers::Status::Unknown:
    o.kind = OutcomeKind::Unknown;
    break;
  }
  return o;
}

OracleOutcome OracleOutcome::from_model(const llm::InstanceOutcome &outcome,
                                        std::vector<std::string> solver_calls) {
  OracleOutcome o;
  switch (outcome.kind) {
  case llm::OutcomeKind::Assignment:
    o.kind = OutcomeKind::Assignment;
    break;
  case llm::OutcomeKind::Refusal:
    o.kind = OutcomeKind::Refusal;
    break;
  case llm::OutcomeKind::Unparseable:
    o.kind = OutcomeKind::Unparseable;
    break;
  }
  o.assignment = outcome.assignment;
  o.text = outcome.text;
  o.solver_calls = std::move(solver_calls);
  return o;
}

OracleOutcome OracleOutcome::from_assignment(Assignment assignment) {
  OracleOutcome o;
  o.kind = OutcomeKind::Assignment;
  o.text = assignment.to_string();
  o.assignment = std::move(assignment);
  return o;
}

EvalRecord evaluate_instance(const CnfInstance &instance, const InstanceId &id,
                             std::string oracle, const OracleOutcome &outcome) {
  EvalRecord r;
  r.id = id;
  r.oracle = std::move(oracle);
  r.outcome = outcome.kind;
  r.m = instance.num_clauses();
  r.solver_calls = outcome.solver_calls;
  // Anything that hands back an assignment asserts that it satisfies the
  // formula; that is what the protocol asks for.
  r.claimed_sat = outcome.kind == OutcomeKind::Assignment ||
                  outcome.kind == OutcomeKind::Solved;
  if (outcome.assignment) {
    if (outcome.assignment->size() != static_cast<std::size_t>(instance.n_vars))
      throw Error(ErrorCode::InvalidArgument,
                  "outcome assignment has length " +
                      std::to_string(outcome.assignment->size()) +
                      " for an instance with N=" + std::to_string(instance.n_vars));
    r.unsat_count = count_unsatisfied(instance, *outcome.assignment);
    r.verified_sat = r.unsat_count == 0;
    if (r.m > 0)
      r.h = static_cast<double>(r.unsat_count) / static_cast<double>(r.m);
  }
  return r;
}

namespace {

struct MeanErr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Sorting first makes the floating-point sums independent of input order.
MeanErr mean_stderr(std::vector<double> xs) {
  MeanErr out;
  if (xs.empty())
    return out;
  std::sort(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs)
    sum += x;
  const auto n = static_cast<double>(xs.size());
  out.mean = sum / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs)
      ss += (x - out.mean) * (x - out.mean);
    out.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

} // namespace

SweepPoint aggregate_point(std::span<const EvalRecord> records,
                           const ThresholdTable &thresholds,
                           const AggregateOptions &options) {
  if (records.empty())
    throw Error(ErrorCode::InvalidArgument, "cannot aggregate zero records");
  const auto &first = records.front().id;
  SweepPoint p;
  p.k = first.k;
  p.n = first.n;
  p.alpha = first.alpha;
  p.n_samples = records.size();
  p.single_sample = records.size() == 1;
  p.random_baseline = random_baseline(p.k);
  if (thresholds.contains(p.k))
    p.alpha_s = thresholds.at(p.k);

  std::vector<double> verified, claimed, h;
  for (const auto &r : records) {
    if (r.id.k != p.k || r.id.n != p.n || r.id.alpha != p.alpha)
      throw Error(ErrorCode::InvalidArgument,
                  "records of one point must share k, n and alpha");
    verified.push_back(r.verified_sat ? 1.0 : 0.0);
    claimed.push_back(r.claimed_sat ? 1.0 : 0.0);
    if (r.h)
      h.push_back(*r.h);
    else
      ++p.h_missing;
    if (r.outcome == OutcomeKind::Refusal)
      ++p.refusal_count;
  }
  auto v = mean_stderr(std::move(verified));
  auto c = mean_stderr(std::move(claimed));
  p.p_sat_mean = v.mean;
  p.p_sat_stderr = v.stderr_;
  p.claimed_mean = c.mean;
  p.claimed_stderr = c.stderr_;
  p.h_samples = h.size();
  if (!h.empty()) {
    auto hs = mean_stderr(std::move(h));
    p.h_mean = hs.mean;
    p.h_stderr = hs.stderr_;
    p.below_random = hs.mean + options.sigma * hs.stderr_ < p.random_baseline;
  }
  return p;
}

std::map<std::string, std::vector<SweepPoint>>
aggregate_by_oracle(std::span<const EvalRecord> records,
                    const ThresholdTable &thresholds,
                    const AggregateOptions &options) {
  using Key = std::tuple<std::string, std::int32_t, std::int32_t, double>;
  std::map<Key, std::vector<EvalRecord>> groups;
  for (const auto &r : records)
    groups[Key{r.oracle, r.id.k, r.id.n, r.id.alpha}].push_back(r);
  std::map<std::string, std::vector<SweepPoint>> out;
  for (const auto &[key, group] : groups)
    out[std::get<0>(key)].push_back(aggregate_point(group, thresholds, options));
  return out;
}

std::optional<double> crossing_alpha(std::span<const SweepPoint> points,
                                     double level) {
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto &a = points[i - 1];
    const auto &b = points[i];
    if (a.p_sat_mean >= level && b.p_sat_mean < level) {
      double t = (a.p_sat_mean - level) / (a.p_sat_mean - b.p_sat_mean);
      return a.alpha + t * (b.alpha - a.alpha);
    }
  }
  return std::nullopt;
}

std::string_view to_string(OracleKind kind) {
  switch (kind) {
  case OracleKind::Dpll:
    return "dpll";
  case OracleKind::WalkSat:
    return "walksat";
  case OracleKind::Random:
    return "random";
  case OracleKind::Model:
    return "model";
  case OracleKind::Replay:
    return "replay";
  }
  return "dpll";
}

OracleKind oracle_kind_from_string(std::string_view text) {
  for (auto kind : {OracleKind::Dpll, OracleKind::WalkSat, OracleKind::Random,
                    OracleKind::Model, OracleKind::Replay})
    if (to_string(kind) == text)
      return kind;
  throw Error(ErrorCode::InvalidArgument, "unknown oracle '" + std::string(text) + "'");
}

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Rethrows the first
// exception after all workers finish.
template <typename Fn> void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> workers;
  for (unsigned t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure)
            failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto &w : workers)
    w.join();
  if (failure)
    std::rethrow_exception(failure);
}

struct PointInput {
  std::size_t alpha_index;
  double alpha;
  std::vector<std::pair<std::size_t, const CnfInstance *>> samples;
};

InstanceId make_id(const gen::SweepSuite &suite, double alpha, std::size_t sample,
                   const CnfInstance &instance) {
  return InstanceId{suite.k, suite.n_vars, alpha, sample, instance.seed.value_or(0)};
}

std::vector<EvalRecord> run_local(const gen::SweepSuite &suite,
                                  const PointInput &point, OracleKind oracle,
                                  const SweepConfig &config, std::string name) {
  std::vector<EvalRecord> out(point.samples.size());
  parallel_for(point.samples.size(), config.jobs, [&](std::size_t i) {
    const auto &[sample, instance] = point.samples[i];
    const auto seed = derive_seed(config.seed, point.alpha_index, sample);
    OracleOutcome outcome;
    switch (oracle) {
    case OracleKind::Dpll:
      outcome = OracleOutcome::from_solver(solvers::solve_dpll(*instance, config.dpll_budget));
      break;
    case OracleKind::WalkSat: {
      auto params = config.walksat;
      params.seed = seed;
      if (instance->clauses.empty())
        outcome = OracleOutcome::from_solver(solvers::solve_dpll(*instance));
      else
        outcome = OracleOutcome::from_solver(solvers::solve_walksat(*instance, params));
      break;
    }
    case OracleKind::Random:
      outcome = OracleOutcome::from_assignment(solvers::random_oracle(*instance, seed));
      break;
    default:
      throw Error(ErrorCode::Internal, "not a local oracle");
    }
    out[i] = evaluate_instance(*instance, make_id(suite, point.alpha, sample, *instance),
                               name, outcome);
  });
  return out;
}

fs::path batch_path(const gen::SweepSuite &suite, double alpha, std::size_t batch) {
  return fs::path(gen::suite_dir_name(suite.k, suite.n_vars)) /
         ("alpha" + gen::format_alpha(alpha)) /
         ("batch" + std::to_string(batch) + ".json");
}

class ModelRunner {
public:
  ModelRunner(const gen::SweepSuite &suite, const SweepConfig &config,
              SweepOutput &out)
      : suite_(suite), config_(config), out_(out) {}

  std::vector<EvalRecord> run(const PointInput &point) {
    std::vector<EvalRecord> records;
    const auto batch_size = config_.model.batch_size(suite_.k);
    const auto name = std::string(to_string(config_.oracle));
    for (std::size_t start = 0, b = 0; start < point.samples.size();
         start += batch_size, ++b) {
      const auto end = std::min(point.samples.size(), start + batch_size);
      std::vector<CnfInstance> batch;
      for (auto i = start; i < end; ++i)
        batch.push_back(*point.samples[i].second);

      const auto rel = batch_path(suite_, point.alpha, b);
      llm::Transcript transcript;
      try {
        transcript = exchange(batch, rel);
      } catch (const llm::QueryError &e) {
        persist(e.partial(), rel);
        throw;
      }
      persist(transcript, rel);

      auto response = llm::parse_response(transcript.reply_text(), suite_.n_vars,
                                          batch.size(), config_.model.refusal_rules);
      for (auto &w : response.warnings)
        out_.warnings.push_back(rel.string() + ": " + w);
      auto calls = transcript.reasoning_log
                       ? llm::detect_solver_call(*transcript.reasoning_log)
                       : std::vector<std::string>{};
      for (auto i = start; i < end; ++i) {
        const auto &[sample, instance] = point.samples[i];
        records.push_back(evaluate_instance(
            *instance, make_id(suite_, point.alpha, sample, *instance), name,
            OracleOutcome::from_model(response.outcomes[i - start], calls)));
      }
      out_.transcripts[suite_.k][point.alpha].push_back(std::move(transcript));
    }
    return records;
  }

private:
  llm::Transcript exchange(const std::vector<CnfInstance> &batch, const fs::path &rel) {
    if (config_.oracle == OracleKind::Replay)
      return llm::replay_transcript(config_.replay_dir / rel);
    if (config_.model.fresh_session_per_batch)
      return llm::query_model(batch, config_.model);
    if (!session_) {
      session_ = std::make_unique<llm::ModelSession>(config_.model);
      session_->send(llm::build_priming_message());
    }
    session_->send(llm::build_batch_prompt(batch, config_.model.batch_size(suite_.k)));
    return session_->transcript();
  }

  void persist(const llm::Transcript &t, const fs::path &rel) {
    if (!config_.transcript_dir.empty())
      llm::save_transcript(t, config_.transcript_dir / rel);
  }

  const gen::SweepSuite &suite_;
  const SweepConfig &config_;
  SweepOutput &out_;
  std::unique_ptr<llm::ModelSession> session_;
};

} // namespace

SweepOutput run_sweep(const gen::SweepSuite &suite, const SweepConfig &config) {
  SweepOutput out;
  if (!config.thresholds.contains(suite.k))
    throw Error(ErrorCode::InvalidArgument,
                "no satisfiability threshold known for K=" + std::to_string(suite.k));
  const bool model_like =
      config.oracle == OracleKind::Model || config.oracle == OracleKind::Replay;
  const bool with_baseline = config.baseline && config.oracle != OracleKind::Dpll;
  ModelRunner model(suite, config, out);

  std::vector<EvalRecord> primary_all, baseline_all;
  for (std::size_t a = 0; a < suite.alpha_grid.size(); ++a) {
    PointInput point{a, suite.alpha_grid[a], {}};
    for (auto it = suite.instances.lower_bound(gen::SuiteKey{a, 0});
         it != suite.instances.end() && it->first.alpha_index == a; ++it)
      point.samples.emplace_back(it->first.sample_index, &it->second);
    if (point.samples.empty())
      continue;

    std::vector<EvalRecord> primary, baseline;
    try {
      primary = model_like ? model.run(point)
                           : run_local(suite, point, config.oracle, config,
                                       std::string(to_string(config.oracle)));
      if (with_baseline)
        baseline = run_local(suite, point, OracleKind::Dpll, config,
                             std::string(kBaselineOracle));
    } catch (const Error &e) {
      out.error = "alpha " + gen::format_alpha(point.alpha) + ": " + e.what();
      out.error_code = e.code();
      break;
    } catch (const std::exception &e) {
      out.error = "alpha " + gen::format_alpha(point.alpha) + ": " + e.what();
      break;
    }

    out.points.push_back(aggregate_point(primary, config.thresholds, config.aggregate));
    if (!baseline.empty())
      out.baseline_points.push_back(
          aggregate_point(baseline, config.thresholds, config.aggregate));
    primary_all.insert(primary_all.end(), primary.begin(), primary.end());
    baseline_all.insert(baseline_all.end(), baseline.begin(), baseline.end());

    const bool all_refused =
        std::all_of(primary.begin(), primary.end(), [](const EvalRecord &r) {
          return r.outcome == OutcomeKind::Refusal;
        });
    if (all_refused) {
      out.stopped_at_alpha = point.alpha;
      break;
    }
  }
  out.records = std::move(primary_all);
  out.records.insert(out.records.end(), baseline_all.begin(), baseline_all.end());
  return out;
}

std::map<double, std::size_t> solver_call_histogram(
    const std::map<double, std::vector<llm::Transcript>> &transcripts_by_alpha) {
  std::map<double, std::size_t> histogram;
  for (const auto &[alpha, transcripts] : transcripts_by_alpha) {
    auto &count = histogram[alpha];
    for (const auto &t : transcripts)
      if (t.reasoning_log && !llm::detect_solver_call(*t.reasoning_log).empty())
        ++count;
  }
  return histogram;
}

} // namespace ksat::experiment
