#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ksatlab/cnf.hpp"
#include "ksatlab/generator.hpp"
#include "ksatlab/llm_oracle.hpp"
#include "ksatlab/solvers.hpp"

namespace ksat::experiment {

/// Satisfiability thresholds α_s per clause width.
class ThresholdTable {
public:
  ThresholdTable(); // K=2 -> 1.0, K=3 -> 4.267, K=4 -> 9.931
  explicit ThresholdTable(std::map<std::int32_t, double> values)
      : values_(std::move(values)) {}

  bool contains(std::int32_t k) const { return values_.count(k) != 0; }
  /// Throws Error(InvalidArgument) for a K without a threshold.
  double at(std::int32_t k) const;
  const std::map<std::int32_t, double> &values() const { return values_; }

private:
  std::map<std::int32_t, double> values_;
};

/// 2^-K, the expected unsatisfied-clause fraction of a uniform random guess.
double random_baseline(std::int32_t k);

enum class OutcomeKind { Assignment, Refusal, Unparseable, Solved, Unsat, Unknown };

std::string_view to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from_string(std::string_view text);

/// What any oracle returned for one instance.
struct OracleOutcome {
  OutcomeKind kind = OutcomeKind::Unparseable;
  std::optional<Assignment> assignment;
  std::string text;
  std::vector<std::string> solver_calls;

  static OracleOutcome from_solver(const solvers::SolverResult &result);
  static OracleOutcome from_model(const llm::InstanceOutcome &outcome,
                                  std::vector<std::string> solver_calls = {});
  static OracleOutcome from_assignment(Assignment assignment);
};

struct InstanceId {
  std::int32_t k = 0;
  std::int32_t n = 0;
  double alpha = 0.0;
  std::size_t sample_idx = 0;
  std::uint64_t seed = 0;
  friend bool operator==(const InstanceId &, const InstanceId &) = default;
};

struct EvalRecord {
  InstanceId id;
  std::string oracle;
  OutcomeKind outcome = OutcomeKind::Unparseable;
  bool claimed_sat = false;
  bool verified_sat = false;
  std::size_t unsat_count = 0;
  std::size_t m = 0;
  std::optional<double> h; // missing when no assignment exists to score
  std::vector<std::string> solver_calls;

  friend bool operator==(const EvalRecord &, const EvalRecord &) = default;
};

/// Verifies any assignment carried by `outcome`. Throws when the assignment
/// length differs from the instance's N.
EvalRecord evaluate_instance(const CnfInstance &instance, const InstanceId &id,
                             std::string oracle, const OracleOutcome &outcome);

struct SweepPoint {
  std::int32_t k = 0;
  std::int32_t n = 0;
  double alpha = 0.0;
  std::size_t n_samples = 0;
  double p_sat_mean = 0.0;
  double p_sat_stderr = 0.0;
  double claimed_mean = 0.0;
  double claimed_stderr = 0.0;
  std::optional<double> h_mean;
  double h_stderr = 0.0;
  std::size_t h_samples = 0;
  std::size_t h_missing = 0;
  double random_baseline = 0.0;
  std::size_t refusal_count = 0;
  std::optional<double> alpha_s;
  bool single_sample = false;
  /// h_mean + sigma * h_stderr < 2^-K.
  bool below_random = false;

  friend bool operator==(const SweepPoint &, const SweepPoint &) = default;
};

struct AggregateOptions {
  double sigma = 2.0;
};

/// Mean and n-1 standard error of verified success, claimed success and H.
/// Independent of record order. Throws for an empty span.
SweepPoint aggregate_point(std::span<const EvalRecord> records,
                           const ThresholdTable &thresholds = {},
                           const AggregateOptions &options = {});

/// Groups records by (oracle, k, n, alpha) and aggregates each group, ordered
/// by oracle, k, n, alpha.
std::map<std::string, std::vector<SweepPoint>>
aggregate_by_oracle(std::span<const EvalRecord> records,
                    const ThresholdTable &thresholds = {},
                    const AggregateOptions &options = {});

/// First α where verified P(SAT) drops from >= level to < level, linearly
/// interpolated between neighbouring points.
std::optional<double> crossing_alpha(std::span<const SweepPoint> points,
                                     double level = 0.5);

enum class OracleKind { Dpll, WalkSat, Random, Model, Replay };

std::string_view to_string(OracleKind kind);
OracleKind oracle_kind_from_string(std::string_view text);

inline constexpr std::string_view kBaselineOracle = "baseline-dpll";

struct SweepConfig {
  OracleKind oracle = OracleKind::Dpll;
  std::uint64_t dpll_budget = solvers::kDefaultDecisionBudget;
  solvers::WalkSatParams walksat;
  std::uint64_t seed = 0; // random and walksat oracles
  llm::ModelConfig model;
  std::filesystem::path replay_dir;
  /// Where live or replayed transcripts are written; empty = not written.
  std::filesystem::path transcript_dir;
  unsigned jobs = 1;
  /// Also solve every instance with DPLL as a reference series.
  bool baseline = true;
  ThresholdTable thresholds;
  AggregateOptions aggregate;
};

struct SweepOutput {
  std::vector<EvalRecord> records; // primary oracle and baseline, if any
  std::vector<SweepPoint> points;
  std::vector<SweepPoint> baseline_points;
  /// α -> transcripts exchanged at that point (model and replay oracles).
  std::map<std::int32_t, std::map<double, std::vector<llm::Transcript>>> transcripts;
  std::optional<double> stopped_at_alpha;
  std::optional<std::string> error;
  ErrorCode error_code = ErrorCode::Internal; // meaningful when `error` is set
  std::vector<std::string> warnings;
};

/// Evaluates every instance of `suite` with the configured oracle. An α
/// point where every outcome is a refusal ends the sweep. Failures end the
/// sweep early with `error` set and everything gathered so far kept.
SweepOutput run_sweep(const gen::SweepSuite &suite, const SweepConfig &config);

/// α -> number of transcripts with at least one solver keyword in their
/// reasoning log. Every α present in the input gets a bin.
std::map<double, std::size_t> solver_call_histogram(
    const std::map<double, std::vector<llm::Transcript>> &transcripts_by_alpha);

// Results files ------------------------------------------------------------

inline constexpr std::string_view kRecordsHeader =
    "k,n,alpha,sample_idx,seed,oracle,outcome,claimed_sat,verified_sat,"
    "unsat_count,m,h,solver_calls";
inline constexpr std::string_view kPointsHeader =
    "k,n,alpha,n_samples,p_sat_mean,p_sat_stderr,h_mean,h_stderr,"
    "random_baseline,refusal_count,alpha_s";

std::string records_to_csv(std::span<const EvalRecord> records);
std::vector<EvalRecord> records_from_csv(std::string_view text);
std::string points_to_csv(std::span<const SweepPoint> points);
std::vector<SweepPoint> points_from_csv(std::string_view text);

struct ResultSet {
  std::vector<EvalRecord> records;
  std::vector<SweepPoint> points;
  std::vector<SweepPoint> baseline_points;
  std::map<std::int32_t, std::map<double, std::size_t>> solver_calls;
  /// K -> α at which every outcome was a refusal and the sweep ended.
  std::map<std::int32_t, double> stopped_at_alpha;
  std::string oracle;
};

/// Concatenates the outputs of one oracle's sweeps over several suites and
/// derives the per-K solver-call histograms from their transcripts.
ResultSet collect_results(std::span<const SweepOutput> outputs, std::string oracle);

std::string results_to_json(const ResultSet &results);

/// Writes records.csv, points.csv, baseline_points.csv (when non-empty),
/// solvercalls.csv (when non-empty) and results.json. Byte-stable.
std::vector<std::filesystem::path> export_results(const ResultSet &results,
                                                  const std::filesystem::path &out_dir);

/// Rebuilds a ResultSet from a directory written by export_results (and any
/// transcripts/ tree next to it), re-aggregating from records.csv.
ResultSet load_results(const std::filesystem::path &in_dir,
                       const ThresholdTable &thresholds = {},
                       const AggregateOptions &options = {});

// Plots ----------------------------------------------------------------------

std::string render_psat_svg(std::int32_t k, std::span<const SweepPoint> points,
                            std::span<const SweepPoint> baseline,
                            std::optional<double> alpha_s);
std::string render_h_svg(std::int32_t k, std::span<const SweepPoint> points);
std::string render_solver_calls_svg(std::int32_t k,
                                    const std::map<double, std::size_t> &histogram);

/// psat_k<K>.svg and h_k<K>.svg per K present in `results.points`, plus
/// solvercalls_k<K>.svg for every K with a histogram.
std::vector<std::filesystem::path> emit_plots(const ResultSet &results,
                                              const std::filesystem::path &out_dir,
                                              const ThresholdTable &thresholds = {});

} // namespace ksat::experiment
