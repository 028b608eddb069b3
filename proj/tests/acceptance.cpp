// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures, capped at 1.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <fmt/core.h>

#include "corpora.hpp"
#include "ksatlab/experiment.hpp"
#include "ksatlab/generator.hpp"
#include "ksatlab/llm_oracle.hpp"
#include "ksatlab/solvers.hpp"
#include "oracles.hpp"

using namespace ksat;
namespace ex = ksat::experiment;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = KSATLAB_FIXTURES_DIR;

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path scratch(const std::string &name) {
  auto dir = fs::temp_directory_path() / ("ksatlab_accept_" + name);
  fs::remove_all(dir);
  return dir;
}

struct Grid {
  int k;
  double from, to, step;
};

// Reference sweep grids at N=10.
constexpr Grid kPaperGrids[] = {{2, 0.1, 1.0, 0.1}, {3, 3.0, 4.8, 0.2}, {4, 8.0, 9.8, 0.2}};

Verdict oracle_equivalence() {
  const auto t0 = Clock::now();
  std::size_t disagreements = 0, total = 0;
  for (auto g : kPaperGrids) {
    auto suite = gen::generate_sweep_suite(g.k, 10, gen::alpha_grid(g.from, g.to, g.step), 20,
                                           1000 + static_cast<std::uint64_t>(g.k));
    for (const auto &[key, cnf] : suite.instances) {
      ++total;
      if (solvers::solve_dpll(cnf).status != solvers::solve_brute_force(cnf).status)
        ++disagreements;
    }
  }
  const double secs = seconds_since(t0);
  return {disagreements == 0 && total == 600 && secs < 10.0,
          fmt::format("{} instances, {} disagreements, {:.2f} s", total, disagreements, secs)};
}

Verdict verifier_ground_truth() {
  const auto t0 = Clock::now();
  std::size_t disagreements = 0, checks = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const int k = 2 + static_cast<int>(i % 3);
    const double alpha = k == 2 ? 1.0 : k == 3 ? 4.2 : 9.8;
    gen::GeneratorParams p{k, 10, alpha, std::nullopt, 500 + i};
    auto cnf = gen::generate_instance(p);
    const auto ref = oracle::parse(serialize_dimacs(cnf));
    for (std::uint64_t mask = 0; mask < 1024; ++mask) {
      const auto bits = oracle::bits_of(mask, 10);
      ++checks;
      if (is_satisfying(cnf, Assignment::from_string(bits)) != (oracle::unsatisfied(ref, bits) == 0))
        ++disagreements;
    }
  }
  const double secs = seconds_since(t0);
  return {disagreements == 0 && secs < 30.0,
          fmt::format("{} checks, {} disagreements, {:.2f} s", checks, disagreements, secs)};
}

Verdict random_baseline() {
  const auto t0 = Clock::now();
  constexpr int kDraws = 10'000;
  bool ok = true;
  std::string detail;
  for (int k = 2; k <= 4; ++k) {
    gen::GeneratorParams p;
    p.k = k;
    p.n_vars = 20;
    p.m = 100;
    p.seed = 2024;
    auto cnf = gen::generate_instance(p);
    double sum = 0.0;
    for (int i = 0; i < kDraws; ++i)
      sum += unsat_fraction(cnf, solvers::random_oracle(cnf, static_cast<std::uint64_t>(i)));
    const double mean = sum / kDraws;
    const double q = std::ldexp(1.0, -k);
    const double tol = 4 * std::sqrt(q * (1 - q) / (kDraws * 100.0));
    ok = ok && std::abs(mean - q) <= tol;
    detail += fmt::format("K={} H={:.5f} (target {} +/- {:.5f}); ", k, mean, q, tol);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 10.0, detail + fmt::format("{:.2f} s", secs)};
}

Verdict phase_transition() {
  struct Case {
    Grid grid;
    double tolerance;
  };
  const Case cases[] = {{{2, 0.6, 1.6, 0.1}, 0.15},
                        {{3, 3.6, 5.0, 0.2}, 0.45},
                        {{4, 9.0, 11.0, 0.5}, 1.0}};
  const ex::ThresholdTable thresholds;
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (const auto &c : cases) {
    auto suite = gen::generate_sweep_suite(
        c.grid.k, 75, gen::alpha_grid(c.grid.from, c.grid.to, c.grid.step), 50,
        7500 + static_cast<std::uint64_t>(c.grid.k));
    ex::SweepConfig config;
    config.oracle = ex::OracleKind::Dpll;
    config.jobs = std::max(1u, std::thread::hardware_concurrency());
    auto out = ex::run_sweep(suite, config);
    const auto unknown = std::count_if(out.records.begin(), out.records.end(), [](const auto &r) {
      return r.outcome == ex::OutcomeKind::Unknown;
    });
    const auto x = ex::crossing_alpha(out.points);
    const double target = thresholds.at(c.grid.k);
    const bool hit = !out.error && unknown == 0 && x && std::abs(*x - target) <= c.tolerance;
    ok = ok && hit;
    detail += x ? fmt::format("K={} crossing {:.3f} (target {} +/- {}); ", c.grid.k, *x, target,
                              c.tolerance)
                : fmt::format("K={} no crossing; ", c.grid.k);
  }
  return {ok, detail + fmt::format("{:.1f} s", seconds_since(t0))};
}

Verdict protocol_replay() {
  const auto transcript =
      llm::replay_transcript(kFixtures / "recorded_exchange/transcripts/k2_n10/alpha0.1/batch0.json");
  const auto suites = gen::load_suites(kFixtures / "recorded_exchange/suite");
  if (suites.size() != 1 || suites[0].instances.size() != 10)
    return {false, "fixture suite missing"};
  const auto &suite = suites[0];
  auto parsed = llm::parse_response(transcript.reply_text(), 10, 10);
  std::size_t assignments = 0, verified = 0;
  for (std::size_t i = 0; i < parsed.outcomes.size(); ++i) {
    const auto &o = parsed.outcomes[i];
    if (o.kind != llm::OutcomeKind::Assignment)
      continue;
    ++assignments;
    const auto ref = oracle::parse(serialize_dimacs(suite.at(0, i)));
    verified += oracle::unsatisfied(ref, o.assignment->to_string()) == 0 ? 1 : 0;
  }
  const bool first_ok = parsed.outcomes[0].assignment &&
                        parsed.outcomes[0].assignment->to_string() == "0000100000" &&
                        is_satisfying(suite.at(0, 0), *parsed.outcomes[0].assignment);

  ex::SweepConfig config;
  config.oracle = ex::OracleKind::Replay;
  config.replay_dir = kFixtures / "recorded_exchange/transcripts";
  auto out = ex::run_sweep(suite, config);
  const bool point_ok = !out.error && out.points.size() == 1 && out.points[0].k == 2 &&
                        out.points[0].alpha == 0.1 &&
                        out.points[0].p_sat_mean == static_cast<double>(verified) / 10.0;
  return {assignments == 10 && first_ok && point_ok,
          fmt::format("{} assignments, {} verified, p_sat_mean {}", assignments, verified,
                      out.points.empty() ? -1.0 : out.points[0].p_sat_mean)};
}

Verdict refusal_handling() {
  const auto dir = scratch("refusal");
  corpora::write_refusal_corpus(dir, 9.4);
  ex::SweepConfig config;
  config.oracle = ex::OracleKind::Replay;
  config.replay_dir = dir;
  auto out = ex::run_sweep(corpora::refusal_suite(), config);
  fs::remove_all(dir);
  if (out.error || out.points.empty())
    return {false, out.error.value_or("no points")};
  const auto &last = out.points.back();
  const bool ok = out.stopped_at_alpha == std::optional<double>(9.4) && last.alpha == 9.4 &&
                  last.refusal_count == 10;
  return {ok, fmt::format("stopped at {}, refusal_count {} at alpha {}",
                          out.stopped_at_alpha ? fmt::format("{}", *out.stopped_at_alpha)
                                               : std::string("none"),
                          last.refusal_count, last.alpha)};
}

Verdict solver_call_detection() {
  const auto b =
      llm::replay_transcript(kFixtures / "reasoning_log/transcripts/k4_n10/alpha8.0/batch0.json");
  const auto matches = llm::detect_solver_call(b.reasoning_log.value_or(""));
  const bool has_sat_solver =
      std::find(matches.begin(), matches.end(), "sat solver") != matches.end();

  const auto dir = scratch("k2");
  corpora::write_k2_corpus(dir);
  ex::SweepConfig config;
  config.oracle = ex::OracleKind::Replay;
  config.replay_dir = dir;
  auto out = ex::run_sweep(corpora::k2_suite(), config);
  fs::remove_all(dir);
  std::size_t bins = 0, nonzero = 0;
  if (!out.error && out.transcripts.count(2)) {
    for (const auto &[alpha, count] : ex::solver_call_histogram(out.transcripts.at(2))) {
      ++bins;
      nonzero += count ? 1 : 0;
    }
  }
  std::string found;
  for (const auto &m : matches)
    found += (found.empty() ? "" : ", ") + m;
  return {has_sat_solver && bins == 10 && nonzero == 0,
          fmt::format("reasoning-log matches [{}]; K=2 histogram {} bins, {} non-zero", found, bins,
                      nonzero)};
}

Verdict determinism() {
  bool ok = true;
  for (auto g : kPaperGrids) {
    const auto grid = gen::alpha_grid(g.from, g.to, g.step);
    auto a = gen::generate_sweep_suite(g.k, 10, grid, 10, 99);
    auto b = gen::generate_sweep_suite(g.k, 10, grid, 10, 99);
    for (const auto &[key, cnf] : a.instances)
      ok = ok && serialize_dimacs(cnf) == serialize_dimacs(b.instances.at(key));
  }
  const bool dimacs_ok = ok;

  auto suite = gen::generate_sweep_suite(3, 12, gen::alpha_grid(3.0, 4.8, 0.2), 10, 5);
  ex::SweepConfig config;
  config.oracle = ex::OracleKind::WalkSat;
  config.seed = 4;
  auto out = ex::run_sweep(suite, config);
  auto render = [](const std::vector<ex::EvalRecord> &records) {
    auto grouped = ex::aggregate_by_oracle(records);
    return std::pair{grouped, ex::render_psat_svg(3, grouped.at("walksat"),
                                                  grouped.at("baseline-dpll"), 4.267) +
                                  ex::render_h_svg(3, grouped.at("walksat"))};
  };
  const auto reference = render(out.records);
  std::mt19937_64 rng(123);
  std::size_t shuffles_ok = 0;
  for (int i = 0; i < 10; ++i) {
    auto shuffled = out.records;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffles_ok += render(shuffled) == reference ? 1 : 0;
  }
  return {dimacs_ok && shuffles_ok == 10,
          fmt::format("DIMACS bytes {}; {}/10 shuffles identical", dimacs_ok ? "identical" : "differ",
                      shuffles_ok)};
}

Verdict claimed_dominance() {
  std::size_t points = 0, violations = 0;
  auto check = [&](const ex::SweepOutput &out) {
    for (const auto *series : {&out.points, &out.baseline_points})
      for (const auto &p : *series) {
        ++points;
        violations += p.claimed_mean >= p.p_sat_mean ? 0 : 1;
      }
  };
  for (auto g : kPaperGrids) {
    auto suite = gen::generate_sweep_suite(g.k, 10, gen::alpha_grid(g.from, g.to, g.step), 10, 31);
    for (auto kind : {ex::OracleKind::Dpll, ex::OracleKind::WalkSat, ex::OracleKind::Random}) {
      ex::SweepConfig config;
      config.oracle = kind;
      check(ex::run_sweep(suite, config));
    }
  }
  const auto dir = scratch("dominance");
  corpora::write_refusal_corpus(dir);
  ex::SweepConfig config;
  config.oracle = ex::OracleKind::Replay;
  config.replay_dir = dir;
  check(ex::run_sweep(corpora::refusal_suite(), config));
  fs::remove_all(dir);
  config.replay_dir = kFixtures / "recorded_exchange/transcripts";
  check(ex::run_sweep(gen::load_suites(kFixtures / "recorded_exchange/suite").at(0), config));
  return {violations == 0, fmt::format("{} points, {} violations", points, violations)};
}

} // namespace

int main() {
  const std::pair<const char *, std::function<Verdict()>> criteria[] = {
      {"oracle equivalence (DPLL vs brute force)", oracle_equivalence},
      {"verifier ground truth", verifier_ground_truth},
      {"random-guess baseline 2^-K", random_baseline},
      {"phase-transition location", phase_transition},
      {"protocol replay", protocol_replay},
      {"refusal handling and early stop", refusal_handling},
      {"solver-call detection", solver_call_detection},
      {"determinism", determinism},
      {"claimed >= verified", claimed_dominance},
  };
  int failures = 0;
  int n = 0;
  for (const auto &[name, run] : criteria) {
    ++n;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception &e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    fmt::print("{} criterion {}: {} | {}\n", v.pass ? "PASS" : "FAIL", n, name, v.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", n - failures, n);
  return failures == 0 ? 0 : 1;
}
