#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string_view>

#include "ksatlab/cnf.hpp"

namespace ksat::solvers {

enum class Status { Sat, Unsat, Unknown };

std::string_view to_string(Status status);

struct SolverStats {
  std::uint64_t decisions = 0;
  std::uint64_t propagations = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t flips = 0;
  std::uint64_t tries = 0;
  std::uint64_t evaluated = 0; // brute force: assignments checked
};

struct SolverResult {
  Status status = Status::Unknown;
  std::optional<Assignment> assignment; // present iff status == Sat
  SolverStats stats;
  std::chrono::nanoseconds elapsed{0};
};

inline constexpr std::int32_t kBruteForceMaxVars = 24;
inline constexpr std::uint64_t kDefaultDecisionBudget = 10'000'000;

/// Exhaustive search over all 2^N assignments in lexicographic order of the
/// bit string (variable 1 most significant). Throws for N > 24.
SolverResult solve_brute_force(const CnfInstance &instance);

/// Chronological DPLL with unit propagation and pure-literal elimination.
/// Branches on the lowest-index unassigned variable that still occurs in an
/// open clause, trying true first. Returns Unknown once `max_decisions`
/// decisions have been made without a verdict.
SolverResult solve_dpll(const CnfInstance &instance,
                        std::uint64_t max_decisions = kDefaultDecisionBudget);

struct WalkSatParams {
  double noise = 0.5;
  std::uint64_t max_flips = 0; // 0 = default 100 * N * ceil(alpha)
  std::uint64_t max_tries = 10;
  std::uint64_t seed = 0;

  /// Fills max_flips when it is 0 and checks ranges.
  WalkSatParams resolved(const CnfInstance &instance) const;
};

/// Incomplete local search; never returns Unsat. Throws for M = 0.
SolverResult solve_walksat(const CnfInstance &instance,
                           const WalkSatParams &params);

/// Uniform independent fair bits, deterministic in `seed`.
Assignment random_oracle(const CnfInstance &instance, std::uint64_t seed);

} // namespace ksat::solvers
