#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ksatlab/cnf.hpp"

namespace ksat::gen {

struct GeneratorParams {
  std::int32_t k = 3;
  std::int32_t n_vars = 10;
  /// Clause density; M = round-half-up(alpha * N). Ignored when `m` is set.
  double alpha = 0.0;
  std::optional<std::int64_t> m;
  std::uint64_t seed = 0;

  std::int64_t clause_count() const;
};

/// Fixed-clause-length random K-SAT: each clause draws K distinct variables
/// uniformly and negates each with probability 1/2. Duplicate clauses are
/// allowed. Throws Error(InvalidArgument) when K > N or K < 1.
CnfInstance generate_instance(const GeneratorParams &params);

/// from, from+step, ..., up to `to` inclusive (with a 1e-9 slack), each value
/// rounded to 6 decimals. α = 0 points are dropped.
std::vector<double> alpha_grid(double from, double to, double step);

/// Canonical text of a grid value: shortest form with at least one decimal
/// ("0.1", "3.0", "4.267").
std::string format_alpha(double alpha);

struct SuiteKey {
  std::size_t alpha_index = 0;
  std::size_t sample_index = 0;
  friend auto operator<=>(const SuiteKey &, const SuiteKey &) = default;
};

struct SweepSuite {
  std::int32_t k = 0;
  std::int32_t n_vars = 0;
  std::vector<double> alpha_grid;
  std::size_t samples_per_alpha = 0;
  std::uint64_t base_seed = 0;
  std::map<SuiteKey, CnfInstance> instances;

  const CnfInstance &at(std::size_t alpha_index, std::size_t sample) const {
    return instances.at(SuiteKey{alpha_index, sample});
  }
};

/// Seed of one suite member, a pure function of its coordinates.
std::uint64_t sample_seed(std::uint64_t base_seed, std::size_t alpha_index,
                          std::size_t sample_index);

SweepSuite generate_sweep_suite(std::int32_t k, std::int32_t n_vars,
                                const std::vector<double> &alpha_grid,
                                std::size_t samples_per_alpha,
                                std::uint64_t base_seed);

/// "k<K>_n<N>"
std::string suite_dir_name(std::int32_t k, std::int32_t n_vars);

/// Writes <root>/k<K>_n<N>/alpha<value>/sample<idx>.cnf for every member.
/// Returns the number of files written.
std::size_t write_suite(const SweepSuite &suite,
                        const std::filesystem::path &root);

/// Loads every k<K>_n<N> tree below `root` (or `root` itself when it is such
/// a directory), ordered by K then N.
std::vector<SweepSuite> load_suites(const std::filesystem::path &root);

} // namespace ksat::gen
