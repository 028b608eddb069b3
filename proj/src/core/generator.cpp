#include "ksatlab/generator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>

#include "ksatlab/rng.hpp"

namespace fs = std::filesystem;

namespace ksat::gen {

std::int64_t GeneratorParams::clause_count() const {
  if (m) {
    if (*m < 0)
      throw Error(ErrorCode::InvalidArgument, "clause count must be >= 0");
    return *m;
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCode::InvalidArgument, "alpha must be a finite value >= 0");
  // Round half up; the slack absorbs products like 4.6 * 10 = 45.999...
  return static_cast<std::int64_t>(
      std::floor(alpha * static_cast<double>(n_vars) + 0.5 + 1e-9));
}

CnfInstance generate_instance(const GeneratorParams &params) {
  if (params.k < 1)
    throw Error(ErrorCode::InvalidArgument, "clause width K must be >= 1");
  if (params.k > params.n_vars)
    throw Error(ErrorCode::InvalidArgument,
                "clause width K=" + std::to_string(params.k) +
                    " exceeds variable count N=" +
                    std::to_string(params.n_vars));
  const auto m = params.clause_count();

  CnfInstance instance;
  instance.n_vars = params.n_vars;
  instance.seed = params.seed;
  instance.comments.push_back("seed=" + std::to_string(params.seed));
  instance.clauses.reserve(static_cast<std::size_t>(m));

  Rng rng(params.seed);
  for (std::int64_t c = 0; c < m; ++c) {
    Clause clause;
    clause.literals.reserve(static_cast<std::size_t>(params.k));
    while (clause.literals.size() < static_cast<std::size_t>(params.k)) {
      auto var = static_cast<std::int32_t>(rng.below(params.n_vars)) + 1;
      bool taken = std::any_of(clause.literals.begin(), clause.literals.end(),
                               [&](const Literal &l) { return l.variable == var; });
      if (!taken)
        clause.literals.push_back(Literal{var, false});
    }
    for (auto &lit : clause.literals)
      lit.negated = rng.coin();
    instance.clauses.push_back(std::move(clause));
  }
  return instance;
}

std::vector<double> alpha_grid(double from, double to, double step) {
  if (!(step > 0.0))
    throw Error(ErrorCode::InvalidArgument, "alpha step must be > 0");
  if (from < 0.0 || to < from)
    throw Error(ErrorCode::InvalidArgument,
                "alpha range must satisfy 0 <= from <= to");
  std::vector<double> grid;
  const auto count =
      static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    double a = std::round((from + static_cast<double>(i) * step) * 1e6) / 1e6;
    if (a > 0.0)
      grid.push_back(a);
  }
  return grid;
}

std::string format_alpha(double alpha) {
  double rounded = std::round(alpha * 1e6) / 1e6;
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, rounded);
  std::string s(buf, res.ptr);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos)
    s += ".0";
  return s;
}

std::uint64_t sample_seed(std::uint64_t base_seed, std::size_t alpha_index,
                          std::size_t sample_index) {
  return derive_seed(base_seed, alpha_index, sample_index);
}

SweepSuite generate_sweep_suite(std::int32_t k, std::int32_t n_vars,
                                const std::vector<double> &grid,
                                std::size_t samples_per_alpha,
                                std::uint64_t base_seed) {
  if (grid.empty())
    throw Error(ErrorCode::InvalidArgument, "alpha grid is empty");
  if (samples_per_alpha < 1)
    throw Error(ErrorCode::InvalidArgument, "samples per alpha must be >= 1");

  SweepSuite suite{k, n_vars, grid, samples_per_alpha, base_seed, {}};
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (std::size_t s = 0; s < samples_per_alpha; ++s) {
      GeneratorParams params;
      params.k = k;
      params.n_vars = n_vars;
      params.alpha = grid[a];
      params.seed = sample_seed(base_seed, a, s);
      suite.instances.emplace(SuiteKey{a, s}, generate_instance(params));
    }
  }
  return suite;
}

std::string suite_dir_name(std::int32_t k, std::int32_t n_vars) {
  return "k" + std::to_string(k) + "_n" + std::to_string(n_vars);
}

std::size_t write_suite(const SweepSuite &suite, const fs::path &root) {
  const auto base = root / suite_dir_name(suite.k, suite.n_vars);
  std::size_t written = 0;
  std::error_code ec;
  for (const auto &[key, instance] : suite.instances) {
    const auto dir = base / ("alpha" + format_alpha(suite.alpha_grid[key.alpha_index]));
    fs::create_directories(dir, ec);
    if (ec)
      throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " +
                                     ec.message());
    const auto file = dir / ("sample" + std::to_string(key.sample_index) + ".cnf");
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << serialize_dimacs(instance);
    if (!out)
      throw Error(ErrorCode::Io, "cannot write " + file.string());
    ++written;
  }
  return written;
}

namespace {

const std::regex kSuiteDir(R"(k(\d+)_n(\d+))");
const std::regex kAlphaDir(R"(alpha([0-9]+(?:\.[0-9]+)?))");
const std::regex kSampleFile(R"(sample(\d+)\.cnf)");

SweepSuite load_one(const fs::path &dir, std::int32_t k, std::int32_t n) {
  SweepSuite suite;
  suite.k = k;
  suite.n_vars = n;

  std::vector<std::pair<double, fs::path>> alphas;
  for (const auto &entry : fs::directory_iterator(dir)) {
    std::smatch m;
    auto name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, kAlphaDir))
      alphas.emplace_back(std::stod(m[1].str()), entry.path());
  }
  std::sort(alphas.begin(), alphas.end());

  for (std::size_t a = 0; a < alphas.size(); ++a) {
    suite.alpha_grid.push_back(alphas[a].first);
    std::vector<std::pair<std::size_t, fs::path>> samples;
    for (const auto &entry : fs::directory_iterator(alphas[a].second)) {
      std::smatch m;
      auto name = entry.path().filename().string();
      if (entry.is_regular_file() && std::regex_match(name, m, kSampleFile))
        samples.emplace_back(std::stoul(m[1].str()), entry.path());
    }
    std::sort(samples.begin(), samples.end());
    suite.samples_per_alpha = std::max(suite.samples_per_alpha, samples.size());
    for (const auto &[idx, path] : samples) {
      auto instance = load_dimacs(path.string());
      if (instance.n_vars != n)
        throw Error(ErrorCode::Parse, path.string() + " declares N=" +
                                          std::to_string(instance.n_vars) +
                                          " inside " + dir.string());
      suite.instances.emplace(SuiteKey{a, idx}, std::move(instance));
    }
  }
  return suite;
}

} // namespace

std::vector<SweepSuite> load_suites(const fs::path &root) {
  if (!fs::is_directory(root))
    throw Error(ErrorCode::Io, root.string() + " is not a directory");

  std::vector<SweepSuite> suites;
  std::smatch m;
  auto own = root.filename().string();
  if (own.empty())
    own = root.parent_path().filename().string();
  if (std::regex_match(own, m, kSuiteDir)) {
    suites.push_back(load_one(root, std::stoi(m[1].str()), std::stoi(m[2].str())));
    return suites;
  }
  for (const auto &entry : fs::directory_iterator(root)) {
    auto name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, kSuiteDir))
      suites.push_back(
          load_one(entry.path(), std::stoi(m[1].str()), std::stoi(m[2].str())));
  }
  std::sort(suites.begin(), suites.end(), [](const auto &a, const auto &b) {
    return std::pair(a.k, a.n_vars) < std::pair(b.k, b.n_vars);
  });
  if (suites.empty())
    throw Error(ErrorCode::Io, "no k<K>_n<N> suite directories under " +
                                   root.string());
  return suites;
}

} // namespace ksat::gen
