#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

#include "ksatlab/experiment.hpp"

namespace fs = std::filesystem;

namespace ksat::experiment {

namespace {

std::string fmt_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string fmt_opt(const std::optional<double> &x) {
  return x ? fmt_double(*x) : std::string();
}

std::string join(const std::vector<std::string> &parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i)
      out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (!line.empty())
      out.push_back(line);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
  }
  return out;
}

template <typename T> T parse_num(const std::string &s, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("bad numeric field '" + s + "'", line);
  return value;
}

bool parse_bool(const std::string &s, std::size_t line) {
  if (s == "0" || s == "1")
    return s == "1";
  throw ParseError("bad boolean field '" + s + "'", line);
}

std::optional<double> parse_opt(const std::string &s, std::size_t line) {
  if (s.empty())
    return std::nullopt;
  return parse_num<double>(s, line);
}

void write_file(const fs::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out)
    throw Error(ErrorCode::Io, "cannot write " + path.string());
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

std::string records_to_csv(std::span<const EvalRecord> records) {
  std::string out(kRecordsHeader);
  out += '\n';
  for (const auto &r : records) {
    out += std::to_string(r.id.k) + ',' + std::to_string(r.id.n) + ',' +
           gen::format_alpha(r.id.alpha) + ',' + std::to_string(r.id.sample_idx) +
           ',' + std::to_string(r.id.seed) + ',' + r.oracle + ',' +
           std::string(to_string(r.outcome)) + ',' + (r.claimed_sat ? '1' : '0') +
           ',' + (r.verified_sat ? '1' : '0') + ',' + std::to_string(r.unsat_count) +
           ',' + std::to_string(r.m) + ',' + fmt_opt(r.h) + ',' +
           join(r.solver_calls, ';') + '\n';
  }
  return out;
}

std::vector<EvalRecord> records_from_csv(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty() || lines.front() != kRecordsHeader)
    throw Error(ErrorCode::Schema, "records CSV header does not match");
  std::vector<EvalRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split(lines[i], ',');
    if (f.size() != 13)
      throw ParseError("expected 13 fields, found " + std::to_string(f.size()), i + 1);
    EvalRecord r;
    r.id.k = parse_num<std::int32_t>(f[0], i + 1);
    r.id.n = parse_num<std::int32_t>(f[1], i + 1);
    r.id.alpha = parse_num<double>(f[2], i + 1);
    r.id.sample_idx = parse_num<std::size_t>(f[3], i + 1);
    r.id.seed = parse_num<std::uint64_t>(f[4], i + 1);
    r.oracle = f[5];
    r.outcome = outcome_kind_from_string(f[6]);
    r.claimed_sat = parse_bool(f[7], i + 1);
    r.verified_sat = parse_bool(f[8], i + 1);
    r.unsat_count = parse_num<std::size_t>(f[9], i + 1);
    r.m = parse_num<std::size_t>(f[10], i + 1);
    r.h = parse_opt(f[11], i + 1);
    if (!f[12].empty())
      r.solver_calls = split(f[12], ';');
    out.push_back(std::move(r));
  }
  return out;
}

std::string points_to_csv(std::span<const SweepPoint> points) {
  std::string out(kPointsHeader);
  out += '\n';
  for (const auto &p : points) {
    out += std::to_string(p.k) + ',' + std::to_string(p.n) + ',' +
           gen::format_alpha(p.alpha) + ',' + std::to_string(p.n_samples) + ',' +
           fmt_double(p.p_sat_mean) + ',' + fmt_double(p.p_sat_stderr) + ',' +
           fmt_opt(p.h_mean) + ',' + fmt_double(p.h_stderr) + ',' +
           fmt_double(p.random_baseline) + ',' + std::to_string(p.refusal_count) +
           ',' + fmt_opt(p.alpha_s) + '\n';
  }
  return out;
}

std::vector<SweepPoint> points_from_csv(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty() || lines.front() != kPointsHeader)
    throw Error(ErrorCode::Schema, "points CSV header does not match");
  std::vector<SweepPoint> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split(lines[i], ',');
    if (f.size() != 11)
      throw ParseError("expected 11 fields, found " + std::to_string(f.size()), i + 1);
    SweepPoint p;
    p.k = parse_num<std::int32_t>(f[0], i + 1);
    p.n = parse_num<std::int32_t>(f[1], i + 1);
    p.alpha = parse_num<double>(f[2], i + 1);
    p.n_samples = parse_num<std::size_t>(f[3], i + 1);
    p.p_sat_mean = parse_num<double>(f[4], i + 1);
    p.p_sat_stderr = parse_num<double>(f[5], i + 1);
    p.h_mean = parse_opt(f[6], i + 1);
    p.h_stderr = parse_num<double>(f[7], i + 1);
    p.random_baseline = parse_num<double>(f[8], i + 1);
    p.refusal_count = parse_num<std::size_t>(f[9], i + 1);
    p.alpha_s = parse_opt(f[10], i + 1);
    p.single_sample = p.n_samples == 1;
    out.push_back(p);
  }
  return out;
}

std::string results_to_json(const ResultSet &results) {
  using ojson = nlohmann::ordered_json;
  auto opt = [](const std::optional<double> &x) { return x ? ojson(*x) : ojson(nullptr); };

  ojson doc;
  doc["meta"] = {
      {"oracle", results.oracle},
      {"claimed_sat_definition",
       "an outcome counts as claimed-satisfying when the oracle returned a "
       "parseable assignment (model/replay/random) or a SAT verdict (solvers); "
       "the model's own check is not observable"},
      {"stderr", "sample standard deviation (n-1) / sqrt(n)"},
      {"stopped_at_alpha", ojson::object()},
  };
  for (const auto &[k, alpha] : results.stopped_at_alpha)
    doc["meta"]["stopped_at_alpha"][std::to_string(k)] = alpha;
  doc["records"] = ojson::array();
  for (const auto &r : results.records)
    doc["records"].push_back({{"k", r.id.k},
                              {"n", r.id.n},
                              {"alpha", r.id.alpha},
                              {"sample_idx", r.id.sample_idx},
                              {"seed", r.id.seed},
                              {"oracle", r.oracle},
                              {"outcome", std::string(to_string(r.outcome))},
                              {"claimed_sat", r.claimed_sat},
                              {"verified_sat", r.verified_sat},
                              {"unsat_count", r.unsat_count},
                              {"m", r.m},
                              {"h", opt(r.h)},
                              {"solver_calls", r.solver_calls}});
  auto points = [&](const std::vector<SweepPoint> &ps) {
    ojson arr = ojson::array();
    for (const auto &p : ps)
      arr.push_back({{"k", p.k},
                     {"n", p.n},
                     {"alpha", p.alpha},
                     {"n_samples", p.n_samples},
                     {"p_sat_mean", p.p_sat_mean},
                     {"p_sat_stderr", p.p_sat_stderr},
                     {"claimed_mean", p.claimed_mean},
                     {"claimed_stderr", p.claimed_stderr},
                     {"h_mean", opt(p.h_mean)},
                     {"h_stderr", p.h_stderr},
                     {"h_samples", p.h_samples},
                     {"h_missing", p.h_missing},
                     {"random_baseline", p.random_baseline},
                     {"refusal_count", p.refusal_count},
                     {"alpha_s", opt(p.alpha_s)},
                     {"single_sample", p.single_sample},
                     {"below_random", p.below_random}});
    return arr;
  };
  doc["points"] = points(results.points);
  doc["baseline_points"] = points(results.baseline_points);
  doc["solver_calls"] = ojson::object();
  for (const auto &[k, hist] : results.solver_calls) {
    ojson bins = ojson::array();
    for (const auto &[alpha, count] : hist)
      bins.push_back({{"alpha", alpha}, {"count", count}});
    doc["solver_calls"][std::to_string(k)] = bins;
  }
  return doc.dump(2) + "\n";
}

std::vector<fs::path> export_results(const ResultSet &results, const fs::path &out_dir) {
  if (results.records.empty())
    throw Error(ErrorCode::InvalidArgument, "nothing to export: no records");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<fs::path> written;
  auto emit = [&](const char *name, const std::string &content) {
    write_file(out_dir / name, content);
    written.push_back(out_dir / name);
  };
  emit("records.csv", records_to_csv(results.records));
  emit("points.csv", points_to_csv(results.points));
  if (!results.baseline_points.empty())
    emit("baseline_points.csv", points_to_csv(results.baseline_points));
  if (!results.solver_calls.empty()) {
    std::string csv = "k,alpha,count\n";
    for (const auto &[k, hist] : results.solver_calls)
      for (const auto &[alpha, count] : hist)
        csv += std::to_string(k) + ',' + gen::format_alpha(alpha) + ',' +
               std::to_string(count) + '\n';
    emit("solvercalls.csv", csv);
  }
  emit("results.json", results_to_json(results));
  return written;
}

ResultSet collect_results(std::span<const SweepOutput> outputs, std::string oracle) {
  ResultSet rs;
  rs.oracle = std::move(oracle);
  for (const auto &out : outputs) {
    rs.records.insert(rs.records.end(), out.records.begin(), out.records.end());
    rs.points.insert(rs.points.end(), out.points.begin(), out.points.end());
    rs.baseline_points.insert(rs.baseline_points.end(), out.baseline_points.begin(),
                              out.baseline_points.end());
    for (const auto &[k, by_alpha] : out.transcripts)
      rs.solver_calls[k] = solver_call_histogram(by_alpha);
    if (out.stopped_at_alpha && !out.points.empty())
      rs.stopped_at_alpha[out.points.front().k] = *out.stopped_at_alpha;
  }
  return rs;
}

ResultSet load_results(const fs::path &in_dir, const ThresholdTable &thresholds,
                       const AggregateOptions &options) {
  ResultSet rs;
  rs.records = records_from_csv(read_file(in_dir / "records.csv"));
  auto grouped = aggregate_by_oracle(rs.records, thresholds, options);
  for (auto &[oracle, points] : grouped) {
    if (oracle == kBaselineOracle) {
      rs.baseline_points = std::move(points);
    } else if (rs.oracle.empty()) {
      rs.oracle = oracle;
      rs.points = std::move(points);
    } else {
      throw Error(ErrorCode::Schema, "records mix oracles '" + rs.oracle + "' and '" +
                                         oracle + "'");
    }
  }
  for (const auto &p : rs.points)
    if (p.n_samples > 0 && p.refusal_count == p.n_samples)
      rs.stopped_at_alpha.try_emplace(p.k, p.alpha);

  const auto transcripts = in_dir / "transcripts";
  if (fs::is_directory(transcripts)) {
    static const std::regex kSuite(R"(k(\d+)_n(\d+))");
    static const std::regex kAlpha(R"(alpha([0-9.]+))");
    std::map<std::int32_t, std::map<double, std::vector<llm::Transcript>>> by_k;
    for (const auto &suite : fs::directory_iterator(transcripts)) {
      std::smatch m;
      auto name = suite.path().filename().string();
      if (!suite.is_directory() || !std::regex_match(name, m, kSuite))
        continue;
      const auto k = std::stoi(m[1].str());
      for (const auto &alpha_dir : fs::directory_iterator(suite.path())) {
        auto aname = alpha_dir.path().filename().string();
        if (!alpha_dir.is_directory() || !std::regex_match(aname, m, kAlpha))
          continue;
        auto &bin = by_k[k][std::stod(m[1].str())];
        std::vector<fs::path> files;
        for (const auto &f : fs::directory_iterator(alpha_dir.path()))
          if (f.path().extension() == ".json")
            files.push_back(f.path());
        std::sort(files.begin(), files.end());
        for (const auto &f : files)
          bin.push_back(llm::replay_transcript(f));
      }
    }
    for (const auto &[k, by_alpha] : by_k)
      rs.solver_calls[k] = solver_call_histogram(by_alpha);
  } else if (fs::is_regular_file(in_dir / "solvercalls.csv")) {
    const auto text = read_file(in_dir / "solvercalls.csv");
    const auto lines = lines_of(text);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      auto f = split(lines[i], ',');
      if (f.size() != 3)
        throw ParseError("solvercalls.csv needs 3 fields", i + 1);
      rs.solver_calls[parse_num<std::int32_t>(f[0], i + 1)]
                     [parse_num<double>(f[1], i + 1)] =
          parse_num<std::size_t>(f[2], i + 1);
    }
  }
  return rs;
}

} // namespace ksat::experiment
