#include "ksatlab/cnf.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ksat {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' ||
         c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front()))
    s.remove_prefix(1);
  while (!s.empty() && is_space(s.back()))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i]))
      ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j]))
      ++j;
    if (j > i)
      out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
std::optional<T> to_integer(std::string_view token) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(),
                                   value);
  if (ec != std::errc{} || ptr != token.data() + token.size())
    return std::nullopt;
  return value;
}

// Finds "seed=<unsigned integer>" anywhere in a comment line.
std::optional<std::uint64_t> seed_from_comment(std::string_view comment) {
  auto pos = comment.find("seed=");
  if (pos == std::string_view::npos)
    return std::nullopt;
  auto rest = comment.substr(pos + 5);
  std::size_t len = 0;
  while (len < rest.size() && rest[len] >= '0' && rest[len] <= '9')
    ++len;
  if (len == 0)
    return std::nullopt;
  return to_integer<std::uint64_t>(rest.substr(0, len));
}

} // namespace

Assignment::Assignment(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto &b : bits_)
    if (b > 1)
      throw Error(ErrorCode::InvalidArgument, "assignment bits must be 0 or 1");
}

Assignment Assignment::from_string(std::string_view text) {
  std::vector<std::uint8_t> bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1')
      throw ParseError("assignment must be a string over {0,1}");
    bits.push_back(c == '1');
  }
  return Assignment(std::move(bits));
}

std::string Assignment::to_string() const {
  std::string out(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i])
      out[i] = '1';
  return out;
}

std::int32_t CnfInstance::k() const {
  if (clauses.empty())
    return 0;
  auto width = clauses.front().literals.size();
  for (const auto &c : clauses)
    if (c.literals.size() != width)
      return 0;
  return static_cast<std::int32_t>(width);
}

void CnfInstance::validate() const {
  if (n_vars < 0)
    throw Error(ErrorCode::InvalidArgument, "negative variable count");
  for (std::size_t ci = 0; ci < clauses.size(); ++ci) {
    if (clauses[ci].literals.empty())
      throw Error(ErrorCode::InvalidArgument,
                  "clause " + std::to_string(ci + 1) + " is empty");
    for (const auto &lit : clauses[ci].literals)
      if (lit.variable < 1 || lit.variable > n_vars)
        throw Error(ErrorCode::InvalidArgument,
                    "clause " + std::to_string(ci + 1) + " mentions variable " +
                        std::to_string(lit.variable) + " outside [1, " +
                        std::to_string(n_vars) + "]");
  }
}

CnfInstance parse_dimacs(std::string_view text) {
  CnfInstance instance;
  bool have_header = false;
  std::int64_t declared_m = 0;
  Clause current;
  std::size_t line_no = 0;

  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);

    auto body = trim(line);
    if (body.empty())
      continue;
    if (body.front() == 'c') {
      std::string_view comment = body.substr(1);
      if (!comment.empty() && comment.front() == ' ')
        comment.remove_prefix(1);
      if (!instance.seed)
        instance.seed = seed_from_comment(comment);
      instance.comments.emplace_back(comment);
      continue;
    }
    if (body.front() == 'p') {
      if (have_header)
        throw ParseError("duplicate problem line", line_no);
      auto tokens = split_ws(body);
      if (tokens.size() != 4 || tokens[0] != "p" || tokens[1] != "cnf")
        throw ParseError("malformed problem line, expected 'p cnf N M'",
                         line_no);
      auto n = to_integer<std::int32_t>(tokens[2]);
      auto m = to_integer<std::int64_t>(tokens[3]);
      if (!n || !m || *n < 0 || *m < 0)
        throw ParseError("problem line needs non-negative integers N and M",
                         line_no);
      instance.n_vars = *n;
      declared_m = *m;
      instance.clauses.reserve(static_cast<std::size_t>(declared_m));
      have_header = true;
      continue;
    }
    if (!have_header)
      throw ParseError("clause data before 'p cnf' header", line_no);

    for (auto token : split_ws(body)) {
      auto value = to_integer<std::int32_t>(token);
      if (!value)
        throw ParseError("non-integer token '" + std::string(token) + "'",
                         line_no);
      if (*value == 0) {
        if (current.literals.empty())
          throw ParseError("literal 0 outside a clause terminator position",
                           line_no);
        instance.clauses.push_back(std::move(current));
        current = Clause{};
        continue;
      }
      auto lit = Literal::from_dimacs(*value);
      if (lit.variable > instance.n_vars)
        throw ParseError("literal " + std::string(token) +
                             " exceeds variable count " +
                             std::to_string(instance.n_vars),
                         line_no);
      current.literals.push_back(lit);
    }
  }

  if (!have_header)
    throw ParseError("missing 'p cnf N M' header");
  if (!current.literals.empty())
    throw ParseError("last clause is not terminated by 0", line_no);
  if (static_cast<std::int64_t>(instance.clauses.size()) != declared_m)
    throw ParseError("header declares " + std::to_string(declared_m) +
                     " clauses but " + std::to_string(instance.clauses.size()) +
                     " were found");
  return instance;
}

CnfInstance load_dimacs(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_dimacs(ss.str());
  } catch (const ParseError &e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string serialize_dimacs(const CnfInstance &instance) {
  std::string out;
  for (const auto &comment : instance.comments) {
    out += comment.empty() ? "c" : "c " + comment;
    out += '\n';
  }
  out += "p cnf " + std::to_string(instance.n_vars) + " " +
         std::to_string(instance.clauses.size()) + "\n";
  for (const auto &clause : instance.clauses) {
    for (const auto &lit : clause.literals) {
      out += std::to_string(lit.to_dimacs());
      out += ' ';
    }
    out += "0\n";
  }
  return out;
}

std::size_t count_unsatisfied(const CnfInstance &instance,
                              const Assignment &assignment) {
  if (assignment.size() != static_cast<std::size_t>(instance.n_vars))
    throw Error(ErrorCode::InvalidArgument,
                "assignment has length " + std::to_string(assignment.size()) +
                    " but the instance has " + std::to_string(instance.n_vars) +
                    " variables");
  auto bits = assignment.bits();
  std::size_t unsat = 0;
  for (const auto &clause : instance.clauses) {
    bool sat = false;
    for (const auto &lit : clause.literals) {
      if (lit.satisfied_by(bits[lit.variable - 1] != 0)) {
        sat = true;
        break;
      }
    }
    unsat += sat ? 0 : 1;
  }
  return unsat;
}

bool is_satisfying(const CnfInstance &instance, const Assignment &assignment) {
  return count_unsatisfied(instance, assignment) == 0;
}

double unsat_fraction(const CnfInstance &instance,
                      const Assignment &assignment) {
  if (instance.clauses.empty())
    throw Error(ErrorCode::UndefinedInput,
                "unsatisfied-clause fraction is undefined for M = 0");
  return static_cast<double>(count_unsatisfied(instance, assignment)) /
         static_cast<double>(instance.clauses.size());
}

std::vector<Assignment> read_assignment_lines(std::string_view text) {
  std::vector<Assignment> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    if (line.empty())
      continue;
    try {
      out.push_back(Assignment::from_string(line));
    } catch (const ParseError &e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

} // namespace ksat
