// Prompt construction and reply interpretation for the chat protocol.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>

#include "ksatlab/llm_oracle.hpp"

namespace ksat::llm {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto &c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void replace_all(std::string &s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

// Lower case with typographic apostrophes and minus signs folded to ASCII.
std::string normalise(std::string_view s) {
  std::string out = lower(s);
  replace_all(out, "\xE2\x80\x99", "'"); // U+2019
  replace_all(out, "\xE2\x88\x92", "-"); // U+2212
  return out;
}

std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)); };
  while (!s.empty() && ws(s.front()))
    s.remove_prefix(1);
  while (!s.empty() && ws(s.back()))
    s.remove_suffix(1);
  return s;
}

std::string_view strip_decoration(std::string_view s) {
  constexpr std::string_view kDecor = "`*_\"'";
  while (!s.empty() && kDecor.find(s.front()) != std::string_view::npos)
    s.remove_prefix(1);
  while (!s.empty() && (kDecor.find(s.back()) != std::string_view::npos ||
                        s.back() == '.' || s.back() == ','))
    s.remove_suffix(1);
  return trim(s);
}

// Drops list markers such as "- ", "* ", "> ", "3) ", "3. ", "(3) ".
std::string_view strip_list_marker(std::string_view s) {
  for (bool changed = true; changed && !s.empty();) {
    changed = false;
    if ((s[0] == '-' || s[0] == '*' || s[0] == '>' || s[0] == '+') &&
        s.size() > 1 && s[1] == ' ') {
      s = trim(s.substr(2));
      changed = true;
      continue;
    }
    std::size_t i = s[0] == '(' ? 1 : 0;
    std::size_t digits = 0;
    while (i + digits < s.size() &&
           std::isdigit(static_cast<unsigned char>(s[i + digits])))
      ++digits;
    std::size_t end = i + digits;
    if (digits > 0 && digits <= 4 && end < s.size() &&
        (s[end] == ')' || s[end] == '.' || s[end] == ':')) {
      // A marker needs something after it: "0101." is an answer, not an
      // ordinal.
      auto rest = trim(s.substr(end + 1));
      if (rest.empty())
        break;
      s = rest;
      changed = true;
    }
  }
  return s;
}

bool is_binary_of_length(std::string_view s, std::int32_t n) {
  return n > 0 && s.size() == static_cast<std::size_t>(n) &&
         std::all_of(s.begin(), s.end(),
                     [](char c) { return c == '0' || c == '1'; });
}

// "-1 2 -3 ..." listing every variable exactly once, optionally 0-terminated.
std::optional<Assignment> signed_witness(std::string_view s, std::int32_t n) {
  std::vector<std::int32_t> values;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == ',' || s[i] == '\t'))
      ++i;
    if (i == s.size())
      break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != ',' && s[j] != '\t')
      ++j;
    std::int32_t v = 0;
    auto tok = s.substr(i, j - i);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
      return std::nullopt;
    values.push_back(v);
    i = j;
  }
  if (!values.empty() && values.back() == 0)
    values.pop_back();
  if (values.size() != static_cast<std::size_t>(n) || n <= 0)
    return std::nullopt;
  Assignment a(static_cast<std::size_t>(n));
  std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
  for (auto v : values) {
    auto var = v < 0 ? -v : v;
    if (v == 0 || var > n || seen[var])
      return std::nullopt;
    seen[var] = true;
    a.set(var, v > 0);
  }
  return a;
}

std::optional<Assignment> extract_assignment(std::string_view raw,
                                             std::int32_t n) {
  auto line = strip_decoration(strip_list_marker(trim(raw)));
  if (is_binary_of_length(line, n))
    return Assignment::from_string(line);
  // "Formula 3: 0100110010", "x = 0100110010", "3 -> 0100110010"
  auto last_space = line.find_last_of(" \t");
  if (last_space != std::string_view::npos) {
    auto tail = strip_decoration(line.substr(last_space + 1));
    auto head = trim(line.substr(0, last_space));
    bool labelled = !head.empty() &&
                    (head.back() == ':' || head.back() == '=' ||
                     head.ends_with("->") || head.ends_with("\xE2\x86\x92"));
    if (labelled && is_binary_of_length(tail, n))
      return Assignment::from_string(tail);
  }
  if (line.find_first_not_of("01 ,\t") == std::string_view::npos) {
    std::string packed;
    for (char c : line)
      if (c == '0' || c == '1')
        packed += c;
    if (is_binary_of_length(packed, n))
      return Assignment::from_string(packed);
  }
  if (line.find_first_not_of("-0123456789 ,\t") == std::string_view::npos)
    return signed_witness(line, n);
  return std::nullopt;
}

constexpr std::array<std::string_view, 6> kSolverKeywords = {
    "sat solver", "pycosat", "picosat", "minisat", "cryptominisat",
    "dpll solver"};

} // namespace

std::string build_priming_message() { return std::string(kPrimingMessage); }

std::string build_batch_prompt(std::span<const CnfInstance> instances,
                               std::size_t max_batch) {
  if (instances.empty())
    throw Error(ErrorCode::InvalidArgument, "batch prompt needs >= 1 instance");
  if (instances.size() > max_batch)
    throw Error(ErrorCode::InvalidArgument,
                "batch of " + std::to_string(instances.size()) +
                    " instances exceeds the configured size " +
                    std::to_string(max_batch));
  std::string out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (i)
      out += "\n\n";
    auto body = serialize_dimacs(instances[i]);
    while (!body.empty() && body.back() == '\n')
      body.pop_back();
    out += std::to_string(i + 1) + ") " + body;
  }
  return out;
}

std::string_view to_string(OutcomeKind kind) {
  switch (kind) {
  case OutcomeKind::Assignment:
    return "ASSIGNMENT";
  case OutcomeKind::Refusal:
    return "REFUSAL";
  case OutcomeKind::Unparseable:
    return "UNPARSEABLE";
  }
  return "UNPARSEABLE";
}

std::vector<RefusalRule> default_refusal_rules() {
  return {RefusalRule{"i'm sorry",
                      {"impractical", "recommend using a sat solver",
                       "due to the complexity"}}};
}

bool is_refusal(std::string_view reply, std::span<const RefusalRule> rules) {
  const auto text = normalise(reply);
  for (const auto &rule : rules) {
    if (text.find(normalise(rule.anchor)) == std::string::npos)
      continue;
    for (const auto &alt : rule.any_of)
      if (text.find(normalise(alt)) != std::string::npos)
        return true;
  }
  return false;
}

OracleResponse parse_response(std::string_view reply, std::int32_t n_vars,
                              std::size_t expected,
                              std::span<const RefusalRule> rules) {
  OracleResponse response;
  response.raw_reply = std::string(reply);

  std::vector<Assignment> found;
  std::string_view rest = reply;
  while (!rest.empty()) {
    auto nl = rest.find('\n');
    auto line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    std::string folded(trim(line));
    replace_all(folded, "\xE2\x88\x92", "-"); // U+2212 minus sign
    // Fence markers may carry a language tag; fenced content is scanned
    // like any other text.
    if (std::string_view(folded).starts_with("```"))
      continue;
    if (auto a = extract_assignment(folded, n_vars))
      found.push_back(std::move(*a));
  }

  if (found.size() > expected)
    response.warnings.push_back(
        "reply contains " + std::to_string(found.size()) +
        " assignments but only " + std::to_string(expected) +
        " were expected; extra ones ignored");

  const auto default_rules = default_refusal_rules();
  const bool refusal =
      is_refusal(reply, rules.empty() ? std::span<const RefusalRule>(default_rules)
                                      : rules);
  for (std::size_t i = 0; i < expected; ++i) {
    InstanceOutcome outcome;
    if (i < found.size()) {
      outcome.kind = OutcomeKind::Assignment;
      outcome.assignment = found[i];
      outcome.text = found[i].to_string();
    } else {
      outcome.kind = refusal ? OutcomeKind::Refusal : OutcomeKind::Unparseable;
      outcome.text = std::string(reply);
    }
    response.outcomes.push_back(std::move(outcome));
  }
  return response;
}

std::span<const std::string_view> solver_keywords() { return kSolverKeywords; }

std::vector<std::string> detect_solver_call(std::string_view log_text) {
  const auto text = normalise(log_text);
  std::vector<std::pair<std::size_t, std::string_view>> hits;
  for (auto kw : kSolverKeywords) {
    auto pos = text.find(kw);
    if (pos != std::string::npos)
      hits.emplace_back(pos, kw);
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const auto &a, const auto &b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (const auto &[pos, kw] : hits)
    out.emplace_back(kw);
  return out;
}

} // namespace ksat::llm
