#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ksatlab/error.hpp"

namespace ksat {

struct Literal {
  std::int32_t variable = 1; // 1-based
  bool negated = false;

  static Literal from_dimacs(std::int32_t value) {
    return Literal{value < 0 ? -value : value, value < 0};
  }
  std::int32_t to_dimacs() const { return negated ? -variable : variable; }

  /// True iff the literal holds when its variable takes `value`.
  bool satisfied_by(bool value) const { return value != negated; }

  friend bool operator==(const Literal &, const Literal &) = default;
};

struct Clause {
  std::vector<Literal> literals;

  friend bool operator==(const Clause &, const Clause &) = default;
};

/// A length-N bit vector; bits[i] is the value of variable i+1.
class Assignment {
public:
  Assignment() = default;
  explicit Assignment(std::size_t n_vars, bool value = false)
      : bits_(n_vars, value ? 1 : 0) {}
  explicit Assignment(std::vector<std::uint8_t> bits);

  /// Parses a string over {0,1}. Throws ParseError on any other character.
  static Assignment from_string(std::string_view text);
  std::string to_string() const;

  std::size_t size() const { return bits_.size(); }
  bool value(std::int32_t variable) const { return bits_[variable - 1] != 0; }
  void set(std::int32_t variable, bool value) {
    bits_[variable - 1] = value ? 1 : 0;
  }
  void flip(std::int32_t variable) { bits_[variable - 1] ^= 1; }

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const Assignment &, const Assignment &) = default;

private:
  std::vector<std::uint8_t> bits_;
};

/// A CNF formula together with the provenance carried in its comment lines.
struct CnfInstance {
  std::int32_t n_vars = 0;
  std::vector<Clause> clauses;
  std::optional<std::uint64_t> seed;
  /// Comment lines without the leading "c " marker.
  std::vector<std::string> comments;

  std::size_t num_clauses() const { return clauses.size(); }
  /// Common clause width K; 0 when widths are mixed or there are no clauses.
  std::int32_t k() const;
  double alpha() const {
    return n_vars > 0 ? static_cast<double>(clauses.size()) / n_vars : 0.0;
  }

  /// Throws Error(InvalidArgument) when a literal lies outside [1, N].
  void validate() const;

  friend bool operator==(const CnfInstance &, const CnfInstance &) = default;
};

CnfInstance parse_dimacs(std::string_view text);
CnfInstance load_dimacs(const std::string &path);
std::string serialize_dimacs(const CnfInstance &instance);

/// Number of clauses with no true literal. Throws on length mismatch.
std::size_t count_unsatisfied(const CnfInstance &instance,
                              const Assignment &assignment);
bool is_satisfying(const CnfInstance &instance, const Assignment &assignment);
/// count_unsatisfied / M. Throws Error(UndefinedInput) when M = 0.
double unsat_fraction(const CnfInstance &instance,
                      const Assignment &assignment);

/// Reads an assignment file: one {0,1}^N string per non-empty line.
std::vector<Assignment> read_assignment_lines(std::string_view text);

} // namespace ksat
